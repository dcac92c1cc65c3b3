//! Holds the `acceptance` test target, which checks `comptest` end to end
//! against reference rejection rates, closed-form oracles and calibration
//! bounds. Run it with `cargo test -p comptest-validation --test acceptance`.

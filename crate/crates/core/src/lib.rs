//! Power-enhanced two-sample mean tests for high-dimensional compositional data.
//!
//! The pipeline runs count table → pseudo-count imputation → relative
//! abundance → centered log-ratio (CLR) coordinates. It then computes a
//! maximum-type statistic (Gumbel calibrated) and a quadratic-type U-statistic
//! (normal calibrated), and combines their p-values with Fisher's method and
//! the Cauchy combination.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`). The
//! aliases at the bottom of this file pin the common concrete choices.
//!
//! ```
//! use comptest::{run_all_tests, CombinationWeights, TwoSampleClr};
//! use ndarray::array;
//!
//! let x = array![[0.1, -0.1, 0.0], [0.3, -0.2, -0.1], [-0.2, 0.1, 0.1], [0.0, 0.2, -0.2]];
//! let y = array![[0.2, 0.0, -0.2], [-0.1, -0.1, 0.2], [0.1, 0.1, -0.2], [0.0, -0.3, 0.3]];
//! let data = TwoSampleClr::<f64>::from_arrays(x, y).unwrap();
//! let results = run_all_tests(&data, 0.05, CombinationWeights::default()).unwrap();
//! assert_eq!(results.len(), 4);
//! ```

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod combine;
pub mod compositional;
pub mod dist;
pub mod error;
pub mod harness;
pub mod result;
pub mod simgen;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive};

pub use combine::{
    cauchy_statistic, cauchy_test, fisher_statistic, fisher_test, run_all_tests,
    CombinationWeights, TestSuite,
};
pub use compositional::{
    alr_transform, centering_projection, clr_transform, filter_min_total, impute_pseudo_count,
    to_relative_abundance, ClrMatrix, CompositionMatrix, CountMatrix,
};
pub use error::{Error, Result};
pub use max_test::{max_p_value, max_statistic, max_test, pooled_variances, MaxStatistic};
pub use quad_test::{quad_statistic, quad_test, t_statistic, trace_estimators, QuadIntermediates};
pub use result::{Method, TestResult, TwoSampleClr};
pub use harness::{
    independence_diagnostic, permutation_size_study, power_region_check, run_grid, run_scenario,
    run_scenario_as, GridConfig, RejectionTable, RunOptions,
};
pub use simgen::{CovarianceKind, Framework, Scenario, ScenarioConfig};

/// Floating-point scalar usable throughout the crate.
pub trait Scalar:
    Float
    + FromPrimitive
    + LinalgScalar
    + ScalarOperand
    + Sum
    + Send
    + Sync
    + Debug
    + Display
    + Default
    + serde::Serialize
    + for<'de> serde::Deserialize<'de>
{
    /// Converts an `f64` literal; panics only for values the type cannot
    /// represent at all, which never happens for `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub type CountMatrix64 = CountMatrix<f64>;
pub type CompositionMatrix64 = CompositionMatrix<f64>;
pub type ClrMatrix64 = ClrMatrix<f64>;
pub type TwoSampleClr64 = TwoSampleClr<f64>;
pub type TestResult64 = TestResult<f64>;
pub type QuadIntermediates64 = QuadIntermediates<f64>;

pub type CountMatrix32 = CountMatrix<f32>;
pub type CompositionMatrix32 = CompositionMatrix<f32>;
pub type ClrMatrix32 = ClrMatrix<f32>;
pub type TwoSampleClr32 = TwoSampleClr<f32>;
pub type TestResult32 = TestResult<f32>;

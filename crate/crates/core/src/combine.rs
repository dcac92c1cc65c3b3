//! Fisher and Cauchy combination of the maximum- and quadratic-type p-values.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dist::{cauchy_upper_quantile, cauchy_upper_tail, chi2_upper_quantile, chi2_upper_tail};
use crate::error::{Error, Result};
use crate::max_test::{centered_max, max_statistic, max_test_from_stat, MaxStatistic};
use crate::quad_test::{quad_statistic, quad_test_from_stat, QuadIntermediates};
use crate::result::{check_alpha, clamp_p, Method, TestResult, TwoSampleClr};
use crate::Scalar;

/// Nonnegative Cauchy weights summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinationWeights {
    w_max: f64,
    w_quad: f64,
}

impl CombinationWeights {
    pub fn new(w_max: f64, w_quad: f64) -> Result<Self> {
        let ok = w_max.is_finite()
            && w_quad.is_finite()
            && w_max >= 0.0
            && w_quad >= 0.0
            && (w_max + w_quad - 1.0).abs() <= 1e-12;
        if !ok {
            return Err(Error::input(format!(
                "weights must be nonnegative and sum to 1, got ({w_max}, {w_quad})"
            )));
        }
        Ok(Self { w_max, w_quad })
    }

    pub fn w_max(&self) -> f64 {
        self.w_max
    }

    pub fn w_quad(&self) -> f64 {
        self.w_quad
    }
}

impl Default for CombinationWeights {
    fn default() -> Self {
        Self {
            w_max: 0.5,
            w_quad: 0.5,
        }
    }
}

/// `F = -2 (log p_M + log p_Q)` on clamped p-values.
pub fn fisher_statistic<T: Scalar>(p_m: T, p_q: T) -> T {
    -T::lit(2.0) * (clamp_p(p_m).ln() + clamp_p(p_q).ln())
}

/// `C = w_M tan((0.5 - p_M) pi) + w_Q tan((0.5 - p_Q) pi)` on clamped p-values.
pub fn cauchy_statistic<T: Scalar>(p_m: T, p_q: T, w: CombinationWeights) -> T {
    let pi = T::lit(PI);
    let half = T::lit(0.5);
    T::lit(w.w_max) * ((half - clamp_p(p_m)) * pi).tan()
        + T::lit(w.w_quad) * ((half - clamp_p(p_q)) * pi).tan()
}

/// Rejects when `F >= q`, `q` the upper α-quantile of χ²₄; the p-value is
/// the exact χ²₄ tail `exp(-F/2)(1 + F/2)`.
pub fn fisher_test<T: Scalar>(p_m: T, p_q: T, alpha: T) -> Result<TestResult<T>> {
    check_alpha(alpha)?;
    let f = fisher_statistic(p_m, p_q);
    let critical_value = chi2_upper_quantile(alpha, 4)?;
    Ok(TestResult {
        method: Method::Fisher,
        statistic: f,
        p_value: clamp_p(chi2_upper_tail(f, 4)?),
        critical_value,
        reject: f >= critical_value,
        alpha,
    })
}

/// Rejects when `C >= tan((0.5 - alpha) pi)`.
pub fn cauchy_test<T: Scalar>(
    p_m: T,
    p_q: T,
    w: CombinationWeights,
    alpha: T,
) -> Result<TestResult<T>> {
    check_alpha(alpha)?;
    let c = cauchy_statistic(p_m, p_q, w);
    let critical_value = cauchy_upper_quantile(alpha)?;
    Ok(TestResult {
        method: Method::Cauchy,
        statistic: c,
        p_value: clamp_p(cauchy_upper_tail(c)),
        critical_value,
        reject: c >= critical_value,
        alpha,
    })
}

/// The four tests on one data set, with the shared intermediates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSuite<T> {
    pub max: TestResult<T>,
    pub quad: TestResult<T>,
    pub fisher: TestResult<T>,
    pub cauchy: TestResult<T>,
    pub max_detail: MaxStatistic<T>,
    /// `M - 2 log p + log log p`.
    pub max_centered: T,
    pub quad_detail: QuadIntermediates<T>,
}

impl<T: Scalar> TestSuite<T> {
    pub fn get(&self, method: Method) -> &TestResult<T> {
        match method {
            Method::Max => &self.max,
            Method::Quad => &self.quad,
            Method::Fisher => &self.fisher,
            Method::Cauchy => &self.cauchy,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &TestResult<T>> {
        [&self.max, &self.quad, &self.fisher, &self.cauchy].into_iter()
    }

    pub fn len(&self) -> usize {
        Method::ALL.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_map(&self) -> BTreeMap<Method, TestResult<T>> {
        self.iter().map(|r| (r.method, *r)).collect()
    }
}

/// Computes M and Q once, derives p_M and p_Q, then both combinations.
pub fn run_all_tests<T: Scalar>(
    d: &TwoSampleClr<T>,
    alpha: T,
    w: CombinationWeights,
) -> Result<TestSuite<T>> {
    check_alpha(alpha)?;
    let m = max_statistic(d)?;
    let (q, quad_detail) = quad_statistic(d)?;
    let max = max_test_from_stat(m.value, d.dim(), alpha)?;
    let quad = quad_test_from_stat(q, alpha)?;
    let fisher = fisher_test(max.p_value, quad.p_value, alpha)?;
    let cauchy = cauchy_test(max.p_value, quad.p_value, w, alpha)?;
    Ok(TestSuite {
        max,
        quad,
        fisher,
        cauchy,
        max_detail: m,
        max_centered: centered_max(m.value, d.dim())?,
        quad_detail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{sample_std_normal_matrix, RngStream};
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use proptest::prelude::*;

    #[test]
    fn fisher_examples() {
        assert_abs_diff_eq!(fisher_statistic(1.0f64, 1.0), 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(fisher_statistic(0.05f64, 0.05), 11.982929094215963, epsilon = 1e-12);
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(fisher_statistic(1.0 / e, 1.0 / (e * e)), 6.0, epsilon = 1e-14);
        // zero is clamped, not an error
        assert!(fisher_statistic(0.0f64, 0.5).is_finite());
    }

    #[test]
    fn fisher_test_examples() {
        let r = fisher_test(0.05f64, 0.05, 0.05).unwrap();
        assert!(r.reject);
        assert_abs_diff_eq!(r.critical_value, 9.487729036781158, epsilon = 1e-9);
        let r = fisher_test(1.0f64, 1.0, 0.05).unwrap();
        assert!(!r.reject);
        assert_abs_diff_eq!(r.p_value, 1.0, epsilon = 1e-14);
        assert!(fisher_test(0.5f64, 0.5, 0.0).is_err());
    }

    #[test]
    fn cauchy_examples() {
        let w = CombinationWeights::default();
        assert_abs_diff_eq!(cauchy_statistic(0.5f64, 0.5, w), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cauchy_statistic(0.01f64, 0.5, w), 15.910257976886927, epsilon = 1e-9);
        for &p in &[0.001, 0.2, 0.7] {
            assert_abs_diff_eq!(
                cauchy_statistic(p, p, w),
                ((0.5 - p) * PI).tan(),
                epsilon = 1e-9
            );
        }
        let r = cauchy_test(0.001f64, 0.9, w, 0.05).unwrap();
        assert_abs_diff_eq!(r.statistic, 157.61557772418317, epsilon = 1e-6);
        assert!(r.reject);
        let r0 = cauchy_test(0.5f64, 0.5, w, 0.05).unwrap();
        assert_abs_diff_eq!(r0.p_value, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn weights_validated() {
        assert!(CombinationWeights::new(0.3, 0.7).is_ok());
        assert!(CombinationWeights::new(1.0, 0.0).is_ok());
        assert!(CombinationWeights::new(0.6, 0.6).is_err());
        assert!(CombinationWeights::new(-0.1, 1.1).is_err());
    }

    #[test]
    fn identical_groups_no_rejections() {
        let mut rng = RngStream::new(17, 0);
        let x: Array2<f64> = sample_std_normal_matrix(&mut rng, 25, 60);
        let d = TwoSampleClr::from_arrays(x.clone(), x).unwrap();
        let suite = run_all_tests(&d, 0.05, CombinationWeights::default()).unwrap();
        assert_eq!(suite.len(), 4);
        assert!(suite.iter().all(|r| !r.reject));
        assert_eq!(suite.to_map().len(), 4);
    }

    #[test]
    fn suite_matches_component_tests() {
        let mut rng = RngStream::new(21, 0);
        let x: Array2<f64> = sample_std_normal_matrix(&mut rng, 25, 40);
        let y: Array2<f64> = sample_std_normal_matrix(&mut rng, 20, 40) + 0.2;
        let d = TwoSampleClr::from_arrays(x, y).unwrap();
        let suite = run_all_tests(&d, 0.05, CombinationWeights::default()).unwrap();
        assert_eq!(suite.max, crate::max_test::max_test(&d, 0.05).unwrap());
        assert_eq!(suite.quad, crate::quad_test::quad_test(&d, 0.05).unwrap());
        let f = fisher_test(suite.max.p_value, suite.quad.p_value, 0.05).unwrap();
        assert_eq!(suite.fisher, f);
        for r in suite.iter() {
            assert_eq!(r.reject, r.p_value <= r.alpha, "{:?}", r);
        }
    }

    proptest! {
        #[test]
        fn monotone_in_each_p_value(a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let w = CombinationWeights::default();
            prop_assert!(fisher_statistic(lo, c) >= fisher_statistic(hi, c));
            prop_assert!(fisher_statistic(c, lo) >= fisher_statistic(c, hi));
            prop_assert!(cauchy_statistic(lo, c, w) >= cauchy_statistic(hi, c, w));
            prop_assert!(cauchy_statistic(c, lo, w) >= cauchy_statistic(c, hi, w));
        }

        #[test]
        fn decisions_match_p_values(pm in 1e-6f64..1.0, pq in 1e-6f64..1.0, alpha in 0.005f64..0.2) {
            let f = fisher_test(pm, pq, alpha).unwrap();
            prop_assert_eq!(f.reject, f.p_value <= alpha);
            let c = cauchy_test(pm, pq, CombinationWeights::default(), alpha).unwrap();
            prop_assert_eq!(c.reject, c.p_value <= alpha);
        }
    }
}

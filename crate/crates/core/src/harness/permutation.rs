use std::collections::BTreeMap;

use ndarray::Axis;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{par_map, MethodCounts, ReplicationRecord, RunOptions};
use crate::combine::{run_all_tests, CombinationWeights};
use crate::dist::RngStream;
use crate::error::{Error, Result};
use crate::result::{Method, TwoSampleClr};
use crate::Scalar;

/// Rejection rates of the four tests over random relabellings of pooled data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationStudy {
    pub n1: usize,
    pub n2: usize,
    pub n_perms: usize,
    pub alpha: f64,
    pub seed: u64,
    pub stream_id: u64,
    pub rejections: MethodCounts,
    pub errors: usize,
    pub first_error: Option<String>,
}

impl PermutationStudy {
    pub fn rate(&self, m: Method) -> f64 {
        self.rejections.get(m) as f64 / self.n_perms as f64
    }

    pub fn rates(&self) -> BTreeMap<Method, f64> {
        self.rejections.rates(self.n_perms)
    }
}

/// Pools the rows of `d`, then `n_perms` times draws a uniformly random
/// split into groups of sizes `(n1, n2)` and runs all four tests.
///
/// Permutation `k` uses the stream `rng.derive(&[k])`, so results do not
/// depend on the thread count.
#[allow(clippy::too_many_arguments)]
pub fn permutation_size_study<T: Scalar>(
    d: &TwoSampleClr<T>,
    n1: usize,
    n2: usize,
    n_perms: usize,
    alpha: T,
    weights: CombinationWeights,
    rng: &RngStream,
    opts: &RunOptions,
) -> Result<PermutationStudy> {
    let total = d.n1() + d.n2();
    if n1 + n2 != total {
        return Err(Error::input(format!(
            "split {n1}:{n2} does not add up to the {total} pooled samples"
        )));
    }
    if n1 < 4 || n2 < 4 {
        return Err(Error::input(format!("each permuted group needs at least 4 samples, got {n1}:{n2}")));
    }
    if n_perms == 0 {
        return Err(Error::input("number of permutations must be positive"));
    }
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::input(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let pooled = d.pooled();
    let col_ids = d.col_ids().to_vec();
    let records = par_map(n_perms, opts, |k| -> Result<ReplicationRecord> {
        let mut stream = rng.derive(&[k as u64]);
        let mut idx: Vec<usize> = (0..total).collect();
        idx.shuffle(&mut stream);
        let x = pooled.select(Axis(0), &idx[..n1]);
        let y = pooled.select(Axis(0), &idx[n1..]);
        let split = TwoSampleClr::from_arrays(x, y)?.with_col_ids(col_ids.clone())?;
        Ok(ReplicationRecord::from(&run_all_tests(&split, alpha, weights)?))
    })?;

    let mut rejections = MethodCounts::default();
    let mut errors = 0;
    let mut first_error = None;
    for rec in &records {
        match rec {
            Ok(r) => rejections.add(r.rejects),
            Err(e) => {
                errors += 1;
                first_error.get_or_insert_with(|| e.to_string());
            }
        }
    }
    Ok(PermutationStudy {
        n1,
        n2,
        n_perms,
        alpha: alpha.as_f64(),
        seed: rng.seed(),
        stream_id: rng.stream_id(),
        rejections,
        errors,
        first_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::sample_std_normal_matrix;
    use ndarray::Array2;

    fn data() -> TwoSampleClr<f64> {
        let mut rng = RngStream::new(1, 0);
        let x: Array2<f64> = sample_std_normal_matrix(&mut rng, 12, 15);
        let y: Array2<f64> = sample_std_normal_matrix(&mut rng, 10, 15);
        TwoSampleClr::from_arrays(x, y).unwrap()
    }

    #[test]
    fn argument_checks() {
        let d = data();
        let rng = RngStream::new(2, 0);
        let w = CombinationWeights::default();
        let o = RunOptions::default();
        assert!(permutation_size_study(&d, 11, 10, 5, 0.05, w, &rng, &o).is_err());
        assert!(permutation_size_study(&d, 11, 11, 0, 0.05, w, &rng, &o).is_err());
        assert!(permutation_size_study(&d, 2, 20, 5, 0.05, w, &rng, &o).is_err());
    }

    #[test]
    fn reproducible_across_threads() {
        let d = data();
        let rng = RngStream::new(2, 0);
        let w = CombinationWeights::default();
        let a = permutation_size_study(&d, 11, 11, 30, 0.05, w, &rng, &RunOptions::with_threads(1)).unwrap();
        let b = permutation_size_study(&d, 11, 11, 30, 0.05, w, &rng, &RunOptions::with_threads(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.errors, 0);
        for (_, r) in a.rates() {
            assert!((0.0..=1.0).contains(&r));
        }
    }
}

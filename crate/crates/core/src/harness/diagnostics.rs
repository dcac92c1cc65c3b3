use ndarray::{Array1, Array2, Axis};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{replicate, tally, MethodCounts, RunOptions};
use crate::error::{Error, Result};
use crate::result::Method;
use crate::simgen::{Scenario, ScenarioConfig};

/// Levels at which the joint-rejection ratio is reported by default.
pub const DIAGNOSTIC_ALPHAS: [f64; 3] = [0.01, 0.05, 0.1];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndependenceCell {
    pub alpha: f64,
    /// Empirical P(p_Q <= alpha).
    pub p_quad: f64,
    /// Empirical P(p_M <= alpha).
    pub p_max: f64,
    /// Empirical P(p_Q <= alpha and p_M <= alpha).
    pub p_both: f64,
    /// `p_both / (p_quad + p_max)`; `None` when neither test ever rejects.
    pub ratio: Option<f64>,
}

/// Joint behaviour of the maximum- and quadratic-type statistics under the null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceReport {
    pub replications: usize,
    pub errors: usize,
    pub first_error: Option<String>,
    pub cells: Vec<IndependenceCell>,
    /// Pearson correlation of `Q` and `M - 2 log p + log log p`.
    pub correlation: Option<f64>,
}

impl IndependenceReport {
    pub fn cell(&self, alpha: f64) -> Option<&IndependenceCell> {
        self.cells.iter().find(|c| c.alpha == alpha)
    }
}

/// Joint-rejection cells from `(p_quad, p_max)` pairs.
pub fn independence_from_pairs(pairs: &[(f64, f64)], alphas: &[f64]) -> Vec<IndependenceCell> {
    let n = pairs.len() as f64;
    alphas
        .iter()
        .map(|&alpha| {
            let (mut q, mut m, mut both) = (0usize, 0usize, 0usize);
            for &(pq, pm) in pairs {
                let (rq, rm) = (pq <= alpha, pm <= alpha);
                q += rq as usize;
                m += rm as usize;
                both += (rq && rm) as usize;
            }
            let ratio = (q + m > 0).then(|| both as f64 / (q + m) as f64);
            IndependenceCell {
                alpha,
                p_quad: q as f64 / n,
                p_max: m as f64 / n,
                p_both: both as f64 / n,
                ratio,
            }
        })
        .collect()
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    if a.len() < 2 {
        return None;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

/// Estimates how often both component tests reject together under the null.
/// Under asymptotic independence the ratio is about `alpha / 2`.
pub fn independence_diagnostic(
    cfg: &ScenarioConfig,
    alphas: &[f64],
    opts: &RunOptions,
) -> Result<IndependenceReport> {
    if cfg.sparsity != 0.0 {
        return Err(Error::config("sparsity", "the independence diagnostic needs a null scenario"));
    }
    if alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
        return Err(Error::config("alphas", "every level must lie in (0, 1)"));
    }
    let scenario = Scenario::new(cfg.clone())?;
    let records = replicate::<f64>(&scenario, opts)?;
    let outcome = tally(cfg.clone(), &records);
    let ok: Vec<_> = records.iter().filter_map(|r| r.as_ref().ok()).collect();
    let pairs: Vec<(f64, f64)> = ok.iter().map(|r| (r.p_quad, r.p_max)).collect();
    let q: Vec<f64> = ok.iter().map(|r| r.q).collect();
    let m: Vec<f64> = ok.iter().map(|r| r.max_centered).collect();
    Ok(IndependenceReport {
        replications: cfg.replications,
        errors: outcome.errors,
        first_error: outcome.first_error,
        cells: independence_from_pairs(&pairs, alphas),
        correlation: pearson(&q, &m),
    })
}

/// Alternative regions on which the Fisher test has asymptotic power one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "region", rename_all = "snake_case")]
pub enum PowerRegion {
    /// Dense signal on the boundary
    /// `n1^2 ||G d||^4 / (n1 d' G W G d + tr((G W G)^2)) = eps0 log n1`,
    /// with `W = (1 + n1/n2) Omega`.
    Dense { epsilon0: f64 },
    /// `support` coordinates with `|(G d)_j| / sqrt((G W G)_jj)` at
    /// `sqrt((2 + eps0) log p / n1)`.
    Sparse { epsilon0: f64, support: usize },
}

impl PowerRegion {
    /// Sparse region with `max(1, round(0.01 p))` signal coordinates.
    pub fn sparse_default(epsilon0: f64, p: usize) -> Self {
        PowerRegion::Sparse {
            epsilon0,
            support: ((0.01 * p as f64).round() as usize).max(1),
        }
    }
}

/// `G W G` for `G = I - 11'/p` and symmetric `W`.
fn project_both_sides(w: &Array2<f64>) -> Array2<f64> {
    let row_means = w.mean_axis(Axis(1)).expect("nonempty");
    let grand = row_means.mean().expect("nonempty");
    Array2::from_shape_fn(w.raw_dim(), |(i, j)| w[[i, j]] - row_means[i] - row_means[j] + grand)
}

fn centre(v: &Array1<f64>) -> Array1<f64> {
    v - v.mean().expect("nonempty")
}

/// A mean difference `d` (group 2 minus group 1) lying on the boundary of `region`.
pub fn region_signal(
    region: PowerRegion,
    cov: &Array2<f64>,
    n1: usize,
    n2: usize,
    rng: &mut impl Rng,
) -> Result<Array1<f64>> {
    let p = cov.nrows();
    let (f1, f2) = (n1 as f64, n2 as f64);
    let w = cov * (1.0 + f1 / f2);
    let gwg = project_both_sides(&w);
    match region {
        PowerRegion::Dense { epsilon0 } => {
            if !(epsilon0 > 0.0) {
                return Err(Error::config("epsilon0", "must be positive"));
            }
            let v = Array1::from_shape_fn(p, |_| if rng.random_bool(0.5) { 1.0 } else { -1.0 });
            let gv = centre(&v);
            let a = gv.dot(&gv);
            if a == 0.0 {
                return Err(Error::Numerical("dense direction vanished after centring".into()));
            }
            let b = gv.dot(&w.dot(&gv));
            let d = gwg.iter().map(|x| x * x).sum::<f64>();
            let kappa = epsilon0 * f1.ln();
            // n1^2 a^2 x^2 - kappa n1 b x - kappa d = 0 in x = c^2
            let qa = f1 * f1 * a * a;
            let qb = kappa * f1 * b;
            let x = (qb + (qb * qb + 4.0 * qa * kappa * d).sqrt()) / (2.0 * qa);
            Ok(v * x.sqrt())
        }
        PowerRegion::Sparse { epsilon0, support } => {
            if !(epsilon0 > 0.0) {
                return Err(Error::config("epsilon0", "must be positive"));
            }
            if support == 0 || support >= p {
                return Err(Error::config("support", format!("must lie in 1..{p}")));
            }
            let level = ((2.0 + epsilon0) * (p as f64).ln() / f1).sqrt();
            let idx = sample_indices(rng, p, support).into_vec();
            let mut d = Array1::<f64>::zeros(p);
            for &j in &idx {
                d[j] = level * gwg[[j, j]].sqrt();
            }
            // centring shrinks every support coordinate a little; scale back up
            let gd = centre(&d);
            let shortfall = idx
                .iter()
                .map(|&j| gd[j] / d[j])
                .fold(f64::INFINITY, f64::min);
            Ok(d / shortfall)
        }
    }
}

/// Rejection rates with a signal placed on a power region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCheck {
    pub region: PowerRegion,
    pub replications: usize,
    pub rejections: MethodCounts,
    pub errors: usize,
    /// `||G d||^2` of the planted difference.
    pub signal_norm_sq: f64,
}

impl PowerCheck {
    pub fn rate(&self, m: Method) -> f64 {
        self.rejections.get(m) as f64 / self.replications as f64
    }
}

/// Runs `cfg` with its signal replaced by one on the boundary of `region`.
pub fn power_region_check(
    cfg: &ScenarioConfig,
    region: PowerRegion,
    opts: &RunOptions,
) -> Result<PowerCheck> {
    let covariance = cfg.build_covariance()?;
    let mut rng = cfg.aux_stream("region");
    let d = region_signal(region, covariance.matrix(), cfg.n1, cfg.n2, &mut rng)?;
    let gd = centre(&d);
    let scenario = Scenario::with_signal(cfg.clone(), covariance, d)?;
    let records = replicate::<f64>(&scenario, opts)?;
    let outcome = tally(cfg.clone(), &records);
    Ok(PowerCheck {
        region,
        replications: cfg.replications,
        rejections: outcome.rejections,
        errors: outcome.errors,
        signal_norm_sq: gd.dot(&gd),
    })
}

//! Monte Carlo experiments: rejection-rate tables, permutation size
//! studies, the independence diagnostic and power-region checks.
//!
//! Replications run on a rayon pool. Every replication owns an RNG stream
//! derived from `(master_seed, scenario key, r)` and results are collected
//! in replication order, so output does not depend on the thread count.

mod diagnostics;
mod permutation;
mod table;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combine::{run_all_tests, TestSuite};
use crate::error::{Error, Result};
use crate::result::Method;
use crate::simgen::{Scenario, ScenarioConfig};
use crate::Scalar;

pub use diagnostics::{
    independence_diagnostic, independence_from_pairs, power_region_check, region_signal,
    IndependenceCell, IndependenceReport, PowerCheck, PowerRegion, DIAGNOSTIC_ALPHAS,
};
pub use permutation::{permutation_size_study, PermutationStudy};
pub use table::{run_grid, GridConfig, GridEntry, RejectionTable, TableRow, GRID_CONFIG_VERSION};

/// Execution settings that do not affect results.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
}

impl RunOptions {
    pub fn with_threads(threads: usize) -> Self {
        Self {
            threads: Some(threads),
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(t) = self.threads {
            if t == 0 {
                return Err(Error::config("threads", "must be at least 1"));
            }
            builder = builder.num_threads(t);
        }
        builder
            .build()
            .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))
    }
}

/// `f(0), ..., f(n-1)` evaluated on the pool, returned in index order.
pub(crate) fn par_map<R, F>(n: usize, opts: &RunOptions, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    let pool = opts.pool()?;
    Ok(pool.install(|| (0..n).into_par_iter().map(&f).collect()))
}

/// Rejection counts per method.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodCounts {
    pub max: usize,
    pub quad: usize,
    pub fisher: usize,
    pub cauchy: usize,
}

impl MethodCounts {
    pub fn get(&self, m: Method) -> usize {
        match m {
            Method::Max => self.max,
            Method::Quad => self.quad,
            Method::Fisher => self.fisher,
            Method::Cauchy => self.cauchy,
        }
    }

    fn add(&mut self, rejects: [bool; 4]) {
        self.max += rejects[0] as usize;
        self.quad += rejects[1] as usize;
        self.fisher += rejects[2] as usize;
        self.cauchy += rejects[3] as usize;
    }

    /// Fractions over `total` trials.
    pub fn rates(&self, total: usize) -> BTreeMap<Method, f64> {
        Method::ALL
            .iter()
            .map(|&m| (m, if total == 0 { f64::NAN } else { self.get(m) as f64 / total as f64 }))
            .collect()
    }
}

/// What one replication contributes to the tallies and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicationRecord {
    pub rejects: [bool; 4],
    pub p_max: f64,
    pub p_quad: f64,
    pub q: f64,
    pub max_centered: f64,
}

impl<T: Scalar> From<&TestSuite<T>> for ReplicationRecord {
    fn from(s: &TestSuite<T>) -> Self {
        Self {
            rejects: [s.max.reject, s.quad.reject, s.fisher.reject, s.cauchy.reject],
            p_max: s.max.p_value.as_f64(),
            p_quad: s.quad.p_value.as_f64(),
            q: s.quad.statistic.as_f64(),
            max_centered: s.max_centered.as_f64(),
        }
    }
}

/// Tallied replications of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub config: ScenarioConfig,
    pub rejections: MethodCounts,
    /// Replications aborted by a component error. They count as
    /// non-rejections in the rates; a healthy run has none.
    pub errors: usize,
    pub first_error: Option<String>,
}

impl ScenarioOutcome {
    /// Rejection fraction over all requested replications.
    pub fn rate(&self, m: Method) -> f64 {
        self.rejections.get(m) as f64 / self.config.replications as f64
    }

    pub fn rates(&self) -> BTreeMap<Method, f64> {
        self.rejections.rates(self.config.replications)
    }
}

/// Every replication of a prepared scenario, in replication order.
pub(crate) fn replicate<T: Scalar>(
    scenario: &Scenario,
    opts: &RunOptions,
) -> Result<Vec<Result<ReplicationRecord>>> {
    let cfg = scenario.config();
    let alpha = T::lit(cfg.alpha);
    par_map(cfg.replications, opts, |r| {
        let d = scenario.sample::<T>(r)?;
        let suite = run_all_tests(&d, alpha, cfg.weights)?;
        Ok(ReplicationRecord::from(&suite))
    })
}

pub(crate) fn tally(
    config: ScenarioConfig,
    records: &[Result<ReplicationRecord>],
) -> ScenarioOutcome {
    let mut rejections = MethodCounts::default();
    let mut errors = 0;
    let mut first_error = None;
    for rec in records {
        match rec {
            Ok(r) => rejections.add(r.rejects),
            Err(e) => {
                errors += 1;
                first_error.get_or_insert_with(|| e.to_string());
            }
        }
    }
    ScenarioOutcome {
        config,
        rejections,
        errors,
        first_error,
    }
}

/// Runs one scenario in `f64`.
pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<ScenarioOutcome> {
    run_scenario_as::<f64>(cfg, opts)
}

/// Runs one scenario with the tests evaluated in scalar type `T`.
pub fn run_scenario_as<T: Scalar>(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<ScenarioOutcome> {
    let scenario = Scenario::new(cfg.clone())?;
    let records = replicate::<T>(&scenario, opts)?;
    Ok(tally(cfg.clone(), &records))
}

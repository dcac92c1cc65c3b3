use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{run_scenario, RunOptions, ScenarioOutcome};
use crate::combine::CombinationWeights;
use crate::error::{Error, Result};
use crate::result::Method;
use crate::simgen::{CovarianceKind, Framework, ScenarioConfig, DEFAULT_TARGET_RATIO};

/// Schema version accepted by [`GridConfig::from_json`].
pub const GRID_CONFIG_VERSION: u32 = 1;

/// One row of a rejection table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub cov_family: String,
    pub rho: Option<f64>,
    pub framework: Framework,
    pub n1: usize,
    pub n2: usize,
    pub p: usize,
    pub sparsity: f64,
    pub target_ratio: f64,
    pub alpha: f64,
    pub replications: usize,
    pub master_seed: u64,
    pub max: f64,
    pub quad: f64,
    pub fisher: f64,
    pub cauchy: f64,
    pub errors: usize,
}

impl TableRow {
    pub fn rate(&self, m: Method) -> f64 {
        match m {
            Method::Max => self.max,
            Method::Quad => self.quad,
            Method::Fisher => self.fisher,
            Method::Cauchy => self.cauchy,
        }
    }
}

impl From<&ScenarioOutcome> for TableRow {
    fn from(o: &ScenarioOutcome) -> Self {
        let c = &o.config;
        let rho = match c.covariance {
            CovarianceKind::Ar1 { rho } => Some(rho),
            CovarianceKind::BlockSparse => None,
        };
        Self {
            cov_family: c.covariance.family().to_string(),
            rho,
            framework: c.framework,
            n1: c.n1,
            n2: c.n2,
            p: c.p,
            sparsity: c.sparsity,
            target_ratio: c.target_ratio,
            alpha: c.alpha,
            replications: c.replications,
            master_seed: c.master_seed,
            max: o.rate(Method::Max),
            quad: o.rate(Method::Quad),
            fisher: o.rate(Method::Fisher),
            cauchy: o.rate(Method::Cauchy),
            errors: o.errors,
        }
    }
}

/// Empirical rejection fractions, one row per scenario in input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionTable {
    pub rows: Vec<TableRow>,
}

const CSV_HEADER: &str = "cov_family,rho,framework,n1,n2,p,sparsity,target_ratio,alpha,replications,master_seed,max,quad,fisher,cauchy,errors";

impl RejectionTable {
    pub fn total_errors(&self) -> usize {
        self.rows.iter().map(|r| r.errors).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let rho = r.rho.map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.cov_family,
                rho,
                r.framework,
                r.n1,
                r.n2,
                r.p,
                r.sparsity,
                r.target_ratio,
                r.alpha,
                r.replications,
                r.master_seed,
                r.max,
                r.quad,
                r.fisher,
                r.cauchy,
                r.errors
            )
            .expect("writing to a String");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}

/// Runs each scenario in turn; rows keep the order of `cfgs`.
pub fn run_grid(cfgs: &[ScenarioConfig], opts: &RunOptions) -> Result<RejectionTable> {
    if cfgs.is_empty() {
        return Err(Error::config("scenarios", "the grid is empty"));
    }
    let rows = cfgs
        .iter()
        .map(|c| run_scenario(c, opts).map(|o| TableRow::from(&o)))
        .collect::<Result<_>>()?;
    Ok(RejectionTable { rows })
}

fn default_replications() -> usize {
    500
}

fn default_alpha() -> f64 {
    0.05
}

/// A block of scenarios sharing covariance and framework.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridEntry {
    pub covariance: CovarianceKind,
    pub framework: Framework,
    /// `[n1, n2, p]` triples.
    pub sizes: Vec<[usize; 3]>,
    pub sparsity: Vec<f64>,
    #[serde(default)]
    pub target_ratio: Option<f64>,
    /// Overrides the grid-wide replication count.
    #[serde(default)]
    pub replications: Option<usize>,
}

/// Versioned JSON description of a simulation grid.
///
/// ```json
/// {
///   "version": 1,
///   "master_seed": 20240101,
///   "replications": 500,
///   "alpha": 0.05,
///   "scenarios": [
///     {"covariance": {"family": "ar1", "rho": 0.5}, "framework": "gaussian",
///      "sizes": [[100, 100, 200]], "sparsity": [0.0, 0.01, 0.2, 0.5]}
///   ]
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub version: u32,
    pub master_seed: u64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub weights: CombinationWeights,
    pub scenarios: Vec<GridEntry>,
}

impl GridConfig {
    /// Parses and validates; errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: GridConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { "config".to_string() } else { path }, e.inner().to_string())
        })?;
        if cfg.version != GRID_CONFIG_VERSION {
            return Err(Error::config(
                "version",
                format!("unsupported version {}, expected {GRID_CONFIG_VERSION}", cfg.version),
            ));
        }
        cfg.expand()?;
        Ok(cfg)
    }

    /// One scenario per `(entry, size, sparsity)`, in that nesting order.
    pub fn expand(&self) -> Result<Vec<ScenarioConfig>> {
        if self.scenarios.is_empty() {
            return Err(Error::config("scenarios", "no scenarios listed"));
        }
        let mut out = Vec::new();
        for (i, e) in self.scenarios.iter().enumerate() {
            if e.sizes.is_empty() {
                return Err(Error::config(format!("scenarios[{i}].sizes"), "empty list"));
            }
            if e.sparsity.is_empty() {
                return Err(Error::config(format!("scenarios[{i}].sparsity"), "empty list"));
            }
            for &[n1, n2, p] in &e.sizes {
                for &sparsity in &e.sparsity {
                    let cfg = ScenarioConfig {
                        n1,
                        n2,
                        p,
                        covariance: e.covariance,
                        framework: e.framework,
                        sparsity,
                        target_ratio: e.target_ratio.unwrap_or(DEFAULT_TARGET_RATIO),
                        alpha: self.alpha,
                        replications: e.replications.unwrap_or(self.replications),
                        master_seed: self.master_seed,
                        weights: self.weights,
                    };
                    cfg.validate().map_err(|err| match err {
                        Error::Config { field, message } => {
                            Error::config(format!("scenarios[{i}].{field}"), message)
                        }
                        other => other,
                    })?;
                    out.push(cfg);
                }
            }
        }
        Ok(out)
    }
}

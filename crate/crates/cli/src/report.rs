//! JSON reports. Every report records the parameters and seed needed to
//! rerun the command.

use std::fs;
use std::path::Path;

use comptest::harness::{PermutationStudy, TableRow};
use comptest::{Method, TestResult};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::input::{InputDigest, Preprocessing};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    pub critical_value: f64,
    pub alpha: f64,
}

impl From<&TestResult<f64>> for MethodResult {
    fn from(r: &TestResult<f64>) -> Self {
        Self {
            method: r.method,
            statistic: r.statistic,
            p_value: r.p_value,
            reject: r.reject,
            critical_value: r.critical_value,
            alpha: r.alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestParams {
    pub alpha: f64,
    pub pseudo_count: f64,
    pub tests: Vec<Method>,
    pub weights: [f64; 2],
    pub min_count: Option<f64>,
    pub drop_degenerate: bool,
    pub transpose: bool,
    pub label_column: Option<String>,
}

/// Output of `comptest test`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub command: String,
    pub params: TestParams,
    pub results: Vec<MethodResult>,
    pub preprocessing: Preprocessing,
    pub inputs: Vec<InputDigest>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermuteParams {
    pub alpha: f64,
    pub pseudo_count: f64,
    pub weights: [f64; 2],
    pub permutations: usize,
    pub split: [usize; 2],
    pub min_count: Option<f64>,
    pub drop_degenerate: bool,
    pub transpose: bool,
    pub label_column: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationRate {
    pub method: Method,
    pub rejections: usize,
    pub rate: f64,
}

/// Output of `comptest permute`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermuteReport {
    pub version: String,
    pub command: String,
    pub params: PermuteParams,
    pub results: Vec<PermutationRate>,
    pub errors: usize,
    pub first_error: Option<String>,
    pub preprocessing: Preprocessing,
    pub inputs: Vec<InputDigest>,
    pub seed: u64,
    pub stream_id: u64,
}

impl PermuteReport {
    pub fn rates_from(study: &PermutationStudy) -> Vec<PermutationRate> {
        Method::ALL
            .iter()
            .map(|&m| PermutationRate {
                method: m,
                rejections: study.rejections.get(m),
                rate: study.rate(m),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateParams {
    pub replications_override: Option<usize>,
    pub scenarios: usize,
}

/// Output of `comptest simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub version: String,
    pub command: String,
    pub params: SimulateParams,
    pub results: Vec<TableRow>,
    pub errors: usize,
    pub inputs: Vec<InputDigest>,
    pub seed: u64,
}

pub fn to_json<S: Serialize>(report: &S) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}

pub fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

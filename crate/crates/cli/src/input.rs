//! Resolving two groups from the command line and turning counts into CLR data.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use clap::Args;
use comptest::{
    clr_transform, filter_min_total, impute_pseudo_count, to_relative_abundance, CountMatrix,
    TwoSampleClr,
};
use ndarray::{concatenate, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::{parse_table, read_bytes, sha256_hex, IdColumn, Table};

/// Where the two groups come from.
#[derive(Debug, Clone, Args)]
pub struct GroupArgs {
    /// CSV of group-1 samples.
    #[arg(long, requires = "group2", conflicts_with = "data")]
    pub group1: Option<PathBuf>,

    /// CSV of group-2 samples.
    #[arg(long, requires = "group1")]
    pub group2: Option<PathBuf>,

    /// Single CSV holding both groups; needs --label-column.
    #[arg(long, requires = "label_column")]
    pub data: Option<PathBuf>,

    /// Column of --data whose two distinct values define the groups
    /// (group 1 is the value seen first).
    #[arg(long)]
    pub label_column: Option<String>,

    /// Input files are taxa-by-samples instead of samples-by-taxa.
    #[arg(long)]
    pub transpose: bool,

    /// Whether the first column holds sample ids.
    #[arg(long, value_enum, default_value = "auto")]
    pub id_column: IdColumn,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Preprocessing applied before testing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub pseudo_count: f64,
    pub min_count: Option<f64>,
    pub dropped_by_filter: Vec<String>,
    pub drop_degenerate: bool,
    pub dropped_degenerate: Vec<String>,
    pub n1: usize,
    pub n2: usize,
    pub taxa_in: usize,
    pub taxa_used: usize,
}

pub struct LoadedGroups {
    pub g1: CountMatrix<f64>,
    pub g2: CountMatrix<f64>,
    pub digests: Vec<InputDigest>,
}

fn load(path: &Path, transpose: bool, ids: IdColumn, label: Option<&str>) -> CliResult<(Table, InputDigest)> {
    let bytes = read_bytes(path)?;
    let name = path.display().to_string();
    let table = parse_table(&bytes, &name, transpose, ids, label)?;
    let digest = InputDigest {
        path: name,
        sha256: sha256_hex(&bytes),
    };
    Ok((table, digest))
}

fn to_counts(t: Table, what: &str) -> CliResult<CountMatrix<f64>> {
    CountMatrix::new(t.values, t.row_ids, t.col_ids)
        .map_err(|e| CliError::Data(format!("{what}: {e}")))
}

/// Puts group 2's columns in group 1's order; different column sets are an error.
fn align_columns(g1: Table, mut g2: Table) -> CliResult<(Table, Table)> {
    if g1.col_ids == g2.col_ids {
        return Ok((g1, g2));
    }
    let s1: HashSet<&String> = g1.col_ids.iter().collect();
    let s2: HashSet<&String> = g2.col_ids.iter().collect();
    if s1.len() != g1.col_ids.len() || s2.len() != g2.col_ids.len() {
        return Err(CliError::Data("duplicate column headers".into()));
    }
    if s1 != s2 {
        let mut only1: Vec<_> = s1.difference(&s2).map(|s| s.as_str()).collect();
        let mut only2: Vec<_> = s2.difference(&s1).map(|s| s.as_str()).collect();
        only1.sort_unstable();
        only2.sort_unstable();
        return Err(CliError::Data(format!(
            "column mismatch between groups: only in group 1 {only1:?}, only in group 2 {only2:?}"
        )));
    }
    let order: Vec<usize> = g1
        .col_ids
        .iter()
        .map(|c| g2.col_ids.iter().position(|d| d == c).expect("same set"))
        .collect();
    g2.values = g2.values.select(Axis(1), &order);
    g2.col_ids = g1.col_ids.clone();
    Ok((g1, g2))
}

fn split_by_label(t: Table, label: &str) -> CliResult<(Table, Table)> {
    let labels = t.labels.clone().expect("label column requested");
    let mut levels: Vec<&str> = Vec::new();
    for v in &labels {
        if !levels.contains(&v.as_str()) {
            levels.push(v);
        }
    }
    if levels.len() != 2 {
        return Err(CliError::Data(format!(
            "label column `{label}` must hold exactly two distinct values, found {}",
            levels.len()
        )));
    }
    let pick = |level: &str| {
        let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == level).collect();
        Table {
            row_ids: rows.iter().map(|&i| t.row_ids[i].clone()).collect(),
            col_ids: t.col_ids.clone(),
            values: t.values.select(Axis(0), &rows),
            id_header: t.id_header.clone(),
            labels: None,
        }
    };
    Ok((pick(levels[0]), pick(levels[1])))
}

impl GroupArgs {
    pub fn load(&self) -> CliResult<LoadedGroups> {
        let (t1, t2, digests) = match (&self.group1, &self.group2, &self.data, &self.label_column) {
            (Some(a), Some(b), None, _) => {
                let (t1, d1) = load(a, self.transpose, self.id_column, None)?;
                let (t2, d2) = load(b, self.transpose, self.id_column, None)?;
                (t1, t2, vec![d1, d2])
            }
            (None, None, Some(path), Some(label)) => {
                let (t, d) = load(path, self.transpose, self.id_column, Some(label))?;
                let (t1, t2) = split_by_label(t, label)?;
                (t1, t2, vec![d])
            }
            _ => {
                return Err(CliError::Usage(
                    "give either --group1 and --group2, or --data with --label-column".into(),
                ))
            }
        };
        let (t1, t2) = align_columns(t1, t2)?;
        Ok(LoadedGroups {
            g1: to_counts(t1, "group 1")?,
            g2: to_counts(t2, "group 2")?,
            digests,
        })
    }
}

/// Filter on pooled totals, impute zeros, close rows, CLR-transform, and
/// optionally drop zero-variance columns.
pub fn preprocess(
    groups: &LoadedGroups,
    pseudo_count: f64,
    min_count: Option<f64>,
    drop_degenerate: bool,
) -> CliResult<(TwoSampleClr<f64>, Preprocessing)> {
    let (n1, n2) = (groups.g1.nrows(), groups.g2.nrows());
    let taxa_in = groups.g1.ncols();
    let mut row_ids = groups.g1.row_ids().to_vec();
    row_ids.extend_from_slice(groups.g2.row_ids());
    let pooled_values = concatenate(Axis(0), &[groups.g1.values().view(), groups.g2.values().view()])
        .expect("aligned columns");
    let pooled = CountMatrix::new(pooled_values, row_ids, groups.g1.col_ids().to_vec())?;
    let (pooled, dropped_by_filter) = match min_count {
        Some(k) => filter_min_total(&pooled, k)?,
        None => (pooled, Vec::new()),
    };
    let imputed = impute_pseudo_count(&pooled, pseudo_count)?;
    let clr = clr_transform(&to_relative_abundance(&imputed)?);
    let col_ids = clr.col_ids().to_vec();
    let values = clr.into_values();
    let x = values.slice(ndarray::s![..n1, ..]).to_owned();
    let y = values.slice(ndarray::s![n1.., ..]).to_owned();
    let mut data = TwoSampleClr::from_arrays(x, y)?.with_col_ids(col_ids)?;
    let mut dropped_degenerate = Vec::new();
    if drop_degenerate {
        let (reduced, idx) = data.drop_degenerate_columns()?;
        dropped_degenerate = idx.iter().map(|&j| data.col_ids()[j].clone()).collect();
        data = reduced;
    }
    let taxa_used = data.dim();
    Ok((
        data,
        Preprocessing {
            pseudo_count,
            min_count,
            dropped_by_filter,
            drop_degenerate,
            dropped_degenerate,
            n1,
            n2,
            taxa_in,
            taxa_used,
        },
    ))
}

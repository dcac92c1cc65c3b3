//! CSV tables: rows are samples, columns are taxa, the first row holds
//! headers and an optional first column holds sample ids. `transpose`
//! accepts the taxa-by-samples layout instead.

use std::fs;
use std::path::Path;

use clap::ValueEnum;
use ndarray::Array2;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IdColumn {
    /// Treat the first column as ids when its header looks like one or none
    /// of its cells is numeric.
    Auto,
    Yes,
    No,
}

/// A numeric table with row (sample) and column (taxon) labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub row_ids: Vec<String>,
    pub col_ids: Vec<String>,
    pub values: Array2<f64>,
    /// Header of the id column, if the input had one.
    pub id_header: Option<String>,
    /// Values of the label column, when one was requested.
    pub labels: Option<Vec<String>>,
}

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Raw cells with a rectangularity check; `what` names the source in errors.
fn read_grid(bytes: &[u8], what: &str) -> CliResult<Vec<Vec<String>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut grid: Vec<Vec<String>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Data(format!("{what}: malformed CSV near line {}: {e}", i + 1)))?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        grid.push(rec.iter().map(str::to_string).collect());
    }
    if grid.is_empty() {
        return Err(CliError::Data(format!("{what}: file is empty")));
    }
    let width = grid[0].len();
    if let Some((i, row)) = grid.iter().enumerate().find(|(_, r)| r.len() != width) {
        return Err(CliError::Data(format!(
            "{what}: ragged rows: line {} has {} fields but the header has {width}",
            i + 1,
            row.len()
        )));
    }
    Ok(grid)
}

fn transpose(grid: Vec<Vec<String>>) -> Vec<Vec<String>> {
    let width = grid[0].len();
    (0..width).map(|j| grid.iter().map(|r| r[j].clone()).collect()).collect()
}

fn looks_like_id_header(h: &str) -> bool {
    let h = h.trim().to_ascii_lowercase();
    h.is_empty() || matches!(h.as_str(), "id" | "sample" | "sample_id" | "sampleid" | "#sampleid" | "taxon" | "otu" | "#otu id")
}

/// Parses a numeric table; with `transpose` the file is read taxa-by-samples.
/// A `label_column`, if given, is removed and returned as text.
pub fn parse_table(
    bytes: &[u8],
    what: &str,
    transpose_input: bool,
    ids: IdColumn,
    label_column: Option<&str>,
) -> CliResult<Table> {
    let mut grid = read_grid(bytes, what)?;
    if transpose_input {
        grid = transpose(grid);
    }
    if grid.len() < 2 {
        return Err(CliError::Data(format!("{what}: no data rows below the header")));
    }
    let mut labels = None;
    if let Some(label) = label_column {
        let j = grid[0]
            .iter()
            .position(|h| h == label)
            .ok_or_else(|| CliError::Data(format!("{what}: label column `{label}` not found")))?;
        labels = Some(grid[1..].iter().map(|r| r[j].clone()).collect());
        for row in grid.iter_mut() {
            row.remove(j);
        }
    }
    let header = grid[0].clone();
    let body = &grid[1..];
    let has_ids = match ids {
        IdColumn::Yes => true,
        IdColumn::No => false,
        IdColumn::Auto => {
            looks_like_id_header(&header[0]) || body.iter().all(|r| r[0].parse::<f64>().is_err())
        }
    };
    let start = has_ids as usize;
    if header.len() <= start {
        return Err(CliError::Data(format!("{what}: no numeric columns")));
    }
    let col_ids: Vec<String> = header[start..].to_vec();
    let row_ids: Vec<String> = if has_ids {
        body.iter().map(|r| r[0].clone()).collect()
    } else {
        (1..=body.len()).map(|i| format!("s{i}")).collect()
    };
    let mut values = Array2::<f64>::zeros((body.len(), col_ids.len()));
    for (i, row) in body.iter().enumerate() {
        for (j, cell) in row[start..].iter().enumerate() {
            values[[i, j]] = cell.parse::<f64>().map_err(|_| {
                let (line, col) = if transpose_input { (start + j + 1, i + 2) } else { (i + 2, start + j + 1) };
                CliError::Data(format!(
                    "{what}: non-numeric cell `{cell}` at line {line}, column {col}"
                ))
            })?;
        }
    }
    Ok(Table {
        row_ids,
        col_ids,
        values,
        id_header: has_ids.then(|| header[0].clone()),
        labels,
    })
}

/// Writes a table in the same orientation it would be read back with.
pub fn format_table(t: &Table, transpose_output: bool) -> String {
    let mut grid: Vec<Vec<String>> = Vec::with_capacity(t.values.nrows() + 1);
    let id_header = t.id_header.clone().unwrap_or_else(|| "sample_id".to_string());
    let mut header = vec![id_header];
    header.extend(t.col_ids.iter().cloned());
    grid.push(header);
    for (i, row) in t.values.outer_iter().enumerate() {
        let mut line = vec![t.row_ids[i].clone()];
        line.extend(row.iter().map(|v| format!("{v}")));
        grid.push(line);
    }
    if transpose_output {
        grid = transpose(grid);
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    for line in &grid {
        writer.write_record(line).expect("writing to memory");
    }
    String::from_utf8(writer.into_inner().expect("flush to memory")).expect("utf-8 input")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_with_and_without_ids() {
        let with = parse_table(b"id,a,b\nx,1,2\ny,3,4\n", "t", false, IdColumn::Auto, None).unwrap();
        assert_eq!(with.row_ids, vec!["x", "y"]);
        assert_eq!(with.col_ids, vec!["a", "b"]);
        let without = parse_table(b"a,b\n1,2\n3,4\n", "t", false, IdColumn::Auto, None).unwrap();
        assert_eq!(without.row_ids, vec!["s1", "s2"]);
        assert_eq!(without.values, with.values);
    }

    #[test]
    fn transposed_layout() {
        let t = parse_table(b"taxon,x,y\na,1,3\nb,2,4\n", "t", true, IdColumn::Auto, None).unwrap();
        assert_eq!(t.row_ids, vec!["x", "y"]);
        assert_eq!(t.col_ids, vec!["a", "b"]);
        assert_eq!(t.values[[1, 0]], 3.0);
    }

    #[test]
    fn distinct_errors() {
        let ragged = parse_table(b"a,b\n1,2\n3\n", "t", false, IdColumn::Auto, None).unwrap_err();
        assert!(ragged.to_string().contains("ragged"), "{ragged}");
        let text = parse_table(b"id,a,b\nx,1,oops\n", "t", false, IdColumn::Auto, None).unwrap_err();
        assert!(text.to_string().contains("non-numeric cell `oops`"), "{text}");
    }

    #[test]
    fn round_trip_keeps_digits() {
        let src = b"sample_id,a,b\nx,0.1234567890123456,3\ny,1e-300,12345678901234567\n";
        let t = parse_table(src, "t", false, IdColumn::Auto, None).unwrap();
        let back = parse_table(format_table(&t, false).as_bytes(), "t", false, IdColumn::Auto, None).unwrap();
        assert_eq!(back, t);
        let tt = parse_table(format_table(&t, true).as_bytes(), "t", true, IdColumn::Auto, None).unwrap();
        assert_eq!(tt.values, t.values);
    }

    #[test]
    fn label_column_is_text() {
        let t = parse_table(b"id,grp,a,b\nx,case,1,2\ny,ctrl,3,4\n", "t", false, IdColumn::Auto, Some("grp")).unwrap();
        assert_eq!(t.labels.unwrap(), vec!["case", "ctrl"]);
        assert_eq!(t.col_ids, vec!["a", "b"]);
    }
}

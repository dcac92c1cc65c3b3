//! Count tables, compositions and log-ratio coordinates.
//!
//! Raw counts become compositions by zero replacement followed by row
//! closure. Compositions become CLR coordinates by subtracting each row's
//! mean log. ALR coordinates are provided for comparison against a reference
//! taxon.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Scalar;

/// Rows within this distance of summing to one are silently re-closed.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-6;

fn default_ids(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Raw nonnegative counts (or abundances); rows are samples, columns taxa.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountMatrix<T> {
    values: Array2<T>,
    row_ids: Vec<String>,
    col_ids: Vec<String>,
}

impl<T: Scalar> CountMatrix<T> {
    pub fn new(values: Array2<T>, row_ids: Vec<String>, col_ids: Vec<String>) -> Result<Self> {
        let (n, p) = values.dim();
        if n < 1 {
            return Err(Error::input("count matrix needs at least one row"));
        }
        if p < 2 {
            return Err(Error::input(format!(
                "count matrix needs at least two columns, got {p}"
            )));
        }
        if row_ids.len() != n || col_ids.len() != p {
            return Err(Error::input(format!(
                "label lengths ({} rows, {} cols) do not match {n}x{p} values",
                row_ids.len(),
                col_ids.len()
            )));
        }
        for ((i, j), &v) in values.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::input(format!("non-finite count at ({i}, {j})")));
            }
            if v < T::zero() {
                return Err(Error::input(format!("negative count {v} at ({i}, {j})")));
            }
        }
        for (i, row) in values.outer_iter().enumerate() {
            if row.iter().all(|&v| v == T::zero()) {
                return Err(Error::input(format!(
                    "row {i} ({}) is all zero",
                    row_ids[i]
                )));
            }
        }
        Ok(Self {
            values,
            row_ids,
            col_ids,
        })
    }

    /// Builds a matrix labelled `s1..sn` / `t1..tp`.
    pub fn from_array(values: Array2<T>) -> Result<Self> {
        let (n, p) = values.dim();
        Self::new(values, default_ids("s", n), default_ids("t", p))
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn col_ids(&self) -> &[String] {
        &self.col_ids
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    /// Keeps only the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.nrows()) {
            return Err(Error::input(format!("row index {bad} out of range")));
        }
        let values = self.values.select(Axis(0), rows);
        let row_ids = rows.iter().map(|&r| self.row_ids[r].clone()).collect();
        Self::new(values, row_ids, self.col_ids.clone())
    }
}

/// Strictly positive rows summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionMatrix<T> {
    values: Array2<T>,
    col_ids: Vec<String>,
}

impl<T: Scalar> CompositionMatrix<T> {
    /// Validates positivity and closure. Rows off by at most
    /// [`RENORMALIZE_TOLERANCE`] are re-closed; larger mismatches are errors.
    pub fn new(values: Array2<T>) -> Result<Self> {
        let p = values.ncols();
        Self::with_labels(values, default_ids("t", p))
    }

    pub fn with_labels(mut values: Array2<T>, col_ids: Vec<String>) -> Result<Self> {
        let (n, p) = values.dim();
        if n < 1 || p < 2 {
            return Err(Error::input(format!(
                "composition must be at least 1x2, got {n}x{p}"
            )));
        }
        if col_ids.len() != p {
            return Err(Error::input("column label count mismatch"));
        }
        let tol = T::lit(RENORMALIZE_TOLERANCE);
        for (i, mut row) in values.outer_iter_mut().enumerate() {
            if let Some((j, &v)) = row
                .iter()
                .enumerate()
                .find(|(_, &v)| !(v.is_finite() && v > T::zero()))
            {
                return Err(Error::input(format!(
                    "composition entry ({i}, {j}) = {v} is not strictly positive"
                )));
            }
            let sum: T = row.iter().copied().sum();
            if (sum - T::one()).abs() > tol {
                return Err(Error::input(format!(
                    "composition row {i} sums to {sum}, not 1"
                )));
            }
            row.mapv_inplace(|v| v / sum);
        }
        Ok(Self { values, col_ids })
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn col_ids(&self) -> &[String] {
        &self.col_ids
    }
}

/// CLR coordinates: each row sums to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClrMatrix<T> {
    values: Array2<T>,
    col_ids: Vec<String>,
}

impl<T: Scalar> ClrMatrix<T> {
    /// Wraps values that are already CLR coordinates, checking the zero-sum
    /// constraint (`|row sum| <= 1e-8 * p` relative to the row's scale).
    pub fn new(values: Array2<T>) -> Result<Self> {
        let p = values.ncols();
        Self::with_labels(values, default_ids("t", p))
    }

    pub fn with_labels(values: Array2<T>, col_ids: Vec<String>) -> Result<Self> {
        let p = values.ncols();
        if p < 1 {
            return Err(Error::input("CLR matrix has no columns"));
        }
        if col_ids.len() != p {
            return Err(Error::input("column label count mismatch"));
        }
        let base = T::lit(1e-8).max(T::epsilon() * T::lit(64.0));
        for (i, row) in values.outer_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::input(format!("non-finite CLR value in row {i}")));
            }
            let scale = row.iter().fold(T::one(), |m, v| m.max(v.abs()));
            let sum: T = row.iter().copied().sum();
            if sum.abs() > base * T::from_usize_lossy(p) * scale {
                return Err(Error::input(format!(
                    "CLR row {i} sums to {sum}, expected 0"
                )));
            }
        }
        Ok(Self { values, col_ids })
    }

    /// Row-centres arbitrary log-basis rows, i.e. applies `G = I - 11ᵀ/p`.
    pub fn from_log_basis(mut values: Array2<T>) -> Self {
        let p = values.ncols();
        center_rows(&mut values);
        Self {
            values,
            col_ids: default_ids("t", p),
        }
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn into_values(self) -> Array2<T> {
        self.values
    }

    pub fn col_ids(&self) -> &[String] {
        &self.col_ids
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub(crate) fn from_parts_unchecked(values: Array2<T>, col_ids: Vec<String>) -> Self {
        Self { values, col_ids }
    }
}

fn center_rows<T: Scalar>(values: &mut Array2<T>) {
    let p = T::from_usize_lossy(values.ncols());
    for mut row in values.outer_iter_mut() {
        let mean = row.iter().copied().sum::<T>() / p;
        row.mapv_inplace(|v| v - mean);
    }
}

/// Replaces zero entries by `pseudo`; positive entries are left alone.
pub fn impute_pseudo_count<T: Scalar>(m: &CountMatrix<T>, pseudo: T) -> Result<CountMatrix<T>> {
    if !(pseudo.is_finite() && pseudo > T::zero()) {
        return Err(Error::input(format!(
            "pseudo count must be positive and finite, got {pseudo}"
        )));
    }
    let values = m
        .values
        .mapv(|v| if v == T::zero() { pseudo } else { v });
    Ok(CountMatrix {
        values,
        row_ids: m.row_ids.clone(),
        col_ids: m.col_ids.clone(),
    })
}

/// Divides each row by its total. Every entry must already be positive.
pub fn to_relative_abundance<T: Scalar>(m: &CountMatrix<T>) -> Result<CompositionMatrix<T>> {
    if let Some(((i, j), _)) = m.values.indexed_iter().find(|(_, &v)| v <= T::zero()) {
        return Err(Error::input(format!(
            "entry ({i}, {j}) is not positive; impute zeros before closing rows"
        )));
    }
    let mut values = m.values.clone();
    for mut row in values.outer_iter_mut() {
        let total: T = row.iter().copied().sum();
        row.mapv_inplace(|v| v / total);
    }
    CompositionMatrix::with_labels(values, m.col_ids.clone())
}

/// `log(x_ij) - mean_k log(x_ik)`, the log of each part over the row's
/// geometric mean.
pub fn clr_transform<T: Scalar>(m: &CompositionMatrix<T>) -> ClrMatrix<T> {
    let mut values = m.values.mapv(|v| v.ln());
    center_rows(&mut values);
    ClrMatrix::from_parts_unchecked(values, m.col_ids.clone())
}

/// Log-ratios against column `ref_col`; the reference column is dropped and
/// the remaining columns keep their order.
pub fn alr_transform<T: Scalar>(m: &CompositionMatrix<T>, ref_col: usize) -> Result<Array2<T>> {
    let (n, p) = m.values.dim();
    if ref_col >= p {
        return Err(Error::input(format!(
            "ALR reference column {ref_col} out of range for {p} columns"
        )));
    }
    let mut out = Array2::zeros((n, p - 1));
    for (i, row) in m.values.outer_iter().enumerate() {
        let log_ref = row[ref_col].ln();
        let mut k = 0;
        for (j, &v) in row.iter().enumerate() {
            if j != ref_col {
                out[[i, k]] = v.ln() - log_ref;
                k += 1;
            }
        }
    }
    Ok(out)
}

/// Inverse of [`alr_transform`]: reinserts the reference column and closes.
pub fn alr_inverse<T: Scalar>(alr: &Array2<T>, ref_col: usize) -> Result<CompositionMatrix<T>> {
    let (n, q) = alr.dim();
    let p = q + 1;
    if ref_col >= p {
        return Err(Error::input(format!(
            "ALR reference column {ref_col} out of range for {p} columns"
        )));
    }
    let mut values = Array2::zeros((n, p));
    for (i, row) in alr.outer_iter().enumerate() {
        // shift by the row max so exp never overflows
        let shift = row.iter().fold(T::zero(), |m, &v| m.max(v));
        let mut k = 0;
        for j in 0..p {
            values[[i, j]] = if j == ref_col {
                (-shift).exp()
            } else {
                let v = (row[k] - shift).exp();
                k += 1;
                v
            };
        }
        let total: T = values.row(i).iter().copied().sum();
        values.row_mut(i).mapv_inplace(|v| v / total);
    }
    CompositionMatrix::new(values)
}

/// The centering matrix `G = I_p - (1/p) 1 1ᵀ`.
pub fn centering_projection<T: Scalar>(p: usize) -> Result<Array2<T>> {
    if p < 2 {
        return Err(Error::input(format!("centering projection needs p >= 2, got {p}")));
    }
    let inv = T::one() / T::from_usize_lossy(p);
    Ok(Array2::from_shape_fn((p, p), |(i, j)| {
        if i == j {
            T::one() - inv
        } else {
            -inv
        }
    }))
}

/// Drops columns whose pooled total is below `min_total`. Returns the
/// filtered matrix and the ids of the dropped columns.
pub fn filter_min_total<T: Scalar>(
    m: &CountMatrix<T>,
    min_total: T,
) -> Result<(CountMatrix<T>, Vec<String>)> {
    if !(min_total >= T::zero()) {
        return Err(Error::input("minimum total must be nonnegative"));
    }
    let totals: Array1<T> = m.values.sum_axis(Axis(0));
    let keep: Vec<usize> = (0..m.ncols()).filter(|&j| totals[j] >= min_total).collect();
    let dropped: Vec<String> = (0..m.ncols())
        .filter(|&j| totals[j] < min_total)
        .map(|j| m.col_ids[j].clone())
        .collect();
    if keep.is_empty() {
        return Err(Error::input(format!(
            "every column has total below {min_total}; nothing left"
        )));
    }
    let values = m.values.select(Axis(1), &keep);
    let col_ids = keep.iter().map(|&j| m.col_ids[j].clone()).collect();
    let filtered = CountMatrix::new(values, m.row_ids.clone(), col_ids)?;
    Ok((filtered, dropped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn pseudo_count_replaces_zeros_only() {
        let m = CountMatrix::from_array(array![[0.0, 3.0], [2.0, 0.0]]).unwrap();
        let out = impute_pseudo_count(&m, 0.5).unwrap();
        assert_eq!(out.values(), &array![[0.5, 3.0], [2.0, 0.5]]);

        let full = CountMatrix::from_array(array![[1.0, 3.0], [2.0, 7.0]]).unwrap();
        assert_eq!(impute_pseudo_count(&full, 0.5).unwrap(), full);
    }

    #[test]
    fn all_zero_row_rejected() {
        let err = CountMatrix::from_array(array![[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]]).unwrap_err();
        assert!(matches!(err, Error::Input(msg) if msg.contains("all zero")));
    }

    #[test]
    fn non_finite_and_bad_pseudo_rejected() {
        assert!(CountMatrix::from_array(array![[f64::NAN, 1.0]]).is_err());
        assert!(CountMatrix::from_array(array![[-1.0, 1.0]]).is_err());
        let m = CountMatrix::from_array(array![[0.0, 1.0]]).unwrap();
        assert!(impute_pseudo_count(&m, 0.0).is_err());
        assert!(impute_pseudo_count(&m, f64::INFINITY).is_err());
    }

    #[test]
    fn relative_abundance_examples() {
        let m = CountMatrix::from_array(array![[1.0, 1.0, 2.0]]).unwrap();
        let c = to_relative_abundance(&m).unwrap();
        assert_eq!(c.values(), &array![[0.25, 0.25, 0.5]]);

        let m = CountMatrix::from_array(array![[0.5, 3.0], [2.0, 0.5]]).unwrap();
        let c = to_relative_abundance(&m).unwrap();
        assert_abs_diff_eq!(c.values()[[0, 0]], 1.0 / 7.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.values()[[0, 1]], 6.0 / 7.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.values()[[1, 0]], 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(c.values()[[1, 1]], 0.2, epsilon = 1e-15);

        let zero = CountMatrix::from_array(array![[0.0, 3.0]]).unwrap();
        assert!(to_relative_abundance(&zero).is_err());
    }

    #[test]
    fn relative_abundance_idempotent() {
        let m = CountMatrix::from_array(array![[0.3, 0.2, 0.5], [0.1, 0.6, 0.3]]).unwrap();
        let once = to_relative_abundance(&m).unwrap();
        let again = CountMatrix::from_array(once.values().clone()).unwrap();
        let twice = to_relative_abundance(&again).unwrap();
        for (a, b) in once.values().iter().zip(twice.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn composition_closure_rules() {
        // within 1e-6: re-closed silently
        let c = CompositionMatrix::new(array![[0.5 + 4e-7, 0.5]]).unwrap();
        let s: f64 = c.values().row(0).sum();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-10);
        assert!(CompositionMatrix::new(array![[0.6, 0.5]]).is_err());
        assert!(CompositionMatrix::new(array![[1.0, 0.0]]).is_err());
    }

    #[test]
    fn clr_examples() {
        let uniform = CompositionMatrix::new(array![[0.25, 0.25, 0.25, 0.25]]).unwrap();
        let z = clr_transform(&uniform);
        assert!(z.values().iter().all(|v: &f64| v.abs() < 1e-15));

        let e = std::f64::consts::E;
        let s = e + e.powi(3);
        let c = CompositionMatrix::new(array![[e / s, e.powi(3) / s]]).unwrap();
        let z = clr_transform(&c);
        assert_abs_diff_eq!(z.values()[[0, 0]], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z.values()[[0, 1]], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn clr_scale_invariant() {
        let raw = array![[1.0, 4.0, 9.0, 2.5]];
        let a = clr_transform(&to_relative_abundance(&CountMatrix::from_array(raw.clone()).unwrap()).unwrap());
        let b = clr_transform(
            &to_relative_abundance(&CountMatrix::from_array(raw * 1234.5).unwrap()).unwrap(),
        );
        for (x, y) in a.values().iter().zip(b.values()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn alr_examples() {
        let c = CompositionMatrix::new(array![[0.25, 0.25, 0.5]]).unwrap();
        let a = alr_transform(&c, 2).unwrap();
        assert_abs_diff_eq!(a[[0, 0]], 0.5f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(a[[0, 1]], 0.5f64.ln(), epsilon = 1e-15);

        let uniform = CompositionMatrix::new(array![[1.0 / 3.0; 3]]).unwrap();
        assert!(alr_transform(&uniform, 0).unwrap().iter().all(|v: &f64| v.abs() < 1e-15));

        let bin = CompositionMatrix::new(array![[0.2, 0.8]]).unwrap();
        let a = alr_transform(&bin, 1).unwrap();
        assert_eq!(a.dim(), (1, 1));
        assert_abs_diff_eq!(a[[0, 0]], 0.25f64.ln(), epsilon = 1e-15);

        assert!(alr_transform(&bin, 2).is_err());
    }

    #[test]
    fn centering_projection_properties() {
        let g2 = centering_projection::<f64>(2).unwrap();
        assert_eq!(g2, array![[0.5, -0.5], [-0.5, 0.5]]);

        let g5 = centering_projection::<f64>(5).unwrap();
        let null = g5.dot(&Array1::<f64>::ones(5));
        assert!(null.iter().all(|v| v.abs() < 1e-15));

        let g7 = centering_projection::<f64>(7).unwrap();
        // explicit triple loop rather than .dot() so the check does not reuse it
        for i in 0..7 {
            for j in 0..7 {
                let mut s = 0.0;
                for k in 0..7 {
                    s += g7[[i, k]] * g7[[k, j]];
                }
                assert_abs_diff_eq!(s, g7[[i, j]], epsilon = 1e-15);
                assert_eq!(g7[[i, j]], g7[[j, i]]);
            }
        }
        assert!(centering_projection::<f64>(1).is_err());
    }

    #[test]
    fn filter_drops_low_total_columns() {
        let m = CountMatrix::from_array(array![[5.0, 0.0, 1.0, 9.0], [6.0, 2.0, 1.0, 3.0]]).unwrap();
        let (f, dropped) = filter_min_total(&m, 10.0).unwrap();
        assert_eq!(f.col_ids(), &["t1".to_string(), "t4".to_string()][..]);
        assert_eq!(f.values(), &array![[5.0, 9.0], [6.0, 3.0]]);
        assert_eq!(dropped, vec!["t2".to_string(), "t3".to_string()]);
        // a single surviving column is not a valid count table
        assert!(filter_min_total(&m, 12.0).is_err());
        let (same, none) = filter_min_total(&m, 0.0).unwrap();
        assert_eq!(same, m);
        assert!(none.is_empty());
        assert!(filter_min_total(&m, 100.0).is_err());
    }

    #[test]
    fn works_in_f32() {
        let m = CountMatrix::<f32>::from_array(array![[0.0, 3.0, 1.0], [2.0, 0.0, 4.0]]).unwrap();
        let clr = clr_transform(&to_relative_abundance(&impute_pseudo_count(&m, 0.5).unwrap()).unwrap());
        for row in clr.values().outer_iter() {
            assert!(row.sum().abs() < 1e-5);
        }
    }
}

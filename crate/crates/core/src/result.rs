use std::fmt;
use std::str::FromStr;

use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::compositional::ClrMatrix;
use crate::error::{Error, Result};
use crate::Scalar;

/// p-values are kept inside `[P_FLOOR, 1 - P_FLOOR]` so that the Fisher log
/// and the Cauchy tangent stay finite.
pub const P_FLOOR: f64 = 1e-15;

pub(crate) fn clamp_p<T: Scalar>(p: T) -> T {
    let lo = T::lit(P_FLOOR);
    let hi = T::one() - lo;
    if p.is_nan() {
        return hi;
    }
    p.max(lo).min(hi)
}

pub(crate) fn check_alpha<T: Scalar>(alpha: T) -> Result<()> {
    if alpha > T::zero() && alpha < T::one() {
        Ok(())
    } else {
        Err(Error::input(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Max,
    Quad,
    Fisher,
    Cauchy,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Max, Method::Quad, Method::Fisher, Method::Cauchy];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Max => "max",
            Method::Quad => "quad",
            Method::Fisher => "fisher",
            Method::Cauchy => "cauchy",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "max" => Ok(Method::Max),
            "quad" => Ok(Method::Quad),
            "fisher" => Ok(Method::Fisher),
            "cauchy" => Ok(Method::Cauchy),
            other => Err(Error::input(format!("unknown test method `{other}`"))),
        }
    }
}

/// Outcome of one α-level test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult<T> {
    pub method: Method,
    pub statistic: T,
    pub p_value: T,
    /// Rejection threshold on the statistic's own scale.
    pub critical_value: T,
    pub reject: bool,
    pub alpha: T,
}

/// CLR samples of the two groups, rows are samples.
///
/// The statistics are defined for any real-valued rows, so
/// [`TwoSampleClr::from_arrays`] does not insist on zero row sums; use
/// [`TwoSampleClr::new`] to go through validated [`ClrMatrix`] values.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSampleClr<T> {
    x: Array2<T>,
    y: Array2<T>,
    col_ids: Vec<String>,
}

impl<T: Scalar> TwoSampleClr<T> {
    pub fn new(x: ClrMatrix<T>, y: ClrMatrix<T>) -> Result<Self> {
        if x.col_ids() != y.col_ids() {
            return Err(Error::input("the two groups have different column labels"));
        }
        let col_ids = x.col_ids().to_vec();
        let mut d = Self::from_arrays(x.into_values(), y.into_values())?;
        d.col_ids = col_ids;
        Ok(d)
    }

    pub fn from_arrays(x: Array2<T>, y: Array2<T>) -> Result<Self> {
        if x.ncols() != y.ncols() {
            return Err(Error::input(format!(
                "groups have different dimensions: {} vs {}",
                x.ncols(),
                y.ncols()
            )));
        }
        if x.ncols() == 0 {
            return Err(Error::input("zero-dimensional samples"));
        }
        if x.nrows() < 2 || y.nrows() < 2 {
            return Err(Error::input(format!(
                "each group needs at least 2 samples, got n1={} n2={}",
                x.nrows(),
                y.nrows()
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::input("non-finite value in samples"));
        }
        let col_ids = (1..=x.ncols()).map(|j| format!("t{j}")).collect();
        Ok(Self { x, y, col_ids })
    }

    pub fn x(&self) -> &Array2<T> {
        &self.x
    }

    pub fn y(&self) -> &Array2<T> {
        &self.y
    }

    pub fn n1(&self) -> usize {
        self.x.nrows()
    }

    pub fn n2(&self) -> usize {
        self.y.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn col_ids(&self) -> &[String] {
        &self.col_ids
    }

    /// Same data with the group roles exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            x: self.y.clone(),
            y: self.x.clone(),
            col_ids: self.col_ids.clone(),
        }
    }

    /// All `n1 + n2` rows, group 1 first.
    pub fn pooled(&self) -> Array2<T> {
        concatenate(Axis(0), &[self.x.view(), self.y.view()]).expect("equal column counts")
    }

    /// Removes columns whose pooled within-group variance is zero.
    /// Returns the reduced data and the removed column indices.
    pub fn drop_degenerate_columns(&self) -> Result<(Self, Vec<usize>)> {
        let gamma = crate::max_test::raw_pooled_variances(self);
        let keep: Vec<usize> = (0..self.dim()).filter(|&j| gamma[j] > T::zero()).collect();
        let dropped: Vec<usize> = (0..self.dim()).filter(|&j| gamma[j] <= T::zero()).collect();
        if keep.is_empty() {
            return Err(Error::input("every column is degenerate"));
        }
        let mut reduced = Self::from_arrays(
            self.x.select(Axis(1), &keep),
            self.y.select(Axis(1), &keep),
        )?;
        reduced.col_ids = keep.iter().map(|&j| self.col_ids[j].clone()).collect();
        Ok((reduced, dropped))
    }

    pub fn with_col_ids(mut self, col_ids: Vec<String>) -> Result<Self> {
        if col_ids.len() != self.dim() {
            return Err(Error::input("column label count mismatch"));
        }
        self.col_ids = col_ids;
        Ok(self)
    }
}

//! Simulation designs: covariance families, calibrated mean signals and
//! log-basis samplers for the Gaussian and Gamma data-generating frameworks.
//!
//! Everything here computes in `f64`; [`to_clr_samples`] casts to the
//! requested scalar at the end.

use std::fmt;

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, Axis, Zip};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::combine::CombinationWeights;
use crate::compositional::ClrMatrix;
use crate::dist::{derive_stream_id, key_hash, sample_std_gamma_matrix, sample_std_normal_matrix, RngStream};
use crate::error::{Error, Result};
use crate::result::TwoSampleClr;
use crate::Scalar;

/// Shape of the standard gamma variables in the Gamma framework.
pub const GAMMA_SHAPE: f64 = 10.0;

/// Default `||nu1 - nu2||^2 / sqrt(tr(Omega^2))`.
pub const DEFAULT_TARGET_RATIO: f64 = 0.1;

/// Covariance family of the log-basis vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovarianceKind {
    /// `Omega_ij = rho^|i-j|`.
    Ar1 { rho: f64 },
    /// Random sparse `q x q` block with `q = floor(3 sqrt(p))`, identity elsewhere.
    BlockSparse,
}

impl CovarianceKind {
    pub fn family(&self) -> &'static str {
        match self {
            CovarianceKind::Ar1 { .. } => "ar1",
            CovarianceKind::BlockSparse => "block_sparse",
        }
    }
}

impl fmt::Display for CovarianceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CovarianceKind::Ar1 { rho } => write!(f, "ar1({rho})"),
            CovarianceKind::BlockSparse => f.write_str("block_sparse"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Framework {
    /// `delta ~ N_p(nu, Omega)`.
    Gaussian,
    /// `delta = nu + F (u - 10) / sqrt(10)`, `u` iid Gamma(10, 1), `F = Q S^{1/2}`.
    Gamma,
}

impl Framework {
    pub fn as_str(self) -> &'static str {
        match self {
            Framework::Gaussian => "gaussian",
            Framework::Gamma => "gamma",
        }
    }
}

impl fmt::Display for Framework {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A covariance matrix together with the structure it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariance {
    kind: CovarianceKind,
    matrix: Array2<f64>,
    /// Size of the leading non-identity block (`p` for AR(1)).
    block: usize,
}

impl Covariance {
    pub fn build(kind: CovarianceKind, p: usize, rng: &mut RngStream) -> Result<Self> {
        match kind {
            CovarianceKind::Ar1 { rho } => Ok(Self {
                kind,
                matrix: build_ar1(p, rho)?,
                block: p,
            }),
            CovarianceKind::BlockSparse => Ok(Self {
                kind,
                matrix: build_block_sparse(p, rng)?,
                block: block_size(p),
            }),
        }
    }

    pub fn kind(&self) -> CovarianceKind {
        self.kind
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// The factor used by `framework`: a Cholesky factor for Gaussian
    /// draws, the symmetric eigen factor `Q S^{1/2}` for Gamma draws.
    /// Block-diagonal structure is kept so only the leading block is dense.
    pub fn factor(&self, framework: Framework) -> Result<CovFactor> {
        let p = self.dim();
        match (self.kind, framework) {
            (CovarianceKind::Ar1 { rho }, Framework::Gaussian) => CovFactor::ar1_cholesky(p, rho),
            (CovarianceKind::Ar1 { .. }, Framework::Gamma) => CovFactor::symmetric_eigen(&self.matrix),
            (CovarianceKind::BlockSparse, fw) => {
                let q = self.block;
                let lead = self.matrix.slice(ndarray::s![..q, ..q]).to_owned();
                let f = match fw {
                    Framework::Gaussian => CovFactor::cholesky(&lead)?,
                    Framework::Gamma => CovFactor::symmetric_eigen(&lead)?,
                };
                CovFactor::block_diagonal(f.to_dense(), p)
            }
        }
    }
}

/// `floor(3 sqrt(p))`.
pub fn block_size(p: usize) -> usize {
    (3.0 * (p as f64).sqrt()).floor() as usize
}

/// AR(1) covariance `rho^|i-j|`.
pub fn build_ar1(p: usize, rho: f64) -> Result<Array2<f64>> {
    if p == 0 {
        return Err(Error::input("covariance dimension must be positive"));
    }
    if !(rho.abs() < 1.0) {
        return Err(Error::input(format!("AR(1) correlation must satisfy |rho| < 1, got {rho}")));
    }
    Ok(Array2::from_shape_fn((p, p), |(i, j)| {
        rho.powi(i.abs_diff(j) as i32)
    }))
}

/// Random sparse block covariance.
///
/// The leading `q x q` block is `B + eps I` where `B` is symmetric with zero
/// diagonal; each lower-triangular entry is zero with probability 1/2 and
/// otherwise uniform on `[-1, -0.5] U [0.5, 1]`. `eps = max(-lambda_min(B), 0) + 0.05`.
/// The remaining diagonal block is the identity.
pub fn build_block_sparse(p: usize, rng: &mut RngStream) -> Result<Array2<f64>> {
    if p < 9 {
        return Err(Error::input(format!(
            "block-sparse covariance needs p >= 9, got {p}"
        )));
    }
    let q = block_size(p);
    let mut b = DMatrix::<f64>::zeros(q, q);
    for i in 1..q {
        for j in 0..i {
            if rng.random_bool(0.5) {
                let magnitude = rng.random_range(0.5..=1.0);
                let v = if rng.random_bool(0.5) { -magnitude } else { magnitude };
                b[(i, j)] = v;
                b[(j, i)] = v;
            }
        }
    }
    let lambda_min = b
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let eps = (-lambda_min).max(0.0) + 0.05;
    let mut omega = Array2::<f64>::eye(p);
    for i in 0..q {
        for j in 0..q {
            omega[[i, j]] = b[(i, j)] + if i == j { eps } else { 0.0 };
        }
    }
    Ok(omega)
}

/// `tr(Omega^2)` for symmetric `Omega`.
pub fn trace_of_square(cov: &Array2<f64>) -> f64 {
    cov.iter().map(|v| v * v).sum()
}

/// A matrix `F` with `F F^T = Omega`, stored in whichever form is cheapest
/// to apply.
#[derive(Debug, Clone, PartialEq)]
pub enum CovFactor {
    Dense(Array2<f64>),
    /// Cholesky factor of an AR(1) matrix, applied by the recursion
    /// `d_0 = z_0`, `d_i = rho d_{i-1} + sqrt(1 - rho^2) z_i`.
    Ar1Cholesky { p: usize, rho: f64 },
    /// `diag(block, I)`.
    BlockDiagonal { block: Array2<f64>, p: usize },
}

fn to_nalgebra(m: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

fn from_nalgebra(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

fn check_square(m: &Array2<f64>) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::input(format!(
            "covariance must be square and nonempty, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

impl CovFactor {
    /// Lower-triangular Cholesky factor.
    pub fn cholesky(cov: &Array2<f64>) -> Result<Self> {
        check_square(cov)?;
        let chol = nalgebra::Cholesky::new(to_nalgebra(cov))
            .ok_or_else(|| Error::Numerical("covariance is not positive definite".into()))?;
        Ok(CovFactor::Dense(from_nalgebra(&chol.l())))
    }

    /// `Q S^{1/2}` from the symmetric eigendecomposition `Omega = Q S Q^T`,
    /// columns ordered by decreasing eigenvalue.
    pub fn symmetric_eigen(cov: &Array2<f64>) -> Result<Self> {
        check_square(cov)?;
        let eig = nalgebra::SymmetricEigen::new(to_nalgebra(cov));
        let scale = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let p = cov.nrows();
        let mut f = Array2::<f64>::zeros((p, p));
        for (col, &k) in order.iter().enumerate() {
            let lambda = eig.eigenvalues[k];
            if lambda < -1e-10 * scale.max(1.0) {
                return Err(Error::Numerical(format!(
                    "covariance has negative eigenvalue {lambda}"
                )));
            }
            let s = lambda.max(0.0).sqrt();
            for i in 0..p {
                f[[i, col]] = eig.eigenvectors[(i, k)] * s;
            }
        }
        Ok(CovFactor::Dense(f))
    }

    pub fn ar1_cholesky(p: usize, rho: f64) -> Result<Self> {
        build_ar1(1, rho)?;
        if p == 0 {
            return Err(Error::input("covariance dimension must be positive"));
        }
        Ok(CovFactor::Ar1Cholesky { p, rho })
    }

    pub fn block_diagonal(block: Array2<f64>, p: usize) -> Result<Self> {
        check_square(&block)?;
        if block.nrows() > p {
            return Err(Error::input("factor block larger than the dimension"));
        }
        Ok(CovFactor::BlockDiagonal { block, p })
    }

    pub fn dim(&self) -> usize {
        match self {
            CovFactor::Dense(f) => f.nrows(),
            CovFactor::Ar1Cholesky { p, .. } | CovFactor::BlockDiagonal { p, .. } => *p,
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        match self {
            CovFactor::Dense(f) => f.clone(),
            CovFactor::Ar1Cholesky { p, rho } => {
                let c = (1.0 - rho * rho).sqrt();
                Array2::from_shape_fn((*p, *p), |(i, j)| match (i >= j, j) {
                    (false, _) => 0.0,
                    (true, 0) => rho.powi(i as i32),
                    (true, _) => c * rho.powi((i - j) as i32),
                })
            }
            CovFactor::BlockDiagonal { block, p } => {
                let q = block.nrows();
                let mut f = Array2::<f64>::eye(*p);
                f.slice_mut(ndarray::s![..q, ..q]).assign(block);
                f
            }
        }
    }

    /// Replaces each row `z_i` of `z` by `F z_i`.
    pub fn apply_rows(&self, z: Array2<f64>) -> Array2<f64> {
        assert_eq!(z.ncols(), self.dim(), "factor/sample dimension mismatch");
        match self {
            CovFactor::Dense(f) => z.dot(&f.t()),
            CovFactor::Ar1Cholesky { rho, .. } => {
                let mut z = z;
                let c = (1.0 - rho * rho).sqrt();
                for mut row in z.axis_iter_mut(Axis(0)) {
                    for j in 1..row.len() {
                        row[j] = rho * row[j - 1] + c * row[j];
                    }
                }
                z
            }
            CovFactor::BlockDiagonal { block, .. } => {
                let q = block.nrows();
                let mut z = z;
                let lead = z.slice(ndarray::s![.., ..q]).dot(&block.t());
                z.slice_mut(ndarray::s![.., ..q]).assign(&lead);
                z
            }
        }
    }
}

/// Sparsity and strength of the planted mean difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    /// Fraction of coordinates carrying signal, in `[0, 1]`.
    pub sparsity: f64,
    /// `||nu1 - nu2||^2 / sqrt(tr(Omega^2))`.
    pub target_ratio: f64,
}

impl SignalSpec {
    pub fn new(sparsity: f64, target_ratio: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&sparsity) {
            return Err(Error::input(format!("sparsity fraction must lie in [0, 1], got {sparsity}")));
        }
        if !(target_ratio.is_finite() && target_ratio > 0.0) {
            return Err(Error::input(format!("target ratio must be positive, got {target_ratio}")));
        }
        Ok(Self {
            sparsity,
            target_ratio,
        })
    }

    pub fn null() -> Self {
        Self {
            sparsity: 0.0,
            target_ratio: DEFAULT_TARGET_RATIO,
        }
    }

    /// `round(sparsity * p)`.
    pub fn support_size(&self, p: usize) -> usize {
        (self.sparsity * p as f64).round() as usize
    }
}

/// Group means: `nu1 = 0`, `nu2` equal on a random support.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub nu1: Array1<f64>,
    pub nu2: Array1<f64>,
    /// Sorted signal coordinates.
    pub support: Vec<usize>,
}

impl Signal {
    pub fn zero(p: usize) -> Self {
        Self {
            nu1: Array1::zeros(p),
            nu2: Array1::zeros(p),
            support: Vec::new(),
        }
    }
}

/// Plants `s = round(sparsity p)` equal entries `sqrt(target sqrt(tr(Omega^2)) / s)`
/// on coordinates chosen uniformly without replacement.
pub fn build_signal(spec: &SignalSpec, cov: &Array2<f64>, rng: &mut RngStream) -> Result<Signal> {
    let spec = SignalSpec::new(spec.sparsity, spec.target_ratio)?;
    let p = cov.nrows();
    if spec.sparsity == 0.0 {
        return Ok(Signal::zero(p));
    }
    let s = spec.support_size(p);
    if s == 0 {
        return Err(Error::input(format!(
            "sparsity {} leaves no signal coordinate at p = {p}",
            spec.sparsity
        )));
    }
    let amplitude = (spec.target_ratio * trace_of_square(cov).sqrt() / s as f64).sqrt();
    let mut support = sample_indices(rng, p, s).into_vec();
    support.sort_unstable();
    let mut nu2 = Array1::zeros(p);
    for &j in &support {
        nu2[j] = amplitude;
    }
    Ok(Signal {
        nu1: Array1::zeros(p),
        nu2,
        support,
    })
}

/// `n` log-basis rows with mean `nu` and covariance `F F^T`.
pub fn sample_log_basis(
    framework: Framework,
    nu: &Array1<f64>,
    factor: &CovFactor,
    n: usize,
    rng: &mut RngStream,
) -> Result<Array2<f64>> {
    let p = factor.dim();
    if nu.len() != p {
        return Err(Error::input(format!(
            "mean has length {} but the factor is {p}x{p}",
            nu.len()
        )));
    }
    let z: Array2<f64> = match framework {
        Framework::Gaussian => sample_std_normal_matrix(rng, n, p),
        Framework::Gamma => {
            let scale = GAMMA_SHAPE.sqrt();
            sample_std_gamma_matrix::<f64>(rng, n, p, GAMMA_SHAPE)?.mapv_into(|u| (u - GAMMA_SHAPE) / scale)
        }
    };
    let mut out = factor.apply_rows(z);
    Zip::from(out.rows_mut()).for_each(|mut row| row += nu);
    Ok(out)
}

/// Centres every row, i.e. applies `G = I - 11^T / p`.
pub fn to_clr_samples<T: Scalar>(log_basis: &Array2<f64>) -> ClrMatrix<T> {
    ClrMatrix::from_log_basis(log_basis.mapv(T::lit))
}

fn default_target_ratio() -> f64 {
    DEFAULT_TARGET_RATIO
}

fn default_alpha() -> f64 {
    0.05
}

fn default_replications() -> usize {
    500
}

/// One cell of a simulation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n1: usize,
    pub n2: usize,
    pub p: usize,
    pub covariance: CovarianceKind,
    pub framework: Framework,
    pub sparsity: f64,
    #[serde(default = "default_target_ratio")]
    pub target_ratio: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub weights: CombinationWeights,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: String| Err(Error::config(field, message));
        if self.n1 < 4 || self.n2 < 4 {
            return bad("n1/n2", format!("need at least 4 samples per group, got ({}, {})", self.n1, self.n2));
        }
        if self.p < 3 {
            return bad("p", format!("need p >= 3, got {}", self.p));
        }
        if let CovarianceKind::Ar1 { rho } = self.covariance {
            if !(rho.abs() < 1.0) {
                return bad("covariance.rho", format!("|rho| must be < 1, got {rho}"));
            }
        }
        if self.covariance == CovarianceKind::BlockSparse && self.p < 9 {
            return bad("p", format!("block_sparse needs p >= 9, got {}", self.p));
        }
        if let Err(e) = SignalSpec::new(self.sparsity, self.target_ratio) {
            return bad("sparsity/target_ratio", e.to_string());
        }
        if self.sparsity > 0.0 && self.signal().support_size(self.p) == 0 {
            return bad("sparsity", format!("{} leaves no signal coordinate at p = {}", self.sparsity, self.p));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha", format!("must lie in (0, 1), got {}", self.alpha));
        }
        if self.replications == 0 {
            return bad("replications", "must be at least 1".into());
        }
        if let Err(e) = CombinationWeights::new(self.weights.w_max(), self.weights.w_quad()) {
            return bad("weights", e.to_string());
        }
        Ok(())
    }

    pub fn signal(&self) -> SignalSpec {
        SignalSpec {
            sparsity: self.sparsity,
            target_ratio: self.target_ratio,
        }
    }

    /// Stable text identity of the scenario, excluding seed and replication count.
    pub fn key(&self) -> String {
        format!(
            "{}/{}/{}/{}/{}/{}/{}",
            self.covariance, self.framework, self.n1, self.n2, self.p, self.sparsity, self.target_ratio
        )
    }

    fn covariance_stream(&self) -> RngStream {
        let id = derive_stream_id(&[key_hash("cov"), key_hash(&self.covariance.to_string()), self.p as u64]);
        RngStream::new(self.master_seed, id)
    }

    /// The scenario covariance, drawn from its dedicated stream.
    pub fn build_covariance(&self) -> Result<Covariance> {
        Covariance::build(self.covariance, self.p, &mut self.covariance_stream())
    }

    /// A stream for auxiliary draws tied to this scenario, keyed by `tag`.
    pub fn aux_stream(&self, tag: &str) -> RngStream {
        RngStream::new(self.master_seed, derive_stream_id(&[key_hash(tag), key_hash(&self.key())]))
    }

    fn signal_stream(&self) -> RngStream {
        let id = derive_stream_id(&[key_hash("signal"), self.p as u64, self.sparsity.to_bits()]);
        RngStream::new(self.master_seed, id)
    }

    /// Stream owned by replication `r`.
    pub fn replication_stream(&self, r: usize) -> RngStream {
        RngStream::new(self.master_seed, derive_stream_id(&[key_hash(&self.key()), r as u64]))
    }
}

/// A scenario with its covariance, factor and signal drawn once.
#[derive(Debug, Clone)]
pub struct Scenario {
    config: ScenarioConfig,
    covariance: Covariance,
    factor: CovFactor,
    signal: Signal,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let covariance = config.build_covariance()?;
        let signal = build_signal(&config.signal(), covariance.matrix(), &mut config.signal_stream())?;
        Self::with_parts(config, covariance, signal)
    }

    /// A scenario with caller-supplied covariance and group-2 mean, e.g. a
    /// signal placed on a specific power region. `config.sparsity` is ignored.
    pub fn with_signal(config: ScenarioConfig, covariance: Covariance, nu2: Array1<f64>) -> Result<Self> {
        config.validate()?;
        if covariance.dim() != config.p || nu2.len() != config.p || nu2.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("covariance and signal must match the dimension p"));
        }
        let support = (0..config.p).filter(|&j| nu2[j] != 0.0).collect();
        let signal = Signal {
            nu1: Array1::zeros(config.p),
            nu2,
            support,
        };
        Self::with_parts(config, covariance, signal)
    }

    fn with_parts(config: ScenarioConfig, covariance: Covariance, signal: Signal) -> Result<Self> {
        let factor = covariance.factor(config.framework)?;
        Ok(Self {
            config,
            covariance,
            factor,
            signal,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn covariance(&self) -> &Covariance {
        &self.covariance
    }

    pub fn factor(&self) -> &CovFactor {
        &self.factor
    }

    pub fn signal(&self) -> &Signal {
        &self.signal
    }

    /// The CLR samples of replication `r`.
    pub fn sample<T: Scalar>(&self, r: usize) -> Result<TwoSampleClr<T>> {
        let mut rng = self.config.replication_stream(r);
        self.sample_with(&mut rng)
    }

    pub fn sample_with<T: Scalar>(&self, rng: &mut RngStream) -> Result<TwoSampleClr<T>> {
        let fw = self.config.framework;
        let d1 = sample_log_basis(fw, &self.signal.nu1, &self.factor, self.config.n1, rng)?;
        let d2 = sample_log_basis(fw, &self.signal.nu2, &self.factor, self.config.n2, rng)?;
        TwoSampleClr::new(to_clr_samples(&d1), to_clr_samples(&d2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compositional::{clr_transform, CompositionMatrix};
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn min_eigenvalue(m: &Array2<f64>) -> f64 {
        to_nalgebra(m).symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    fn sample_cov(x: &Array2<f64>) -> Array2<f64> {
        let n = x.nrows() as f64;
        let c = x - &x.mean_axis(Axis(0)).unwrap();
        c.t().dot(&c) / (n - 1.0)
    }

    fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        (a - b).iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn ar1_examples() {
        assert_eq!(build_ar1(2, 0.5).unwrap(), array![[1.0, 0.5], [0.5, 1.0]]);
        assert_eq!(build_ar1(4, 0.0).unwrap(), Array2::<f64>::eye(4));
        assert!(min_eigenvalue(&build_ar1(500, 0.5).unwrap()) > 0.0);
        assert!(build_ar1(3, 1.0).is_err());
        assert!(build_ar1(3, -1.2).is_err());
    }

    #[test]
    fn block_sparse_structure() {
        let mut rng = RngStream::new(3, 0);
        let p = 200;
        let q = block_size(p);
        assert_eq!(q, 42);
        let m = build_block_sparse(p, &mut rng).unwrap();
        assert_eq!(m, m.t());
        assert!(min_eigenvalue(&m) >= 0.05 - 1e-10);
        for i in 0..p {
            for j in 0..p {
                if i >= q || j >= q {
                    assert_eq!(m[[i, j]], if i == j { 1.0 } else { 0.0 });
                }
            }
        }
        // off-diagonal block entries are zero or in [-1,-0.5] U [0.5,1]
        let mut zeros = 0;
        for i in 1..q {
            for j in 0..i {
                let v = m[[i, j]];
                if v == 0.0 {
                    zeros += 1;
                } else {
                    assert!((0.5..=1.0).contains(&v.abs()));
                }
            }
        }
        let total = q * (q - 1) / 2;
        assert!((zeros as f64 / total as f64 - 0.5).abs() < 0.06);
        assert!(build_block_sparse(8, &mut rng).is_err());
    }

    #[test]
    fn factors_reproduce_covariance() {
        let ar = build_ar1(30, 0.5).unwrap();
        for f in [
            CovFactor::ar1_cholesky(30, 0.5).unwrap(),
            CovFactor::cholesky(&ar).unwrap(),
            CovFactor::symmetric_eigen(&ar).unwrap(),
        ] {
            let d = f.to_dense();
            assert!(max_abs_diff(&d.dot(&d.t()), &ar) < 1e-12);
        }
        let mut rng = RngStream::new(9, 1);
        let bs = Covariance::build(CovarianceKind::BlockSparse, 50, &mut rng).unwrap();
        for fw in [Framework::Gaussian, Framework::Gamma] {
            let d = bs.factor(fw).unwrap().to_dense();
            assert!(max_abs_diff(&d.dot(&d.t()), bs.matrix()) < 1e-10);
        }
    }

    #[test]
    fn structured_factors_apply_like_dense() {
        let mut rng = RngStream::new(5, 5);
        let z: Array2<f64> = sample_std_normal_matrix(&mut rng, 7, 40);
        let bs = Covariance::build(CovarianceKind::BlockSparse, 40, &mut rng).unwrap();
        for f in [
            CovFactor::ar1_cholesky(40, -0.3).unwrap(),
            bs.factor(Framework::Gaussian).unwrap(),
        ] {
            let dense = z.dot(&f.to_dense().t());
            assert!(max_abs_diff(&f.apply_rows(z.clone()), &dense) < 1e-12);
        }
    }

    #[test]
    fn signal_examples() {
        let mut rng = RngStream::new(1, 1);
        let cov = build_ar1(100, 0.5).unwrap();
        let zero = build_signal(&SignalSpec::null(), &cov, &mut rng).unwrap();
        assert!(zero.nu1.iter().chain(zero.nu2.iter()).all(|&v| v == 0.0));

        let one = build_signal(&SignalSpec::new(0.01, 0.1).unwrap(), &cov, &mut rng).unwrap();
        assert_eq!(one.support.len(), 1);
        assert_eq!(one.nu2.iter().filter(|&&v| v != 0.0).count(), 1);

        for frac in [0.05, 0.2, 0.5] {
            let s = build_signal(&SignalSpec::new(frac, 0.1).unwrap(), &cov, &mut rng).unwrap();
            let ratio = s.nu2.dot(&s.nu2) / trace_of_square(&cov).sqrt();
            assert_abs_diff_eq!(ratio, 0.1, epsilon = 1e-12);
            assert_eq!(s.support.len(), (frac * 100.0f64).round() as usize);
            let a = s.nu2[s.support[0]];
            assert!(s.support.iter().all(|&j| s.nu2[j] == a));
        }
        assert!(build_signal(&SignalSpec::new(0.001, 0.1).unwrap(), &cov, &mut rng).is_err());
        assert!(SignalSpec::new(1.5, 0.1).is_err());
    }

    #[test]
    fn gaussian_sample_covariance() {
        let mut rng = RngStream::new(11, 0);
        let f = CovFactor::Dense(Array2::eye(5));
        let x = sample_log_basis(Framework::Gaussian, &Array1::zeros(5), &f, 100_000, &mut rng).unwrap();
        assert!(max_abs_diff(&sample_cov(&x), &Array2::eye(5)) < 0.05);
    }

    #[test]
    fn gamma_sample_moments() {
        let mut rng = RngStream::new(12, 0);
        let cov = build_ar1(5, 0.5).unwrap();
        let f = CovFactor::symmetric_eigen(&cov).unwrap();
        let nu = array![1.0, -1.0, 0.0, 0.5, 2.0];
        let x = sample_log_basis(Framework::Gamma, &nu, &f, 100_000, &mut rng).unwrap();
        assert!(max_abs_diff(&sample_cov(&x), &cov) < 0.05);
        let mean = x.mean_axis(Axis(0)).unwrap();
        assert!((&mean - &nu).iter().all(|v| v.abs() < 0.02));

        // identity factor: positive marginal skewness (2/sqrt(10) in the limit)
        let id = CovFactor::Dense(Array2::eye(5));
        let u = sample_log_basis(Framework::Gamma, &Array1::zeros(5), &id, 100_000, &mut rng).unwrap();
        let col = u.column(0);
        let skew = col.iter().map(|v| v.powi(3)).sum::<f64>() / col.len() as f64;
        assert!((skew - 2.0 / 10f64.sqrt()).abs() < 0.1, "skewness {skew}");
    }

    #[test]
    fn sampling_is_reproducible() {
        let f = CovFactor::ar1_cholesky(10, 0.5).unwrap();
        let nu = Array1::zeros(10);
        for fw in [Framework::Gaussian, Framework::Gamma] {
            let a = sample_log_basis(fw, &nu, &f, 4, &mut RngStream::new(8, 2)).unwrap();
            let b = sample_log_basis(fw, &nu, &f, 4, &mut RngStream::new(8, 2)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn clr_samples_properties() {
        let constant = array![[2.0, 2.0, 2.0]];
        assert!(to_clr_samples::<f64>(&constant).values().iter().all(|&v| v == 0.0));

        let mut rng = RngStream::new(4, 4);
        let delta: Array2<f64> = sample_std_normal_matrix(&mut rng, 6, 12);
        let once = to_clr_samples::<f64>(&delta);
        let twice = to_clr_samples::<f64>(once.values());
        assert!(max_abs_diff(once.values(), twice.values()) < 1e-14);

        // exp -> close -> clr agrees with projecting the log basis directly
        let eta = delta.mapv(f64::exp);
        let totals = eta.sum_axis(Axis(1)).insert_axis(Axis(1));
        let comp = CompositionMatrix::new(&eta / &totals).unwrap();
        let via = clr_transform(&comp);
        assert!(max_abs_diff(once.values(), via.values()) < 1e-10);
    }

    fn config() -> ScenarioConfig {
        ScenarioConfig {
            n1: 10,
            n2: 12,
            p: 20,
            covariance: CovarianceKind::Ar1 { rho: 0.5 },
            framework: Framework::Gaussian,
            sparsity: 0.1,
            target_ratio: 0.1,
            alpha: 0.05,
            replications: 3,
            master_seed: 42,
            weights: CombinationWeights::default(),
        }
    }

    #[test]
    fn scenario_config_json() {
        let json = r#"{"n1":10,"n2":12,"p":20,"covariance":{"family":"ar1","rho":0.5},
            "framework":"gaussian","sparsity":0.1,"replications":3,"master_seed":42}"#;
        let cfg: ScenarioConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg, config());
        let back: ScenarioConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        let bad = json.replace("ar1", "toeplitz");
        assert!(serde_json::from_str::<ScenarioConfig>(&bad).is_err());
    }

    #[test]
    fn scenario_validation() {
        assert!(config().validate().is_ok());
        let mut c = config();
        c.replications = 0;
        assert!(matches!(c.validate(), Err(Error::Config { field, .. }) if field == "replications"));
        let mut c = config();
        c.sparsity = 0.01;
        assert!(c.validate().is_err());
        let mut c = config();
        c.covariance = CovarianceKind::Ar1 { rho: 1.0 };
        assert!(c.validate().is_err());
    }

    #[test]
    fn scenario_streams() {
        let s = Scenario::new(config()).unwrap();
        let a: TwoSampleClr<f64> = s.sample(0).unwrap();
        let b: TwoSampleClr<f64> = s.sample(0).unwrap();
        let c: TwoSampleClr<f64> = s.sample(1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!((a.n1(), a.n2(), a.dim()), (10, 12, 20));
        // the support does not depend on the framework or sample sizes
        let mut other = config();
        other.framework = Framework::Gamma;
        other.n1 = 30;
        assert_eq!(Scenario::new(other).unwrap().signal().support, s.signal().support);
    }
}

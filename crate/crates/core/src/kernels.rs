//! Exact regularised-Laplacian and heat kernels, and kernel estimates assembled
//! from graph random features.

use std::time::{Duration, Instant};

use nalgebra::SymmetricEigen;
use serde::Serialize;

use crate::dense::DenseMatrix;
use crate::error::{invalid, Error, Result};
use crate::features::{BuildStats, FeatureMatrix};
use crate::graph::{normalized_laplacian, Graph};

/// `(I + sigma^2 L)^-d` by `d` Cholesky solves.
pub fn exact_regularized_laplacian(g: &Graph, sigma: f64, d: u32) -> Result<DenseMatrix> {
    if d == 0 {
        return Err(invalid("kernel power d must be at least 1"));
    }
    let lap = normalized_laplacian(g)?;
    regularized_from_laplacian(&lap, sigma * sigma, d)
}

/// `(I + s L)^-d` for a given Laplacian and step `s`.
pub fn regularized_from_laplacian(lap: &DenseMatrix, s: f64, d: u32) -> Result<DenseMatrix> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(invalid(format!("regulariser {s} must be finite and non-negative")));
    }
    let m = DenseMatrix::identity(lap.n()).add(&lap.scale(s));
    let mut out = DenseMatrix::identity(lap.n());
    for _ in 0..d {
        out = m.spd_solve(&out)?;
    }
    Ok(out)
}

/// `exp(-L t)` via a symmetric eigendecomposition of the normalised Laplacian.
pub fn exact_heat_kernel(g: &Graph, t: f64) -> Result<DenseMatrix> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("diffusion time {t} must be finite and non-negative")));
    }
    let lap = normalized_laplacian(g)?;
    if lap.as_nalgebra().iter().any(|x| !x.is_finite()) {
        return Err(Error::Eigen);
    }
    let eig = SymmetricEigen::new(lap.into_nalgebra());
    let v = &eig.eigenvectors;
    let scaled = v * nalgebra::DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (-l * t).exp()));
    Ok(DenseMatrix::from_nalgebra(scaled * v.transpose()))
}

/// Applies the backward-Euler evolution `(I + (t/n_steps) L)^-n_steps` to `u0`.
pub fn backward_euler_apply(g: &Graph, t: f64, n_steps: usize, u0: &[f64]) -> Result<Vec<f64>> {
    if n_steps == 0 {
        return Err(invalid("need at least one time step"));
    }
    if u0.len() != g.n() {
        return Err(Error::DimensionMismatch { expected: g.n(), got: u0.len() });
    }
    let lap = normalized_laplacian(g)?;
    let m = DenseMatrix::identity(g.n()).add(&lap.scale(t / n_steps as f64));
    let chol = m.into_nalgebra().cholesky().ok_or(Error::Singular)?;
    let mut u = nalgebra::DVector::from_column_slice(u0);
    for _ in 0..n_steps {
        u = chol.solve(&u);
    }
    Ok(u.iter().copied().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalMode {
    /// `phi(i) . phi(i)` from one ensemble; biased upwards.
    SameEnsemble,
    /// `phi_1(i) . phi_2(i)` from two independent ensembles.
    TwoEnsemble,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateMeta {
    pub sigma: f64,
    pub power: u32,
    pub factors: usize,
    pub diagonal: DiagonalMode,
    pub walks: u64,
    pub truncated: u64,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelEstimate {
    pub matrix: DenseMatrix,
    pub meta: EstimateMeta,
}

fn k2_factor(phi: &FeatureMatrix, sigma: f64) -> DenseMatrix {
    let s2 = sigma * sigma;
    phi.gram().scale(1.0 / ((1.0 + s2) * (1.0 + s2)))
}

fn meta_for(factors: &[&FeatureMatrix], sigma: f64, power: u32, started: Instant) -> EstimateMeta {
    let stats = factors.iter().fold(BuildStats::default(), |a, f| BuildStats {
        walks: a.walks + f.stats.walks,
        truncated: a.truncated + f.stats.truncated,
        steps: a.steps + f.stats.steps,
    });
    let diagonal = if factors.iter().all(|f| f.has_unbiased_diagonal()) {
        DiagonalMode::TwoEnsemble
    } else {
        DiagonalMode::SameEnsemble
    };
    EstimateMeta {
        sigma,
        power,
        factors: factors.len(),
        diagonal,
        walks: stats.walks,
        truncated: stats.truncated,
        warnings: factors.iter().filter_map(|f| f.warning.clone()).collect(),
        elapsed: started.elapsed(),
    }
}

/// `(1 + sigma^2)^-2 Phi Phi^T`; `phi` must be built on `grf_walk_graph(g, sigma)`.
pub fn estimate_k2(phi: &FeatureMatrix, sigma: f64) -> Result<KernelEstimate> {
    let started = Instant::now();
    let matrix = k2_factor(phi, sigma);
    Ok(KernelEstimate { matrix, meta: meta_for(&[phi], sigma, 2, started) })
}

/// Number of independent feature matrices [`estimate_kd`] needs for power `d`.
pub fn factors_needed(d: u32) -> usize {
    d.div_ceil(2) as usize
}

/// Estimate of `(I + sigma^2 L)^-d`.
///
/// Even `d = 2k` multiplies `k` independent `K^(2)` estimates; odd `d = 2k - 1`
/// multiplies the same product by `(I + sigma^2 L)` on the right. A product of
/// independent unbiased factors is unbiased, so `factors` must hold at least
/// `ceil(d/2)` independently seeded matrices, and off-diagonal entries are only
/// unbiased when every factor carries a two-ensemble diagonal (except `d = 2`).
pub fn estimate_kd(factors: &[&FeatureMatrix], sigma: f64, d: u32, laplacian: &DenseMatrix) -> Result<KernelEstimate> {
    let started = Instant::now();
    if d == 0 {
        return Err(invalid("kernel power d must be at least 1"));
    }
    let need = factors_needed(d);
    if factors.len() < need {
        return Err(Error::DimensionMismatch { expected: need, got: factors.len() });
    }
    let factors = &factors[..need];
    let n = laplacian.n();
    if let Some(bad) = factors.iter().find(|f| f.n() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: bad.n() });
    }
    let mut matrix = k2_factor(factors[0], sigma);
    for f in &factors[1..] {
        matrix = matrix.matmul(&k2_factor(f, sigma));
    }
    if d % 2 == 1 {
        let reg = DenseMatrix::identity(n).add(&laplacian.scale(sigma * sigma));
        matrix = matrix.matmul(&reg);
    }
    Ok(KernelEstimate { matrix, meta: meta_for(factors, sigma, d, started) })
}

/// `||K - K_hat||_F^2 / ||K||_F^2`.
pub fn relative_frobenius_error(exact: &DenseMatrix, approx: &DenseMatrix) -> Result<f64> {
    if exact.n() != approx.n() {
        return Err(Error::DimensionMismatch { expected: exact.n(), got: approx.n() });
    }
    let denom = exact.frobenius_norm_sq();
    if denom == 0.0 {
        return Err(invalid("exact kernel has zero Frobenius norm"));
    }
    Ok(exact.sub(approx).frobenius_norm_sq() / denom)
}

/// A symmetric kernel that can be applied to vectors.
pub trait KernelOperator {
    fn n(&self) -> usize;
    fn apply(&self, v: &[f64]) -> Vec<f64>;
}

impl KernelOperator for DenseMatrix {
    fn n(&self) -> usize {
        DenseMatrix::n(self)
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.mul_vec(v)
    }
}

/// `(1 + sigma^2)^-2 Phi Phi^T` applied as `Phi (Phi^T v)` without forming it.
#[derive(Debug, Clone)]
pub struct LowRankK2<'a> {
    phi: &'a FeatureMatrix,
    scale: f64,
}

impl<'a> LowRankK2<'a> {
    pub fn new(phi: &'a FeatureMatrix, sigma: f64) -> Self {
        let s2 = sigma * sigma;
        Self { phi, scale: 1.0 / ((1.0 + s2) * (1.0 + s2)) }
    }
}

impl KernelOperator for LowRankK2<'_> {
    fn n(&self) -> usize {
        self.phi.n()
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = self.phi.apply_gram(v);
        out.iter_mut().for_each(|x| *x *= self.scale);
        out
    }
}

//! Closed-form walk-length laws and the variance-structure matrices of the
//! antithetic-termination analysis, evaluated numerically.
//!
//! All matrices here are indexed by pairs of eigenvalues `(lambda_p, lambda_q)`
//! of an adjacency matrix, with `lbar = w * lambda` the eigenvalues of `U`.

use serde::{Deserialize, Serialize};

use crate::coupling::joint_termination_probs;
use crate::dense::DenseMatrix;
use crate::error::{invalid, Error, Result};
use crate::graph::Graph;

const DENOM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub p: f64,
    pub delta: Option<f64>,
    pub w: f64,
    pub d_reg: usize,
    pub lambdas: Vec<f64>,
}

impl TheoryParams {
    pub fn new(p: f64, w: f64, lambdas: Vec<f64>) -> Self {
        Self { p, delta: None, w, d_reg: 0, lambdas }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_p(self.p)?;
        if self.lambdas.is_empty() {
            return Err(invalid("need at least one eigenvalue"));
        }
        if self.lambdas.iter().any(|l| !l.is_finite()) || !self.w.is_finite() {
            return Err(invalid("eigenvalues and w must be finite"));
        }
        if self.spectral_radius_u() >= 1.0 {
            return Err(invalid(format!(
                "w * max|lambda| = {} must be below 1",
                self.spectral_radius_u()
            )));
        }
        if let Some(delta) = self.delta {
            joint_termination_probs(self.p, delta)?;
        }
        Ok(())
    }

    pub fn c(&self) -> f64 {
        c_const(self.p)
    }

    pub fn spectral_radius_u(&self) -> f64 {
        self.w.abs() * self.lambdas.iter().fold(0.0f64, |a, l| a.max(l.abs()))
    }
}

/// `c = (1 - 2p) / (1 - p)^2`.
pub fn c_const(p: f64) -> f64 {
    (1.0 - 2.0 * p) / ((1.0 - p) * (1.0 - p))
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p <= 0.5 {
        Ok(())
    } else {
        Err(invalid(format!("p = {p} must lie in (0, 1/2]")))
    }
}

/// `P(len_2 = i | len_1 = m)` for an antithetic pair.
pub fn conditional_length_pmf(p: f64, m: u32, i: u32) -> Result<f64> {
    check_p(p)?;
    let r = (1.0 - 2.0 * p) / (1.0 - p);
    Ok(match i.cmp(&m) {
        std::cmp::Ordering::Less => r.powi(i as i32) * p / (1.0 - p),
        std::cmp::Ordering::Equal => 0.0,
        std::cmp::Ordering::Greater => r.powi(m as i32) * (1.0 - p).powi((i - m - 1) as i32) * p,
    })
}

/// `E[len_2 | len_1 = m] = (1-2p)/p + 2((1-2p)/(1-p))^m`.
pub fn conditional_expected_length(p: f64, m: u32) -> Result<f64> {
    check_p(p)?;
    let r = (1.0 - 2.0 * p) / (1.0 - p);
    Ok((1.0 - 2.0 * p) / p + 2.0 * r.powi(m as i32))
}

pub fn marginal_expected_length(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("p = {p} must lie in (0, 1)")));
    }
    Ok((1.0 - p) / p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairCoupling {
    Iid,
    Antithetic,
    Offset { delta: f64 },
}

/// Probability that two walks out of the same node on a `d_reg`-regular graph
/// contain two given subwalks of lengths `m` and `n`.
pub fn joint_subwalk_prob(p: f64, d_reg: usize, m: u32, n: u32, coupling: PairCoupling) -> Result<f64> {
    if d_reg == 0 {
        return Err(invalid("d_reg must be at least 1"));
    }
    let d = d_reg as f64;
    let branch = |s: f64| -> f64 {
        // s is the per-step probability both walkers survive
        let total = d.powi(-((m + n) as i32));
        let r = s / (1.0 - p);
        match n.cmp(&m) {
            std::cmp::Ordering::Less => total * r.powi(n as i32) * (1.0 - p).powi(m as i32),
            std::cmp::Ordering::Equal => total * s.powi(m as i32),
            std::cmp::Ordering::Greater => total * r.powi(m as i32) * (1.0 - p).powi(n as i32),
        }
    };
    match coupling {
        PairCoupling::Iid => {
            if !(p > 0.0 && p < 1.0) {
                return Err(invalid(format!("p = {p} must lie in (0, 1)")));
            }
            Ok(((1.0 - p) / d).powi((m + n) as i32))
        }
        PairCoupling::Antithetic => {
            check_p(p)?;
            Ok(branch(1.0 - 2.0 * p))
        }
        PairCoupling::Offset { delta } => {
            joint_termination_probs(p, delta)?;
            Ok(branch(1.0 - p - delta.min(p)))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrices {
    pub c: DenseMatrix,
    pub d: DenseMatrix,
    pub d_delta: Option<DenseMatrix>,
    pub e: DenseMatrix,
    pub f: DenseMatrix,
    pub j: DenseMatrix,
}

pub fn correlation_matrices(params: &TheoryParams) -> Result<CorrelationMatrices> {
    params.validate()?;
    let p = params.p;
    let c = params.c();
    let lbar: Vec<f64> = params.lambdas.iter().map(|l| params.w * l).collect();
    let n = lbar.len();

    let c_delta = params.delta.map(|delta| (1.0 - p - delta.min(p)) / ((1.0 - p) * (1.0 - p)));
    let mut guard = Ok(());
    let mut check = |den: f64| {
        if den.abs() < DENOM_FLOOR && guard.is_ok() {
            guard = Err(Error::InvalidParameter(format!("denominator {den:e} below {DENOM_FLOOR:e}")));
        }
    };

    let mut cm = DenseMatrix::zeros(n);
    let mut dm = DenseMatrix::zeros(n);
    let mut ddm = c_delta.map(|_| DenseMatrix::zeros(n));
    let mut jm = DenseMatrix::zeros(n);
    for a in 0..n {
        for b in 0..n {
            let (la, lb) = (lbar[a], lbar[b]);
            let x = la * lb;
            let cab = la / (1.0 - la) * lb / (1.0 - lb);
            let den = 1.0 - c * x;
            check(den);
            let dab = cab * c * (1.0 - x) / den;
            let ratio = (1.0 - x) / ((1.0 - la) * (1.0 - lb));
            cm[(a, b)] = cab;
            dm[(a, b)] = dab;
            jm[(a, b)] = ratio * (dab - cab);
            if let (Some(cd), Some(m)) = (c_delta, ddm.as_mut()) {
                let den = 1.0 - x * cd;
                check(den);
                m[(a, b)] = x * cd / den * ratio;
            }
        }
    }
    guard?;
    let e = DenseMatrix::from_fn(n, |a, b| cm[(a, b)] * (dm[(a, b)] - cm[(a, b)]));
    let f = DenseMatrix::from_fn(n, |a, b| (dm[(a, b)] - cm[(a, b)]) * (dm[(a, b)] + cm[(a, b)]));
    Ok(CorrelationMatrices { c: cm, d: dm, d_delta: ddm, e, f, j: jm })
}

/// Eigenvalues of the unweighted adjacency matrix of `g`, ascending.
pub fn adjacency_spectrum(g: &Graph) -> Result<Vec<f64>> {
    g.unweighted_adjacency()?.symmetric_eigenvalues()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefinitenessCheck {
    pub negative_semidefinite: bool,
    pub max_eigenvalue: f64,
}

pub fn check_negative_semidefinite(m: &DenseMatrix, tol: f64) -> Result<DefinitenessCheck> {
    if !m.is_symmetric(1e-12 * m.frobenius_norm().max(1.0)) {
        return Err(invalid("definiteness check needs a symmetric matrix"));
    }
    let max = m.symmetric_eigenvalues()?.last().copied().unwrap_or(0.0);
    Ok(DefinitenessCheck { negative_semidefinite: max <= tol, max_eigenvalue: max })
}

/// One line of a `theory-check` report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryRecord {
    pub p: f64,
    pub w: f64,
    pub delta: Option<f64>,
    pub matrix: String,
    pub lambda_max: f64,
    pub frobenius: f64,
    pub negative_semidefinite: bool,
}

/// Relative tolerance used for every definiteness verdict.
pub const NSD_RELATIVE_TOL: f64 = 1e-10;

/// Checks E, F and J (and the D^Delta analogue of E when a delta is set).
pub fn theory_records(params: &TheoryParams) -> Result<Vec<TheoryRecord>> {
    let mats = correlation_matrices(params)?;
    let mut named: Vec<(&str, DenseMatrix)> = vec![("E", mats.e), ("F", mats.f), ("J", mats.j)];
    if let Some(dd) = &mats.d_delta {
        let e_delta = DenseMatrix::from_fn(dd.n(), |a, b| mats.c[(a, b)] * (dd[(a, b)] - mats.c[(a, b)]));
        named.push(("E_delta", e_delta));
    }
    let mut out = Vec::new();
    for (name, m) in named {
        let fro = m.frobenius_norm();
        let chk = check_negative_semidefinite(&m, NSD_RELATIVE_TOL * fro)?;
        out.push(TheoryRecord {
            p: params.p,
            w: params.w,
            delta: params.delta,
            matrix: name.to_string(),
            lambda_max: chk.max_eigenvalue,
            frobenius: fro,
            negative_semidefinite: chk.negative_semidefinite,
        });
    }
    Ok(out)
}

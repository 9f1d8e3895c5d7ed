//! The four experiments: kernel approximation error, diffusion, clustering and
//! mesh-normal regression. Repeats run in parallel on derived seeds and are
//! collected in repeat order, so reports are reproducible.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use qgrf_core::coupling::CouplingScheme;
use qgrf_core::dense::DenseMatrix;
use qgrf_core::features::{
    build_feature_matrix, build_feature_matrix_two_ensemble, Execution, FeatureMatrix, SamplingStrategy, WalkConfig,
};
use qgrf_core::graph::{grf_walk_graph, Graph};
use qgrf_core::kernels::{
    backward_euler_apply, estimate_k2, exact_regularized_laplacian, relative_frobenius_error, KernelOperator, LowRankK2,
};
use qgrf_core::rng::derive_seed;
use qgrf_core::theory::{correlation_matrices, theory_records, TheoryParams};

use crate::kmeans::{clustering_error, kernelized_kmeans};
use crate::mesh::{dot, norm, vertex_normals, Mesh, Vec3};
use crate::report::{ConfigEcho, ExperimentReport, ReportRow, TheoryReport};
use crate::{BenchError, Result};

pub const KMEANS_MAX_ITERS: usize = 100;

/// Coupling named on the command line; `Ensemble` resolves its group size per `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchemeChoice {
    Iid,
    Antithetic,
    Ensemble { delta: f64, group_size: Option<usize> },
}

impl SchemeChoice {
    pub fn label(&self) -> &'static str {
        match self {
            SchemeChoice::Iid => "iid",
            SchemeChoice::Antithetic => "antithetic",
            SchemeChoice::Ensemble { .. } => "ensemble",
        }
    }

    /// Without an explicit group size, uses the largest group that fits on the
    /// `delta` lattice and divides `m`.
    pub fn resolve(&self, m: usize) -> Result<CouplingScheme> {
        Ok(match *self {
            SchemeChoice::Iid => CouplingScheme::Iid,
            SchemeChoice::Antithetic => CouplingScheme::AntitheticPairs,
            SchemeChoice::Ensemble { delta, group_size: Some(g) } => CouplingScheme::OffsetEnsemble { delta, group_size: g },
            SchemeChoice::Ensemble { delta, group_size: None } => {
                if !(delta > 0.0 && delta < 1.0) {
                    return Err(BenchError::Config(format!("delta {delta} must lie in (0, 1)")));
                }
                let cap = ((1.0 / delta + 1e-9).floor() as usize).min(m);
                let g = (2..=cap).rev().find(|&g| m.is_multiple_of(g)).ok_or_else(|| {
                    BenchError::Config(format!("no ensemble group of spacing {delta} divides {m} walkers"))
                })?;
                CouplingScheme::OffsetEnsemble { delta, group_size: g }
            }
        })
    }

    pub fn delta(&self) -> Option<f64> {
        match *self {
            SchemeChoice::Ensemble { delta, .. } => Some(delta),
            _ => None,
        }
    }
}

fn labels(schemes: &[SchemeChoice]) -> Vec<String> {
    schemes.iter().map(|s| s.label().to_string()).collect()
}

fn shared_delta(schemes: &[SchemeChoice]) -> Option<f64> {
    schemes.iter().find_map(SchemeChoice::delta)
}

fn check_repeats(repeats: usize) -> Result<()> {
    if repeats == 0 {
        return Err(BenchError::Config("need at least one repeat".into()));
    }
    Ok(())
}

fn features(walk: &Graph, cfg: &WalkConfig, two_ensemble: bool) -> Result<FeatureMatrix> {
    let fm = if two_ensemble {
        build_feature_matrix_two_ensemble(walk, cfg, Execution::Serial)?
    } else {
        build_feature_matrix(walk, cfg)?
    };
    if let Some(w) = &fm.warning {
        log::warn!("{w}");
    }
    Ok(fm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrobeniusParams {
    pub sigma: f64,
    pub p: f64,
    pub walks: Vec<usize>,
    pub schemes: Vec<SchemeChoice>,
    pub repeats: usize,
    pub seed: u64,
    pub strategy: SamplingStrategy,
    pub two_ensemble_diagonal: bool,
}

impl Default for FrobeniusParams {
    fn default() -> Self {
        Self {
            sigma: 0.1,
            p: 0.5,
            walks: vec![2, 4, 8, 16],
            schemes: vec![SchemeChoice::Iid, SchemeChoice::Antithetic],
            repeats: 100,
            seed: 0,
            strategy: SamplingStrategy::UniformNeighbor,
            two_ensemble_diagonal: false,
        }
    }
}

/// Relative Frobenius error of the `K^(2)` estimate from `phi` against `exact`.
pub fn frobenius_error_of(exact: &DenseMatrix, phi: &FeatureMatrix, sigma: f64) -> Result<f64> {
    Ok(relative_frobenius_error(exact, &estimate_k2(phi, sigma)?.matrix)?)
}

/// Repeat `r` uses seed `derive_seed(seed, r)` for every scheme and `m`, so
/// schemes can be compared pairwise.
pub fn run_frobenius(g: &Graph, graph_label: &str, params: &FrobeniusParams) -> Result<ExperimentReport> {
    check_repeats(params.repeats)?;
    let exact = exact_regularized_laplacian(g, params.sigma, 2)?;
    let walk = grf_walk_graph(g, params.sigma)?;
    let mut rows = Vec::new();
    for &m in &params.walks {
        for choice in &params.schemes {
            let cfg = WalkConfig::new(m, params.p, choice.resolve(m)?, 0).with_strategy(params.strategy);
            cfg.validate(&walk)?;
            let values = (0..params.repeats)
                .into_par_iter()
                .map(|r| {
                    let phi = features(&walk, &cfg.with_seed(derive_seed(params.seed, r as u64)), params.two_ensemble_diagonal)?;
                    frobenius_error_of(&exact, &phi, params.sigma)
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(ReportRow::new("relative_frobenius_error", choice.label(), m, values));
        }
    }
    let mut extra = BTreeMap::new();
    let diag = if params.two_ensemble_diagonal { "two_ensemble" } else { "same_ensemble" };
    extra.insert("diagonal".into(), diag.into());
    extra.insert("strategy".into(), format!("{:?}", params.strategy));
    Ok(ExperimentReport {
        experiment: "frobenius".into(),
        config: ConfigEcho {
            graph: graph_label.into(),
            n: g.n(),
            p: params.p,
            sigma: Some(params.sigma),
            walks: params.walks.clone(),
            schemes: labels(&params.schemes),
            delta: shared_delta(&params.schemes),
            repeats: params.repeats,
            seed: params.seed,
            extra,
        },
        rows,
        notes: vec![],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionParams {
    pub t: f64,
    pub n_steps: usize,
    pub m: usize,
    pub p: f64,
    pub schemes: Vec<SchemeChoice>,
    pub repeats: usize,
    pub seed: u64,
    /// Node holding the initial unit of heat.
    pub source: usize,
}

impl Default for DiffusionParams {
    fn default() -> Self {
        Self {
            t: 1.0,
            n_steps: 1000,
            m: 10,
            p: 0.5,
            schemes: vec![SchemeChoice::Iid, SchemeChoice::Antithetic],
            repeats: 1000,
            seed: 0,
            source: 0,
        }
    }
}

/// Applies `op` to `u0` `applications` times.
pub fn evolve(op: &dyn KernelOperator, u0: &[f64], applications: usize) -> Vec<f64> {
    let mut u = u0.to_vec();
    for _ in 0..applications {
        u = op.apply(&u);
    }
    u
}

pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Mean squared error per coordinate of `(K^(2)_hat)^(n_steps/2) u0` against the
/// exact backward-Euler evolution, with one feature matrix per repeat.
pub fn simulate_diffusion(g: &Graph, graph_label: &str, params: &DiffusionParams) -> Result<ExperimentReport> {
    check_repeats(params.repeats)?;
    if params.n_steps == 0 || params.n_steps % 2 == 1 {
        return Err(BenchError::Config(format!("number of time steps {} must be even and positive", params.n_steps)));
    }
    if params.source >= g.n() {
        return Err(BenchError::Config(format!("source node {} outside graph of {} nodes", params.source, g.n())));
    }
    if !(params.t > 0.0) {
        return Err(BenchError::Config(format!("diffusion time {} must be positive", params.t)));
    }
    let sigma = (params.t / params.n_steps as f64).sqrt();
    let walk = grf_walk_graph(g, sigma)?;
    let mut u0 = vec![0.0; g.n()];
    u0[params.source] = 1.0;
    let reference = backward_euler_apply(g, params.t, params.n_steps, &u0)?;
    let mut rows = Vec::new();
    for choice in &params.schemes {
        let cfg = WalkConfig::new(params.m, params.p, choice.resolve(params.m)?, 0);
        cfg.validate(&walk)?;
        let values = (0..params.repeats)
            .into_par_iter()
            .map(|r| {
                let phi = features(&walk, &cfg.with_seed(derive_seed(params.seed, r as u64)), false)?;
                let u = evolve(&LowRankK2::new(&phi, sigma), &u0, params.n_steps / 2);
                Ok(mse(&u, &reference))
            })
            .collect::<Result<Vec<f64>>>()?;
        let totals = values.iter().map(|v| v * g.n() as f64).collect();
        rows.push(ReportRow::new("mse", choice.label(), params.m, values));
        rows.push(ReportRow::new("squared_error", choice.label(), params.m, totals));
    }
    let mut extra = BTreeMap::new();
    extra.insert("t".into(), format!("{:?}", params.t));
    extra.insert("n_steps".into(), params.n_steps.to_string());
    extra.insert("source".into(), params.source.to_string());
    Ok(ExperimentReport {
        experiment: "diffuse".into(),
        config: ConfigEcho {
            graph: graph_label.into(),
            n: g.n(),
            p: params.p,
            sigma: Some(sigma),
            walks: vec![params.m],
            schemes: labels(&params.schemes),
            delta: shared_delta(&params.schemes),
            repeats: params.repeats,
            seed: params.seed,
            extra,
        },
        rows,
        notes: vec!["mse is averaged over coordinates; squared_error is the squared euclidean distance".into()],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterParams {
    pub sigma: f64,
    pub p: f64,
    pub m: usize,
    pub schemes: Vec<SchemeChoice>,
    pub repeats: usize,
    pub n_clusters: usize,
    pub seed: u64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            sigma: 0.1,
            p: 0.5,
            m: 16,
            schemes: vec![SchemeChoice::Iid, SchemeChoice::Antithetic],
            repeats: 20,
            n_clusters: 2,
            seed: 0,
        }
    }
}

/// Clustering error of k-means on estimated kernels against k-means on the exact kernel.
pub fn run_clustering(g: &Graph, graph_label: &str, params: &ClusterParams) -> Result<ExperimentReport> {
    check_repeats(params.repeats)?;
    let exact = exact_regularized_laplacian(g, params.sigma, 2)?;
    let reference = kernelized_kmeans(&exact, params.n_clusters, params.seed, KMEANS_MAX_ITERS)?;
    let walk = grf_walk_graph(g, params.sigma)?;
    let mut rows = Vec::new();
    for choice in &params.schemes {
        let cfg = WalkConfig::new(params.m, params.p, choice.resolve(params.m)?, 0);
        cfg.validate(&walk)?;
        let values = (0..params.repeats)
            .into_par_iter()
            .map(|r| {
                let seed = derive_seed(params.seed, r as u64);
                let phi = features(&walk, &cfg.with_seed(seed), false)?;
                let k = estimate_k2(&phi, params.sigma)?.matrix;
                let pred = kernelized_kmeans(&k, params.n_clusters, params.seed, KMEANS_MAX_ITERS)?;
                clustering_error(&pred, &reference)
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(ReportRow::new("clustering_error", choice.label(), params.m, values));
    }
    let mut extra = BTreeMap::new();
    extra.insert("clusters".into(), params.n_clusters.to_string());
    Ok(ExperimentReport {
        experiment: "cluster".into(),
        config: ConfigEcho {
            graph: graph_label.into(),
            n: g.n(),
            p: params.p,
            sigma: Some(params.sigma),
            walks: vec![params.m],
            schemes: labels(&params.schemes),
            delta: shared_delta(&params.schemes),
            repeats: params.repeats,
            seed: params.seed,
            extra,
        },
        rows,
        notes: vec!["reference labels come from k-means on the exact kernel".into()],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionOutcome {
    /// Mean of `1 - cos(theta)` over test vertices.
    pub mean_error: f64,
    /// Test vertices with no kernel mass on the training set (error counted as 1).
    pub flagged: Vec<usize>,
}

/// Random test split of `round(fraction * n)` vertices (at least one), sorted.
pub fn split_test_set(n: usize, fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction < 0.5) {
        return Err(BenchError::Config(format!("test fraction {fraction} must lie in (0, 0.5)")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let k = ((fraction * n as f64).round() as usize).max(1);
    let mut test = idx[..k].to_vec();
    test.sort_unstable();
    Ok(test)
}

/// Predicts each test normal as the kernel-weighted sum of training normals.
/// `kernel_rows[k]` is the kernel row of `test[k]` over all vertices.
pub fn regress_with_kernel_rows(normals: &[Vec3], test: &[usize], kernel_rows: &[Vec<f64>]) -> RegressionOutcome {
    let mut is_test = vec![false; normals.len()];
    test.iter().for_each(|&i| is_test[i] = true);
    let mut total = 0.0;
    let mut flagged = Vec::new();
    for (&i, row) in test.iter().zip(kernel_rows) {
        let mut pred = [0.0; 3];
        for (j, &kij) in row.iter().enumerate() {
            if !is_test[j] && kij != 0.0 {
                for c in 0..3 {
                    pred[c] += kij * normals[j][c];
                }
            }
        }
        let l = norm(pred);
        if l == 0.0 || !l.is_finite() {
            flagged.push(i);
            total += 1.0;
        } else {
            total += 1.0 - dot(pred, normals[i]) / l;
        }
    }
    RegressionOutcome { mean_error: total / test.len() as f64, flagged }
}

/// Mesh-normal regression with a GRF estimate of `K^(2)` on the mesh graph.
/// The split comes from `seed`; the walks from a seed derived from it.
pub fn kernel_regress_normals(
    mesh: &Mesh,
    test_fraction: f64,
    sigma: f64,
    m: usize,
    p: f64,
    scheme: CouplingScheme,
    seed: u64,
) -> Result<RegressionOutcome> {
    let g = mesh.graph()?;
    let normals = vertex_normals(mesh)?;
    let test = split_test_set(g.n(), test_fraction, seed)?;
    let walk = grf_walk_graph(&g, sigma)?;
    let phi = features(&walk, &WalkConfig::new(m, p, scheme, derive_seed(seed, 1)), false)?;
    let rows = phi.gram_rows(&test);
    Ok(regress_with_kernel_rows(&normals, &test, &rows))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressParams {
    pub test_fraction: f64,
    pub sigma: f64,
    pub m: usize,
    pub p: f64,
    pub schemes: Vec<SchemeChoice>,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for RegressParams {
    fn default() -> Self {
        Self {
            test_fraction: 0.05,
            sigma: 0.1,
            m: 6,
            p: 0.5,
            schemes: vec![SchemeChoice::Iid, SchemeChoice::Antithetic],
            repeats: 50,
            seed: 0,
        }
    }
}

/// Split `r` is shared by every scheme.
pub fn run_regression(mesh: &Mesh, mesh_label: &str, params: &RegressParams) -> Result<ExperimentReport> {
    check_repeats(params.repeats)?;
    let mut rows = Vec::new();
    let mut flagged_total = 0usize;
    for choice in &params.schemes {
        let scheme = choice.resolve(params.m)?;
        let outcomes = (0..params.repeats)
            .into_par_iter()
            .map(|r| {
                kernel_regress_normals(mesh, params.test_fraction, params.sigma, params.m, params.p, scheme, derive_seed(params.seed, r as u64))
            })
            .collect::<Result<Vec<_>>>()?;
        flagged_total += outcomes.iter().map(|o| o.flagged.len()).sum::<usize>();
        rows.push(ReportRow::new("angular_error", choice.label(), params.m, outcomes.iter().map(|o| o.mean_error).collect()));
    }
    let mut extra = BTreeMap::new();
    extra.insert("test_fraction".into(), format!("{:?}", params.test_fraction));
    Ok(ExperimentReport {
        experiment: "regress".into(),
        config: ConfigEcho {
            graph: mesh_label.into(),
            n: mesh.vertices.len(),
            p: params.p,
            sigma: Some(params.sigma),
            walks: vec![params.m],
            schemes: labels(&params.schemes),
            delta: shared_delta(&params.schemes),
            repeats: params.repeats,
            seed: params.seed,
            extra,
        },
        rows,
        notes: vec![format!("{flagged_total} test vertices had no kernel mass on the training set")],
    })
}

pub fn run_theory_check(params: &TheoryParams) -> Result<TheoryReport> {
    let mats = correlation_matrices(params)?;
    Ok(TheoryReport {
        p: params.p,
        w: params.w,
        delta: params.delta,
        lambdas: params.lambdas.clone(),
        c: params.c(),
        d_frobenius: mats.d.frobenius_norm(),
        records: theory_records(params)?,
    })
}

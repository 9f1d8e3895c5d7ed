#![allow(dead_code)]

use qgrf_core::dense::DenseMatrix;
use qgrf_core::features::{build_feature_matrix_two_ensemble, build_feature_matrix_with, Execution, FeatureMatrix};
use qgrf_core::graph::{load_edge_list, Graph};
use qgrf_core::rng::derive_seed;
use qgrf_core::stats::Running;
use qgrf_core::WalkConfig;

pub fn karate() -> Graph {
    load_edge_list(include_str!("../fixtures/karate.edges")).unwrap()
}

/// Per-entry running moments of `phi(i) . phi(j)` over independent ensembles.
pub struct GramMoments {
    pub n: usize,
    pub entries: Vec<Running>,
}

impl GramMoments {
    pub fn at(&self, i: usize, j: usize) -> &Running {
        &self.entries[i * self.n + j]
    }
}

pub fn build(walk: &Graph, cfg: &WalkConfig, two_ensemble: bool) -> FeatureMatrix {
    if two_ensemble {
        build_feature_matrix_two_ensemble(walk, cfg, Execution::Serial).unwrap()
    } else {
        build_feature_matrix_with(walk, cfg, Execution::Serial).unwrap()
    }
}

pub fn gram_moments(walk: &Graph, cfg: &WalkConfig, reps: u64, two_ensemble: bool) -> GramMoments {
    let n = walk.n();
    let mut entries = vec![Running::default(); n * n];
    for r in 0..reps {
        let c = cfg.with_seed(derive_seed(cfg.seed, r));
        let gram = build(walk, &c, two_ensemble).gram();
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j].push(gram[(i, j)]);
            }
        }
    }
    GramMoments { n, entries }
}

/// Entries `(i, j, z)` where the mean misses the oracle by more than `z_max` standard errors.
pub fn misses(m: &GramMoments, oracle: &DenseMatrix, z_max: f64, off_diagonal_only: bool) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for i in 0..m.n {
        for j in 0..m.n {
            if off_diagonal_only && i == j {
                continue;
            }
            let r = m.at(i, j);
            let diff = r.mean() - oracle[(i, j)];
            let se = r.std_err();
            if se == 0.0 {
                if diff.abs() > 1e-12 {
                    out.push((i, j, f64::INFINITY));
                }
                continue;
            }
            if (diff / se).abs() > z_max {
                out.push((i, j, diff / se));
            }
        }
    }
    out
}

/// `(I - U)^-2` for the weighted adjacency of `walk`.
pub fn walk_oracle(walk: &Graph) -> DenseMatrix {
    let u = walk.to_dense().unwrap();
    let inv = DenseMatrix::identity(walk.n()).sub(&u).spd_inverse().unwrap();
    inv.matmul(&inv)
}

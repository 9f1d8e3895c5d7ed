//! Graph random features.
//!
//! `phi(i)` is built from `m` random walks out of node `i` on the walk graph
//! (weights `U`). Each walk carries a running load that starts at 1 and is
//! multiplied at every step by `weight / transition probability / (1 - p)`;
//! the load is deposited at every node the walk visits, including the start.
//! With that normalisation `E[phi(i) . phi(j)] = (I - U)^-2_ij` for `i != j`.

use std::fmt::Write as _;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{CouplingScheme, TrvStream};
use crate::dense::DenseMatrix;
use crate::error::{invalid, Error, Result};
use crate::graph::Graph;
use crate::rng::{next_unit, KeyedSource, Purpose, StreamKey};

/// Truncation rate above which a build reports a warning.
pub const DEFAULT_TRUNCATION_WARN_RATE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingStrategy {
    /// Next node uniform over neighbours.
    UniformNeighbor,
    /// Next node proportional to edge weight.
    WeightProportional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub m: usize,
    pub p: f64,
    pub scheme: CouplingScheme,
    pub strategy: SamplingStrategy,
    pub max_steps: usize,
    pub seed: u64,
    pub truncation_warn_rate: f64,
}

impl WalkConfig {
    pub fn new(m: usize, p: f64, scheme: CouplingScheme, seed: u64) -> Self {
        Self {
            m,
            p,
            scheme,
            strategy: SamplingStrategy::UniformNeighbor,
            max_steps: default_max_steps(p),
            seed,
            truncation_warn_rate: DEFAULT_TRUNCATION_WARN_RATE,
        }
    }

    pub fn with_strategy(mut self, strategy: SamplingStrategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn validate(&self, g: &Graph) -> Result<()> {
        if self.m == 0 {
            return Err(invalid("need at least one walk per node"));
        }
        self.scheme.validate(self.p)?;
        self.scheme.check_walkers(self.m)?;
        if self.max_steps == 0 {
            return Err(invalid("max_steps must be at least 1"));
        }
        if self.strategy == SamplingStrategy::WeightProportional && !g.has_positive_weights() {
            return Err(invalid("weight-proportional sampling needs positive edge weights"));
        }
        Ok(())
    }
}

/// Smallest step cap whose truncation probability `(1-p)^cap` is below `1e-12`.
pub fn default_max_steps(p: f64) -> usize {
    if !(p > 0.0 && p < 1.0) {
        return 1;
    }
    let steps = (-12.0 * std::f64::consts::LN_10 / (1.0 - p).ln()).ceil();
    steps.max(1.0) as usize
}

/// Load multiplier for one step `from -> to`: edge weight over the step's
/// marginal probability `(1-p) * P(from -> to)`.
pub fn prefix_load_multiplier(g: &Graph, from: usize, to: usize, p: f64, strategy: SamplingStrategy) -> Result<f64> {
    let w = g.weight(from, to).ok_or(Error::MissingEdge(from, to))?;
    Ok(step_multiplier(g, from, w, p, strategy))
}

#[inline]
fn step_multiplier(g: &Graph, from: usize, w: f64, p: f64, strategy: SamplingStrategy) -> f64 {
    match strategy {
        SamplingStrategy::UniformNeighbor => w * g.degree(from) as f64 / (1.0 - p),
        SamplingStrategy::WeightProportional => g.weighted_degree(from) / (1.0 - p),
    }
}

/// Picks the next node and returns it with the step's load multiplier.
#[inline]
fn choose_next(g: &Graph, node: usize, p: f64, strategy: SamplingStrategy, rng: &mut ChaCha8Rng) -> (usize, f64) {
    let nbrs = g.neighbors(node);
    let ws = g.neighbor_weights(node);
    let u = next_unit(rng);
    let k = match strategy {
        SamplingStrategy::UniformNeighbor => ((u * nbrs.len() as f64) as usize).min(nbrs.len() - 1),
        SamplingStrategy::WeightProportional => {
            let target = u * g.weighted_degree(node);
            let mut acc = 0.0;
            let mut pick = nbrs.len() - 1;
            for (k, &w) in ws.iter().enumerate() {
                acc += w;
                if target < acc {
                    pick = k;
                    break;
                }
            }
            pick
        }
    };
    (nbrs[k], step_multiplier(g, node, ws[k], p, strategy))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Walk {
    pub nodes: Vec<usize>,
    pub truncated: bool,
}

impl Walk {
    pub fn len(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() == 1
    }
}

/// Simulates one walk. `next_trv` supplies the walker's TRV for each step;
/// `directions` supplies the uniforms used to pick neighbours.
pub fn sample_walk(
    g: &Graph,
    start: usize,
    mut next_trv: impl FnMut() -> f64,
    p: f64,
    strategy: SamplingStrategy,
    directions: &mut ChaCha8Rng,
    max_steps: usize,
) -> Result<Walk> {
    if start >= g.n() {
        return Err(Error::NodeOutOfRange { index: start, n: g.n() });
    }
    let mut nodes = vec![start];
    let mut node = start;
    for _ in 0..max_steps {
        if next_trv() < p {
            return Ok(Walk { nodes, truncated: false });
        }
        node = choose_next(g, node, p, strategy, directions).0;
        nodes.push(node);
    }
    Ok(Walk { nodes, truncated: true })
}

/// Sparse GRF `phi(source)`: `(node, load)` pairs sorted by node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub source: usize,
    entries: Vec<(usize, f64)>,
}

impl FeatureVector {
    /// Entries are sorted and duplicate nodes summed.
    pub fn new(source: usize, mut entries: Vec<(usize, f64)>) -> Self {
        entries.sort_by_key(|&(x, _)| x);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (x, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += v,
                _ => merged.push((x, v)),
            }
        }
        Self { source, entries: merged }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn load(&self, x: usize) -> f64 {
        self.entries
            .binary_search_by_key(&x, |&(k, _)| k)
            .map(|k| self.entries[k].1)
            .unwrap_or(0.0)
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn dot(&self, other: &FeatureVector) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j, mut s) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    s += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub walks: u64,
    pub truncated: u64,
    pub steps: u64,
}

impl BuildStats {
    fn merge(self, o: BuildStats) -> BuildStats {
        BuildStats { walks: self.walks + o.walks, truncated: self.truncated + o.truncated, steps: self.steps + o.steps }
    }

    pub fn truncation_rate(&self) -> f64 {
        if self.walks == 0 {
            0.0
        } else {
            self.truncated as f64 / self.walks as f64
        }
    }
}

/// Builds `phi(i)` from ensemble 0 of the walks keyed by `config.seed`.
pub fn build_feature(g: &Graph, i: usize, config: &WalkConfig) -> Result<(FeatureVector, BuildStats)> {
    config.validate(g)?;
    if i >= g.n() {
        return Err(Error::NodeOutOfRange { index: i, n: g.n() });
    }
    Ok(build_row(g, i, config, &KeyedSource::new(config.seed), 0))
}

fn build_row(g: &Graph, i: usize, cfg: &WalkConfig, source: &KeyedSource, ensemble: u8) -> (FeatureVector, BuildStats) {
    let trvs = TrvStream::for_node(cfg.scheme, cfg.m, source, i, ensemble).expect("validated walker count");
    let gsize = cfg.scheme.group_size();
    let mut stats = BuildStats { walks: cfg.m as u64, ..Default::default() };

    let mut acc: Vec<(usize, f64)> = Vec::with_capacity(4 * cfg.m);
    acc.push((i, cfg.m as f64));

    let mut buf = vec![0.0; gsize];
    let mut state: Vec<(usize, f64, bool)> = vec![(i, 1.0, true); gsize];
    let mut dirs: Vec<Option<ChaCha8Rng>> = vec![None; gsize];

    for group in 0..cfg.m / gsize {
        let mut reader = trvs.group(group);
        state.iter_mut().for_each(|s| *s = (i, 1.0, true));
        dirs.iter_mut().for_each(|d| *d = None);
        let mut alive = gsize;
        for _ in 0..cfg.max_steps {
            if alive == 0 {
                break;
            }
            reader.next_step(&mut buf);
            for (j, st) in state.iter_mut().enumerate() {
                if !st.2 {
                    continue;
                }
                if buf[j] < cfg.p {
                    st.2 = false;
                    alive -= 1;
                    continue;
                }
                let rng = dirs[j].get_or_insert_with(|| {
                    source.stream(StreamKey {
                        node: i,
                        index: group * gsize + j,
                        ensemble,
                        purpose: Purpose::Direction,
                    })
                });
                let (next, mult) = choose_next(g, st.0, cfg.p, cfg.strategy, rng);
                st.0 = next;
                st.1 *= mult;
                acc.push((next, st.1));
                stats.steps += 1;
            }
        }
        stats.truncated += alive as u64;
    }

    let inv_m = 1.0 / cfg.m as f64;
    let mut fv = FeatureVector::new(i, acc);
    fv.entries.iter_mut().for_each(|e| e.1 *= inv_m);
    (fv, stats)
}

/// One feature vector per node, all built under one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: Vec<FeatureVector>,
    /// Two-ensemble estimates `phi_1(i) . phi_2(i)` replacing the biased
    /// same-ensemble diagonal, when requested.
    diagonal: Option<Vec<f64>>,
    pub stats: BuildStats,
    pub warning: Option<String>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: Vec<FeatureVector>) -> Self {
        Self { rows, diagonal: None, stats: BuildStats::default(), warning: None }
    }

    /// Rows of a dense matrix as feature vectors (zeros dropped).
    pub fn from_dense_rows(m: &DenseMatrix) -> Self {
        let rows = (0..m.n())
            .map(|i| FeatureVector::new(i, m.row(i).into_iter().enumerate().filter(|&(_, v)| v != 0.0).collect()))
            .collect();
        Self::from_rows(rows)
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[FeatureVector] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &FeatureVector {
        &self.rows[i]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(FeatureVector::nnz).sum()
    }

    pub fn has_unbiased_diagonal(&self) -> bool {
        self.diagonal.is_some()
    }

    pub fn unbiased_diagonal(&self) -> Option<&[f64]> {
        self.diagonal.as_deref()
    }

    /// `phi(i) . phi(j)`, using the two-ensemble diagonal when present.
    pub fn gram_entry(&self, i: usize, j: usize) -> f64 {
        match (&self.diagonal, i == j) {
            (Some(d), true) => d[i],
            _ => self.rows[i].dot(&self.rows[j]),
        }
    }

    fn column_index(&self) -> Vec<Vec<(usize, f64)>> {
        let mut cols = vec![Vec::new(); self.n()];
        for (i, r) in self.rows.iter().enumerate() {
            for &(x, v) in r.entries() {
                cols[x].push((i, v));
            }
        }
        cols
    }

    /// Dense Gram matrix `Phi Phi^T` (with the unbiased diagonal if present).
    pub fn gram(&self) -> DenseMatrix {
        let n = self.n();
        let cols = self.column_index();
        let mut out = DenseMatrix::zeros(n);
        for col in &cols {
            for &(i, a) in col {
                for &(j, b) in col {
                    if j >= i {
                        out[(i, j)] += a * b;
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                out[(i, j)] = out[(j, i)];
            }
        }
        if let Some(d) = &self.diagonal {
            for (i, &v) in d.iter().enumerate() {
                out[(i, i)] = v;
            }
        }
        out
    }

    /// Rows `i` of `Phi Phi^T` for each requested `i`, without forming the full matrix.
    pub fn gram_rows(&self, which: &[usize]) -> Vec<Vec<f64>> {
        let cols = self.column_index();
        which
            .iter()
            .map(|&i| {
                let mut row = vec![0.0; self.n()];
                for &(x, a) in self.rows[i].entries() {
                    for &(j, b) in &cols[x] {
                        row[j] += a * b;
                    }
                }
                if let Some(d) = &self.diagonal {
                    row[i] = d[i];
                }
                row
            })
            .collect()
    }

    /// `Phi (Phi^T v)` in `O(nnz)`.
    pub fn apply_gram(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n());
        let mut y = vec![0.0; self.n()];
        for (r, &vi) in self.rows.iter().zip(v) {
            if vi != 0.0 {
                for &(x, a) in r.entries() {
                    y[x] += a * vi;
                }
            }
        }
        let mut out: Vec<f64> = self.rows.iter().map(|r| r.entries().iter().map(|&(x, a)| a * y[x]).sum()).collect();
        if let Some(d) = &self.diagonal {
            for (i, r) in self.rows.iter().enumerate() {
                let same: f64 = r.entries().iter().map(|&(_, a)| a * a).sum();
                out[i] += (d[i] - same) * v[i];
            }
        }
        out
    }

    /// Columnar text form: header `row,node,load`, one line per nonzero load.
    pub fn to_columnar(&self) -> String {
        let mut out = String::from("row,node,load\n");
        for r in &self.rows {
            for &(x, v) in r.entries() {
                writeln!(out, "{},{},{:?}", r.source, x, v).unwrap();
            }
        }
        out
    }

    pub fn from_columnar(text: &str, n: usize) -> Result<Self> {
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (lineno, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let err = || Error::Parse { line: lineno + 1, msg: format!("bad feature line {line:?}") };
            let mut f = line.split(',');
            let row: usize = f.next().and_then(|s| s.trim().parse().ok()).ok_or_else(err)?;
            let node: usize = f.next().and_then(|s| s.trim().parse().ok()).ok_or_else(err)?;
            let load: f64 = f.next().and_then(|s| s.trim().parse().ok()).ok_or_else(err)?;
            if row >= n || node >= n {
                return Err(Error::NodeOutOfRange { index: row.max(node), n });
            }
            per_row[row].push((node, load));
        }
        Ok(Self::from_rows(per_row.into_iter().enumerate().map(|(i, e)| FeatureVector::new(i, e)).collect()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Serial,
}

/// Builds every row with `build_feature` semantics.
pub fn build_feature_matrix(g: &Graph, config: &WalkConfig) -> Result<FeatureMatrix> {
    build_feature_matrix_with(g, config, Execution::Parallel)
}

pub fn build_feature_matrix_with(g: &Graph, config: &WalkConfig, exec: Execution) -> Result<FeatureMatrix> {
    config.validate(g)?;
    let source = KeyedSource::new(config.seed);
    let (rows, stats) = build_rows(g, config, &source, 0, exec);
    let warning = truncation_warning(&stats, config);
    Ok(FeatureMatrix { rows, diagonal: None, stats, warning })
}

/// As [`build_feature_matrix`], plus a second independent ensemble per node
/// used only for unbiased diagonal estimates.
pub fn build_feature_matrix_two_ensemble(g: &Graph, config: &WalkConfig, exec: Execution) -> Result<FeatureMatrix> {
    config.validate(g)?;
    let source = KeyedSource::new(config.seed);
    let (rows, s1) = build_rows(g, config, &source, 0, exec);
    let (second, s2) = build_rows(g, config, &source, 1, exec);
    let diagonal = rows.iter().zip(&second).map(|(a, b)| a.dot(b)).collect();
    let stats = s1.merge(s2);
    let warning = truncation_warning(&stats, config);
    Ok(FeatureMatrix { rows, diagonal: Some(diagonal), stats, warning })
}

fn build_rows(g: &Graph, cfg: &WalkConfig, source: &KeyedSource, ensemble: u8, exec: Execution) -> (Vec<FeatureVector>, BuildStats) {
    let built: Vec<(FeatureVector, BuildStats)> = match exec {
        Execution::Parallel => (0..g.n()).into_par_iter().map(|i| build_row(g, i, cfg, source, ensemble)).collect(),
        Execution::Serial => (0..g.n()).map(|i| build_row(g, i, cfg, source, ensemble)).collect(),
    };
    let stats = built.iter().fold(BuildStats::default(), |a, (_, s)| a.merge(*s));
    (built.into_iter().map(|(r, _)| r).collect(), stats)
}

fn truncation_warning(stats: &BuildStats, cfg: &WalkConfig) -> Option<String> {
    let rate = stats.truncation_rate();
    (rate > cfg.truncation_warn_rate).then(|| {
        format!(
            "{} of {} walks hit the {}-step cap (rate {rate:.3e}); estimates are biased low",
            stats.truncated, stats.walks, cfg.max_steps
        )
    })
}

/// Unbiased estimate of `(I - U)^-2_ii` from two independent ensembles out of `i`.
pub fn estimate_diagonal(g: &Graph, i: usize, config: &WalkConfig) -> Result<f64> {
    config.validate(g)?;
    if i >= g.n() {
        return Err(Error::NodeOutOfRange { index: i, n: g.n() });
    }
    let source = KeyedSource::new(config.seed);
    let (a, _) = build_row(g, i, config, &source, 0);
    let (b, _) = build_row(g, i, config, &source, 1);
    Ok(a.dot(&b))
}

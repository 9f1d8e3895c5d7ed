//! Undirected weighted graphs, generators, and the matrices derived from them.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::{DenseMatrix, DEFAULT_ORACLE_LIMIT};
use crate::error::{invalid, Error, Result};

/// Maximum number of Erdős–Rényi resamples before giving up on a graph with
/// no isolated nodes.
pub const ER_MAX_RETRIES: usize = 100;

/// Immutable undirected graph in compressed adjacency form.
///
/// Every edge is stored in both endpoint lists, each list sorted by neighbour
/// index. Self-loops and isolated nodes are rejected at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    weighted_degree: Vec<f64>,
}

impl Graph {
    /// Builds a graph on `n` nodes from undirected edges. Each unordered pair
    /// may be listed more than once (in either orientation) only with an
    /// identical weight.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("graph needs at least one node"));
        }
        let mut unique: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (u, v, w) in edges {
            for idx in [u, v] {
                if idx >= n {
                    return Err(Error::NodeOutOfRange { index: idx, n });
                }
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            if !w.is_finite() || w == 0.0 {
                return Err(Error::InvalidWeight(w));
            }
            let key = (u.min(v), u.max(v));
            match unique.get(&key) {
                Some(&prev) if prev != w => {
                    return Err(Error::ConflictingEdge { u: key.0, v: key.1, w1: prev, w2: w })
                }
                Some(_) => {}
                None => {
                    unique.insert(key, w);
                }
            }
        }

        let mut lists: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (&(u, v), &w) in &unique {
            lists[u].push((v, w));
            lists[v].push((u, w));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::with_capacity(2 * unique.len());
        let mut weights = Vec::with_capacity(2 * unique.len());
        let mut weighted_degree = Vec::with_capacity(n);
        offsets.push(0);
        for (node, list) in lists.iter_mut().enumerate() {
            if list.is_empty() {
                return Err(Error::IsolatedNode(node));
            }
            list.sort_by_key(|&(j, _)| j);
            targets.extend(list.iter().map(|&(j, _)| j));
            weights.extend(list.iter().map(|&(_, w)| w));
            weighted_degree.push(list.iter().map(|&(_, w)| w).sum());
            offsets.push(targets.len());
        }
        Ok(Self { offsets, targets, weights, weighted_degree })
    }

    pub fn n(&self) -> usize {
        self.weighted_degree.len()
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn neighbor_weights(&self, i: usize) -> &[f64] {
        &self.weights[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn weighted_degree(&self, i: usize) -> f64 {
        self.weighted_degree[i]
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        let nbrs = self.neighbors(i);
        nbrs.binary_search(&j).ok().map(|k| self.neighbor_weights(i)[k])
    }

    pub fn has_positive_weights(&self) -> bool {
        self.weights.iter().all(|&w| w > 0.0)
    }

    /// Each undirected edge once, as `(u, v, w)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n()).flat_map(move |i| {
            self.neighbors(i)
                .iter()
                .zip(self.neighbor_weights(i))
                .filter(move |(&j, _)| i < j)
                .map(move |(&j, &w)| (i, j, w))
        })
    }

    /// Same topology with every edge weight replaced by `f(u, v, w)`.
    pub fn map_weights(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Result<Graph> {
        let edges: Vec<_> = self.edges().map(|(u, v, w)| (u, v, f(u, v, w))).collect();
        Graph::from_edges(self.n(), edges)
    }

    /// Weighted adjacency matrix `W`.
    pub fn to_dense(&self) -> Result<DenseMatrix> {
        check_oracle(self.n())?;
        let mut m = DenseMatrix::zeros(self.n());
        for (u, v, w) in self.edges() {
            m[(u, v)] = w;
            m[(v, u)] = w;
        }
        Ok(m)
    }

    /// Unweighted adjacency matrix `A`.
    pub fn unweighted_adjacency(&self) -> Result<DenseMatrix> {
        check_oracle(self.n())?;
        let mut m = DenseMatrix::zeros(self.n());
        for (u, v, _) in self.edges() {
            m[(u, v)] = 1.0;
            m[(v, u)] = 1.0;
        }
        Ok(m)
    }
}

fn check_oracle(n: usize) -> Result<()> {
    if n > DEFAULT_ORACLE_LIMIT {
        return Err(Error::OracleLimit { n, limit: DEFAULT_ORACLE_LIMIT });
    }
    Ok(())
}

/// Parses `u v [w]` lines (0-indexed, whitespace separated). Blank lines and
/// lines starting with `#` are skipped; the default weight is 1.
pub fn load_edge_list(text: &str) -> Result<Graph> {
    let mut edges = Vec::new();
    let mut max_index = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { line: lineno + 1, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(parse_err(format!("expected `u v [w]`, got {line:?}")));
        }
        let u: usize = fields[0].parse().map_err(|_| parse_err(format!("bad node index {:?}", fields[0])))?;
        let v: usize = fields[1].parse().map_err(|_| parse_err(format!("bad node index {:?}", fields[1])))?;
        let w: f64 = match fields.get(2) {
            Some(s) => s.parse().map_err(|_| parse_err(format!("bad weight {s:?}")))?,
            None => 1.0,
        };
        if u == v {
            return Err(Error::SelfLoop(u));
        }
        max_index = Some(max_index.unwrap_or(0).max(u).max(v));
        edges.push((u, v, w));
    }
    let n = max_index.map(|m| m + 1).ok_or_else(|| Error::Parse { line: 0, msg: "no edges".into() })?;
    Graph::from_edges(n, edges)
}

/// Erdős–Rényi `G(n, p_edge)` with unit weights, resampled until no node is isolated.
pub fn generate_er(n: usize, p_edge: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p_edge) {
        return Err(invalid(format!("edge probability {p_edge} outside [0, 1]")));
    }
    if n < 2 {
        return Err(invalid("Erdős–Rényi graph needs at least two nodes"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 0..ER_MAX_RETRIES {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.random::<f64>() < p_edge {
                    edges.push((u, v, 1.0));
                }
            }
        }
        match Graph::from_edges(n, edges) {
            Ok(g) => {
                if attempt > 0 {
                    log::debug!("ER({n}, {p_edge}) needed {attempt} resamples");
                }
                return Ok(g);
            }
            Err(Error::IsolatedNode(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::RetriesExhausted(ER_MAX_RETRIES))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    Path,
    /// `size` rungs, `2 * size` nodes.
    Ladder,
    /// `size` is the depth; `2^(size+1) - 1` nodes.
    BinaryTree,
    Complete,
}

pub fn generate_structured(kind: Structure, size: usize) -> Result<Graph> {
    if size == 0 {
        return Err(invalid("structured graph size must be at least 1"));
    }
    let (n, edges): (usize, Vec<(usize, usize, f64)>) = match kind {
        Structure::Path => {
            if size < 2 {
                return Err(invalid("a path needs at least two nodes"));
            }
            (size, (0..size - 1).map(|i| (i, i + 1, 1.0)).collect())
        }
        Structure::Ladder => {
            let mut e = Vec::new();
            for r in 0..size {
                e.push((2 * r, 2 * r + 1, 1.0));
                if r + 1 < size {
                    e.push((2 * r, 2 * r + 2, 1.0));
                    e.push((2 * r + 1, 2 * r + 3, 1.0));
                }
            }
            (2 * size, e)
        }
        Structure::BinaryTree => {
            let n = (1usize << (size + 1)) - 1;
            (n, (1..n).map(|c| ((c - 1) / 2, c, 1.0)).collect())
        }
        Structure::Complete => {
            if size < 2 {
                return Err(invalid("a complete graph needs at least two nodes"));
            }
            let mut e = Vec::new();
            for u in 0..size {
                for v in (u + 1)..size {
                    e.push((u, v, 1.0));
                }
            }
            (size, e)
        }
    };
    Graph::from_edges(n, edges)
}

/// Symmetrically normalised Laplacian: unit diagonal, `-W_ij / sqrt(deg_i deg_j)` off it.
pub fn normalized_laplacian(g: &Graph) -> Result<DenseMatrix> {
    check_degrees(g)?;
    check_oracle(g.n())?;
    let mut m = DenseMatrix::identity(g.n());
    for (u, v, w) in g.edges() {
        let x = -w / (g.weighted_degree(u) * g.weighted_degree(v)).sqrt();
        m[(u, v)] = x;
        m[(v, u)] = x;
    }
    Ok(m)
}

fn check_degrees(g: &Graph) -> Result<()> {
    for i in 0..g.n() {
        let d = g.weighted_degree(i);
        if !(d > 0.0) {
            return Err(Error::ZeroDegree(i));
        }
    }
    Ok(())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(invalid(format!("regulariser sigma = {sigma} must lie in (0, 1)")));
    }
    Ok(())
}

/// The graph walked by GRFs: same topology as `g`, with weights
/// `sigma^2 / (1 + sigma^2) * W_ij / sqrt(deg_i deg_j)`.
pub fn grf_walk_graph(g: &Graph, sigma: f64) -> Result<Graph> {
    check_sigma(sigma)?;
    check_degrees(g)?;
    let s2 = sigma * sigma;
    let pref = s2 / (1.0 + s2);
    g.map_weights(|u, v, w| pref * w / (g.weighted_degree(u) * g.weighted_degree(v)).sqrt())
}

/// Dense form of [`grf_walk_graph`], the matrix `U` with
/// `(I + sigma^2 L)^-2 = (1 + sigma^2)^-2 (I - U)^-2`.
pub fn grf_adjacency(g: &Graph, sigma: f64) -> Result<DenseMatrix> {
    grf_walk_graph(g, sigma)?.to_dense()
}

//! Triangle meshes: a minimal OBJ reader, a torus generator and vertex normals.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use qgrf_core::graph::Graph;

use crate::BenchError;

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

impl Mesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self, BenchError> {
        let n = vertices.len();
        for (k, f) in faces.iter().enumerate() {
            if f.iter().any(|&v| v >= n) {
                return Err(BenchError::Mesh(format!("face {k} references a vertex outside 0..{n}")));
            }
            let area2 = norm(cross(sub(vertices[f[1]], vertices[f[0]]), sub(vertices[f[2]], vertices[f[0]])));
            if area2 == 0.0 || !area2.is_finite() {
                return Err(BenchError::Mesh(format!("face {k} is degenerate")));
            }
        }
        Ok(Self { vertices, faces })
    }

    /// Unweighted graph of the mesh's edges.
    pub fn graph(&self) -> Result<Graph, BenchError> {
        let mut edges = BTreeSet::new();
        for f in &self.faces {
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                edges.insert((a.min(b), a.max(b)));
            }
        }
        Ok(Graph::from_edges(self.vertices.len(), edges.into_iter().map(|(a, b)| (a, b, 1.0)))?)
    }
}

/// Reads `v x y z` and `f i j k` lines (1-indexed; `i/t/n` tokens allowed).
/// Other directives are ignored.
pub fn load_obj(text: &str) -> Result<Mesh, BenchError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut tok = line.split_whitespace();
        let bad = |msg: &str| BenchError::Mesh(format!("line {}: {msg}", lineno + 1));
        match tok.next() {
            Some("v") => {
                let xyz: Vec<f64> = tok.take(3).map(str::parse).collect::<Result<_, _>>().map_err(|_| bad("bad vertex"))?;
                if xyz.len() != 3 {
                    return Err(bad("vertex needs three coordinates"));
                }
                vertices.push([xyz[0], xyz[1], xyz[2]]);
            }
            Some("f") => {
                let idx: Vec<usize> = tok
                    .map(|t| t.split('/').next().unwrap_or("").parse::<usize>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad("bad face index"))?;
                if idx.len() != 3 || idx.contains(&0) {
                    return Err(bad("faces must be triangles with 1-based indices"));
                }
                faces.push([idx[0] - 1, idx[1] - 1, idx[2] - 1]);
            }
            _ => {}
        }
    }
    Mesh::new(vertices, faces)
}

/// Torus with `major` segments around the ring and `minor` around the tube,
/// faces oriented outwards.
pub fn torus(major: usize, minor: usize, ring_radius: f64, tube_radius: f64) -> Result<Mesh, BenchError> {
    if major < 3 || minor < 3 {
        return Err(BenchError::Config("torus needs at least 3 segments each way".into()));
    }
    let mut vertices = Vec::with_capacity(major * minor);
    for a in 0..major {
        let u = TAU * a as f64 / major as f64;
        for b in 0..minor {
            let v = TAU * b as f64 / minor as f64;
            let r = ring_radius + tube_radius * v.cos();
            vertices.push([r * u.cos(), r * u.sin(), tube_radius * v.sin()]);
        }
    }
    let id = |a: usize, b: usize| (a % major) * minor + (b % minor);
    let mut faces = Vec::with_capacity(2 * major * minor);
    for a in 0..major {
        for b in 0..minor {
            let (p, q, r, s) = (id(a, b), id(a + 1, b), id(a + 1, b + 1), id(a, b + 1));
            faces.push([p, q, r]);
            faces.push([p, r, s]);
        }
    }
    Mesh::new(vertices, faces)
}

/// Exact outward normal of the torus surface at a vertex position.
pub fn torus_normal(pos: Vec3, ring_radius: f64) -> Vec3 {
    let rho = (pos[0] * pos[0] + pos[1] * pos[1]).sqrt();
    let centre = [ring_radius * pos[0] / rho, ring_radius * pos[1] / rho, 0.0];
    let d = sub(pos, centre);
    let l = norm(d);
    [d[0] / l, d[1] / l, d[2] / l]
}

/// Per-vertex mean of the unit normals of adjacent faces, normalised.
pub fn vertex_normals(mesh: &Mesh) -> Result<Vec<Vec3>, BenchError> {
    let mut acc = vec![[0.0; 3]; mesh.vertices.len()];
    let mut count = vec![0usize; mesh.vertices.len()];
    for f in &mesh.faces {
        let v = &mesh.vertices;
        let nrm = cross(sub(v[f[1]], v[f[0]]), sub(v[f[2]], v[f[0]]));
        let l = norm(nrm);
        for &k in f {
            for c in 0..3 {
                acc[k][c] += nrm[c] / l;
            }
            count[k] += 1;
        }
    }
    acc.into_iter()
        .zip(count)
        .enumerate()
        .map(|(k, (a, c))| {
            if c == 0 {
                return Err(BenchError::Mesh(format!("vertex {k} belongs to no face")));
            }
            let l = norm(a);
            if l < 1e-12 {
                return Err(BenchError::Mesh(format!("normals around vertex {k} cancel out")));
            }
            Ok([a[0] / l, a[1] / l, a[2] / l])
        })
        .collect()
}

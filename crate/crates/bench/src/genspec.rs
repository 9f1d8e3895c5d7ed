//! Graph sources: edge-list files and the generator mini-language.
//!
//! `er:<n>:<p>`, `tree:<depth>`, `ladder:<rungs>`, `path:<n>`, `complete:<n>`,
//! `torus:<major>:<minor>`.

use std::fmt;
use std::str::FromStr;

use qgrf_core::graph::{generate_er, generate_structured, Graph, Structure};
use qgrf_core::rng::derive_seed;

use crate::mesh::{torus, Mesh};
use crate::BenchError;

pub const TORUS_RING_RADIUS: f64 = 3.0;
pub const TORUS_TUBE_RADIUS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeneratorSpec {
    Er { n: usize, p: f64 },
    Tree { depth: usize },
    Ladder { rungs: usize },
    Path { n: usize },
    Complete { n: usize },
    Torus { major: usize, minor: usize },
}

impl FromStr for GeneratorSpec {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        let bad = || BenchError::Config(format!("bad generator spec {s:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        let int = |k: usize| parts.get(k).and_then(|t| t.parse::<usize>().ok()).ok_or_else(bad);
        let spec = match (parts[0], parts.len()) {
            ("er", 3) => GeneratorSpec::Er { n: int(1)?, p: parts[2].parse().map_err(|_| bad())? },
            ("tree", 2) => GeneratorSpec::Tree { depth: int(1)? },
            ("ladder", 2) => GeneratorSpec::Ladder { rungs: int(1)? },
            ("path", 2) => GeneratorSpec::Path { n: int(1)? },
            ("complete", 2) => GeneratorSpec::Complete { n: int(1)? },
            ("torus", 3) => GeneratorSpec::Torus { major: int(1)?, minor: int(2)? },
            _ => return Err(bad()),
        };
        Ok(spec)
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GeneratorSpec::Er { n, p } => write!(f, "er:{n}:{p}"),
            GeneratorSpec::Tree { depth } => write!(f, "tree:{depth}"),
            GeneratorSpec::Ladder { rungs } => write!(f, "ladder:{rungs}"),
            GeneratorSpec::Path { n } => write!(f, "path:{n}"),
            GeneratorSpec::Complete { n } => write!(f, "complete:{n}"),
            GeneratorSpec::Torus { major, minor } => write!(f, "torus:{major}:{minor}"),
        }
    }
}

impl GeneratorSpec {
    /// Random generators draw from a seed derived from `seed`.
    pub fn graph(&self, seed: u64) -> Result<Graph, BenchError> {
        Ok(match *self {
            GeneratorSpec::Er { n, p } => generate_er(n, p, derive_seed(seed, u64::MAX))?,
            GeneratorSpec::Tree { depth } => generate_structured(Structure::BinaryTree, depth)?,
            GeneratorSpec::Ladder { rungs } => generate_structured(Structure::Ladder, rungs)?,
            GeneratorSpec::Path { n } => generate_structured(Structure::Path, n)?,
            GeneratorSpec::Complete { n } => generate_structured(Structure::Complete, n)?,
            GeneratorSpec::Torus { .. } => self.mesh()?.graph()?,
        })
    }

    pub fn mesh(&self) -> Result<Mesh, BenchError> {
        match *self {
            GeneratorSpec::Torus { major, minor } => torus(major, minor, TORUS_RING_RADIUS, TORUS_TUBE_RADIUS),
            _ => Err(BenchError::Config(format!("{self} is not a mesh generator"))),
        }
    }
}

//! Coupled termination random variables (TRVs).
//!
//! A walker terminates at a step when its TRV falls below `p`. Walkers are
//! split into groups; every member of a group reads the same base uniform per
//! step, shifted by a fixed per-member offset modulo 1. Each member's TRV is
//! therefore still marginally `Uniform[0, 1)`, only the joint law changes.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{next_unit, KeyedSource, Purpose, StreamKey};

const WINDOW_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CouplingScheme {
    /// Independent TRVs for every walker.
    Iid,
    /// Walkers `(2k, 2k+1)` share a base draw `t`, the odd one using `mod1(t + 1/2)`.
    AntitheticPairs,
    /// Groups of `group_size` walkers; member `j` uses `mod1(t + j * delta)`.
    OffsetEnsemble { delta: f64, group_size: usize },
}

impl CouplingScheme {
    pub fn group_size(&self) -> usize {
        match *self {
            CouplingScheme::Iid => 1,
            CouplingScheme::AntitheticPairs => 2,
            CouplingScheme::OffsetEnsemble { group_size, .. } => group_size,
        }
    }

    pub fn is_coupled(&self) -> bool {
        !matches!(self, CouplingScheme::Iid)
    }

    /// Offset added to the group's base draw for each member.
    pub fn offsets(&self) -> Vec<f64> {
        match *self {
            CouplingScheme::Iid => vec![0.0],
            CouplingScheme::AntitheticPairs => vec![0.0, 0.5],
            CouplingScheme::OffsetEnsemble { delta, group_size } => {
                (0..group_size).map(|j| mod1(j as f64 * delta)).collect()
            }
        }
    }

    /// Checks the scheme's own parameters and their compatibility with `p`.
    pub fn validate(&self, p: f64) -> Result<()> {
        check_p(p, self)?;
        if let CouplingScheme::OffsetEnsemble { delta, group_size } = *self {
            let lower = p * (1.0 - p);
            if !(delta > 0.0 && delta < 1.0) {
                return Err(invalid(format!("offset delta = {delta} must lie in (0, 1)")));
            }
            if delta < lower - WINDOW_EPS {
                return Err(invalid(format!("offset delta = {delta} below p(1-p) = {lower}")));
            }
            if group_size < 2 {
                return Err(invalid("an offset ensemble needs at least two walkers per group"));
            }
            if group_size > max_group_for_delta(delta) {
                return Err(invalid(format!(
                    "group of {group_size} walkers does not fit on a lattice of spacing {delta}"
                )));
            }
        }
        Ok(())
    }

    /// Checks that `m` walkers split evenly into groups.
    pub fn check_walkers(&self, m: usize) -> Result<()> {
        let g = self.group_size();
        if m == 0 || !m.is_multiple_of(g) {
            return Err(invalid(format!("{m} walkers cannot be split into groups of {g}")));
        }
        Ok(())
    }
}

fn max_group_for_delta(delta: f64) -> usize {
    (1.0 / delta + 1e-9).floor() as usize
}

fn check_p(p: f64, scheme: &CouplingScheme) -> Result<()> {
    let ok = if scheme.is_coupled() { p > 0.0 && p <= 0.5 } else { p > 0.0 && p < 1.0 };
    if ok {
        Ok(())
    } else {
        Err(invalid(format!("termination probability {p} out of range for {scheme:?}")))
    }
}

#[inline]
pub fn mod1(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Whether a walker with TRV `trv` stops at this step.
pub fn terminates(trv: f64, p: f64, scheme: &CouplingScheme) -> Result<bool> {
    check_p(p, scheme)?;
    Ok(trv < p)
}

/// Deterministic generator of coupled TRVs for `m` walkers out of one node.
#[derive(Debug, Clone)]
pub struct TrvStream {
    scheme: CouplingScheme,
    offsets: Vec<f64>,
    m: usize,
    source: KeyedSource,
    node: usize,
    ensemble: u8,
}

impl TrvStream {
    pub fn new(scheme: CouplingScheme, m: usize, seed: u64) -> Result<Self> {
        Self::for_node(scheme, m, &KeyedSource::new(seed), 0, 0)
    }

    pub fn for_node(scheme: CouplingScheme, m: usize, source: &KeyedSource, node: usize, ensemble: u8) -> Result<Self> {
        scheme.check_walkers(m)?;
        Ok(Self { scheme, offsets: scheme.offsets(), m, source: source.clone(), node, ensemble })
    }

    pub fn scheme(&self) -> CouplingScheme {
        self.scheme
    }

    pub fn walkers(&self) -> usize {
        self.m
    }

    fn key(&self, group: usize) -> StreamKey {
        StreamKey { node: self.node, index: group, ensemble: self.ensemble, purpose: Purpose::Termination }
    }

    /// Base uniform of `group` at `step`.
    pub fn base_draw(&self, group: usize, step: usize) -> f64 {
        self.source.unit_at(self.key(group), step)
    }

    /// The TRVs of all `m` walkers at `step`.
    pub fn draw_step_trvs(&self, step: usize) -> Vec<f64> {
        let g = self.offsets.len();
        let mut out = Vec::with_capacity(self.m);
        for group in 0..self.m / g {
            let base = self.base_draw(group, step);
            out.extend(self.offsets.iter().map(|&o| mod1(base + o)));
        }
        out
    }

    /// Sequential reader for one group, yielding per-step member TRVs in the
    /// same order as [`TrvStream::draw_step_trvs`].
    pub fn group(&self, group: usize) -> GroupTrvs<'_> {
        GroupTrvs { rng: self.source.stream(self.key(group)), offsets: &self.offsets }
    }
}

pub struct GroupTrvs<'a> {
    rng: ChaCha8Rng,
    offsets: &'a [f64],
}

impl GroupTrvs<'_> {
    /// Advances one step, writing each member's TRV into `out`.
    #[inline]
    pub fn next_step(&mut self, out: &mut [f64]) {
        let base = next_unit(&mut self.rng);
        for (slot, &o) in out.iter_mut().zip(self.offsets) {
            *slot = if o == 0.0 { base } else { mod1(base + o) };
        }
    }

    pub fn size(&self) -> usize {
        self.offsets.len()
    }
}

/// Per-step conditional termination probabilities of walker 2 given walker 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JointTermination {
    pub s2_given_s1: f64,
    pub not_s2_given_s1: f64,
    pub s2_given_not_s1: f64,
    pub not_s2_given_not_s1: f64,
}

/// Conditional termination law of two walkers whose TRVs differ by `delta` mod 1.
///
/// Valid for `0 < p <= 1/2` and `p(1-p) <= delta <= 1-p`. For `delta >= p`
/// simultaneous termination is impossible.
pub fn joint_termination_probs(p: f64, delta: f64) -> Result<JointTermination> {
    if !(p > 0.0 && p <= 0.5) {
        return Err(invalid(format!("termination probability {p} outside (0, 1/2]")));
    }
    let lower = p * (1.0 - p);
    if delta < lower - WINDOW_EPS || delta > 1.0 - p + WINDOW_EPS {
        return Err(invalid(format!("offset {delta} outside [p(1-p), 1-p] = [{lower}, {}]", 1.0 - p)));
    }
    let q = 1.0 - p;
    Ok(if delta >= p {
        JointTermination {
            s2_given_s1: 0.0,
            not_s2_given_s1: 1.0,
            s2_given_not_s1: p / q,
            not_s2_given_not_s1: (1.0 - 2.0 * p) / q,
        }
    } else {
        JointTermination {
            s2_given_s1: (p - delta) / p,
            not_s2_given_s1: delta / p,
            s2_given_not_s1: delta / q,
            not_s2_given_not_s1: (q - delta) / q,
        }
    })
}

/// Largest number of walkers whose terminations can be made pairwise exclusive.
pub fn max_mutually_antithetic(p: f64) -> Result<usize> {
    if !(p > 0.0 && p <= 0.5) {
        return Err(Error::InvalidParameter(format!("termination probability {p} outside (0, 1/2]")));
    }
    Ok((1.0 / p + 1e-9).floor() as usize)
}

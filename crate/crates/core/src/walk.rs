//! Lazy random walk on the product graph Sigma^J with per-direction bad
//! edges: exact and Monte Carlo evaluation of P[no bad traversal] against
//! the lower bound |Sigma|^(-sum_t lambda_sigma(t)).

use crate::error::{Error, Result};
use crate::rng::SeedStream;
use std::collections::HashSet;

/// Walk problem instance. Vertices are base-|Sigma| codes of Sigma^J.
#[derive(Debug, Clone)]
pub struct WalkSpec {
    pub sigma: usize,
    pub j: usize,
    /// direction[t] in [0, j) for each step t.
    pub direction: Vec<usize>,
    /// Unordered bad edges as normalized (min code, max code) pairs.
    pub bad: HashSet<(u64, u64)>,
}

impl WalkSpec {
    pub fn new(sigma: usize, j: usize, direction: Vec<usize>) -> Result<Self> {
        if sigma < 2 || j == 0 {
            return Err(Error::InvalidArgument("need |Sigma| >= 2 and J >= 1".into()));
        }
        if direction.iter().any(|&d| d >= j) {
            return Err(Error::InvalidArgument("direction map out of range".into()));
        }
        Ok(WalkSpec { sigma, j, direction, bad: HashSet::new() })
    }

    pub fn horizon(&self) -> usize {
        self.direction.len()
    }

    pub fn vertex_count(&self) -> u64 {
        (self.sigma as u64).pow(self.j as u32)
    }

    pub fn coordinate(&self, code: u64, idx: usize) -> u64 {
        (code / (self.sigma as u64).pow(idx as u32)) % self.sigma as u64
    }

    pub fn with_coordinate(&self, code: u64, idx: usize, value: u64) -> u64 {
        let base = (self.sigma as u64).pow(idx as u32) as i64;
        let old = self.coordinate(code, idx);
        (code as i64 + (value as i64 - old as i64) * base) as u64
    }

    pub fn mark_bad(&mut self, a: u64, b: u64) {
        self.bad.insert((a.min(b), a.max(b)));
    }

    pub fn is_bad(&self, a: u64, b: u64) -> bool {
        self.bad.contains(&(a.min(b), a.max(b)))
    }

    /// All edges of the product graph as (vertex pair, direction).
    pub fn all_edges(sigma: usize, j: usize) -> Vec<((u64, u64), usize)> {
        let spec = WalkSpec::new(sigma, j, vec![]).unwrap();
        let mut edges = Vec::new();
        for code in 0..spec.vertex_count() {
            for d in 0..j {
                let cur = spec.coordinate(code, d);
                for v in (cur + 1)..sigma as u64 {
                    let other = spec.with_coordinate(code, d, v);
                    edges.push(((code, other), d));
                }
            }
        }
        edges
    }

    /// Mark every edge bad.
    pub fn mark_all_bad(&mut self) {
        for ((a, b), _) in WalkSpec::all_edges(self.sigma, self.j) {
            self.bad.insert((a, b));
        }
    }

    /// Exact fraction of direction-d edges that are bad.
    pub fn lambda(&self, d: usize) -> f64 {
        let per_direction =
            (self.sigma as u64).pow(self.j as u32 - 1) as f64
                * (self.sigma * (self.sigma - 1) / 2) as f64;
        let bad = self
            .bad
            .iter()
            .filter(|&&(a, b)| {
                // direction of an edge: the unique differing coordinate
                (0..self.j).find(|&idx| self.coordinate(a, idx) != self.coordinate(b, idx))
                    == Some(d)
            })
            .count();
        bad as f64 / per_direction
    }

    /// The lemma's lower bound |Sigma|^(-sum_t lambda_direction(t)).
    pub fn bound(&self) -> f64 {
        let exponent: f64 = self.direction.iter().map(|&d| self.lambda(d)).sum();
        (self.sigma as f64).powf(-exponent)
    }
}

pub const WALK_EXACT_BUDGET: u64 = 1 << 24;

#[derive(Debug, Clone, Copy)]
pub enum WalkMode {
    Exact { budget: u64 },
    MonteCarlo { samples: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy)]
pub struct WalkResult {
    pub probability: f64,
    pub bound: f64,
    pub std_error: f64,
}

/// P[the lazy walk never traverses a bad edge]: start uniform on Sigma^J,
/// step t resamples coordinate direction[t] uniformly (possibly onto
/// itself; steps that do not move never traverse a bad edge).
pub fn walk_no_bad_probability(spec: &WalkSpec, mode: WalkMode) -> Result<WalkResult> {
    let bound = spec.bound();
    match mode {
        WalkMode::Exact { budget } => {
            let states = spec
                .vertex_count()
                .checked_mul((spec.sigma as u64).checked_pow(spec.horizon() as u32).ok_or_else(
                    || Error::BudgetExceeded("walk horizon overflows enumeration".into()),
                )?)
                .ok_or_else(|| Error::BudgetExceeded("walk state space overflows".into()))?;
            if states > budget {
                return Err(Error::BudgetExceeded(format!(
                    "exact walk needs {states} trajectories, budget {budget}"
                )));
            }
            let draws_total = (spec.sigma as u64).pow(spec.horizon() as u32);
            let mut good = 0u64;
            for start in 0..spec.vertex_count() {
                for draw_code in 0..draws_total {
                    let mut cur = start;
                    let mut ok = true;
                    let mut d = draw_code;
                    for &dir in &spec.direction {
                        let value = d % spec.sigma as u64;
                        d /= spec.sigma as u64;
                        let next = spec.with_coordinate(cur, dir, value);
                        if next != cur && spec.is_bad(cur, next) {
                            ok = false;
                            break;
                        }
                        cur = next;
                    }
                    good += u64::from(ok);
                }
            }
            let probability = good as f64 / (spec.vertex_count() * draws_total) as f64;
            Ok(WalkResult { probability, bound, std_error: 0.0 })
        }
        WalkMode::MonteCarlo { samples, seed } => {
            let stream = SeedStream::new(seed).derive_str("walk");
            let mut rng = stream.rng();
            let mut good = 0u64;
            for _ in 0..samples {
                let mut cur = rng.below(spec.vertex_count());
                let mut ok = true;
                for &dir in &spec.direction {
                    let value = rng.below(spec.sigma as u64);
                    let next = spec.with_coordinate(cur, dir, value);
                    if next != cur && spec.is_bad(cur, next) {
                        ok = false;
                        break;
                    }
                    cur = next;
                }
                good += u64::from(ok);
            }
            let p = good as f64 / samples as f64;
            let se = (p * (1.0 - p) / samples as f64).sqrt();
            Ok(WalkResult { probability: p, bound, std_error: se })
        }
    }
}

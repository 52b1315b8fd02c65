//! Interpolation paths: T = k^2 m single-slot resampling steps cycling
//! through the lexicographic slot order, and the branched variant (k
//! branches of length km from a common base) with coupled edge-decoration
//! resampling.
//!
//! Paths store the base formula plus the resample log, never the T+1
//! formulas; checkpoints every km steps make materialization cheap.

use crate::error::{Error, Result};
use crate::formula::{sample_formula_stream, Formula, Literal};
use crate::graph::{build_factor_graph_stream, DecoratedFactorGraph, Edge};
use crate::rng::SeedStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResampleEntry {
    /// Lexicographic slot index in [0, km).
    pub slot: u32,
    pub literal: Literal,
    /// Fresh decoration word for the resampled edge.
    pub edge_word: u64,
}

#[derive(Debug, Clone)]
pub struct InterpolationPath {
    base: Formula,
    log: Vec<ResampleEntry>,
    /// checkpoints[i] = formula after i*km steps, i = 0..=k.
    checkpoints: Vec<Formula>,
}

/// Sample a length-k^2·m interpolation path.
pub fn make_path(n: usize, m: usize, k: usize, seed: u64) -> Result<InterpolationPath> {
    let stream = SeedStream::new(seed).derive_str("path");
    let base = sample_formula_stream(n, m, k, stream.derive_str("base"))?;
    let km = k * m;
    let t_max = k * km;
    let mut rng = stream.derive_str("resamples").rng();
    let mut log = Vec::with_capacity(t_max);
    for t in 1..=t_max {
        log.push(ResampleEntry {
            slot: ((t - 1) % km) as u32,
            literal: Literal::from_id(rng.below(2 * n as u64) as u32),
            edge_word: rng.next_u64(),
        });
    }
    let mut checkpoints = Vec::with_capacity(k + 1);
    checkpoints.push(base.clone());
    let mut cur = base.clone();
    for (t, entry) in log.iter().enumerate() {
        let (c, s) = cur.slot_position(entry.slot as usize);
        cur.set_literal(c, s, entry.literal);
        if (t + 1) % km == 0 {
            checkpoints.push(cur.clone());
        }
    }
    Ok(InterpolationPath { base, log, checkpoints })
}

impl InterpolationPath {
    pub fn t_max(&self) -> usize {
        self.log.len()
    }

    pub fn base(&self) -> &Formula {
        &self.base
    }

    pub fn log(&self) -> &[ResampleEntry] {
        &self.log
    }

    /// Formula after step t, replayed from the nearest checkpoint.
    pub fn materialize(&self, t: usize) -> Result<Formula> {
        if t > self.t_max() {
            return Err(Error::InvalidArgument(format!(
                "t = {t} beyond path length {}",
                self.t_max()
            )));
        }
        let km = self.base.k() * self.base.m();
        let cp = if km == 0 { 0 } else { t / km };
        let mut cur = self.checkpoints[cp].clone();
        for entry in &self.log[cp * km..t] {
            let (c, s) = cur.slot_position(entry.slot as usize);
            cur.set_literal(c, s, entry.literal);
        }
        Ok(cur)
    }

    /// Walk the whole path, invoking `visit(t, formula)` for t = 0..=T.
    pub fn walk<F: FnMut(usize, &Formula)>(&self, mut visit: F) {
        let mut cur = self.base.clone();
        visit(0, &cur);
        for (t, entry) in self.log.iter().enumerate() {
            let (c, s) = cur.slot_position(entry.slot as usize);
            cur.set_literal(c, s, entry.literal);
            visit(t + 1, &cur);
        }
    }
}

// ---------------------------------------------------------------------
// Branched interpolation
// ---------------------------------------------------------------------

/// k interpolation paths of length km originating at a common decorated
/// base. Resampling a literal also resamples the decoration word of its
/// edge; vertex decorations stay fixed.
#[derive(Debug, Clone)]
pub struct BranchedInterpolation {
    base: Formula,
    base_vertex_words: Vec<u64>,
    base_edge_words: Vec<u64>,
    branches: Vec<Vec<ResampleEntry>>,
}

pub fn make_branched(n: usize, m: usize, k: usize, seed: u64) -> Result<BranchedInterpolation> {
    let stream = SeedStream::new(seed).derive_str("branched");
    let base = sample_formula_stream(n, m, k, stream.derive_str("base"))?;
    let g = build_factor_graph_stream(&base, stream.derive_str("decorations"));
    let base_vertex_words = (0..g.n_vertices()).map(|v| g.vertex_word(v)).collect();
    // edge words indexed by lexicographic slot
    let mut base_edge_words = vec![0u64; m * k];
    for e in g.edges() {
        base_edge_words[e.clause as usize * k + e.slot as usize] = e.word;
    }
    let km = k * m;
    let branches = (0..k)
        .map(|b| {
            let mut rng = stream.derive_str("branch").derive(b as u64).rng();
            (0..km)
                .map(|t| ResampleEntry {
                    slot: t as u32,
                    literal: Literal::from_id(rng.below(2 * n as u64) as u32),
                    edge_word: rng.next_u64(),
                })
                .collect()
        })
        .collect();
    Ok(BranchedInterpolation { base, base_vertex_words, base_edge_words, branches })
}

impl BranchedInterpolation {
    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    pub fn branch_len(&self) -> usize {
        self.branches.first().map_or(0, Vec::len)
    }

    pub fn base(&self) -> &Formula {
        &self.base
    }

    /// Decorated factor graph of the base point.
    pub fn base_graph(&self) -> DecoratedFactorGraph {
        self.assemble(&self.base, &self.base_edge_words)
    }

    /// State of branch `b` after `t` resampling steps.
    pub fn materialize(&self, branch: usize, t: usize) -> Result<(Formula, DecoratedFactorGraph)> {
        if branch >= self.branches.len() {
            return Err(Error::InvalidArgument(format!("branch {branch} out of range")));
        }
        if t > self.branch_len() {
            return Err(Error::InvalidArgument(format!("t = {t} beyond branch length")));
        }
        let mut phi = self.base.clone();
        let mut words = self.base_edge_words.clone();
        for entry in &self.branches[branch][..t] {
            let (c, s) = phi.slot_position(entry.slot as usize);
            phi.set_literal(c, s, entry.literal);
            words[entry.slot as usize] = entry.edge_word;
        }
        let g = self.assemble(&phi, &words);
        Ok((phi, g))
    }

    /// Step through branch `b`, invoking `visit(t, formula, graph)` at
    /// every t = 0..=km.
    pub fn walk_branch<F: FnMut(usize, &Formula, &DecoratedFactorGraph)>(
        &self,
        branch: usize,
        stride: usize,
        mut visit: F,
    ) -> Result<()> {
        if branch >= self.branches.len() {
            return Err(Error::InvalidArgument(format!("branch {branch} out of range")));
        }
        let stride = stride.max(1);
        let mut phi = self.base.clone();
        let mut words = self.base_edge_words.clone();
        let g = self.assemble(&phi, &words);
        visit(0, &phi, &g);
        for (t, entry) in self.branches[branch].iter().enumerate() {
            let (c, s) = phi.slot_position(entry.slot as usize);
            phi.set_literal(c, s, entry.literal);
            words[entry.slot as usize] = entry.edge_word;
            if (t + 1) % stride == 0 || t + 1 == self.branch_len() {
                let g = self.assemble(&phi, &words);
                visit(t + 1, &phi, &g);
            }
        }
        Ok(())
    }

    fn assemble(&self, phi: &Formula, edge_words: &[u64]) -> DecoratedFactorGraph {
        let (n, m, k) = (phi.n(), phi.m(), phi.k());
        let mut edges = Vec::with_capacity(m * k);
        for c in 0..m {
            for s in 0..k {
                let lit = phi.literal(c, s);
                edges.push(Edge {
                    var: lit.var,
                    clause: c as u32,
                    slot: s as u16,
                    positive: lit.positive,
                    word: edge_words[c * k + s],
                });
            }
        }
        DecoratedFactorGraph::from_parts(n, m, edges, self.base_vertex_words.clone()).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn materialize_zero_is_base() {
        let path = make_path(6, 5, 3, 1).unwrap();
        assert_eq!(&path.materialize(0).unwrap(), path.base());
        assert_eq!(path.t_max(), 3 * 3 * 5);
    }

    #[test]
    fn consecutive_formulas_differ_in_at_most_one_slot() {
        let path = make_path(5, 4, 3, 2).unwrap();
        let mut prev = path.base().clone();
        for t in 1..=path.t_max() {
            let cur = path.materialize(t).unwrap();
            let diff = prev
                .literals()
                .iter()
                .zip(cur.literals())
                .filter(|(a, b)| a != b)
                .count();
            assert!(diff <= 1, "step {t} changed {diff} slots");
            prev = cur;
        }
    }

    #[test]
    fn materialize_agrees_across_checkpoint_boundaries() {
        let path = make_path(4, 6, 3, 3).unwrap();
        // replay from scratch using walk and compare at every km boundary
        let km = 18;
        let mut collected = Vec::new();
        path.walk(|t, phi| {
            if t % km == 0 || t == path.t_max() {
                collected.push((t, phi.clone()));
            }
        });
        for (t, phi) in collected {
            assert_eq!(path.materialize(t).unwrap(), phi, "t = {t}");
        }
    }

    #[test]
    fn materialize_rejects_beyond_t_max() {
        let path = make_path(3, 2, 2, 4).unwrap();
        assert!(path.materialize(path.t_max() + 1).is_err());
    }

    #[test]
    fn slot_decorrelates_after_km_steps() {
        // every slot has been resampled once by t = km, so the slot values
        // of the base and of formula km are independent; check collision
        // frequency of literal values over many paths
        let n = 4;
        let (m, k) = (3, 2);
        let paths = 4000u64;
        let mut collisions = 0u64;
        let mut slots_total = 0u64;
        for seed in 0..paths {
            let path = make_path(n, m, k, seed).unwrap();
            let end = path.materialize(k * m).unwrap();
            for c in 0..m {
                for s in 0..k {
                    if path.base().literal(c, s) == end.literal(c, s) {
                        collisions += 1;
                    }
                    slots_total += 1;
                }
            }
        }
        let rate = collisions as f64 / slots_total as f64;
        let expect = 1.0 / (2.0 * n as f64);
        let sigma = (expect * (1.0 - expect) / slots_total as f64).sqrt();
        assert!((rate - expect).abs() < 4.0 * sigma, "rate {rate} expect {expect}");
    }

    #[test]
    fn branch_zero_steps_is_base_for_all_branches() {
        let b = make_branched(5, 4, 3, 7).unwrap();
        for br in 0..b.n_branches() {
            let (phi, _) = b.materialize(br, 0).unwrap();
            assert_eq!(&phi, b.base());
        }
    }

    #[test]
    fn branch_ends_are_pairwise_decorrelated() {
        let n = 4;
        let (m, k) = (3, 2);
        let trials = 3000u64;
        let mut collisions = 0u64;
        let mut total = 0u64;
        for seed in 0..trials {
            let b = make_branched(n, m, k, seed).unwrap();
            let (e0, _) = b.materialize(0, k * m).unwrap();
            let (e1, _) = b.materialize(1, k * m).unwrap();
            for c in 0..m {
                for s in 0..k {
                    if e0.literal(c, s) == e1.literal(c, s) {
                        collisions += 1;
                    }
                    total += 1;
                }
            }
        }
        let rate = collisions as f64 / total as f64;
        let expect = 1.0 / (2.0 * n as f64);
        let sigma = (expect * (1.0 - expect) / total as f64).sqrt();
        assert!((rate - expect).abs() < 4.0 * sigma, "rate {rate} expect {expect}");
    }

    #[test]
    fn resampled_edges_get_fresh_words() {
        let b = make_branched(5, 4, 3, 9).unwrap();
        let base_g = b.base_graph();
        let (_, g1) = b.materialize(0, b.branch_len()).unwrap();
        // all km slots resampled: all edge words replaced
        let before: Vec<u64> = base_g.edges().iter().map(|e| e.word).collect();
        let after: Vec<u64> = g1.edges().iter().map(|e| e.word).collect();
        assert!(before.iter().zip(&after).all(|(a, b)| a != b));
    }
}

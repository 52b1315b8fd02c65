//! Decorated signed bipartite factor graphs.
//!
//! Variable vertices occupy ids `0..n`, clause vertices `n..n+m`. Each
//! vertex and each edge carries a 64-bit uniform decoration word; rules
//! that need richer randomness derive it from the word by hashing, so a
//! single word acts as a universal seed.

use crate::error::{Error, Result};
use crate::formula::Formula;
use crate::rng::{mix64, SeedStream};

pub type VertexId = usize;

/// One literal occurrence: a (variable, clause) edge with its slot in the
/// clause, its polarity, and its decoration word. Parallel edges from
/// repeated variables stay distinct via their slots and words.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub var: u32,
    pub clause: u32,
    pub slot: u16,
    pub positive: bool,
    pub word: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecoratedFactorGraph {
    n: usize,
    m: usize,
    edges: Vec<Edge>,
    var_adj: Vec<Vec<u32>>,
    clause_adj: Vec<Vec<u32>>,
    vertex_words: Vec<u64>,
}

impl DecoratedFactorGraph {
    pub fn from_parts(n: usize, m: usize, edges: Vec<Edge>, vertex_words: Vec<u64>) -> Result<Self> {
        if vertex_words.len() != n + m {
            return Err(Error::InvalidDimensions("vertex word count != n + m".into()));
        }
        let mut var_adj = vec![Vec::new(); n];
        let mut clause_adj = vec![Vec::new(); m];
        for (i, e) in edges.iter().enumerate() {
            if e.var as usize >= n || e.clause as usize >= m {
                return Err(Error::InvalidDimensions("edge endpoint out of range".into()));
            }
            var_adj[e.var as usize].push(i as u32);
            clause_adj[e.clause as usize].push(i as u32);
        }
        Ok(DecoratedFactorGraph { n, m, edges, var_adj, clause_adj, vertex_words })
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn n_clauses(&self) -> usize {
        self.m
    }

    pub fn n_vertices(&self) -> usize {
        self.n + self.m
    }

    pub fn is_var(&self, v: VertexId) -> bool {
        v < self.n
    }

    pub fn clause_vertex(&self, clause: usize) -> VertexId {
        self.n + clause
    }

    /// Clause index of a clause vertex.
    pub fn clause_of(&self, v: VertexId) -> usize {
        debug_assert!(!self.is_var(v));
        v - self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, idx: u32) -> &Edge {
        &self.edges[idx as usize]
    }

    pub fn vertex_word(&self, v: VertexId) -> u64 {
        self.vertex_words[v]
    }

    pub fn incident(&self, v: VertexId) -> &[u32] {
        if v < self.n {
            &self.var_adj[v]
        } else {
            &self.clause_adj[v - self.n]
        }
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.incident(v).len()
    }

    /// Other endpoint of `edge_idx` as seen from `v`.
    pub fn other_endpoint(&self, edge_idx: u32, v: VertexId) -> VertexId {
        let e = self.edge(edge_idx);
        if self.is_var(v) {
            self.clause_vertex(e.clause as usize)
        } else {
            e.var as usize
        }
    }

    /// Processing priority derived from the vertex decoration word. Kept at
    /// full 64-bit width so that ties are a.s. impossible.
    pub fn psi(&self, v: VertexId) -> u64 {
        derive_psi(self.vertex_word(v))
    }

    /// Uniform coin in [0,1) derived from the vertex decoration word,
    /// independent of `psi`.
    pub fn vertex_coin(&self, v: VertexId) -> f64 {
        derive_coin(self.vertex_word(v))
    }

    /// Line-oriented text dump ("V id word" / "C id word" / "E var clause
    /// slot pol word") for golden tests.
    pub fn dump(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        for v in 0..self.n {
            writeln!(out, "V {v} {:016x}", self.vertex_words[v]).unwrap();
        }
        for c in 0..self.m {
            writeln!(out, "C {c} {:016x}", self.vertex_words[self.n + c]).unwrap();
        }
        for e in &self.edges {
            writeln!(
                out,
                "E {} {} {} {} {:016x}",
                e.var,
                e.clause,
                e.slot,
                if e.positive { "T" } else { "F" },
                e.word
            )
            .unwrap();
        }
        out
    }
}

/// The psi / coin / phi-seed channels are independent 64-bit streams mixed
/// out of the single decoration word.
pub fn derive_psi(word: u64) -> u64 {
    mix64(word ^ 0x7073_695f_7461_675f) // "psi_tag_"
}

pub fn derive_coin(word: u64) -> f64 {
    (mix64(word ^ 0x636f_696e_5f74_6167) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn derive_phi_seed(word: u64) -> u64 {
    mix64(word ^ 0x7068_695f_7461_675f)
}

/// Build the decorated factor graph of a formula: one edge per literal
/// occurrence, polarity mirroring the literal sign, decorations drawn
/// i.i.d. from the seeded stream.
pub fn build_factor_graph(phi: &Formula, seed: u64) -> DecoratedFactorGraph {
    build_factor_graph_stream(phi, SeedStream::new(seed).derive_str("decorations"))
}

pub fn build_factor_graph_stream(phi: &Formula, stream: SeedStream) -> DecoratedFactorGraph {
    let (n, m, k) = (phi.n(), phi.m(), phi.k());
    let mut vrng = stream.derive_str("phi_v").rng();
    let vertex_words: Vec<u64> = (0..n + m).map(|_| vrng.next_u64()).collect();
    let mut erng = stream.derive_str("phi_e").rng();
    let mut edges = Vec::with_capacity(m * k);
    for c in 0..m {
        for s in 0..k {
            let lit = phi.literal(c, s);
            edges.push(Edge {
                var: lit.var,
                clause: c as u32,
                slot: s as u16,
                positive: lit.positive,
                word: erng.next_u64(),
            });
        }
    }
    DecoratedFactorGraph::from_parts(n, m, edges, vertex_words).expect("formula invariants")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{sample_formula, Formula, Literal};

    #[test]
    fn polarity_mirrors_literals() {
        // single clause (x_1 OR NOT x_2)
        let phi = Formula::from_clauses(
            2,
            2,
            &[vec![Literal::new(0, true), Literal::new(1, false)]],
        )
        .unwrap();
        let g = build_factor_graph(&phi, 5);
        assert_eq!(g.n_vars(), 2);
        assert_eq!(g.n_clauses(), 1);
        let mut pairs: Vec<(u32, bool)> =
            g.edges().iter().map(|e| (e.var, e.positive)).collect();
        pairs.sort();
        assert_eq!(pairs, vec![(0, true), (1, false)]);
    }

    #[test]
    fn clause_degrees_are_k() {
        let phi = sample_formula(30, 40, 5, 7).unwrap();
        let g = build_factor_graph(&phi, 7);
        for c in 0..40 {
            assert_eq!(g.degree(g.clause_vertex(c)), 5);
        }
        let total: usize = (0..30).map(|v| g.degree(v)).sum();
        assert_eq!(total, 5 * 40);
    }

    #[test]
    fn deterministic_given_seed() {
        let phi = sample_formula(10, 12, 3, 3).unwrap();
        let a = build_factor_graph(&phi, 11);
        let b = build_factor_graph(&phi, 11);
        assert_eq!(a.dump(), b.dump());
        let c = build_factor_graph(&phi, 12);
        assert_ne!(a.dump(), c.dump());
    }

    #[test]
    fn variable_degree_distribution_matches_binomial() {
        // At n large the degree of a fixed variable is Binomial(km, 1/n);
        // check mean and a couple of pmf values by Monte Carlo.
        let n = 400;
        let m = 800;
        let k = 3;
        let trials = 400;
        let mut hist = vec![0u64; 40];
        for seed in 0..trials {
            let phi = sample_formula(n, m, k, seed).unwrap();
            let g = build_factor_graph(&phi, seed);
            let d = g.degree(0);
            if d < hist.len() {
                hist[d] += 1;
            }
        }
        let p = 1.0 / n as f64;
        let mean_expected = (k * m) as f64 * p;
        let mean_observed: f64 =
            hist.iter().enumerate().map(|(d, &c)| d as f64 * c as f64).sum::<f64>() / trials as f64;
        // 4 sigma on the sample mean of a Binomial(2400, 1/400)
        let sigma = (mean_expected * (1.0 - p) / trials as f64).sqrt();
        assert!(
            (mean_observed - mean_expected).abs() < 4.0 * sigma,
            "observed {mean_observed}, expected {mean_expected}"
        );
    }
}

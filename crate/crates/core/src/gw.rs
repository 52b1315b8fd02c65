//! Decorated alternating Galton-Watson trees: the local limit of the
//! random k-SAT factor graph, plus empirical neighborhood-tail statistics
//! for comparing the two ensembles.

use crate::error::{Error, Result};
use crate::formula::sample_formula_stream;
use crate::graph::{build_factor_graph_stream, DecoratedFactorGraph, Edge};
use crate::nbhd::{neighborhood, RootedNeighborhood};
use crate::rng::SeedStream;
use rand_distr::{Distribution, Poisson};

/// Layered rooted tree: even layers are variable-side vertices, odd layers
/// clause-side. Odd-layer vertices spawn exactly `d2` children; even-layer
/// counts are the recorded Poisson(d1) draws. Truncated at an explicit,
/// recorded depth.
#[derive(Debug, Clone)]
pub struct GWTree {
    pub depth: usize,
    /// parent[v] = None for the root.
    pub parent: Vec<Option<usize>>,
    pub layer: Vec<usize>,
    pub vertex_words: Vec<u64>,
    /// (child vertex, polarity, edge word); the edge to the parent.
    pub edge_pol: Vec<bool>,
    pub edge_words: Vec<u64>,
}

impl GWTree {
    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.depth + 1];
        for &l in &self.layer {
            sizes[l] += 1;
        }
        sizes
    }

    /// View the tree as a decorated factor graph (even layers become
    /// variable vertices, odd layers clause vertices) so that local rules
    /// and neighborhood machinery apply unchanged.
    pub fn to_factor_graph(&self) -> (DecoratedFactorGraph, usize) {
        let mut var_ids = Vec::new();
        let mut clause_ids = Vec::new();
        let mut local = vec![0usize; self.len()];
        for v in 0..self.len() {
            if self.layer[v] % 2 == 0 {
                local[v] = var_ids.len();
                var_ids.push(v);
            } else {
                local[v] = clause_ids.len();
                clause_ids.push(v);
            }
        }
        let mut words = Vec::with_capacity(self.len());
        for &v in var_ids.iter().chain(clause_ids.iter()) {
            words.push(self.vertex_words[v]);
        }
        let mut edges = Vec::new();
        for v in 1..self.len() {
            let p = self.parent[v].unwrap();
            let (var, clause) = if self.layer[v] % 2 == 0 {
                (local[v], local[p])
            } else {
                (local[p], local[v])
            };
            edges.push(Edge {
                var: var as u32,
                clause: clause as u32,
                slot: 0,
                positive: self.edge_pol[v],
                word: self.edge_words[v],
            });
        }
        let g = DecoratedFactorGraph::from_parts(var_ids.len(), clause_ids.len(), edges, words)
            .unwrap();
        // the root is vertex 0, in layer 0, hence variable-side local id 0
        (g, 0)
    }
}

/// Sample an alternating Poisson(d1) / deterministic-d2 tree to `depth`.
pub fn sample_dgw(d1: f64, d2: usize, depth: usize, seed: u64) -> Result<GWTree> {
    sample_dgw_stream(d1, d2, depth, SeedStream::new(seed).derive_str("dgw"))
}

pub fn sample_dgw_stream(d1: f64, d2: usize, depth: usize, stream: SeedStream) -> Result<GWTree> {
    if d1 <= 0.0 {
        return Err(Error::InvalidArgument("d1 must be positive".into()));
    }
    if d2 < 1 {
        return Err(Error::InvalidArgument("d2 must be >= 1".into()));
    }
    let mut rng = stream.rng();
    let poisson = Poisson::new(d1).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut tree = GWTree {
        depth,
        parent: vec![None],
        layer: vec![0],
        vertex_words: vec![rng.next_u64()],
        edge_pol: vec![false],
        edge_words: vec![0],
    };
    let mut frontier = vec![0usize];
    for layer in 0..depth {
        let mut next = Vec::new();
        for &v in &frontier {
            let children = if layer % 2 == 0 {
                poisson.sample(&mut rng).round() as usize
            } else {
                d2
            };
            for _ in 0..children {
                let id = tree.parent.len();
                tree.parent.push(Some(v));
                tree.layer.push(layer + 1);
                tree.vertex_words.push(rng.next_u64());
                tree.edge_pol.push(rng.bool());
                tree.edge_words.push(rng.next_u64());
                next.push(id);
            }
        }
        frontier = next;
    }
    Ok(tree)
}

/// Which ensemble a tail or comparison statistic is drawn from.
#[derive(Debug, Clone, Copy)]
pub enum Ensemble {
    Dfg { n: usize, m: usize, k: usize },
    Dgw { d1: f64, d2: usize },
}

impl Ensemble {
    /// (d1, d2) of the matching Galton-Watson limit.
    pub fn limit_degrees(&self) -> (f64, usize) {
        match *self {
            Ensemble::Dfg { n, m, k } => (k as f64 * m as f64 / n as f64, k - 1),
            Ensemble::Dgw { d1, d2 } => (d1, d2),
        }
    }

    /// Sample a rooted radius-r neighborhood of a (variable-side) root.
    pub fn sample_neighborhood(&self, r: usize, stream: SeedStream) -> Result<RootedNeighborhood> {
        match *self {
            Ensemble::Dfg { n, m, k } => {
                let phi = sample_formula_stream(n, m, k, stream.derive_str("formula"))?;
                let g = build_factor_graph_stream(&phi, stream.derive_str("decorations"));
                let root = stream.derive_str("root").rng().usize_below(n);
                Ok(neighborhood(&g, root, r))
            }
            Ensemble::Dgw { d1, d2 } => {
                let tree = sample_dgw_stream(d1, d2, r, stream.derive_str("tree"))?;
                let (g, root) = tree.to_factor_graph();
                Ok(neighborhood(&g, root, r))
            }
        }
    }
}

/// Empirical tail table: P[|N_2r(root)| > lambda * (d1 d2)^r] per lambda.
#[derive(Debug, Clone)]
pub struct TailStats {
    pub r: usize,
    pub samples: u64,
    pub lambdas: Vec<f64>,
    pub exceed_probability: Vec<f64>,
}

pub fn neighborhood_tail_stats(
    ensemble: Ensemble,
    r: usize,
    lambdas: &[f64],
    samples: u64,
    seed: u64,
) -> Result<TailStats> {
    let (d1, d2) = ensemble.limit_degrees();
    let scale = (d1 * d2 as f64).powi(r as i32);
    let stream = SeedStream::new(seed).derive_str("tail");
    let mut exceed = vec![0u64; lambdas.len()];
    for s in 0..samples {
        let nb = ensemble.sample_neighborhood(2 * r, stream.derive(s))?;
        let size = nb.size() as f64;
        for (i, &lambda) in lambdas.iter().enumerate() {
            if size > lambda * scale {
                exceed[i] += 1;
            }
        }
    }
    Ok(TailStats {
        r,
        samples,
        lambdas: lambdas.to_vec(),
        exceed_probability: exceed.iter().map(|&c| c as f64 / samples as f64).collect(),
    })
}

/// Monte Carlo means of a 2r-local statistic under both ensembles, and
/// their discrepancy. The statistic must be a function of the canonical
/// neighborhood only.
pub fn local_statistic_discrepancy<F>(
    dfg: Ensemble,
    dgw: Ensemble,
    r: usize,
    stat: F,
    samples: u64,
    seed: u64,
) -> Result<(f64, f64, f64)>
where
    F: Fn(&RootedNeighborhood) -> f64 + Sync,
{
    use rayon::prelude::*;
    let stream = SeedStream::new(seed).derive_str("discrepancy");
    let eval = |ens: Ensemble, tag: u64| -> Result<f64> {
        let sub = stream.derive(tag);
        let total: f64 = (0..samples)
            .into_par_iter()
            .map(|s| {
                let nb = ens.sample_neighborhood(2 * r, sub.derive(s)).expect("sample");
                stat(&nb)
            })
            .sum();
        Ok(total / samples as f64)
    };
    let a = eval(dfg, 0)?;
    let b = eval(dgw, 1)?;
    Ok((a, b, (a - b).abs()))
}

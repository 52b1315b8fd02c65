//! Degree-D inclusion-exclusion simulation of local rules, and the
//! D-truncation it is measured against.
//!
//! The simulated polynomial is sum over tree-shaped edge sets S (at most D
//! edges, every vertex within tree-distance r of the root) of an integer
//! coefficient h(root, G(S)) times the product of the one-hot indicators
//! of S. Coefficients satisfy h(S) = g(S) - sum over proper rooted
//! subtrees S' of h(S'), computed in exact integer arithmetic and memoized
//! by the canonical form of (root, G(S)).

use crate::assignment::{strict_round_exact, Value};
use crate::error::{Error, Result};
use crate::formula::sample_formula_stream;
use crate::graph::{build_factor_graph_stream, DecoratedFactorGraph, Edge, VertexId};
use crate::nbhd::{canonical_certificate, neighborhood, RootedNeighborhood};
use crate::rng::SeedStream;
use crate::rules::BoolLocalRule;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

// ---------------------------------------------------------------------
// D-truncation
// ---------------------------------------------------------------------

/// g restricted to tree-shaped balls of at most `d` vertices; err
/// elsewhere.
pub fn d_truncate_value(
    rule: &dyn BoolLocalRule,
    nbhd: &RootedNeighborhood,
    d: usize,
) -> Result<Value> {
    if d == 0 {
        return Err(Error::InvalidArgument("D must be >= 1".into()));
    }
    if nbhd.is_tree() && nbhd.size() <= d {
        Ok(Value::from_bool(rule.evaluate(nbhd)?))
    } else {
        Ok(Value::Err)
    }
}

/// Run the D-truncation of a rule at every variable vertex.
pub fn run_d_truncation(
    rule: &dyn BoolLocalRule,
    g: &DecoratedFactorGraph,
    d: usize,
) -> Result<Vec<Value>> {
    (0..g.n_vars())
        .map(|v| {
            let nb = neighborhood(g, v, rule.radius());
            d_truncate_value(rule, &nb, d)
        })
        .collect()
}

// ---------------------------------------------------------------------
// Degree-D simulation
// ---------------------------------------------------------------------

pub struct PolySimRule {
    pub rule: Arc<dyn BoolLocalRule>,
    /// Monomial degree cap D (edges per tree).
    pub degree_cap: usize,
    cache: Mutex<HashMap<Vec<u8>, i128>>,
}

impl PolySimRule {
    pub fn new(rule: Arc<dyn BoolLocalRule>, degree_cap: usize) -> Result<Self> {
        if degree_cap == 0 {
            return Err(Error::InvalidArgument("degree cap must be >= 1".into()));
        }
        Ok(PolySimRule { rule, degree_cap, cache: Mutex::new(HashMap::new()) })
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    /// Integer polynomial value at every variable vertex.
    pub fn evaluate_all(&self, g: &DecoratedFactorGraph) -> Result<Vec<i128>> {
        (0..g.n_vars()).map(|v| self.evaluate_at(g, v)).collect()
    }

    pub fn evaluate_all_f64(&self, g: &DecoratedFactorGraph) -> Result<Vec<f64>> {
        Ok(self.evaluate_all(g)?.into_iter().map(|v| v as f64).collect())
    }

    /// Sum of h over the realized monomials at v: every tree-shaped edge
    /// subset of the r-ball containing v, with at most D edges and
    /// tree-depth at most r.
    pub fn evaluate_at(&self, g: &DecoratedFactorGraph, v: VertexId) -> Result<i128> {
        let r = self.rule.radius();
        let nb = neighborhood(g, v, r);
        let local = &nb.graph;
        // empty monomial
        let mut total = self.coeff(local, nb.root, &[])?;
        // enumerate subtrees: grow by attaching new vertices, candidates in
        // increasing edge index with earlier candidates banned on recursion
        let ne = local.edges().len();
        let mut in_tree_vertex = vec![false; local.n_vertices()];
        in_tree_vertex[nb.root] = true;
        let mut depth = vec![usize::MAX; local.n_vertices()];
        depth[nb.root] = 0;
        let mut banned = vec![false; ne];
        let mut edges_chosen: Vec<u32> = Vec::new();
        let mut sum = 0i128;
        self.grow(
            local,
            nb.root,
            r,
            &mut in_tree_vertex,
            &mut depth,
            &mut banned,
            &mut edges_chosen,
            &mut sum,
        )?;
        total = total
            .checked_add(sum)
            .ok_or_else(|| Error::BudgetExceeded("polynomial value overflow".into()))?;
        Ok(total)
    }

    #[allow(clippy::too_many_arguments)]
    fn grow(
        &self,
        local: &DecoratedFactorGraph,
        root: VertexId,
        r: usize,
        in_tree: &mut Vec<bool>,
        depth: &mut Vec<usize>,
        banned: &mut Vec<bool>,
        chosen: &mut Vec<u32>,
        sum: &mut i128,
    ) -> Result<()> {
        if chosen.len() >= self.degree_cap {
            return Ok(());
        }
        // extension candidates: edges with exactly one endpoint in the
        // tree whose new endpoint would sit at depth <= r
        let mut candidates = Vec::new();
        for (ei, e) in local.edges().iter().enumerate() {
            if banned[ei] || chosen.iter().any(|&c| c as usize == ei) {
                continue;
            }
            let a = e.var as usize;
            let b = local.clause_vertex(e.clause as usize);
            let (inside, outside) = match (in_tree[a], in_tree[b]) {
                (true, false) => (a, b),
                (false, true) => (b, a),
                _ => continue,
            };
            if depth[inside] + 1 <= r {
                candidates.push((ei, inside, outside));
            }
        }
        let mut newly_banned = Vec::new();
        for (ei, inside, outside) in candidates {
            chosen.push(ei as u32);
            in_tree[outside] = true;
            let saved_depth = depth[outside];
            depth[outside] = depth[inside] + 1;

            *sum = sum
                .checked_add(self.coeff(local, root, chosen)?)
                .ok_or_else(|| Error::BudgetExceeded("polynomial value overflow".into()))?;
            self.grow(local, root, r, in_tree, depth, banned, chosen, sum)?;

            depth[outside] = saved_depth;
            in_tree[outside] = false;
            chosen.pop();
            banned[ei] = true;
            newly_banned.push(ei);
        }
        for ei in newly_banned {
            banned[ei] = false;
        }
        Ok(())
    }

    /// Coefficient h(root, G(S)) for the subtree with the given edge ids
    /// of `parent`, memoized by canonical form.
    fn coeff(&self, parent: &DecoratedFactorGraph, root: VertexId, edges: &[u32]) -> Result<i128> {
        let (little, little_root) = subgraph_from_edges(parent, root, edges);
        self.coeff_of_tree(&little, little_root)
    }

    fn coeff_of_tree(&self, tree: &DecoratedFactorGraph, root: VertexId) -> Result<i128> {
        let cert = canonical_certificate(tree, root)?;
        if let Some(&h) = self.cache.lock().unwrap().get(&cert) {
            return Ok(h);
        }
        let nb = neighborhood(tree, root, self.rule.radius());
        debug_assert_eq!(nb.size(), tree.n_vertices(), "subtree deeper than rule radius");
        let value: i128 = if self.rule.evaluate(&nb)? { 1 } else { -1 };
        // subtract h over every proper rooted subtree
        let mut sum = 0i128;
        for sub in proper_rooted_subtrees(tree, root) {
            let (little, little_root) = subgraph_from_edges(tree, root, &sub);
            sum = sum
                .checked_add(self.coeff_of_tree(&little, little_root)?)
                .ok_or_else(|| Error::BudgetExceeded("coefficient overflow".into()))?;
        }
        let h = value
            .checked_sub(sum)
            .ok_or_else(|| Error::BudgetExceeded("coefficient overflow".into()))?;
        self.cache.lock().unwrap().insert(cert, h);
        Ok(h)
    }
}

/// Build the decorated subgraph induced by `edges` plus the root vertex.
fn subgraph_from_edges(
    parent: &DecoratedFactorGraph,
    root: VertexId,
    edges: &[u32],
) -> (DecoratedFactorGraph, VertexId) {
    let mut vars = Vec::new();
    let mut clauses = Vec::new();
    let mut local: HashMap<VertexId, usize> = HashMap::new();
    let mut add_vertex = |v: VertexId, vars: &mut Vec<VertexId>, clauses: &mut Vec<VertexId>| {
        if parent.is_var(v) {
            vars.push(v);
        } else {
            clauses.push(v);
        }
    };
    let mut seen = std::collections::HashSet::new();
    seen.insert(root);
    add_vertex(root, &mut vars, &mut clauses);
    for &ei in edges {
        let e = parent.edge(ei);
        for v in [e.var as usize, parent.clause_vertex(e.clause as usize)] {
            if seen.insert(v) {
                add_vertex(v, &mut vars, &mut clauses);
            }
        }
    }
    for (i, &v) in vars.iter().enumerate() {
        local.insert(v, i);
    }
    for (i, &c) in clauses.iter().enumerate() {
        local.insert(c, vars.len() + i);
    }
    let sub_edges: Vec<Edge> = edges
        .iter()
        .map(|&ei| {
            let e = parent.edge(ei);
            Edge {
                var: local[&(e.var as usize)] as u32,
                clause: (local[&parent.clause_vertex(e.clause as usize)] - vars.len()) as u32,
                slot: e.slot,
                positive: e.positive,
                word: e.word,
            }
        })
        .collect();
    let words: Vec<u64> =
        vars.iter().chain(clauses.iter()).map(|&v| parent.vertex_word(v)).collect();
    let g = DecoratedFactorGraph::from_parts(vars.len(), clauses.len(), sub_edges, words).unwrap();
    (g, local[&root])
}

/// Every proper rooted subtree of a tree (as edge-id lists), the empty
/// tree included.
fn proper_rooted_subtrees(tree: &DecoratedFactorGraph, root: VertexId) -> Vec<Vec<u32>> {
    // orient edges away from the root
    let nv = tree.n_vertices();
    let mut children: Vec<Vec<(u32, VertexId)>> = vec![Vec::new(); nv];
    let mut visited = vec![false; nv];
    visited[root] = true;
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        for &ei in tree.incident(u) {
            let w = tree.other_endpoint(ei, u);
            if !visited[w] {
                visited[w] = true;
                children[u].push((ei, w));
                queue.push_back(w);
            }
        }
    }
    // combinations(v): edge sets of rooted subtrees of the branch at v
    fn combinations(
        v: VertexId,
        children: &Vec<Vec<(u32, VertexId)>>,
    ) -> Vec<Vec<u32>> {
        let mut acc: Vec<Vec<u32>> = vec![Vec::new()];
        for &(ei, w) in &children[v] {
            let branch = combinations(w, children);
            let mut next = Vec::with_capacity(acc.len() * (branch.len() + 1));
            for base in &acc {
                // drop the whole branch
                next.push(base.clone());
                // keep the edge plus any branch subtree
                for sub in &branch {
                    let mut s = base.clone();
                    s.push(ei);
                    s.extend_from_slice(sub);
                    next.push(s);
                }
            }
            acc = next;
        }
        acc
    }
    let mut all = combinations(root, &children);
    let full_len = tree.edges().len();
    all.retain(|s| s.len() < full_len);
    all
}

/// Monte Carlo estimate of gamma = E ||f||^2 / n for the simulation over
/// the uniform ensemble, with standard error.
pub fn second_moment(
    sim: &PolySimRule,
    n: usize,
    m: usize,
    k: usize,
    samples: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    let stream = SeedStream::new(seed).derive_str("polysim-2mt");
    let mut values = Vec::with_capacity(samples as usize);
    for s in 0..samples {
        let case = stream.derive(s);
        let phi = sample_formula_stream(n, m, k, case.derive_str("phi"))?;
        let g = build_factor_graph_stream(&phi, case.derive_str("dec"));
        let out = sim.evaluate_all(&g)?;
        let norm: f64 = out.iter().map(|&v| (v as f64) * (v as f64)).sum();
        values.push(norm / n as f64);
    }
    let mean = values.iter().sum::<f64>() / samples as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / samples as f64;
    Ok((mean, (var / samples as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{sample_formula, Formula, Literal};
    use crate::graph::build_factor_graph;
    use crate::rules::{ConstRule, MajorityPolarity};

    #[test]
    fn isolated_variable_is_the_empty_monomial() {
        // no clauses at all: value = strict_round^{-1}(g on singleton)
        let phi = Formula::new(3, 0, 3, vec![]).unwrap();
        let g = build_factor_graph(&phi, 1);
        let sim = PolySimRule::new(Arc::new(ConstRule(true)), 4).unwrap();
        assert_eq!(sim.evaluate_all(&g).unwrap(), vec![1, 1, 1]);
        let sim = PolySimRule::new(Arc::new(ConstRule(false)), 4).unwrap();
        assert_eq!(sim.evaluate_all(&g).unwrap(), vec![-1, -1, -1]);
    }

    #[test]
    fn constant_rule_collapses_to_empty_monomial() {
        // h(empty) = 1 and every other coefficient vanishes, so the value
        // is 1 everywhere and gamma = 1 exactly
        let phi = sample_formula(10, 12, 3, 2).unwrap();
        let g = build_factor_graph(&phi, 2);
        let sim = PolySimRule::new(Arc::new(ConstRule(true)), 5).unwrap();
        let vals = sim.evaluate_all(&g).unwrap();
        assert!(vals.iter().all(|&v| v == 1));
        let (gamma, _) = second_moment(&sim, 8, 10, 3, 4, 3).unwrap();
        assert_eq!(gamma, 1.0);
    }

    #[test]
    fn single_clause_matches_rule_exactly() {
        // (x0 OR x1 OR x2): tree ball, so strictRound of the simulation
        // equals the rule at all three variables
        let phi = Formula::from_clauses(
            3,
            3,
            &[vec![Literal::new(0, true), Literal::new(1, true), Literal::new(2, true)]],
        )
        .unwrap();
        let g = build_factor_graph(&phi, 3);
        let rule = Arc::new(MajorityPolarity);
        let sim = PolySimRule::new(rule.clone(), 6).unwrap();
        let vals = sim.evaluate_all(&g).unwrap();
        for v in 0..3 {
            let nb = neighborhood(&g, v, rule.radius());
            let expect: i128 = if rule.evaluate(&nb).unwrap() { 1 } else { -1 };
            assert_eq!(vals[v], expect, "var {v}");
        }
    }

    #[test]
    fn truncation_err_iff_ball_not_small_tree() {
        let phi = sample_formula(40, 40, 3, 11).unwrap();
        let g = build_factor_graph(&phi, 11);
        let rule = MajorityPolarity;
        let d = 6;
        let vals = run_d_truncation(&rule, &g, d).unwrap();
        for v in 0..40 {
            let nb = neighborhood(&g, v, rule.radius());
            // independent classifier: count vertices and edges directly
            let tree = nb.graph.edges().len() + 1 == nb.size();
            let small = nb.size() <= d;
            assert_eq!(vals[v] == Value::Err, !(tree && small), "var {v}");
        }
    }

    #[test]
    fn simulation_matches_truncation_on_random_instances() {
        let mut checked = 0u64;
        for seed in 0..60u64 {
            let phi = sample_formula(30, 30, 3, seed).unwrap();
            let g = build_factor_graph(&phi, seed ^ 0x7e);
            let rule = Arc::new(MajorityPolarity);
            let sim = PolySimRule::new(rule.clone(), 6).unwrap();
            let trunc = run_d_truncation(rule.as_ref(), &g, 6).unwrap();
            let vals = sim.evaluate_all(&g).unwrap();
            for v in 0..30 {
                if trunc[v] != Value::Err {
                    assert_eq!(
                        strict_round_exact(vals[v]),
                        trunc[v],
                        "seed {seed} var {v} value {}",
                        vals[v]
                    );
                    checked += 1;
                }
            }
        }
        assert!(checked > 500, "too few non-err coordinates: {checked}");
    }

    #[test]
    fn distant_bit_flip_does_not_change_value() {
        // flipping a literal slot far from the root leaves the value alone
        let phi = sample_formula(40, 35, 3, 13).unwrap();
        let g = build_factor_graph(&phi, 13);
        let rule = Arc::new(MajorityPolarity);
        let sim = PolySimRule::new(rule.clone(), 6).unwrap();
        let v0 = 0usize;
        let base = sim.evaluate_at(&g, v0).unwrap();
        // find a clause outside the radius-3 ball of v0
        let nb = neighborhood(&g, v0, 3);
        let inside: std::collections::HashSet<usize> =
            nb.to_global.iter().copied().collect();
        let far = (0..35)
            .map(|c| g.clause_vertex(c))
            .find(|cv| !inside.contains(cv))
            .expect("some far clause");
        let far_var = (0..40).find(|v| !inside.contains(v)).expect("some far variable");
        let mut phi2 = phi.clone();
        let c = far - 40;
        let old = phi2.literal(c, 0);
        phi2.set_literal(c, 0, Literal::new(far_var as u32, !old.positive));
        // rebuild with the same decoration stream
        let g2 = build_factor_graph(&phi2, 13);
        assert_eq!(sim.evaluate_at(&g2, v0).unwrap(), base);
    }
}

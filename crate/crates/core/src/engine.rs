//! Execution engines: r-local, r-local memory, sequential local, the
//! R-local simulation, and psi-dependence-chain insulation analysis.
//!
//! All sequential randomness (processing priorities, decimation coins) is
//! derived from the graph's decoration words, so a memory run, its R-local
//! simulation, and a sequential run with its memory-rule encoding can be
//! coupled bit-for-bit.

use crate::assignment::Assignment;
use crate::error::{Error, Result};
use crate::graph::{derive_coin, derive_psi, DecoratedFactorGraph, Edge, VertexId};
use crate::nbhd::{neighborhood, RootedNeighborhood};
use crate::rules::{BoolLocalRule, MemoryRule, ProbLocalRule};
use rayon::prelude::*;
use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

// ---------------------------------------------------------------------
// r-local algorithm
// ---------------------------------------------------------------------

/// Run an r-local rule independently at every variable vertex.
pub fn run_local(rule: &dyn BoolLocalRule, g: &DecoratedFactorGraph) -> Result<Assignment> {
    let r = rule.radius();
    let bits: Result<Vec<bool>> = (0..g.n_vars())
        .into_par_iter()
        .map(|v| {
            let nb = neighborhood(g, v, r);
            rule.evaluate(&nb).map_err(|e| Error::RuleFailure {
                vertex: v,
                message: e.to_string(),
            })
        })
        .collect();
    Ok(Assignment::from_bools(&bits?))
}

// ---------------------------------------------------------------------
// Local memory algorithm
// ---------------------------------------------------------------------

/// Opaque in-ball vertex handle. Rules navigate through handles and never
/// see global vertex identities, which keeps them isomorphism-invariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VertexHandle {
    id: VertexId,
    dist: usize,
}

/// One incident edge as seen from a handle.
#[derive(Debug, Clone, Copy)]
pub struct EdgeInfo {
    pub positive: bool,
    pub word: u64,
    pub other: VertexHandle,
}

/// A radius-bounded window onto the graph and the memory map, rooted at
/// the vertex being processed. Expansion past the radius is a checked
/// contract violation; writes outside the ball are unreachable because
/// only in-ball handles exist.
pub struct MemoryView<'a> {
    g: &'a DecoratedFactorGraph,
    root: VertexId,
    radius: usize,
    mu: &'a mut [u64],
}

impl<'a> MemoryView<'a> {
    pub fn new(
        g: &'a DecoratedFactorGraph,
        root: VertexId,
        radius: usize,
        mu: &'a mut [u64],
    ) -> Self {
        MemoryView { g, root, radius, mu }
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn root(&self) -> VertexHandle {
        VertexHandle { id: self.root, dist: 0 }
    }

    pub fn is_var(&self, h: VertexHandle) -> bool {
        self.g.is_var(h.id)
    }

    pub fn degree(&self, h: VertexHandle) -> usize {
        self.g.degree(h.id)
    }

    pub fn word(&self, h: VertexHandle) -> u64 {
        self.g.vertex_word(h.id)
    }

    pub fn mu(&self, h: VertexHandle) -> u64 {
        self.mu[h.id]
    }

    /// Identity test for handles reached along different paths.
    pub fn same_vertex(&self, a: VertexHandle, b: VertexHandle) -> bool {
        a.id == b.id
    }

    pub fn set_mu(&mut self, h: VertexHandle, value: u64) {
        // handles only exist within the radius, so this cannot escape the
        // ball; the bound is still asserted
        assert!(h.dist <= self.radius, "memory write outside the r-ball");
        self.mu[h.id] = value;
    }

    /// Incident edges of `h`, erroring when `h` sits on the ball boundary.
    pub fn edges(&self, h: VertexHandle) -> Result<Vec<EdgeInfo>> {
        if h.dist >= self.radius {
            return Err(Error::Contract(format!(
                "expansion at distance {} exceeds subroutine radius {}",
                h.dist, self.radius
            )));
        }
        Ok(self
            .g
            .incident(h.id)
            .iter()
            .map(|&ei| {
                let e = self.g.edge(ei);
                EdgeInfo {
                    positive: e.positive,
                    word: e.word,
                    other: VertexHandle {
                        id: self.g.other_endpoint(ei, h.id),
                        dist: h.dist + 1,
                    },
                }
            })
            .collect())
    }
}

/// Run a local memory algorithm: vertices (variables and clauses alike)
/// processed in increasing processing-priority order, priorities derived
/// from the vertex decoration words.
pub fn run_local_memory(rule: &dyn MemoryRule, g: &DecoratedFactorGraph) -> Result<Assignment> {
    let nv = g.n_vertices();
    let mut order: Vec<VertexId> = (0..nv).collect();
    order.sort_by_key(|&v| (derive_psi(g.vertex_word(v)), v));
    let mut mu = vec![0u64; nv];
    for v in order {
        let mut view = MemoryView::new(g, v, rule.radius(), &mut mu);
        rule.process(&mut view).map_err(|e| Error::RuleFailure {
            vertex: v,
            message: e.to_string(),
        })?;
    }
    Ok(Assignment::from_bools(
        &(0..g.n_vars()).map(|v| rule.finalize(mu[v])).collect::<Vec<_>>(),
    ))
}

// ---------------------------------------------------------------------
// R-local simulation of a memory algorithm
// ---------------------------------------------------------------------

/// The R-local rule that replays a memory algorithm inside N_R(v) using
/// priorities extracted from the decoration words, then reads f2 at v.
pub struct RLocalSimulation {
    pub rule: Arc<dyn MemoryRule>,
    pub big_radius: usize,
}

pub fn r_local_simulation(rule: Arc<dyn MemoryRule>, big_radius: usize) -> Result<RLocalSimulation> {
    if big_radius < rule.radius() {
        return Err(Error::InvalidArgument("R must be at least the rule radius".into()));
    }
    Ok(RLocalSimulation { rule, big_radius })
}

impl BoolLocalRule for RLocalSimulation {
    fn radius(&self) -> usize {
        self.big_radius
    }

    fn evaluate(&self, nbhd: &RootedNeighborhood) -> Result<bool> {
        let g = &nbhd.graph;
        let nv = g.n_vertices();
        let mut order: Vec<VertexId> = (0..nv).collect();
        order.sort_by_key(|&v| (derive_psi(g.vertex_word(v)), v));
        let mut mu = vec![0u64; nv];
        for v in order {
            let mut view = MemoryView::new(g, v, self.rule.radius(), &mut mu);
            self.rule.process(&mut view)?;
        }
        Ok(self.rule.finalize(mu[nbhd.root]))
    }
}

// ---------------------------------------------------------------------
// Sequential local algorithm (direct implementation)
// ---------------------------------------------------------------------

/// Direct sequential-local run: variables in uniform (word-derived) random
/// order; per step the rule is evaluated on the current simplified graph
/// and the decision simplifies it (delete satisfied clauses, drop
/// falsified occurrences, drop emptied clauses).
pub fn run_sequential_local(
    rule: &dyn ProbLocalRule,
    g: &DecoratedFactorGraph,
) -> Result<Assignment> {
    let n = g.n_vars();
    let mut order: Vec<VertexId> = (0..n).collect();
    order.sort_by_key(|&v| (derive_psi(g.vertex_word(v)), v));

    let mut assigned: Vec<Option<bool>> = vec![None; n];
    let mut clause_alive = vec![true; g.n_clauses()];

    for v in order {
        let nb = simplified_neighborhood(g, v, rule.radius(), &assigned, &clause_alive);
        let p = rule
            .evaluate(&nb)
            .map_err(|e| Error::RuleFailure { vertex: v, message: e.to_string() })?
            .clamp(0.0, 1.0);
        let x = derive_coin(g.vertex_word(v)) < p;
        assigned[v] = Some(x);
        simplify_after_assignment(g, v, x, &mut clause_alive, &assigned);
    }
    Ok(Assignment::from_bools(
        &assigned.into_iter().map(|a| a.unwrap()).collect::<Vec<_>>(),
    ))
}

/// Delete clauses satisfied by setting `v = x` and clauses emptied by the
/// removal of falsified occurrences.
fn simplify_after_assignment(
    g: &DecoratedFactorGraph,
    v: VertexId,
    x: bool,
    clause_alive: &mut [bool],
    assigned: &[Option<bool>],
) {
    for &ei in g.incident(v) {
        let e = g.edge(ei);
        let c = e.clause as usize;
        if !clause_alive[c] {
            continue;
        }
        if e.positive == x {
            clause_alive[c] = false;
        } else {
            // occurrence falsified; clause dies if no live occurrence left
            let any_live = g
                .incident(g.clause_vertex(c))
                .iter()
                .any(|&fi| {
                    let f = g.edge(fi);
                    match assigned[f.var as usize] {
                        None => true,
                        Some(val) => f.positive == val,
                    }
                });
            if !any_live {
                clause_alive[c] = false;
            }
        }
    }
}

/// Radius-r canonical ball of the simplified graph: assigned variables and
/// dead clauses are removed, along with every edge touching them.
fn simplified_neighborhood(
    g: &DecoratedFactorGraph,
    root: VertexId,
    r: usize,
    assigned: &[Option<bool>],
    clause_alive: &[bool],
) -> RootedNeighborhood {
    debug_assert!(assigned[root].is_none());
    // BFS over the live structure
    let mut dist: HashMap<VertexId, usize> = HashMap::new();
    dist.insert(root, 0);
    let mut order = vec![root];
    let mut queue = VecDeque::from([root]);
    let alive_vertex = |u: VertexId| -> bool {
        if g.is_var(u) {
            assigned[u].is_none()
        } else {
            clause_alive[g.clause_of(u)]
        }
    };
    let mut live_edges: Vec<(u32, usize, usize)> = Vec::new(); // (edge idx, dv, dc)
    let mut seen_edges = std::collections::HashSet::new();
    while let Some(u) = queue.pop_front() {
        let d = dist[&u];
        if d >= r {
            continue;
        }
        for &ei in g.incident(u) {
            let e = g.edge(ei);
            let vu = e.var as usize;
            let cu = g.clause_vertex(e.clause as usize);
            if !alive_vertex(vu) || !alive_vertex(cu) {
                continue;
            }
            let w = g.other_endpoint(ei, u);
            let dw = *dist.entry(w).or_insert_with(|| {
                order.push(w);
                queue.push_back(w);
                d + 1
            });
            if seen_edges.insert(ei) {
                let (dv, dc) = if g.is_var(u) { (d, dw) } else { (dw, d) };
                live_edges.push((ei, dv, dc));
            }
        }
    }

    // build the local graph
    let mut vars = Vec::new();
    let mut clauses = Vec::new();
    for &u in &order {
        if g.is_var(u) {
            vars.push(u);
        } else {
            clauses.push(u);
        }
    }
    let mut local_of = HashMap::new();
    for (i, &u) in vars.iter().enumerate() {
        local_of.insert(u, i);
    }
    for (i, &u) in clauses.iter().enumerate() {
        local_of.insert(u, vars.len() + i);
    }
    let edges: Vec<Edge> = live_edges
        .iter()
        .filter(|&&(_, dv, dc)| dv.min(dc) < r)
        .map(|&(ei, _, _)| {
            let e = g.edge(ei);
            Edge {
                var: local_of[&(e.var as usize)] as u32,
                clause: (local_of[&g.clause_vertex(e.clause as usize)] - vars.len()) as u32,
                slot: e.slot,
                positive: e.positive,
                word: e.word,
            }
        })
        .collect();
    let words: Vec<u64> =
        vars.iter().chain(clauses.iter()).map(|&u| g.vertex_word(u)).collect();
    let local = DecoratedFactorGraph::from_parts(vars.len(), clauses.len(), edges, words).unwrap();
    // delegate canonicalization to the standard extractor
    neighborhood(&local, local_of[&root], r)
}

// ---------------------------------------------------------------------
// Sequential local as a local memory algorithm
// ---------------------------------------------------------------------

/// Memory-rule encoding of a sequential r-local algorithm: variable
/// vertices decide in priority order against the simplification state
/// reconstructed from the memory map, clause vertices do nothing.
///
/// Memory codes: variable 0 = unset, 1 = true, 2 = false; clause 0 =
/// active, 1 = deleted (satisfied or emptied).
pub struct SeqLocalMemory {
    pub rule: Arc<dyn ProbLocalRule>,
}

pub const MU_VAR_TRUE: u64 = 1;
pub const MU_VAR_FALSE: u64 = 2;
pub const MU_CLAUSE_DELETED: u64 = 1;

impl MemoryRule for SeqLocalMemory {
    fn radius(&self) -> usize {
        self.rule.radius().max(2)
    }

    fn process(&self, view: &mut MemoryView<'_>) -> Result<()> {
        let root = view.root();
        if !view.is_var(root) {
            return Ok(());
        }
        // reconstruct the simplified r-ball from memory codes
        let nb = reconstruct_simplified(view, self.rule.radius())?;
        let p = self.rule.evaluate(&nb)?.clamp(0.0, 1.0);
        let x = derive_coin(view.word(root)) < p;
        view.set_mu(root, if x { MU_VAR_TRUE } else { MU_VAR_FALSE });

        // propagate simplification to incident clauses (a 2-local edit)
        for edge in view.edges(root)? {
            let c = edge.other;
            if view.mu(c) == MU_CLAUSE_DELETED {
                continue;
            }
            if edge.positive == x {
                view.set_mu(c, MU_CLAUSE_DELETED);
            } else {
                let mut any_live = false;
                for e2 in view.edges(c)? {
                    let live = match view.mu(e2.other) {
                        0 => true,
                        MU_VAR_TRUE => e2.positive,
                        _ => !e2.positive,
                    };
                    if live {
                        any_live = true;
                        break;
                    }
                }
                if !any_live {
                    view.set_mu(c, MU_CLAUSE_DELETED);
                }
            }
        }
        Ok(())
    }

    fn finalize(&self, mu: u64) -> bool {
        mu == MU_VAR_TRUE
    }
}

/// BFS the live structure visible in the view and emit a canonical
/// neighborhood isomorphic to the simplified-graph ball.
fn reconstruct_simplified(view: &MemoryView<'_>, r: usize) -> Result<RootedNeighborhood> {
    struct LocalVertex {
        word: u64,
        is_var: bool,
    }
    let root = view.root();
    let mut verts: Vec<LocalVertex> = vec![LocalVertex { word: view.word(root), is_var: true }];
    let mut handle_of: Vec<VertexHandle> = vec![root];
    let mut index_of: HashMap<u64, usize> = HashMap::new(); // keyed by word (distinct a.s.)
    index_of.insert(view.word(root), 0);
    let mut dist = vec![0usize];
    let mut edges: Vec<(usize, usize, bool, u64)> = Vec::new();
    let mut seen_edge_words = std::collections::HashSet::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(ui) = queue.pop_front() {
        let d = dist[ui];
        if d >= r {
            continue;
        }
        let uh = handle_of[ui];
        let u_is_var = verts[ui].is_var;
        for e in view.edges(uh)? {
            // skip edges to assigned variables or deleted clauses
            let other_alive = if view.is_var(e.other) {
                view.mu(e.other) == 0
            } else {
                view.mu(e.other) != MU_CLAUSE_DELETED
            };
            let self_alive = if u_is_var {
                view.mu(uh) == 0 || ui == 0
            } else {
                view.mu(uh) != MU_CLAUSE_DELETED
            };
            if !other_alive || !self_alive {
                continue;
            }
            let wkey = view.word(e.other);
            let wi = *index_of.entry(wkey).or_insert_with(|| {
                verts.push(LocalVertex { word: wkey, is_var: view.is_var(e.other) });
                handle_of.push(e.other);
                dist.push(d + 1);
                queue.push_back(verts.len() - 1);
                verts.len() - 1
            });
            if seen_edge_words.insert(e.word) && dist[ui].min(dist[wi]) < r {
                let (vi, ci) = if u_is_var { (ui, wi) } else { (wi, ui) };
                edges.push((vi, ci, e.positive, e.word));
            }
        }
    }
    // renumber variables first
    let mut var_ids = Vec::new();
    let mut clause_ids = Vec::new();
    for (i, v) in verts.iter().enumerate() {
        if v.is_var {
            var_ids.push(i);
        } else {
            clause_ids.push(i);
        }
    }
    let mut local = vec![0usize; verts.len()];
    for (p, &i) in var_ids.iter().enumerate() {
        local[i] = p;
    }
    for (p, &i) in clause_ids.iter().enumerate() {
        local[i] = var_ids.len() + p;
    }
    let graph_edges: Vec<Edge> = edges
        .iter()
        .map(|&(vi, ci, pol, word)| Edge {
            var: local[vi] as u32,
            clause: (local[ci] - var_ids.len()) as u32,
            slot: 0,
            positive: pol,
            word,
        })
        .collect();
    let words: Vec<u64> = var_ids
        .iter()
        .chain(clause_ids.iter())
        .map(|&i| verts[i].word)
        .collect();
    let g = DecoratedFactorGraph::from_parts(var_ids.len(), clause_ids.len(), graph_edges, words)
        .unwrap();
    Ok(neighborhood(&g, 0, r))
}

// ---------------------------------------------------------------------
// Insulation analysis
// ---------------------------------------------------------------------

/// Per-vertex insulation decision: a vertex is (r, R, psi)-insulated when
/// no 2r-hop chain of strictly decreasing priorities starting at it
/// reaches the annulus N_R minus N_{R - 2r}.
#[derive(Debug, Clone)]
pub struct InsulationReport {
    pub hop: usize,
    pub big_radius: usize,
    pub insulated: Vec<bool>,
    /// distinct annulus vertices reached by decreasing chains, per vertex
    pub witnesses: Vec<u64>,
}

/// Exact insulation for every vertex, using the priorities derived from
/// the graph decorations. `hop` is the chain hop bound (2r for an r-local
/// subroutine); `big_radius` is R.
pub fn insulation_report(
    g: &DecoratedFactorGraph,
    hop: usize,
    big_radius: usize,
) -> Result<InsulationReport> {
    if hop == 0 || big_radius < hop {
        return Err(Error::InvalidArgument("need 0 < hop <= R".into()));
    }
    let psi: Vec<u64> = (0..g.n_vertices()).map(|v| derive_psi(g.vertex_word(v))).collect();
    insulation_report_with_psi(g, &psi, hop, big_radius)
}

pub fn insulation_report_with_psi(
    g: &DecoratedFactorGraph,
    psi: &[u64],
    hop: usize,
    big_radius: usize,
) -> Result<InsulationReport> {
    if hop == 0 || big_radius < hop {
        return Err(Error::InvalidArgument("need 0 < hop <= R".into()));
    }
    let nv = g.n_vertices();
    let results: Vec<(bool, u64)> = (0..nv)
        .into_par_iter()
        .map(|v| insulated_at(g, psi, v, hop, big_radius))
        .collect();
    Ok(InsulationReport {
        hop,
        big_radius,
        insulated: results.iter().map(|r| r.0).collect(),
        witnesses: results.iter().map(|r| r.1).collect(),
    })
}

/// A chain that escapes N_{R-hop} has its first escaping element inside
/// the annulus (one hop moves depth by at most `hop`), so a DFS over
/// decreasing-psi moves restricted to N_{R-hop}, with terminal probes into
/// the annulus, decides insulation exactly. Each vertex is expanded at
/// most once: reachability by some decreasing chain only depends on the
/// vertex itself, because the chain's priority at a vertex is that
/// vertex's own psi.
fn insulated_at(
    g: &DecoratedFactorGraph,
    psi: &[u64],
    v: VertexId,
    hop: usize,
    big_radius: usize,
) -> (bool, u64) {
    let depth = bounded_depths(g, v, big_radius);
    let mut visited = std::collections::HashSet::new();
    visited.insert(v);
    let mut stack = vec![v];
    let mut witnesses = std::collections::HashSet::new();
    while let Some(u) = stack.pop() {
        for w in hop_ball(g, u, hop) {
            if w == u || psi[w] >= psi[u] {
                continue;
            }
            let dw = match depth.get(&w) {
                Some(&d) => d,
                None => continue, // beyond N_R entirely
            };
            if dw > big_radius - hop {
                witnesses.insert(w);
                continue; // annulus endpoint: witness, not expandable
            }
            if visited.insert(w) {
                stack.push(w);
            }
        }
    }
    (witnesses.is_empty(), witnesses.len() as u64)
}

fn bounded_depths(
    g: &DecoratedFactorGraph,
    v: VertexId,
    radius: usize,
) -> HashMap<VertexId, usize> {
    let mut depth = HashMap::new();
    depth.insert(v, 0usize);
    let mut queue = VecDeque::from([v]);
    while let Some(u) = queue.pop_front() {
        let d = depth[&u];
        if d >= radius {
            continue;
        }
        for &ei in g.incident(u) {
            let w = g.other_endpoint(ei, u);
            if let std::collections::hash_map::Entry::Vacant(slot) = depth.entry(w) {
                slot.insert(d + 1);
                queue.push_back(w);
            }
        }
    }
    depth
}

fn hop_ball(g: &DecoratedFactorGraph, u: VertexId, hop: usize) -> Vec<VertexId> {
    let mut out = Vec::new();
    let mut dist = HashMap::new();
    dist.insert(u, 0usize);
    let mut queue = VecDeque::from([u]);
    while let Some(w) = queue.pop_front() {
        let d = dist[&w];
        if d >= hop {
            continue;
        }
        for &ei in g.incident(w) {
            let x = g.other_endpoint(ei, w);
            if let std::collections::hash_map::Entry::Vacant(slot) = dist.entry(x) {
                slot.insert(d + 1);
                out.push(x);
                queue.push_back(x);
            }
        }
    }
    out
}

//! Rooted r-neighborhoods and canonical (isomorphism-invariant) forms.
//!
//! The canonical form is produced by iterative partition refinement on
//! (side, depth, degree, decoration word) with edge polarities and words
//! in the refinement signatures, followed by individualization on any
//! remaining non-singleton cells with smallest-certificate selection.
//! Two rooted decorated neighborhoods get byte-identical certificates iff
//! they are isomorphic as rooted decorated signed graphs.

use crate::error::{Error, Result};
use crate::graph::{DecoratedFactorGraph, Edge, VertexId};
use std::collections::VecDeque;

/// A radius-r ball with canonical local labeling. `graph` uses canonical
/// local ids (variables first, clauses after), `to_global` maps a local id
/// back to the source graph.
#[derive(Debug, Clone)]
pub struct RootedNeighborhood {
    pub graph: DecoratedFactorGraph,
    pub root: VertexId,
    pub depth: Vec<u32>,
    pub to_global: Vec<VertexId>,
    certificate: Vec<u8>,
}

impl RootedNeighborhood {
    pub fn certificate(&self) -> &[u8] {
        &self.certificate
    }

    pub fn size(&self) -> usize {
        self.graph.n_vertices()
    }

    /// True when the ball contains no cycle and no parallel edges.
    pub fn is_tree(&self) -> bool {
        let nv = self.graph.n_vertices();
        let ne = self.graph.edges().len();
        if ne + 1 != nv {
            return false;
        }
        // connected by construction (BFS ball), so edge count settles it,
        // except parallel edges which also show up in the count
        true
    }
}

/// Extract the BFS ball of radius `r` around `root`: vertices within
/// distance r and the edges on those paths.
pub fn neighborhood(g: &DecoratedFactorGraph, root: VertexId, r: usize) -> RootedNeighborhood {
    let (vertices, depth) = ball_vertices(g, root, r);
    let depth_map: std::collections::HashMap<VertexId, u32> =
        vertices.iter().copied().zip(depth.iter().copied()).collect();
    let mut local_of = std::collections::HashMap::with_capacity(vertices.len());
    let mut vars = Vec::new();
    let mut clauses = Vec::new();
    for &v in &vertices {
        if g.is_var(v) {
            vars.push(v);
        } else {
            clauses.push(v);
        }
    }
    for (i, &v) in vars.iter().enumerate() {
        local_of.insert(v, i);
    }
    for (i, &c) in clauses.iter().enumerate() {
        local_of.insert(c, vars.len() + i);
    }

    // Edges on paths of length <= r: both endpoints in the ball and not
    // both at depth r (bipartite, so endpoint depths differ by one).
    let mut edges = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for &v in &vertices {
        for &ei in g.incident(v) {
            if !seen.insert(ei) {
                continue;
            }
            let e = g.edge(ei);
            let vu = e.var as usize;
            let cu = g.clause_vertex(e.clause as usize);
            if let (Some(&lv), Some(&lc)) = (local_of.get(&vu), local_of.get(&cu)) {
                let dmin = depth_map[&vu].min(depth_map[&cu]);
                if (dmin as usize) < r {
                    edges.push(Edge {
                        var: lv as u32,
                        clause: (lc - vars.len()) as u32,
                        slot: e.slot,
                        positive: e.positive,
                        word: e.word,
                    });
                }
            }
        }
    }

    let mut vertex_words = Vec::with_capacity(vertices.len());
    let mut depths_local = Vec::with_capacity(vertices.len());
    let mut to_global = Vec::with_capacity(vertices.len());
    for &v in vars.iter().chain(clauses.iter()) {
        vertex_words.push(g.vertex_word(v));
        depths_local.push(depth_map[&v]);
        to_global.push(v);
    }
    let local =
        DecoratedFactorGraph::from_parts(vars.len(), clauses.len(), edges, vertex_words).unwrap();
    let local_root = *local_of.get(&root).unwrap();

    canonical_relabel(local, local_root, depths_local, to_global)
}

/// Vertices within distance r, BFS order, with their depths.
fn ball_vertices(g: &DecoratedFactorGraph, root: VertexId, r: usize) -> (Vec<VertexId>, Vec<u32>) {
    let mut order = vec![root];
    let mut depth = vec![0u32];
    let mut dist = std::collections::HashMap::new();
    dist.insert(root, 0u32);
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        if d as usize >= r {
            continue;
        }
        for &ei in g.incident(v) {
            let u = g.other_endpoint(ei, v);
            if let std::collections::hash_map::Entry::Vacant(slot) = dist.entry(u) {
                slot.insert(d + 1);
                order.push(u);
                depth.push(d + 1);
                queue.push_back(u);
            }
        }
    }
    (order, depth)
}

/// Number of vertices within distance r of `root`, aborting early once the
/// count exceeds `cap` (returns cap + 1 in that case).
pub fn ball_size_capped(g: &DecoratedFactorGraph, root: VertexId, r: usize, cap: usize) -> usize {
    let mut dist = std::collections::HashMap::new();
    dist.insert(root, 0u32);
    let mut count = 1usize;
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        if d as usize >= r {
            continue;
        }
        for &ei in g.incident(v) {
            let u = g.other_endpoint(ei, v);
            if let std::collections::hash_map::Entry::Vacant(slot) = dist.entry(u) {
                slot.insert(d + 1);
                count += 1;
                if count > cap {
                    return cap + 1;
                }
                queue.push_back(u);
            }
        }
    }
    count
}

/// True iff every variable vertex's r-ball has at most n^(1/3) vertices.
pub fn is_r_locally_small(g: &DecoratedFactorGraph, r: usize) -> bool {
    let cap = (g.n_vars() as f64).powf(1.0 / 3.0) + 1e-9;
    let cap_int = cap.floor() as usize;
    (0..g.n_vars()).all(|v| ball_size_capped(g, v, r, cap_int) <= cap_int)
}

// ---------------------------------------------------------------------
// Canonicalization
// ---------------------------------------------------------------------

struct CanonInput {
    graph: DecoratedFactorGraph,
    root: usize,
    depth: Vec<u32>,
}

/// Relabel a rooted local graph into canonical order.
fn canonical_relabel(
    graph: DecoratedFactorGraph,
    root: usize,
    depth: Vec<u32>,
    to_global: Vec<VertexId>,
) -> RootedNeighborhood {
    let input = CanonInput { graph, root, depth };
    let (order, certificate) = canonical_order(&input);
    // order[p] = old local id at canonical position p
    let nv = input.graph.n_vertices();
    let mut pos_of = vec![0usize; nv];
    for (p, &old) in order.iter().enumerate() {
        pos_of[old] = p;
    }
    // canonical positions keep variables before clauses (enforced by the
    // initial coloring on side), so ids can be reused directly
    let n_vars = input.graph.n_vars();
    let mut vertex_words = vec![0u64; nv];
    let mut new_depth = vec![0u32; nv];
    let mut new_global = vec![0usize; nv];
    for (p, &old) in order.iter().enumerate() {
        vertex_words[p] = input.graph.vertex_word(old);
        new_depth[p] = input.depth[old];
        new_global[p] = to_global[old];
    }
    let edges: Vec<Edge> = input
        .graph
        .edges()
        .iter()
        .map(|e| Edge {
            var: pos_of[e.var as usize] as u32,
            clause: (pos_of[input.graph.clause_vertex(e.clause as usize)] - n_vars) as u32,
            slot: e.slot,
            positive: e.positive,
            word: e.word,
        })
        .collect();
    let graph = DecoratedFactorGraph::from_parts(
        n_vars,
        input.graph.n_clauses(),
        edges,
        vertex_words,
    )
    .unwrap();
    RootedNeighborhood {
        graph,
        root: pos_of[input.root],
        depth: new_depth,
        to_global: new_global,
        certificate,
    }
}

/// Canonical certificate of an arbitrary rooted decorated graph (used by
/// the polynomial-simulation coefficient cache).
pub fn canonical_certificate(
    graph: &DecoratedFactorGraph,
    root: usize,
) -> Result<Vec<u8>> {
    let nv = graph.n_vertices();
    // depth from root inside this graph
    let mut depth = vec![u32::MAX; nv];
    depth[root] = 0;
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for &ei in graph.incident(v) {
            let u = graph.other_endpoint(ei, v);
            if depth[u] == u32::MAX {
                depth[u] = depth[v] + 1;
                queue.push_back(u);
            }
        }
    }
    if depth.iter().any(|&d| d == u32::MAX) {
        return Err(Error::InvalidArgument(
            "canonical_certificate requires a graph connected to the root".into(),
        ));
    }
    let input = CanonInput { graph: graph.clone(), root, depth };
    let (_, cert) = canonical_order(&input);
    Ok(cert)
}

/// Returns (order, certificate): order[p] is the old id at canonical
/// position p. Variables always precede clauses.
fn canonical_order(input: &CanonInput) -> (Vec<usize>, Vec<u8>) {
    let nv = input.graph.n_vertices();
    let n_vars = input.graph.n_vars();
    // initial colors: side first (keeps variables before clauses in the
    // canonical order), then root flag, depth, degree, word
    let sigs: Vec<Vec<u64>> = (0..nv)
        .map(|v| {
            vec![
                u64::from(v >= n_vars),
                u64::from(v != input.root),
                u64::from(input.depth[v]),
                input.graph.degree(v) as u64,
                input.graph.vertex_word(v),
            ]
        })
        .collect();
    let colors = dense_colors(&sigs);
    let stable = refine(input, colors);
    let order = individualize(input, stable, &mut 0);
    let cert = build_certificate(input, &order);
    (order, cert)
}

fn dense_colors(sigs: &[Vec<u64>]) -> Vec<u32> {
    let mut idx: Vec<usize> = (0..sigs.len()).collect();
    idx.sort_by(|&a, &b| sigs[a].cmp(&sigs[b]));
    let mut colors = vec![0u32; sigs.len()];
    let mut c = 0u32;
    for w in 0..idx.len() {
        if w > 0 && sigs[idx[w]] != sigs[idx[w - 1]] {
            c += 1;
        }
        colors[idx[w]] = c;
    }
    colors
}

fn refine(input: &CanonInput, mut colors: Vec<u32>) -> Vec<u32> {
    let nv = input.graph.n_vertices();
    loop {
        let mut sigs: Vec<Vec<u64>> = Vec::with_capacity(nv);
        for v in 0..nv {
            let mut edge_sigs: Vec<[u64; 3]> = input
                .graph
                .incident(v)
                .iter()
                .map(|&ei| {
                    let e = input.graph.edge(ei);
                    let other = input.graph.other_endpoint(ei, v);
                    [u64::from(e.positive), e.word, u64::from(colors[other])]
                })
                .collect();
            edge_sigs.sort_unstable();
            let mut s = Vec::with_capacity(1 + 3 * edge_sigs.len());
            s.push(u64::from(colors[v]));
            for es in edge_sigs {
                s.extend_from_slice(&es);
            }
            sigs.push(s);
        }
        let next = dense_colors(&sigs);
        let classes_before = colors.iter().max().map_or(0, |&c| c + 1);
        let classes_after = next.iter().max().map_or(0, |&c| c + 1);
        let same_partition = classes_before == classes_after;
        colors = next;
        if same_partition {
            return colors;
        }
    }
}

const CANON_WORK_BUDGET: usize = 200_000;

fn individualize(input: &CanonInput, colors: Vec<u32>, work: &mut usize) -> Vec<usize> {
    *work += 1;
    assert!(*work <= CANON_WORK_BUDGET, "canonicalization work budget exceeded");
    let nv = input.graph.n_vertices();
    let n_classes = colors.iter().max().map_or(0, |&c| c + 1) as usize;
    if n_classes == nv {
        let mut order: Vec<usize> = (0..nv).collect();
        order.sort_by_key(|&v| colors[v]);
        return order;
    }
    // first non-singleton cell by color id
    let mut count = vec![0usize; n_classes];
    for &c in &colors {
        count[c as usize] += 1;
    }
    let cell_color = (0..n_classes).find(|&c| count[c] > 1).unwrap() as u32;
    let members: Vec<usize> = (0..nv).filter(|&v| colors[v] == cell_color).collect();
    let mut best: Option<(Vec<u8>, Vec<usize>)> = None;
    for &u in &members {
        // split u off the front of its cell and re-refine
        let mut split: Vec<u64> = colors.iter().map(|&c| 2 * u64::from(c) + 1).collect();
        split[u] = 2 * u64::from(cell_color);
        let sigs: Vec<Vec<u64>> = split.into_iter().map(|c| vec![c]).collect();
        let refined = refine(input, dense_colors(&sigs));
        let order = individualize(input, refined, work);
        let cert = build_certificate(input, &order);
        if best.as_ref().map_or(true, |(bc, _)| cert < *bc) {
            best = Some((cert, order));
        }
    }
    best.unwrap().1
}

fn build_certificate(input: &CanonInput, order: &[usize]) -> Vec<u8> {
    let nv = input.graph.n_vertices();
    let n_vars = input.graph.n_vars();
    let mut pos_of = vec![0usize; nv];
    for (p, &v) in order.iter().enumerate() {
        pos_of[v] = p;
    }
    let mut out = Vec::with_capacity(16 + 13 * nv + 18 * input.graph.edges().len());
    out.extend_from_slice(&(n_vars as u32).to_le_bytes());
    out.extend_from_slice(&(input.graph.n_clauses() as u32).to_le_bytes());
    out.extend_from_slice(&(pos_of[input.root] as u32).to_le_bytes());
    for &v in order {
        out.push(u8::from(v >= n_vars));
        out.extend_from_slice(&input.depth[v].to_le_bytes());
        out.extend_from_slice(&input.graph.vertex_word(v).to_le_bytes());
    }
    let mut edge_rows: Vec<[u8; 17]> = input
        .graph
        .edges()
        .iter()
        .map(|e| {
            let cu = pos_of[e.var as usize] as u32;
            let cv = pos_of[input.graph.clause_vertex(e.clause as usize)] as u32;
            let mut row = [0u8; 17];
            row[..4].copy_from_slice(&cu.to_le_bytes());
            row[4..8].copy_from_slice(&cv.to_le_bytes());
            row[8] = u8::from(e.positive);
            row[9..17].copy_from_slice(&e.word.to_le_bytes());
            row
        })
        .collect();
    edge_rows.sort_unstable();
    for row in edge_rows {
        out.extend_from_slice(&row);
    }
    out
}

/// Relabel a graph by permuting variable ids, clause ids, and edge order;
/// decorations travel with their carriers. Test support for invariance
/// checks.
#[cfg(test)]
pub(crate) fn relabel(
    g: &DecoratedFactorGraph,
    rng: &mut crate::rng::Rng64,
) -> (DecoratedFactorGraph, Vec<usize>, Vec<usize>) {
    let n = g.n_vars();
    let m = g.n_clauses();
    let mut vperm: Vec<usize> = (0..n).collect();
    let mut cperm: Vec<usize> = (0..m).collect();
    rng.shuffle(&mut vperm);
    rng.shuffle(&mut cperm);
    let mut edges: Vec<Edge> = g
        .edges()
        .iter()
        .map(|e| Edge {
            var: vperm[e.var as usize] as u32,
            clause: cperm[e.clause as usize] as u32,
            slot: e.slot,
            positive: e.positive,
            word: e.word,
        })
        .collect();
    rng.shuffle(&mut edges);
    let mut words = vec![0u64; n + m];
    for v in 0..n {
        words[vperm[v]] = g.vertex_word(v);
    }
    for c in 0..m {
        words[n + cperm[c]] = g.vertex_word(n + c);
    }
    (DecoratedFactorGraph::from_parts(n, m, edges, words).unwrap(), vperm, cperm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{sample_formula, Formula, Literal};
    use crate::graph::build_factor_graph;
    use crate::rng::Rng64;

    #[test]
    fn radius_zero_is_root_alone() {
        let phi = sample_formula(5, 6, 3, 1).unwrap();
        let g = build_factor_graph(&phi, 1);
        let nb = neighborhood(&g, 2, 0);
        assert_eq!(nb.size(), 1);
        assert_eq!(nb.graph.edges().len(), 0);
        assert_eq!(nb.to_global, vec![2]);
    }

    #[test]
    fn radius_one_from_clause_is_clause_plus_vars() {
        let phi = Formula::from_clauses(
            4,
            3,
            &[vec![Literal::new(0, true), Literal::new(1, false), Literal::new(1, true)]],
        )
        .unwrap();
        let g = build_factor_graph(&phi, 2);
        let nb = neighborhood(&g, g.clause_vertex(0), 1);
        // clause plus 2 distinct variables, 3 parallel-capable edges
        assert_eq!(nb.graph.n_clauses(), 1);
        assert_eq!(nb.graph.n_vars(), 2);
        assert_eq!(nb.graph.edges().len(), 3);
    }

    #[test]
    fn path_neighborhood_hand_enumeration() {
        // path v0 - c0 - v1 - c1 - v2 as a 2-SAT-ish chain
        let phi = Formula::from_clauses(
            3,
            2,
            &[
                vec![Literal::new(0, true), Literal::new(1, true)],
                vec![Literal::new(1, true), Literal::new(2, true)],
            ],
        )
        .unwrap();
        let g = build_factor_graph(&phi, 3);
        let nb = neighborhood(&g, 0, 2);
        let mut globals = nb.to_global.clone();
        globals.sort();
        assert_eq!(globals, vec![0, 1, g.clause_vertex(0)]);
        // the edge c0-v1 is on a length-2 path; c1 excluded entirely
        assert_eq!(nb.graph.edges().len(), 2);
    }

    #[test]
    fn neighborhood_monotone_in_radius() {
        let phi = sample_formula(30, 35, 3, 9).unwrap();
        let g = build_factor_graph(&phi, 9);
        for root in [0usize, 5, 12] {
            for r in 0..4 {
                let a: std::collections::HashSet<_> =
                    neighborhood(&g, root, r).to_global.iter().copied().collect();
                let b: std::collections::HashSet<_> =
                    neighborhood(&g, root, r + 1).to_global.iter().copied().collect();
                assert!(a.is_subset(&b));
            }
        }
    }

    #[test]
    fn canonical_form_is_relabeling_invariant() {
        // exact certificate equality across >= 1000 random relabelings
        let mut rng = Rng64::from_seed(0xc0ffee);
        let mut cases = 0;
        for seed in 0..100u64 {
            let phi = sample_formula(12, 14, 3, seed).unwrap();
            let g = build_factor_graph(&phi, seed ^ 1);
            for root in [0usize, 3, 7] {
                let base = neighborhood(&g, root, 2).certificate().to_vec();
                for _ in 0..4 {
                    let (h, vperm, _) = relabel(&g, &mut rng);
                    let nb = neighborhood(&h, vperm[root], 2);
                    assert_eq!(nb.certificate(), &base[..], "seed {seed} root {root}");
                    cases += 1;
                }
            }
        }
        assert!(cases >= 1000);
    }

    #[test]
    fn certificates_distinguish_polarity() {
        let a = Formula::from_clauses(2, 2, &[vec![Literal::new(0, true), Literal::new(1, true)]])
            .unwrap();
        let b = Formula::from_clauses(2, 2, &[vec![Literal::new(0, false), Literal::new(1, true)]])
            .unwrap();
        // same decorations via same seed: graphs differ only in polarity
        let ga = build_factor_graph(&a, 4);
        let gb = build_factor_graph(&b, 4);
        assert_ne!(
            neighborhood(&ga, 0, 1).certificate(),
            neighborhood(&gb, 0, 1).certificate()
        );
    }

    #[test]
    fn locally_small_empty_graph() {
        let g = DecoratedFactorGraph::from_parts(2, 0, vec![], vec![1, 2]).unwrap();
        assert!(is_r_locally_small(&g, 3));
    }

    #[test]
    fn locally_small_star_counterexample() {
        // n=8, k=4, m=2, both clauses share v0: |N_2(v0)| > 8^(1/3) = 2
        let phi = Formula::from_clauses(
            8,
            4,
            &[
                vec![
                    Literal::new(0, false),
                    Literal::new(1, false),
                    Literal::new(2, false),
                    Literal::new(3, false),
                ],
                vec![
                    Literal::new(0, false),
                    Literal::new(4, false),
                    Literal::new(5, false),
                    Literal::new(6, false),
                ],
            ],
        )
        .unwrap();
        let g = build_factor_graph(&phi, 0);
        assert!(!is_r_locally_small(&g, 2));
    }
}

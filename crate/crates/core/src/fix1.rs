//! Phase 1 of Coja-Oghlan's Fix heuristic, as a direct sequential
//! procedure and as a registered 3-local memory rule.
//!
//! Starting from the all-true assignment, the procedure scans clauses in a
//! rerandomized order; each all-negative clause not already touching Z
//! contributes one variable to Z (a Z-safe one from the first half of its
//! shuffled literals when possible, the middle slot otherwise). The output
//! sets Z false and everything else true.
//!
//! Clause order comes from the clause vertices' priority words and literal
//! order from the edge decoration words, so the direct run and the memory
//! rule couple bit-for-bit.

use crate::assignment::Assignment;
use crate::engine::{MemoryView, VertexHandle};
use crate::error::{Error, Result};
use crate::formula::Formula;
use crate::graph::{build_factor_graph, derive_psi, DecoratedFactorGraph};
use crate::rules::MemoryRule;
use serde::Serialize;

/// Memory code marking membership in Z.
pub const MU_IN_Z: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Fix1Branch {
    /// Clause already contained a Z variable; nothing added.
    ContainsZ,
    /// Slot j (1-based position in the shuffled literal order) held a
    /// Z-safe variable.
    SafeAt { j: usize, var: u32 },
    /// No Z-safe variable among the first ceil(k/2)-1 shuffled slots; the
    /// variable at slot ceil(k/2) was added.
    Fallback { var: u32 },
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceEntry {
    pub clause: u32,
    pub branch: Fix1Branch,
}

#[derive(Debug, Clone)]
pub struct Fix1Run {
    pub assignment: Assignment,
    /// z[i] iff variable i was set false.
    pub z: Vec<bool>,
    /// Per all-negative-clause decision log, in processing order.
    pub trace: Vec<TraceEntry>,
}

impl Fix1Run {
    pub fn z_size(&self) -> usize {
        self.z.iter().filter(|&&b| b).count()
    }
}

/// True iff, under the assignment that is T off Z and F on Z, variable
/// `var` is not the sole true literal occurrence of any clause.
pub fn is_z_safe(var: u32, z: &[bool], phi: &Formula) -> Result<bool> {
    if z.len() != phi.n() {
        return Err(Error::LengthMismatch { left: z.len(), right: phi.n() });
    }
    if z[var as usize] {
        return Err(Error::Contract(format!("is_z_safe queried for {var} already in Z")));
    }
    for clause in phi.clauses() {
        let mut true_count = 0usize;
        let mut lone_on_var = false;
        for lit in clause {
            let truthy = lit.positive != z[lit.var as usize];
            if truthy {
                true_count += 1;
                lone_on_var = lit.var == var;
                if true_count > 1 {
                    break;
                }
            }
        }
        if true_count == 1 && lone_on_var {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Direct Fix1 with clause and literal orders drawn from `seed`.
pub fn run_fix1(phi: &Formula, seed: u64) -> Result<Fix1Run> {
    let g = build_factor_graph(phi, seed);
    run_fix1_on_graph(phi, &g)
}

/// Direct Fix1 with orders taken from an existing decoration assignment,
/// for coupling against the memory rule.
pub fn run_fix1_on_graph(phi: &Formula, g: &DecoratedFactorGraph) -> Result<Fix1Run> {
    let (n, m, k) = (phi.n(), phi.m(), phi.k());
    if k < 3 {
        return Err(Error::InvalidArgument("fix1 requires k >= 3".into()));
    }
    let half = k.div_ceil(2);

    // occurrence lists for the Z-safety scan
    let mut occ: Vec<Vec<u32>> = vec![Vec::new(); n];
    for c in 0..m {
        for lit in phi.clause(c) {
            occ[lit.var as usize].push(c as u32);
        }
    }
    let z_safe = |var: u32, z: &[bool]| -> bool {
        for &c in &occ[var as usize] {
            let mut true_count = 0usize;
            let mut lone_on_var = false;
            for lit in phi.clause(c as usize) {
                let truthy = lit.positive != z[lit.var as usize];
                if truthy {
                    true_count += 1;
                    lone_on_var = lit.var == var;
                    if true_count > 1 {
                        break;
                    }
                }
            }
            if true_count == 1 && lone_on_var {
                return false;
            }
        }
        true
    };

    let mut clause_order: Vec<usize> = (0..m).collect();
    clause_order.sort_by_key(|&c| (g.psi(g.clause_vertex(c)), c));

    let mut z = vec![false; n];
    let mut trace = Vec::new();
    for &c in &clause_order {
        let lits = phi.clause(c);
        if lits.iter().any(|l| l.positive) {
            continue;
        }
        if lits.iter().any(|l| z[l.var as usize]) {
            trace.push(TraceEntry { clause: c as u32, branch: Fix1Branch::ContainsZ });
            continue;
        }
        // shuffled literal order: slots sorted by edge decoration word
        let mut slots: Vec<usize> = (0..k).collect();
        slots.sort_by_key(|&s| edge_word(g, c, s));
        let mut chosen = None;
        for (pos, &s) in slots.iter().enumerate().take(half - 1) {
            let var = lits[s].var;
            if z_safe(var, &z) {
                chosen = Some((pos + 1, var));
                break;
            }
        }
        let branch = match chosen {
            Some((j, var)) => {
                z[var as usize] = true;
                Fix1Branch::SafeAt { j, var }
            }
            None => {
                let var = lits[slots[half - 1]].var;
                z[var as usize] = true;
                Fix1Branch::Fallback { var }
            }
        };
        trace.push(TraceEntry { clause: c as u32, branch });
    }

    let assignment = Assignment::from_bools(&z.iter().map(|&b| !b).collect::<Vec<_>>());
    Ok(Fix1Run { assignment, z, trace })
}

fn edge_word(g: &DecoratedFactorGraph, clause: usize, slot: usize) -> u64 {
    let cv = g.clause_vertex(clause);
    let ei = g
        .incident(cv)
        .iter()
        .copied()
        .find(|&ei| g.edge(ei).slot as usize == slot)
        .expect("slot present");
    g.edge(ei).word
}

/// Fix1 as a 3-local memory rule: clause vertices act in priority order,
/// literals ordered by edge decoration, mu(v) = 1 encoding membership in Z.
pub struct Fix1MemoryRule;

pub fn fix1_as_memory_rule() -> Fix1MemoryRule {
    Fix1MemoryRule
}

impl MemoryRule for Fix1MemoryRule {
    fn radius(&self) -> usize {
        3
    }

    fn process(&self, view: &mut MemoryView<'_>) -> Result<()> {
        let root = view.root();
        if view.is_var(root) {
            return Ok(());
        }
        let mut edges = view.edges(root)?;
        if edges.iter().any(|e| e.positive) {
            return Ok(());
        }
        if edges.iter().any(|e| view.mu(e.other) == MU_IN_Z) {
            return Ok(());
        }
        edges.sort_by_key(|e| e.word);
        let k = edges.len();
        let half = k.div_ceil(2);
        if half < 2 {
            return Err(Error::Contract("fix1 memory rule requires k >= 3".into()));
        }
        for e in edges.iter().take(half - 1) {
            if z_safe_in_view(view, e.other)? {
                view.set_mu(e.other, MU_IN_Z);
                return Ok(());
            }
        }
        view.set_mu(edges[half - 1].other, MU_IN_Z);
        Ok(())
    }

    fn finalize(&self, mu: u64) -> bool {
        mu != MU_IN_Z // T off Z, F on Z
    }
}

/// Z-safety within the 3-ball: `var` sits at distance 1 from the clause
/// root, its clauses at distance 2, their variables at distance 3.
fn z_safe_in_view(view: &MemoryView<'_>, var: VertexHandle) -> Result<bool> {
    for e2 in view.edges(var)? {
        let clause = e2.other;
        let mut true_count = 0usize;
        let mut lone_on_var = false;
        for e3 in view.edges(clause)? {
            let in_z = view.mu(e3.other) == MU_IN_Z;
            let truthy = e3.positive != in_z;
            if truthy {
                true_count += 1;
                lone_on_var = view.same_vertex(e3.other, var);
                if true_count > 1 {
                    break;
                }
            }
        }
        if true_count == 1 && lone_on_var {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::Value;
    use crate::engine::run_local_memory;
    use crate::formula::{sample_formula, Literal};

    fn neg(v: u32) -> Literal {
        Literal::new(v, false)
    }

    fn pos(v: u32) -> Literal {
        Literal::new(v, true)
    }

    #[test]
    fn z_safe_on_empty_formula() {
        let phi = Formula::new(3, 0, 3, vec![]).unwrap();
        let z = vec![false; 3];
        for var in 0..3 {
            assert!(is_z_safe(var, &z, &phi).unwrap());
        }
    }

    #[test]
    fn z_safe_hand_cases() {
        // (x0 OR NOT x1 OR NOT x2): under all-true, x0 is the sole true literal
        let phi = Formula::from_clauses(3, 3, &[vec![pos(0), neg(1), neg(2)]]).unwrap();
        let z = vec![false; 3];
        assert!(!is_z_safe(0, &z, &phi).unwrap());
        // (NOT x0 OR NOT x1 OR NOT x2): no true literal at all under all-true
        let phi2 = Formula::from_clauses(3, 3, &[vec![neg(0), neg(1), neg(2)]]).unwrap();
        assert!(is_z_safe(0, &z, &phi2).unwrap());
    }

    #[test]
    fn z_safe_rejects_queries_inside_z() {
        let phi = Formula::from_clauses(2, 3, &[vec![neg(0), neg(1), neg(0)]]).unwrap();
        let z = vec![true, false];
        assert!(is_z_safe(0, &z, &phi).is_err());
    }

    #[test]
    fn all_positive_formula_keeps_z_empty() {
        let phi = Formula::from_clauses(
            4,
            3,
            &[vec![pos(0), pos(1), pos(2)], vec![pos(1), pos(2), pos(3)]],
        )
        .unwrap();
        let run = run_fix1(&phi, 9).unwrap();
        assert_eq!(run.z_size(), 0);
        assert_eq!(run.assignment, Assignment::all_true(4));
        assert!(run.trace.is_empty());

        let g = build_factor_graph(&phi, 9);
        let x = run_local_memory(&Fix1MemoryRule, &g).unwrap();
        assert_eq!(x, Assignment::all_true(4));
    }

    #[test]
    fn single_all_negative_clause_is_satisfied() {
        let phi = Formula::from_clauses(3, 3, &[vec![neg(0), neg(1), neg(2)]]).unwrap();
        for seed in 0..16 {
            let run = run_fix1(&phi, seed).unwrap();
            assert_eq!(run.z_size(), 1);
            assert!(phi.clause_satisfied(0, &run.assignment), "seed {seed}");
            // with Z empty and no other clauses, slot 1 of the shuffle is
            // always Z-safe
            assert!(matches!(run.trace[0].branch, Fix1Branch::SafeAt { j: 1, .. }));
        }
    }

    #[test]
    fn invariants_on_random_instances() {
        for seed in 0..30u64 {
            let phi = sample_formula(40, 80, 3, seed).unwrap();
            let run = run_fix1(&phi, seed ^ 0xf1f1).unwrap();
            // Z only holds variables of all-negative clauses
            let mut in_all_neg = vec![false; 40];
            for c in phi.clauses() {
                if c.iter().all(|l| !l.positive) {
                    for l in c {
                        in_all_neg[l.var as usize] = true;
                    }
                }
            }
            for v in 0..40 {
                assert!(!run.z[v] || in_all_neg[v], "seed {seed} var {v}");
            }
            // each processed all-negative clause is satisfied by the output
            for t in &run.trace {
                assert!(
                    phi.clause_satisfied(t.clause as usize, &run.assignment),
                    "seed {seed} clause {}",
                    t.clause
                );
            }
            // determinism
            let again = run_fix1(&phi, seed ^ 0xf1f1).unwrap();
            assert_eq!(run.assignment, again.assignment);
            assert_eq!(run.z, again.z);
        }
    }

    #[test]
    fn trace_counts_match_z_growth() {
        let phi = sample_formula(30, 90, 3, 5).unwrap();
        let run = run_fix1(&phi, 5).unwrap();
        let added = run
            .trace
            .iter()
            .filter(|t| !matches!(t.branch, Fix1Branch::ContainsZ))
            .count();
        assert_eq!(added, run.z_size());
    }

    #[test]
    fn memory_rule_agrees_with_direct_run() {
        for seed in 0..200u64 {
            let phi = sample_formula(40, 60, 3, seed).unwrap();
            let g = build_factor_graph(&phi, seed ^ 0x99);
            let direct = run_fix1_on_graph(&phi, &g).unwrap();
            let memory = run_local_memory(&Fix1MemoryRule, &g).unwrap();
            assert_eq!(direct.assignment, memory, "seed {seed}");
        }
    }

    #[test]
    fn memory_rule_through_whole_graph_simulation() {
        use crate::engine::{r_local_simulation, run_local};
        use std::sync::Arc;
        for seed in 0..10u64 {
            let phi = sample_formula(12, 18, 3, seed).unwrap();
            let g = build_factor_graph(&phi, seed);
            let direct = run_fix1_on_graph(&phi, &g).unwrap();
            let sim = r_local_simulation(Arc::new(Fix1MemoryRule), 40).unwrap();
            let x = run_local(&sim, &g).unwrap();
            assert_eq!(direct.assignment, x, "seed {seed}");
        }
    }

    #[test]
    fn k8_output_mostly_true() {
        let phi = sample_formula(200, 600, 8, 3).unwrap();
        let run = run_fix1(&phi, 3).unwrap();
        let f_count = (0..200).filter(|&i| run.assignment.get(i) == Value::F).count();
        assert_eq!(f_count, run.z_size());
        assert!(f_count < 100);
    }
}

//! Local decision rules and the name-keyed rule registry.
//!
//! A rule only ever sees a canonical [`RootedNeighborhood`], so any
//! deterministic implementation is automatically isomorphism-invariant.
//! Rules are registered by name with versioned parameters so that run
//! manifests can reference them reproducibly.

use crate::engine::MemoryView;
use crate::error::{Error, Result};
use crate::graph::derive_coin;
use crate::nbhd::RootedNeighborhood;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// r-local rule with codomain {T, F}.
pub trait BoolLocalRule: Send + Sync {
    fn radius(&self) -> usize;
    fn evaluate(&self, nbhd: &RootedNeighborhood) -> Result<bool>;
}

/// r-local rule with codomain [0, 1], used by the sequential engine.
pub trait ProbLocalRule: Send + Sync {
    fn radius(&self) -> usize;
    fn evaluate(&self, nbhd: &RootedNeighborhood) -> Result<f64>;
}

/// r-local memory subroutine plus finalizer, per the local-memory engine.
/// `process` is invoked once per vertex (variables and clauses alike) in
/// increasing processing-priority order and may edit the memory map only
/// inside the radius-r ball exposed by the view.
pub trait MemoryRule: Send + Sync {
    fn radius(&self) -> usize;
    fn process(&self, view: &mut MemoryView<'_>) -> Result<()>;
    /// f2: memory value of a variable vertex -> output symbol.
    fn finalize(&self, mu: u64) -> bool;
}

/// Registry identity: `name` or `name:key=value,key=value`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleId {
    pub name: String,
    pub params: BTreeMap<String, String>,
}

impl RuleId {
    pub fn parse(s: &str) -> Result<RuleId> {
        let (name, rest) = match s.split_once(':') {
            Some((n, r)) => (n, Some(r)),
            None => (s, None),
        };
        if name.is_empty() {
            return Err(Error::InvalidArgument("empty rule name".into()));
        }
        let mut params = BTreeMap::new();
        if let Some(rest) = rest {
            for kv in rest.split(',').filter(|p| !p.is_empty()) {
                let (k, v) = kv.split_once('=').ok_or_else(|| {
                    Error::InvalidArgument(format!("bad rule parameter `{kv}` (want key=value)"))
                })?;
                params.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(RuleId { name: name.to_string(), params })
    }

    fn usize_param(&self, key: &str, default: usize) -> Result<usize> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("parameter {key}={v} not an integer"))),
        }
    }

    fn f64_param(&self, key: &str, default: f64) -> Result<f64> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("parameter {key}={v} not a number"))),
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        if !self.params.is_empty() {
            let parts: Vec<String> =
                self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            write!(f, ":{}", parts.join(","))?;
        }
        Ok(())
    }
}

/// Registry schema version, recorded in run manifests.
pub const RULE_REGISTRY_VERSION: u32 = 1;

pub fn make_bool_rule(id: &RuleId) -> Result<Arc<dyn BoolLocalRule>> {
    match id.name.as_str() {
        "const-true" => Ok(Arc::new(ConstRule(true))),
        "const-false" => Ok(Arc::new(ConstRule(false))),
        "majority" => Ok(Arc::new(MajorityPolarity)),
        other => Err(Error::InvalidArgument(format!("unknown {{T,F}} rule `{other}`"))),
    }
}

pub fn make_prob_rule(id: &RuleId) -> Result<Arc<dyn ProbLocalRule>> {
    match id.name.as_str() {
        "const-prob" => Ok(Arc::new(ConstProb(id.f64_param("p", 1.0)?))),
        "biased-majority" => Ok(Arc::new(BiasedMajority)),
        "unit-aware" => Ok(Arc::new(UnitAware)),
        "bp" => Ok(Arc::new(BpDecimation {
            radius: id.usize_param("radius", 2)?,
            iters: id.usize_param("iters", 4)?,
        })),
        other => Err(Error::InvalidArgument(format!("unknown probability rule `{other}`"))),
    }
}

// ---------------------------------------------------------------------
// Built-in {T,F} rules
// ---------------------------------------------------------------------

/// Constant output, radius 0.
pub struct ConstRule(pub bool);

impl BoolLocalRule for ConstRule {
    fn radius(&self) -> usize {
        0
    }

    fn evaluate(&self, _nbhd: &RootedNeighborhood) -> Result<bool> {
        Ok(self.0)
    }
}

/// T iff strictly more positive than negative incident edges; ties are
/// broken by a coin derived from the root decoration word.
pub struct MajorityPolarity;

impl BoolLocalRule for MajorityPolarity {
    fn radius(&self) -> usize {
        1
    }

    fn evaluate(&self, nbhd: &RootedNeighborhood) -> Result<bool> {
        let g = &nbhd.graph;
        let root = nbhd.root;
        let pos = g.incident(root).iter().filter(|&&e| g.edge(e).positive).count();
        let neg = g.degree(root) - pos;
        if pos != neg {
            return Ok(pos > neg);
        }
        Ok(derive_coin(g.vertex_word(root)) < 0.5)
    }
}

// ---------------------------------------------------------------------
// Built-in probability rules
// ---------------------------------------------------------------------

pub struct ConstProb(pub f64);

impl ProbLocalRule for ConstProb {
    fn radius(&self) -> usize {
        0
    }

    fn evaluate(&self, _nbhd: &RootedNeighborhood) -> Result<f64> {
        Ok(self.0.clamp(0.0, 1.0))
    }
}

/// Laplace-smoothed occurrence bias: (#positive + 1) / (degree + 2).
pub struct BiasedMajority;

impl ProbLocalRule for BiasedMajority {
    fn radius(&self) -> usize {
        1
    }

    fn evaluate(&self, nbhd: &RootedNeighborhood) -> Result<f64> {
        let g = &nbhd.graph;
        let root = nbhd.root;
        let pos = g.incident(root).iter().filter(|&&e| g.edge(e).positive).count();
        Ok((pos as f64 + 1.0) / (g.degree(root) as f64 + 2.0))
    }
}

/// Follow an incident unit clause when one exists (a clause of degree 1 in
/// the current graph forces its literal), otherwise fall back to the
/// occurrence bias. Radius 2: clause degrees are only visible when the
/// clauses' other edges are inside the ball.
pub struct UnitAware;

impl ProbLocalRule for UnitAware {
    fn radius(&self) -> usize {
        2
    }

    fn evaluate(&self, nbhd: &RootedNeighborhood) -> Result<f64> {
        let g = &nbhd.graph;
        let root = nbhd.root;
        for &ei in g.incident(root) {
            let e = g.edge(ei);
            let c = g.clause_vertex(e.clause as usize);
            if g.degree(c) == 1 {
                return Ok(if e.positive { 1.0 } else { 0.0 });
            }
        }
        BiasedMajority.evaluate(nbhd)
    }
}

/// Belief-propagation marginal with a bounded number of sum-product
/// rounds on the radius-r ball; the sequential engine turns this into
/// BP-guided decimation.
pub struct BpDecimation {
    pub radius: usize,
    pub iters: usize,
}

impl ProbLocalRule for BpDecimation {
    fn radius(&self) -> usize {
        self.radius
    }

    fn evaluate(&self, nbhd: &RootedNeighborhood) -> Result<f64> {
        let g = &nbhd.graph;
        let root = nbhd.root;
        let ne = g.edges().len();
        if g.degree(root) == 0 {
            return Ok(0.5);
        }
        // t[e]: probability (under the var->clause message) that the edge's
        // variable falsifies its literal in that clause
        let mut t = vec![0.5f64; ne];
        let mut t_next = vec![0.5f64; ne];
        for _ in 0..self.iters {
            for (ei, e) in g.edges().iter().enumerate() {
                let v = e.var as usize;
                let mut w_true = 1.0f64;
                let mut w_false = 1.0f64;
                for &fi in g.incident(v) {
                    if fi as usize == ei {
                        continue;
                    }
                    let f = g.edge(fi);
                    let c = g.clause_vertex(f.clause as usize);
                    // product over other vars of c of their falsify prob
                    let mut all_false = 1.0f64;
                    for &gi in g.incident(c) {
                        if gi == fi {
                            continue;
                        }
                        all_false *= t[gi as usize];
                    }
                    // eta_{c->v}(x_v): 1 unless x_v falsifies its literal in
                    // c and every other variable of c falsifies too
                    let eta_when_falsify = 1.0 - all_false;
                    if f.positive {
                        w_false *= eta_when_falsify;
                    } else {
                        w_true *= eta_when_falsify;
                    }
                }
                // message for edge ei: P[x_v falsifies literal in e.clause]
                let (num, den) = if e.positive {
                    (w_false, w_true + w_false)
                } else {
                    (w_true, w_true + w_false)
                };
                t_next[ei] = if den > 0.0 { num / den } else { 0.5 };
            }
            std::mem::swap(&mut t, &mut t_next);
        }
        // root marginal
        let mut w_true = 1.0f64;
        let mut w_false = 1.0f64;
        for &fi in g.incident(root) {
            let f = g.edge(fi);
            let c = g.clause_vertex(f.clause as usize);
            let mut all_false = 1.0f64;
            for &gi in g.incident(c) {
                if gi == fi {
                    continue;
                }
                all_false *= t[gi as usize];
            }
            let eta_when_falsify = 1.0 - all_false;
            if f.positive {
                w_false *= eta_when_falsify;
            } else {
                w_true *= eta_when_falsify;
            }
        }
        let den = w_true + w_false;
        Ok(if den > 0.0 { (w_true / den).clamp(0.0, 1.0) } else { 0.5 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_id_round_trip() {
        let id = RuleId::parse("bp:iters=4,radius=2").unwrap();
        assert_eq!(id.name, "bp");
        assert_eq!(id.to_string(), "bp:iters=4,radius=2");
        assert_eq!(RuleId::parse("majority").unwrap().to_string(), "majority");
        assert!(RuleId::parse("bp:iters").is_err());
    }

    #[test]
    fn unknown_rule_is_an_error() {
        assert!(make_bool_rule(&RuleId::parse("nope").unwrap()).is_err());
        assert!(make_prob_rule(&RuleId::parse("nope").unwrap()).is_err());
    }
}

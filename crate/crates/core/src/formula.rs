//! k-CNF formulas over n variables: the m x k literal table, the uniform
//! ensemble, satisfaction predicates, and the one-hot encoding.

use crate::assignment::{Assignment, Value};
use crate::error::{Error, Result};
use crate::rng::SeedStream;
use serde::{Deserialize, Serialize};

/// A literal: variable index plus polarity (`true` = positive occurrence).
///
/// The literal identifier `2*var + polarity` fixes a total order on the 2n
/// literals; slot `(i, j)` of a formula holds literal `L(k(i-1)+j)` in the
/// lexicographic slot order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub var: u32,
    pub positive: bool,
}

impl Literal {
    pub fn new(var: u32, positive: bool) -> Self {
        Literal { var, positive }
    }

    pub fn id(self) -> u32 {
        2 * self.var + u32::from(self.positive)
    }

    pub fn from_id(id: u32) -> Self {
        Literal { var: id / 2, positive: id % 2 == 1 }
    }

    /// Truth value under `x`; `None` when the variable is err.
    pub fn eval(self, x: &Assignment) -> Option<bool> {
        match x.get(self.var as usize) {
            Value::T => Some(self.positive),
            Value::F => Some(!self.positive),
            Value::Err => None,
        }
    }
}

/// An m x k table of literals; duplicates within a clause and duplicate
/// clauses are permitted, and slot order is significant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Formula {
    n: usize,
    m: usize,
    k: usize,
    /// Row-major m x k literal table.
    literals: Vec<Literal>,
}

impl Formula {
    pub fn new(n: usize, m: usize, k: usize, literals: Vec<Literal>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimensions("n must be >= 1".into()));
        }
        if k == 0 {
            return Err(Error::InvalidDimensions("k must be >= 1".into()));
        }
        if literals.len() != m * k {
            return Err(Error::InvalidDimensions(format!(
                "expected {} literals, got {}",
                m * k,
                literals.len()
            )));
        }
        if let Some(l) = literals.iter().find(|l| l.var as usize >= n) {
            return Err(Error::InvalidDimensions(format!(
                "literal variable {} out of range for n={n}",
                l.var
            )));
        }
        Ok(Formula { n, m, k, literals })
    }

    pub fn from_clauses(n: usize, k: usize, clauses: &[Vec<Literal>]) -> Result<Self> {
        let mut literals = Vec::with_capacity(clauses.len() * k);
        for c in clauses {
            if c.len() != k {
                return Err(Error::InvalidDimensions(format!(
                    "clause width {} != k={k}",
                    c.len()
                )));
            }
            literals.extend_from_slice(c);
        }
        Formula::new(n, clauses.len(), k, literals)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn literal(&self, clause: usize, slot: usize) -> Literal {
        self.literals[clause * self.k + slot]
    }

    pub fn set_literal(&mut self, clause: usize, slot: usize, l: Literal) {
        assert!((l.var as usize) < self.n);
        self.literals[clause * self.k + slot] = l;
    }

    pub fn clause(&self, clause: usize) -> &[Literal] {
        &self.literals[clause * self.k..(clause + 1) * self.k]
    }

    pub fn clauses(&self) -> impl Iterator<Item = &[Literal]> {
        self.literals.chunks_exact(self.k)
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    /// Lexicographic slot index in `[0, km)` of `(clause, slot)`.
    pub fn slot_index(&self, clause: usize, slot: usize) -> usize {
        clause * self.k + slot
    }

    /// Inverse of [`Formula::slot_index`].
    pub fn slot_position(&self, index: usize) -> (usize, usize) {
        (index / self.k, index % self.k)
    }

    /// True iff some literal of the clause evaluates true; err variables
    /// never satisfy a literal.
    pub fn clause_satisfied(&self, clause: usize, x: &Assignment) -> bool {
        self.clause(clause).iter().any(|l| l.eval(x) == Some(true))
    }

    pub fn satisfied_count(&self, x: &Assignment) -> usize {
        (0..self.m).filter(|&i| self.clause_satisfied(i, x)).count()
    }

    pub fn unsatisfied_count(&self, x: &Assignment) -> usize {
        self.m - self.satisfied_count(x)
    }
}

/// Sample from the uniform ensemble: each of the m*k slots drawn
/// independently and uniformly from the 2n literals.
pub fn sample_formula(n: usize, m: usize, k: usize, seed: u64) -> Result<Formula> {
    sample_formula_stream(n, m, k, SeedStream::new(seed).derive_str("formula"))
}

pub fn sample_formula_stream(n: usize, m: usize, k: usize, stream: SeedStream) -> Result<Formula> {
    if n == 0 {
        return Err(Error::InvalidDimensions("n must be >= 1".into()));
    }
    if k == 0 {
        return Err(Error::InvalidDimensions("k must be >= 1".into()));
    }
    let mut rng = stream.rng();
    let literals = (0..m * k)
        .map(|_| Literal::from_id(rng.below(2 * n as u64) as u32))
        .collect();
    Formula::new(n, m, k, literals)
}

/// `m = floor(alpha * n)`.
pub fn clause_count(n: usize, alpha: f64) -> usize {
    (alpha * n as f64).floor() as usize
}

/// True iff `x` (err-free) satisfies at least `(1 - nu) * m` clauses.
pub fn nu_satisfies(x: &Assignment, phi: &Formula, nu: f64) -> Result<bool> {
    if x.has_err() {
        return Err(Error::ErrSymbolPresent);
    }
    if x.len() != phi.n() {
        return Err(Error::LengthMismatch { left: x.len(), right: phi.n() });
    }
    if !(0.0..=1.0).contains(&nu) {
        return Err(Error::InvalidArgument(format!("nu={nu} outside [0,1]")));
    }
    let sat = phi.satisfied_count(x) as f64;
    Ok(sat >= (1.0 - nu) * phi.m() as f64)
}

/// Outcome of the (eta, nu)-satisfaction decision procedure.
#[derive(Debug, Clone, PartialEq)]
pub enum EtaNuOutcome {
    /// A witness y in {T,F}^n with Delta(x, y) <= eta that nu-satisfies phi.
    Satisfies(Assignment),
    No,
    /// The exact search space exceeded the budget and the greedy repair
    /// found no witness; the answer is unknown.
    BudgetExceeded,
}

/// Exact search budget: number of candidate repairs enumerated before the
/// procedure degrades to greedy repair with a refusal flag.
pub const ETA_NU_SEARCH_BUDGET: u64 = 1_000_000;

/// Decide whether some y within Hamming eta of x nu-satisfies phi.
///
/// Exhaustive over repair sets when the candidate count fits the budget;
/// otherwise a greedy repair which can certify `Satisfies` but not `No`.
pub fn eta_nu_satisfies(x: &Assignment, phi: &Formula, eta: f64, nu: f64) -> Result<EtaNuOutcome> {
    if x.len() != phi.n() {
        return Err(Error::LengthMismatch { left: x.len(), right: phi.n() });
    }
    if !(0.0..=1.0).contains(&eta) || !(0.0..=1.0).contains(&nu) {
        return Err(Error::InvalidArgument("eta, nu must lie in [0,1]".into()));
    }
    let n = phi.n();
    let budget = (eta * n as f64).floor() as usize;
    let errs: Vec<usize> = (0..n).filter(|&i| x.get(i).is_err()).collect();
    // More than eta*n err entries can never be repaired within distance eta.
    if errs.len() > budget {
        return Ok(EtaNuOutcome::No);
    }
    let flips_left = budget - errs.len();
    let free: Vec<usize> = (0..n).filter(|&i| !x.get(i).is_err()).collect();

    let candidates = count_candidates(errs.len(), free.len(), flips_left);
    if candidates <= ETA_NU_SEARCH_BUDGET {
        let mut y_base = x.clone();
        for &i in &errs {
            y_base.set(i, Value::T);
        }
        if let Some(y) = exhaustive_repair(&mut y_base, phi, nu, &errs, &free, flips_left) {
            return Ok(EtaNuOutcome::Satisfies(y));
        }
        return Ok(EtaNuOutcome::No);
    }

    match greedy_repair(x, phi, nu, &errs, flips_left) {
        Some(y) => Ok(EtaNuOutcome::Satisfies(y)),
        None => Ok(EtaNuOutcome::BudgetExceeded),
    }
}

fn count_candidates(errs: usize, free: usize, flips: usize) -> u64 {
    // 2^errs value choices for err positions times sum_{j<=flips} C(free, j)
    // flip sets. Saturates at u64::MAX.
    let mut total: u64 = 0;
    let mut binom: f64 = 1.0;
    for j in 0..=flips.min(free) {
        if j > 0 {
            binom = binom * (free - j + 1) as f64 / j as f64;
        }
        total = total.saturating_add(if binom > u64::MAX as f64 { u64::MAX } else { binom as u64 });
    }
    if errs >= 63 {
        return u64::MAX;
    }
    total.saturating_mul(1u64 << errs)
}

fn exhaustive_repair(
    y: &mut Assignment,
    phi: &Formula,
    nu: f64,
    errs: &[usize],
    free: &[usize],
    flips_left: usize,
) -> Option<Assignment> {
    // Enumerate err values first, then flip sets of the remaining budget.
    fn errs_rec(
        y: &mut Assignment,
        phi: &Formula,
        nu: f64,
        errs: &[usize],
        free: &[usize],
        flips_left: usize,
    ) -> Option<Assignment> {
        match errs.split_first() {
            None => flips_rec(y, phi, nu, free, 0, flips_left),
            Some((&i, rest)) => {
                for v in [Value::T, Value::F] {
                    y.set(i, v);
                    if let Some(w) = errs_rec(y, phi, nu, rest, free, flips_left) {
                        return Some(w);
                    }
                }
                None
            }
        }
    }

    fn flips_rec(
        y: &mut Assignment,
        phi: &Formula,
        nu: f64,
        free: &[usize],
        start: usize,
        flips_left: usize,
    ) -> Option<Assignment> {
        if nu_satisfies(y, phi, nu).unwrap_or(false) {
            return Some(y.clone());
        }
        if flips_left == 0 {
            return None;
        }
        for idx in start..free.len() {
            let i = free[idx];
            let old = y.get(i);
            let new = if old == Value::T { Value::F } else { Value::T };
            y.set(i, new);
            if let Some(w) = flips_rec(y, phi, nu, free, idx + 1, flips_left - 1) {
                return Some(w);
            }
            y.set(i, old);
        }
        None
    }

    errs_rec(y, phi, nu, errs, free, flips_left)
}

fn greedy_repair(
    x: &Assignment,
    phi: &Formula,
    nu: f64,
    errs: &[usize],
    flips_left: usize,
) -> Option<Assignment> {
    let n = phi.n();
    let mut y = x.clone();
    // Occurrence lists once; repair loop flips the best single variable.
    let mut occ: Vec<Vec<usize>> = vec![Vec::new(); n];
    for c in 0..phi.m() {
        for l in phi.clause(c) {
            occ[l.var as usize].push(c);
        }
    }
    for &i in errs {
        y.set(i, Value::T);
        let gain_t = occ[i].iter().filter(|&&c| phi.clause_satisfied(c, &y)).count();
        y.set(i, Value::F);
        let gain_f = occ[i].iter().filter(|&&c| phi.clause_satisfied(c, &y)).count();
        y.set(i, if gain_t >= gain_f { Value::T } else { Value::F });
    }
    let mut flipped = vec![false; n];
    for _ in 0..flips_left {
        if nu_satisfies(&y, phi, nu).unwrap_or(false) {
            return Some(y);
        }
        let mut best: Option<(usize, i64)> = None;
        for i in 0..n {
            if flipped[i] || x.get(i).is_err() {
                continue;
            }
            let before = occ[i].iter().filter(|&&c| phi.clause_satisfied(c, &y)).count() as i64;
            let old = y.get(i);
            y.set(i, if old == Value::T { Value::F } else { Value::T });
            let after = occ[i].iter().filter(|&&c| phi.clause_satisfied(c, &y)).count() as i64;
            y.set(i, old);
            let gain = after - before;
            if best.map_or(true, |(_, g)| gain > g) {
                best = Some((i, gain));
            }
        }
        match best {
            Some((i, _)) => {
                let old = y.get(i);
                y.set(i, if old == Value::T { Value::F } else { Value::T });
                flipped[i] = true;
            }
            None => break,
        }
    }
    if nu_satisfies(&y, phi, nu).unwrap_or(false) {
        Some(y)
    } else {
        None
    }
}

/// One-hot encoding of a formula: N = m*k*2n indicator bits, bit
/// `(i, j, s)` set iff clause i, slot j holds literal id s.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OneHotEncoding {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub bits: Vec<bool>,
}

impl OneHotEncoding {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn index(&self, clause: usize, slot: usize, literal_id: u32) -> usize {
        (clause * self.k + slot) * 2 * self.n + literal_id as usize
    }
}

pub fn encode_one_hot(phi: &Formula) -> OneHotEncoding {
    let (n, m, k) = (phi.n(), phi.m(), phi.k());
    let mut bits = vec![false; m * k * 2 * n];
    for c in 0..m {
        for s in 0..k {
            let idx = (c * k + s) * 2 * n + phi.literal(c, s).id() as usize;
            bits[idx] = true;
        }
    }
    OneHotEncoding { n, m, k, bits }
}

pub fn decode_one_hot(enc: &OneHotEncoding) -> Result<Formula> {
    let (n, m, k) = (enc.n, enc.m, enc.k);
    if enc.bits.len() != m * k * 2 * n {
        return Err(Error::Malformed("one-hot vector has wrong length".into()));
    }
    let mut literals = Vec::with_capacity(m * k);
    for slot in 0..m * k {
        let window = &enc.bits[slot * 2 * n..(slot + 1) * 2 * n];
        let mut found = None;
        for (s, &bit) in window.iter().enumerate() {
            if bit {
                if found.is_some() {
                    return Err(Error::Malformed(format!(
                        "slot {slot} has more than one bit set"
                    )));
                }
                found = Some(s as u32);
            }
        }
        match found {
            Some(id) => literals.push(Literal::from_id(id)),
            None => {
                return Err(Error::Malformed(format!("slot {slot} has no bit set")));
            }
        }
    }
    Formula::new(n, m, k, literals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::hamming_delta;

    fn lit(var: u32, positive: bool) -> Literal {
        Literal::new(var, positive)
    }

    #[test]
    fn literal_id_round_trip() {
        for id in 0..20 {
            assert_eq!(Literal::from_id(id).id(), id);
        }
        assert_eq!(lit(3, true).id(), 7);
        assert_eq!(lit(3, false).id(), 6);
    }

    #[test]
    fn sample_single_slot_is_one_of_two_literals() {
        for seed in 0..32 {
            let phi = sample_formula(1, 1, 1, seed).unwrap();
            assert_eq!(phi.literal(0, 0).var, 0);
        }
        // both polarities occur
        let polarities: Vec<bool> =
            (0..64).map(|s| sample_formula(1, 1, 1, s).unwrap().literal(0, 0).positive).collect();
        assert!(polarities.iter().any(|&p| p));
        assert!(polarities.iter().any(|&p| !p));
    }

    #[test]
    fn sample_is_deterministic() {
        let a = sample_formula(2, 3, 2, 99).unwrap();
        let b = sample_formula(2, 3, 2, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_rejects_zero_n() {
        assert!(sample_formula(0, 1, 1, 0).is_err());
    }

    #[test]
    fn nu_satisfies_threshold_arithmetic() {
        // m = 4 clauses on one variable; exactly 3 satisfied by T.
        let phi = Formula::from_clauses(
            1,
            1,
            &[vec![lit(0, true)], vec![lit(0, true)], vec![lit(0, true)], vec![lit(0, false)]],
        )
        .unwrap();
        let x = Assignment::all_true(1);
        assert!(nu_satisfies(&x, &phi, 0.25).unwrap());
        assert!(!nu_satisfies(&x, &phi, 0.2).unwrap());
    }

    #[test]
    fn nu_satisfies_rejects_err() {
        let phi = Formula::from_clauses(1, 1, &[vec![lit(0, true)]]).unwrap();
        let x = Assignment::new(vec![Value::Err]);
        assert!(matches!(nu_satisfies(&x, &phi, 0.0), Err(Error::ErrSymbolPresent)));
    }

    #[test]
    fn nu_satisfies_vs_direct_clause_evaluation() {
        // random instances against the direct clause-evaluation oracle
        for seed in 0..20 {
            let phi = sample_formula(8, 20, 3, seed).unwrap();
            let mut rng = crate::rng::Rng64::from_seed(seed ^ 0xabc);
            let x = Assignment::from_bools(&(0..8).map(|_| rng.bool()).collect::<Vec<_>>());
            let sat = (0..20)
                .filter(|&c| phi.clause(c).iter().any(|l| l.eval(&x) == Some(true)))
                .count();
            for nu_steps in 0..=20 {
                let nu = nu_steps as f64 / 20.0;
                assert_eq!(
                    nu_satisfies(&x, &phi, nu).unwrap(),
                    sat as f64 >= (1.0 - nu) * 20.0,
                );
            }
        }
    }

    #[test]
    fn eta_nu_too_many_errs_is_forced_no() {
        let phi = sample_formula(10, 5, 3, 1).unwrap();
        let eta = 0.2; // budget = 2
        let mut x = Assignment::all_true(10);
        for i in 0..3 {
            x.set(i, Value::Err);
        }
        assert_eq!(eta_nu_satisfies(&x, &phi, eta, 0.0).unwrap(), EtaNuOutcome::No);
    }

    #[test]
    fn eta_nu_exact_satisfier_is_its_own_witness() {
        let phi = Formula::from_clauses(2, 2, &[vec![lit(0, true), lit(1, false)]]).unwrap();
        let x = Assignment::from_bools(&[true, false]);
        match eta_nu_satisfies(&x, &phi, 0.0, 0.0).unwrap() {
            EtaNuOutcome::Satisfies(y) => assert_eq!(y, x),
            other => panic!("expected witness, got {other:?}"),
        }
    }

    #[test]
    fn eta_nu_matches_exhaustive_flip_oracle() {
        // n=10, k=3, m=15, eta=0.2 (budget 2): compare against a direct
        // enumeration over all <=2-flip repairs.
        for seed in 0..15 {
            let phi = sample_formula(10, 15, 3, seed).unwrap();
            let mut rng = crate::rng::Rng64::from_seed(seed ^ 0x517);
            let x = Assignment::from_bools(&(0..10).map(|_| rng.bool()).collect::<Vec<_>>());
            let got = eta_nu_satisfies(&x, &phi, 0.2, 0.0).unwrap();

            let mut oracle = false;
            'outer: for a in 0..10usize {
                for b in a..10usize {
                    let mut y = x.clone();
                    let flip = |y: &mut Assignment, i: usize| {
                        let v = y.get(i);
                        y.set(i, if v == Value::T { Value::F } else { Value::T });
                    };
                    if a != b {
                        flip(&mut y, a);
                        flip(&mut y, b);
                    } else {
                        flip(&mut y, a);
                    }
                    if nu_satisfies(&y, &phi, 0.0).unwrap() {
                        oracle = true;
                        break 'outer;
                    }
                }
            }
            oracle = oracle || nu_satisfies(&x, &phi, 0.0).unwrap();
            match got {
                EtaNuOutcome::Satisfies(y) => {
                    assert!(oracle, "witness found but oracle says no (seed {seed})");
                    assert!(hamming_delta(&x, &y).unwrap() <= 0.2 + 1e-12);
                    assert!(nu_satisfies(&y, &phi, 0.0).unwrap());
                }
                EtaNuOutcome::No => assert!(!oracle, "oracle found repair, search did not (seed {seed})"),
                EtaNuOutcome::BudgetExceeded => panic!("budget should not trip at this size"),
            }
        }
    }

    #[test]
    fn one_hot_single_clause() {
        let phi = Formula::from_clauses(1, 1, &[vec![lit(0, false)]]).unwrap();
        let enc = encode_one_hot(&phi);
        // N = m * k * 2n = 2 for a single unit clause on one variable
        assert_eq!(enc.len(), 2);
        assert_eq!(enc.popcount(), 1);
        assert!(enc.bits[0]); // literal id 0 = negative occurrence of var 0
        assert_eq!(decode_one_hot(&enc).unwrap(), phi);
    }

    #[test]
    fn decode_rejects_invalid_vectors() {
        let phi = Formula::from_clauses(1, 1, &[vec![lit(0, false)]]).unwrap();
        let mut enc = encode_one_hot(&phi);
        enc.bits[0] = false; // all-zero slot
        assert!(decode_one_hot(&enc).is_err());
        enc.bits[0] = true;
        enc.bits[1] = true; // two bits in one slot
        assert!(decode_one_hot(&enc).is_err());
    }
}

//! Overlap profiles, overlap and conditional overlap entropies, the
//! Hamming-to-entropy stability check, and the forbidden-structure
//! scanner.
//!
//! A profile is stored as exact coordinate counts (rationals with
//! denominator n); entropies are evaluated in double precision from the
//! counts, summed over the sorted count multiset so that identities like
//! duplication invariance hold bitwise.

use crate::assignment::{hamming_delta, Assignment, Value};
use crate::error::{Error, Result};
use crate::formula::{nu_satisfies, Formula};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Distribution over unordered bipartitions of {0..l-1}, keyed by the side
/// containing index 0, encoded as a bitmask (bit 0 always set).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapProfile {
    ell: usize,
    n: u64,
    counts: BTreeMap<u64, u64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileJson {
    l: usize,
    n: u64,
    entries: Vec<ProfileEntryJson>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileEntryJson {
    mask: u64,
    num: u64,
}

impl OverlapProfile {
    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn entries(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counts.iter().map(|(&m, &c)| (m, c))
    }

    pub fn count(&self, mask: u64) -> u64 {
        self.counts.get(&mask).copied().unwrap_or(0)
    }

    pub fn probability(&self, mask: u64) -> f64 {
        self.count(mask) as f64 / self.n as f64
    }

    pub fn n_entries(&self) -> usize {
        self.counts.len()
    }

    pub fn to_json(&self) -> String {
        let entries = self
            .counts
            .iter()
            .map(|(&mask, &num)| ProfileEntryJson { mask, num })
            .collect();
        serde_json::to_string(&ProfileJson { l: self.ell, n: self.n, entries }).unwrap()
    }

    pub fn from_json(s: &str) -> Result<OverlapProfile> {
        let parsed: ProfileJson =
            serde_json::from_str(s).map_err(|e| Error::Malformed(e.to_string()))?;
        let mut counts = BTreeMap::new();
        for e in parsed.entries {
            if e.mask & 1 == 0 {
                return Err(Error::Malformed("profile mask must contain index 0".into()));
            }
            counts.insert(e.mask, e.num);
        }
        if counts.values().sum::<u64>() != parsed.n {
            return Err(Error::Malformed("profile counts must sum to n".into()));
        }
        Ok(OverlapProfile { ell: parsed.l, n: parsed.n, counts })
    }
}

/// Exact overlap profile of a list of err-free assignments.
pub fn profile(ys: &[&Assignment]) -> Result<OverlapProfile> {
    let ell = ys.len();
    if ell == 0 || ell > 63 {
        return Err(Error::InvalidArgument("need between 1 and 63 assignments".into()));
    }
    let n = ys[0].len();
    for y in ys {
        if y.len() != n {
            return Err(Error::LengthMismatch { left: n, right: y.len() });
        }
        if y.has_err() {
            return Err(Error::ErrSymbolPresent);
        }
    }
    if n == 0 {
        return Err(Error::InvalidArgument("empty assignments".into()));
    }
    let mut counts = BTreeMap::new();
    for i in 0..n {
        let base = ys[0].get(i);
        let mut mask = 1u64;
        for (t, y) in ys.iter().enumerate().skip(1) {
            if y.get(i) == base {
                mask |= 1 << t;
            }
        }
        *counts.entry(mask).or_insert(0u64) += 1;
    }
    Ok(OverlapProfile { ell, n: n as u64, counts })
}

/// Overlap entropy in nats, summed over the sorted count multiset so the
/// value depends only on the multiset of probabilities.
pub fn entropy(pi: &OverlapProfile) -> f64 {
    let mut counts: Vec<u64> = pi.counts.values().copied().collect();
    counts.sort_unstable();
    let n = pi.n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Binary entropy H(x) = -x ln x - (1-x) ln(1-x), with 0 ln 0 = 0.
pub fn binary_entropy(x: f64) -> f64 {
    let mut h = 0.0;
    if x > 0.0 {
        h -= x * x.ln();
    }
    if x < 1.0 {
        h -= (1.0 - x) * (1.0 - x).ln();
    }
    h
}

/// Conditional overlap entropy H(pi(new | prev...)) by the defining
/// formula: the profile of the predecessors weights the two-point entropy
/// of which side the new assignment joins.
pub fn conditional_entropy(prev: &[&Assignment], new: &Assignment) -> Result<f64> {
    if prev.is_empty() {
        return Err(Error::InvalidArgument("need at least one predecessor".into()));
    }
    let n = prev[0].len();
    if new.len() != n {
        return Err(Error::LengthMismatch { left: n, right: new.len() });
    }
    if new.has_err() {
        return Err(Error::ErrSymbolPresent);
    }
    // joint key: predecessor mask plus which side `new` joins
    let mut joint: BTreeMap<(u64, bool), u64> = BTreeMap::new();
    for i in 0..n {
        let base = prev[0].get(i);
        let mut mask = 1u64;
        for (t, y) in prev.iter().enumerate().skip(1) {
            if y.get(i) == base {
                mask |= 1 << t;
            }
        }
        let joins_zero_side = new.get(i) == base;
        *joint.entry((mask, joins_zero_side)).or_insert(0) += 1;
    }
    let mut by_mask: BTreeMap<u64, (u64, u64)> = BTreeMap::new();
    for (&(mask, joins), &c) in &joint {
        let e = by_mask.entry(mask).or_insert((0, 0));
        if joins {
            e.0 += c;
        } else {
            e.1 += c;
        }
    }
    let nf = n as f64;
    Ok(by_mask
        .values()
        .map(|&(c1, c0)| {
            let total = c1 + c0;
            (total as f64 / nf) * binary_entropy(c1 as f64 / total as f64)
        })
        .sum())
}

/// Result of the Hamming-to-entropy stability comparison.
#[derive(Debug, Clone, Copy)]
pub struct GapCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// False when Delta(x, x') > 1/2, where the bound does not apply.
    pub applicable: bool,
}

/// Check |H(pi(x | ys)) - H(pi(x' | ys))| <= H(Delta(x, x')).
pub fn hamming_entropy_gap_check(
    x: &Assignment,
    x_prime: &Assignment,
    ys: &[&Assignment],
) -> Result<GapCheck> {
    let delta = hamming_delta(x, x_prime)?;
    if delta > 0.5 {
        return Ok(GapCheck { lhs: f64::NAN, rhs: f64::NAN, holds: false, applicable: false });
    }
    let hx = conditional_entropy(ys, x)?;
    let hx_prime = conditional_entropy(ys, x_prime)?;
    let lhs = (hx - hx_prime).abs();
    let rhs = binary_entropy(delta);
    Ok(GapCheck { lhs, rhs, holds: lhs <= rhs + 1e-12, applicable: true })
}

// ---------------------------------------------------------------------
// Forbidden-structure scanner
// ---------------------------------------------------------------------

/// Conditional-entropy band [beta_minus log k / k, beta_plus log k / k].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OgpBandSpec {
    pub beta_minus: f64,
    pub beta_plus: f64,
    pub k: usize,
}

impl OgpBandSpec {
    pub fn new(beta_minus: f64, beta_plus: f64, k: usize) -> Result<Self> {
        if !(1.0 < beta_minus && beta_minus < beta_plus) {
            return Err(Error::InvalidArgument(format!(
                "need 1 < beta_minus < beta_plus, got [{beta_minus}, {beta_plus}]"
            )));
        }
        if k < 2 {
            return Err(Error::InvalidArgument("band needs k >= 2".into()));
        }
        Ok(OgpBandSpec { beta_minus, beta_plus, k })
    }

    pub fn low(&self) -> f64 {
        self.beta_minus * (self.k as f64).ln() / self.k as f64
    }

    pub fn high(&self) -> f64 {
        self.beta_plus * (self.k as f64).ln() / self.k as f64
    }

    pub fn contains(&self, h: f64) -> bool {
        (self.low()..=self.high()).contains(&h)
    }
}

/// One accepted element of the forbidden structure.
#[derive(Debug, Clone)]
pub struct ScanElement {
    pub t: usize,
    pub conditional_entropy: f64,
    /// nu-satisfaction of the witness against its aligned formula, when
    /// formulas were supplied.
    pub nu_satisfied: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct ScanOutcome {
    /// t_0 = 0 plus the accepted steps, in order; `None` until the scan
    /// has collected band.k accepted elements.
    pub witness: Option<Vec<ScanElement>>,
    /// Conditional entropy h(t) for every inspected step.
    pub trace: Vec<(usize, f64)>,
}

/// Greedy moat scan: t_0 = 0, then t_l is the first t > t_{l-1} whose
/// conditional overlap entropy relative to the accepted predecessors lies
/// in the band. When `formulas` are supplied they must align with
/// `outputs`, and each accepted element is checked for nu-satisfaction.
pub fn scan_forbidden_structure(
    outputs: &[Assignment],
    band: &OgpBandSpec,
    nu: f64,
    formulas: Option<&[Formula]>,
) -> Result<ScanOutcome> {
    if outputs.is_empty() {
        return Err(Error::InvalidArgument("empty output sequence".into()));
    }
    if let Some(fs) = formulas {
        if fs.len() != outputs.len() {
            return Err(Error::LengthMismatch { left: fs.len(), right: outputs.len() });
        }
    }
    let mut accepted: Vec<&Assignment> = vec![&outputs[0]];
    let mut elements = vec![ScanElement {
        t: 0,
        conditional_entropy: 0.0,
        nu_satisfied: formulas.map(|fs| nu_satisfies(&outputs[0], &fs[0], nu).unwrap_or(false)),
    }];
    let mut trace = Vec::new();
    for (t, out) in outputs.iter().enumerate().skip(1) {
        if elements.len() > band.k {
            break;
        }
        let h = conditional_entropy(&accepted, out)?;
        trace.push((t, h));
        if band.contains(h) {
            elements.push(ScanElement {
                t,
                conditional_entropy: h,
                nu_satisfied: formulas.map(|fs| nu_satisfies(out, &fs[t], nu).unwrap_or(false)),
            });
            accepted.push(out);
        }
    }
    let witness = if elements.len() == band.k + 1 { Some(elements) } else { None };
    Ok(ScanOutcome { witness, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng64;

    fn asg(s: &str) -> Assignment {
        Assignment::new(
            s.chars()
                .map(|c| match c {
                    'T' => Value::T,
                    'F' => Value::F,
                    _ => Value::Err,
                })
                .collect(),
        )
    }

    fn random_asg(n: usize, rng: &mut Rng64) -> Assignment {
        Assignment::from_bools(&(0..n).map(|_| rng.bool()).collect::<Vec<_>>())
    }

    #[test]
    fn identical_assignments_are_a_point_mass() {
        let y = asg("TTFF");
        let pi = profile(&[&y, &y, &y]).unwrap();
        assert_eq!(pi.n_entries(), 1);
        assert_eq!(pi.count(0b111), 4);
        assert_eq!(entropy(&pi), 0.0);
    }

    #[test]
    fn quarter_profile_hand_count() {
        // y0=TTTT, y1=TTFF, y2=TFTF: all four agreement categories equal 1/4
        let y0 = asg("TTTT");
        let y1 = asg("TTFF");
        let y2 = asg("TFTF");
        let pi = profile(&[&y0, &y1, &y2]).unwrap();
        assert_eq!(pi.count(0b111), 1); // all equal
        assert_eq!(pi.count(0b011), 1); // y2 differs
        assert_eq!(pi.count(0b101), 1); // y1 differs
        assert_eq!(pi.count(0b001), 1); // y0 alone
        assert!((entropy(&pi) - 4.0f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn two_assignment_profile_entropy_log2() {
        let y0 = asg("TTFF");
        let y1 = asg("TFTF");
        let pi = profile(&[&y0, &y1]).unwrap();
        assert!((entropy(&pi) - 2.0f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn exhaustive_pairs_match_direct_definition() {
        // all 64 pairs at n=3 against the definition computed by hand logic
        for a in 0..8u32 {
            for b in 0..8u32 {
                let y0 = Assignment::from_bools(&[(a & 1) != 0, (a & 2) != 0, (a & 4) != 0]);
                let y1 = Assignment::from_bools(&[(b & 1) != 0, (b & 2) != 0, (b & 4) != 0]);
                let pi = profile(&[&y0, &y1]).unwrap();
                let agree = (0..3).filter(|&i| y0.get(i) == y1.get(i)).count() as u64;
                assert_eq!(pi.count(0b11), agree);
                assert_eq!(pi.count(0b01), 3 - agree);
            }
        }
    }

    #[test]
    fn profile_rejects_err_symbols() {
        let y0 = asg("TTe");
        let y1 = asg("TTT");
        assert!(matches!(profile(&[&y0, &y1]), Err(Error::ErrSymbolPresent)));
    }

    #[test]
    fn profile_sums_to_n_and_entry_bound() {
        let mut rng = Rng64::from_seed(5);
        for _ in 0..50 {
            let ys: Vec<Assignment> = (0..4).map(|_| random_asg(17, &mut rng)).collect();
            let refs: Vec<&Assignment> = ys.iter().collect();
            let pi = profile(&refs).unwrap();
            assert_eq!(pi.entries().map(|(_, c)| c).sum::<u64>(), 17);
            assert!(pi.n_entries() <= 1 << 3);
        }
    }

    #[test]
    fn chain_rule_identity() {
        let mut rng = Rng64::from_seed(7);
        for _ in 0..200 {
            let ys: Vec<Assignment> = (0..4).map(|_| random_asg(32, &mut rng)).collect();
            let prev: Vec<&Assignment> = ys[..3].iter().collect();
            let all: Vec<&Assignment> = ys.iter().collect();
            let lhs = entropy(&profile(&all).unwrap()) - entropy(&profile(&prev).unwrap());
            let rhs = conditional_entropy(&prev, &ys[3]).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12, "residual {}", (lhs - rhs).abs());
        }
    }

    #[test]
    fn duplicate_assignment_contributes_zero_conditional_entropy() {
        let mut rng = Rng64::from_seed(9);
        for _ in 0..50 {
            let ys: Vec<Assignment> = (0..3).map(|_| random_asg(20, &mut rng)).collect();
            let prev: Vec<&Assignment> = ys.iter().collect();
            // conditioning set already contains the duplicate
            let h = conditional_entropy(&prev, &ys[1]).unwrap();
            assert_eq!(h, 0.0);
        }
    }

    #[test]
    fn duplication_leaves_entropy_unchanged_exactly() {
        let mut rng = Rng64::from_seed(11);
        for _ in 0..50 {
            let ys: Vec<Assignment> = (0..3).map(|_| random_asg(24, &mut rng)).collect();
            let without: Vec<&Assignment> = ys.iter().collect();
            let with_dup: Vec<&Assignment> =
                vec![&ys[0], &ys[1], &ys[1], &ys[2]];
            let a = entropy(&profile(&without).unwrap());
            let b = entropy(&profile(&with_dup).unwrap());
            assert_eq!(a, b, "duplication must be exact");
        }
    }

    #[test]
    fn conditional_entropy_of_fair_coin_near_log2() {
        let mut rng = Rng64::from_seed(13);
        let n = 40_000;
        let y0 = random_asg(n, &mut rng);
        let y1 = random_asg(n, &mut rng);
        let h = conditional_entropy(&[&y0], &y1).unwrap();
        // 3 sigma on the plug-in entropy estimate at this n
        assert!((h - 2.0f64.ln()).abs() < 0.005, "h = {h}");
    }

    #[test]
    fn gap_check_trivial_and_single_flip() {
        let x = asg("TTTT");
        let ys = [&x];
        let gc = hamming_entropy_gap_check(&x, &x, &ys).unwrap();
        assert!(gc.applicable && gc.holds);
        assert_eq!(gc.lhs, 0.0);
        assert_eq!(gc.rhs, 0.0);

        let n = 100;
        let a = Assignment::all_true(n);
        let mut b = Assignment::all_true(n);
        b.set(0, Value::F);
        let gc = hamming_entropy_gap_check(&a, &b, &[&a]).unwrap();
        assert!((gc.rhs - binary_entropy(0.01)).abs() < 1e-15);
        assert!(gc.holds);
    }

    #[test]
    fn gap_check_inapplicable_beyond_half() {
        let a = Assignment::all_true(4);
        let b = Assignment::all_false(4);
        let gc = hamming_entropy_gap_check(&a, &b, &[&a]).unwrap();
        assert!(!gc.applicable);
    }

    #[test]
    fn gap_check_random_sweep() {
        let mut rng = Rng64::from_seed(15);
        for _ in 0..2000 {
            let n = 8 + rng.usize_below(57);
            let ell = 1 + rng.usize_below(4);
            let ys: Vec<Assignment> = (0..ell).map(|_| random_asg(n, &mut rng)).collect();
            let refs: Vec<&Assignment> = ys.iter().collect();
            let x = random_asg(n, &mut rng);
            // perturb x in a few coordinates
            let mut xp = x.clone();
            let flips = rng.usize_below(n / 2 + 1);
            for _ in 0..flips {
                let i = rng.usize_below(n);
                let v = xp.get(i);
                xp.set(i, if v == Value::T { Value::F } else { Value::T });
            }
            let gc = hamming_entropy_gap_check(&x, &xp, &refs).unwrap();
            if gc.applicable {
                assert!(gc.holds, "lhs {} rhs {}", gc.lhs, gc.rhs);
            }
        }
    }

    #[test]
    fn band_spec_validation() {
        assert!(OgpBandSpec::new(3.0, 2.0, 8).is_err());
        assert!(OgpBandSpec::new(0.5, 2.0, 8).is_err());
        let band = OgpBandSpec::new(2.0, 3.0, 8).unwrap();
        assert!(band.low() < band.high());
    }

    #[test]
    fn scanner_rejects_constant_sequences() {
        let outputs: Vec<Assignment> = (0..10).map(|_| Assignment::all_true(50)).collect();
        let band = OgpBandSpec::new(1.2, 2.0, 4).unwrap();
        let res = scan_forbidden_structure(&outputs, &band, 0.0, None).unwrap();
        assert!(res.witness.is_none());
        assert!(res.trace.iter().all(|&(_, h)| h == 0.0));
    }

    #[test]
    fn scanner_finds_crossing_on_bit_ramp() {
        // outputs step one bit per t from all-T toward an independent
        // random string; the entropy ramps from 0 to ~log 2 without
        // band-jumping, so the scan finds an in-band step
        let n = 200;
        let mut rng = Rng64::from_seed(17);
        let target = random_asg(n, &mut rng);
        let mut outputs = vec![Assignment::all_true(n)];
        let mut cur = Assignment::all_true(n);
        for i in 0..n {
            if target.get(i) == Value::F {
                cur.set(i, Value::F);
            }
            outputs.push(cur.clone());
        }
        // reachable band below log 2: H in [0.600, 0.687]
        let band = OgpBandSpec::new(2.01, 2.30, 6).unwrap();
        let res = scan_forbidden_structure(&outputs, &band, 0.0, None).unwrap();
        assert!(
            res.trace.iter().any(|&(_, h)| band.contains(h)),
            "ramp must pass through the band"
        );
    }
}

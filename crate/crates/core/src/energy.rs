//! The multi-overlap energy functional E_I |{y^l[I]}| with exact and
//! Monte Carlo evaluators, its identity with the pattern-hit
//! probabilities p(sigma), the per-level decoupling inequalities, and the
//! free-entropy bracket.

use crate::assignment::Assignment;
use crate::error::{Error, Result};
use crate::overlap::{entropy, OverlapProfile};
use crate::rng::SeedStream;

pub const DEFAULT_EXACT_BUDGET: u64 = 1 << 24;

#[derive(Debug, Clone, Copy)]
pub enum EnergyMode {
    /// Group coordinates into distinct column types and enumerate the
    /// c^k column-type tuples with multiplicity weights.
    ExactColumns { budget: u64 },
    /// Sample index tuples I uniformly from [n]^k.
    MonteCarlo { samples: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy)]
pub struct EnergyResult {
    pub value: f64,
    /// Standard error of the estimate; zero in exact mode.
    pub std_error: f64,
}

/// Column type of coordinate i: bit l set iff ys[l] is T at i.
fn column_types(ys: &[&Assignment]) -> Result<Vec<(u64, u64)>> {
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
    let mut counts = std::collections::BTreeMap::new();
    for i in 0..n {
        let mut t = 0u64;
        for (l, y) in ys.iter().enumerate() {
            if y.get(i) == crate::assignment::Value::T {
                t |= 1 << l;
            }
        }
        *counts.entry(t).or_insert(0u64) += 1;
    }
    Ok(counts.into_iter().collect())
}

/// Number of distinct rows of the (ell x k) bit matrix whose columns are
/// the given types.
fn distinct_rows(types: &[u64], ell: usize) -> u32 {
    let mut rows: Vec<u64> = (0..ell)
        .map(|l| {
            let mut row = 0u64;
            for (j, &t) in types.iter().enumerate() {
                if (t >> l) & 1 == 1 {
                    row |= 1 << j;
                }
            }
            row
        })
        .collect();
    rows.sort_unstable();
    rows.dedup();
    rows.len() as u32
}

/// E_{I ~ unif([n]^k)} |{y^l[I] : l}| for the given assignments.
pub fn energy(ys: &[&Assignment], k: usize, mode: EnergyMode) -> Result<EnergyResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    match mode {
        EnergyMode::ExactColumns { budget } => {
            let types = column_types(ys)?;
            energy_exact_from_types(&types, ys.len(), ys[0].len() as u64, k, budget)
        }
        EnergyMode::MonteCarlo { samples, seed } => {
            let n = ys[0].len();
            let ell = ys.len();
            let mut rng = SeedStream::new(seed).derive_str("energy-mc").rng();
            let mut total = 0f64;
            let mut total_sq = 0f64;
            let mut cols = vec![0u64; k];
            for y in ys {
                if y.has_err() {
                    return Err(Error::ErrSymbolPresent);
                }
            }
            for _ in 0..samples {
                for c in cols.iter_mut() {
                    let i = rng.usize_below(n);
                    let mut t = 0u64;
                    for (l, y) in ys.iter().enumerate() {
                        if y.get(i) == crate::assignment::Value::T {
                            t |= 1 << l;
                        }
                    }
                    *c = t;
                }
                let d = distinct_rows(&cols, ell) as f64;
                total += d;
                total_sq += d * d;
            }
            let mean = total / samples as f64;
            let var = (total_sq / samples as f64 - mean * mean).max(0.0);
            Ok(EnergyResult { value: mean, std_error: (var / samples as f64).sqrt() })
        }
    }
}

fn energy_exact_from_types(
    types: &[(u64, u64)],
    ell: usize,
    n: u64,
    k: usize,
    budget: u64,
) -> Result<EnergyResult> {
    let c = types.len() as u64;
    let combos = c.checked_pow(k as u32).unwrap_or(u64::MAX);
    if combos > budget {
        return Err(Error::BudgetExceeded(format!(
            "exact-columns needs {c}^{k} tuples, budget {budget}"
        )));
    }
    let nf = n as f64;
    let mut value = 0f64;
    let mut tuple = vec![0usize; k];
    let mut type_bits = vec![0u64; k];
    loop {
        let mut weight = 1f64;
        for j in 0..k {
            let (bits, count) = types[tuple[j]];
            weight *= count as f64 / nf;
            type_bits[j] = bits;
        }
        value += weight * distinct_rows(&type_bits, ell) as f64;
        // odometer
        let mut j = 0;
        loop {
            if j == k {
                return Ok(EnergyResult { value, std_error: 0.0 });
            }
            tuple[j] += 1;
            if tuple[j] < types.len() {
                break;
            }
            tuple[j] = 0;
            j += 1;
        }
    }
}

/// Brute-force oracle: enumerate all n^k index tuples directly.
pub fn energy_brute_force(ys: &[&Assignment], k: usize, budget: u64) -> Result<f64> {
    let n = ys[0].len();
    let ell = ys.len();
    let combos = (n as u64).checked_pow(k as u32).unwrap_or(u64::MAX);
    if combos > budget {
        return Err(Error::BudgetExceeded(format!("n^k = {combos} over budget {budget}")));
    }
    let mut tuple = vec![0usize; k];
    let mut total = 0f64;
    let mut count = 0u64;
    loop {
        let mut rows: Vec<u64> = Vec::with_capacity(ell);
        for l in 0..ell {
            let mut row = 0u64;
            for (j, &i) in tuple.iter().enumerate() {
                if ys[l].get(i) == crate::assignment::Value::T {
                    row |= 1 << j;
                }
            }
            rows.push(row);
        }
        rows.sort_unstable();
        rows.dedup();
        total += rows.len() as f64;
        count += 1;
        let mut j = 0;
        loop {
            if j == k {
                return Ok(total / count as f64);
            }
            tuple[j] += 1;
            if tuple[j] < n {
                break;
            }
            tuple[j] = 0;
            j += 1;
        }
    }
}

/// p(sigma) for every sigma in {T,F}^k: the probability that sigma appears
/// among {y^l[I]}. Computed by inclusion-exclusion over subsets of
/// assignments, an evaluation route independent of the energy enumerator.
/// Index sigma as a k-bit mask with bit j set iff sigma_j = T.
pub fn pattern_hit_probabilities(ys: &[&Assignment], k: usize) -> Result<Vec<f64>> {
    let ell = ys.len();
    if ell == 0 || ell > 20 {
        return Err(Error::InvalidArgument("need between 1 and 20 assignments".into()));
    }
    let n = ys[0].len();
    let nf = n as f64;
    // m_L(b): fraction of coordinates where all assignments in L take value b
    let subsets = 1usize << ell;
    let mut m_t = vec![0f64; subsets];
    let mut m_f = vec![0f64; subsets];
    for lset in 1..subsets {
        let mut ct = 0u64;
        let mut cf = 0u64;
        for i in 0..n {
            let mut all_t = true;
            let mut all_f = true;
            for (l, y) in ys.iter().enumerate() {
                if lset >> l & 1 == 1 {
                    match y.get(i) {
                        crate::assignment::Value::T => all_f = false,
                        crate::assignment::Value::F => all_t = false,
                        crate::assignment::Value::Err => return Err(Error::ErrSymbolPresent),
                    }
                }
            }
            ct += u64::from(all_t);
            cf += u64::from(all_f);
        }
        m_t[lset] = ct as f64 / nf;
        m_f[lset] = cf as f64 / nf;
    }
    let mut out = vec![0f64; 1 << k];
    for (sigma, slot) in out.iter_mut().enumerate() {
        let mut p = 0f64;
        for lset in 1..subsets {
            let sign = if (lset.count_ones() % 2) == 1 { 1.0 } else { -1.0 };
            let mut prod = 1f64;
            for j in 0..k {
                prod *= if (sigma >> j) & 1 == 1 { m_t[lset] } else { m_f[lset] };
            }
            p += sign * prod;
        }
        *slot = p;
    }
    Ok(out)
}

/// The closed-form lower bound sum_l (1 - beta_l e^{-(beta_l - 1)}) for the
/// per-level energy contributions.
pub fn energy_lower_bound(betas: &[f64]) -> Result<f64> {
    for &b in betas {
        if b <= 1.0 {
            return Err(Error::InvalidArgument(format!("beta {b} must exceed 1")));
        }
    }
    Ok(betas.iter().map(|&b| 1.0 - b * (-(b - 1.0)).exp()).sum())
}

// ---------------------------------------------------------------------
// Decoupling inequalities
// ---------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DecouplingReport {
    /// Truncation threshold 1/(k log k) applies to clause width >= 4 only;
    /// below that the regime is flagged degenerate but still evaluated.
    pub degenerate: bool,
    /// p_l(sigma) for l = 0..=L, sigma over k-bit masks.
    pub p: Vec<Vec<f64>>,
    /// q_l(sigma) for l = 1..=L.
    pub q: Vec<Vec<f64>>,
    /// per-(l, sigma) slack of p_l >= (1 - 1/(k log k)) p_{l-1} + q_l
    pub aux_slack_min: f64,
    /// per-sigma slack of p_L >= (1 - 1/log k) sum_l q_l
    pub total_slack_min: f64,
    pub aux_holds: bool,
    pub total_holds: bool,
}

/// Exact evaluation of the decoupling inequalities on a small instance.
///
/// Assignments are normalized relative to y^0 (agreement with the base is
/// treated as T), matching the convention that fixes y^0 to the all-true
/// string; the energy and profile quantities are invariant under this
/// normalization.
pub fn decoupling_check(ys: &[&Assignment], k: usize, budget: u64) -> Result<DecouplingReport> {
    let levels = ys.len().saturating_sub(1);
    if levels == 0 {
        return Err(Error::InvalidArgument("need at least two assignments".into()));
    }
    if k < 2 {
        return Err(Error::InvalidArgument("k must be >= 2".into()));
    }
    let n = ys[0].len();
    let combos = (n as u64).checked_pow(k as u32).unwrap_or(u64::MAX);
    if combos > budget {
        return Err(Error::BudgetExceeded(format!("n^k = {combos} over budget {budget}")));
    }
    // z-normalize: z^l[i] = (ys[l][i] == ys[0][i]); z^0 = all true
    let mut z = vec![vec![false; n]; ys.len()];
    for i in 0..n {
        let base = ys[0].get(i);
        if base == crate::assignment::Value::Err {
            return Err(Error::ErrSymbolPresent);
        }
        for (l, y) in ys.iter().enumerate() {
            if y.len() != n {
                return Err(Error::LengthMismatch { left: n, right: y.len() });
            }
            z[l][i] = y.get(i) == base;
        }
    }

    let kf = k as f64;
    let lnk = kf.ln();
    let degenerate = k <= 3;
    let trunc = 1.0 / (kf * lnk);

    // histories: hist[l][i] = bits (z^1_i .. z^l_i)
    let hist_bits = |l: usize, i: usize| -> u64 {
        let mut h = 0u64;
        for t in 1..=l {
            if z[t][i] {
                h |= 1 << (t - 1);
            }
        }
        h
    };

    // phi_l(b | xi): empirical conditionals
    // p_l(sigma): exact enumeration over [n]^k
    let sigmas = 1usize << k;
    let mut p = vec![vec![0f64; sigmas]; levels + 1];
    let mut q = vec![vec![0f64; sigmas]; levels];

    // phi tables per level
    let mut phi: Vec<std::collections::HashMap<u64, (f64, f64)>> = Vec::new(); // hist -> (P[T|hist], count)
    for l in 1..=levels {
        let mut counts: std::collections::HashMap<u64, (u64, u64)> = std::collections::HashMap::new();
        for i in 0..n {
            let h = hist_bits(l - 1, i);
            let e = counts.entry(h).or_insert((0, 0));
            if z[l][i] {
                e.0 += 1;
            }
            e.1 += 1;
        }
        phi.push(
            counts
                .into_iter()
                .map(|(h, (t, tot))| (h, (t as f64 / tot as f64, tot as f64)))
                .collect(),
        );
    }

    // enumerate index tuples
    let mut tuple = vec![0usize; k];
    let total = combos as f64;
    loop {
        // per level: whether sigma == z^l[I] for this tuple, as a sigma mask
        // (sigma encoded with bit j = T at position j)
        let mut seen = vec![false; sigmas]; // sigma appeared among z^0..z^l
        for l in 0..=levels {
            let mut sigma = 0usize;
            for (j, &i) in tuple.iter().enumerate() {
                if z[l][i] {
                    sigma |= 1 << j;
                }
            }
            seen[sigma] = true;
            for (s, flag) in seen.iter().enumerate() {
                if *flag {
                    p[l][s] += 1.0;
                }
            }
        }
        // Q_l(sigma, I) for each level and sigma
        for l in 1..=levels {
            for sigma in 0..sigmas {
                let mut prod = 1f64;
                for (j, &i) in tuple.iter().enumerate() {
                    let h = hist_bits(l - 1, i);
                    let (pt, _) = phi[l - 1][&h];
                    let want_t = (sigma >> j) & 1 == 1;
                    prod *= if want_t { pt } else { 1.0 - pt };
                }
                if prod <= trunc {
                    q[l - 1][sigma] += prod;
                }
            }
        }
        let mut j = 0;
        loop {
            if j == k {
                // normalize and evaluate inequalities
                for row in p.iter_mut() {
                    for v in row.iter_mut() {
                        *v /= total;
                    }
                }
                for row in q.iter_mut() {
                    for v in row.iter_mut() {
                        *v /= total;
                    }
                }
                let mut aux_slack_min = f64::INFINITY;
                for l in 1..=levels {
                    for s in 0..sigmas {
                        let slack = p[l][s] - (1.0 - trunc) * p[l - 1][s] - q[l - 1][s];
                        aux_slack_min = aux_slack_min.min(slack);
                    }
                }
                let mut total_slack_min = f64::INFINITY;
                for s in 0..sigmas {
                    let qsum: f64 = (0..levels).map(|l| q[l][s]).sum();
                    let slack = p[levels][s] - (1.0 - 1.0 / lnk) * qsum;
                    total_slack_min = total_slack_min.min(slack);
                }
                return Ok(DecouplingReport {
                    degenerate,
                    aux_holds: aux_slack_min >= -1e-9,
                    total_holds: total_slack_min >= -1e-9,
                    p,
                    q,
                    aux_slack_min,
                    total_slack_min,
                });
            }
            tuple[j] += 1;
            if tuple[j] < n {
                break;
            }
            tuple[j] = 0;
            j += 1;
        }
    }
}

/// One evaluation of the free-entropy bracket log 2 + H(pi) - kappa
/// (log k / k) E(pi). The energy is a function of the profile alone,
/// because the distinct-pattern count is invariant under per-coordinate
/// value flips.
pub fn free_entropy_bracket(
    pi: &OverlapProfile,
    kappa: f64,
    k: usize,
    budget: u64,
) -> Result<f64> {
    let types: Vec<(u64, u64)> = pi.entries().collect();
    let e = energy_exact_from_types(&types, pi.ell(), pi.n(), k, budget)?;
    let kf = k as f64;
    Ok(2.0f64.ln() + entropy(pi) - kappa * kf.ln() / kf * e.value)
}

//! c-badness detection along output sequences and Monte Carlo influence
//! estimation for vector-valued algorithms on the one-hot formula
//! encoding.

use crate::error::{Error, Result};
use crate::formula::{sample_formula_stream, Formula, Literal};
use crate::rng::SeedStream;
use rayon::prelude::*;

/// Squared l2 jump between consecutive vectors.
fn jump_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Flag the steps t (1-based) where ||f_t - f_{t-1}||^2 > c * gamma_hat * n.
pub fn detect_c_bad(outputs: &[Vec<f64>], c: f64, gamma_hat: f64) -> Result<Vec<usize>> {
    if outputs.is_empty() {
        return Ok(Vec::new());
    }
    let n = outputs[0].len();
    for o in outputs {
        if o.len() != n {
            return Err(Error::LengthMismatch { left: n, right: o.len() });
        }
    }
    let threshold = c * gamma_hat * n as f64;
    Ok((1..outputs.len())
        .filter(|&t| jump_sq(&outputs[t], &outputs[t - 1]) > threshold)
        .collect())
}

/// Default reference-sample size for the normalization estimate.
pub const GAMMA_SAMPLES_DEFAULT: u64 = 256;

/// Monte Carlo estimate of gamma = E ||f(Phi)||^2 / len(f) with its
/// standard error; the normalization length is the output dimension.
pub fn estimate_gamma<F>(
    f: &F,
    n: usize,
    m: usize,
    k: usize,
    samples: u64,
    seed: u64,
) -> Result<(f64, f64)>
where
    F: Fn(&Formula) -> Vec<f64> + Sync,
{
    let stream = SeedStream::new(seed).derive_str("gamma");
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let phi = sample_formula_stream(n, m, k, stream.derive(s)).expect("dims");
            let out = f(&phi);
            out.iter().map(|x| x * x).sum::<f64>() / out.len() as f64
        })
        .collect();
    let mean = values.iter().sum::<f64>() / samples as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / samples as f64;
    Ok((mean, (var / samples as f64).sqrt()))
}

/// Wilson score interval for a binomial proportion at z = 1.96.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.96f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Debug, Clone)]
pub struct InfluenceEstimate {
    pub c: f64,
    pub gamma_hat: f64,
    /// lambda_hat[j]: estimated probability that a pair differing in
    /// exactly lexicographic slot j is c-bad.
    pub lambda: Vec<f64>,
    pub wilson: Vec<(f64, f64)>,
    pub total: f64,
}

/// Per-slot influence estimates over the single-slot resampling pair
/// ensemble: sample Phi, resample slot j from the other 2n - 1 literals,
/// test c-badness of the pair.
pub fn estimate_influences<F>(
    f: &F,
    n: usize,
    m: usize,
    k: usize,
    c: f64,
    gamma_hat: f64,
    samples_per_slot: u64,
    seed: u64,
) -> Result<InfluenceEstimate>
where
    F: Fn(&Formula) -> Vec<f64> + Sync,
{
    if gamma_hat <= 0.0 {
        return Err(Error::InvalidArgument("gamma_hat must be positive".into()));
    }
    let km = k * m;
    let stream = SeedStream::new(seed).derive_str("influence");
    let counts: Vec<u64> = (0..km)
        .into_par_iter()
        .map(|j| {
            let sub = stream.derive(j as u64);
            let mut bad = 0u64;
            for s in 0..samples_per_slot {
                let case = sub.derive(s);
                let phi = sample_formula_stream(n, m, k, case.derive_str("phi")).expect("dims");
                let mut rng = case.derive_str("resample").rng();
                let old = phi.literal(j / k, j % k);
                // uniform over the other 2n - 1 literals
                let mut id = rng.below(2 * n as u64 - 1) as u32;
                if id >= old.id() {
                    id += 1;
                }
                let mut phi2 = phi.clone();
                phi2.set_literal(j / k, j % k, Literal::from_id(id));
                let fa = f(&phi);
                let threshold = c * gamma_hat * fa.len() as f64;
                if jump_sq(&fa, &f(&phi2)) > threshold {
                    bad += 1;
                }
            }
            bad
        })
        .collect();
    let lambda: Vec<f64> =
        counts.iter().map(|&b| b as f64 / samples_per_slot as f64).collect();
    let wilson = counts.iter().map(|&b| wilson_interval(b, samples_per_slot)).collect();
    let total = lambda.iter().sum();
    Ok(InfluenceEstimate { c, gamma_hat, lambda, wilson, total })
}

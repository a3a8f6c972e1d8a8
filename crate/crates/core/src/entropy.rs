//! Entropy, Lyapunov exponent, the overlap correction `Φ(p)` and the
//! random-walk entropy `h_RW = h_p + Φ(p)`.
//!
//! All logarithms are natural.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CfsError, Result};
use crate::symbolic::{compositions, LnFactorial};
use crate::system::{CfsSystem, ProbVector};

pub const DEFAULT_TOL: f64 = 1e-10;
/// Hard cap on the outer series index.
pub const MAX_SERIES_TERMS: usize = 5_000_000;
/// Steps allowed in one Monte-Carlo run before giving up.
pub const RUN_CAP: usize = 1_000_000;
const MC_CHUNK: usize = 1 << 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiMethod {
    Series,
    MonteCarlo,
    LowerBound,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhiResult {
    pub value: f64,
    pub tail_bound: f64,
    pub terms_used: usize,
    pub method: PhiMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

pub fn shannon_entropy(p: &ProbVector) -> f64 {
    -p.weights()
        .iter()
        .flatten()
        .filter(|&&w| w > 0.0)
        .map(|&w| w * w.ln())
        .sum::<f64>()
}

/// `χ(p) = −Σ p_{i,j} log λ_{i,j}`.
pub fn lyapunov(sys: &CfsSystem, p: &ProbVector) -> f64 {
    -p.weights()
        .iter()
        .flatten()
        .zip(sys.ratios().iter().flatten())
        .filter(|(&w, _)| w > 0.0)
        .map(|(&w, &r)| w * r.ln())
        .sum::<f64>()
}

/// Mass outside `group`, summed directly so it stays accurate when the
/// group mass is close to 1.
fn escape_mass(p: &ProbVector, group: usize) -> f64 {
    (0..p.weights().len())
        .filter(|&g| g != group)
        .map(|g| p.group_mass(g))
        .sum()
}

fn ensure_nondegenerate(p: &ProbVector) -> Result<()> {
    match p.concentrated_group() {
        Some(g) => Err(CfsError::DegenerateMeasure(format!(
            "all mass in group {}; runs never leave it",
            g + 1
        ))),
        None => Ok(()),
    }
}

/// Bound on `Σ_{k>K} ρ^k log(k+1)` used for truncation.
fn series_tail(rho: f64, k: usize) -> f64 {
    let esc = 1.0 - rho;
    let kf = k as f64;
    rho.powf(kf + 1.0) / esc * ((kf + 2.0).ln() + 1.0 / (esc * (kf + 2.0)))
}

/// `E[log((B+1)/(k+1))]` for `B ~ Bin(k, θ)`, summing the pmf outward
/// from its mode with the ratio recurrence.
pub(crate) fn binomial_log_mean(k: usize, theta: f64, lf: &mut LnFactorial) -> f64 {
    if k == 0 || theta >= 1.0 {
        return 0.0;
    }
    let kf = k as f64;
    let log_k1 = (kf + 1.0).ln();
    if theta <= 0.0 {
        return -log_k1;
    }
    let mode = (((k + 1) as f64) * theta).floor().min(kf) as usize;
    let (lt, lq) = (theta.ln(), (1.0 - theta).ln());
    let ln_mode = lf.get(k) - lf.get(mode) - lf.get(k - mode) + mode as f64 * lt + (k - mode) as f64 * lq;
    let odds = theta / (1.0 - theta);
    let w_mode = ln_mode.exp();
    let cutoff = w_mode * 1e-18;
    let term = |q: usize, w: f64| w * (((q + 1) as f64).ln() - log_k1);
    let mut acc = term(mode, w_mode);
    let mut w = w_mode;
    for q in mode..k {
        w *= (kf - q as f64) / (q as f64 + 1.0) * odds;
        if w < cutoff {
            break;
        }
        acc += term(q + 1, w);
    }
    w = w_mode;
    for q in (1..=mode).rev() {
        w *= q as f64 / (kf - q as f64 + 1.0) / odds;
        if w < cutoff {
            break;
        }
        acc += term(q - 1, w);
    }
    acc
}

/// Truncated series for `Φ(p)` with a rigorous tail bound.
pub fn phi_series(sys: &CfsSystem, p: &ProbVector, tol: f64) -> Result<PhiResult> {
    debug_assert_eq!(sys.group_count(), p.weights().len());
    ensure_nondegenerate(p)?;
    let mut value = 0.0;
    let mut tail_bound = 0.0;
    let mut terms_used = 0;
    let mut lf = LnFactorial::new(1024);
    for (l, group) in p.weights().iter().enumerate() {
        let rho: f64 = group.iter().sum();
        if rho == 0.0 || group.iter().filter(|&&w| w > 0.0).count() < 2 {
            // a single live member always matches itself: every log term is 0
            continue;
        }
        let esc = escape_mass(p, l);
        let mut k_max = 0;
        while series_tail(rho, k_max) >= tol {
            k_max += 1;
            if k_max > MAX_SERIES_TERMS {
                return Err(CfsError::SeriesTooLong {
                    max_terms: MAX_SERIES_TERMS,
                    mass: rho,
                });
            }
        }
        terms_used = terms_used.max(k_max + 1);
        let ln_rho = rho.ln();
        for &pm in group.iter().filter(|&&w| w > 0.0) {
            let theta = pm / rho;
            let mut s = 0.0;
            for k in 1..=k_max {
                let weight = (k as f64 * ln_rho).exp();
                s += weight * binomial_log_mean(k, theta, &mut lf);
            }
            value += pm * esc * s;
        }
        tail_bound += rho * esc * series_tail(rho, k_max);
    }
    Ok(PhiResult {
        value,
        tail_bound,
        terms_used,
        method: PhiMethod::Series,
        stderr: None,
        samples: None,
    })
}

/// Monte-Carlo estimate of `Φ(p) = E[log(Y/(k−1))]`.
///
/// Samples are split into fixed-size chunks, each with its own ChaCha stream
/// keyed by `(seed, chunk)`, so the result does not depend on thread count.
pub fn phi_monte_carlo(sys: &CfsSystem, p: &ProbVector, samples: usize, seed: u64) -> Result<PhiResult> {
    ensure_nondegenerate(p)?;
    if samples == 0 {
        return Err(CfsError::InvalidProbabilities("samples must be at least 1".into()));
    }
    let symbols = sys.symbols();
    let dist = WeightedIndex::new(p.flat())
        .map_err(|e| CfsError::InvalidProbabilities(e.to_string()))?;
    let chunks = samples.div_ceil(MC_CHUNK);
    let partial: Vec<Result<(f64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let n = MC_CHUNK.min(samples - c * MC_CHUNK);
            let (mut sum, mut sumsq) = (0.0, 0.0);
            for _ in 0..n {
                let first = dist.sample(&mut rng);
                let group = symbols[first].group;
                let (mut same, mut run) = (1usize, 1usize);
                loop {
                    let x = dist.sample(&mut rng);
                    if symbols[x].group != group {
                        break;
                    }
                    run += 1;
                    if x == first {
                        same += 1;
                    }
                    if run > RUN_CAP {
                        return Err(CfsError::RunTooLong { cap: RUN_CAP });
                    }
                }
                let v = (same as f64 / run as f64).ln();
                sum += v;
                sumsq += v * v;
            }
            Ok((sum, sumsq))
        })
        .collect();
    let (mut sum, mut sumsq) = (0.0, 0.0);
    for r in partial {
        let (s, q) = r?;
        sum += s;
        sumsq += q;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = if samples > 1 {
        ((sumsq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(PhiResult {
        value: mean,
        tail_bound: 0.0,
        terms_used: 0,
        method: PhiMethod::MonteCarlo,
        stderr: Some((var / n).sqrt()),
        samples: Some(samples),
    })
}

/// Jensen lower bound `Σ p_{l,m} log(p_{l,m} + Σ_{i≠l} Σ_j p_{i,j})`.
pub fn phi_lower_bound(p: &ProbVector) -> f64 {
    p.weights()
        .iter()
        .map(|group| {
            // p + escape mass = 1 − (mass of the other group members)
            (0..group.len())
                .filter(|&m| group[m] > 0.0)
                .map(|m| {
                    let siblings: f64 = group.iter().enumerate().filter(|&(j, _)| j != m).map(|(_, w)| w).sum();
                    group[m] * (-siblings).ln_1p()
                })
                .sum::<f64>()
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RwMethod {
    ClosedForm,
    BruteForce,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RwEntropyResult {
    pub value: f64,
    pub method: RwMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    /// `H_{k+1} − H_k` for `k = 1..n−1`.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub increments: Vec<f64>,
    /// `H_1, …, H_n`.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub entropies: Vec<f64>,
    /// Total class weight at depth `n`; 1 up to rounding.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_mass: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_bound: Option<f64>,
}

/// `h_RW = h_p + Φ(p)`. Zero when the walk lives in one commuting group.
pub fn rw_entropy_closed(sys: &CfsSystem, p: &ProbVector, tol: f64) -> Result<RwEntropyResult> {
    let (value, tail) = if p.concentrated_group().is_some() {
        (0.0, 0.0)
    } else {
        let phi = phi_series(sys, p, tol)?;
        (shannon_entropy(p) + phi.value, phi.tail_bound)
    };
    Ok(RwEntropyResult {
        value,
        method: RwMethod::ClosedForm,
        depth: None,
        increments: Vec::new(),
        entropies: Vec::new(),
        class_mass: None,
        tail_bound: Some(tail),
    })
}

/// `H_1..H_n` of the distribution of composed maps, with exact overlaps
/// given by block structure.
///
/// `H_n = −Σ_sig W(sig) log W(sig)` and `log W` is additive over blocks, so a
/// dynamic program over (length, last group) carrying `Σ W` and `Σ W log W`
/// replaces the enumeration of signatures.
pub fn rw_entropy_bruteforce(
    sys: &CfsSystem,
    p: &ProbVector,
    n: usize,
    budget: u128,
) -> Result<RwEntropyResult> {
    if n == 0 {
        return Err(CfsError::InvalidProbabilities("depth must be at least 1".into()));
    }
    let groups = sys.group_count();
    let mut lf = LnFactorial::new(n);
    // per group and block length b: Σ w and Σ w log w over block contents
    let mut mass = vec![vec![0.0; n + 1]; groups];
    let mut ent = vec![vec![0.0; n + 1]; groups];
    let mut visited: u128 = 0;
    for g in 0..groups {
        let live: Vec<f64> = p.weights()[g].iter().copied().filter(|&w| w > 0.0).collect();
        if live.is_empty() {
            continue;
        }
        let logs: Vec<f64> = live.iter().map(|w| w.ln()).collect();
        for b in 1..=n {
            let comps = compositions(b as u32, live.len());
            visited += comps.len() as u128;
            if visited > budget {
                return Err(CfsError::BudgetExceeded {
                    needed: visited,
                    budget,
                });
            }
            let lb = lf.get(b);
            let (mut m, mut e) = (0.0, 0.0);
            for c in comps {
                let lw = lb + c
                    .iter()
                    .zip(&logs)
                    .map(|(&ci, &l)| ci as f64 * l - lf.get(ci as usize))
                    .sum::<f64>();
                let w = lw.exp();
                m += w;
                e += w * lw;
            }
            mass[g][b] = m;
            ent[g][b] = e;
        }
    }
    let mut total = vec![vec![0.0; groups]; n + 1];
    let mut total_ent = vec![vec![0.0; groups]; n + 1];
    for len in 1..=n {
        for g in 0..groups {
            let (mut m, mut e) = (mass[g][len], ent[g][len]);
            for b in 1..len {
                for h in (0..groups).filter(|&h| h != g) {
                    let (pm, pe) = (total[len - b][h], total_ent[len - b][h]);
                    m += pm * mass[g][b];
                    e += pe * mass[g][b] + pm * ent[g][b];
                }
            }
            total[len][g] = m;
            total_ent[len][g] = e;
        }
    }
    let entropies: Vec<f64> = (1..=n).map(|len| -total_ent[len].iter().sum::<f64>()).collect();
    let increments = entropies.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(RwEntropyResult {
        value: entropies[n - 1] / n as f64,
        method: RwMethod::BruteForce,
        depth: Some(n),
        increments,
        class_mass: Some(total[n].iter().sum()),
        entropies,
        tail_bound: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::{class_weight, decompose, enumerate_words, DEFAULT_BUDGET};
    use std::collections::HashMap;

    /// Φ for groups (2,1), λ irrelevant, p uniform: 50-digit series evaluation.
    const PHI_21_UNIFORM: f64 = -0.213_848_472_989_677_02;
    /// Same for groups (3,2), p uniform.
    const PHI_32_UNIFORM: f64 = -0.301_023_610_416_304_3;

    fn sys21() -> CfsSystem {
        CfsSystem::new(vec![0.0, 1.0], vec![vec![0.3, 0.2], vec![0.25]]).unwrap()
    }

    fn sys32() -> CfsSystem {
        CfsSystem::new(vec![0.0, 1.0], vec![vec![0.3, 0.2, 0.1], vec![0.25, 0.15]]).unwrap()
    }

    #[test]
    fn shannon_examples() {
        let sys = CfsSystem::new(vec![0.0, 1.0], vec![vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap();
        let u = ProbVector::uniform(&sys);
        assert!((shannon_entropy(&u) - 4f64.ln()).abs() < 1e-15);
        let point = ProbVector::new(&sys, vec![vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(shannon_entropy(&point), 0.0);
        let sys3 = sys21();
        let p = ProbVector::new(&sys3, vec![vec![0.5, 0.25], vec![0.25]]).unwrap();
        assert!((shannon_entropy(&p) - 1.5 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn lyapunov_examples() {
        let halves = CfsSystem::new(vec![0.0, 1.0], vec![vec![0.5, 0.5], vec![0.5]]).unwrap();
        let p = ProbVector::new(&halves, vec![vec![0.2, 0.3], vec![0.5]]).unwrap();
        assert!((lyapunov(&halves, &p) - 2f64.ln()).abs() < 1e-15);
        let q = CfsSystem::new(vec![0.0, 1.0], vec![vec![0.25], vec![0.5]]).unwrap();
        let p = ProbVector::new(&q, vec![vec![1.0], vec![0.0]]).unwrap();
        assert!((lyapunov(&q, &p) - 4f64.ln()).abs() < 1e-15);
        let sys = sys21();
        let expect = -(0.3f64.ln() + 0.2f64.ln() + 0.25f64.ln()) / 3.0;
        assert!((lyapunov(&sys, &ProbVector::uniform(&sys)) - expect).abs() < 1e-15);
    }

    #[test]
    fn phi_zero_without_shared_fixed_points() {
        let sys = CfsSystem::new(vec![0.0, 1.0, 3.0], vec![vec![0.3], vec![0.2], vec![0.1]]).unwrap();
        let p = ProbVector::new(&sys, vec![vec![0.2], vec![0.5], vec![0.3]]).unwrap();
        let r = phi_series(&sys, &p, 1e-12).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(phi_lower_bound(&p), 0.0);
        let mc = phi_monte_carlo(&sys, &p, 1000, 7).unwrap();
        assert_eq!(mc.value, 0.0);
    }

    #[test]
    fn phi_series_matches_high_precision_values() {
        for (sys, expect) in [(sys21(), PHI_21_UNIFORM), (sys32(), PHI_32_UNIFORM)] {
            let r = phi_series(&sys, &ProbVector::uniform(&sys), 1e-12).unwrap();
            assert!(r.tail_bound <= 1e-12);
            assert!((r.value - expect).abs() < 1e-11, "{} vs {expect}", r.value);
        }
    }

    #[test]
    fn phi_monte_carlo_agrees_with_series() {
        let sys = sys21();
        let p = ProbVector::uniform(&sys);
        let mc = phi_monte_carlo(&sys, &p, 400_000, 11).unwrap();
        let se = mc.stderr.unwrap();
        assert!((mc.value - PHI_21_UNIFORM).abs() <= 3.0 * se, "{} ± {se}", mc.value);
        assert_eq!(mc, phi_monte_carlo(&sys, &p, 400_000, 11).unwrap());
    }

    #[test]
    fn lower_bound_examples() {
        let sys = sys21();
        let p = ProbVector::uniform(&sys);
        let lb = phi_lower_bound(&p);
        assert!((lb - 2.0 / 3.0 * (2.0f64 / 3.0).ln()).abs() < 1e-15);
        assert!(lb <= PHI_21_UNIFORM);
    }

    #[test]
    fn degenerate_measure_is_rejected() {
        let sys = sys21();
        let p = ProbVector::new(&sys, vec![vec![0.5, 0.5], vec![0.0]]).unwrap();
        assert!(matches!(phi_series(&sys, &p, 1e-10), Err(CfsError::DegenerateMeasure(_))));
        assert!(matches!(phi_monte_carlo(&sys, &p, 10, 1), Err(CfsError::DegenerateMeasure(_))));
        let point = ProbVector::new(&sys, vec![vec![0.0, 1.0], vec![0.0]]).unwrap();
        assert_eq!(rw_entropy_closed(&sys, &point, 1e-10).unwrap().value, 0.0);
    }

    #[test]
    fn binomial_log_mean_matches_direct_sum() {
        let mut lf = LnFactorial::new(10);
        for &(k, theta) in &[(1usize, 0.5), (5, 0.3), (40, 0.9), (200, 0.01)] {
            let mut direct = 0.0;
            for q in 0..=k {
                let lnc = lf.get(k) - lf.get(q) - lf.get(k - q);
                let w = (lnc + q as f64 * f64::ln(theta) + (k - q) as f64 * f64::ln(1.0 - theta)).exp();
                direct += w * (((q + 1) as f64) / ((k + 1) as f64)).ln();
            }
            let fast = binomial_log_mean(k, theta, &mut lf);
            assert!((fast - direct).abs() < 1e-12 * direct.abs().max(1.0), "k={k} θ={theta}: {fast} vs {direct}");
        }
    }

    /// `H_n` from explicit words grouped by signature.
    fn entropy_by_words(sys: &CfsSystem, p: &ProbVector, n: usize) -> f64 {
        let mut classes: HashMap<_, f64> = HashMap::new();
        for w in enumerate_words(sys, n, DEFAULT_BUDGET).unwrap() {
            let pw: f64 = w.symbols().iter().map(|&s| p.get(s)).product();
            *classes.entry(decompose(&w)).or_default() += pw;
        }
        for (sig, &mass) in &classes {
            assert!((class_weight(sig, p) - mass).abs() < 1e-14);
        }
        let total: f64 = classes.values().sum();
        assert!((total - 1.0).abs() < 1e-10);
        -classes.values().map(|&m| m * m.ln()).sum::<f64>()
    }

    #[test]
    fn bruteforce_dp_matches_word_enumeration() {
        let sys = sys21();
        let p = ProbVector::new(&sys, vec![vec![0.5, 0.2], vec![0.3]]).unwrap();
        let dp = rw_entropy_bruteforce(&sys, &p, 7, DEFAULT_BUDGET).unwrap();
        for n in 1..=7 {
            let direct = entropy_by_words(&sys, &p, n);
            assert!((dp.entropies[n - 1] - direct).abs() < 1e-12, "n={n}");
        }
        assert!((dp.class_mass.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bruteforce_examples() {
        let free = CfsSystem::new(vec![0.0, 1.0, 2.0], vec![vec![0.3], vec![0.2], vec![0.1]]).unwrap();
        let p = ProbVector::new(&free, vec![vec![0.2], vec![0.5], vec![0.3]]).unwrap();
        let h = shannon_entropy(&p);
        let r = rw_entropy_bruteforce(&free, &p, 9, DEFAULT_BUDGET).unwrap();
        for (k, hk) in r.entropies.iter().enumerate() {
            assert!((hk - (k + 1) as f64 * h).abs() < 1e-12);
        }
        let sys = sys21();
        let u = ProbVector::uniform(&sys);
        let r = rw_entropy_bruteforce(&sys, &u, 12, DEFAULT_BUDGET).unwrap();
        assert!((r.entropies[0] - shannon_entropy(&u)).abs() < 1e-14);
        let closed = rw_entropy_closed(&sys, &u, 1e-12).unwrap().value;
        assert!((r.increments[10] - closed).abs() <= 1e-3);
    }

    #[test]
    fn rw_entropy_closed_examples() {
        let free = CfsSystem::new(vec![0.0, 1.0], vec![vec![0.3], vec![0.2]]).unwrap();
        let p = ProbVector::new(&free, vec![vec![0.4], vec![0.6]]).unwrap();
        let r = rw_entropy_closed(&free, &p, 1e-12).unwrap();
        assert!((r.value - shannon_entropy(&p)).abs() < 1e-15);
        let sys = sys21();
        let u = ProbVector::uniform(&sys);
        let r = rw_entropy_closed(&sys, &u, 1e-12).unwrap();
        assert!((r.value - (3f64.ln() + PHI_21_UNIFORM)).abs() < 1e-11);
    }
}

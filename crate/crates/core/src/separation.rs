//! Finite-depth probe of exponential separation for systems with common
//! fixed points.
//!
//! Words with the same block signature give the same map and are never
//! compared. Among signatures whose maps share a contraction ratio, the
//! smallest distance between their images of 0 is reported.

use std::collections::HashMap;

use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CfsError, Result};
use crate::symbolic::{compose_in, enumerate_signatures, project_signature_in, BlockSignature, Word};
use crate::system::{rat_to_f64, CfsSystem, NumberMode, Params, Rational};

/// Relative tolerance for treating two float contraction ratios as equal.
pub const RATIO_MERGE_TOL: f64 = 1e-12;

/// Signatures whose maps share a contraction ratio.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Bucket {
    pub ratio: f64,
    pub signatures: Vec<BlockSignature>,
}

/// Group the depth-`n` signatures by contraction ratio.
///
/// Float systems bucket by count vector and then merge buckets whose ratios
/// agree to [`RATIO_MERGE_TOL`]; rational systems bucket by exact ratio.
pub fn collision_buckets(sys: &CfsSystem, n: usize, budget: u128) -> Result<Vec<Bucket>> {
    let sigs = enumerate_signatures(sys, n, budget)?;
    let mut buckets = match sys.exact_params() {
        Some(exact) => {
            let mut map: HashMap<Rational, Vec<BlockSignature>> = HashMap::new();
            for sig in sigs {
                map.entry(sig.ratio_in(exact)).or_default().push(sig);
            }
            map.into_iter()
                .map(|(r, signatures)| Bucket {
                    ratio: rat_to_f64(&r),
                    signatures,
                })
                .collect::<Vec<_>>()
        }
        None => {
            let mut map: HashMap<Vec<u32>, Vec<BlockSignature>> = HashMap::new();
            for sig in sigs {
                map.entry(sig.count_vector(sys)).or_default().push(sig);
            }
            let mut raw: Vec<Bucket> = map
                .into_values()
                .map(|signatures| Bucket {
                    ratio: signatures[0].ratio_in(sys.params()),
                    signatures,
                })
                .collect();
            raw.sort_by(|a, b| a.ratio.total_cmp(&b.ratio).then_with(|| a.signatures.cmp(&b.signatures)));
            let mut merged: Vec<Bucket> = Vec::new();
            for b in raw {
                match merged.last_mut() {
                    Some(last) if (b.ratio - last.ratio).abs() <= RATIO_MERGE_TOL * b.ratio.max(last.ratio) => {
                        last.signatures.extend(b.signatures);
                    }
                    _ => merged.push(b),
                }
            }
            merged
        }
    };
    for b in &mut buckets {
        b.signatures.sort();
    }
    buckets.sort_by(|a, b| a.ratio.total_cmp(&b.ratio).then_with(|| a.signatures.cmp(&b.signatures)));
    Ok(buckets)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub first: BlockSignature,
    pub second: BlockSignature,
    pub first_word: Word,
    pub second_word: Word,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationReport {
    pub depth: usize,
    pub mode: NumberMode,
    pub class_count: usize,
    pub bucket_count: usize,
    pub compared_pairs: u64,
    /// `None` when no bucket holds two signatures.
    pub min_gap: Option<f64>,
    /// Two distinct signatures project to the same point, certified exactly.
    pub exact_zero: bool,
    /// A float gap too small to tell from rounding.
    pub indeterminate: bool,
    pub witness: Option<Witness>,
    /// `−log₂(min_gap)/n`.
    pub implied_b: Option<f64>,
    /// Signatures whose two representatives composed to different maps; 0 unless arithmetic is broken.
    pub identity_violations: usize,
}

/// Smallest gap within one bucket, as `(gap, i, j)` indices into the bucket.
fn bucket_gap<T, D>(values: &mut [(T, usize)], diff: D) -> Option<(T, usize, usize)>
where
    T: Clone + PartialOrd,
    D: Fn(&T, &T) -> T,
{
    values.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut best: Option<(T, usize, usize)> = None;
    for w in values.windows(2) {
        let g = diff(&w[1].0, &w[0].0);
        if best.as_ref().is_none_or(|b| g < b.0) {
            best = Some((g, w[0].1.min(w[1].1), w[0].1.max(w[1].1)));
        }
    }
    best
}

fn identity_holds_exact(params: &Params<Rational>, sig: &BlockSignature) -> bool {
    let a = compose_in(params, &sig.representative());
    let b = compose_in(params, &sig.reversed_representative());
    matches!((a, b), (Ok(a), Ok(b)) if a == b)
}

fn identity_holds_float(params: &Params<f64>, sig: &BlockSignature) -> bool {
    match (
        compose_in(params, &sig.representative()),
        compose_in(params, &sig.reversed_representative()),
    ) {
        (Ok(a), Ok(b)) => {
            let close = |x: f64, y: f64| (x - y).abs() <= 64.0 * f64::EPSILON * x.abs().max(y.abs()).max(1.0);
            close(a.ratio, b.ratio) && close(a.intercept, b.intercept)
        }
        _ => false,
    }
}

/// Minimal same-ratio gap at depth `n`.
pub fn min_gap(sys: &CfsSystem, n: usize, budget: u128) -> Result<SeparationReport> {
    let buckets = collision_buckets(sys, n, budget)?;
    let class_count = buckets.iter().map(|b| b.signatures.len()).sum();
    let compared_pairs = buckets
        .iter()
        .map(|b| b.signatures.len().saturating_sub(1) as u64)
        .sum();

    // per bucket: (gap as f64, exact zero?, bucket index, i, j, identity failures)
    type Found = (Option<(f64, bool, usize, usize, usize)>, usize);
    let per_bucket: Vec<Found> = match sys.exact_params() {
        Some(exact) => buckets
            .par_iter()
            .enumerate()
            .map(|(bi, b)| {
                let bad = b.signatures.iter().filter(|s| !identity_holds_exact(exact, s)).count();
                if b.signatures.len() < 2 {
                    return (None, bad);
                }
                let mut vals: Vec<(Rational, usize)> = b
                    .signatures
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (project_signature_in(exact, s).expect("nonempty"), i))
                    .collect();
                let best = bucket_gap(&mut vals, |a, b| (a - b).abs());
                (best.map(|(g, i, j)| (rat_to_f64(&g), g.is_zero(), bi, i, j)), bad)
            })
            .collect(),
        None => {
            let params = sys.params();
            buckets
                .par_iter()
                .enumerate()
                .map(|(bi, b)| {
                    let bad = b.signatures.iter().filter(|s| !identity_holds_float(params, s)).count();
                    if b.signatures.len() < 2 {
                        return (None, bad);
                    }
                    let mut vals: Vec<(f64, usize)> = b
                        .signatures
                        .iter()
                        .enumerate()
                        .map(|(i, s)| (project_signature_in(params, s).expect("nonempty"), i))
                        .collect();
                    let best = bucket_gap(&mut vals, |a, b| (a - b).abs());
                    (best.map(|(g, i, j)| (g, false, bi, i, j)), bad)
                })
                .collect()
        }
    };

    let identity_violations = per_bucket.iter().map(|f| f.1).sum();
    // first bucket wins ties, so the witness does not depend on scheduling
    let best = per_bucket
        .into_iter()
        .filter_map(|f| f.0)
        .fold(None::<(f64, bool, usize, usize, usize)>, |acc, cur| match acc {
            Some(a) if a.0 <= cur.0 => Some(a),
            _ => Some(cur),
        });

    let (_, hi) = sys.hull();
    let scale = hi.abs().max(sys.hull().0.abs()).max(1.0);
    let mode = sys.mode();
    let mut report = SeparationReport {
        depth: n,
        mode,
        class_count,
        bucket_count: buckets.len(),
        compared_pairs,
        min_gap: None,
        exact_zero: false,
        indeterminate: false,
        witness: None,
        implied_b: None,
        identity_violations,
    };
    if let Some((gap, zero, bi, i, j)) = best {
        let (a, b) = (&buckets[bi].signatures[i], &buckets[bi].signatures[j]);
        report.min_gap = Some(gap);
        report.exact_zero = zero;
        report.indeterminate = mode == NumberMode::Float && gap <= 1e-12 * scale;
        report.implied_b = (gap > 0.0).then(|| -gap.log2() / n as f64);
        report.witness = Some(Witness {
            first: a.clone(),
            second: b.clone(),
            first_word: a.representative(),
            second_word: b.representative(),
            gap,
        });
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ConsistentUpToN,
    ViolatedWithWitness,
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeRow {
    pub n: usize,
    pub class_count: usize,
    pub min_gap: Option<f64>,
    pub implied_b: Option<f64>,
    pub exact_zero: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EscProbe {
    pub rows: Vec<ProbeRow>,
    pub verdict: Verdict,
    /// Largest implied exponent over the rows; a heuristic, not a certificate.
    pub b_hat: Option<f64>,
    pub witness: Option<Witness>,
    pub heuristic: bool,
}

/// [`min_gap`] for `n = 2..=n_max`.
pub fn esc_probe(sys: &CfsSystem, n_max: usize, budget: u128) -> Result<EscProbe> {
    if n_max < 2 {
        return Err(CfsError::Parse("probe depth must be at least 2".into()));
    }
    let mut rows = Vec::new();
    let mut witness = None;
    let mut violated = false;
    let mut indeterminate = false;
    for n in 2..=n_max {
        let r = min_gap(sys, n, budget)?;
        if r.exact_zero && !violated {
            violated = true;
            witness = r.witness.clone();
        }
        indeterminate |= r.indeterminate;
        rows.push(ProbeRow {
            n,
            class_count: r.class_count,
            min_gap: r.min_gap,
            implied_b: r.implied_b,
            exact_zero: r.exact_zero,
        });
    }
    let b_hat = rows.iter().filter_map(|r| r.implied_b).reduce(f64::max);
    let verdict = if violated {
        Verdict::ViolatedWithWitness
    } else if indeterminate {
        Verdict::Indeterminate
    } else {
        Verdict::ConsistentUpToN
    };
    Ok(EscProbe {
        rows,
        verdict,
        b_hat,
        witness,
        heuristic: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::{compose_exact, decompose, enumerate_words, project_exact, DEFAULT_BUDGET};
    use num_bigint::BigInt;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    fn rational(t: Vec<i64>, r: Vec<Vec<(i64, i64)>>) -> CfsSystem {
        CfsSystem::new_rational(
            t.into_iter().map(|v| q(v, 1)).collect(),
            r.into_iter().map(|g| g.into_iter().map(|(a, b)| q(a, b)).collect()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn depth_one_buckets_are_singletons_generically() {
        let sys = CfsSystem::new(vec![0.0, 1.0], vec![vec![0.3, 0.2], vec![0.25]]).unwrap();
        let b = collision_buckets(&sys, 1, DEFAULT_BUDGET).unwrap();
        assert_eq!(b.len(), 3);
        assert!(b.iter().all(|b| b.signatures.len() == 1));
    }

    #[test]
    fn generic_buckets_are_count_classes() {
        let sys = CfsSystem::new(vec![0.0, 1.0], vec![vec![0.31, 0.17], vec![0.23]]).unwrap();
        for n in 2..=6 {
            let b = collision_buckets(&sys, n, DEFAULT_BUDGET).unwrap();
            for bucket in &b {
                let cv = bucket.signatures[0].count_vector(&sys);
                assert!(bucket.signatures.iter().all(|s| s.count_vector(&sys) == cv));
            }
            let mut classes = std::collections::HashSet::new();
            for s in enumerate_signatures(&sys, n, DEFAULT_BUDGET).unwrap() {
                classes.insert(s.count_vector(&sys));
            }
            assert_eq!(b.len(), classes.len());
        }
    }

    #[test]
    fn multiplicative_relations_merge_buckets() {
        let sys = rational(vec![0, 1], vec![vec![(1, 2)], vec![(1, 4)]]);
        let b = collision_buckets(&sys, 3, DEFAULT_BUDGET).unwrap();
        // ratios at length 3: 1/8, 1/16, 1/32, 1/64
        assert_eq!(b.len(), 4);
        let f = CfsSystem::new(vec![0.0, 1.0], vec![vec![0.5], vec![0.25]]).unwrap();
        assert_eq!(collision_buckets(&f, 3, DEFAULT_BUDGET).unwrap().len(), 4);
    }

    #[test]
    fn exact_buckets_match_word_enumeration() {
        let sys = rational(vec![0, 1], vec![vec![(1, 2), (1, 4)], vec![(1, 3)]]);
        for n in 1..=5 {
            let mut by_ratio: HashMap<Rational, std::collections::BTreeSet<BlockSignature>> = HashMap::new();
            for w in enumerate_words(&sys, n, DEFAULT_BUDGET).unwrap() {
                let m = compose_exact(&sys, &w).unwrap();
                by_ratio.entry(m.ratio).or_default().insert(decompose(&w));
            }
            let buckets = collision_buckets(&sys, n, DEFAULT_BUDGET).unwrap();
            assert_eq!(buckets.len(), by_ratio.len());
            for b in buckets {
                let ratio = b.signatures[0].ratio_in(sys.exact_params().unwrap());
                let expect: Vec<_> = by_ratio[&ratio].iter().cloned().collect();
                assert_eq!(b.signatures, expect);
            }
        }
    }

    #[test]
    fn osc_system_gap_bounds() {
        let sys = CfsSystem::new(vec![0.0, 1.0], vec![vec![0.25], vec![0.25]]).unwrap();
        for n in 2..=8 {
            let r = min_gap(&sys, n, DEFAULT_BUDGET).unwrap();
            // distinct depth-n cylinders are separated by half their parent's length
            assert!(r.min_gap.unwrap() >= 0.5 * 0.25f64.powi(n as i32 - 1) - 1e-15);
            assert!(r.implied_b.unwrap() <= 2.0 + 1e-9);
            assert_eq!(r.identity_violations, 0);
        }
    }

    #[test]
    fn coincidence_system_has_certified_witness() {
        let sys = rational(vec![0, 1], vec![vec![(1, 2), (1, 4)], vec![(1, 3)]]);
        let mut first_violation = None;
        for n in 2..=8 {
            let r = min_gap(&sys, n, DEFAULT_BUDGET).unwrap();
            assert_eq!(r.identity_violations, 0);
            if r.exact_zero && first_violation.is_none() {
                first_violation = Some(n);
                let w = r.witness.unwrap();
                assert_ne!(w.first, w.second);
                assert_eq!(
                    project_exact(&sys, &w.first_word).unwrap(),
                    project_exact(&sys, &w.second_word).unwrap()
                );
                let e = sys.exact_params().unwrap();
                assert_eq!(w.first.ratio_in(e), w.second.ratio_in(e));
            }
            if !r.exact_zero {
                assert!(r.min_gap.unwrap() > 0.0);
            }
        }
        assert_eq!(first_violation, Some(4));
        let probe = esc_probe(&sys, 5, DEFAULT_BUDGET).unwrap();
        assert_eq!(probe.verdict, Verdict::ViolatedWithWitness);
    }

    #[test]
    fn separated_rational_system_is_consistent() {
        let sys = rational(vec![0, 1], vec![vec![(2, 7), (3, 11)], vec![(5, 13)]]);
        let probe = esc_probe(&sys, 8, DEFAULT_BUDGET).unwrap();
        assert_eq!(probe.verdict, Verdict::ConsistentUpToN);
        assert!(probe.rows.iter().all(|r| !r.exact_zero));
        assert!(probe.b_hat.unwrap().is_finite());
    }

    #[test]
    fn probe_depth_two_has_one_row() {
        let sys = CfsSystem::new(vec![0.0, 1.0], vec![vec![0.3, 0.2], vec![0.25]]).unwrap();
        let p = esc_probe(&sys, 2, DEFAULT_BUDGET).unwrap();
        assert_eq!(p.rows.len(), 1);
        assert_eq!(p.rows[0].n, 2);
        assert!(esc_probe(&sys, 1, DEFAULT_BUDGET).is_err());
    }

    #[test]
    fn budget_is_enforced() {
        let sys = CfsSystem::new(vec![0.0, 1.0], vec![vec![0.3, 0.2], vec![0.25]]).unwrap();
        assert!(matches!(min_gap(&sys, 12, 100), Err(CfsError::BudgetExceeded { .. })));
    }
}

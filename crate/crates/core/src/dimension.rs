//! Measure and attractor dimension, and the graph-directed approximation
//! of the attractor dimension.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::entropy::{lyapunov, phi_series, shannon_entropy};
use crate::error::{CfsError, Result, SystemViolation};
use crate::roots::bisect;
use crate::symbolic::compositions;
use crate::system::{CfsSystem, ProbVector};

pub const MAX_POWER_ITERATIONS: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DimensionMethod {
    EntropyOverLyapunov,
    AttractorRoot,
    SimilarityRoot,
    GraphDirected,
    Degenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimensionReport {
    /// `min{1, raw}`.
    pub dimension: f64,
    pub raw: f64,
    pub method: DimensionMethod,
    pub tolerance: f64,
    pub diagnostics: BTreeMap<String, f64>,
}

impl DimensionReport {
    fn new(raw: f64, method: DimensionMethod, tolerance: f64) -> Self {
        DimensionReport {
            dimension: raw.min(1.0),
            raw,
            method,
            tolerance,
            diagnostics: BTreeMap::new(),
        }
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }
}

/// Root of `Σ r^s = 1`.
pub fn similarity_dimension(ratios: &[f64]) -> Result<f64> {
    if ratios.is_empty() {
        return Err(CfsError::InvalidSystem(vec![SystemViolation::EmptyGroup { group: 1 }]));
    }
    if let Some((i, &r)) = ratios.iter().enumerate().find(|(_, &r)| !(r > 0.0 && r < 1.0)) {
        return Err(CfsError::InvalidSystem(vec![SystemViolation::RatioOutOfRange {
            group: 1,
            member: i + 1,
            value: r,
        }]));
    }
    let f = |s: f64| ratios.iter().map(|r| r.powf(s)).sum::<f64>() - 1.0;
    let mut hi = 1.0;
    while f(hi) > 0.0 {
        hi *= 2.0;
    }
    bisect(f, 0.0, hi, 1e-13)
}

/// `min{1, (h_p + Φ(p)) / χ(p)}`; zero for a measure supported on one group.
pub fn measure_dimension(sys: &CfsSystem, p: &ProbVector, tol: f64) -> Result<DimensionReport> {
    if p.concentrated_group().is_some() {
        return Ok(DimensionReport::new(0.0, DimensionMethod::Degenerate, tol));
    }
    let h = shannon_entropy(p);
    let chi = lyapunov(sys, p);
    let phi = phi_series(sys, p, tol)?;
    Ok(
        DimensionReport::new((h + phi.value) / chi, DimensionMethod::EntropyOverLyapunov, tol)
            .with("entropy", h)
            .with("lyapunov", chi)
            .with("phi", phi.value)
            .with("phi_tail_bound", phi.tail_bound),
    )
}

/// `F(s) = Σ_i Π_j (1 − λ_{i,j}^s)`.
pub fn attractor_equation(sys: &CfsSystem, s: f64) -> f64 {
    sys.ratios()
        .iter()
        .map(|g| g.iter().map(|r| 1.0 - r.powf(s)).product::<f64>())
        .sum()
}

/// Unique root of `F(s) = N − 1`.
pub fn attractor_dimension(sys: &CfsSystem, tol: f64) -> Result<DimensionReport> {
    let target = (sys.group_count() - 1) as f64;
    let f = |s: f64| attractor_equation(sys, s) - target;
    let mut hi = 1.0;
    while f(hi) <= 0.0 {
        hi *= 2.0;
    }
    let s0 = bisect(f, 0.0, hi, tol)?;
    Ok(DimensionReport::new(s0, DimensionMethod::AttractorRoot, tol).with("bracket_hi", hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Depth {
    Finite(usize),
    Infinite,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GdMatrix {
    pub entries: Vec<Vec<f64>>,
    pub s: f64,
    pub depth: Depth,
}

impl GdMatrix {
    pub fn size(&self) -> usize {
        self.entries.len()
    }
}

/// `Σ_{m=1..n} h_m(x)` with `h_m` the complete homogeneous symmetric polynomial.
pub fn complete_homogeneous_sum(x: &[f64], n: usize) -> f64 {
    let mut h = vec![0.0; n + 1];
    h[0] = 1.0;
    for &xi in x {
        for m in 1..=n {
            h[m] += xi * h[m - 1];
        }
    }
    h[1..].iter().sum()
}

/// Off-diagonal weight of entering group `k`: all multisets of its maps up
/// to size `n`, or the full geometric sum at infinite depth.
fn group_weight(ratios: &[f64], s: f64, depth: Depth) -> f64 {
    let x: Vec<f64> = ratios.iter().map(|r| r.powf(s)).collect();
    match depth {
        Depth::Finite(n) => complete_homogeneous_sum(&x, n),
        Depth::Infinite => x.iter().map(|v| 1.0 / (1.0 - v)).product::<f64>() - 1.0,
    }
}

pub fn gd_matrix(sys: &CfsSystem, s: f64, depth: Depth) -> GdMatrix {
    let n = sys.group_count();
    let col: Vec<f64> = sys.ratios().iter().map(|g| group_weight(g, s, depth)).collect();
    let entries = (0..n)
        .map(|i| (0..n).map(|k| if i == k { 0.0 } else { col[k] }).collect())
        .collect();
    GdMatrix { entries, s, depth }
}

/// Perron root of a nonnegative irreducible matrix, by power iteration on
/// `M + I` with Collatz–Wielandt bounds.
pub fn spectral_radius(m: &[Vec<f64>], tol: f64) -> Result<f64> {
    let n = m.len();
    if n == 0 {
        return Ok(0.0);
    }
    let mut x = vec![1.0; n];
    for it in 0..MAX_POWER_ITERATIONS {
        let y: Vec<f64> = (0..n)
            .map(|i| x[i] + m[i].iter().zip(&x).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let r = y[i] / x[i];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        if hi - lo <= tol * lo {
            return Ok(0.5 * (lo + hi) - 1.0);
        }
        let norm = y.iter().cloned().fold(0.0, f64::max);
        if !norm.is_finite() || norm == 0.0 {
            return Err(CfsError::NonConvergence { iterations: it });
        }
        x = y.into_iter().map(|v| v / norm).collect();
    }
    Err(CfsError::NonConvergence {
        iterations: MAX_POWER_ITERATIONS,
    })
}

/// Root `s_n` of `ρ(C_n^(s)) = 1`.
pub fn gd_dimension(sys: &CfsSystem, depth: Depth, tol: f64) -> Result<f64> {
    if sys.group_count() < 2 {
        return Err(CfsError::InvalidSystem(vec![SystemViolation::TooFewGroups(
            sys.group_count(),
        )]));
    }
    let radius = |s: f64| spectral_radius(&gd_matrix(sys, s, depth).entries, 1e-14);
    let mut hi = 1.0;
    while radius(hi)? >= 1.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(CfsError::RootOutsideBracket { lo: 0.0, hi });
        }
    }
    // the radius is decreasing in s and at least 1 near 0
    let (mut lo, mut hi) = (0.0, hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if radius(mid)? >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Determinant of the `n×n` matrix with `−1` on the diagonal and `x_j − 1`
/// elsewhere in column `j`.
pub fn special_det(x: &[f64]) -> f64 {
    let n = x.len();
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let prod: f64 = x.iter().product();
    let leave_one_out: f64 = (0..n)
        .map(|k| x.iter().enumerate().filter(|&(l, _)| l != k).map(|(_, v)| v).product::<f64>())
        .sum();
    (n as f64 - 1.0) * -sign * prod + sign * leave_one_out
}

/// Radii of the full multiset-indexed matrix `B_n^(s)` and of the reduced
/// `C_n^(s)`; the two agree.
pub fn bn_matrix_check(sys: &CfsSystem, s: f64, depth: usize, budget: u128) -> Result<(f64, f64)> {
    let mut vertices: Vec<(usize, f64)> = Vec::new();
    for (g, ratios) in sys.ratios().iter().enumerate() {
        let pw: Vec<f64> = ratios.iter().map(|r| r.powf(s)).collect();
        for m in 1..=depth {
            for c in compositions(m as u32, pw.len()) {
                let w = c.iter().zip(&pw).map(|(&k, &x)| x.powi(k as i32)).product();
                vertices.push((g, w));
                let needed = (vertices.len() as u128).pow(2);
                if needed > budget {
                    return Err(CfsError::BudgetExceeded { needed, budget });
                }
            }
        }
    }
    let b: Vec<Vec<f64>> = vertices
        .iter()
        .map(|&(gi, _)| {
            vertices
                .iter()
                .map(|&(gj, w)| if gi == gj { 0.0 } else { w })
                .collect()
        })
        .collect();
    let rho_b = spectral_radius(&b, 1e-13)?;
    let rho_c = spectral_radius(&gd_matrix(sys, s, Depth::Finite(depth)).entries, 1e-13)?;
    Ok((rho_b, rho_c))
}

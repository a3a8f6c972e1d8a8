//! Empirical dimension estimates: dyadic box counting of 1-D attractors from
//! cylinder covers, box counting of 4-corner chaos-game clouds, and the
//! growth of dyadic entropy of sampled self-similar measures.
//!
//! These are rough checks on the formulas. Finite-resolution and
//! finite-sample effects bias them, usually downward.

use std::collections::HashSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CfsError, Result};
use crate::fourcorner::{chaos_game, FourCornerSystem};
use crate::system::{CfsSystem, ProbVector};

pub const DEFAULT_COVER_BUDGET: u128 = 50_000_000;
const SAMPLE_CHUNK: usize = 1 << 14;

/// Box exponents to evaluate and how many to drop from each end of the fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FitOptions {
    pub m_min: u32,
    pub m_max: u32,
    pub trim: u32,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            m_min: 6,
            m_max: 20,
            trim: 2,
        }
    }
}

impl FitOptions {
    pub fn new(m_min: u32, m_max: u32, trim: u32) -> Self {
        FitOptions { m_min, m_max, trim }
    }

    fn scales(&self) -> Result<Vec<u32>> {
        if self.m_min < 1 || self.m_max < self.m_min {
            return Err(CfsError::Parse(format!(
                "bad scale range {}..={}",
                self.m_min, self.m_max
            )));
        }
        Ok((self.m_min..=self.m_max).collect())
    }

    /// Fit window after trimming; falls back to the full range when too short.
    fn window(&self) -> (u32, u32) {
        let (lo, hi) = (self.m_min + self.trim, self.m_max.saturating_sub(self.trim));
        if hi > lo {
            (lo, hi)
        } else {
            (self.m_min, self.m_max)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingFit {
    pub scales: Vec<u32>,
    /// `log₂ N_m` for box counts, `H_m / log 2` for entropies.
    pub values: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_stderr: f64,
    pub window: (u32, u32),
    /// Slope of the one-point-per-cylinder counts, when available.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower_slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower_values: Option<Vec<f64>>,
}

/// Ordinary least squares of `y` on `x`: slope, intercept, r², slope stderr.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let stderr = if x.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, intercept, r2, stderr)
}

/// Sample-based values saturate near `log₂(samples)`; scales within
/// [`SATURATION_MARGIN`] bits of that are left out of the fit.
pub const SATURATION_MARGIN: f64 = 3.0;

fn saturation_window(scales: &[u32], values: &[f64], window: (u32, u32), samples: usize) -> (u32, u32) {
    let cap = (samples as f64).log2() - SATURATION_MARGIN;
    let last_ok = scales
        .iter()
        .zip(values)
        .filter(|(&m, &v)| m >= window.0 && v <= cap)
        .map(|(&m, _)| m)
        .max()
        .unwrap_or(window.0);
    (window.0, window.1.min(last_ok.max(window.0 + 1)))
}

fn fit(scales: Vec<u32>, values: Vec<f64>, window: (u32, u32)) -> ScalingFit {
    let (x, y): (Vec<f64>, Vec<f64>) = scales
        .iter()
        .zip(&values)
        .filter(|(m, _)| (window.0..=window.1).contains(*m))
        .map(|(&m, &v)| (m as f64, v))
        .unzip();
    let (slope, intercept, r2, slope_stderr) = least_squares(&x, &y);
    ScalingFit {
        scales,
        values,
        slope,
        intercept,
        r2,
        slope_stderr,
        window,
        lower_slope: None,
        lower_values: None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverCount {
    pub m: u32,
    /// Dyadic boxes meeting some cylinder interval.
    pub upper: u64,
    /// Dyadic boxes holding the left end of some cylinder.
    pub lower: u64,
    pub cylinders: u64,
}

struct Bitset(Vec<u64>);

impl Bitset {
    fn new(bits: usize) -> Self {
        Bitset(vec![0; bits.div_ceil(64)])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn set_range(&mut self, lo: usize, hi: usize) {
        for i in lo..=hi {
            self.set(i);
        }
    }

    fn count(&self) -> u64 {
        self.0.iter().map(|w| w.count_ones() as u64).sum()
    }
}

/// Normalised maps `x ↦ r x + c` acting on the hull rescaled to `[0,1]`.
fn normalised_maps(sys: &CfsSystem) -> Vec<(f64, f64)> {
    let (lo, hi) = sys.hull();
    let width = hi - lo;
    sys.symbols()
        .iter()
        .map(|&s| {
            let r = sys.ratio(s);
            let t = (sys.fixed_points()[s.group] - lo) / width;
            (r, t * (1.0 - r))
        })
        .collect()
}

/// Cover of the attractor by cylinder intervals shorter than `2^{−m}` of the
/// hull, counted on the dyadic grid of level `m`.
pub fn cover_boxes_1d(sys: &CfsSystem, m: u32, budget: u128) -> Result<CoverCount> {
    if m == 0 || m > 30 {
        return Err(CfsError::Parse(format!("box exponent {m} outside 1..=30")));
    }
    let maps = normalised_maps(sys);
    let boxes = 1usize << m;
    let size = 1.0 / boxes as f64;
    let cell = |x: f64| ((x * boxes as f64).floor().max(0.0) as usize).min(boxes - 1);
    let mut upper = Bitset::new(boxes);
    let mut lower = Bitset::new(boxes);
    let mut cylinders: u128 = 0;
    // (length, left end) of [left, left + length]
    let mut stack = vec![(1.0f64, 0.0f64)];
    while let Some((len, left)) = stack.pop() {
        if len < size {
            cylinders += 1;
            if cylinders > budget {
                return Err(CfsError::BudgetExceeded {
                    needed: cylinders,
                    budget,
                });
            }
            upper.set_range(cell(left), cell(left + len));
            lower.set(cell(left));
            continue;
        }
        for &(r, c) in &maps {
            stack.push((r * len, left + len * c));
        }
    }
    Ok(CoverCount {
        m,
        upper: upper.count(),
        lower: lower.count(),
        cylinders: cylinders as u64,
    })
}

/// Slope of `log₂ N_m` against `m` from [`cover_boxes_1d`].
pub fn box_dimension_1d(sys: &CfsSystem, opts: FitOptions, budget: u128) -> Result<ScalingFit> {
    let scales = opts.scales()?;
    let counts: Vec<CoverCount> = scales
        .par_iter()
        .map(|&m| cover_boxes_1d(sys, m, budget))
        .collect::<Result<_>>()?;
    let upper: Vec<f64> = counts.iter().map(|c| (c.upper as f64).log2()).collect();
    let lower: Vec<f64> = counts.iter().map(|c| (c.lower as f64).log2()).collect();
    let window = opts.window();
    let low = fit(scales.clone(), lower.clone(), window);
    let mut f = fit(scales, upper, window);
    f.lower_slope = Some(low.slope);
    f.lower_values = Some(lower);
    Ok(f)
}

/// Occupied boxes of a point cloud in `[0,1]²` at each grid level.
pub fn box_counts_2d(points: &[(f64, f64)], scales: &[u32]) -> Vec<u64> {
    scales
        .par_iter()
        .map(|&m| {
            let n = (1u64 << m) as f64;
            let max = (1u64 << m) - 1;
            let cell = |v: f64| ((v * n).floor().max(0.0) as u64).min(max);
            let set: HashSet<u64> = points.iter().map(|&(x, y)| (cell(x) << 32) | cell(y)).collect();
            set.len() as u64
        })
        .collect()
}

/// Box counting of a chaos-game cloud for a 4-corner set. Maps are drawn
/// with `weights` (uniform if `None`); weights that spread mass evenly over
/// the set, such as the natural measure, converge faster. With finitely
/// many points the slope is biased down.
pub fn box_dimension_2d(
    sys: &FourCornerSystem,
    opts: FitOptions,
    points: usize,
    seed: u64,
    weights: Option<[f64; 4]>,
) -> Result<ScalingFit> {
    let scales = opts.scales()?;
    if opts.m_max > 31 {
        return Err(CfsError::Parse("2-D box exponent must be at most 31".into()));
    }
    let cloud = chaos_game(sys, points, seed, 100, weights)?;
    let counts = box_counts_2d(&cloud, &scales);
    let values: Vec<f64> = counts.iter().map(|&c| (c as f64).log2()).collect();
    let window = saturation_window(&scales, &values, opts.window(), points);
    Ok(fit(scales, values, window))
}

/// Sample points of the self-similar measure, normalised to `[0,1]`, with
/// each coding cut once its cylinder is below `resolution`.
pub fn sample_measure(
    sys: &CfsSystem,
    p: &ProbVector,
    samples: usize,
    resolution: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let maps = normalised_maps(sys);
    let dist = WeightedIndex::new(p.flat()).map_err(|e| CfsError::InvalidProbabilities(e.to_string()))?;
    let chunks = samples.div_ceil(SAMPLE_CHUNK);
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let n = SAMPLE_CHUNK.min(samples - c * SAMPLE_CHUNK);
            (0..n)
                .map(|_| {
                    // f_{i1} ∘ … ∘ f_{ik}(0): accumulate the prefix map
                    let (mut ratio, mut offset) = (1.0, 0.0);
                    while ratio >= resolution {
                        let (r, c) = maps[dist.sample(&mut rng)];
                        offset += ratio * c;
                        ratio *= r;
                    }
                    offset
                })
                .collect()
        })
        .collect();
    Ok(parts.concat())
}

/// Shannon entropy (nats) of the empirical distribution over dyadic cells
/// of level `m`; `sorted` must be ascending.
pub fn dyadic_entropy(sorted: &[f64], m: u32) -> f64 {
    let n = (1u64 << m) as f64;
    let max = (1u64 << m) - 1;
    let total = sorted.len() as f64;
    let mut h = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let cell = ((sorted[i] * n).floor().max(0.0) as u64).min(max);
        let mut j = i + 1;
        while j < sorted.len() && ((sorted[j] * n).floor().max(0.0) as u64).min(max) == cell {
            j += 1;
        }
        let q = (j - i) as f64 / total;
        h -= q * q.ln();
        i = j;
    }
    h
}

/// Slope of `H(μ̂, D_m)/log 2` against `m`.
pub fn entropy_slope(
    sys: &CfsSystem,
    p: &ProbVector,
    samples: usize,
    opts: FitOptions,
    seed: u64,
) -> Result<ScalingFit> {
    if let Some(g) = p.concentrated_group() {
        return Err(CfsError::DegenerateMeasure(format!("all mass in group {}", g + 1)));
    }
    let scales = opts.scales()?;
    let resolution = 2f64.powi(-(opts.m_max as i32) - 4);
    let mut xs = sample_measure(sys, p, samples, resolution, seed)?;
    xs.sort_by(f64::total_cmp);
    let values: Vec<f64> = scales
        .iter()
        .map(|&m| dyadic_entropy(&xs, m) / std::f64::consts::LN_2)
        .collect();
    let window = saturation_window(&scales, &values, opts.window(), samples);
    Ok(fit(scales, values, window))
}

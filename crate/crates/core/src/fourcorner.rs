//! The generalised 4-corner set: four diagonal affine maps of the unit
//! square, one anchored at each corner.
//!
//! ```text
//! F1(x,y) = (γ11 x,             λ11 y)
//! F2(x,y) = (γ12 x,             λ21 y + 1 − λ21)
//! F3(x,y) = (γ21 x + 1 − γ21,   λ12 y)
//! F4(x,y) = (γ22 x + 1 − γ22,   λ22 y + 1 − λ22)
//! ```
//!
//! The x-projection groups {F1,F2} at 0 and {F3,F4} at 1; the y-projection
//! groups {F1,F3} at 0 and {F2,F4} at 1.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::entropy::{phi_series, PhiMethod, PhiResult, MAX_SERIES_TERMS};
use crate::error::{CfsError, Result};
use crate::roots::bisect;
use crate::symbolic::LnFactorial;
use crate::system::{CfsSystem, ProbVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourCornerSystem {
    pub gamma: [[f64; 2]; 2],
    pub lambda: [[f64; 2]; 2],
}

/// One affine map `(x, y) ↦ (ax x + tx, ay y + ty)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagonalMap {
    pub ax: f64,
    pub tx: f64,
    pub ay: f64,
    pub ty: f64,
}

impl DiagonalMap {
    pub fn apply(&self, (x, y): (f64, f64)) -> (f64, f64) {
        (self.ax * x + self.tx, self.ay * y + self.ty)
    }
}

impl FourCornerSystem {
    pub fn new(gamma: [[f64; 2]; 2], lambda: [[f64; 2]; 2]) -> Self {
        FourCornerSystem { gamma, lambda }
    }

    /// Horizontal contraction of F1..F4.
    pub fn x_ratios(&self) -> [f64; 4] {
        let g = &self.gamma;
        [g[0][0], g[0][1], g[1][0], g[1][1]]
    }

    /// Vertical contraction of F1..F4.
    pub fn y_ratios(&self) -> [f64; 4] {
        let l = &self.lambda;
        [l[0][0], l[1][0], l[0][1], l[1][1]]
    }

    pub fn maps(&self) -> [DiagonalMap; 4] {
        let a = self.x_ratios();
        let b = self.y_ratios();
        let tx = [0.0, 0.0, 1.0 - a[2], 1.0 - a[3]];
        let ty = [0.0, 1.0 - b[1], 0.0, 1.0 - b[3]];
        std::array::from_fn(|k| DiagonalMap {
            ax: a[k],
            tx: tx[k],
            ay: b[k],
            ty: ty[k],
        })
    }

    pub fn x_projection(&self) -> Result<CfsSystem> {
        let g = &self.gamma;
        CfsSystem::new(vec![0.0, 1.0], vec![vec![g[0][0], g[0][1]], vec![g[1][0], g[1][1]]])
    }

    pub fn y_projection(&self) -> Result<CfsSystem> {
        let l = &self.lambda;
        CfsSystem::new(vec![0.0, 1.0], vec![vec![l[0][0], l[0][1]], vec![l[1][0], l[1][1]]])
    }

    /// The mirror image in the diagonal, with F2 and F3 relabelled so the
    /// corner convention is kept; see [`transpose_p`].
    pub fn transposed(&self) -> FourCornerSystem {
        FourCornerSystem {
            gamma: self.lambda,
            lambda: self.gamma,
        }
    }
}

/// Exchange F2 and F3, matching [`FourCornerSystem::transposed`].
pub fn transpose_p(p: &[f64; 4]) -> [f64; 4] {
    [p[0], p[2], p[1], p[3]]
}

pub fn x_grouping(p: &[f64; 4]) -> Vec<Vec<f64>> {
    vec![vec![p[0], p[1]], vec![p[2], p[3]]]
}

pub fn y_grouping(p: &[f64; 4]) -> Vec<Vec<f64>> {
    vec![vec![p[0], p[2]], vec![p[1], p[3]]]
}

pub fn check_p(p: &[f64; 4]) -> Result<()> {
    if p.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(CfsError::InvalidProbabilities(format!("{p:?} has a negative or non-finite entry")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(CfsError::InvalidProbabilities(format!("entries sum to {sum}, not 1")));
    }
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ConditionReport {
    /// Failures of the rectangular open set conditions.
    pub violations: Vec<String>,
    /// Failures of the domination conditions `λ ≤ γ` under the map pairing.
    pub plus_violations: Vec<String>,
}

impl ConditionReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn plus_ok(&self) -> bool {
        self.plus_violations.is_empty()
    }
}

pub fn validate_4c(sys: &FourCornerSystem) -> ConditionReport {
    let (g, l) = (&sys.gamma, &sys.lambda);
    let mut r = ConditionReport::default();
    for i in 0..2 {
        for j in 0..2 {
            for (name, v) in [("gamma", g[i][j]), ("lambda", l[i][j])] {
                if !(v > 0.0 && v < 1.0) {
                    r.violations.push(format!("{name}[{}][{}] = {v} is outside (0,1)", i + 1, j + 1));
                }
            }
        }
    }
    let sums = [
        ("gamma11 + gamma21", g[0][0] + g[1][0]),
        ("gamma12 + gamma22", g[0][1] + g[1][1]),
        ("lambda11 + lambda21", l[0][0] + l[1][0]),
        ("lambda12 + lambda22", l[0][1] + l[1][1]),
    ];
    for (name, v) in sums {
        if v > 1.0 {
            r.violations.push(format!("{name} = {v} > 1"));
        }
    }
    let anti = (g[0][1] + g[1][0]).min(l[0][1] + l[1][0]);
    if anti > 1.0 {
        r.violations.push(format!("min(gamma12 + gamma21, lambda12 + lambda21) = {anti} > 1"));
    }
    let diag = (g[0][0] + g[1][1]).min(l[0][0] + l[1][1]);
    if diag > 1.0 {
        r.violations.push(format!("min(gamma11 + gamma22, lambda11 + lambda22) = {diag} > 1"));
    }
    let (a, b) = (sys.x_ratios(), sys.y_ratios());
    for k in 0..4 {
        if b[k] > a[k] {
            r.plus_violations.push(format!("map {}: vertical ratio {} exceeds horizontal ratio {}", k + 1, b[k], a[k]));
        }
    }
    r
}

/// `(χ_x, χ_y)`.
pub fn chis(sys: &FourCornerSystem, p: &[f64; 4]) -> (f64, f64) {
    let chi = |r: [f64; 4]| -> f64 {
        -(0..4).filter(|&k| p[k] > 0.0).map(|k| p[k] * r[k].ln()).sum::<f64>()
    };
    (chi(sys.x_ratios()), chi(sys.y_ratios()))
}

pub fn entropy_4(p: &[f64; 4]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

fn single_atom(p: &[f64; 4]) -> bool {
    p.contains(&1.0)
}

/// One pair of the explicit double series,
/// `Σ_k Σ_q C(k,q) e (a^{q+1} b^{k−q} + b^{q+1} a^{k−q}) log((q+1)/(k+1))`.
fn pair_series(a: f64, b: f64, e: f64, tol: f64, lf: &mut LnFactorial) -> Result<(f64, f64, usize)> {
    let rho = a + b;
    if a == 0.0 || b == 0.0 || e == 0.0 {
        return Ok((0.0, 0.0, 0));
    }
    let tail = |k: usize| -> f64 {
        let kf = k as f64;
        rho.powf(kf + 1.0) / e * ((kf + 2.0).ln() + 1.0 / (e * (kf + 2.0)))
    };
    let mut k_max = 0;
    while tail(k_max) >= tol {
        k_max += 1;
        if k_max > MAX_SERIES_TERMS {
            return Err(CfsError::SeriesTooLong {
                max_terms: MAX_SERIES_TERMS,
                mass: rho,
            });
        }
    }
    let (la, lb) = (a.ln(), b.ln());
    let mut sum = 0.0;
    for k in 1..=k_max {
        let lk1 = ((k + 1) as f64).ln();
        for q in 0..=k {
            let lc = lf.get(k) - lf.get(q) - lf.get(k - q);
            let (qf, rf) = ((q + 1) as f64, (k - q) as f64);
            let w = (lc + qf * la + rf * lb).exp() + (lc + qf * lb + rf * la).exp();
            sum += w * (qf.ln() - lk1);
        }
    }
    Ok((e * sum, rho * e * tail(k_max), k_max + 1))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhiXY {
    pub x: PhiResult,
    pub y: PhiResult,
    /// `p` is a single atom; both corrections are 0.
    pub degenerate: bool,
}

fn series_result(value: f64, tail_bound: f64, terms_used: usize) -> PhiResult {
    PhiResult {
        value,
        tail_bound,
        terms_used,
        method: PhiMethod::Series,
        stderr: None,
        samples: None,
    }
}

fn degenerate_grouping(groups: &[Vec<f64>]) -> bool {
    groups.iter().filter(|g| g.iter().sum::<f64>() > 0.0).count() < 2
}

/// `Φ_x` and `Φ_y` from their explicit double series.
pub fn phi_xy(p: &[f64; 4], tol: f64) -> Result<PhiXY> {
    check_p(p)?;
    if single_atom(p) {
        let zero = series_result(0.0, 0.0, 0);
        return Ok(PhiXY {
            x: zero.clone(),
            y: zero,
            degenerate: true,
        });
    }
    let mut lf = LnFactorial::new(256);
    let mut one = |groups: Vec<Vec<f64>>, axis: &str| -> Result<PhiResult> {
        if degenerate_grouping(&groups) {
            return Err(CfsError::DegenerateMeasure(format!("{axis}-projection has one live group")));
        }
        let (a1, b1) = (groups[0][0], groups[0][1]);
        let (a2, b2) = (groups[1][0], groups[1][1]);
        let first = pair_series(a1, b1, a2 + b2, tol / 2.0, &mut lf)?;
        let second = pair_series(a2, b2, a1 + b1, tol / 2.0, &mut lf)?;
        Ok(series_result(first.0 + second.0, first.1 + second.1, first.2.max(second.2)))
    };
    let x = one(x_grouping(p), "x")?;
    let y = one(y_grouping(p), "y")?;
    Ok(PhiXY {
        x,
        y,
        degenerate: false,
    })
}

/// The same corrections through the generic overlap series on the two
/// projected systems.
pub fn phi_xy_generic(sys: &FourCornerSystem, p: &[f64; 4], tol: f64) -> Result<(PhiResult, PhiResult)> {
    let xs = sys.x_projection()?;
    let ys = sys.y_projection()?;
    let x = phi_series(&xs, &ProbVector::new(&xs, x_grouping(p))?, tol)?;
    let y = phi_series(&ys, &ProbVector::new(&ys, y_grouping(p))?, tol)?;
    Ok((x, y))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FourCornerReport {
    pub dimension: f64,
    /// Which of the four formulas was used, 1-based; 0 for a single atom.
    pub case: u8,
    pub degenerate: bool,
    pub entropy: f64,
    pub chi_x: f64,
    pub chi_y: f64,
    pub phi_x: f64,
    pub phi_y: f64,
    /// Largest disagreement among all formulas whose conditions hold.
    pub applicable_spread: f64,
    pub tolerance: f64,
}

/// Dimension of the self-affine measure with weights `p`.
pub fn measure_dimension_4c(sys: &FourCornerSystem, p: &[f64; 4], tol: f64) -> Result<FourCornerReport> {
    check_p(p)?;
    let cond = validate_4c(sys);
    if !cond.ok() {
        return Err(CfsError::ConditionsNotMet(cond.violations));
    }
    let h = entropy_4(p);
    let (cx, cy) = chis(sys, p);
    let phi = phi_xy(p, tol)?;
    let (fx, fy) = (phi.x.value, phi.y.value);
    if phi.degenerate {
        return Ok(FourCornerReport {
            dimension: 0.0,
            case: 0,
            degenerate: true,
            entropy: h,
            chi_x: cx,
            chi_y: cy,
            phi_x: 0.0,
            phi_y: 0.0,
            applicable_spread: 0.0,
            tolerance: tol,
        });
    }
    let formulas = [
        (cy >= cx && cx >= h + fx, (h + fx) / cx - fx / cy),
        (cy >= cx && h + fx >= cx, 1.0 + (h - cx) / cy),
        (cx >= cy && cy >= h + fy, (h + fy) / cy - fy / cx),
        (cx >= cy && h + fy >= cy, 1.0 + (h - cy) / cx),
    ];
    let Some(idx) = formulas.iter().position(|f| f.0) else {
        return Err(CfsError::NoCaseApplies { chi_x: cx, chi_y: cy, h });
    };
    // conditions within a small slack of holding count as boundary cases
    let slack = 1e-9 * (cx + cy);
    let near = [
        cy + slack >= cx && cx + slack >= h + fx,
        cy + slack >= cx && h + fx + slack >= cx,
        cx + slack >= cy && cy + slack >= h + fy,
        cx + slack >= cy && h + fy + slack >= cy,
    ];
    let chosen = formulas[idx].1;
    let applicable_spread = (0..4)
        .filter(|&k| near[k])
        .map(|k| (formulas[k].1 - chosen).abs())
        .fold(0.0, f64::max);
    Ok(FourCornerReport {
        dimension: chosen,
        case: idx as u8 + 1,
        degenerate: false,
        entropy: h,
        chi_x: cx,
        chi_y: cy,
        phi_x: fx,
        phi_y: fy,
        applicable_spread,
        tolerance: tol,
    })
}

/// `Σ_k γ_k λ_k^{s−1} − 1` over the four maps.
fn natural_equation(sys: &FourCornerSystem, s: f64) -> f64 {
    let (a, b) = (sys.x_ratios(), sys.y_ratios());
    (0..4).map(|k| a[k] * b[k].powf(s - 1.0)).sum::<f64>() - 1.0
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NaturalMeasure {
    pub p: [f64; 4],
    pub s: f64,
}

/// Root `s` of `Σ γ_k λ_k^{s−1} = 1` and the weights `p_k = γ_k λ_k^{s−1}`.
pub fn natural_p(sys: &FourCornerSystem) -> Result<NaturalMeasure> {
    let f = |s: f64| natural_equation(sys, s);
    let s = bisect(f, 1.0, 2.0, 1e-15).or_else(|_| bisect(f, 0.5, 3.0, 1e-15))?;
    let (a, b) = (sys.x_ratios(), sys.y_ratios());
    let p = std::array::from_fn(|k| a[k] * b[k].powf(s - 1.0));
    Ok(NaturalMeasure { p, s })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuffCheck {
    pub value: f64,
    pub holds: bool,
    pub s: f64,
}

/// Left side of the sufficient condition for `h + Φ_x ≥ χ_x` at the
/// natural measure, built from the lower bound on `Φ_x`.
pub fn suff_value(sys: &FourCornerSystem, s: f64) -> f64 {
    let (a, b) = (sys.x_ratios(), sys.y_ratios());
    let p: [f64; 4] = std::array::from_fn(|k| a[k] * b[k].powf(s - 1.0));
    let partner = [1, 0, 3, 2];
    (0..4)
        .map(|k| p[k] * ((1.0 - p[partner[k]]) / b[k].powf(s - 1.0)).ln())
        .sum()
}

pub fn suff_check(sys: &FourCornerSystem) -> Result<SuffCheck> {
    let nat = natural_p(sys)?;
    let value = suff_value(sys, nat.s);
    Ok(SuffCheck {
        value,
        holds: value > 0.0,
        s: nat.s,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SetDimension {
    pub dimension: f64,
    /// All conditions hold, so `dimension` is the Hausdorff dimension;
    /// otherwise it is only an upper bound.
    pub certified: bool,
    pub natural_p: [f64; 4],
    pub suff_value: f64,
    pub checked: Vec<String>,
    pub failed: Vec<String>,
}

pub fn set_dimension_4c(sys: &FourCornerSystem) -> Result<SetDimension> {
    let cond = validate_4c(sys);
    if !cond.ok() {
        return Err(CfsError::ConditionsNotMet(cond.violations));
    }
    let nat = natural_p(sys)?;
    let suff = suff_value(sys, nat.s);
    let mut checked = vec!["rectangular open set condition".to_string()];
    let mut failed = Vec::new();
    if cond.plus_ok() {
        checked.push("vertical ratios dominated by horizontal ratios".into());
    } else {
        failed.extend(cond.plus_violations);
    }
    if suff > 0.0 {
        checked.push(format!("sufficient entropy condition ({suff} > 0)"));
    } else {
        failed.push(format!("sufficient entropy condition fails ({suff} <= 0)"));
    }
    Ok(SetDimension {
        dimension: nat.s,
        certified: failed.is_empty(),
        natural_p: nat.p,
        suff_value: suff,
        checked,
        failed,
    })
}

/// Chaos-game orbit. Maps are drawn with `weights` (uniform if `None`);
/// the first `burn_in` points are discarded.
pub fn chaos_game(
    sys: &FourCornerSystem,
    points: usize,
    seed: u64,
    burn_in: usize,
    weights: Option<[f64; 4]>,
) -> Result<Vec<(f64, f64)>> {
    let maps = sys.maps();
    let w = weights.unwrap_or([0.25; 4]);
    let dist = WeightedIndex::new(w).map_err(|e| CfsError::InvalidProbabilities(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = (0.5, 0.5);
    for _ in 0..burn_in {
        z = maps[dist.sample(&mut rng)].apply(z);
    }
    let mut out = Vec::with_capacity(points);
    for _ in 0..points {
        z = maps[dist.sample(&mut rng)].apply(z);
        out.push(z);
    }
    Ok(out)
}

/// Axis-aligned rectangle `[x0, x0+w] × [y0, y0+h]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

pub const MAX_CYLINDERS: u128 = 1 << 20;

/// Images of the unit square under all compositions of length `depth`.
pub fn cylinders(sys: &FourCornerSystem, depth: usize) -> Result<Vec<Rect>> {
    let needed = 4u128.checked_pow(depth as u32).unwrap_or(u128::MAX);
    if needed > MAX_CYLINDERS {
        return Err(CfsError::BudgetExceeded {
            needed,
            budget: MAX_CYLINDERS,
        });
    }
    let maps = sys.maps();
    let mut rects = vec![Rect { x: 0.0, y: 0.0, w: 1.0, h: 1.0 }];
    for _ in 0..depth {
        rects = rects
            .iter()
            .flat_map(|r| {
                maps.iter().map(move |m| Rect {
                    x: m.ax * r.x + m.tx,
                    y: m.ay * r.y + m.ty,
                    w: m.ax * r.w,
                    h: m.ay * r.h,
                })
            })
            .collect();
    }
    Ok(rects)
}

pub fn cylinders_svg(sys: &FourCornerSystem, depth: usize) -> Result<String> {
    let rects = cylinders(sys, depth)?;
    let mut s = String::from(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" viewBox=\"0 0 1 1\" width=\"512\" height=\"512\">\n\
         <path d=\"M0 0H1V1H0Z\" fill=\"white\" stroke=\"black\" stroke-width=\"0.002\"/>\n",
    );
    for r in rects {
        // SVG's y axis points down
        let _ = writeln!(
            s,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"black\"/>",
            r.x,
            (1.0 - r.y - r.h).max(0.0),
            r.w,
            r.h
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Grayscale raster of a point cloud: black points on white, row 0 at the top.
pub fn rasterize(points: &[(f64, f64)], size: usize) -> Vec<u8> {
    let mut px = vec![255u8; size * size];
    for &(x, y) in points {
        let col = ((x * size as f64) as usize).min(size - 1);
        let row = (((1.0 - y) * size as f64) as usize).min(size - 1);
        px[row * size + col] = 0;
    }
    px
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RenderMode {
    Cylinders { depth: usize },
    Attractor { points: usize, seed: u64, burn_in: usize, size: usize },
}

/// Write the picture to `out`: SVG for cylinders; binary PPM or, for a
/// `.png` path, PNG for the attractor.
pub fn render_4c(sys: &FourCornerSystem, mode: RenderMode, out: &Path) -> Result<()> {
    match mode {
        RenderMode::Cylinders { depth } => {
            std::fs::write(out, cylinders_svg(sys, depth)?)?;
        }
        RenderMode::Attractor {
            points,
            seed,
            burn_in,
            size,
        } => {
            let cloud = chaos_game(sys, points, seed, burn_in, None)?;
            let px = rasterize(&cloud, size);
            let is_png = out
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("png"));
            if is_png {
                image::GrayImage::from_raw(size as u32, size as u32, px)
                    .expect("buffer matches dimensions")
                    .save(out)
                    .map_err(|e| CfsError::Io(std::io::Error::other(e)))?;
            } else {
                let mut w = BufWriter::new(File::create(out)?);
                write!(w, "P6\n{size} {size}\n255\n")?;
                for v in px {
                    w.write_all(&[v, v, v])?;
                }
                w.flush()?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn reference_system() -> FourCornerSystem {
        FourCornerSystem::new([[0.8, 0.1], [0.1, 0.8]], [[0.45, 0.09], [0.09, 0.45]])
    }

    const S_STAR: f64 = 1.643_016_706_635_022;

    #[test]
    fn condition_examples() {
        let c = validate_4c(&reference_system());
        assert!(c.ok() && c.plus_ok(), "{c:?}");
        let big = FourCornerSystem::new([[0.6; 2]; 2], [[0.6; 2]; 2]);
        assert!(!validate_4c(&big).ok());
        let q = FourCornerSystem::new([[0.25; 2]; 2], [[0.25; 2]; 2]);
        let c = validate_4c(&q);
        assert!(c.ok() && c.plus_ok());
    }

    #[test]
    fn chi_examples() {
        let h = FourCornerSystem::new([[0.5; 2]; 2], [[0.5; 2]; 2]);
        let (x, y) = chis(&h, &[0.25; 4]);
        assert!((x - 2f64.ln()).abs() < 1e-15 && (y - 2f64.ln()).abs() < 1e-15);
        let sys = reference_system();
        let (x, y) = chis(&sys, &[1.0, 0.0, 0.0, 0.0]);
        assert!((x + 0.8f64.ln()).abs() < 1e-15 && (y + 0.45f64.ln()).abs() < 1e-15);
        let (x, y) = chis(&sys, &[0.25; 4]);
        assert!((x - 1.262_864_322_154_127_7).abs() < 1e-14);
        assert!((y - 1.603_226_652_434_821_8).abs() < 1e-14);
    }

    #[test]
    fn y_ratios_pair_f2_with_lambda21() {
        let sys = FourCornerSystem::new([[0.11, 0.12], [0.21, 0.22]], [[0.31, 0.32], [0.41, 0.42]]);
        assert_eq!(sys.y_ratios(), [0.31, 0.41, 0.32, 0.42]);
        let m = sys.maps();
        assert_eq!(m[1].apply((0.0, 1.0)), (0.0, 1.0));
        assert_eq!(m[2].apply((1.0, 0.0)), (1.0, 0.0));
        // y-projection groups: {F1,F3} fixed at 0, {F2,F4} at 1
        let y = sys.y_projection().unwrap();
        assert_eq!(y.ratios(), &[vec![0.31, 0.32], vec![0.41, 0.42]]);
    }

    #[test]
    fn phi_xy_degenerate_atom() {
        let r = phi_xy(&[1.0, 0.0, 0.0, 0.0], 1e-12).unwrap();
        assert!(r.degenerate);
        assert_eq!((r.x.value, r.y.value), (0.0, 0.0));
        let d = measure_dimension_4c(&reference_system(), &[1.0, 0.0, 0.0, 0.0], 1e-12).unwrap();
        assert_eq!(d.dimension, 0.0);
        assert!(d.degenerate);
    }

    #[test]
    fn phi_xy_uniform_values() {
        let sys = reference_system();
        let r = phi_xy(&[0.25; 4], 1e-13).unwrap();
        assert!((r.x.value - -0.217_274_999_237_036_1).abs() < 1e-10);
        assert!((r.x.value - r.y.value).abs() < 1e-13);
        let (gx, gy) = phi_xy_generic(&sys, &[0.25; 4], 1e-13).unwrap();
        assert!((r.x.value - gx.value).abs() < 1e-10);
        assert!((r.y.value - gy.value).abs() < 1e-10);
    }

    #[test]
    fn natural_measure_examples() {
        let q = FourCornerSystem::new([[0.25; 2]; 2], [[0.25; 2]; 2]);
        let n = natural_p(&q).unwrap();
        assert!((n.s - 1.0).abs() < 1e-12);
        assert!(n.p.iter().all(|v| (v - 0.25).abs() < 1e-12));

        let sys = reference_system();
        let n = natural_p(&sys).unwrap();
        assert!((n.s - S_STAR).abs() < 1e-12);
        assert!((n.p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((n.p[0] - 0.478_740_136_955_571_1).abs() < 1e-12);
        assert!((n.p[1] - 0.021_259_863_044_428_912).abs() < 1e-12);
        assert!(natural_equation(&sys, n.s).abs() < 1e-12);
    }

    #[test]
    fn natural_measure_for_square_maps_is_similarity_dimension() {
        // γ = λ per map: the maps are similarities and s solves Σ r^s = 1
        let sys = FourCornerSystem::new([[0.3, 0.2], [0.2, 0.4]], [[0.3, 0.2], [0.2, 0.4]]);
        let n = natural_p(&sys).unwrap();
        let sim = crate::dimension::similarity_dimension(&sys.x_ratios()).unwrap();
        assert!((n.s - sim).abs() < 1e-12);
    }

    #[test]
    fn suff_examples() {
        let c = suff_check(&reference_system()).unwrap();
        assert!(c.holds);
        assert!((c.value - 0.509_179_981_398_651_3).abs() < 1e-12);
    }

    #[test]
    fn measure_dimension_examples() {
        let sys = reference_system();
        let n = natural_p(&sys).unwrap();
        let r = measure_dimension_4c(&sys, &n.p, 1e-13).unwrap();
        assert_eq!(r.case, 2);
        assert!((r.dimension - n.s).abs() < 1e-10);
        assert!((r.entropy - 0.869_018_096_873_263_5).abs() < 1e-12);
        assert!((r.phi_x - -0.036_193_953_397_502_64).abs() < 1e-10);

        let eq = FourCornerSystem::new([[0.3; 2]; 2], [[0.3; 2]; 2]);
        let r = measure_dimension_4c(&eq, &[0.25; 4], 1e-13).unwrap();
        assert!(r.applicable_spread < 1e-9);
    }

    #[test]
    fn set_dimension_examples() {
        let d = set_dimension_4c(&reference_system()).unwrap();
        assert!(d.certified);
        assert!((d.dimension - S_STAR).abs() < 1e-12);
        let q = FourCornerSystem::new([[0.25; 2]; 2], [[0.25; 2]; 2]);
        assert!((set_dimension_4c(&q).unwrap().dimension - 1.0).abs() < 1e-12);
        let loose = FourCornerSystem::new([[0.3, 0.1], [0.1, 0.3]], [[0.45, 0.09], [0.09, 0.45]]);
        let d = set_dimension_4c(&loose).unwrap();
        assert!(!d.certified);
        assert!(!d.failed.is_empty());
        let bad = FourCornerSystem::new([[0.6; 2]; 2], [[0.6; 2]; 2]);
        assert!(matches!(set_dimension_4c(&bad), Err(CfsError::ConditionsNotMet(_))));
    }

    #[test]
    fn depth_one_cylinders_sit_at_corners() {
        let r = cylinders(&reference_system(), 1).unwrap();
        assert_eq!(r.len(), 4);
        assert_eq!(r[0], Rect { x: 0.0, y: 0.0, w: 0.8, h: 0.45 });
        assert_eq!(r[1], Rect { x: 0.0, y: 1.0 - 0.09, w: 0.1, h: 0.09 });
        assert_eq!(r[2], Rect { x: 1.0 - 0.1, y: 0.0, w: 0.1, h: 0.09 });
        let svg = cylinders_svg(&reference_system(), 1).unwrap();
        assert_eq!(svg.matches("fill=\"black\"").count(), 4);
        assert_eq!(svg.matches("<rect").count(), 4);
    }

    #[test]
    fn chaos_game_stays_in_square() {
        let pts = chaos_game(&reference_system(), 1_000_000, 3, 100, None).unwrap();
        assert!(pts.iter().all(|&(x, y)| (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)));
        assert_eq!(pts[..10], chaos_game(&reference_system(), 10, 3, 100, None).unwrap()[..]);
    }

    fn arb_p() -> impl Strategy<Value = [f64; 4]> {
        prop::array::uniform4(0.02f64..1.0).prop_map(|v| {
            let s: f64 = v.iter().sum();
            let mut p = v.map(|x| x / s);
            p[3] = 1.0 - p[0] - p[1] - p[2];
            p
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn explicit_series_matches_generic(p in arb_p()) {
            let sys = reference_system();
            let e = phi_xy(&p, 1e-12).unwrap();
            let (gx, gy) = phi_xy_generic(&sys, &p, 1e-12).unwrap();
            prop_assert!((e.x.value - gx.value).abs() <= 1e-10 + e.x.tail_bound + gx.tail_bound);
            prop_assert!((e.y.value - gy.value).abs() <= 1e-10 + e.y.tail_bound + gy.tail_bound);
        }

        #[test]
        fn transposition_swaps_axes(p in arb_p()) {
            let sys = reference_system();
            let t = sys.transposed();
            let pt = transpose_p(&p);
            let (cx, cy) = chis(&sys, &p);
            let (tx, ty) = chis(&t, &pt);
            prop_assert!((cx - ty).abs() < 1e-14 && (cy - tx).abs() < 1e-14);
            let a = phi_xy(&p, 1e-12).unwrap();
            let b = phi_xy(&pt, 1e-12).unwrap();
            prop_assert!((a.x.value - b.y.value).abs() < 1e-13);
            prop_assert!((a.y.value - b.x.value).abs() < 1e-13);
        }
    }

    #[test]
    fn dimension_is_continuous_across_equal_exponents() {
        // F2 is (0.2, 0.1) and F3 is (0.1, 0.2), so χ_x − χ_y changes sign at p2 = p3
        let sys = FourCornerSystem::new([[0.4, 0.2], [0.1, 0.4]], [[0.4, 0.2], [0.1, 0.4]]);
        assert_eq!(sys.y_ratios(), [0.4, 0.1, 0.2, 0.4]);
        assert!(validate_4c(&sys).ok());
        let mut prev: Option<f64> = None;
        for i in 0..=400 {
            let d = 0.1 * (i as f64 / 400.0 - 0.5);
            let p = [0.3, 0.2 + d, 0.2 - d, 0.3];
            let r = measure_dimension_4c(&sys, &p, 1e-13).unwrap();
            if let Some(v) = prev {
                assert!((r.dimension - v).abs() < 2e-3, "jump at step {i}");
            }
            assert!(r.applicable_spread < 1e-8);
            prev = Some(r.dimension);
        }
    }
}

//! Systems of similarities `f_{i,j}(x) = λ_{i,j} x + t_i (1 - λ_{i,j})` grouped by
//! shared fixed point, their probability vectors, and 1-D affine maps.
//!
//! Symbols are stored 0-based internally; the JSON word format and all
//! user-facing text use 1-based `(group, member)` pairs.

use std::fmt;

use num_rational::BigRational;
use num_traits::{Num, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{CfsError, Result, SystemViolation};

pub type Rational = BigRational;

/// Index pair `(group, member)`, 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol {
    pub group: usize,
    pub member: usize,
}

impl Symbol {
    pub const fn new(group: usize, member: usize) -> Self {
        Self { group, member }
    }

    /// Builds a symbol from the 1-based pair used in text formats.
    pub fn from_one_based(group: usize, member: usize) -> Result<Self> {
        if group == 0 || member == 0 {
            return Err(CfsError::InvalidSymbol { group, member });
        }
        Ok(Self::new(group - 1, member - 1))
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.group + 1, self.member + 1)
    }
}

impl Serialize for Symbol {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.group + 1, self.member + 1].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Symbol {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [g, m] = <[usize; 2]>::deserialize(d)?;
        Symbol::from_one_based(g, m).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NumberMode {
    Float,
    Rational,
}

/// Fixed points and ratios over some scalar type.
#[derive(Clone, Debug, PartialEq)]
pub struct Params<T> {
    pub fixed_points: Vec<T>,
    pub ratios: Vec<Vec<T>>,
}

impl<T: Clone> Params<T> {
    pub fn ratio(&self, s: Symbol) -> &T {
        &self.ratios[s.group][s.member]
    }

    pub fn fixed_point(&self, group: usize) -> &T {
        &self.fixed_points[group]
    }
}

/// Checks every system invariant and returns all violations found.
pub fn validate_system(fixed_points: &[f64], ratios: &[Vec<f64>]) -> Vec<SystemViolation> {
    let mut out = Vec::new();
    if fixed_points.len() != ratios.len() {
        out.push(SystemViolation::ShapeMismatch {
            fixed_points: fixed_points.len(),
            groups: ratios.len(),
        });
    }
    if ratios.len() < 2 {
        out.push(SystemViolation::TooFewGroups(ratios.len()));
    }
    for (i, group) in ratios.iter().enumerate() {
        if group.is_empty() {
            out.push(SystemViolation::EmptyGroup { group: i + 1 });
        }
        for (j, &r) in group.iter().enumerate() {
            if !(r > 0.0 && r < 1.0) {
                out.push(SystemViolation::RatioOutOfRange {
                    group: i + 1,
                    member: j + 1,
                    value: r,
                });
            }
        }
    }
    for i in 0..fixed_points.len() {
        for k in i + 1..fixed_points.len() {
            if fixed_points[i] == fixed_points[k] {
                out.push(SystemViolation::DuplicateFixedPoint {
                    first: i + 1,
                    second: k + 1,
                    value: fixed_points[i],
                });
            }
        }
    }
    out
}

fn validate_exact(p: &Params<Rational>) -> Vec<SystemViolation> {
    let mut out = Vec::new();
    let zero = Rational::zero();
    let one = Rational::one();
    for (i, group) in p.ratios.iter().enumerate() {
        for (j, r) in group.iter().enumerate() {
            if !(*r > zero && *r < one) {
                out.push(SystemViolation::RatioOutOfRange {
                    group: i + 1,
                    member: j + 1,
                    value: r.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
    }
    for i in 0..p.fixed_points.len() {
        for k in i + 1..p.fixed_points.len() {
            if p.fixed_points[i] == p.fixed_points[k] {
                out.push(SystemViolation::DuplicateFixedPoint {
                    first: i + 1,
                    second: k + 1,
                    value: p.fixed_points[i].to_f64().unwrap_or(f64::NAN),
                });
            }
        }
    }
    out
}

/// A validated common-fixed-point system. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct CfsSystem {
    float: Params<f64>,
    exact: Option<Params<Rational>>,
}

impl CfsSystem {
    pub fn new(fixed_points: Vec<f64>, ratios: Vec<Vec<f64>>) -> Result<Self> {
        let violations = validate_system(&fixed_points, &ratios);
        if !violations.is_empty() {
            return Err(CfsError::InvalidSystem(violations));
        }
        Ok(Self {
            float: Params {
                fixed_points,
                ratios,
            },
            exact: None,
        })
    }

    /// Exact-rational system; the float view is derived by rounding.
    pub fn new_rational(fixed_points: Vec<Rational>, ratios: Vec<Vec<Rational>>) -> Result<Self> {
        let float = Params {
            fixed_points: fixed_points.iter().map(rat_to_f64).collect(),
            ratios: ratios
                .iter()
                .map(|g| g.iter().map(rat_to_f64).collect())
                .collect(),
        };
        let exact = Params {
            fixed_points,
            ratios,
        };
        let mut violations = validate_system(&float.fixed_points, &float.ratios);
        // the exact check supersedes float range/duplicate checks
        violations.retain(|v| {
            !matches!(
                v,
                SystemViolation::RatioOutOfRange { .. } | SystemViolation::DuplicateFixedPoint { .. }
            )
        });
        violations.extend(validate_exact(&exact));
        if !violations.is_empty() {
            return Err(CfsError::InvalidSystem(violations));
        }
        Ok(Self {
            float,
            exact: Some(exact),
        })
    }

    pub fn mode(&self) -> NumberMode {
        if self.exact.is_some() {
            NumberMode::Rational
        } else {
            NumberMode::Float
        }
    }

    pub fn params(&self) -> &Params<f64> {
        &self.float
    }

    pub fn exact_params(&self) -> Option<&Params<Rational>> {
        self.exact.as_ref()
    }

    pub fn fixed_points(&self) -> &[f64] {
        &self.float.fixed_points
    }

    pub fn ratios(&self) -> &[Vec<f64>] {
        &self.float.ratios
    }

    /// Number of groups `N`.
    pub fn group_count(&self) -> usize {
        self.float.ratios.len()
    }

    pub fn group_size(&self, group: usize) -> usize {
        self.float.ratios[group].len()
    }

    /// Total number of maps `L`.
    pub fn symbol_count(&self) -> usize {
        self.float.ratios.iter().map(Vec::len).sum()
    }

    pub fn ratio(&self, s: Symbol) -> f64 {
        self.float.ratios[s.group][s.member]
    }

    /// All symbols in lexicographic order.
    pub fn symbols(&self) -> Vec<Symbol> {
        self.float
            .ratios
            .iter()
            .enumerate()
            .flat_map(|(g, r)| (0..r.len()).map(move |m| Symbol::new(g, m)))
            .collect()
    }

    pub fn contains(&self, s: Symbol) -> bool {
        s.group < self.group_count() && s.member < self.group_size(s.group)
    }

    pub fn check_symbol(&self, s: Symbol) -> Result<()> {
        if self.contains(s) {
            Ok(())
        } else {
            Err(CfsError::InvalidSymbol {
                group: s.group + 1,
                member: s.member + 1,
            })
        }
    }

    /// Position of a symbol in [`CfsSystem::symbols`] order.
    pub fn flat_index(&self, s: Symbol) -> usize {
        self.float.ratios[..s.group]
            .iter()
            .map(Vec::len)
            .sum::<usize>()
            + s.member
    }

    /// Smallest and largest fixed point; the attractor lies between them.
    pub fn hull(&self) -> (f64, f64) {
        let t = &self.float.fixed_points;
        let lo = t.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    pub fn all_ratios(&self) -> Vec<f64> {
        self.float.ratios.iter().flatten().copied().collect()
    }
}

pub(crate) fn rat_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// A 1-D similarity `x ↦ ratio·x + intercept`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AffineMap1D<T = f64> {
    pub ratio: T,
    pub intercept: T,
}

impl<T: Num + Clone> AffineMap1D<T> {
    pub fn new(ratio: T, intercept: T) -> Self {
        Self { ratio, intercept }
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero())
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            ratio: self.ratio.clone() * other.ratio.clone(),
            intercept: self.ratio.clone() * other.intercept.clone() + self.intercept.clone(),
        }
    }

    pub fn apply(&self, x: T) -> T {
        self.ratio.clone() * x + self.intercept.clone()
    }
}

/// `f_{i,j}` over an arbitrary scalar type.
pub fn map_in<T: Num + Clone>(params: &Params<T>, s: Symbol) -> AffineMap1D<T> {
    let r = params.ratio(s).clone();
    let t = params.fixed_point(s.group).clone();
    AffineMap1D {
        intercept: t * (T::one() - r.clone()),
        ratio: r,
    }
}

pub fn map_of(sys: &CfsSystem, s: Symbol) -> AffineMap1D<f64> {
    map_in(sys.params(), s)
}

pub fn map_of_exact(sys: &CfsSystem, s: Symbol) -> Result<AffineMap1D<Rational>> {
    Ok(map_in(sys.exact_params().ok_or(CfsError::NotRational)?, s))
}

const PROB_SUM_TOL: f64 = 1e-12;

/// Probability weights `p_{i,j}` shaped like a system.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbVector {
    weights: Vec<Vec<f64>>,
    exact: Option<Vec<Vec<Rational>>>,
}

impl ProbVector {
    pub fn new(sys: &CfsSystem, weights: Vec<Vec<f64>>) -> Result<Self> {
        check_shape(sys, &weights)?;
        let mut total = 0.0;
        for (i, g) in weights.iter().enumerate() {
            for (j, &w) in g.iter().enumerate() {
                if !(w >= 0.0 && w.is_finite()) {
                    return Err(CfsError::InvalidProbabilities(format!(
                        "p({},{}) = {w} is negative or not finite",
                        i + 1,
                        j + 1
                    )));
                }
                total += w;
            }
        }
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(CfsError::InvalidProbabilities(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            weights,
            exact: None,
        })
    }

    pub fn new_rational(sys: &CfsSystem, weights: Vec<Vec<Rational>>) -> Result<Self> {
        check_shape(sys, &weights)?;
        let mut total = Rational::zero();
        for g in &weights {
            for w in g {
                if w.is_negative() {
                    return Err(CfsError::InvalidProbabilities(format!("negative weight {w}")));
                }
                total += w;
            }
        }
        if !total.is_one() {
            return Err(CfsError::InvalidProbabilities(format!(
                "weights sum to {total}, expected exactly 1"
            )));
        }
        Ok(Self {
            weights: weights
                .iter()
                .map(|g| g.iter().map(rat_to_f64).collect())
                .collect(),
            exact: Some(weights),
        })
    }

    /// Equal weight on every map. Exact when the system is rational.
    pub fn uniform(sys: &CfsSystem) -> Self {
        let l = sys.symbol_count();
        let shape: Vec<usize> = sys.ratios().iter().map(Vec::len).collect();
        let exact = (sys.mode() == NumberMode::Rational).then(|| {
            let w = Rational::new(1.into(), (l as i64).into());
            shape.iter().map(|&n| vec![w.clone(); n]).collect()
        });
        Self {
            weights: shape.iter().map(|&n| vec![1.0 / l as f64; n]).collect(),
            exact,
        }
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn exact_weights(&self) -> Option<&[Vec<Rational>]> {
        self.exact.as_deref()
    }

    pub fn get(&self, s: Symbol) -> f64 {
        self.weights[s.group][s.member]
    }

    /// `Σ_j p_{l,j}`.
    pub fn group_mass(&self, group: usize) -> f64 {
        self.weights[group].iter().sum()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.weights.iter().flatten().copied().collect()
    }

    /// Group holding all the mass, if any.
    pub fn concentrated_group(&self) -> Option<usize> {
        let nonempty: Vec<usize> = (0..self.weights.len())
            .filter(|&g| self.weights[g].iter().any(|&w| w > 0.0))
            .collect();
        match nonempty.as_slice() {
            [g] => Some(*g),
            _ => None,
        }
    }
}

fn check_shape<T>(sys: &CfsSystem, weights: &[Vec<T>]) -> Result<()> {
    let ok = weights.len() == sys.group_count()
        && weights
            .iter()
            .zip(sys.ratios())
            .all(|(w, r)| w.len() == r.len());
    if ok {
        Ok(())
    } else {
        Err(CfsError::InvalidProbabilities(
            "shape does not match the system's groups".into(),
        ))
    }
}

/// Drops symbols with zero probability and groups left empty.
///
/// Fails with [`CfsError::AllMassOnOneGroup`] when only one group keeps mass:
/// the measure is then the point mass at that group's fixed point.
pub fn prune_zeros(sys: &CfsSystem, p: &ProbVector) -> Result<(CfsSystem, ProbVector)> {
    if let Some(group) = p.concentrated_group() {
        return Err(CfsError::AllMassOnOneGroup { group: group + 1 });
    }
    if p.weights.iter().flatten().all(|&w| w > 0.0) {
        return Ok((sys.clone(), p.clone()));
    }
    let keep = |g: usize, m: usize| p.weights[g][m] > 0.0;
    let groups: Vec<usize> = (0..sys.group_count())
        .filter(|&g| (0..sys.group_size(g)).any(|m| keep(g, m)))
        .collect();
    let filter_params = |fp: &[f64], r: &[Vec<f64>]| -> (Vec<f64>, Vec<Vec<f64>>) {
        (
            groups.iter().map(|&g| fp[g]).collect(),
            groups
                .iter()
                .map(|&g| {
                    (0..r[g].len())
                        .filter(|&m| keep(g, m))
                        .map(|m| r[g][m])
                        .collect()
                })
                .collect(),
        )
    };
    let (fp, ratios) = filter_params(sys.fixed_points(), sys.ratios());
    let weights: Vec<Vec<f64>> = groups
        .iter()
        .map(|&g| p.weights[g].iter().copied().filter(|&w| w > 0.0).collect())
        .collect();
    let pick_exact = |rows: &[Vec<Rational>]| -> Vec<Vec<Rational>> {
        groups
            .iter()
            .map(|&g| {
                (0..rows[g].len())
                    .filter(|&m| keep(g, m))
                    .map(|m| rows[g][m].clone())
                    .collect()
            })
            .collect()
    };
    let new_sys = match sys.exact_params() {
        Some(e) => CfsSystem::new_rational(
            groups.iter().map(|&g| e.fixed_points[g].clone()).collect(),
            pick_exact(&e.ratios),
        )?,
        None => CfsSystem::new(fp, ratios)?,
    };
    let new_p = ProbVector {
        weights,
        exact: p.exact.as_deref().map(pick_exact),
    };
    Ok((new_sys, new_p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_halves() -> CfsSystem {
        CfsSystem::new(vec![0.0, 1.0], vec![vec![0.5], vec![0.5]]).unwrap()
    }

    #[test]
    fn validate_examples() {
        assert!(validate_system(&[0.0, 1.0], &[vec![0.5], vec![0.5]]).is_empty());
        let dup = validate_system(&[0.0, 0.0], &[vec![0.5], vec![0.5]]);
        assert!(matches!(dup[..], [SystemViolation::DuplicateFixedPoint { .. }]));
        let out = validate_system(&[0.0, 1.0], &[vec![1.0], vec![0.5]]);
        assert!(matches!(out[..], [SystemViolation::RatioOutOfRange { .. }]));
        let empty = validate_system(&[0.0, 1.0], &[vec![], vec![0.5]]);
        assert!(matches!(empty[..], [SystemViolation::EmptyGroup { group: 1 }]));
    }

    #[test]
    fn validate_reports_every_violation() {
        let v = validate_system(&[2.0, 2.0, 2.0], &[vec![0.0], vec![1.5], vec![]]);
        assert_eq!(v.len(), 6);
    }

    #[test]
    fn map_of_examples() {
        let sys = two_halves();
        assert_eq!(map_of(&sys, Symbol::new(0, 0)), AffineMap1D::new(0.5, 0.0));
        assert_eq!(map_of(&sys, Symbol::new(1, 0)), AffineMap1D::new(0.5, 0.5));
        let sys = CfsSystem::new(vec![0.0, 1.0], vec![vec![0.45, 0.09], vec![0.45]]).unwrap();
        assert_eq!(map_of(&sys, Symbol::new(0, 1)), AffineMap1D::new(0.09, 0.0));
    }

    #[test]
    fn affine_composition_law() {
        let a = AffineMap1D::new(0.5, 1.0);
        let b = AffineMap1D::new(0.25, -2.0);
        let c = a.compose(&b);
        assert_eq!(c, AffineMap1D::new(0.125, 0.0));
        assert_eq!(c.apply(3.0), a.apply(b.apply(3.0)));
    }

    #[test]
    fn prune_examples() {
        let sys = CfsSystem::new(vec![0.0, 1.0], vec![vec![0.3, 0.2], vec![0.25]]).unwrap();
        let p = ProbVector::new(&sys, vec![vec![0.5, 0.0], vec![0.5]]).unwrap();
        let (s2, p2) = prune_zeros(&sys, &p).unwrap();
        assert_eq!(s2.ratios(), &[vec![0.3], vec![0.25]]);
        assert_eq!(p2.weights(), &[vec![0.5], vec![0.5]]);

        let p = ProbVector::new(&sys, vec![vec![0.5, 0.5], vec![0.0]]).unwrap();
        assert!(matches!(
            prune_zeros(&sys, &p),
            Err(CfsError::AllMassOnOneGroup { group: 1 })
        ));

        let p = ProbVector::uniform(&sys);
        let (s3, p3) = prune_zeros(&sys, &p).unwrap();
        assert_eq!(s3, sys);
        assert_eq!(p3, p);
    }

    #[test]
    fn prune_removes_empty_group_keeps_rational() {
        let r = |n: i64, d: i64| Rational::new(n.into(), d.into());
        let sys = CfsSystem::new_rational(
            vec![r(0, 1), r(1, 1), r(2, 1)],
            vec![vec![r(1, 2)], vec![r(1, 3)], vec![r(1, 5)]],
        )
        .unwrap();
        let p = ProbVector::new_rational(
            &sys,
            vec![vec![r(1, 2)], vec![r(0, 1)], vec![r(1, 2)]],
        )
        .unwrap();
        let (s2, p2) = prune_zeros(&sys, &p).unwrap();
        assert_eq!(s2.group_count(), 2);
        assert_eq!(s2.exact_params().unwrap().fixed_points[1], r(2, 1));
        assert_eq!(p2.exact_weights().unwrap()[1][0], r(1, 2));
    }

    #[test]
    fn probabilities_must_sum_to_one() {
        let sys = two_halves();
        assert!(ProbVector::new(&sys, vec![vec![0.5], vec![0.4]]).is_err());
        assert!(ProbVector::new(&sys, vec![vec![1.5], vec![-0.5]]).is_err());
        assert!(ProbVector::new(&sys, vec![vec![0.5, 0.0], vec![0.5]]).is_err());
    }

    #[test]
    fn rational_validation_is_exact() {
        let r = |n: i64, d: i64| Rational::new(n.into(), d.into());
        let err = CfsSystem::new_rational(vec![r(1, 3), r(2, 6)], vec![vec![r(1, 2)], vec![r(1, 1)]])
            .unwrap_err();
        match err {
            CfsError::InvalidSystem(v) => assert_eq!(v.len(), 2),
            e => panic!("unexpected {e}"),
        }
    }
}

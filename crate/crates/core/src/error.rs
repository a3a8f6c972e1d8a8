use thiserror::Error;

/// A single violated invariant of a common-fixed-point system.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemViolation {
    #[error("system needs at least two groups, got {0}")]
    TooFewGroups(usize),
    #[error("group {group} has no maps")]
    EmptyGroup { group: usize },
    #[error("ratio at ({group},{member}) = {value} is outside (0,1)")]
    RatioOutOfRange {
        group: usize,
        member: usize,
        value: f64,
    },
    #[error("groups {first} and {second} share fixed point {value}")]
    DuplicateFixedPoint {
        first: usize,
        second: usize,
        value: f64,
    },
    #[error("fixed point count {fixed_points} does not match ratio groups {groups}")]
    ShapeMismatch { fixed_points: usize, groups: usize },
}

#[derive(Debug, Error)]
pub enum CfsError {
    #[error("invalid system: {}", join_violations(.0))]
    InvalidSystem(Vec<SystemViolation>),
    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),
    #[error("all probability mass sits in group {group}; the measure is a point mass")]
    AllMassOnOneGroup { group: usize },
    #[error("degenerate measure: {0}")]
    DegenerateMeasure(String),
    #[error("word must be nonempty")]
    EmptyWord,
    #[error("invalid symbol ({group},{member})")]
    InvalidSymbol { group: usize, member: usize },
    #[error("enumeration budget exceeded: {needed} states requested, budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("power iteration did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("series needs more than {max_terms} terms (group mass {mass})")]
    SeriesTooLong { max_terms: usize, mass: f64 },
    #[error("monte-carlo run exceeded {cap} steps")]
    RunTooLong { cap: usize },
    #[error("root not bracketed in [{lo}, {hi}]")]
    RootOutsideBracket { lo: f64, hi: f64 },
    #[error("exact arithmetic requested but the system has no rational data")]
    NotRational,
    #[error("conditions not met: {0:?}")]
    ConditionsNotMet(Vec<String>),
    #[error("no dimension case applies (chi_x={chi_x}, chi_y={chi_y}, h={h})")]
    NoCaseApplies { chi_x: f64, chi_y: f64, h: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join_violations(v: &[SystemViolation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, CfsError>;

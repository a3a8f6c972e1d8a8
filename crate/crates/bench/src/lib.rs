//! Fixtures shared by the benchmarks.

use cfsdim_core::fourcorner::FourCornerSystem;
use cfsdim_core::{CfsSystem, ProbVector};

/// Groups of sizes (2,1) with distinct ratios, uniform weights.
pub fn two_one() -> (CfsSystem, ProbVector) {
    let sys = CfsSystem::new(vec![0.0, 1.0], vec![vec![0.3, 0.2], vec![0.25]]).expect("valid system");
    let p = ProbVector::uniform(&sys);
    (sys, p)
}

/// Three groups of sizes (3,2,2) with a heavy first group, so the series
/// needs many terms.
pub fn three_groups() -> (CfsSystem, ProbVector) {
    let sys = CfsSystem::new(
        vec![0.0, 0.5, 1.0],
        vec![vec![0.2, 0.15, 0.1], vec![0.1, 0.12], vec![0.2, 0.1]],
    )
    .expect("valid system");
    let p = ProbVector::new(&sys, vec![vec![0.3, 0.3, 0.2], vec![0.05, 0.05], vec![0.05, 0.05]]).expect("valid weights");
    (sys, p)
}

pub fn four_corner() -> FourCornerSystem {
    FourCornerSystem::new([[0.8, 0.1], [0.1, 0.8]], [[0.45, 0.09], [0.09, 0.45]])
}

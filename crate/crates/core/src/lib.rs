//! Dimension theory for iterated function systems of similarities on the
//! line whose maps share fixed points within groups, and for the
//! generalised 4-corner self-affine set built from two such systems.
//!
//! The main entry points:
//!
//! - [`entropy::phi_series`] and [`entropy::rw_entropy_closed`] for the
//!   overlap correction and the random-walk entropy,
//! - [`dimension::measure_dimension`] and [`dimension::attractor_dimension`],
//! - [`separation::esc_probe`] for a finite-depth look at separation,
//! - [`fourcorner`] for the 4-corner set,
//! - [`estimate`] for empirical box-counting and entropy estimates.

pub mod descriptor;
pub mod dimension;
pub mod entropy;
pub mod error;
pub mod estimate;
pub mod fourcorner;
pub mod roots;
pub mod separation;
pub mod symbolic;
pub mod system;

pub use error::{CfsError, Result, SystemViolation};
pub use symbolic::{BlockSignature, Word};
pub use system::{AffineMap1D, CfsSystem, NumberMode, ProbVector, Rational, Symbol};

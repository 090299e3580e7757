//! Exact chart-level linearization of graded manifolds.
//!
//! A chart of a graded manifold of type `Δ` is modelled as a free
//! supercommutative polynomial algebra over the rationals, truncated at a
//! fixed total degree. Repeated tangent lifts, the quotient by negatively
//! weighted coordinates and the restriction to multiplicity-free weights
//! produce a chart of the associated multiple vector bundle together with
//! its family of odd operators. The [`analysis`] module checks the
//! structural properties of such a family with exact linear algebra.

#![no_std]

extern crate alloc;

pub mod analysis;
pub mod error;
pub mod linalg;
pub mod linearize;
pub mod superalgebra;
pub mod tangent;
pub mod weights;

pub use error::{Error, Result};
pub use linearize::{lift_morphism, linearize_chart, ChartMorphism, LinearizedChart};

pub use superalgebra::{Chart, ChartLayout, Coordinate, Monomial, Polynomial};
pub use tangent::{Derivation, TangentChart};
pub use weights::{AdditionalSymbol, BasisSymbol, Parity, Weight, WeightSystem};

/// Exact rational scalar used for every coefficient.
pub type Rational = num_rational::BigRational;

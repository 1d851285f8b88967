//! Finite-truncation models of noncommutative regular domains and Andô-type
//! dilations of commuting tuples.
//!
//! Everything is generic over the real scalar type (`f32` or `f64`); the
//! aliases at the crate root fix `f64`.

pub mod ando;
pub mod bipoly;
pub mod colligation;
pub mod domain;
pub mod error;
pub mod linalg;
pub mod poisson;
pub mod polyparse;
pub mod report;
pub mod sample;
pub mod scalar;
pub mod transfer;
pub mod variety;
pub mod words;

pub use error::{Error, Result};
pub use scalar::Real;
pub use words::{Word, WordTable};

pub type CMat = linalg::CMatrix<f64>;
pub type Polynomial = domain::RegularPolynomial<f64>;
pub type Tuple = domain::OperatorTuple<f64>;
pub type Fock = domain::FockModel<f64>;

/// Default tolerance for membership and identity checks.
pub const DEFAULT_TOL: f64 = 1e-9;

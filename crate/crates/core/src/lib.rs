//! Semiclassical moment dynamics of Gaussian electromagnetic wave packets in smoothly
//! inhomogeneous isotropic media, with quadrature oracles for every moment formula.

// Negated comparisons are how NaN inputs are rejected; index loops mirror the tensor notation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod initial;
pub mod jet;
pub mod linalg;
pub mod medium;
pub mod ode;
pub mod oracle;
pub mod quadrature;
pub mod riccati;
pub mod runner;
pub mod stationary;
pub mod transport;
pub mod verify;

pub use error::{Result, SimError};
pub use medium::{MediumKind, MediumModel, MediumParams};

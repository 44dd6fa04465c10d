//! Numerical verification of bilinear embeddings in Orlicz spaces for heat
//! semigroups generated by complex divergence-form operators.
//!
//! The crate builds Young-function pairs and their characteristic
//! quantities ([`young`]), the ellipticity constants of complex coefficient
//! matrices ([`ellipticity`]), an explicit Bellman function with its
//! derivatives and generalized Hessian ([`bellman`]), and a periodic
//! finite-difference model of the semigroups ([`semigroup`]). The
//! [`harness`] module runs every quantitative check and collects margin
//! reports.

pub mod bellman;
pub mod ellipticity;
pub mod error;
pub mod harness;
pub mod quad;
pub mod report;
pub mod sampling;
pub mod semigroup;
pub mod young;

pub use error::{Error, Result};

//! Thermal similarity transforms for Markovian master equations of a damped
//! harmonic oscillator, worked in the doubled (superoperator) picture.
//!
//! Density matrices on a truncated Fock space of dimension `N` are vectorized
//! column-stacked, so superoperators are `N² × N²` complex matrices. The
//! central object is the hyperbolic rotation `U(θ) = exp(iGθ)` which maps the
//! generator at one reservoir temperature onto the generator at another.
//!
//! Everything here is `no_std` + `alloc`; file formats and the command line
//! runner live in the companion `thermosym-lab` crate.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
pub mod fock;
pub mod linalg;
pub mod phase_space;
pub mod quadrature;
pub mod spectral;
pub mod superops;
pub mod thermal;

pub use error::{Error, Result};
pub use fock::{DensityState, FockRep, InteriorWindow, LadderLifts, SuperOp};
pub use linalg::{CMatrix, CVector, C64};

//! Surface-participation analysis for planar superconducting qubits.
//!
//! The crate computes how much of a qubit's electric-field energy sits in
//! thin lossy layers at the substrate-metal (SM), substrate-air (SA) and
//! metal-air (MA) interfaces of a planar device, and turns those
//! participations into quality-factor budgets.
//!
//! The pipeline is:
//!
//! 1. [`geometry`]: a parametric 2D cross-section ([`geometry::build_layout`]).
//! 2. [`mesh`]: a conforming triangulation graded toward conductor corners.
//! 3. [`field`]: a linear finite-element electrostatic solve.
//! 4. [`participation`]: in-layer field reconstruction and interface integrals.
//! 5. [`analysis`]: trench-depth sweeps, logarithmic extrapolation and loss budgets.
//!
//! The accompanying book (`book/`) walks through each stage; its code
//! listings are compiled and run as doc-tests of this crate.

pub mod analysis;
pub mod error;
pub mod field;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod participation;
pub mod report;
pub mod units;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/meshing.md")]
    mod meshing {}
    #[doc = include_str!("../../../book/src/field-solve.md")]
    mod field_solve {}
    #[doc = include_str!("../../../book/src/participation.md")]
    mod participation {}
    #[doc = include_str!("../../../book/src/extrapolation.md")]
    mod extrapolation {}
    #[doc = include_str!("../../../book/src/loss-budget.md")]
    mod loss_budget {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

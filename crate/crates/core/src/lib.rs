//! Singular solutions of the planar point-vortex system: self-similar
//! three-vortex bursts and collapses, bursts driven by external fields, inside
//! N-vortex configurations and in the unit disk, and certification of the
//! resulting trajectories as weak solutions of the Euler equations.

// `!(x <= tol)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod burst;
pub mod certify;
pub mod coords;
pub mod disk;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod grid;
pub mod io;
pub mod markov;
pub mod nburst;
pub mod scenario;
pub mod selfsimilar;
pub mod vortex;
pub mod weakform;

pub use error::{Error, Result};
pub use num_complex::Complex64;

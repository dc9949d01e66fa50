//! Global matrix-valued pseudo-differential calculus on compact Lie groups
//! (`T^n`, SU(2), SU(3)) and Fredholm index computation by heat traces,
//! kernel counting, and symbol-density integrals.

pub mod dual;
pub mod error;
pub mod fourier;
pub mod galerkin;
pub mod group;
pub mod index;
pub mod linalg;
pub mod operator;
pub mod symbol;

pub use error::{Error, Result};

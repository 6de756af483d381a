//! Random-walk kernels on finitely generated groups.

pub mod asymptotics;
pub mod error;
pub mod green;
pub mod group;
pub mod io;
pub mod numeric;
pub mod shift;
pub mod tree_exact;
pub mod walk;

pub use error::{Error, Result};

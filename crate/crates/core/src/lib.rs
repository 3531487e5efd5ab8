//! Non-rigid point set registration without correspondences.
//!
//! The source set is treated as the centroids of an entropy-regularized fuzzy
//! clustering of the target set. Centroids move under a smooth displacement
//! field `T = Y + L c`, where `L` is a kernel Gram matrix on the source or a
//! Nyström factor whose landmarks are k-means centroids.

pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod io;
pub mod kernel;
pub mod kmeans;
pub mod nystrom;
pub mod points;
pub mod solver;

pub use config::RegistrationConfig;
pub use error::{Error, Result};
pub use kernel::{KernelFamily, KernelSpec};
pub use points::PointSet;
pub use solver::{register, RegistrationResult};

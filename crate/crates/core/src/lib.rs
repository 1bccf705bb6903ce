//! Weakly decomposable sparsity norms, the eigenvalue constants that govern
//! their oracle behaviour, penalized least squares, and a harness that
//! checks the sharp oracle inequality replicate by replicate.
//!
//! ```
//! use wdnorm::{eigen, DesignMatrix, IndexSet};
//!
//! let r = 2f64.sqrt();
//! let x = DesignMatrix::from_rows(&[
//!     vec![r * 5.0 / 13.0, 0.0, r],
//!     vec![r * 12.0 / 13.0, r, 0.0],
//! ])?;
//! let s = IndexSet::from_one_based(3, &[3])?;
//! let d = eigen::l1_eigenvalue(&x, &s, 3.0, &Default::default())?;
//! assert!(d.certified);
//! assert!((d.value - 2.0 / 26f64.sqrt()).abs() < 1e-9);
//! # Ok::<(), wdnorm::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cone;
pub mod eigen;
pub mod error;
pub mod model;
pub mod norms;
pub mod numeric;
pub mod oracle;
pub mod polytope;
pub mod solve;

pub use cone::ConeSpec;
pub use eigen::{EigenOptions, EigenvalueResult};
pub use error::{Error, Result};
pub use model::{DesignMatrix, IndexSet, NoiseModel};
pub use norms::{NormSpec, Partition, Penalty, ResidualNorm};
pub use oracle::{ExperimentConfig, OracleSummary, ReplicateReport, Status};
pub use solve::{FitResult, OverlapGroups, SolveOptions};

//! Domain adaptation with maximum mean discrepancy.
//!
//! * [`mmd`]: discrepancy estimators and MMD-based layer / width selection.
//! * [`adaptnet`]: a small network with an adaptation layer trained on a
//!   classification loss plus a domain-confusion (MMD) penalty.
//! * [`baselines`]: linear SVM, late fusion, feature augmentation, subspace
//!   alignment, geodesic flow kernel, projective model transfer and
//!   max-margin domain transforms.
//! * [`data`]: feature files, the split protocol and synthetic domains.
//! * [`harness`]: experiment configs, runs and reports behind the CLI.

pub mod adaptnet;
pub mod baselines;
pub mod data;
pub mod error;
pub mod harness;
pub mod mmd;
pub mod numerics;
pub mod rng;

pub use error::{Error, Result};

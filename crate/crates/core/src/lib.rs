//! Multiple canonical correlation analysis for repeated-measures data.
//!
//! Two estimators share one generalized eigenvalue backbone:
//!
//! * [`kernel_mcca`] embeds each unit's `T×p` block through a Gaussian or
//!   linear kernel and works with centered Gram matrices;
//! * [`functional_mcca`] smooths every variable's time course onto a Fourier
//!   basis and runs the multiset problem on the basis coefficients.
//!
//! Both return an [`MccaSolution`]. [`clusterability`] scores the resulting
//! low-dimensional representation with the Hopkins statistic, and
//! [`experiments`] holds synthetic generators and independent oracles.

pub mod clusterability;
pub mod data_io;
pub mod error;
pub mod experiments;
pub mod functional_mcca;
pub mod kernel_mcca;
pub mod linalg;
pub mod multiset;
pub mod rng;
mod solution;

pub use data_io::{AnalysisConfig, RepeatedMeasuresDataset};
pub use error::{Error, Result};
pub use solution::{Diagnostics, MccaSolution, Method};

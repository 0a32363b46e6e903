//! Recovery of a low-rank positive semidefinite matrix from Gaussian linear
//! measurements, together with the diagnostics needed to study when and why
//! the recovery works.
//!
//! The crate is organized around the sensing pipeline:
//!
//! * [`measurement`] — Gaussian orthogonal ensembles, the measurement
//!   operator `A` and its adjoint, and clean or noisy observations.
//! * [`recovery`] — spectral initialization and factorized gradient descent
//!   on the `d x r` factor, with per-iteration trajectory logging.
//! * [`metrics`] — rotation-invariant factor distance, condition numbers,
//!   subspace angles, and eigenspace-perturbation inequality checkers.
//! * [`bounds`] — empirical restricted-isometry constant estimation and the
//!   adversarial construction certifying that uniform deviation bounds over
//!   low-rank matrices cannot be improved.
//! * [`virtual_diag`] — deflated "virtual" measurement operators indexed by
//!   unit vectors of a sphere net, the gradient sequences they drive, and
//!   audits of the operator identities and deviation decomposition that
//!   explain why trajectories beat uniform bounds.
//!
//! Everything is deterministic given the seeds carried in the inputs: random
//! matrices are regenerated counter-style from `(seed, index)`, so results do
//! not depend on storage mode, thread count, or call order.

pub mod bounds;
pub mod error;
pub mod mat;
pub mod measurement;
pub mod metrics;
pub mod recovery;
pub mod rng;
pub mod virtual_diag;

pub use error::{Error, Result};
pub use mat::{FactorMatrix, SymMatrix};
pub use measurement::{EnsembleDescriptor, GoeEnsemble, ObservationVector, StorageMode};
pub use recovery::{RecoveryConfig, RecoveryOracle, StopReason, TrajectoryRecord};

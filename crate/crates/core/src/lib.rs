//! Inertial tracking for wheeled robots under sensor-position shift.
//!
//! The crate bundles everything needed to study and mitigate the domain
//! shift a body-mounted IMU undergoes when its mounting position changes:
//!
//! - [`sim`] — differential-drive trajectories, rigid-body IMU synthesis at
//!   programmable sensor offsets, and dataset persistence;
//! - [`ot`] — 1-D Wasserstein distances, a log-domain Sinkhorn solver, and
//!   the debiased Sinkhorn divergence;
//! - [`tracker`] — a causal CNN-LSTM-FC displacement tracker with hand-rolled
//!   reverse-mode gradients;
//! - [`adapt`] — supervised training, multi-domain augmentation, and
//!   alternating transport-based adaptation;
//! - [`baseline`] — complementary-filter heading plus double-integration
//!   dead reckoning;
//! - [`eval`] — error percentiles and the cross-domain analysis matrices.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the shipped
//! pipelines run at [`Real`] precision.

pub mod csvio;
pub mod baseline;
pub mod eval;
pub mod ot;
pub mod rng;
pub mod scalar;
pub mod sim;
pub mod tracker;

pub use scalar::{wrap_angle, Scalar};

/// Scalar precision used by the CLI pipelines and experiment harness.
pub type Real = f64;

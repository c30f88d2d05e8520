//! Simulation and verification toolkit for multi-drawing Pólya urns with
//! random addition matrices.
//!
//! * [`distributions`]: addition laws, step-indexed schedules, exact
//!   hypergeometric draws.
//! * [`urn`]: the urn state machine and trajectory recording.
//! * [`theory`]: closed-form limits (proportion, growth rates, CLT variances).
//! * [`diagnostics`]: stochastic-approximation quantities extracted from
//!   trajectories and empirical checks of the convergence theorems'
//!   hypotheses.
//! * [`ensemble`]: reproducible parallel Monte Carlo ensembles and the
//!   statistical tests run against [`theory`].
//! * [`experiment`]: TOML experiment files, artifacts and the `urnlab` CLI.

pub mod diagnostics;
pub mod distributions;
pub mod ensemble;
pub mod experiment;
pub mod rng;
pub mod stats;
pub mod theory;
pub mod urn;

pub use distributions::{AdditionLaw, LawFamily, LawSchedule, SlowlyVarying};
pub use rng::RandomStream;
pub use theory::{predict_model1, predict_model2, Model2Prediction, TheoryPrediction};
pub use urn::{CheckpointGrid, TrajectoryRecord, UrnConfig, UrnState, Variant};

//! Level-2 rough-path lifts of weakly dependent noise and their Green–Kubo
//! characteristics.
//!
//! Noise models live in [`noise`], lifts in [`lift`], exact characteristics
//! in [`oracles`] and Monte Carlo estimates in [`estimators`]. The `gklab`
//! binary wraps [`cli`].

pub mod cli;
pub mod error;
pub mod estimators;
pub mod lift;
pub mod noise;
pub mod oracles;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use estimators::{compare, convergence_study, empirical_delta, estimate_characteristics, EstimateOptions, MomentEstimate};
pub use lift::{continuous_lift, ito_lift, wz_lift, wz_lift_direct, Flavor, LiftSample};
pub use noise::{generate_continuous, generate_discrete, ProcessSpec, SampledPath, Trajectory};
pub use oracles::{target_for, CorrelationSequence, Target};
pub use rng::ReplicaKey;
pub use tensor::{Characteristics, Tensor2, VectorD};

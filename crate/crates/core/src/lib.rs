//! Spatial field reconstruction and query-driven sensor selection for
//! heterogeneous sensor networks.
//!
//! The field is a Gaussian process observed by two kinds of sensors: high
//! quality sensors that always report `f(x) + noise`, and cheap low quality
//! sensors that only pick up the signal once the field exceeds an activation
//! threshold (below it they report pure noise). Reconstruction uses the best
//! affine estimator of the field given the readings, which needs only the
//! first two moments of the observation vector; [`moments`] supplies those
//! moments for censored readings and [`obs`] assembles them.
//!
//! Module map:
//!
//! * [`gp`] - prior mean/covariance, Gram matrices, exact field sampling.
//! * [`moments`] - truncated and censored Gaussian moments with a Monte-Carlo oracle.
//! * [`obs`] - sensor registry, observation simulation, moment bundles.
//! * [`sblue`] - affine estimator, its predictive MSE, grid evaluation, MMSE oracle.
//! * [`selection`] - minimum-cost sensor selection under an MSE cap (cross-entropy method
//!   and exhaustive search).
//!
//! Data-parallel loops go through rayon when the `parallel` feature is on
//! (default); results are bitwise identical with the feature off.

pub mod error;
pub mod gp;
pub mod linalg;
pub mod moments;
pub mod obs;
pub mod par;
pub mod rng;
pub mod sblue;
pub mod selection;

pub use error::{Error, Result};
pub use gp::{CovMatrix, KernelSpec, Location, MeanSpec, Prior};
pub use moments::{Gauss1, Gauss2, Quadrature};
pub use obs::{MomentBundle, Network, ObservationVector, Sensor, SensorArray};
pub use sblue::{ArrayModel, FittedField, GridSpec, Prediction};
pub use selection::{ActivationMask, CemConfig, CemState, SelectionProblem};

//! Regression-rate laboratory for piecewise smooth targets.
//!
//! The crate is organised around the pieces of a rate experiment:
//!
//! - [`piecewise`]: targets of the form `f(x) = sum_m f_m(x) * 1_{R_m}(x)` where each
//!   region `R_m` is an intersection of horizon half-spaces, plus the data generator.
//! - [`relu_net`]: dense ReLU networks, their architecture statistics and a
//!   least-squares trainer (Adam with random restarts).
//! - [`constructive`]: explicit ReLU networks for summation, multiplication,
//!   products, inner products, step functions, horizon indicators and the full
//!   piecewise assembly, with exact parameter accounting.
//! - [`baselines`]: kernel ridge regression, trigonometric series regression and a
//!   random-walk Metropolis posterior mean over network weights.
//! - [`rates`]: theoretical exponents, the Fourier lower bound, Monte-Carlo
//!   `L2(P_X)` error and log-log slope fitting.
//! - [`experiment`]: configuration, the resumable experiment runner and CSV output.

pub mod baselines;
pub mod constructive;
pub mod error;
pub mod experiment;
pub mod piecewise;
pub mod predictor;
pub mod rates;
pub mod relu_net;
pub mod rng;

pub use error::{Error, Result};
pub use predictor::Predictor;

//! Self-normalized two-sample inference for the second-order structure of
//! temporally dependent functional time series.
//!
//! The crate provides:
//!
//! - a functional-data core (quadrature grids, B-spline smoothing, a plain
//!   CSV sample format) in [`funcgrid`];
//! - covariance-operator estimation, eigendecomposition and recursive
//!   (growing-subsample) estimates in [`fpca`];
//! - self-normalized two-sample tests for covariance operators, eigenvalues
//!   and eigenfunctions in [`sntest`];
//! - Monte Carlo tabulation of the pivotal null functionals that calibrate
//!   those tests in [`nulldist`];
//! - competitor tests (chi-square, consistent-LRV, subsampling, i.i.d.
//!   bootstrap) in [`baselines`];
//! - simulation data-generating processes in [`dgp`];
//! - a strategy registry exposing every test behind one trait in
//!   [`registry`], and a Monte Carlo experiment harness in [`harness`].

pub mod baselines;
pub mod dgp;
pub mod error;
pub mod fpca;
pub mod funcgrid;
pub mod harness;
pub mod nulldist;
pub mod registry;
pub mod sntest;

pub use error::{Error, Result};

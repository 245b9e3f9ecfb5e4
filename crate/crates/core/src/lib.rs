//! Monotone mean-variance preferences on finite scenario-tree markets.
//!
//! The crate evaluates mean-variance and monotone mean-variance functionals
//! on discrete laws, computes monotone Sharpe ratios, solves the quadratic and
//! truncated-quadratic portfolio problems on multi-period trees together with
//! their variance-optimal martingale duals, and detects free cash-flow streams.

pub mod cli;
pub mod dual;
pub mod error;
pub mod fcfs;
mod linalg;
mod lp;
pub mod market;
pub mod primal;
pub mod prob;
mod qp;
pub mod report;
pub mod sample;
pub mod selftest;
pub mod sharpe;

pub use error::{Error, Result};

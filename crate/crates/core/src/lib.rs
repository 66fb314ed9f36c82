//! Barker-proposal MCMC.
//!
//! Balancing functions and the skew-symmetric proposal family, the Barker
//! jump process, RWM / MALA / Barker samplers with Robbins–Monro adaptive
//! preconditioning, logistic-regression data handling and convergence
//! diagnostics.

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adapt;
pub mod balancing;
pub mod config;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod jump_process;
pub mod par;
pub mod precond;
pub mod samplers;
pub mod selftest;
pub mod special;
pub mod targets;

pub use error::{Error, Result};

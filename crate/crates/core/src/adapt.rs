//! Robbins–Monro adaptation of a global proposal scale `λ` and a covariance
//! `Σ` (dense or diagonal), combined into the preconditioner `λ²Σ`.
//!
//! With `γ_t = t^{-κ}`:
//!
//! ```text
//! log λ  += γ_t (α_t − α*)
//! μ      += γ'_t (x_t − μ)
//! Σ      += γ'_t ((x_t − μ)(x_t − μ)ᵀ − Σ)
//! ```
//!
//! where `γ'_t = (t + offset)^{-κ}` delays the first covariance updates so a
//! single early sample cannot collapse `Σ` to rank one.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::precond::{Covariance, Preconditioner};

/// Shape of the adapted covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceMode {
    Dense,
    Diagonal,
}

impl CovarianceMode {
    pub fn label(self) -> &'static str {
        match self {
            CovarianceMode::Dense => "dense",
            CovarianceMode::Diagonal => "diag",
        }
    }
}

impl std::str::FromStr for CovarianceMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(CovarianceMode::Dense),
            "diag" | "diagonal" => Ok(CovarianceMode::Diagonal),
            other => Err(Error::Config(format!(
                "unknown preconditioner mode '{other}'"
            ))),
        }
    }
}

/// Which acceptance statistic drives the scale controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcceptStatistic {
    /// The realized MH acceptance probability α of each step.
    Probability,
    /// The 0/1 accept indicator.
    Indicator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptConfig {
    pub mode: CovarianceMode,
    pub target_accept: f64,
    pub learning_exponent: f64,
    /// `None` uses `2.38 / √d`.
    pub initial_scale: Option<f64>,
    pub statistic: AcceptStatistic,
    pub covariance_offset: f64,
    /// Record an adaptation snapshot every this many iterations (0 = never).
    pub history_every: usize,
}

impl AdaptConfig {
    pub fn new(mode: CovarianceMode, target_accept: f64) -> Self {
        Self {
            mode,
            target_accept,
            learning_exponent: 0.6,
            initial_scale: None,
            statistic: AcceptStatistic::Probability,
            covariance_offset: 100.0,
            history_every: 1,
        }
    }
}

/// `t^{-exponent}` for `t ≥ 1`.
pub fn learning_rate(t: f64, exponent: f64) -> Result<f64> {
    if !(t >= 1.0) {
        return Err(invalid(format!("learning-rate index must be ≥ 1, got {t}")));
    }
    if !(exponent > 0.0) {
        return Err(invalid("learning exponent must be positive"));
    }
    Ok(t.powf(-exponent))
}

/// Running Robbins–Monro state for one chain.
#[derive(Debug, Clone)]
pub struct AdaptState {
    iteration: u64,
    log_global_scale: f64,
    mean: DVector<f64>,
    cov: Covariance,
    target_accept: f64,
    learning_exponent: f64,
    covariance_offset: f64,
    statistic: AcceptStatistic,
}

impl AdaptState {
    /// `λ₀ = 2.38/√d` unless overridden, `Σ₀ = I`, `μ₀ = x0`.
    pub fn new(config: &AdaptConfig, x0: &DVector<f64>) -> Result<Self> {
        let d = x0.len();
        if d == 0 {
            return Err(invalid("empty initial state"));
        }
        if !(config.target_accept > 0.0 && config.target_accept < 1.0) {
            return Err(invalid("target acceptance must lie in (0, 1)"));
        }
        if !(config.learning_exponent > 0.0 && config.learning_exponent <= 1.0) {
            return Err(invalid("learning exponent must lie in (0, 1]"));
        }
        if !(config.covariance_offset >= 0.0) {
            return Err(invalid("covariance offset must be ≥ 0"));
        }
        let scale = config.initial_scale.unwrap_or(2.38 / (d as f64).sqrt());
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid("initial scale must be positive"));
        }
        let cov = match config.mode {
            CovarianceMode::Dense => Covariance::Dense(DMatrix::identity(d, d)),
            CovarianceMode::Diagonal => Covariance::Diagonal(DVector::from_element(d, 1.0)),
        };
        Ok(Self {
            iteration: 0,
            log_global_scale: scale.ln(),
            mean: x0.clone(),
            cov,
            target_accept: config.target_accept,
            learning_exponent: config.learning_exponent,
            covariance_offset: config.covariance_offset,
            statistic: config.statistic,
        })
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn log_global_scale(&self) -> f64 {
        self.log_global_scale
    }

    pub fn global_scale(&self) -> f64 {
        self.log_global_scale.exp()
    }

    pub fn running_mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn running_cov(&self) -> &Covariance {
        &self.cov
    }

    pub fn statistic(&self) -> AcceptStatistic {
        self.statistic
    }

    /// One Robbins–Monro step. `accept_stat` is α (or the indicator, per the
    /// configured statistic) for the step that produced `sample`.
    pub fn rm_update(&mut self, accept_stat: f64, sample: &DVector<f64>) -> Result<()> {
        if accept_stat.is_nan() || !(0.0..=1.0).contains(&accept_stat) {
            return Err(invalid(format!(
                "acceptance statistic must lie in [0,1], got {accept_stat}"
            )));
        }
        if sample.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: sample.len(),
            });
        }
        if sample.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("adaptation sample".into()));
        }
        let t = (self.iteration + 1) as f64;
        let gamma = learning_rate(t, self.learning_exponent)?;
        let gamma_cov = learning_rate(t + self.covariance_offset, self.learning_exponent)?;

        self.log_global_scale += gamma * (accept_stat - self.target_accept);
        let diff = sample - &self.mean;
        match &mut self.cov {
            Covariance::Dense(m) => m.ger(gamma_cov, &diff, &diff, 1.0 - gamma_cov),
            Covariance::Diagonal(d) => {
                for (c, e) in d.iter_mut().zip(diff.iter()) {
                    *c += gamma_cov * (e * e - *c);
                }
            }
        }
        self.mean.axpy(gamma_cov, &diff, 1.0);
        self.iteration += 1;
        Ok(())
    }

    /// Diagonal jitter `max(1e-6 · mean diag Σ, 1e-10)`.
    pub fn regularization(&self) -> f64 {
        let diag = self.cov.diagonal();
        let mean_diag = diag.sum() / diag.len() as f64;
        (1e-6 * mean_diag).max(1e-10)
    }

    /// `λ² (Σ + εI)` with its factor.
    pub fn to_preconditioner(&self) -> Result<Preconditioner> {
        let eps = self.regularization();
        let cov = match &self.cov {
            Covariance::Dense(m) => {
                let mut m = m.clone();
                for i in 0..m.nrows() {
                    m[(i, i)] += eps;
                }
                Covariance::Dense(m)
            }
            Covariance::Diagonal(d) => Covariance::Diagonal(d.add_scalar(eps)),
        };
        Preconditioner::new(self.global_scale(), cov).map_err(|e| {
            Error::NotPositiveDefinite(format!(
                "adapted covariance failed to factor after regularization ({e})"
            ))
        })
    }
}

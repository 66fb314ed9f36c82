//! Target densities driven by the samplers.
//!
//! A target supplies `log π(x)` up to an additive constant together with its
//! gradient. All targets here are immutable after construction and can be
//! shared across concurrently running chains.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::special::{inverse_mills, log_normal_cdf, log_normal_pdf, sigmoid, softplus, LN_2};

/// A differentiable (unnormalised) log-density on `ℝ^dim`.
pub trait TargetDensity: Send + Sync {
    fn dim(&self) -> usize;

    /// `log π(x) + C` for a fixed unknown constant `C`. Returns `-∞` only
    /// off the support.
    fn log_density(&self, x: &DVector<f64>) -> Result<f64>;

    /// `∇ log π(x)`. Errors when `x` is off the support.
    fn grad_log_density(&self, x: &DVector<f64>) -> Result<DVector<f64>>;

    /// Both quantities in one pass. Targets whose density and gradient share
    /// work override this.
    fn log_density_and_grad(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let lp = self.log_density(x)?;
        if lp == f64::NEG_INFINITY {
            return Err(Error::OffSupport(format!("{:?}", x.as_slice())));
        }
        Ok((lp, self.grad_log_density(x)?))
    }
}

impl<T: TargetDensity + ?Sized> TargetDensity for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        (**self).log_density(x)
    }
    fn grad_log_density(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        (**self).grad_log_density(x)
    }
    fn log_density_and_grad(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        (**self).log_density_and_grad(x)
    }
}

impl<T: TargetDensity + ?Sized> TargetDensity for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        (**self).log_density(x)
    }
    fn grad_log_density(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        (**self).grad_log_density(x)
    }
    fn log_density_and_grad(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        (**self).log_density_and_grad(x)
    }
}

/// Rejects wrong-length or non-finite inputs.
pub fn check_point(dim: usize, x: &DVector<f64>) -> Result<()> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("component {i} = {}", x[i])));
    }
    Ok(())
}

/// Multivariate Gaussian `N(mean, Σ)`, stored through its precision matrix.
#[derive(Debug, Clone)]
pub struct GaussianTarget {
    mean: DVector<f64>,
    precision: DMatrix<f64>,
    log_norm: f64,
}

impl GaussianTarget {
    /// Standard normal on `ℝ^d`.
    pub fn standard(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        Self::diagonal(DVector::zeros(dim), DVector::from_element(dim, 1.0))
    }

    /// Independent coordinates with the given standard deviations.
    pub fn diagonal(mean: DVector<f64>, std_devs: DVector<f64>) -> Result<Self> {
        if mean.len() != std_devs.len() || mean.is_empty() {
            return Err(invalid("mean and std_devs must have equal positive length"));
        }
        if std_devs.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(invalid("standard deviations must be positive and finite"));
        }
        let d = mean.len();
        let precision = DMatrix::from_diagonal(&std_devs.map(|s| 1.0 / (s * s)));
        let log_det_cov: f64 = std_devs.iter().map(|s| 2.0 * s.ln()).sum();
        Ok(Self {
            mean,
            precision,
            log_norm: -0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det_cov,
        })
    }

    /// General covariance; must be symmetric positive definite.
    pub fn dense(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if covariance.nrows() != d || covariance.ncols() != d || d == 0 {
            return Err(invalid("covariance shape does not match mean"));
        }
        let chol = covariance
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("target covariance".into()))?;
        let log_det_cov: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        let precision = chol.inverse();
        Ok(Self {
            mean,
            precision: (&precision + precision.transpose()) * 0.5,
            log_norm: -0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det_cov,
        })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }
}

impl TargetDensity for GaussianTarget {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        check_point(self.dim(), x)?;
        let r = x - &self.mean;
        Ok(self.log_norm - 0.5 * r.dot(&(&self.precision * &r)))
    }

    fn grad_log_density(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_point(self.dim(), x)?;
        Ok(-(&self.precision * (x - &self.mean)))
    }

    fn log_density_and_grad(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        check_point(self.dim(), x)?;
        let r = x - &self.mean;
        let pr = &self.precision * &r;
        Ok((self.log_norm - 0.5 * r.dot(&pr), -pr))
    }
}

/// Skew-normal `π_η(z) = 2 φ(z) Φ(η z)` on the real line.
#[derive(Debug, Clone, Copy)]
pub struct SkewNormalTarget {
    eta: f64,
}

impl SkewNormalTarget {
    pub fn eta(&self) -> f64 {
        self.eta
    }

    fn scalar(x: &DVector<f64>) -> Result<f64> {
        check_point(1, x)?;
        Ok(x[0])
    }

    pub fn log_density_at(&self, z: f64) -> f64 {
        LN_2 + log_normal_pdf(z) + log_normal_cdf(self.eta * z)
    }

    /// `-z + η φ(ηz)/Φ(ηz)`; the Mills-ratio term stays finite for large
    /// negative `ηz`.
    pub fn grad_at(&self, z: f64) -> f64 {
        if self.eta == 0.0 {
            return -z;
        }
        -z + self.eta * inverse_mills(self.eta * z)
    }
}

/// Builds the skew-normal target with skewness `eta ≥ 0`.
pub fn make_skew_normal(eta: f64) -> Result<SkewNormalTarget> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(invalid(format!(
            "skewness must be finite and ≥ 0, got {eta}"
        )));
    }
    Ok(SkewNormalTarget { eta })
}

impl TargetDensity for SkewNormalTarget {
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.log_density_at(Self::scalar(x)?))
    }

    fn grad_log_density(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(DVector::from_element(1, self.grad_at(Self::scalar(x)?)))
    }
}

/// Bayesian logistic regression with an isotropic Gaussian prior on the
/// coefficients.
#[derive(Debug, Clone)]
pub struct LogisticRegressionPosterior {
    design: DMatrix<f64>,
    labels: DVector<f64>,
    prior_variance: f64,
}

pub const DEFAULT_PRIOR_VARIANCE: f64 = 25.0;

/// Builds the posterior for design `x` (n×d) and binary labels `y`.
pub fn make_logistic_posterior(
    x: DMatrix<f64>,
    y: &[f64],
    prior_variance: f64,
) -> Result<LogisticRegressionPosterior> {
    if x.nrows() != y.len() {
        return Err(invalid(format!(
            "design has {} rows but {} labels were given",
            x.nrows(),
            y.len()
        )));
    }
    if x.ncols() == 0 {
        return Err(invalid("design must have at least one column"));
    }
    if let Some(bad) = y.iter().find(|v| **v != 0.0 && **v != 1.0) {
        return Err(invalid(format!("labels must be 0 or 1, found {bad}")));
    }
    if !(prior_variance > 0.0 && prior_variance.is_finite()) {
        return Err(invalid("prior variance must be positive"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design matrix".into()));
    }
    Ok(LogisticRegressionPosterior {
        design: x,
        labels: DVector::from_column_slice(y),
        prior_variance,
    })
}

impl LogisticRegressionPosterior {
    pub fn n_obs(&self) -> usize {
        self.design.nrows()
    }

    pub fn prior_variance(&self) -> f64 {
        self.prior_variance
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    fn log_lik_terms(&self, beta: &DVector<f64>) -> (f64, DVector<f64>) {
        let eta = &self.design * beta;
        let ll = eta
            .iter()
            .zip(self.labels.iter())
            .map(|(e, y)| y * e - softplus(*e))
            .sum();
        (ll, eta)
    }

    fn log_prior(&self, beta: &DVector<f64>) -> f64 {
        -beta.norm_squared() / (2.0 * self.prior_variance)
    }

    /// Posterior mode by damped Newton iterations. The log-density is
    /// strictly concave, so the mode is unique.
    pub fn mode(&self, tol: f64, max_iter: usize) -> Result<DVector<f64>> {
        let d = self.dim();
        let mut beta = DVector::zeros(d);
        let (mut lp, mut grad) = self.log_density_and_grad(&beta)?;
        for _ in 0..max_iter {
            if grad.norm() < tol {
                return Ok(beta);
            }
            let eta = &self.design * &beta;
            let w = eta.map(|e| {
                let s = sigmoid(e);
                s * (1.0 - s)
            });
            // negative Hessian: Xᵀ W X + I / v
            let mut neg_hess = self.design.transpose() * DMatrix::from_diagonal(&w) * &self.design;
            for i in 0..d {
                neg_hess[(i, i)] += 1.0 / self.prior_variance;
            }
            let chol = neg_hess
                .cholesky()
                .ok_or_else(|| Error::NotPositiveDefinite("logistic negative Hessian".into()))?;
            let step = chol.solve(&grad);
            let mut t = 1.0;
            loop {
                let cand = &beta + &step * t;
                let (lp_c, g_c) = self.log_density_and_grad(&cand)?;
                if lp_c >= lp || t < 1e-12 {
                    beta = cand;
                    lp = lp_c;
                    grad = g_c;
                    break;
                }
                t *= 0.5;
            }
        }
        if grad.norm() < tol {
            Ok(beta)
        } else {
            Err(Error::Degenerate(format!(
                "mode search stopped with gradient norm {:e}",
                grad.norm()
            )))
        }
    }
}

impl TargetDensity for LogisticRegressionPosterior {
    fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn log_density(&self, beta: &DVector<f64>) -> Result<f64> {
        check_point(self.dim(), beta)?;
        let (ll, _) = self.log_lik_terms(beta);
        Ok(ll + self.log_prior(beta))
    }

    fn grad_log_density(&self, beta: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.log_density_and_grad(beta)?.1)
    }

    fn log_density_and_grad(&self, beta: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        check_point(self.dim(), beta)?;
        let (ll, eta) = self.log_lik_terms(beta);
        let resid = DVector::from_iterator(
            eta.len(),
            eta.iter()
                .zip(self.labels.iter())
                .map(|(e, y)| y - sigmoid(*e)),
        );
        let grad = self.design.tr_mul(&resid) - beta / self.prior_variance;
        Ok((ll + self.log_prior(beta), grad))
    }
}

/// Maximum relative error between the analytic gradient and central finite
/// differences of the log-density.
///
/// Each coordinate uses step `h · max(|x_i|, 1)` and one Richardson
/// extrapolation level, so the truncation error is fourth order; the
/// relative error is measured against `max(|∂_i log π|, 1)`.
pub fn fd_gradient_check<T: TargetDensity + ?Sized>(
    target: &T,
    x: &DVector<f64>,
    h: f64,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(invalid("finite-difference step must be positive"));
    }
    let grad = target.grad_log_density(x)?;
    let central = |i: usize, step: f64| -> Result<f64> {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += step;
        xm[i] -= step;
        Ok((target.log_density(&xp)? - target.log_density(&xm)?) / (2.0 * step))
    };
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let step = h * x[i].abs().max(1.0);
        let coarse = central(i, step)?;
        let fine = central(i, 0.5 * step)?;
        let fd = (4.0 * fine - coarse) / 3.0;
        let err = (fd - grad[i]).abs() / grad[i].abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}

//! Balancing functions `g` with `g(t) = t·g(1/t)`, the first-order ratio
//! approximation `t*_x(z) = exp(z ∇log π(x))`, and the checks built on them.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::par::{map_indexed, Execution};
use crate::special::{derive_seed, log_sigmoid, sigmoid};
use crate::targets::TargetDensity;

/// The two balancing functions used to turn a proposal into a
/// π-reversible kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BalancingFunction {
    /// `min(1, t)`
    Hastings,
    /// `t / (1 + t)`
    Barker,
}

impl BalancingFunction {
    pub fn eval(self, t: f64) -> Result<f64> {
        eval_balancing(self, t)
    }

    /// `log g(e^{log_t})`.
    pub fn log_eval(self, log_t: f64) -> Result<f64> {
        match self {
            BalancingFunction::Hastings => {
                if log_t.is_nan() {
                    return Err(invalid("log ratio is NaN"));
                }
                Ok(log_t.min(0.0))
            }
            BalancingFunction::Barker => log_eval_balancing_barker(log_t),
        }
    }
}

/// Evaluates `g(t)` for `t ∈ [0, ∞]`.
pub fn eval_balancing(g: BalancingFunction, t: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(invalid(format!("balancing argument must be ≥ 0, got {t}")));
    }
    if t == f64::INFINITY {
        return Ok(1.0);
    }
    Ok(match g {
        BalancingFunction::Hastings => t.min(1.0),
        BalancingFunction::Barker => {
            if t <= 1.0 {
                t / (1.0 + t)
            } else {
                1.0 / (1.0 + 1.0 / t)
            }
        }
    })
}

/// `log g_B(e^{log_t}) = -softplus(-log_t)`.
pub fn log_eval_balancing_barker(log_t: f64) -> Result<f64> {
    if log_t.is_nan() {
        return Err(invalid("log ratio is NaN"));
    }
    Ok(log_sigmoid(log_t))
}

/// Logistic CDF `F_L(z) = 1 / (1 + e^{-z})`; note `g_B(e^z) = F_L(z)`.
pub fn logistic_cdf(z: f64) -> Result<f64> {
    if z.is_nan() {
        return Err(invalid("logistic_cdf argument is NaN"));
    }
    Ok(sigmoid(z))
}

/// First-order approximation of `π(x+z)/π(x)` around `x`, for a scalar
/// directional gradient `beta`.
#[derive(Debug, Clone, Copy)]
pub struct FirstOrderRatio {
    pub beta: f64,
}

impl FirstOrderRatio {
    pub fn log_at(&self, z: f64) -> f64 {
        z * self.beta
    }

    pub fn at(&self, z: f64) -> f64 {
        self.log_at(z).exp()
    }
}

/// Maximum deviation of `(1 + 1/t)·g(t)` from its value at `t = 1` over
/// `t_grid`. Zero exactly when the first-order jump rate does not depend on
/// the current state.
pub fn constancy_check(g: BalancingFunction, t_grid: &[f64]) -> Result<f64> {
    let stat = |t: f64| -> Result<f64> { Ok((1.0 + 1.0 / t) * eval_balancing(g, t)?) };
    let reference = stat(1.0)?;
    let mut worst: f64 = 0.0;
    for &t in t_grid {
        if !(t > 0.0) {
            return Err(invalid(format!("grid values must be positive, got {t}")));
        }
        worst = worst.max((stat(t)? - reference).abs());
    }
    Ok(worst)
}

const JUMP_RATE_CHUNK: usize = 1 << 16;

/// Monte Carlo estimate of the Barker jump rate
/// `λ*(x) = ∫ g_B(t*_x(z)) q(z) dz` with `q = N(0, proposal_std²)`.
///
/// The target must be one-dimensional.
pub fn barker_jump_rate_mc<T: TargetDensity + ?Sized>(
    target: &T,
    x: f64,
    proposal_std: f64,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    barker_jump_rate_mc_with(
        Execution::default(),
        target,
        x,
        proposal_std,
        n_samples,
        seed,
    )
}

/// [`barker_jump_rate_mc`] with an explicit execution mode. The estimate is
/// identical across modes.
pub fn barker_jump_rate_mc_with<T: TargetDensity + ?Sized>(
    exec: Execution,
    target: &T,
    x: f64,
    proposal_std: f64,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    if target.dim() != 1 {
        return Err(invalid("jump rate estimate needs a one-dimensional target"));
    }
    if n_samples == 0 {
        return Err(invalid("n_samples must be at least 1"));
    }
    if !(proposal_std > 0.0) {
        return Err(invalid("proposal_std must be positive"));
    }
    let beta = target.grad_log_density(&DVector::from_element(1, x))?[0];
    let n_chunks = n_samples.div_ceil(JUMP_RATE_CHUNK);
    let sums = map_indexed(exec, n_chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, c as u64));
        let len = JUMP_RATE_CHUNK.min(n_samples - c * JUMP_RATE_CHUNK);
        let mut acc = 0.0;
        for _ in 0..len {
            let xi: f64 = StandardNormal.sample(&mut rng);
            acc += sigmoid(proposal_std * xi * beta);
        }
        acc
    });
    Ok(sums.iter().sum::<f64>() / n_samples as f64)
}

/// `n` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{make_skew_normal, GaussianTarget};
    use BalancingFunction::*;

    #[test]
    fn point_values() {
        assert_eq!(eval_balancing(Barker, 1.0).unwrap(), 0.5);
        assert!((eval_balancing(Barker, 2.0).unwrap() - 2.0 / 3.0).abs() < 1e-16);
        assert!((2.0 * eval_balancing(Barker, 0.5).unwrap() - 2.0 / 3.0).abs() < 1e-16);
        assert_eq!(eval_balancing(Hastings, 0.3).unwrap(), 0.3);
        assert_eq!(eval_balancing(Hastings, 0.0).unwrap(), 0.0);
        assert_eq!(eval_balancing(Barker, 0.0).unwrap(), 0.0);
        assert_eq!(eval_balancing(Barker, f64::INFINITY).unwrap(), 1.0);
        assert_eq!(eval_balancing(Hastings, f64::INFINITY).unwrap(), 1.0);
    }

    #[test]
    fn rejects_negative_and_nan() {
        assert!(eval_balancing(Barker, -1.0).is_err());
        assert!(eval_balancing(Hastings, f64::NAN).is_err());
        assert!(log_eval_balancing_barker(f64::NAN).is_err());
        assert!(logistic_cdf(f64::NAN).is_err());
    }

    #[test]
    fn stable_over_full_range() {
        for &t in &[1e-300, 1e-150, 1.0, 1e150, 1e300] {
            let g = eval_balancing(Barker, t).unwrap();
            assert!((0.0..=1.0).contains(&g));
        }
        assert!((eval_balancing(Barker, 1e-300).unwrap() - 1e-300).abs() < 1e-310);
    }

    #[test]
    fn log_barker_values() {
        assert!((log_eval_balancing_barker(0.0).unwrap() + std::f64::consts::LN_2).abs() < 1e-15);
        assert!((log_eval_balancing_barker(-1000.0).unwrap() + 1000.0).abs() < 1e-12);
        let v = log_eval_balancing_barker(50.0).unwrap();
        assert!((v + 1.928_749_847_963_917_8e-22).abs() < 1e-35);
        assert!(log_eval_balancing_barker(1e6).unwrap() <= 0.0);
        assert!((log_eval_balancing_barker(-1e6).unwrap() + 1e6).abs() < 1e-9);
    }

    #[test]
    fn logistic_cdf_values() {
        assert_eq!(logistic_cdf(0.0).unwrap(), 0.5);
        assert!((logistic_cdf(0.25f64.ln()).unwrap() - 0.2).abs() < 1e-15);
        let tiny = logistic_cdf(-800.0).unwrap();
        assert!(tiny >= 0.0 && !tiny.is_nan());
        assert_eq!(logistic_cdf(f64::INFINITY).unwrap(), 1.0);
        assert_eq!(logistic_cdf(f64::NEG_INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn first_order_ratio_reciprocal() {
        let r = FirstOrderRatio { beta: -3.7 };
        for &z in &[0.0, 0.1, 2.5, -40.0] {
            assert_eq!(r.log_at(z), -r.log_at(-z));
            assert!((r.at(z) * r.at(-z) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constancy_examples() {
        let grid = log_grid(1e-6, 1e6, 1001);
        assert!(constancy_check(Barker, &grid).unwrap() < 1e-12);
        assert!((constancy_check(Hastings, &[0.5, 1.0, 2.0]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(constancy_check(Hastings, &[1.0]).unwrap(), 0.0);
        assert_eq!(constancy_check(Barker, &[1.0]).unwrap(), 0.0);
        assert!(constancy_check(Barker, &[0.0]).is_err());
    }

    #[test]
    fn jump_rate_flat_gradient_is_exact() {
        // at the mode of a standard normal the gradient is zero
        let t = GaussianTarget::standard(1).unwrap();
        assert_eq!(barker_jump_rate_mc(&t, 0.0, 1.0, 10_000, 3).unwrap(), 0.5);
    }

    #[test]
    fn jump_rate_deterministic_and_mode_independent() {
        let t = make_skew_normal(3.0).unwrap();
        let a =
            barker_jump_rate_mc_with(Execution::Sequential, &t, -0.7, 1.3, 200_000, 11).unwrap();
        let b = barker_jump_rate_mc_with(Execution::Parallel, &t, -0.7, 1.3, 200_000, 11).unwrap();
        assert_eq!(a, b);
        assert!((a - 0.5).abs() < 3.0 * 0.5 / (200_000f64).sqrt());
    }

    #[test]
    fn jump_rate_rejects_multivariate() {
        let t = GaussianTarget::standard(2).unwrap();
        assert!(barker_jump_rate_mc(&t, 0.0, 1.0, 10, 0).is_err());
    }
}

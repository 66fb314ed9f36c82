//! Fast internal consistency checks behind `barker selftest`.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::balancing::{
    barker_jump_rate_mc, constancy_check, eval_balancing, log_grid, BalancingFunction,
};
use crate::diagnostics::ess;
use crate::error::Result;
use crate::experiments::skew_study;
use crate::precond::Preconditioner;
use crate::samplers::{reversibility_check, run_chain, SamplerKind, Tuning};
use crate::targets::{fd_gradient_check, make_skew_normal, GaussianTarget};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check {
        name,
        passed,
        detail,
    }
}

fn balancing_identity() -> Result<Check> {
    let mut worst: f64 = 0.0;
    let mut ordered = true;
    for t in log_grid(1e-6, 1e6, 201) {
        for g in [BalancingFunction::Barker, BalancingFunction::Hastings] {
            let lhs = eval_balancing(g, t)?;
            let rhs = t * eval_balancing(g, 1.0 / t)?;
            worst = worst.max((lhs - rhs).abs() / lhs.max(1e-300));
        }
        ordered &= eval_balancing(BalancingFunction::Barker, t)?
            <= eval_balancing(BalancingFunction::Hastings, t)?;
    }
    Ok(check(
        "balancing identity",
        worst < 1e-12 && ordered,
        format!("max rel err {worst:e}"),
    ))
}

fn constancy() -> Result<Check> {
    let grid = log_grid(0.01, 100.0, 101);
    let b = constancy_check(BalancingFunction::Barker, &grid)?;
    let h = constancy_check(BalancingFunction::Hastings, &grid)?;
    Ok(check(
        "jump-rate constancy",
        b < 1e-12 && h >= 0.5,
        format!("barker {b:e}, hastings {h}"),
    ))
}

fn jump_rate() -> Result<Check> {
    let n = 200_000;
    let tol = 4.0 * 0.5 / (n as f64).sqrt();
    let gauss = GaussianTarget::standard(1)?;
    let skew = make_skew_normal(5.0)?;
    let estimates = [
        barker_jump_rate_mc(&gauss, 2.0, 1.0, n, 11)?,
        barker_jump_rate_mc(&skew, 1.0, 0.7, n, 12)?,
    ];
    let worst = estimates
        .iter()
        .map(|e| (e - 0.5).abs())
        .fold(0.0, f64::max);
    Ok(check(
        "first-order jump rate is 1/2",
        worst < tol,
        format!("max |λ - 0.5| = {worst:e}"),
    ))
}

fn reversibility() -> Result<Check> {
    let target = GaussianTarget::dense(
        DVector::from_vec(vec![0.5, -1.0, 0.0]),
        nalgebra::DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 0.5]),
    )?;
    let p = Preconditioner::identity(3, 0.8)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = DVector::from_fn(3, |_, _| StandardNormal.sample(&mut rng));
        let y = DVector::from_fn(3, |_, _| StandardNormal.sample(&mut rng));
        for kind in SamplerKind::ALL {
            worst = worst.max(reversibility_check(kind, &target, &x, &y, &p)?);
        }
    }
    Ok(check(
        "detailed balance",
        worst < 1e-10,
        format!("max residual {worst:e}"),
    ))
}

fn skew_collapse() -> Result<Check> {
    let rows = skew_study(&[1.0, 1000.0], 1.5, 0.0, 1.0)?;
    let last = rows[1];
    Ok(check(
        "skew-normal acceptance",
        last.alpha_mala() < 1e-10 && last.alpha_barker() > 0.01,
        format!(
            "mala {:e}, barker {}",
            last.alpha_mala(),
            last.alpha_barker()
        ),
    ))
}

fn gradients() -> Result<Check> {
    let x = DVector::from_element(1, 0.3);
    let worst = [10.0, 1e4]
        .iter()
        .map(|&eta| fd_gradient_check(&make_skew_normal(eta)?, &x, 1e-6))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(check(
        "analytic gradients",
        worst < 1e-5,
        format!("max fd error {worst:e}"),
    ))
}

fn ar1_ess() -> Result<Check> {
    let (n, rho) = (20_000usize, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut x: f64 = StandardNormal.sample(&mut rng);
    let innov = (1.0f64 - rho * rho).sqrt();
    let series: Vec<f64> = (0..n)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut rng);
            x = rho * x + innov * e;
            x
        })
        .collect();
    let expected = n as f64 * (1.0 - rho) / (1.0 + rho);
    let got = ess(&series)?;
    let rel = (got - expected).abs() / expected;
    Ok(check(
        "ESS of AR(1)",
        rel < 0.2,
        format!("{got:.1} vs {expected:.1}"),
    ))
}

fn determinism() -> Result<Check> {
    let target = GaussianTarget::standard(2)?;
    let tuning = Tuning::Fixed(Preconditioner::identity(2, 1.0)?);
    let x0 = DVector::zeros(2);
    let a = run_chain(&target, SamplerKind::Barker, 500, &x0, &tuning, 9)?;
    let b = run_chain(&target, SamplerKind::Barker, 500, &x0, &tuning, 9)?;
    Ok(check("seeded determinism", a == b, String::new()))
}

/// Runs every check. An `Err` means a check could not be evaluated.
pub fn run_all() -> Result<Vec<Check>> {
    Ok(vec![
        balancing_identity()?,
        constancy()?,
        jump_rate()?,
        reversibility()?,
        skew_collapse()?,
        gradients()?,
        ar1_ess()?,
        determinism()?,
    ])
}

//! Continuous-time Barker dynamics on the real line.
//!
//! The process holds at `x` for an `Exp(½)` time, then jumps by an increment
//! drawn from the skew-symmetric kernel `j*(x, x+z) = 2 F_L(β_x z) q(z)` with
//! `β_x = ∇log π(x)`. Because the jump rate is constant, the jump chain on
//! its own (the skeleton) has the same invariant law as the process.
//!
//! Neither the process nor the skeleton is Metropolis-corrected, so both
//! are only approximately π-invariant.

use std::io::Write;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::samplers::Trace;
use crate::special::{derive_seed, fmt_f64, log_normal_pdf, sigmoid};
use crate::targets::TargetDensity;

/// Jump intensity of Barker dynamics.
pub const BARKER_JUMP_RATE: f64 = 0.5;

/// Symmetric base density `q` for the innovations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaseProposal {
    /// `N(0, std²)`
    Gaussian { std: f64 },
    /// `½ N(μ, std²) + ½ N(−μ, std²)`
    Bimodal { mu: f64, std: f64 },
}

impl BaseProposal {
    pub fn gaussian(std: f64) -> Result<Self> {
        if !(std > 0.0 && std.is_finite()) {
            return Err(invalid(format!("proposal std must be positive, got {std}")));
        }
        Ok(BaseProposal::Gaussian { std })
    }

    pub fn bimodal(mu: f64, std: f64) -> Result<Self> {
        if !(std > 0.0 && std.is_finite() && mu.is_finite()) {
            return Err(invalid("bimodal base needs finite mu and positive std"));
        }
        Ok(BaseProposal::Bimodal { mu, std })
    }

    pub fn density(&self, z: f64) -> f64 {
        match *self {
            BaseProposal::Gaussian { std } => log_normal_pdf(z / std).exp() / std,
            BaseProposal::Bimodal { mu, std } => {
                0.5 * (log_normal_pdf((z - mu) / std).exp() + log_normal_pdf((z + mu) / std).exp())
                    / std
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let n: f64 = StandardNormal.sample(rng);
        match *self {
            BaseProposal::Gaussian { std } => std * n,
            BaseProposal::Bimodal { mu, std } => {
                let centre = if rng.random::<bool>() { mu } else { -mu };
                centre + std * n
            }
        }
    }
}

/// Keeps `xi` with probability `F_L(beta · xi)`, otherwise returns `-xi`.
pub fn skew_flip<R: Rng + ?Sized>(beta: f64, xi: f64, rng: &mut R) -> f64 {
    if rng.random::<f64>() < sigmoid(beta * xi) {
        xi
    } else {
        -xi
    }
}

/// Draws `z` with density `2 F_L(beta z) q(z)`.
pub fn sample_skew_symmetric_increment<R: Rng + ?Sized>(
    beta: f64,
    base: &BaseProposal,
    rng: &mut R,
) -> f64 {
    let xi = base.sample(rng);
    skew_flip(beta, xi, rng)
}

/// Transition density `j*(x, x+z) = 2 F_L(β z) q(z)`.
pub fn jump_kernel_density(z: f64, beta: f64, base: &BaseProposal) -> f64 {
    2.0 * sigmoid(beta * z) * base.density(z)
}

/// Event-driven path of a one-dimensional jump process.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpPath {
    pub initial_state: f64,
    /// Strictly increasing event times in `(0, total_duration]`.
    pub times: Vec<f64>,
    /// State immediately after each event.
    pub states: Vec<f64>,
    pub total_duration: f64,
}

impl JumpPath {
    pub fn n_events(&self) -> usize {
        self.times.len()
    }

    /// Holding times, the last one censored at `total_duration`.
    pub fn holding_times(&self) -> Vec<f64> {
        let mut prev = 0.0;
        let mut out = Vec::with_capacity(self.times.len() + 1);
        for &t in &self.times {
            out.push(t - prev);
            prev = t;
        }
        out.push(self.total_duration - prev);
        out
    }

    /// `(1/T) ∫₀ᵀ f(X_t) dt`.
    pub fn time_average(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        let mut prev_t = 0.0;
        let mut x = self.initial_state;
        for (&t, &s) in self.times.iter().zip(&self.states) {
            acc += f(x) * (t - prev_t);
            prev_t = t;
            x = s;
        }
        acc += f(x) * (self.total_duration - prev_t);
        acc / self.total_duration
    }

    /// `event_time,state`; the first row is the initial state at time 0.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["event_time", "state"])?;
        out.write_record([fmt_f64(0.0), fmt_f64(self.initial_state)])?;
        for (t, s) in self.times.iter().zip(&self.states) {
            out.write_record([fmt_f64(*t), fmt_f64(*s)])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn gradient_1d<T: TargetDensity + ?Sized>(target: &T, x: f64) -> Result<f64> {
    let g = match target.grad_log_density(&DVector::from_element(1, x)) {
        Ok(g) => g[0],
        Err(Error::OffSupport(_)) | Err(Error::NonFinite(_)) => f64::NAN,
        Err(e) => return Err(e),
    };
    if !g.is_finite() {
        return Err(Error::GradientBlowUp { state: vec![x] });
    }
    Ok(g)
}

fn check_1d<T: TargetDensity + ?Sized>(target: &T) -> Result<()> {
    if target.dim() != 1 {
        return Err(invalid("jump processes are one-dimensional"));
    }
    Ok(())
}

// Increments and holding times use separate streams so the jump states of a
// path coincide with the skeleton chain run from the same seed.
fn increment_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, 0))
}

fn clock_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, 1))
}

/// Simulates Barker dynamics on `[0, duration]` started at `x0`.
pub fn simulate_jump_process<T: TargetDensity + ?Sized>(
    target: &T,
    base: &BaseProposal,
    duration: f64,
    x0: f64,
    seed: u64,
) -> Result<JumpPath> {
    check_1d(target)?;
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(invalid("duration must be positive and finite"));
    }
    if !x0.is_finite() {
        return Err(Error::NonFinite("initial state".into()));
    }
    let mut inc = increment_rng(seed);
    let mut clock = clock_rng(seed);
    let holding = Exp::new(BARKER_JUMP_RATE).expect("positive rate");
    let expected = (duration * BARKER_JUMP_RATE * 1.1) as usize + 16;
    let mut times = Vec::with_capacity(expected);
    let mut states = Vec::with_capacity(expected);
    let mut t = 0.0;
    let mut x = x0;
    loop {
        t += holding.sample(&mut clock);
        if t > duration {
            break;
        }
        let beta = gradient_1d(target, x)?;
        x += sample_skew_symmetric_increment(beta, base, &mut inc);
        times.push(t);
        states.push(x);
    }
    Ok(JumpPath {
        initial_state: x0,
        times,
        states,
        total_duration: duration,
    })
}

/// Discrete-time chain applying the jump kernel directly, with no holding
/// times and no MH correction. Every row is a move, so all flags are set.
pub fn skeleton_chain<T: TargetDensity + ?Sized>(
    target: &T,
    base: &BaseProposal,
    n_steps: usize,
    x0: f64,
    seed: u64,
) -> Result<Trace> {
    check_1d(target)?;
    if n_steps == 0 {
        return Err(invalid("n_steps must be at least 1"));
    }
    let mut inc = increment_rng(seed);
    let mut x = x0;
    let mut samples = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        let beta = gradient_1d(target, x)?;
        x += sample_skew_symmetric_increment(beta, base, &mut inc);
        samples.push(x);
    }
    Trace::from_rows(1, samples, vec![true; n_steps], seed, "barker-skeleton")
}

/// Pearson chi-squared statistic for event counts in consecutive windows of
/// width `window` against `Poisson(rate · window)`. Count cells are merged
/// from the upper tail until every expected count is at least 5. Returns
/// `(statistic, degrees_of_freedom)`.
pub fn poisson_count_chi_square(
    times: &[f64],
    duration: f64,
    rate: f64,
    window: f64,
) -> Result<(f64, usize)> {
    let n_windows = (duration / window).floor() as usize;
    if n_windows < 10 {
        return Err(invalid("need at least 10 windows"));
    }
    let mut counts = vec![0usize; n_windows];
    for &t in times {
        let k = (t / window) as usize;
        if k < n_windows {
            counts[k] += 1;
        }
    }
    let mean = rate * window;
    let max_count = counts.iter().copied().max().unwrap_or(0);
    let mut observed = vec![0.0; max_count.max(1) + 1];
    for c in counts {
        observed[c] += 1.0;
    }
    let total = n_windows as f64;
    // Poisson pmf, built iteratively
    let mut expected = Vec::with_capacity(observed.len());
    let mut p = (-mean).exp();
    for k in 0..observed.len() {
        if k > 0 {
            p *= mean / k as f64;
        }
        expected.push(p * total);
    }
    // last cell is the upper tail P(N ≥ k)
    let head: f64 = expected[..expected.len() - 1].iter().sum();
    *expected.last_mut().unwrap() = total - head;

    while expected.len() > 2 && *expected.last().unwrap() < 5.0 {
        let e = expected.pop().unwrap();
        let o = observed.pop().unwrap();
        *expected.last_mut().unwrap() += e;
        *observed.last_mut().unwrap() += o;
    }
    let stat = observed
        .iter()
        .zip(&expected)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    Ok((stat, expected.len() - 1))
}

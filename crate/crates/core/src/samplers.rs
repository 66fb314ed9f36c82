//! Metropolis–Hastings samplers: random-walk Metropolis, MALA and the Barker
//! proposal (coordinate-wise and global flip).
//!
//! All proposals are built in whitened coordinates. With `L Lᵀ = λ²Σ`, a
//! whitened displacement `z̃` maps to `y = x + L z̃`, and gradients map to
//! `Lᵀ ∇log π`. Acceptance ratios are computed in log space throughout.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::adapt::{AcceptStatistic, AdaptConfig, AdaptState};
use crate::error::{invalid, Error, Result};
use crate::precond::Preconditioner;
use crate::special::{fmt_f64, log_normal_pdf, log_sigmoid, sigmoid, softplus, LN_2};
use crate::targets::TargetDensity;

/// Current position with its cached log-density and gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub position: DVector<f64>,
    pub log_density: f64,
    pub gradient: DVector<f64>,
}

impl ChainState {
    pub fn new<T: TargetDensity + ?Sized>(target: &T, position: DVector<f64>) -> Result<Self> {
        let (log_density, gradient) = target.log_density_and_grad(&position)?;
        if !log_density.is_finite() {
            return Err(Error::OffSupport(format!(
                "log-density {log_density} at {:?}",
                position.as_slice()
            )));
        }
        if gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::GradientBlowUp {
                state: position.as_slice().to_vec(),
            });
        }
        Ok(Self {
            position,
            log_density,
            gradient,
        })
    }

    pub fn dim(&self) -> usize {
        self.position.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplerKind {
    Rwm,
    Mala,
    /// Coordinate-wise flips; the default Barker scheme.
    Barker,
    /// One global flip of the whole innovation vector.
    BarkerGlobal,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 4] = [
        SamplerKind::Rwm,
        SamplerKind::Mala,
        SamplerKind::Barker,
        SamplerKind::BarkerGlobal,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SamplerKind::Rwm => "rwm",
            SamplerKind::Mala => "mala",
            SamplerKind::Barker => "barker",
            SamplerKind::BarkerGlobal => "barker-global",
        }
    }

    /// Optimal-scaling acceptance targets used by the adaptive tuner.
    pub fn default_target_accept(self) -> f64 {
        match self {
            SamplerKind::Rwm => 0.234,
            SamplerKind::Mala => 0.574,
            SamplerKind::Barker | SamplerKind::BarkerGlobal => 0.57,
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SamplerKind::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| Error::Config(format!("unknown sampler '{s}'")))
    }
}

/// Outcome of one MH transition.
#[derive(Debug, Clone)]
pub struct MHStepResult {
    pub proposal: DVector<f64>,
    /// `log α ≤ 0`; `-∞` for auto-rejected proposals.
    pub log_accept_prob: f64,
    pub accepted: bool,
    pub next_state: ChainState,
    /// The proposal produced a non-finite log-density or gradient and was
    /// rejected without evaluation of α.
    pub gradient_blowup: bool,
}

fn draw_normal_vec<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Whitened displacement `z̃` for one proposal from `x`.
fn propose_whitened<R: Rng + ?Sized>(
    kind: SamplerKind,
    grad_w: &DVector<f64>,
    rng: &mut R,
) -> DVector<f64> {
    let d = grad_w.len();
    let mut xi = draw_normal_vec(d, rng);
    match kind {
        SamplerKind::Rwm => xi,
        SamplerKind::Mala => {
            xi.axpy(0.5, grad_w, 1.0);
            xi
        }
        SamplerKind::Barker => {
            for i in 0..d {
                let p_up = sigmoid(grad_w[i] * xi[i]);
                if rng.random::<f64>() >= p_up {
                    xi[i] = -xi[i];
                }
            }
            xi
        }
        SamplerKind::BarkerGlobal => {
            let p_up = sigmoid(grad_w.dot(&xi));
            if rng.random::<f64>() >= p_up {
                xi.neg_mut();
            }
            xi
        }
    }
}

/// Barker coordinate-wise log acceptance probability in whitened coordinates:
///
/// `min(0, log π(y) − log π(x) + Σ_i [softplus(−z̃_i β̃_{x,i}) − softplus(z̃_i β̃_{y,i})])`
///
/// where each bracket is `log[(1 + e^{(x_i−y_i)β_{x,i}}) / (1 + e^{(y_i−x_i)β_{y,i}})]`.
pub fn barker_log_accept(
    log_pi_x: f64,
    log_pi_y: f64,
    grad_x: &DVector<f64>,
    grad_y: &DVector<f64>,
    z: &DVector<f64>,
) -> Result<f64> {
    if grad_x.len() != z.len() || grad_y.len() != z.len() {
        return Err(invalid("gradient and displacement lengths differ"));
    }
    if log_pi_x.is_nan()
        || log_pi_y.is_nan()
        || grad_x
            .iter()
            .chain(grad_y.iter())
            .chain(z.iter())
            .any(|v| v.is_nan())
    {
        return Err(invalid("NaN in Barker acceptance inputs"));
    }
    let correction: f64 = (0..z.len())
        .map(|i| softplus(-z[i] * grad_x[i]) - softplus(z[i] * grad_y[i]))
        .sum();
    Ok((log_pi_y - log_pi_x + correction).min(0.0))
}

fn mala_log_q(z: &DVector<f64>, grad_w: &DVector<f64>) -> f64 {
    // -½ |z̃ − ½ Lᵀ∇|² up to constants shared by both directions
    let mut r = z.clone();
    r.axpy(-0.5, grad_w, 1.0);
    -0.5 * r.norm_squared()
}

/// `log α(x, y)` given whitened displacement `z` (so `y = x + L z`) and the
/// whitened gradients at both ends.
fn log_accept_whitened(
    kind: SamplerKind,
    lp_x: f64,
    lp_y: f64,
    gw_x: &DVector<f64>,
    gw_y: &DVector<f64>,
    z: &DVector<f64>,
) -> f64 {
    if !lp_y.is_finite() {
        return f64::NEG_INFINITY;
    }
    let log_ratio = match kind {
        SamplerKind::Rwm => lp_y - lp_x,
        SamplerKind::Mala => {
            let back = -z;
            lp_y - lp_x + mala_log_q(&back, gw_y) - mala_log_q(z, gw_x)
        }
        SamplerKind::Barker => {
            return barker_log_accept(lp_x, lp_y, gw_x, gw_y, z).unwrap_or(f64::NEG_INFINITY);
        }
        SamplerKind::BarkerGlobal => lp_y - lp_x + softplus(-gw_x.dot(z)) - softplus(gw_y.dot(z)),
    };
    if log_ratio.is_nan() {
        f64::NEG_INFINITY
    } else {
        log_ratio.min(0.0)
    }
}

/// `log α(x, y)` for two evaluated states under `precond`.
pub fn log_accept_ratio(
    kind: SamplerKind,
    x: &ChainState,
    y: &ChainState,
    precond: &Preconditioner,
) -> f64 {
    let z = precond.solve(&(&y.position - &x.position));
    let gw_x = precond.apply_transpose(&x.gradient);
    let gw_y = precond.apply_transpose(&y.gradient);
    log_accept_whitened(kind, x.log_density, y.log_density, &gw_x, &gw_y, &z)
}

/// Closed-form proposal log-density `log j(x, y)` in original coordinates.
pub fn log_proposal_density(
    kind: SamplerKind,
    from: &ChainState,
    to: &DVector<f64>,
    precond: &Preconditioner,
) -> f64 {
    let z = precond.solve(&(to - &from.position));
    let gw = precond.apply_transpose(&from.gradient);
    let d = z.len();
    let jac = -precond.log_det_factor();
    let base: f64 = z.iter().map(|v| log_normal_pdf(*v)).sum();
    match kind {
        SamplerKind::Rwm => base + jac,
        SamplerKind::Mala => {
            let mut r = z.clone();
            r.axpy(-0.5, &gw, 1.0);
            r.iter().map(|v| log_normal_pdf(*v)).sum::<f64>() + jac
        }
        SamplerKind::Barker => {
            let skew: f64 = (0..d).map(|i| LN_2 + log_sigmoid(gw[i] * z[i])).sum();
            base + skew + jac
        }
        SamplerKind::BarkerGlobal => base + LN_2 + log_sigmoid(gw.dot(&z)) + jac,
    }
}

/// One MH transition of the given kind.
pub fn mh_step<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    kind: SamplerKind,
    state: &ChainState,
    target: &T,
    precond: &Preconditioner,
    rng: &mut R,
) -> Result<MHStepResult> {
    if precond.dim() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            got: precond.dim(),
        });
    }
    let gw_x = precond.apply_transpose(&state.gradient);
    let z = propose_whitened(kind, &gw_x, rng);
    let proposal = &state.position + precond.apply(&z);
    let u: f64 = rng.random();

    let reject = |proposal: DVector<f64>, blowup: bool| MHStepResult {
        proposal,
        log_accept_prob: f64::NEG_INFINITY,
        accepted: false,
        next_state: state.clone(),
        gradient_blowup: blowup,
    };

    if proposal.iter().any(|v| !v.is_finite()) {
        return Ok(reject(proposal, true));
    }
    let (lp_y, grad_y) = match target.log_density_and_grad(&proposal) {
        Ok(v) => v,
        Err(Error::OffSupport(_)) => return Ok(reject(proposal, false)),
        Err(Error::NonFinite(_)) => return Ok(reject(proposal, true)),
        Err(e) => return Err(e),
    };
    if lp_y == f64::NEG_INFINITY {
        return Ok(reject(proposal, false));
    }
    if lp_y.is_nan() || grad_y.iter().any(|g| !g.is_finite()) {
        return Ok(reject(proposal, true));
    }
    let gw_y = precond.apply_transpose(&grad_y);
    let log_alpha = log_accept_whitened(kind, state.log_density, lp_y, &gw_x, &gw_y, &z);
    let accepted = u.ln() < log_alpha;
    let next_state = if accepted {
        ChainState {
            position: proposal.clone(),
            log_density: lp_y,
            gradient: grad_y,
        }
    } else {
        state.clone()
    };
    Ok(MHStepResult {
        proposal,
        log_accept_prob: log_alpha,
        accepted,
        next_state,
        gradient_blowup: false,
    })
}

pub fn rwm_step<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    state: &ChainState,
    target: &T,
    precond: &Preconditioner,
    rng: &mut R,
) -> Result<MHStepResult> {
    mh_step(SamplerKind::Rwm, state, target, precond, rng)
}

pub fn mala_step<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    state: &ChainState,
    target: &T,
    precond: &Preconditioner,
    rng: &mut R,
) -> Result<MHStepResult> {
    mh_step(SamplerKind::Mala, state, target, precond, rng)
}

pub fn barker_step_coordinatewise<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    state: &ChainState,
    target: &T,
    precond: &Preconditioner,
    rng: &mut R,
) -> Result<MHStepResult> {
    mh_step(SamplerKind::Barker, state, target, precond, rng)
}

pub fn barker_step_global<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    state: &ChainState,
    target: &T,
    precond: &Preconditioner,
    rng: &mut R,
) -> Result<MHStepResult> {
    mh_step(SamplerKind::BarkerGlobal, state, target, precond, rng)
}

/// Pointwise detailed-balance residual
/// `|log[π(x) j(x,y) α(x,y)] − log[π(y) j(y,x) α(y,x)]|`.
///
/// Returns 0 when both directions are rejected with certainty.
pub fn reversibility_check<T: TargetDensity + ?Sized>(
    kind: SamplerKind,
    target: &T,
    x: &DVector<f64>,
    y: &DVector<f64>,
    precond: &Preconditioner,
) -> Result<f64> {
    let sx = ChainState::new(target, x.clone())?;
    let sy = ChainState::new(target, y.clone())?;
    let a_xy = log_accept_ratio(kind, &sx, &sy, precond);
    let a_yx = log_accept_ratio(kind, &sy, &sx, precond);
    if a_xy == f64::NEG_INFINITY && a_yx == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let fwd = sx.log_density + log_proposal_density(kind, &sx, y, precond) + a_xy;
    let bwd = sy.log_density + log_proposal_density(kind, &sy, x, precond) + a_yx;
    Ok((fwd - bwd).abs())
}

/// Fixed preconditioner or Robbins–Monro adaptation.
#[derive(Debug, Clone)]
pub enum Tuning {
    Fixed(Preconditioner),
    Adaptive(AdaptConfig),
}

/// Snapshot of the adapted preconditioner after an iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptSnapshot {
    pub iteration: usize,
    pub global_scale: f64,
    pub diag_cov: Vec<f64>,
}

/// Output of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    dim: usize,
    /// Row-major `n × dim`.
    samples: Vec<f64>,
    pub accept_flags: Vec<bool>,
    pub adapt_history: Option<Vec<AdaptSnapshot>>,
    pub seed: u64,
    pub sampler_label: String,
    pub gradient_blowups: usize,
}

impl Trace {
    pub fn from_rows(
        dim: usize,
        samples: Vec<f64>,
        accept_flags: Vec<bool>,
        seed: u64,
        sampler_label: impl Into<String>,
    ) -> Result<Self> {
        if dim == 0 || samples.len() != dim * accept_flags.len() {
            return Err(invalid("sample buffer does not match dim × iterations"));
        }
        Ok(Self {
            dim,
            samples,
            accept_flags,
            adapt_history: None,
            seed,
            sampler_label: sampler_label.into(),
            gradient_blowups: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.accept_flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accept_flags.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.samples
            .iter()
            .skip(j)
            .step_by(self.dim)
            .copied()
            .collect()
    }

    /// Column `j` restricted to rows `start..`.
    pub fn column_from(&self, j: usize, start: usize) -> Vec<f64> {
        self.samples[start * self.dim..]
            .iter()
            .skip(j)
            .step_by(self.dim)
            .copied()
            .collect()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.accept_flags.iter().filter(|a| **a).count() as f64 / self.len() as f64
    }

    /// Header row then one row per iteration: `x0..x{d-1},accepted`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (0..self.dim).map(|j| format!("x{j}")).collect();
        header.push("accepted".into());
        out.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.row(i).iter().map(|v| fmt_f64(*v)).collect();
            rec.push(u8::from(self.accept_flags[i]).to_string());
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Adaptation sidecar: `iteration,global_scale,sigma0..sigma{d-1}` (diag of Σ).
    pub fn write_adapt_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["iteration".to_string(), "global_scale".to_string()];
        header.extend((0..self.dim).map(|j| format!("sigma{j}")));
        out.write_record(&header)?;
        for snap in self.adapt_history.iter().flatten() {
            let mut rec = vec![snap.iteration.to_string(), fmt_f64(snap.global_scale)];
            rec.extend(snap.diag_cov.iter().map(|v| fmt_f64(*v)));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Runs `n_iters` MH iterations from `x0`. Deterministic given `seed`.
pub fn run_chain<T: TargetDensity + ?Sized>(
    target: &T,
    kind: SamplerKind,
    n_iters: usize,
    x0: &DVector<f64>,
    tuning: &Tuning,
    seed: u64,
) -> Result<Trace> {
    if n_iters == 0 {
        return Err(invalid("n_iters must be at least 1"));
    }
    if x0.len() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: x0.len(),
        });
    }
    let d = x0.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = ChainState::new(target, x0.clone())?;

    let (mut precond, mut adapt, history_every) = match tuning {
        Tuning::Fixed(p) => {
            if p.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: p.dim(),
                });
            }
            (p.clone(), None, 0)
        }
        Tuning::Adaptive(cfg) => {
            let a = AdaptState::new(cfg, x0)?;
            (a.to_preconditioner()?, Some(a), cfg.history_every)
        }
    };

    let mut samples = Vec::with_capacity(n_iters * d);
    let mut accept_flags = Vec::with_capacity(n_iters);
    let mut history = adapt.as_ref().map(|_| Vec::new());
    let mut blowups = 0;

    for it in 0..n_iters {
        let step = mh_step(kind, &state, target, &precond, &mut rng)?;
        if step.gradient_blowup {
            blowups += 1;
        }
        accept_flags.push(step.accepted);
        state = step.next_state;
        samples.extend_from_slice(state.position.as_slice());

        if let Some(a) = adapt.as_mut() {
            let stat = match a.statistic() {
                AcceptStatistic::Probability => step.log_accept_prob.exp(),
                AcceptStatistic::Indicator => f64::from(u8::from(step.accepted)),
            };
            a.rm_update(stat, &state.position)?;
            precond = a.to_preconditioner()?;
            if history_every > 0 && (it + 1) % history_every == 0 {
                if let Some(h) = history.as_mut() {
                    h.push(AdaptSnapshot {
                        iteration: it + 1,
                        global_scale: a.global_scale(),
                        diag_cov: a.running_cov().diagonal().as_slice().to_vec(),
                    });
                }
            }
        }
    }

    let mut trace = Trace::from_rows(d, samples, accept_flags, seed, kind.label())?;
    trace.adapt_history = history;
    trace.gradient_blowups = blowups;
    Ok(trace)
}

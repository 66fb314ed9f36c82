//! Effective sample size, split-R̂ and Table-style summaries.

use std::io::Write;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};
use crate::samplers::Trace;
use crate::special::fmt_f64;

/// Minimum series length accepted by [`ess`].
pub const MIN_ESS_LENGTH: usize = 100;

/// R̂ above this marks a run as failed.
pub const RHAT_THRESHOLD: f64 = 1.1;

/// Biased sample autocorrelations `ρ_0..ρ_{n-1}` via zero-padded FFT.
pub fn autocorrelation(series: &[f64]) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 2 {
        return Err(invalid("autocorrelation needs at least two points"));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|v| Complex::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    if !(c0 > 0.0) || !c0.is_finite() {
        return Err(Error::Degenerate("series has zero variance".into()));
    }
    Ok(buf[..n].iter().map(|c| c.re / c0).collect())
}

/// Geyer initial-monotone-positive-sequence ESS.
///
/// The integrated autocorrelation time is floored at `1/log10(n)`, so
/// strongly anticorrelated chains report ESS above `n` but bounded.
pub fn ess(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < MIN_ESS_LENGTH {
        return Err(invalid(format!(
            "ESS needs at least {MIN_ESS_LENGTH} points, got {n}"
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("series".into()));
    }
    let rho = autocorrelation(series)?;
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = rho[2 * k] + rho[2 * k + 1];
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        k += 1;
    }
    let tau = (2.0 * sum - 1.0).max(1.0 / (n as f64).log10());
    Ok(n as f64 / tau)
}

fn median(sorted: &[f64]) -> f64 {
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EssReport {
    /// Per-coordinate ESS; `NaN` where the coordinate was stuck.
    pub per_coordinate_ess: Vec<f64>,
    pub min_ess: f64,
    pub median_ess: f64,
    /// Post-burn-in draws per chain.
    pub n_used: usize,
    /// Coordinates with zero post-burn-in variance in some chain.
    pub stuck: Vec<usize>,
}

impl EssReport {
    /// True when at least one coordinate never moved after burn-in.
    pub fn is_na(&self) -> bool {
        !self.stuck.is_empty()
    }

    fn from_per_coordinate(per: Vec<f64>, n_used: usize, stuck: Vec<usize>) -> Self {
        let mut finite: Vec<f64> = per.iter().copied().filter(|v| v.is_finite()).collect();
        finite.sort_by(f64::total_cmp);
        let (min_ess, median_ess) = if stuck.is_empty() && !finite.is_empty() {
            (finite[0], median(&finite))
        } else {
            (f64::NAN, f64::NAN)
        };
        Self {
            per_coordinate_ess: per,
            min_ess,
            median_ess,
            n_used,
            stuck,
        }
    }
}

fn burn_in_start(len: usize, frac: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&frac) {
        return Err(invalid(format!(
            "burn-in fraction must lie in [0, 1), got {frac}"
        )));
    }
    Ok((len as f64 * frac).floor() as usize)
}

/// Per-coordinate ESS over the post-burn-in segment of one chain.
pub fn ess_summary(trace: &Trace, burn_in_frac: f64) -> Result<EssReport> {
    ess_summary_multi(std::slice::from_ref(trace), burn_in_frac)
}

/// As [`ess_summary`], summing per-coordinate ESS over chains.
pub fn ess_summary_multi(traces: &[Trace], burn_in_frac: f64) -> Result<EssReport> {
    let first = traces.first().ok_or_else(|| invalid("no traces"))?;
    if first.is_empty() {
        return Err(invalid("empty trace"));
    }
    let (d, len) = (first.dim(), first.len());
    if traces.iter().any(|t| t.dim() != d || t.len() != len) {
        return Err(invalid("traces must share dimension and length"));
    }
    let start = burn_in_start(len, burn_in_frac)?;
    let n_used = len - start;
    let mut per = vec![0.0; d];
    let mut stuck = Vec::new();
    for (j, slot) in per.iter_mut().enumerate() {
        for t in traces {
            match ess(&t.column_from(j, start)) {
                Ok(e) => *slot += e,
                Err(Error::Degenerate(_)) => {
                    stuck.push(j);
                    *slot = f64::NAN;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(EssReport::from_per_coordinate(per, n_used, stuck))
}

/// Split-R̂ for one coordinate over the post-burn-in part of each chain.
///
/// Each chain is halved, and the classic between/within variance ratio is
/// taken over the `2m` halves.
pub fn split_rhat_from(traces: &[Trace], coordinate: usize, burn_in_frac: f64) -> Result<f64> {
    if traces.len() < 2 {
        return Err(invalid("split-R̂ needs at least two chains"));
    }
    let len = traces[0].len();
    if traces.iter().any(|t| t.len() != len) {
        return Err(invalid("chains must have equal length"));
    }
    if traces.iter().any(|t| coordinate >= t.dim()) {
        return Err(invalid(format!("coordinate {coordinate} out of range")));
    }
    let start = burn_in_start(len, burn_in_frac)?;
    let half = (len - start) / 2;
    if half < 2 || len - start < MIN_ESS_LENGTH {
        return Err(invalid(format!(
            "split-R̂ needs at least {MIN_ESS_LENGTH} post-burn-in draws"
        )));
    }
    let mut halves = Vec::with_capacity(2 * traces.len());
    for t in traces {
        let col = t.column_from(coordinate, start);
        // drop the middle draw when the count is odd
        halves.push(col[..half].to_vec());
        halves.push(col[col.len() - half..].to_vec());
    }
    rhat_of_halves(&halves)
}

/// [`split_rhat_from`] with no burn-in.
pub fn split_rhat(traces: &[Trace], coordinate: usize) -> Result<f64> {
    split_rhat_from(traces, coordinate, 0.0)
}

fn rhat_of_halves(chains: &[Vec<f64>]) -> Result<f64> {
    let m = chains.len() as f64;
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    let vars: Vec<f64> = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .collect();
    let w = vars.iter().sum::<f64>() / m;
    if !(w > 0.0) {
        return Err(Error::Degenerate("zero within-chain variance".into()));
    }
    let grand = means.iter().sum::<f64>() / m;
    let b_over_n = means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>() / (m - 1.0);
    let var_plus = (n - 1.0) / n * w + b_over_n;
    Ok((var_plus / w).sqrt())
}

/// Largest split-R̂ over coordinates; `+∞` when some coordinate has zero
/// within-chain variance.
pub fn max_split_rhat(traces: &[Trace], burn_in_frac: f64) -> Result<f64> {
    let d = traces.first().ok_or_else(|| invalid("no traces"))?.dim();
    let mut worst: f64 = 0.0;
    for j in 0..d {
        let r = match split_rhat_from(traces, j, burn_in_frac) {
            Ok(r) => r,
            Err(Error::Degenerate(_)) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        worst = worst.max(r);
    }
    Ok(worst)
}

pub fn acceptance_rate(trace: &Trace) -> f64 {
    trace.acceptance_rate()
}

/// Outcome label of a summary row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    /// Not converged (R̂ above threshold) or a stuck coordinate.
    NotAvailable,
}

impl RunStatus {
    pub fn label(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::NotAvailable => "n/a",
        }
    }

    pub fn classify(report: &EssReport, rhat_max: Option<f64>) -> Self {
        let rhat_bad = rhat_max.is_some_and(|r| !(r <= RHAT_THRESHOLD));
        if report.is_na() || rhat_bad {
            RunStatus::NotAvailable
        } else {
            RunStatus::Ok
        }
    }
}

/// One row of the summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub dataset_variant: String,
    pub sampler: String,
    pub precond_mode: String,
    pub min_ess: f64,
    pub median_ess: f64,
    pub accept_rate: f64,
    /// `None` for single-chain runs.
    pub rhat_max: Option<f64>,
    pub status: RunStatus,
}

pub const SUMMARY_HEADER: [&str; 8] = [
    "dataset_variant",
    "sampler",
    "precond_mode",
    "min_ess",
    "median_ess",
    "accept_rate",
    "rhat_max",
    "status",
];

fn num(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        fmt_f64(v)
    }
}

pub fn write_summary_csv<W: Write>(w: W, rows: &[SummaryRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SUMMARY_HEADER)?;
    for r in rows {
        out.write_record([
            r.dataset_variant.clone(),
            r.sampler.clone(),
            r.precond_mode.clone(),
            num(r.min_ess),
            num(r.median_ess),
            num(r.accept_rate),
            r.rhat_max.map_or_else(|| "NA".into(), num),
            r.status.label().into(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

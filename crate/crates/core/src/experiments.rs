//! Experiment drivers behind the CLI: the raw/standardized × dense/diag ×
//! MALA/Barker grid, the skew-normal acceptance study and the jump-process
//! bias study.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::adapt::{AcceptStatistic, AdaptConfig, CovarianceMode};
use crate::data::{standardize, Dataset};
use crate::diagnostics::{ess_summary_multi, max_split_rhat, RunStatus, SummaryRow};
use crate::error::{invalid, Result};
use crate::jump_process::{simulate_jump_process, BaseProposal, JumpPath};
use crate::par::{map_indexed, try_map_indexed, Execution};
use crate::precond::Preconditioner;
use crate::samplers::{log_accept_ratio, run_chain, ChainState, SamplerKind, Trace, Tuning};
use crate::special::{derive_seed, fmt_f64};
use crate::targets::{
    make_logistic_posterior, make_skew_normal, GaussianTarget, TargetDensity,
    DEFAULT_PRIOR_VARIANCE,
};

/// Raw or standardized covariates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatasetVariant {
    Raw,
    Standardized,
}

impl DatasetVariant {
    pub fn label(self) -> &'static str {
        match self {
            DatasetVariant::Raw => "raw",
            DatasetVariant::Standardized => "standardized",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridCell {
    pub variant: DatasetVariant,
    pub mode: CovarianceMode,
    pub sampler: SamplerKind,
}

impl GridCell {
    /// File-name stem, e.g. `raw_dense_mala`.
    pub fn stem(&self) -> String {
        format!(
            "{}_{}_{}",
            self.variant.label(),
            self.mode.label(),
            self.sampler.label()
        )
    }
}

/// The eight cells in output order.
pub fn grid_cells() -> Vec<GridCell> {
    let mut cells = Vec::with_capacity(8);
    for variant in [DatasetVariant::Raw, DatasetVariant::Standardized] {
        for mode in [CovarianceMode::Dense, CovarianceMode::Diagonal] {
            for sampler in [SamplerKind::Mala, SamplerKind::Barker] {
                cells.push(GridCell {
                    variant,
                    mode,
                    sampler,
                });
            }
        }
    }
    cells
}

#[derive(Debug, Clone)]
pub struct GridSpec {
    pub n_iters: usize,
    pub n_chains: usize,
    pub burn_in_frac: f64,
    pub seed: u64,
    /// Overrides each sampler's default acceptance target.
    pub target_accept: Option<f64>,
    pub include_intercept: bool,
    pub prior_variance: f64,
    pub history_every: usize,
    pub learning_exponent: f64,
    pub covariance_offset: f64,
    pub statistic: AcceptStatistic,
    pub execution: Execution,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_iters: 30_000,
            n_chains: 4,
            burn_in_frac: 0.5,
            seed: 1,
            target_accept: None,
            include_intercept: true,
            prior_variance: DEFAULT_PRIOR_VARIANCE,
            history_every: 10,
            learning_exponent: 0.6,
            covariance_offset: 100.0,
            statistic: AcceptStatistic::Probability,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: GridCell,
    /// Empty when a chain aborted with an error.
    pub traces: Vec<Trace>,
    pub row: SummaryRow,
    /// First chain error, if any.
    pub error: Option<String>,
}

fn failed_row(cell: &GridCell) -> SummaryRow {
    SummaryRow {
        dataset_variant: cell.variant.label().into(),
        sampler: cell.sampler.label().into(),
        precond_mode: cell.mode.label().into(),
        min_ess: f64::NAN,
        median_ess: f64::NAN,
        accept_rate: f64::NAN,
        rhat_max: None,
        status: RunStatus::NotAvailable,
    }
}

/// Summarizes the chains of one cell.
pub fn summarize_cell(cell: &GridCell, traces: &[Trace], burn_in_frac: f64) -> Result<SummaryRow> {
    let report = ess_summary_multi(traces, burn_in_frac)?;
    let rhat = if traces.len() >= 2 {
        Some(max_split_rhat(traces, burn_in_frac)?)
    } else {
        None
    };
    let accept = traces.iter().map(Trace::acceptance_rate).sum::<f64>() / traces.len() as f64;
    Ok(SummaryRow {
        dataset_variant: cell.variant.label().into(),
        sampler: cell.sampler.label().into(),
        precond_mode: cell.mode.label().into(),
        min_ess: report.min_ess,
        median_ess: report.median_ess,
        accept_rate: accept,
        rhat_max: rhat,
        status: RunStatus::classify(&report, rhat),
    })
}

/// Seed of chain `chain` in cell `cell`.
pub fn chain_seed(base: u64, cell: usize, chain: usize) -> u64 {
    derive_seed(derive_seed(base, cell as u64), chain as u64)
}

/// Runs all eight cells on `ds`. Chains start at zero; a chain that
/// errors marks its cell `n/a` instead of aborting the grid.
pub fn run_grid(ds: &Dataset, spec: &GridSpec) -> Result<Vec<CellResult>> {
    if spec.n_chains == 0 {
        return Err(invalid("n_chains must be at least 1"));
    }
    let raw = ds.clone();
    let standardized = standardize(ds)?;
    let design = |d: &Dataset| {
        if spec.include_intercept {
            d.design_with_intercept()
        } else {
            d.features.clone()
        }
    };
    let targets = [
        make_logistic_posterior(design(&raw), &raw.labels, spec.prior_variance)?,
        make_logistic_posterior(
            design(&standardized),
            &standardized.labels,
            spec.prior_variance,
        )?,
    ];
    let dim = targets[0].dim();
    let x0 = DVector::zeros(dim);
    let cells = grid_cells();
    let n_chains = spec.n_chains;

    let runs: Vec<Result<Trace>> = map_indexed(spec.execution, cells.len() * n_chains, |k| {
        let (c, chain) = (k / n_chains, k % n_chains);
        let cell = &cells[c];
        let target = &targets[match cell.variant {
            DatasetVariant::Raw => 0,
            DatasetVariant::Standardized => 1,
        }];
        let mut cfg = AdaptConfig::new(
            cell.mode,
            spec.target_accept
                .unwrap_or_else(|| cell.sampler.default_target_accept()),
        );
        cfg.history_every = spec.history_every;
        cfg.learning_exponent = spec.learning_exponent;
        cfg.covariance_offset = spec.covariance_offset;
        cfg.statistic = spec.statistic;
        run_chain(
            target,
            cell.sampler,
            spec.n_iters,
            &x0,
            &Tuning::Adaptive(cfg),
            chain_seed(spec.seed, c, chain),
        )
    });

    let mut runs = runs.into_iter();
    let mut out = Vec::with_capacity(cells.len());
    for cell in cells {
        let chunk: Vec<Result<Trace>> = runs.by_ref().take(n_chains).collect();
        let error = chunk
            .iter()
            .find_map(|r| r.as_ref().err().map(ToString::to_string));
        let result = match error {
            Some(e) => CellResult {
                cell,
                traces: Vec::new(),
                row: failed_row(&cell),
                error: Some(e),
            },
            None => {
                let traces: Vec<Trace> = chunk.into_iter().map(|r| r.expect("checked")).collect();
                let row = summarize_cell(&cell, &traces, spec.burn_in_frac)?;
                CellResult {
                    cell,
                    traces,
                    row,
                    error: None,
                }
            }
        };
        out.push(result);
    }
    Ok(out)
}

/// One row of the skew-normal study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewRow {
    pub eta: f64,
    pub log_alpha_mala: f64,
    pub log_alpha_barker: f64,
}

impl SkewRow {
    pub fn alpha_mala(&self) -> f64 {
        self.log_alpha_mala.exp()
    }

    pub fn alpha_barker(&self) -> f64 {
        self.log_alpha_barker.exp()
    }
}

/// Acceptance probability of the fixed move `x → y` on the skew-normal
/// target for MALA and Barker with step `h`, per `η`. Rows sorted by `η`.
pub fn skew_study(etas: &[f64], x: f64, y: f64, h: f64) -> Result<Vec<SkewRow>> {
    let precond = Preconditioner::identity(1, h)?;
    let mut etas = etas.to_vec();
    if etas.iter().any(|e| !e.is_finite()) {
        return Err(invalid("eta values must be finite"));
    }
    etas.sort_by(f64::total_cmp);
    etas.into_iter()
        .map(|eta| {
            let target = make_skew_normal(eta)?;
            let sx = ChainState::new(&target, DVector::from_element(1, x))?;
            let sy = ChainState::new(&target, DVector::from_element(1, y))?;
            let la = |k| log_accept_ratio(k, &sx, &sy, &precond).min(0.0);
            Ok(SkewRow {
                eta,
                log_alpha_mala: la(SamplerKind::Mala),
                log_alpha_barker: la(SamplerKind::Barker),
            })
        })
        .collect()
}

pub fn write_skew_csv<W: std::io::Write>(w: W, rows: &[SkewRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["eta", "alpha_mala", "alpha_barker"])?;
    for r in rows {
        out.write_record([
            fmt_f64(r.eta),
            fmt_f64(r.alpha_mala()),
            fmt_f64(r.alpha_barker()),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct BiasSpec {
    pub proposal_stds: Vec<f64>,
    pub duration: f64,
    /// Independent paths per proposal std, each started from N(0, 1).
    pub replicates: usize,
    pub seed: u64,
    pub execution: Execution,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasRow {
    pub proposal_std: f64,
    /// Time-averaged `E[X²]` pooled over replicates.
    pub empirical_second_moment: f64,
    /// `|E[X²] − 1|`.
    pub abs_bias: f64,
    /// Standard error of the pooled second moment across replicates.
    pub std_error: f64,
    pub n_events: usize,
}

/// Path of replicate `r` for the `s`-th proposal std of `spec`.
pub fn bias_replicate_path(spec: &BiasSpec, s: usize, r: usize) -> Result<JumpPath> {
    let std = *spec
        .proposal_stds
        .get(s)
        .ok_or_else(|| invalid(format!("no proposal std with index {s}")))?;
    let target = GaussianTarget::standard(1)?;
    let base = BaseProposal::gaussian(std)?;
    let seed = derive_seed(derive_seed(spec.seed, s as u64), r as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2));
    let x0: f64 = StandardNormal.sample(&mut rng);
    simulate_jump_process(&target, &base, spec.duration, x0, seed)
}

/// Unadjusted Barker dynamics on N(0, 1): invariant second-moment bias per
/// proposal std.
pub fn jump_bias(spec: &BiasSpec) -> Result<Vec<BiasRow>> {
    if spec.replicates < 2 {
        return Err(invalid("jump bias needs at least two replicates"));
    }
    spec.proposal_stds
        .iter()
        .enumerate()
        .map(|(s, &std)| {
            let runs = try_map_indexed(spec.execution, spec.replicates, |r| {
                let path = bias_replicate_path(spec, s, r)?;
                Ok::<_, crate::error::Error>((path.time_average(|x| x * x), path.n_events()))
            })?;
            let r = runs.len() as f64;
            let mean = runs.iter().map(|p| p.0).sum::<f64>() / r;
            let var = runs.iter().map(|p| (p.0 - mean).powi(2)).sum::<f64>() / (r - 1.0);
            Ok(BiasRow {
                proposal_std: std,
                empirical_second_moment: mean,
                abs_bias: (mean - 1.0).abs(),
                std_error: (var / r).sqrt(),
                n_events: runs.iter().map(|p| p.1).sum(),
            })
        })
        .collect()
}

pub fn write_bias_csv<W: std::io::Write>(w: W, rows: &[BiasRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["proposal_std", "empirical_second_moment", "abs_bias"])?;
    for r in rows {
        out.write_record([
            fmt_f64(r.proposal_std),
            fmt_f64(r.empirical_second_moment),
            fmt_f64(r.abs_bias),
        ])?;
    }
    out.flush()?;
    Ok(())
}

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use barker::config::{ExperimentConfig, TargetKind};
use barker::data::{
    load_csv, select_covariates, standardize, synthesize_imbalanced, CsvOptions, Dataset,
    LabelColumn, SelectionRule, SyntheticSpec,
};
use barker::diagnostics::{
    ess_summary_multi, max_split_rhat, write_summary_csv, RunStatus, SummaryRow,
};
use barker::experiments::{
    bias_replicate_path, chain_seed, jump_bias, run_grid, skew_study, write_bias_csv,
    write_skew_csv, BiasSpec, GridSpec,
};
use barker::par::{map_indexed, Execution};
use barker::precond::Preconditioner;
use barker::samplers::{run_chain, Trace, Tuning};
use barker::targets::{make_logistic_posterior, make_skew_normal, GaussianTarget, TargetDensity};
use barker::{Error, Result};
use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

#[derive(Parser)]
#[command(name = "barker", version, about = "Barker-proposal MCMC experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one target with one sampler.
    Run(Opts),
    /// Raw/standardized × dense/diag × MALA/Barker comparison on one dataset.
    Grid(Opts),
    /// MALA and Barker acceptance on a skew-normal as the skew grows.
    Skewstudy(Opts),
    /// Invariant-measure bias of the unadjusted jump process.
    Jumpbias(Opts),
    /// Fast internal consistency checks.
    Selftest,
}

#[derive(Args, Default)]
struct Opts {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    synthetic: bool,
    #[arg(long)]
    standardize: bool,
    #[arg(long, value_name = "dense|diag")]
    precond: Option<String>,
    #[arg(long, value_name = "rwm|mala|barker|barker-global")]
    sampler: Option<String>,
    #[arg(long)]
    iters: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "target-accept")]
    target_accept: Option<String>,
    #[arg(long = "burn-in-frac")]
    burn_in_frac: Option<String>,
    #[arg(long)]
    chains: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    eta: Option<String>,
}

impl Opts {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(p) = &self.config {
            cfg.apply_file(p)?;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            cfg.set(k, v)?;
        }
        let flags = [
            ("target", self.target.clone()),
            ("precond", self.precond.clone()),
            ("sampler", self.sampler.clone()),
            ("iters", self.iters.clone()),
            ("seed", self.seed.clone()),
            ("target_accept", self.target_accept.clone()),
            ("burn_in_frac", self.burn_in_frac.clone()),
            ("chains", self.chains.clone()),
            ("dim", self.dim.clone()),
            ("eta", self.eta.clone()),
            (
                "dataset",
                self.dataset.as_ref().map(|p| p.display().to_string()),
            ),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, &v)?;
            }
        }
        if self.synthetic {
            cfg.synthetic = true;
        }
        if self.standardize {
            cfg.standardize = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn prepare_out(cfg: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join("config.txt"), cfg.snapshot())?;
    Ok(())
}

/// Raw dataset after covariate selection, or the synthetic one.
fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    if cfg.synthetic {
        return synthesize_imbalanced(&SyntheticSpec {
            n: cfg.synthetic_n,
            d_imbalanced: cfg.synthetic_imbalanced,
            d_regular: cfg.synthetic_regular,
            rare_count: cfg.synthetic_rare_count,
            true_beta_scale: cfg.synthetic_beta_scale,
            seed: cfg.seed,
        });
    }
    let path = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| Error::Config("a dataset path or synthetic = true is required".into()))?;
    let label = match cfg.label_column.parse::<isize>() {
        Ok(i) => LabelColumn::Index(i),
        Err(_) => LabelColumn::Name(cfg.label_column.clone()),
    };
    let opts = CsvOptions {
        label,
        has_header: cfg.has_header,
        missing_markers: cfg.missing_markers.iter().cloned().collect(),
        positive_classes: cfg.positive_class.clone(),
    };
    let ds = load_csv(path, &opts)?;
    if ds.dropped_rows > 0 {
        eprintln!("dropped {} rows with missing values", ds.dropped_rows);
    }
    if !cfg.select_covariates {
        return Ok(ds);
    }
    select_covariates(
        &ds,
        &SelectionRule {
            n_imbalanced: cfg.n_imbalanced,
            n_regular: cfg.n_regular,
            rarity_threshold: cfg.rarity_threshold,
            max_categorical_levels: cfg.max_categorical_levels,
        },
    )
}

fn write_dataset(ds: &Dataset, out: &Path, stem: &str) -> Result<()> {
    ds.write_csv(create(&out.join(format!("{stem}.csv")))?)?;
    if ds.standardization.is_some() {
        ds.write_standardization_json(create(&out.join(format!("{stem}.json")))?)?;
    }
    Ok(())
}

fn write_traces(traces: &[Trace], out: &Path, stem: &str) -> Result<()> {
    for (k, t) in traces.iter().enumerate() {
        t.write_csv(create(&out.join(format!("{stem}chain{k}.csv")))?)?;
        if t.adapt_history.is_some() {
            t.write_adapt_csv(create(&out.join(format!("{stem}chain{k}_adapt.csv")))?)?;
        }
    }
    Ok(())
}

fn summarize(traces: &[Trace], variant: &str, cfg: &ExperimentConfig) -> Result<SummaryRow> {
    let report = ess_summary_multi(traces, cfg.burn_in_frac)?;
    let rhat_max = if traces.len() >= 2 {
        Some(max_split_rhat(traces, cfg.burn_in_frac)?)
    } else {
        None
    };
    let accept_rate = traces.iter().map(Trace::acceptance_rate).sum::<f64>() / traces.len() as f64;
    Ok(SummaryRow {
        dataset_variant: variant.into(),
        sampler: cfg.sampler.label().into(),
        precond_mode: cfg.precond.label().into(),
        min_ess: report.min_ess,
        median_ess: report.median_ess,
        accept_rate,
        rhat_max,
        status: RunStatus::classify(&report, rhat_max),
    })
}

fn print_row(r: &SummaryRow) {
    let rhat = r
        .rhat_max
        .map_or_else(|| "NA".to_string(), |v| format!("{v:.3}"));
    println!(
        "{:<13} {:<6} {:<5} min_ess {:>9.1}  median_ess {:>9.1}  accept {:.3}  rhat {:>6}  {}",
        r.dataset_variant,
        r.sampler,
        r.precond_mode,
        r.min_ess,
        r.median_ess,
        r.accept_rate,
        rhat,
        r.status.label()
    );
}

fn cmd_run(cfg: &ExperimentConfig) -> Result<()> {
    prepare_out(cfg)?;
    let (target, variant): (Box<dyn TargetDensity>, String) = match cfg.target {
        TargetKind::Gaussian => (
            Box::new(GaussianTarget::standard(cfg.dim)?),
            "gaussian".into(),
        ),
        TargetKind::SkewNormal => (Box::new(make_skew_normal(cfg.eta)?), "skewnormal".into()),
        TargetKind::Logistic => {
            let raw = load_dataset(cfg)?;
            let (ds, variant) = if cfg.standardize {
                (standardize(&raw)?, "standardized")
            } else {
                (raw, "raw")
            };
            write_dataset(&ds, &cfg.out, "dataset")?;
            let design = if cfg.intercept {
                ds.design_with_intercept()
            } else {
                ds.features.clone()
            };
            (
                Box::new(make_logistic_posterior(
                    design,
                    &ds.labels,
                    cfg.prior_variance,
                )?),
                variant.into(),
            )
        }
    };
    let d = target.dim();
    let tuning = if cfg.adapt {
        Tuning::Adaptive(cfg.adapt_config(cfg.sampler))
    } else {
        Tuning::Fixed(Preconditioner::identity(d, cfg.fixed_scale)?)
    };
    let x0 = DVector::zeros(d);
    let runs = map_indexed(Execution::default(), cfg.chains, |k| {
        run_chain(
            &*target,
            cfg.sampler,
            cfg.iters,
            &x0,
            &tuning,
            chain_seed(cfg.seed, 0, k),
        )
    });
    let mut traces = Vec::with_capacity(runs.len());
    for r in runs {
        match r {
            Ok(t) => traces.push(t),
            Err(e) => {
                write_traces(&traces, &cfg.out, "trace_")?;
                fs::write(cfg.out.join("FAILED"), format!("{e}\n"))?;
                return Err(e);
            }
        }
    }
    write_traces(&traces, &cfg.out, "trace_")?;
    let row = summarize(&traces, &variant, cfg)?;
    write_summary_csv(
        create(&cfg.out.join("summary.csv"))?,
        std::slice::from_ref(&row),
    )?;
    print_row(&row);
    Ok(())
}

fn cmd_grid(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.dataset.is_none() && !cfg.synthetic {
        return Err(Error::Config(
            "grid needs a dataset path or synthetic = true".into(),
        ));
    }
    prepare_out(cfg)?;
    let ds = load_dataset(cfg)?;
    write_dataset(&ds, &cfg.out, "dataset_raw")?;
    write_dataset(&standardize(&ds)?, &cfg.out, "dataset_standardized")?;
    let spec = GridSpec {
        n_iters: cfg.iters,
        n_chains: cfg.chains,
        burn_in_frac: cfg.burn_in_frac,
        seed: cfg.seed,
        target_accept: cfg.target_accept,
        include_intercept: cfg.intercept,
        prior_variance: cfg.prior_variance,
        history_every: cfg.history_every,
        learning_exponent: cfg.learning_exponent,
        covariance_offset: cfg.covariance_offset,
        statistic: cfg.accept_statistic,
        execution: Execution::default(),
    };
    let cells = run_grid(&ds, &spec)?;
    let mut rows = Vec::with_capacity(cells.len());
    for c in &cells {
        let stem = c.cell.stem();
        if let Some(e) = &c.error {
            eprintln!("{stem}: chain error: {e}");
            fs::write(cfg.out.join(format!("{stem}.error")), format!("{e}\n"))?;
        }
        if cfg.write_traces {
            write_traces(&c.traces, &cfg.out, &format!("{stem}_"))?;
        }
        print_row(&c.row);
        rows.push(c.row.clone());
    }
    write_summary_csv(create(&cfg.out.join("summary.csv"))?, &rows)?;
    Ok(())
}

fn cmd_skew(cfg: &ExperimentConfig) -> Result<()> {
    prepare_out(cfg)?;
    let rows = skew_study(&cfg.etas, cfg.skew_x, cfg.skew_y, cfg.skew_step)?;
    write_skew_csv(create(&cfg.out.join("skewstudy.csv"))?, &rows)?;
    for r in &rows {
        println!(
            "eta {:>10}  alpha_mala {:.6e}  alpha_barker {:.6e}",
            r.eta,
            r.alpha_mala(),
            r.alpha_barker()
        );
    }
    Ok(())
}

fn cmd_bias(cfg: &ExperimentConfig) -> Result<()> {
    prepare_out(cfg)?;
    let spec = BiasSpec {
        proposal_stds: cfg.proposal_stds.clone(),
        duration: cfg.duration,
        replicates: cfg.replicates,
        seed: cfg.seed,
        execution: Execution::default(),
    };
    let rows = jump_bias(&spec)?;
    write_bias_csv(create(&cfg.out.join("jumpbias.csv"))?, &rows)?;
    for (s, r) in rows.iter().enumerate() {
        bias_replicate_path(&spec, s, 0)?
            .write_csv(create(&cfg.out.join(format!("jumppath_std{s}.csv")))?)?;
        println!(
            "std {:<6} E[X^2] {:.5} ± {:.5}  bias {:.5}  events {}",
            r.proposal_std, r.empirical_second_moment, r.std_error, r.abs_bias, r.n_events
        );
    }
    Ok(())
}

fn cmd_selftest() -> Result<bool> {
    let checks = barker::selftest::run_all()?;
    let mut ok = true;
    for c in &checks {
        println!(
            "{} {:<30} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        ok &= c.passed;
    }
    Ok(ok)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::DatasetNotFound(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Selftest => match cmd_selftest() {
            Ok(true) => return ExitCode::SUCCESS,
            Ok(false) => return ExitCode::from(1),
            Err(e) => Err(e),
        },
        Command::Run(o) => o.resolve().and_then(|c| cmd_run(&c)),
        Command::Grid(o) => o.resolve().and_then(|c| cmd_grid(&c)),
        Command::Skewstudy(o) => o.resolve().and_then(|c| cmd_skew(&c)),
        Command::Jumpbias(o) => o.resolve().and_then(|c| cmd_bias(&c)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

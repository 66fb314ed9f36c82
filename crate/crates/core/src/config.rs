//! Flat `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors. The
//! snapshot written beside every output lists every key in a fixed order,
//! so it can be fed back with `--config` to reproduce a run.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::adapt::{AcceptStatistic, AdaptConfig, CovarianceMode};
use crate::error::{Error, Result};
use crate::samplers::SamplerKind;
use crate::targets::DEFAULT_PRIOR_VARIANCE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Gaussian,
    SkewNormal,
    Logistic,
}

impl TargetKind {
    pub fn label(self) -> &'static str {
        match self {
            TargetKind::Gaussian => "gaussian",
            TargetKind::SkewNormal => "skewnormal",
            TargetKind::Logistic => "logistic",
        }
    }
}

impl std::str::FromStr for TargetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(TargetKind::Gaussian),
            "skewnormal" | "skew-normal" => Ok(TargetKind::SkewNormal),
            "logistic" => Ok(TargetKind::Logistic),
            _ => Err(Error::Config(format!(
                "unknown target '{s}' (expected gaussian, skewnormal or logistic)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub target: TargetKind,
    /// Dimension of the Gaussian target.
    pub dim: usize,
    pub eta: f64,

    pub dataset: Option<PathBuf>,
    pub synthetic: bool,
    pub synthetic_n: usize,
    pub synthetic_imbalanced: usize,
    pub synthetic_regular: usize,
    pub synthetic_rare_count: usize,
    pub synthetic_beta_scale: f64,
    pub label_column: String,
    pub positive_class: Vec<String>,
    pub has_header: bool,
    pub missing_markers: Vec<String>,
    pub select_covariates: bool,
    pub n_imbalanced: usize,
    pub n_regular: usize,
    pub rarity_threshold: usize,
    pub max_categorical_levels: usize,
    pub standardize: bool,
    pub intercept: bool,
    pub prior_variance: f64,

    pub sampler: SamplerKind,
    pub precond: CovarianceMode,
    pub adapt: bool,
    pub fixed_scale: f64,
    pub iters: usize,
    pub seed: u64,
    pub target_accept: Option<f64>,
    pub learning_exponent: f64,
    pub covariance_offset: f64,
    pub accept_statistic: AcceptStatistic,
    pub history_every: usize,
    pub burn_in_frac: f64,
    pub chains: usize,
    pub write_traces: bool,

    pub etas: Vec<f64>,
    pub skew_x: f64,
    pub skew_y: f64,
    pub skew_step: f64,

    pub proposal_stds: Vec<f64>,
    pub duration: f64,
    pub replicates: usize,

    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            target: TargetKind::Gaussian,
            dim: 10,
            eta: 0.0,
            dataset: None,
            synthetic: false,
            synthetic_n: 452,
            synthetic_imbalanced: 25,
            synthetic_regular: 25,
            synthetic_rare_count: 2,
            synthetic_beta_scale: 1.0,
            label_column: "-1".into(),
            positive_class: Vec::new(),
            has_header: true,
            missing_markers: vec!["?".into(), String::new()],
            select_covariates: true,
            n_imbalanced: 25,
            n_regular: 25,
            rarity_threshold: 2,
            max_categorical_levels: 10,
            standardize: false,
            intercept: true,
            prior_variance: DEFAULT_PRIOR_VARIANCE,
            sampler: SamplerKind::Barker,
            precond: CovarianceMode::Dense,
            adapt: true,
            fixed_scale: 1.0,
            iters: 30_000,
            seed: 1,
            target_accept: None,
            learning_exponent: 0.6,
            covariance_offset: 100.0,
            accept_statistic: AcceptStatistic::Probability,
            history_every: 1,
            burn_in_frac: 0.5,
            chains: 4,
            write_traces: true,
            etas: vec![0.0, 1.0, 10.0, 100.0, 1000.0],
            skew_x: 1.5,
            skew_y: 0.0,
            skew_step: 1.0,
            proposal_stds: vec![0.4, 0.2, 0.1],
            duration: 10_000.0,
            replicates: 16_384,
            out: PathBuf::from("out"),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("invalid value '{v}' for '{key}'")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean '{v}' for '{key}'"))),
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| parse(key, s.trim())).collect()
}

fn parse_strings(v: &str) -> Vec<String> {
    if v.is_empty() {
        return Vec::new();
    }
    v.split(',').map(|s| s.trim().to_string()).collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

impl ExperimentConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "target" => self.target = v.parse()?,
            "dim" => self.dim = parse(key, v)?,
            "eta" => self.eta = parse(key, v)?,
            "dataset" => self.dataset = (!v.is_empty()).then(|| PathBuf::from(v)),
            "synthetic" => self.synthetic = parse_bool(key, v)?,
            "synthetic_n" => self.synthetic_n = parse(key, v)?,
            "synthetic_imbalanced" => self.synthetic_imbalanced = parse(key, v)?,
            "synthetic_regular" => self.synthetic_regular = parse(key, v)?,
            "synthetic_rare_count" => self.synthetic_rare_count = parse(key, v)?,
            "synthetic_beta_scale" => self.synthetic_beta_scale = parse(key, v)?,
            "label_column" => self.label_column = v.to_string(),
            "positive_class" => self.positive_class = parse_strings(v),
            "has_header" => self.has_header = parse_bool(key, v)?,
            // quoted so the empty marker survives the round trip
            "missing_markers" => {
                self.missing_markers = parse_strings(v)
                    .into_iter()
                    .map(|s| s.trim_matches('"').to_string())
                    .collect()
            }
            "select_covariates" => self.select_covariates = parse_bool(key, v)?,
            "n_imbalanced" => self.n_imbalanced = parse(key, v)?,
            "n_regular" => self.n_regular = parse(key, v)?,
            "rarity_threshold" => self.rarity_threshold = parse(key, v)?,
            "max_categorical_levels" => self.max_categorical_levels = parse(key, v)?,
            "standardize" => self.standardize = parse_bool(key, v)?,
            "intercept" => self.intercept = parse_bool(key, v)?,
            "prior_variance" => self.prior_variance = parse(key, v)?,
            "sampler" => self.sampler = v.parse()?,
            "precond" => self.precond = v.parse()?,
            "adapt" => self.adapt = parse_bool(key, v)?,
            "fixed_scale" => self.fixed_scale = parse(key, v)?,
            "iters" => self.iters = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "target_accept" => {
                self.target_accept = match v {
                    "" | "default" => None,
                    _ => Some(parse(key, v)?),
                }
            }
            "learning_exponent" => self.learning_exponent = parse(key, v)?,
            "covariance_offset" => self.covariance_offset = parse(key, v)?,
            "accept_statistic" => {
                self.accept_statistic = match v {
                    "alpha" | "probability" => AcceptStatistic::Probability,
                    "indicator" => AcceptStatistic::Indicator,
                    _ => return Err(Error::Config(format!("invalid accept_statistic '{v}'"))),
                }
            }
            "history_every" => self.history_every = parse(key, v)?,
            "burn_in_frac" => self.burn_in_frac = parse(key, v)?,
            "chains" => self.chains = parse(key, v)?,
            "write_traces" => self.write_traces = parse_bool(key, v)?,
            "etas" => self.etas = parse_list(key, v)?,
            "skew_x" => self.skew_x = parse(key, v)?,
            "skew_y" => self.skew_y = parse(key, v)?,
            "skew_step" => self.skew_step = parse(key, v)?,
            "proposal_stds" => self.proposal_stds = parse_list(key, v)?,
            "duration" => self.duration = parse(key, v)?,
            "replicates" => self.replicates = parse(key, v)?,
            "out" => self.out = PathBuf::from(v),
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Applies every setting in `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", no + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", no + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    /// Range checks that do not need any data.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.iters == 0 {
            return bad("iters must be at least 1");
        }
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if !(0.0..1.0).contains(&self.burn_in_frac) {
            return bad("burn_in_frac must lie in [0, 1)");
        }
        if let Some(a) = self.target_accept {
            if !(a > 0.0 && a < 1.0) {
                return bad("target_accept must lie in (0, 1)");
            }
        }
        if !(self.learning_exponent > 0.0 && self.learning_exponent <= 1.0) {
            return bad("learning_exponent must lie in (0, 1]");
        }
        if !(self.covariance_offset >= 0.0) {
            return bad("covariance_offset must be ≥ 0");
        }
        if !(self.prior_variance > 0.0 && self.prior_variance.is_finite()) {
            return bad("prior_variance must be positive");
        }
        if !(self.fixed_scale > 0.0 && self.fixed_scale.is_finite()) {
            return bad("fixed_scale must be positive");
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad("eta must be ≥ 0");
        }
        if self.chains == 0 {
            return bad("chains must be at least 1");
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad("duration must be positive");
        }
        if self.replicates < 2 {
            return bad("replicates must be at least 2");
        }
        if self
            .proposal_stds
            .iter()
            .any(|s| !(*s > 0.0 && s.is_finite()))
        {
            return bad("proposal_stds must be positive");
        }
        if self.etas.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return bad("etas must be ≥ 0");
        }
        if !(self.skew_step > 0.0 && self.skew_step.is_finite()) {
            return bad("skew_step must be positive");
        }
        if self.target == TargetKind::Logistic && self.dataset.is_none() && !self.synthetic {
            return bad("logistic target needs a dataset path or synthetic = true");
        }
        Ok(())
    }

    /// Adaptation settings for `sampler`.
    pub fn adapt_config(&self, sampler: SamplerKind) -> AdaptConfig {
        let mut cfg = AdaptConfig::new(
            self.precond,
            self.target_accept
                .unwrap_or_else(|| sampler.default_target_accept()),
        );
        cfg.learning_exponent = self.learning_exponent;
        cfg.covariance_offset = self.covariance_offset;
        cfg.statistic = self.accept_statistic;
        cfg.history_every = self.history_every;
        cfg
    }

    /// Every key, one per line, in a fixed order.
    pub fn snapshot(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("target", self.target.label().into());
        kv("dim", self.dim.to_string());
        kv("eta", self.eta.to_string());
        kv(
            "dataset",
            self.dataset
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        );
        kv("synthetic", self.synthetic.to_string());
        kv("synthetic_n", self.synthetic_n.to_string());
        kv(
            "synthetic_imbalanced",
            self.synthetic_imbalanced.to_string(),
        );
        kv("synthetic_regular", self.synthetic_regular.to_string());
        kv(
            "synthetic_rare_count",
            self.synthetic_rare_count.to_string(),
        );
        kv(
            "synthetic_beta_scale",
            self.synthetic_beta_scale.to_string(),
        );
        kv("label_column", self.label_column.clone());
        kv("positive_class", self.positive_class.join(","));
        kv("has_header", self.has_header.to_string());
        kv(
            "missing_markers",
            self.missing_markers
                .iter()
                .map(|m| format!("\"{m}\""))
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("select_covariates", self.select_covariates.to_string());
        kv("n_imbalanced", self.n_imbalanced.to_string());
        kv("n_regular", self.n_regular.to_string());
        kv("rarity_threshold", self.rarity_threshold.to_string());
        kv(
            "max_categorical_levels",
            self.max_categorical_levels.to_string(),
        );
        kv("standardize", self.standardize.to_string());
        kv("intercept", self.intercept.to_string());
        kv("prior_variance", self.prior_variance.to_string());
        kv("sampler", self.sampler.label().into());
        kv("precond", self.precond.label().into());
        kv("adapt", self.adapt.to_string());
        kv("fixed_scale", self.fixed_scale.to_string());
        kv("iters", self.iters.to_string());
        kv("seed", self.seed.to_string());
        kv(
            "target_accept",
            self.target_accept
                .map_or_else(|| "default".into(), |a| a.to_string()),
        );
        kv("learning_exponent", self.learning_exponent.to_string());
        kv("covariance_offset", self.covariance_offset.to_string());
        kv(
            "accept_statistic",
            match self.accept_statistic {
                AcceptStatistic::Probability => "alpha",
                AcceptStatistic::Indicator => "indicator",
            }
            .into(),
        );
        kv("history_every", self.history_every.to_string());
        kv("burn_in_frac", self.burn_in_frac.to_string());
        kv("chains", self.chains.to_string());
        kv("write_traces", self.write_traces.to_string());
        kv("etas", join(&self.etas));
        kv("skew_x", self.skew_x.to_string());
        kv("skew_y", self.skew_y.to_string());
        kv("skew_step", self.skew_step.to_string());
        kv("proposal_stds", join(&self.proposal_stds));
        kv("duration", self.duration.to_string());
        kv("replicates", self.replicates.to_string());
        kv("out", self.out.display().to_string());
        s
    }
}

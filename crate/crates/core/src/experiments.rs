//! Multi-trial experiment drivers: the time-delay reduction sweep, Rössler
//! forecasting variants, and the linear vs nonlinear activation comparison.
//!
//! Every trial derives its own seed from `(master seed, sweep point, trial)`,
//! so rows do not depend on scheduling, thread count, or on which other trials
//! were run. Rows are merged in `(sweep point, trial)` order.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{self, RosslerParams};
use crate::error::{Error, Result};
use crate::numerics::RankTolerance;
use crate::realization::{markov_deviation, random_stable_realization, reduce, Realization};
use crate::reservoir::{
    from_linear_realization, harvest, random_reservoir, Activation, ReservoirNet, ReservoirSpec,
};
use crate::rng::{derive_seed, streams, substream};
use crate::series::{format_float, TimeSeries};
use crate::training::{self, fit_and_forecast, make_forecast_pairs, FitResult, TrainConfig};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_TRIALS: usize = 20;
/// Rank tolerance used by experiments unless configured otherwise.
pub const DEFAULT_EXPERIMENT_TOLERANCE: f64 = 1e-6;

fn default_trials() -> usize {
    DEFAULT_TRIALS
}
fn default_tolerance() -> RankTolerance {
    RankTolerance::new(DEFAULT_EXPERIMENT_TOLERANCE).expect("valid constant")
}
fn default_lambda() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentConfig {
    TimeDelaySweep(TimeDelaySweepConfig),
    RosslerForecast(RosslerForecastConfig),
    ActivationCompare(ActivationCompareConfig),
}

macro_rules! common_accessors {
    ($($variant:ident),*) => {
        impl ExperimentConfig {
            pub fn seed(&self) -> u64 {
                match self { $(Self::$variant(c) => c.seed,)* }
            }
            pub fn set_seed(&mut self, seed: u64) {
                match self { $(Self::$variant(c) => c.seed = seed,)* }
            }
            pub fn trials(&self) -> usize {
                match self { $(Self::$variant(c) => c.trials,)* }
            }
            pub fn rank_tolerance(&self) -> RankTolerance {
                match self { $(Self::$variant(c) => c.rank_tolerance,)* }
            }
            pub fn set_rank_tolerance(&mut self, tol: RankTolerance) {
                match self { $(Self::$variant(c) => c.rank_tolerance = tol,)* }
            }
            pub fn out_dir(&self) -> Option<&Path> {
                match self { $(Self::$variant(c) => c.out_dir.as_deref(),)* }
            }
        }
    };
}
common_accessors!(TimeDelaySweep, RosslerForecast, ActivationCompare);

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::TimeDelaySweep(_) => "time_delay_sweep",
            Self::RosslerForecast(_) => "rossler_forecast",
            Self::ActivationCompare(_) => "activation_compare",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials() == 0 {
            return Err(Error::invalid("trials", "must be >= 1"));
        }
        match self {
            Self::TimeDelaySweep(c) => c.validate(),
            Self::RosslerForecast(c) => c.validate(),
            Self::ActivationCompare(c) => c.validate(),
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("ridge_lambda", "must be finite and >= 0"))
    }
}

fn check_lengths(washout: usize, train_len: usize, forecast_len: usize) -> Result<()> {
    if washout >= train_len {
        return Err(Error::invalid("washout", "must be below train_len"));
    }
    if forecast_len == 0 {
        return Err(Error::invalid("forecast_len", "must be >= 1"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Time-delay sweep

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeDelaySweepConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_tolerance")]
    pub rank_tolerance: RankTolerance,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "TimeDelaySweepConfig::default_taus")]
    pub taus: Vec<usize>,
    /// `N0 = n0_factor * tau`.
    #[serde(default = "TimeDelaySweepConfig::default_n0_factor")]
    pub n0_factor: usize,
    #[serde(default = "TimeDelaySweepConfig::default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "TimeDelaySweepConfig::default_train_len")]
    pub train_len: usize,
    #[serde(default = "TimeDelaySweepConfig::default_washout")]
    pub washout: usize,
    #[serde(default = "TimeDelaySweepConfig::default_forecast_len")]
    pub forecast_len: usize,
    /// Leakage of the equivalent RCN; realizations are drawn with
    /// `||A||_2 <= 2 * leakage - 1`.
    #[serde(default = "TimeDelaySweepConfig::default_leakage")]
    pub leakage: f64,
    #[serde(default = "default_lambda")]
    pub ridge_lambda: f64,
    #[serde(default = "TimeDelaySweepConfig::default_retry_budget")]
    pub retry_budget: u32,
}

impl TimeDelaySweepConfig {
    fn default_taus() -> Vec<usize> {
        vec![1, 2, 5, 10, 15, 20]
    }
    fn default_n0_factor() -> usize {
        4
    }
    fn default_epsilon() -> f64 {
        1e-3
    }
    fn default_train_len() -> usize {
        1000
    }
    fn default_washout() -> usize {
        100
    }
    fn default_forecast_len() -> usize {
        2000
    }
    fn default_leakage() -> f64 {
        0.9
    }
    fn default_retry_budget() -> u32 {
        5
    }

    fn validate(&self) -> Result<()> {
        if self.taus.is_empty() || self.taus.contains(&0) {
            return Err(Error::invalid("taus", "need at least one delay, each >= 1"));
        }
        if self.n0_factor < 2 {
            return Err(Error::invalid("n0_factor", "must be >= 2 so that N0 > tau"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("epsilon", "must be positive"));
        }
        if !(self.leakage > 0.5 && self.leakage < 1.0) {
            return Err(Error::invalid("leakage", "must lie in (0.5, 1)"));
        }
        check_lambda(self.ridge_lambda)?;
        check_lengths(self.washout, self.train_len, self.forecast_len)
    }

    fn train_config(&self, tau: usize) -> TrainConfig {
        TrainConfig {
            washout: self.washout,
            ridge_lambda: self.ridge_lambda,
            horizon: tau,
            train_len: self.train_len,
            include_input_in_readout: false,
        }
    }
}

impl Default for TimeDelaySweepConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

/// One trial of the time-delay sweep. Metric fields are empty for failed trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayTrial {
    pub tau: usize,
    pub trial: u32,
    pub seed: u64,
    pub n0: usize,
    pub n_min: Option<usize>,
    /// Training MSE of the re-trained reduced realization.
    pub train_mse: Option<f64>,
    pub forecast_mse: Option<f64>,
    pub retries: u32,
    /// Training root-sum-square error of the original `N0`-dimensional fit.
    pub initial_rss_error: Option<f64>,
    /// Training root-sum-square error of the re-trained reduced realization.
    pub rss_error: Option<f64>,
    pub forecast_rss: Option<f64>,
    pub reduction_iterations: Option<usize>,
    /// Relative deviation of the first `2 N0` Markov parameters after reduction.
    pub markov_deviation: Option<f64>,
    pub failure: Option<String>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayPoint {
    pub tau: usize,
    pub n0: usize,
    pub trials_ok: usize,
    pub n_min_mean: Option<f64>,
    pub n_min_std: Option<f64>,
    pub train_mse_mean: Option<f64>,
    pub forecast_mse_mean: Option<f64>,
}

struct Fitted {
    realization: Realization,
    fit: FitResult,
    retries: u32,
}

/// Draws `N0`-dimensional realizations until a trained readout meets `epsilon`.
fn find_epsilon_realization(
    cfg: &TimeDelaySweepConfig,
    n0: usize,
    seed: u64,
    inputs: &TimeSeries,
    refs: &TimeSeries,
    train: &TrainConfig,
) -> Result<std::result::Result<Fitted, f64>> {
    let mut best = f64::INFINITY;
    for attempt in 0..=cfg.retry_budget {
        let stream = if attempt == 0 {
            streams::WEIGHT_A
        } else {
            streams::RETRY_BASE + u64::from(attempt)
        };
        let r = random_stable_realization(
            n0,
            1,
            1,
            2.0 * cfg.leakage - 1.0,
            &mut substream(seed, stream),
        )?;
        let traj = harvest(&r, inputs, cfg.washout, None)?;
        let fit = training::train_readout(&traj, inputs, refs, train)?;
        if fit.train_rss_error <= cfg.epsilon {
            return Ok(Ok(Fitted {
                realization: r,
                fit,
                retries: attempt,
            }));
        }
        best = best.min(fit.train_rss_error);
    }
    Ok(Err(best))
}

fn delay_trial(cfg: &TimeDelaySweepConfig, point: usize, tau: usize, trial: u32) -> DelayTrial {
    let started = Instant::now();
    let seed = derive_seed(cfg.seed, point as u32, trial);
    let n0 = cfg.n0_factor * tau;
    let mut row = DelayTrial {
        tau,
        trial,
        seed,
        n0,
        n_min: None,
        train_mse: None,
        forecast_mse: None,
        retries: 0,
        initial_rss_error: None,
        rss_error: None,
        forecast_rss: None,
        reduction_iterations: None,
        markov_deviation: None,
        failure: None,
        wall_time_s: 0.0,
    };
    if let Err(e) = fill_delay_trial(cfg, &mut row) {
        log::warn!("tau {tau} trial {trial}: {e}");
        row.failure = Some(e.to_string());
    }
    row.wall_time_s = started.elapsed().as_secs_f64();
    row
}

fn fill_delay_trial(cfg: &TimeDelaySweepConfig, row: &mut DelayTrial) -> Result<()> {
    let (tau, n0) = (row.tau, row.n0);
    let series = datagen::time_delay_series(tau, cfg.train_len + cfg.forecast_len + tau, row.seed)?;
    let train = cfg.train_config(tau);
    let pairs = make_forecast_pairs(&series, tau, cfg.train_len)?;
    let fitted =
        match find_epsilon_realization(cfg, n0, row.seed, &pairs.inputs, &pairs.refs, &train)? {
            Ok(f) => f,
            Err(best) => {
                row.retries = cfg.retry_budget;
                row.initial_rss_error = Some(best);
                return Err(Error::invalid(
                    "epsilon",
                    format!(
                        "not reached after {} retries (best {best:e})",
                        cfg.retry_budget
                    ),
                ));
            }
        };
    row.retries = fitted.retries;
    row.initial_rss_error = Some(fitted.fit.train_rss_error);

    let full = fitted
        .realization
        .with_output(fitted.fit.readout.state_part(n0))?;
    let (reduced, trace) = reduce(&full, cfg.rank_tolerance)?;
    row.markov_deviation = Some(markov_deviation(&full, &reduced, 2 * n0)?);
    row.reduction_iterations = Some(trace.iterations.len());

    let out = fit_and_forecast(&reduced, &series, &train, cfg.forecast_len)?;
    row.n_min = Some(reduced.dim);
    row.train_mse = Some(out.fit.train_mse);
    row.rss_error = Some(out.fit.train_rss_error);
    row.forecast_mse = Some(out.forecast_mse);
    row.forecast_rss = Some(out.forecast_rss);
    Ok(())
}

/// Sample mean and standard deviation (`n - 1` denominator, 0 for one value).
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, std))
}

fn mean(values: &[f64]) -> Option<f64> {
    mean_std(values).map(|(m, _)| m)
}

/// Per-delay aggregates, computed only from the CSV-visible row fields.
pub fn aggregate_delay(rows: &[DelayTrial]) -> Vec<DelayPoint> {
    let mut points: Vec<DelayPoint> = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let tau = rows[start].tau;
        let end = start + rows[start..].iter().take_while(|r| r.tau == tau).count();
        let group = &rows[start..end];
        let ok: Vec<&DelayTrial> = group.iter().filter(|r| r.n_min.is_some()).collect();
        let n_min: Vec<f64> = ok
            .iter()
            .filter_map(|r| r.n_min)
            .map(|n| n as f64)
            .collect();
        let train: Vec<f64> = ok.iter().filter_map(|r| r.train_mse).collect();
        let forecast: Vec<f64> = ok.iter().filter_map(|r| r.forecast_mse).collect();
        let stats = mean_std(&n_min);
        points.push(DelayPoint {
            tau,
            n0: group[0].n0,
            trials_ok: ok.len(),
            n_min_mean: stats.map(|s| s.0),
            n_min_std: stats.map(|s| s.1),
            train_mse_mean: mean(&train),
            forecast_mse_mean: mean(&forecast),
        });
        start = end;
    }
    points
}

pub fn run_time_delay_sweep(cfg: &TimeDelaySweepConfig) -> Result<ExperimentReport> {
    ExperimentConfig::TimeDelaySweep(cfg.clone()).validate()?;
    let started = Instant::now();
    let tasks: Vec<(usize, usize, u32)> = cfg
        .taus
        .iter()
        .enumerate()
        .flat_map(|(p, &tau)| (0..cfg.trials as u32).map(move |t| (p, tau, t)))
        .collect();
    let rows: Vec<DelayTrial> = tasks
        .par_iter()
        .map(|&(p, tau, t)| delay_trial(cfg, p, tau, t))
        .collect();
    let aggregates = aggregate_delay(&rows);
    for a in &aggregates {
        log::info!(
            "tau {}: N0 {} -> mean N_min {:?} ({} ok)",
            a.tau,
            a.n0,
            a.n_min_mean,
            a.trials_ok
        );
    }
    Ok(ExperimentReport::new(
        ExperimentConfig::TimeDelaySweep(cfg.clone()),
        ExperimentResults::TimeDelaySweep { rows, aggregates },
        started,
    ))
}

// ---------------------------------------------------------------------------
// Rössler forecasting

fn default_sparsity() -> f64 {
    0.632
}
fn default_target_norm() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RosslerForecastConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_tolerance")]
    pub rank_tolerance: RankTolerance,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub rossler: RosslerParams,
    /// Coordinate of the Rössler state used as input and target.
    #[serde(default)]
    pub component: usize,
    #[serde(default = "RosslerForecastConfig::default_n_nodes")]
    pub n_nodes: usize,
    #[serde(default = "default_sparsity")]
    pub sparsity: f64,
    #[serde(default = "default_target_norm")]
    pub target_norm: f64,
    #[serde(default = "default_lambda")]
    pub ridge_lambda: f64,
    #[serde(default = "RosslerForecastConfig::default_washout")]
    pub washout: usize,
    #[serde(default = "RosslerForecastConfig::default_train_len")]
    pub train_len: usize,
    /// Upper bound; fewer steps are scored when the series runs out.
    #[serde(default = "RosslerForecastConfig::default_forecast_len")]
    pub forecast_len: usize,
    #[serde(default = "RosslerForecastConfig::default_horizon")]
    pub horizon: usize,
    #[serde(default = "RosslerForecastConfig::default_tanh_leakage")]
    pub tanh_leakage: f64,
    #[serde(default = "RosslerForecastConfig::default_linear_leakage")]
    pub linear_leakage: f64,
    /// Leakage rates for the tanh sweep over `sweep_horizons`.
    #[serde(default = "RosslerForecastConfig::default_sweep_leakages")]
    pub sweep_leakages: Vec<f64>,
    /// Horizons for the leakage and activation sweeps; empty disables both.
    #[serde(default = "RosslerForecastConfig::default_sweep_horizons")]
    pub sweep_horizons: Vec<usize>,
}

impl RosslerForecastConfig {
    fn default_n_nodes() -> usize {
        500
    }
    fn default_washout() -> usize {
        500
    }
    fn default_train_len() -> usize {
        5000
    }
    fn default_forecast_len() -> usize {
        3000
    }
    fn default_horizon() -> usize {
        30
    }
    fn default_tanh_leakage() -> f64 {
        0.8
    }
    fn default_linear_leakage() -> f64 {
        0.05
    }
    fn default_sweep_leakages() -> Vec<f64> {
        vec![0.05, 0.2, 0.5, 0.8]
    }
    fn default_sweep_horizons() -> Vec<usize> {
        vec![10, 30]
    }

    fn validate(&self) -> Result<()> {
        self.rossler.validate()?;
        if self.component >= 3 {
            return Err(Error::invalid("component", "must be 0, 1 or 2"));
        }
        if self.n_nodes == 0 {
            return Err(Error::invalid("n_nodes", "must be >= 1"));
        }
        for &a in std::iter::once(&self.tanh_leakage)
            .chain(std::iter::once(&self.linear_leakage))
            .chain(&self.sweep_leakages)
        {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::invalid("leakage", format!("{a} is outside (0, 1]")));
            }
        }
        check_lambda(self.ridge_lambda)?;
        check_lengths(self.washout, self.train_len, self.forecast_len)?;
        for &h in std::iter::once(&self.horizon).chain(&self.sweep_horizons) {
            if h == 0 {
                return Err(Error::invalid("horizon", "must be >= 1"));
            }
            if self.train_len + h >= self.rossler.samples {
                return Err(Error::invalid(
                    "horizon",
                    format!(
                        "train_len + {h} leaves no forecast steps in {} samples",
                        self.rossler.samples
                    ),
                ));
            }
        }
        Ok(())
    }

    fn spec(&self, leakage: f64, activation: Activation) -> ReservoirSpec {
        ReservoirSpec {
            n: self.n_nodes,
            input_dim: 1,
            sparsity: self.sparsity,
            target_norm: self.target_norm,
            leakage,
            activation,
        }
    }

    fn train_config(&self, horizon: usize) -> TrainConfig {
        TrainConfig {
            washout: self.washout,
            ridge_lambda: self.ridge_lambda,
            horizon,
            train_len: self.train_len,
            include_input_in_readout: true,
        }
    }
}

impl Default for RosslerForecastConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RosslerVariant {
    Tanh,
    Linear,
    LinearReduced,
    LeakageSweep,
    ActivationSweep,
}

impl RosslerVariant {
    pub fn name(self) -> &'static str {
        match self {
            Self::Tanh => "tanh",
            Self::Linear => "linear",
            Self::LinearReduced => "linear_reduced",
            Self::LeakageSweep => "leakage_sweep",
            Self::ActivationSweep => "activation_sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct RosslerTask {
    variant: RosslerVariant,
    activation: Activation,
    leakage: f64,
    horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosslerRow {
    pub trial: u32,
    pub seed: u64,
    pub variant: RosslerVariant,
    pub activation: Activation,
    pub leakage: f64,
    pub horizon: usize,
    pub n_nodes: usize,
    /// Dimension after reduction (`linear_reduced` only).
    pub n_reduced: Option<usize>,
    pub train_mse: f64,
    pub forecast_mse: f64,
    pub forecast_rss: f64,
    pub forecast_steps: usize,
    pub markov_deviation: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosslerGroup {
    pub variant: RosslerVariant,
    pub activation: Activation,
    pub leakage: f64,
    pub horizon: usize,
    pub trials: usize,
    pub train_mse_mean: f64,
    pub train_mse_std: f64,
    pub forecast_mse_mean: f64,
    pub forecast_mse_std: f64,
    pub n_reduced_mean: Option<f64>,
}

fn rossler_tasks(cfg: &RosslerForecastConfig) -> Vec<RosslerTask> {
    let task = |variant, activation, leakage, horizon| RosslerTask {
        variant,
        activation,
        leakage,
        horizon,
    };
    let mut tasks = vec![
        task(
            RosslerVariant::Tanh,
            Activation::Tanh,
            cfg.tanh_leakage,
            cfg.horizon,
        ),
        task(
            RosslerVariant::Linear,
            Activation::Linear,
            cfg.linear_leakage,
            cfg.horizon,
        ),
        task(
            RosslerVariant::LinearReduced,
            Activation::Linear,
            cfg.linear_leakage,
            cfg.horizon,
        ),
    ];
    for &leakage in &cfg.sweep_leakages {
        for &h in &cfg.sweep_horizons {
            tasks.push(task(
                RosslerVariant::LeakageSweep,
                Activation::Tanh,
                leakage,
                h,
            ));
        }
    }
    for activation in Activation::ALL {
        for &h in &cfg.sweep_horizons {
            tasks.push(task(
                RosslerVariant::ActivationSweep,
                activation,
                cfg.tanh_leakage,
                h,
            ));
        }
    }
    tasks
}

/// The configured Rössler coordinate as a scalar series.
pub fn rossler_input(params: &RosslerParams, component: usize) -> Result<TimeSeries> {
    datagen::rossler_series(params)?.component(component)
}

fn rossler_row(
    cfg: &RosslerForecastConfig,
    series: &TimeSeries,
    trial: u32,
    task: RosslerTask,
) -> Result<RosslerRow> {
    let started = Instant::now();
    let seed = derive_seed(cfg.seed, 0, trial);
    let net = random_reservoir(&cfg.spec(task.leakage, task.activation), seed)?;
    let train = cfg.train_config(task.horizon);
    let steps = cfg
        .forecast_len
        .min(series.len() - cfg.train_len - task.horizon);
    let mut out = fit_and_forecast(&net, series, &train, steps)?;
    let (mut n_reduced, mut deviation) = (None, None);
    if task.variant == RosslerVariant::LinearReduced {
        let mut trained = net.clone();
        trained.set_readout(out.fit.readout.clone())?;
        let full = trained.to_linear_realization()?;
        let (reduced, _) = reduce(&full, cfg.rank_tolerance)?;
        deviation = Some(markov_deviation(&full, &reduced, 2 * full.dim)?);
        n_reduced = Some(reduced.dim);
        out = fit_and_forecast(&reduced, series, &train, steps)?;
    }
    Ok(RosslerRow {
        trial,
        seed,
        variant: task.variant,
        activation: task.activation,
        leakage: task.leakage,
        horizon: task.horizon,
        n_nodes: cfg.n_nodes,
        n_reduced,
        train_mse: out.fit.train_mse,
        forecast_mse: out.forecast_mse,
        forecast_rss: out.forecast_rss,
        forecast_steps: steps,
        markov_deviation: deviation,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

pub fn aggregate_rossler(rows: &[RosslerRow]) -> Vec<RosslerGroup> {
    let mut keys: Vec<(RosslerVariant, Activation, f64, usize)> = Vec::new();
    for r in rows {
        let key = (r.variant, r.activation, r.leakage, r.horizon);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(variant, activation, leakage, horizon)| {
            let group: Vec<&RosslerRow> = rows
                .iter()
                .filter(|r| {
                    (r.variant, r.activation, r.leakage, r.horizon)
                        == (variant, activation, leakage, horizon)
                })
                .collect();
            let train: Vec<f64> = group.iter().map(|r| r.train_mse).collect();
            let forecast: Vec<f64> = group.iter().map(|r| r.forecast_mse).collect();
            let reduced: Vec<f64> = group
                .iter()
                .filter_map(|r| r.n_reduced)
                .map(|n| n as f64)
                .collect();
            let (train_mse_mean, train_mse_std) = mean_std(&train).unwrap_or_default();
            let (forecast_mse_mean, forecast_mse_std) = mean_std(&forecast).unwrap_or_default();
            RosslerGroup {
                variant,
                activation,
                leakage,
                horizon,
                trials: group.len(),
                train_mse_mean,
                train_mse_std,
                forecast_mse_mean,
                forecast_mse_std,
                n_reduced_mean: mean(&reduced),
            }
        })
        .collect()
}

pub fn run_rossler_forecast(cfg: &RosslerForecastConfig) -> Result<ExperimentReport> {
    ExperimentConfig::RosslerForecast(cfg.clone()).validate()?;
    let started = Instant::now();
    let series = rossler_input(&cfg.rossler, cfg.component)?;
    let variants = rossler_tasks(cfg);
    let tasks: Vec<(u32, RosslerTask)> = (0..cfg.trials as u32)
        .flat_map(|t| variants.iter().map(move |v| (t, *v)))
        .collect();
    let rows = tasks
        .par_iter()
        .map(|&(t, task)| rossler_row(cfg, &series, t, task))
        .collect::<Result<Vec<_>>>()?;
    let aggregates = aggregate_rossler(&rows);
    Ok(ExperimentReport::new(
        ExperimentConfig::RosslerForecast(cfg.clone()),
        ExperimentResults::RosslerForecast { rows, aggregates },
        started,
    ))
}

// ---------------------------------------------------------------------------
// Activation comparison

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompareTask {
    /// Rössler series, `horizon` steps ahead (default 10).
    #[default]
    Rossler,
    /// Period-`N` delay series forecast `N - 1` steps ahead.
    TimeDelay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivationCompareConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_tolerance")]
    pub rank_tolerance: RankTolerance,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub task: CompareTask,
    #[serde(default = "ActivationCompareConfig::default_sizes")]
    pub sizes: Vec<usize>,
    #[serde(default = "default_lambda")]
    pub ridge_lambda: f64,
    #[serde(default = "ActivationCompareConfig::default_train_len")]
    pub train_len: usize,
    #[serde(default = "ActivationCompareConfig::default_forecast_len")]
    pub forecast_len: usize,
    /// Defaults to 500 for the Rössler task and 100 for the delay task.
    #[serde(default)]
    pub washout: Option<usize>,
    /// Defaults to 0.8 for the Rössler task and 0.9 for the delay task.
    #[serde(default)]
    pub leakage: Option<f64>,
    /// Rössler task only; defaults to 10.
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub rossler: RosslerParams,
    #[serde(default)]
    pub component: usize,
    #[serde(default = "default_sparsity")]
    pub sparsity: f64,
    #[serde(default = "default_target_norm")]
    pub target_norm: f64,
}

impl ActivationCompareConfig {
    fn default_sizes() -> Vec<usize> {
        vec![50, 100]
    }
    fn default_train_len() -> usize {
        5000
    }
    fn default_forecast_len() -> usize {
        2000
    }

    pub fn washout(&self) -> usize {
        self.washout.unwrap_or(match self.task {
            CompareTask::Rossler => 500,
            CompareTask::TimeDelay => 100,
        })
    }

    pub fn leakage(&self) -> f64 {
        self.leakage.unwrap_or(match self.task {
            CompareTask::Rossler => 0.8,
            CompareTask::TimeDelay => 0.9,
        })
    }

    pub fn horizon(&self, n: usize) -> usize {
        match self.task {
            CompareTask::Rossler => self.horizon.unwrap_or(10),
            CompareTask::TimeDelay => n - 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return Err(Error::invalid("sizes", "need at least one network size"));
        }
        check_lambda(self.ridge_lambda)?;
        check_lengths(self.washout(), self.train_len, self.forecast_len)?;
        let a = self.leakage();
        match self.task {
            CompareTask::Rossler => {
                self.rossler.validate()?;
                if !(a > 0.0 && a <= 1.0) {
                    return Err(Error::invalid("leakage", "must lie in (0, 1]"));
                }
                if self.component >= 3 {
                    return Err(Error::invalid("component", "must be 0, 1 or 2"));
                }
                let h = self.horizon(0);
                if h == 0 {
                    return Err(Error::invalid("horizon", "must be >= 1"));
                }
                if self.train_len + h + self.forecast_len > self.rossler.samples {
                    return Err(Error::invalid(
                        "forecast_len",
                        "train_len + horizon + forecast_len exceeds the Rössler sample count",
                    ));
                }
                if self.sizes.contains(&0) {
                    return Err(Error::invalid("sizes", "sizes must be >= 1"));
                }
            }
            CompareTask::TimeDelay => {
                if !(a > 0.5 && a < 1.0) {
                    return Err(Error::invalid(
                        "leakage",
                        "must lie in (0.5, 1) for the delay task",
                    ));
                }
                if self.horizon.is_some() {
                    return Err(Error::invalid(
                        "horizon",
                        "the delay task always forecasts N - 1 steps ahead",
                    ));
                }
                if self.sizes.iter().any(|&n| n < 2) {
                    return Err(Error::invalid("sizes", "delay task sizes must be >= 2"));
                }
            }
        }
        Ok(())
    }

    /// The shared-weight linear network for one trial.
    pub fn base_network(&self, n: usize, seed: u64) -> Result<ReservoirNet> {
        let alpha = self.leakage();
        match self.task {
            CompareTask::Rossler => random_reservoir(
                &ReservoirSpec {
                    n,
                    input_dim: 1,
                    sparsity: self.sparsity,
                    target_norm: self.target_norm,
                    leakage: alpha,
                    activation: Activation::Linear,
                },
                seed,
            ),
            CompareTask::TimeDelay => {
                let r = random_stable_realization(
                    n,
                    1,
                    1,
                    2.0 * alpha - 1.0,
                    &mut substream(seed, streams::WEIGHT_A),
                )?;
                from_linear_realization(&r, alpha, Activation::Linear)
            }
        }
    }
}

impl Default for ActivationCompareConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerActivation {
    pub linear: f64,
    pub tanh: f64,
    pub sigmoid: f64,
}

impl PerActivation {
    fn from_fn(mut f: impl FnMut(Activation) -> f64) -> Self {
        Self {
            linear: f(Activation::Linear),
            tanh: f(Activation::Tanh),
            sigmoid: f(Activation::Sigmoid),
        }
    }

    pub fn get(&self, a: Activation) -> f64 {
        match a {
            Activation::Linear => self.linear,
            Activation::Tanh => self.tanh,
            Activation::Sigmoid => self.sigmoid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub n: usize,
    pub trial: u32,
    pub seed: u64,
    pub horizon: usize,
    pub train_mse: PerActivation,
    pub forecast_mse: PerActivation,
    /// `train_mse.linear > max(train_mse.tanh, train_mse.sigmoid)`
    pub linear_worse: bool,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareGroup {
    pub n: usize,
    pub trials: usize,
    pub train_mse_mean: PerActivation,
    pub train_mse_std: PerActivation,
    pub forecast_mse_mean: PerActivation,
    pub forecast_mse_std: PerActivation,
    /// Fraction of trials with `linear_worse`.
    pub p_linear_worse: f64,
}

fn compare_row(
    cfg: &ActivationCompareConfig,
    rossler: Option<&TimeSeries>,
    point: usize,
    n: usize,
    trial: u32,
) -> Result<CompareRow> {
    let started = Instant::now();
    let seed = derive_seed(cfg.seed, point as u32, trial);
    let horizon = cfg.horizon(n);
    let series = match rossler {
        Some(s) => s.clone(),
        None => datagen::time_delay_series(n, cfg.train_len + cfg.forecast_len + horizon, seed)?,
    };
    let base = cfg.base_network(n, seed)?;
    let train = TrainConfig {
        washout: cfg.washout(),
        ridge_lambda: cfg.ridge_lambda,
        horizon,
        train_len: cfg.train_len,
        include_input_in_readout: true,
    };
    let mut train_mse = [0.0; 3];
    let mut forecast_mse = [0.0; 3];
    for (i, a) in Activation::ALL.into_iter().enumerate() {
        let out = fit_and_forecast(&base.with_activation(a), &series, &train, cfg.forecast_len)?;
        train_mse[i] = out.fit.train_mse;
        forecast_mse[i] = out.forecast_mse;
    }
    let pick = |v: [f64; 3]| {
        PerActivation::from_fn(|a| v[Activation::ALL.iter().position(|x| *x == a).unwrap()])
    };
    let train_mse = pick(train_mse);
    let forecast_mse = pick(forecast_mse);
    Ok(CompareRow {
        n,
        trial,
        seed,
        horizon,
        linear_worse: train_mse.linear > train_mse.tanh.max(train_mse.sigmoid),
        train_mse,
        forecast_mse,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

pub fn aggregate_compare(rows: &[CompareRow]) -> Vec<CompareGroup> {
    let mut sizes: Vec<usize> = Vec::new();
    for r in rows {
        if !sizes.contains(&r.n) {
            sizes.push(r.n);
        }
    }
    sizes
        .into_iter()
        .map(|n| {
            let group: Vec<&CompareRow> = rows.iter().filter(|r| r.n == n).collect();
            let stat = |f: &dyn Fn(&CompareRow) -> f64| {
                mean_std(&group.iter().map(|r| f(r)).collect::<Vec<_>>()).unwrap_or_default()
            };
            let train = PerActivation::from_fn(|a| stat(&|r| r.train_mse.get(a)).0);
            let train_std = PerActivation::from_fn(|a| stat(&|r| r.train_mse.get(a)).1);
            let forecast = PerActivation::from_fn(|a| stat(&|r| r.forecast_mse.get(a)).0);
            let forecast_std = PerActivation::from_fn(|a| stat(&|r| r.forecast_mse.get(a)).1);
            let worse = group.iter().filter(|r| r.linear_worse).count();
            CompareGroup {
                n,
                trials: group.len(),
                train_mse_mean: train,
                train_mse_std: train_std,
                forecast_mse_mean: forecast,
                forecast_mse_std: forecast_std,
                p_linear_worse: worse as f64 / group.len() as f64,
            }
        })
        .collect()
}

pub fn run_activation_compare(cfg: &ActivationCompareConfig) -> Result<ExperimentReport> {
    ExperimentConfig::ActivationCompare(cfg.clone()).validate()?;
    let started = Instant::now();
    let rossler = match cfg.task {
        CompareTask::Rossler => Some(rossler_input(&cfg.rossler, cfg.component)?),
        CompareTask::TimeDelay => None,
    };
    let tasks: Vec<(usize, usize, u32)> = cfg
        .sizes
        .iter()
        .enumerate()
        .flat_map(|(p, &n)| (0..cfg.trials as u32).map(move |t| (p, n, t)))
        .collect();
    let rows = tasks
        .par_iter()
        .map(|&(p, n, t)| compare_row(cfg, rossler.as_ref(), p, n, t))
        .collect::<Result<Vec<_>>>()?;
    let aggregates = aggregate_compare(&rows);
    Ok(ExperimentReport::new(
        ExperimentConfig::ActivationCompare(cfg.clone()),
        ExperimentResults::ActivationCompare { rows, aggregates },
        started,
    ))
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentResults {
    TimeDelaySweep {
        rows: Vec<DelayTrial>,
        aggregates: Vec<DelayPoint>,
    },
    RosslerForecast {
        rows: Vec<RosslerRow>,
        aggregates: Vec<RosslerGroup>,
    },
    ActivationCompare {
        rows: Vec<CompareRow>,
        aggregates: Vec<CompareGroup>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub artifact_version: String,
    pub config: ExperimentConfig,
    pub results: ExperimentResults,
    pub wall_time_s: f64,
}

impl ExperimentReport {
    fn new(config: ExperimentConfig, results: ExperimentResults, started: Instant) -> Self {
        Self {
            artifact_version: ARTIFACT_VERSION.to_owned(),
            config,
            results,
            wall_time_s: started.elapsed().as_secs_f64(),
        }
    }

    pub fn row_count(&self) -> usize {
        match &self.results {
            ExperimentResults::TimeDelaySweep { rows, .. } => rows.len(),
            ExperimentResults::RosslerForecast { rows, .. } => rows.len(),
            ExperimentResults::ActivationCompare { rows, .. } => rows.len(),
        }
    }

    /// Per-trial rows as CSV. Wall times are left out so the bytes depend
    /// only on the configuration.
    pub fn write_rows_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out);
        match &self.results {
            ExperimentResults::TimeDelaySweep { rows, .. } => {
                w.write_record(DELAY_COLUMNS)?;
                for r in rows {
                    w.write_record([
                        r.tau.to_string(),
                        r.trial.to_string(),
                        r.seed.to_string(),
                        r.n0.to_string(),
                        r.n_min.map(|n| n.to_string()).unwrap_or_default(),
                        opt_float(r.train_mse),
                        opt_float(r.forecast_mse),
                        r.retries.to_string(),
                    ])?;
                }
            }
            ExperimentResults::RosslerForecast { rows, .. } => {
                w.write_record(ROSSLER_COLUMNS)?;
                for r in rows {
                    w.write_record([
                        r.trial.to_string(),
                        r.seed.to_string(),
                        r.variant.name().to_owned(),
                        r.activation.name().to_owned(),
                        format_float(r.leakage),
                        r.horizon.to_string(),
                        r.n_nodes.to_string(),
                        r.n_reduced.map(|n| n.to_string()).unwrap_or_default(),
                        format_float(r.train_mse),
                        format_float(r.forecast_mse),
                        format_float(r.forecast_rss),
                        r.forecast_steps.to_string(),
                    ])?;
                }
            }
            ExperimentResults::ActivationCompare { rows, .. } => {
                w.write_record(COMPARE_COLUMNS)?;
                for r in rows {
                    let mut rec = vec![
                        r.n.to_string(),
                        r.trial.to_string(),
                        r.seed.to_string(),
                        r.horizon.to_string(),
                    ];
                    rec.extend(
                        Activation::ALL
                            .iter()
                            .map(|&a| format_float(r.train_mse.get(a))),
                    );
                    rec.extend(
                        Activation::ALL
                            .iter()
                            .map(|&a| format_float(r.forecast_mse.get(a))),
                    );
                    rec.push(u8::from(r.linear_worse).to_string());
                    w.write_record(&rec)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Aggregate table: `nmin_vs_tau.csv` for the delay sweep, otherwise one
    /// row per group.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out);
        match &self.results {
            ExperimentResults::TimeDelaySweep { aggregates, .. } => {
                w.write_record([
                    "tau",
                    "n0",
                    "trials_ok",
                    "n_min_mean",
                    "n_min_std",
                    "train_mse_mean",
                    "forecast_mse_mean",
                ])?;
                for a in aggregates {
                    w.write_record([
                        a.tau.to_string(),
                        a.n0.to_string(),
                        a.trials_ok.to_string(),
                        opt_float(a.n_min_mean),
                        opt_float(a.n_min_std),
                        opt_float(a.train_mse_mean),
                        opt_float(a.forecast_mse_mean),
                    ])?;
                }
            }
            ExperimentResults::RosslerForecast { aggregates, .. } => {
                w.write_record([
                    "variant",
                    "activation",
                    "leakage",
                    "horizon",
                    "trials",
                    "train_mse_mean",
                    "train_mse_std",
                    "forecast_mse_mean",
                    "forecast_mse_std",
                    "n_reduced_mean",
                ])?;
                for a in aggregates {
                    w.write_record([
                        a.variant.name().to_owned(),
                        a.activation.name().to_owned(),
                        format_float(a.leakage),
                        a.horizon.to_string(),
                        a.trials.to_string(),
                        format_float(a.train_mse_mean),
                        format_float(a.train_mse_std),
                        format_float(a.forecast_mse_mean),
                        format_float(a.forecast_mse_std),
                        opt_float(a.n_reduced_mean),
                    ])?;
                }
            }
            ExperimentResults::ActivationCompare { aggregates, .. } => {
                let mut header = vec!["n".to_owned(), "trials".to_owned()];
                for stat in [
                    "train_mse_mean",
                    "train_mse_std",
                    "forecast_mse_mean",
                    "forecast_mse_std",
                ] {
                    header.extend(Activation::ALL.iter().map(|a| format!("{stat}_{a}")));
                }
                header.push("p_linear_worse".to_owned());
                w.write_record(&header)?;
                for a in aggregates {
                    let mut rec = vec![a.n.to_string(), a.trials.to_string()];
                    for stat in [
                        &a.train_mse_mean,
                        &a.train_mse_std,
                        &a.forecast_mse_mean,
                        &a.forecast_mse_std,
                    ] {
                        rec.extend(Activation::ALL.iter().map(|&x| format_float(stat.get(x))));
                    }
                    rec.push(format_float(a.p_linear_worse));
                    w.write_record(&rec)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary_file_name(&self) -> &'static str {
        match self.results {
            ExperimentResults::TimeDelaySweep { .. } => "nmin_vs_tau.csv",
            ExperimentResults::RosslerForecast { .. } => "rossler_summary.csv",
            ExperimentResults::ActivationCompare { .. } => "activation_table.csv",
        }
    }

    /// Writes `report.csv`, `report.json` and the summary table into `dir`.
    pub fn write_files(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join("report.csv");
        let json_path = dir.join("report.json");
        let summary_path = dir.join(self.summary_file_name());
        self.write_rows_csv(BufWriter::new(File::create(&csv_path)?))?;
        self.write_summary_csv(BufWriter::new(File::create(&summary_path)?))?;
        let mut json = BufWriter::new(File::create(&json_path)?);
        serde_json::to_writer_pretty(&mut json, self)?;
        json.write_all(b"\n")?;
        json.flush()?;
        Ok(vec![csv_path, json_path, summary_path])
    }
}

pub const DELAY_COLUMNS: [&str; 8] = [
    "tau",
    "trial",
    "seed",
    "n0",
    "n_min",
    "train_mse",
    "forecast_mse",
    "retries",
];
pub const ROSSLER_COLUMNS: [&str; 12] = [
    "trial",
    "seed",
    "variant",
    "activation",
    "leakage",
    "horizon",
    "n_nodes",
    "n_reduced",
    "train_mse",
    "forecast_mse",
    "forecast_rss",
    "forecast_steps",
];
pub const COMPARE_COLUMNS: [&str; 11] = [
    "n",
    "trial",
    "seed",
    "horizon",
    "train_mse_linear",
    "train_mse_tanh",
    "train_mse_sigmoid",
    "forecast_mse_linear",
    "forecast_mse_tanh",
    "forecast_mse_sigmoid",
    "linear_worse",
];

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn opt_float(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    log::info!(
        "running {} with {} trials, seed {}",
        cfg.kind(),
        cfg.trials(),
        cfg.seed()
    );
    match cfg {
        ExperimentConfig::TimeDelaySweep(c) => run_time_delay_sweep(c),
        ExperimentConfig::RosslerForecast(c) => run_rossler_forecast(c),
        ExperimentConfig::ActivationCompare(c) => run_activation_compare(c),
    }
}

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rcn_core::datagen::{self, RosslerParams};
use rcn_core::reservoir::{harvest, random_reservoir};
use rcn_core::series::format_float;
use rcn_core::training::{self, make_forecast_pairs, train_readout, ForecastPairs};
use rcn_core::{
    reduce, run_experiment, Activation, ExperimentConfig, RankTolerance, Readout, Realization,
    ReservoirNet, ReservoirSpec, StateModel, TimeSeries, TrainConfig, Vector,
};

const THREADS_ENV: &str = "RCN_REALIZE_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "rcn-realize",
    version,
    about = "Build, train, reduce and evaluate reservoir networks"
)]
struct Cli {
    /// JSON configuration: Rössler parameters for `gen-data rossler`, a
    /// training config for `train`, an experiment config for `experiment`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Relative singular-value threshold for numerical rank.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Worker threads; RCN_REALIZE_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic series to `series.csv`.
    GenData {
        #[arg(value_enum)]
        kind: DataKind,
        /// Period of the time-delay series.
        #[arg(long, default_value_t = 10)]
        tau: usize,
        /// Length of the time-delay series.
        #[arg(long, default_value_t = 3000)]
        len: usize,
        /// Keep only this Rössler coordinate.
        #[arg(long)]
        component: Option<usize>,
    },
    /// Fit a readout and write `model.json`.
    Train {
        #[arg(long)]
        series: PathBuf,
        /// Untrained net or realization; when absent a random reservoir is drawn.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        nodes: usize,
        #[arg(long, default_value_t = 0.8)]
        leakage: f64,
        #[arg(long, default_value = "tanh")]
        activation: Activation,
        #[arg(long, default_value_t = 0.632)]
        sparsity: f64,
        #[arg(long, default_value_t = 0.9)]
        norm: f64,
        #[arg(long)]
        horizon: Option<usize>,
        /// Defaults to every sample that has a target.
        #[arg(long)]
        train_len: Option<usize>,
        #[arg(long)]
        washout: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        /// Readout sees only the state, not the current input.
        #[arg(long)]
        state_only: bool,
    },
    /// Reduce a trained model to an irreducible realization.
    Reduce {
        #[arg(long)]
        model: PathBuf,
    },
    /// Open-loop forecast of a series with a trained model.
    Forecast {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        series: PathBuf,
        #[arg(long, default_value_t = 1)]
        horizon: usize,
        /// Leading inputs used only to warm up the state.
        #[arg(long, default_value_t = 0)]
        washout: usize,
    },
    /// Run an experiment config and write its report files.
    Experiment,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DataKind {
    TimeDelay,
    Rossler,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn usage(msg: impl fmt::Display) -> Self {
        Failure::Usage(msg.to_string())
    }
}

impl From<rcn_core::Error> for Failure {
    fn from(e: rcn_core::Error) -> Self {
        if e.is_usage() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> CliResult {
    configure_threads(cli.threads)?;
    let tol = cli
        .tol
        .map(|t| RankTolerance::new(t).map_err(Failure::from))
        .transpose()?;
    let out = cli.out.clone();
    match cli.command {
        Command::GenData {
            kind,
            tau,
            len,
            component,
        } => {
            let series = match kind {
                DataKind::TimeDelay => datagen::time_delay_series(tau, len, cli.seed.unwrap_or(0))?,
                DataKind::Rossler => {
                    let params: RosslerParams = match &cli.config {
                        Some(p) => parse_json(p)?,
                        None => RosslerParams::default(),
                    };
                    let s = datagen::rossler_series(&params)?;
                    match component {
                        Some(c) => s.component(c)?,
                        None => s,
                    }
                }
            };
            let path = output_dir(out.as_deref())?.join("series.csv");
            write_series(&series, &path)?;
            println!("wrote {} samples to {}", series.len(), path.display());
        }
        Command::Train {
            series,
            model,
            nodes,
            leakage,
            activation,
            sparsity,
            norm,
            horizon,
            train_len,
            washout,
            lambda,
            state_only,
        } => {
            let series = read_series(&series)?;
            let model = match model {
                Some(p) => load_model(&p)?,
                None => Model::Net(random_reservoir(
                    &ReservoirSpec {
                        n: nodes,
                        input_dim: series.dim(),
                        sparsity,
                        target_norm: norm,
                        leakage,
                        activation,
                    },
                    cli.seed.unwrap_or(0),
                )?),
            };
            let mut cfg = match &cli.config {
                Some(p) => parse_json::<TrainConfig>(p)?,
                None => TrainConfig {
                    washout: 0,
                    ridge_lambda: 1e-8,
                    horizon: 1,
                    train_len: 0,
                    include_input_in_readout: true,
                },
            };
            if let Some(h) = horizon {
                cfg.horizon = h;
            }
            if cli.config.is_none() || train_len.is_some() {
                cfg.train_len = train_len.unwrap_or(series.len().saturating_sub(cfg.horizon));
            }
            if let Some(w) = washout {
                cfg.washout = w;
            } else if cli.config.is_none() {
                cfg.washout = (cfg.train_len / 10).min(100);
            }
            if let Some(l) = lambda {
                cfg.ridge_lambda = l;
            }
            if state_only || matches!(model, Model::Realization(_)) {
                cfg.include_input_in_readout = false;
            }
            cfg.validate()?;
            let pairs = make_forecast_pairs(&series, cfg.horizon, cfg.train_len)?;
            let traj = harvest(model.as_state_model(), &pairs.inputs, cfg.washout, None)?;
            let fit = train_readout(&traj, &pairs.inputs, &pairs.refs, &cfg)?;
            let trained = match model {
                Model::Net(mut net) => {
                    net.set_readout(fit.readout.clone())?;
                    Model::Net(net)
                }
                Model::Realization(r) => {
                    Model::Realization(r.with_output(fit.readout.weights.clone())?)
                }
            };
            let path = output_dir(out.as_deref())?.join("model.json");
            std::fs::write(&path, trained.to_json()?)?;
            println!("wrote {}", path.display());
            println!("samples_used={}", fit.samples_used);
            println!("train_rss={}", format_float(fit.train_rss_error));
            println!("train_mse={}", format_float(fit.train_mse));
        }
        Command::Reduce { model } => {
            let realization = match load_model(&model)? {
                Model::Realization(r) => r,
                Model::Net(net) => {
                    if net.activation != Activation::Linear {
                        return Err(Failure::usage(format!(
                            "only linear-activation nets have a linear realization (model uses {})",
                            net.activation
                        )));
                    }
                    net.to_linear_realization()?
                }
            };
            let (reduced, trace) = reduce(&realization, tol.unwrap_or_default())?;
            let dir = output_dir(out.as_deref())?;
            std::fs::write(dir.join("reduced.json"), reduced.to_json()?)?;
            std::fs::write(
                dir.join("trace.json"),
                serde_json::to_string_pretty(&trace)
                    .map_err(|e| Failure::Runtime(e.to_string()))?,
            )?;
            println!(
                "wrote {} and {}",
                dir.join("reduced.json").display(),
                dir.join("trace.json").display()
            );
            println!("iterations={}", trace.iterations.len());
            println!("dim_before={}", realization.dim);
            println!("dim_after={}", reduced.dim);
        }
        Command::Forecast {
            model,
            series,
            horizon,
            washout,
        } => {
            let model = load_model(&model)?;
            let series = read_series(&series)?;
            if horizon == 0 {
                return Err(Failure::usage("--horizon must be >= 1"));
            }
            if series.len() <= horizon + washout {
                return Err(Failure::usage(format!(
                    "series of {} samples leaves nothing to score after horizon {horizon} and washout {washout}",
                    series.len()
                )));
            }
            let steps = series.len() - horizon - washout;
            let sm = model.as_state_model();
            let warm = if washout == 0 {
                Vector::zeros(sm.state_dim())
            } else {
                let warmup = series.slice(0..washout)?;
                harvest(sm, &warmup, 0, None)?.last().clone()
            };
            let test = ForecastPairs::window(&series, horizon, washout, steps)?;
            let predictions = training::forecast(sm, &model.readout()?, &test.inputs, &warm)?;
            let mse = training::mse(&predictions, &test.refs)?;
            let path = output_dir(out.as_deref())?.join("predictions.csv");
            write_series(&predictions, &path)?;
            println!(
                "wrote {} predictions to {}",
                predictions.len(),
                path.display()
            );
            println!("mse={}", format_float(mse));
        }
        Command::Experiment => {
            let path = cli
                .config
                .as_deref()
                .ok_or_else(|| Failure::usage("`experiment` needs --config <path>"))?;
            let mut cfg = ExperimentConfig::from_json(&read_text(path)?)?;
            if let Some(seed) = cli.seed {
                cfg.set_seed(seed);
            }
            if let Some(t) = tol {
                cfg.set_rank_tolerance(t);
            }
            let dir = out.or_else(|| cfg.out_dir().map(Path::to_path_buf));
            let dir = output_dir(dir.as_deref())?;
            let report = run_experiment(&cfg)?;
            for file in report.write_files(&dir)? {
                println!("wrote {}", file.display());
            }
            println!("rows={}", report.row_count());
        }
    }
    Ok(())
}

fn configure_threads(flag: Option<usize>) -> CliResult {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
            Failure::usage(format!("{THREADS_ENV} must be a thread count, got `{v}`"))
        })?),
        Err(_) => flag,
    };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    Ok(())
}

enum Model {
    Net(ReservoirNet),
    Realization(Realization),
}

impl Model {
    fn as_state_model(&self) -> &dyn StateModel {
        match self {
            Model::Net(n) => n,
            Model::Realization(r) => r,
        }
    }

    fn readout(&self) -> CliResult<Readout> {
        match self {
            Model::Net(n) => n
                .readout
                .clone()
                .ok_or_else(|| Failure::usage("model has no trained readout; run `train` first")),
            Model::Realization(r) => Ok(Readout {
                weights: r.c.clone(),
                include_input: false,
            }),
        }
    }

    fn to_json(&self) -> CliResult<String> {
        Ok(match self {
            Model::Net(n) => n.to_json()?,
            Model::Realization(r) => r.to_json()?,
        })
    }
}

fn load_model(path: &Path) -> CliResult<Model> {
    let text = read_text(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let context = |e: rcn_core::Error| match Failure::from(e) {
        Failure::Usage(m) => Failure::Usage(format!("{}: {m}", path.display())),
        other => other,
    };
    if value.get("n_nodes").is_some() {
        Ok(Model::Net(ReservoirNet::from_json(&text).map_err(context)?))
    } else if value.get("a").is_some() {
        Ok(Model::Realization(
            Realization::from_json(&text).map_err(context)?,
        ))
    } else {
        Err(Failure::usage(format!(
            "{}: not a reservoir net (needs `n_nodes`) or realization (needs `a`)",
            path.display()
        )))
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_str(&read_text(path)?)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn read_series(path: &Path) -> CliResult<TimeSeries> {
    let file = File::open(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    TimeSeries::read_csv(file).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn write_series(series: &TimeSeries, path: &Path) -> CliResult {
    let mut w = BufWriter::new(File::create(path)?);
    series.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn output_dir(dir: Option<&Path>) -> CliResult<PathBuf> {
    let dir = dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

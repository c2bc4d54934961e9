//! Readout training and open-loop forecasting.
//!
//! Indexing convention used everywhere: the regressor at time `k` is
//! `[x[k]; u[k]]` (or `x[k]` alone), where `x[k]` is the state *before* `u[k]`
//! is consumed, and its target is `u[k + horizon]`. Training rows are
//! `k = washout..train_len`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, Matrix, Vector};
use crate::reservoir::{check_io, harvest, Readout, StateModel, StateTrajectory};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub washout: usize,
    #[serde(default = "default_lambda")]
    pub ridge_lambda: f64,
    pub horizon: usize,
    pub train_len: usize,
    #[serde(default = "default_true")]
    pub include_input_in_readout: bool,
}

fn default_lambda() -> f64 {
    1e-8
}

fn default_true() -> bool {
    true
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.washout >= self.train_len {
            return Err(Error::invalid(
                "washout",
                format!(
                    "must be below train_len ({} >= {})",
                    self.washout, self.train_len
                ),
            ));
        }
        if self.horizon == 0 {
            return Err(Error::invalid("horizon", "must be >= 1"));
        }
        if !(self.ridge_lambda >= 0.0 && self.ridge_lambda.is_finite()) {
            return Err(Error::invalid("ridge_lambda", "must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub readout: Readout,
    pub train_mse: f64,
    /// Root-sum-square error over the training rows.
    pub train_rss_error: f64,
    pub samples_used: usize,
}

/// Regressor rows `[x[k]; u[k]]` for `k` in `rows`.
fn design_matrix(
    states: &StateTrajectory,
    inputs: &TimeSeries,
    rows: std::ops::Range<usize>,
    include_input: bool,
) -> Matrix {
    let n = states.states[0].len();
    let p = inputs.dim();
    let features = Readout::feature_dim(n, p, include_input);
    let mut x = Matrix::zeros(rows.len(), features);
    for (i, k) in rows.enumerate() {
        let mut row = x.row_mut(i);
        for (j, v) in states.states[k].iter().enumerate() {
            row[j] = *v;
        }
        if include_input {
            for (j, v) in inputs.sample(k).iter().enumerate() {
                row[n + j] = *v;
            }
        }
    }
    x
}

/// Ridge fit of the readout over rows `washout..train_len`.
pub fn train_readout(
    states: &StateTrajectory,
    inputs: &TimeSeries,
    refs: &TimeSeries,
    cfg: &TrainConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    let t = cfg.train_len;
    for (got, what) in [
        (inputs.len(), "inputs"),
        (refs.len(), "refs"),
        (states.len(), "states"),
    ] {
        if got < t {
            log::debug!("{what} shorter than train_len");
            return Err(Error::SeriesTooShort { needed: t, got });
        }
    }
    let rows = cfg.washout..t;
    let x = design_matrix(states, inputs, rows.clone(), cfg.include_input_in_readout);
    let y = Matrix::from_fn(rows.len(), refs.dim(), |i, j| {
        refs.sample(rows.start + i)[j]
    });
    let w = numerics::ridge_solve(&x, &y, cfg.ridge_lambda)?;
    let residual = &x * &w - &y;
    let sse = residual.norm_squared();
    Ok(FitResult {
        readout: Readout {
            weights: w.transpose(),
            include_input: cfg.include_input_in_readout,
        },
        train_mse: sse / rows.len() as f64,
        train_rss_error: sse.sqrt(),
        samples_used: rows.len(),
    })
}

/// Input/target pairs for `horizon`-step-ahead forecasting.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastPairs {
    /// `u[0..train_len]`
    pub inputs: TimeSeries,
    /// `refs[k] = u[k + horizon]`
    pub refs: TimeSeries,
}

impl ForecastPairs {
    /// Inputs and aligned targets for the `len` samples starting at `start`.
    pub fn window(series: &TimeSeries, horizon: usize, start: usize, len: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("horizon", "must be >= 1"));
        }
        let needed = start + len + horizon;
        if series.len() < needed {
            return Err(Error::SeriesTooShort {
                needed,
                got: series.len(),
            });
        }
        Ok(Self {
            inputs: series.slice(start..start + len)?,
            refs: series.slice(start + horizon..start + horizon + len)?,
        })
    }
}

pub fn make_forecast_pairs(
    series: &TimeSeries,
    horizon: usize,
    train_len: usize,
) -> Result<ForecastPairs> {
    ForecastPairs::window(series, horizon, 0, train_len)
}

/// Open-loop forecast: feeds the true `test_inputs` from `warm_state` and
/// emits `readout([x; u])` at every step.
pub fn forecast<M: StateModel + ?Sized>(
    model: &M,
    readout: &Readout,
    test_inputs: &TimeSeries,
    warm_state: &Vector,
) -> Result<TimeSeries> {
    check_io(model, test_inputs, Some(warm_state))?;
    readout_fits(readout, model)?;
    let mut x = warm_state.clone();
    let mut out = Vec::with_capacity(test_inputs.len() * readout.output_dim());
    for u in test_inputs.samples() {
        out.extend(readout.apply(&x, u).iter());
        x = model.advance(&x, u);
    }
    let mut ts = TimeSeries::new(readout.output_dim(), out)?;
    ts.origin_index = test_inputs.origin_index;
    Ok(ts)
}

fn readout_fits<M: StateModel + ?Sized>(readout: &Readout, model: &M) -> Result<()> {
    let expected =
        Readout::feature_dim(model.state_dim(), model.input_dim(), readout.include_input);
    if readout.weights.ncols() != expected {
        return Err(Error::DimensionMismatch {
            context: "readout feature count",
            expected,
            found: readout.weights.ncols(),
        });
    }
    Ok(())
}

fn squared_error_sum(predicted: &TimeSeries, actual: &TimeSeries) -> Result<f64> {
    if predicted.is_empty() || actual.is_empty() {
        return Err(Error::invalid(
            "series",
            "error metrics need at least one sample",
        ));
    }
    if predicted.len() != actual.len() || predicted.dim() != actual.dim() {
        return Err(Error::DimensionMismatch {
            context: "compared series length",
            expected: actual.len(),
            found: predicted.len(),
        });
    }
    Ok(predicted
        .values()
        .iter()
        .zip(actual.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// `(1/T) sum_k ||p[k] - a[k]||^2`
pub fn mse(predicted: &TimeSeries, actual: &TimeSeries) -> Result<f64> {
    Ok(squared_error_sum(predicted, actual)? / actual.len() as f64)
}

/// `sqrt(sum_k ||p[k] - a[k]||^2)`
pub fn rss(predicted: &TimeSeries, actual: &TimeSeries) -> Result<f64> {
    Ok(squared_error_sum(predicted, actual)?.sqrt())
}

/// Result of training on a prefix of a series and forecasting what follows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastOutcome {
    pub fit: FitResult,
    pub forecast_mse: f64,
    pub forecast_rss: f64,
    pub forecast_steps: usize,
    #[serde(skip)]
    pub predictions: Option<TimeSeries>,
}

/// Trains on `series[0..train_len]` against targets `horizon` steps ahead,
/// then forecasts the next `forecast_len` steps open-loop from the state at
/// the end of training. The model starts from the zero state.
pub fn fit_and_forecast<M: StateModel + ?Sized>(
    model: &M,
    series: &TimeSeries,
    cfg: &TrainConfig,
    forecast_len: usize,
) -> Result<ForecastOutcome> {
    cfg.validate()?;
    if forecast_len == 0 {
        return Err(Error::invalid("forecast_len", "must be >= 1"));
    }
    let train = make_forecast_pairs(series, cfg.horizon, cfg.train_len)?;
    let traj = harvest(model, &train.inputs, cfg.washout, None)?;
    let fit = train_readout(&traj, &train.inputs, &train.refs, cfg)?;
    let test = ForecastPairs::window(series, cfg.horizon, cfg.train_len, forecast_len)?;
    let predictions = forecast(model, &fit.readout, &test.inputs, traj.last())?;
    Ok(ForecastOutcome {
        forecast_mse: mse(&predictions, &test.refs)?,
        forecast_rss: rss(&predictions, &test.refs)?,
        forecast_steps: forecast_len,
        fit,
        predictions: Some(predictions),
    })
}

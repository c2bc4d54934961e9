//! Synthetic input series: a random periodic signal and Rössler trajectories.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{streams, substream};
use crate::series::TimeSeries;

/// Scalar series with period `tau`: the first `tau` values are uniform on
/// `[-1, 1]`, then `u[k] = u[k - tau]`.
pub fn time_delay_series(tau: usize, total_len: usize, seed: u64) -> Result<TimeSeries> {
    if tau == 0 {
        return Err(Error::invalid("tau", "delay must be >= 1"));
    }
    if total_len <= tau {
        return Err(Error::invalid(
            "total_len",
            format!("must exceed the delay ({total_len} <= {tau})"),
        ));
    }
    let mut rng = substream(seed, streams::SERIES);
    let head: Vec<f64> = (0..tau).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let values = (0..total_len).map(|k| head[k % tau]).collect();
    Ok(TimeSeries::scalar(values)?
        .with_meta("kind", "time_delay")
        .with_meta("tau", tau)
        .with_meta("seed", seed))
}

fn default_a() -> f64 {
    0.5
}
fn default_b() -> f64 {
    2.0
}
fn default_c() -> f64 {
    4.0
}
fn default_initial() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}
fn default_span() -> (f64, f64) {
    (0.0, 1.0)
}
fn default_samples() -> usize {
    8000
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RosslerParams {
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_initial")]
    pub initial_state: [f64; 3],
    #[serde(default = "default_span")]
    pub t_span: (f64, f64),
    /// Number of emitted samples, including the initial state.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

impl Default for RosslerParams {
    fn default() -> Self {
        Self {
            a: default_a(),
            b: default_b(),
            c: default_c(),
            initial_state: default_initial(),
            t_span: default_span(),
            samples: default_samples(),
        }
    }
}

impl RosslerParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.a, self.b, self.c, self.t_span.0, self.t_span.1]
            .iter()
            .chain(self.initial_state.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("rossler", "parameters must be finite"));
        }
        if self.t_span.1 <= self.t_span.0 {
            return Err(Error::invalid("t_span", "end time must exceed start time"));
        }
        if self.samples < 2 {
            return Err(Error::invalid("samples", "need at least 2 samples"));
        }
        Ok(())
    }

    pub fn step_size(&self) -> f64 {
        (self.t_span.1 - self.t_span.0) / (self.samples - 1) as f64
    }
}

/// `(-y - z, x + a y, b + z (x - c))`
pub fn rossler_derivative(p: &RosslerParams, s: [f64; 3]) -> [f64; 3] {
    let [x, y, z] = s;
    [-y - z, x + p.a * y, p.b + z * (x - p.c)]
}

fn rk4_step(p: &RosslerParams, s: [f64; 3], h: f64) -> [f64; 3] {
    let add =
        |s: [f64; 3], k: [f64; 3], f: f64| [s[0] + f * k[0], s[1] + f * k[1], s[2] + f * k[2]];
    let k1 = rossler_derivative(p, s);
    let k2 = rossler_derivative(p, add(s, k1, h / 2.0));
    let k3 = rossler_derivative(p, add(s, k2, h / 2.0));
    let k4 = rossler_derivative(p, add(s, k3, h));
    let mut out = s;
    for i in 0..3 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Fixed-step RK4 trajectory sampled at `samples` evenly spaced times over
/// `t_span`, starting with the initial state.
pub fn rossler_series(p: &RosslerParams) -> Result<TimeSeries> {
    p.validate()?;
    let h = p.step_size();
    let mut s = p.initial_state;
    let mut data = Vec::with_capacity(3 * p.samples);
    data.extend_from_slice(&s);
    for step in 1..p.samples {
        s = rk4_step(p, s, h);
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step });
        }
        data.extend_from_slice(&s);
    }
    Ok(TimeSeries::new(3, data)?
        .with_meta("kind", "rossler")
        .with_meta("dt", crate::series::format_float(h)))
}

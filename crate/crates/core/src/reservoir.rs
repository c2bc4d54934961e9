//! Leaky reservoir dynamics `x[k+1] = (1 - alpha) x[k] + alpha * f(A x[k] + B u[k])`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, row_major, Matrix, Vector};
use crate::realization::Realization;
use crate::rng::{streams, substream};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub const ALL: [Activation; 3] = [Activation::Linear, Activation::Tanh, Activation::Sigmoid];

    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Linear => z,
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Global Lipschitz constant of the scalar map.
    pub fn lipschitz_constant(self) -> f64 {
        match self {
            Activation::Linear | Activation::Tanh => 1.0,
            Activation::Sigmoid => 0.25,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Linear => "linear",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Activation::Linear),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::invalid(
                "activation",
                format!("expected linear, tanh or sigmoid, got `{other}`"),
            )),
        }
    }
}

/// Anything that evolves a state vector under an input sequence.
pub trait StateModel {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    /// One update; callers guarantee `state` and `input` have matching sizes.
    fn advance(&self, state: &Vector, input: &[f64]) -> Vector;
}

/// Linear output layer. With `include_input` the features are `[x; u]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Readout {
    #[serde(with = "row_major")]
    pub weights: Matrix,
    pub include_input: bool,
}

impl Readout {
    pub fn feature_dim(state_dim: usize, input_dim: usize, include_input: bool) -> usize {
        if include_input {
            state_dim + input_dim
        } else {
            state_dim
        }
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn apply(&self, state: &Vector, input: &[f64]) -> Vector {
        let n = state.len();
        let mut y = self.weights.columns(0, n) * state;
        if self.include_input {
            y += self.weights.columns(n, input.len()) * Vector::from_column_slice(input);
        }
        y
    }

    /// Columns acting on the state.
    pub fn state_part(&self, state_dim: usize) -> Matrix {
        self.weights.columns(0, state_dim).into_owned()
    }

    fn check(&self, state_dim: usize, input_dim: usize) -> Result<()> {
        let expected = Self::feature_dim(state_dim, input_dim, self.include_input);
        if self.weights.ncols() != expected {
            return Err(Error::DimensionMismatch {
                context: "readout feature count",
                expected,
                found: self.weights.ncols(),
            });
        }
        numerics::validate(&self.weights, "readout")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetDoc")]
pub struct ReservoirNet {
    pub n_nodes: usize,
    pub input_dim: usize,
    pub leakage: f64,
    pub activation: Activation,
    pub seed: Option<u64>,
    /// Number of times generation was redrawn because `A` came out all zero.
    #[serde(default)]
    pub regenerations: u32,
    #[serde(with = "row_major")]
    pub weight_a: Matrix,
    #[serde(with = "row_major")]
    pub weight_b: Matrix,
    pub readout: Option<Readout>,
}

#[derive(Deserialize)]
struct NetDoc {
    n_nodes: usize,
    input_dim: usize,
    leakage: f64,
    activation: Activation,
    seed: Option<u64>,
    #[serde(default)]
    regenerations: u32,
    #[serde(with = "row_major")]
    weight_a: Matrix,
    #[serde(with = "row_major")]
    weight_b: Matrix,
    readout: Option<Readout>,
}

impl TryFrom<NetDoc> for ReservoirNet {
    type Error = Error;

    fn try_from(d: NetDoc) -> Result<Self> {
        let mut net = ReservoirNet::new(d.weight_a, d.weight_b, d.leakage, d.activation)?;
        for (name, stored, actual) in [
            ("n_nodes", d.n_nodes, net.n_nodes),
            ("input_dim", d.input_dim, net.input_dim),
        ] {
            if stored != actual {
                return Err(Error::invalid(
                    name,
                    format!("declared {stored}, matrices imply {actual}"),
                ));
            }
        }
        net.seed = d.seed;
        net.regenerations = d.regenerations;
        if let Some(r) = d.readout {
            net.set_readout(r)?;
        }
        Ok(net)
    }
}

fn check_leakage(leakage: f64) -> Result<()> {
    if leakage > 0.0 && leakage < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            "leakage",
            format!("must lie in (0, 1), got {leakage}"),
        ))
    }
}

impl ReservoirNet {
    pub fn new(
        weight_a: Matrix,
        weight_b: Matrix,
        leakage: f64,
        activation: Activation,
    ) -> Result<Self> {
        check_leakage(leakage)?;
        numerics::validate(&weight_a, "weight_a")?;
        numerics::validate(&weight_b, "weight_b")?;
        if !weight_a.is_square() {
            return Err(Error::DimensionMismatch {
                context: "weight_a columns",
                expected: weight_a.nrows(),
                found: weight_a.ncols(),
            });
        }
        if weight_b.nrows() != weight_a.nrows() {
            return Err(Error::DimensionMismatch {
                context: "weight_b rows",
                expected: weight_a.nrows(),
                found: weight_b.nrows(),
            });
        }
        Ok(Self {
            n_nodes: weight_a.nrows(),
            input_dim: weight_b.ncols(),
            leakage,
            activation,
            seed: None,
            regenerations: 0,
            weight_a,
            weight_b,
            readout: None,
        })
    }

    pub fn set_readout(&mut self, readout: Readout) -> Result<()> {
        readout.check(self.n_nodes, self.input_dim)?;
        self.readout = Some(readout);
        Ok(())
    }

    /// Same matrices and leakage, different activation; readout is dropped.
    pub fn with_activation(&self, activation: Activation) -> Self {
        Self {
            activation,
            readout: None,
            ..self.clone()
        }
    }

    /// One checked update of the reservoir state.
    pub fn step(&self, state: &Vector, input: &[f64]) -> Result<Vector> {
        if state.len() != self.n_nodes {
            return Err(Error::DimensionMismatch {
                context: "reservoir state",
                expected: self.n_nodes,
                found: state.len(),
            });
        }
        if input.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "reservoir input",
                expected: self.input_dim,
                found: input.len(),
            });
        }
        Ok(self.advance(state, input))
    }

    /// `1/L - ||A||_2`; positive means the echo state property is guaranteed.
    pub fn esp_margin(&self) -> f64 {
        1.0 / self.activation.lipschitz_constant() - numerics::spectral_norm(&self.weight_a)
    }

    /// `(1 - alpha) I + alpha A` and `alpha B`: the linear-activation system matrices.
    pub fn linear_system(&self) -> (Matrix, Matrix) {
        let a = Matrix::identity(self.n_nodes, self.n_nodes) * (1.0 - self.leakage)
            + &self.weight_a * self.leakage;
        (a, &self.weight_b * self.leakage)
    }

    /// Realization of a linear-activation net with the state part of the readout as output map.
    pub fn to_linear_realization(&self) -> Result<Realization> {
        let readout = self
            .readout
            .as_ref()
            .ok_or_else(|| Error::invalid("readout", "net has no trained readout"))?;
        let (a, b) = self.linear_system();
        Realization::new(a, b, readout.state_part(self.n_nodes))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl StateModel for ReservoirNet {
    fn state_dim(&self) -> usize {
        self.n_nodes
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn advance(&self, state: &Vector, input: &[f64]) -> Vector {
        let mut pre = &self.weight_a * state;
        pre.gemv(1.0, &self.weight_b, &Vector::from_column_slice(input), 1.0);
        let act = self.activation;
        let alpha = self.leakage;
        pre.zip_map(state, |z, x| (1.0 - alpha) * x + alpha * act.apply(z))
    }
}

/// Generation settings for [`random_reservoir`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReservoirSpec {
    pub n: usize,
    pub input_dim: usize,
    /// Fraction of entries of `A` forced to zero.
    pub sparsity: f64,
    pub target_norm: f64,
    pub leakage: f64,
    pub activation: Activation,
}

/// Random reservoir: `A` has entries zero with probability `sparsity` and
/// uniform on `[0, 1]` otherwise, rescaled to `||A||_2 = target_norm`; `B` is
/// dense uniform on `[0, 1]`. Fully determined by `seed`.
pub fn random_reservoir(spec: &ReservoirSpec, seed: u64) -> Result<ReservoirNet> {
    if spec.n == 0 || spec.input_dim == 0 {
        return Err(Error::invalid(
            "n",
            "reservoir and input sizes must be >= 1",
        ));
    }
    if !(0.0..1.0).contains(&spec.sparsity) {
        return Err(Error::invalid(
            "sparsity",
            format!("must lie in [0, 1), got {}", spec.sparsity),
        ));
    }
    if !(spec.target_norm > 0.0 && spec.target_norm.is_finite()) {
        return Err(Error::invalid("target_norm", "must be positive and finite"));
    }
    check_leakage(spec.leakage)?;
    if spec.target_norm >= 1.0 / spec.activation.lipschitz_constant() {
        log::warn!(
            "target norm {} does not guarantee the echo state property for {} (needs < {})",
            spec.target_norm,
            spec.activation,
            1.0 / spec.activation.lipschitz_constant()
        );
    }

    let mut regenerations = 0u32;
    let (a, norm) = loop {
        let stream = if regenerations == 0 {
            streams::WEIGHT_A
        } else {
            streams::RETRY_BASE + u64::from(regenerations)
        };
        let a = sparse_uniform(spec.n, spec.sparsity, seed, stream);
        let norm = numerics::spectral_norm(&a);
        if norm > 0.0 {
            break (a, norm);
        }
        log::warn!("all-zero reservoir draw for seed {seed}; regenerating");
        regenerations += 1;
    };
    let a = a * (spec.target_norm / norm);

    let mut rng = substream(seed, streams::WEIGHT_B);
    let b = Matrix::from_fn(spec.n, spec.input_dim, |_, _| rng.random::<f64>());

    let mut net = ReservoirNet::new(a, b, spec.leakage, spec.activation)?;
    net.seed = Some(seed);
    net.regenerations = regenerations;
    Ok(net)
}

fn sparse_uniform(n: usize, sparsity: f64, seed: u64, stream: u64) -> Matrix {
    let mut rng = substream(seed, stream);
    let mut entries = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        let keep = rng.random::<f64>() >= sparsity;
        let value: f64 = rng.random();
        entries.push(if keep { value } else { 0.0 });
    }
    Matrix::from_row_slice(n, n, &entries)
}

/// Net whose linear-activation dynamics reproduce `r`:
/// `A = (A_r - (1 - alpha) I) / alpha`, `B = B_r / alpha`. Needs `1/2 < alpha < 1`.
pub fn from_linear_realization(
    r: &Realization,
    leakage: f64,
    activation: Activation,
) -> Result<ReservoirNet> {
    if !(leakage > 0.5 && leakage < 1.0) {
        return Err(Error::invalid(
            "leakage",
            format!("must lie in (1/2, 1), got {leakage}"),
        ));
    }
    let n = r.dim();
    let a = (&r.a - Matrix::identity(n, n) * (1.0 - leakage)) / leakage;
    let b = &r.b / leakage;
    ReservoirNet::new(a, b, leakage, activation)
}

/// Reservoir states `x[0..=T]` for inputs `u[0..T-1]`, with `x[0]` the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub states: Vec<Vector>,
    pub washout: usize,
}

impl StateTrajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &Vector {
        self.states
            .last()
            .expect("trajectory holds at least the initial state")
    }

    /// States after the washout.
    pub fn collected(&self) -> &[Vector] {
        &self.states[self.washout..]
    }
}

/// Runs `model` over `inputs` from `initial_state` (zero when `None`).
pub fn harvest<M: StateModel + ?Sized>(
    model: &M,
    inputs: &TimeSeries,
    washout: usize,
    initial_state: Option<&Vector>,
) -> Result<StateTrajectory> {
    if washout >= inputs.len() {
        return Err(Error::SeriesTooShort {
            needed: washout + 1,
            got: inputs.len(),
        });
    }
    check_io(model, inputs, initial_state)?;
    let mut x = initial_state
        .cloned()
        .unwrap_or_else(|| Vector::zeros(model.state_dim()));
    let mut states = Vec::with_capacity(inputs.len() + 1);
    states.push(x.clone());
    for u in inputs.samples() {
        x = model.advance(&x, u);
        states.push(x.clone());
    }
    Ok(StateTrajectory { states, washout })
}

pub(crate) fn check_io<M: StateModel + ?Sized>(
    model: &M,
    inputs: &TimeSeries,
    state: Option<&Vector>,
) -> Result<()> {
    if inputs.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "input series dimension",
            expected: model.input_dim(),
            found: inputs.dim(),
        });
    }
    if let Some(x) = state {
        if x.len() != model.state_dim() {
            return Err(Error::DimensionMismatch {
                context: "initial state",
                expected: model.state_dim(),
                found: x.len(),
            });
        }
    }
    Ok(())
}

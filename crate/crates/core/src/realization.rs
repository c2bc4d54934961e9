//! Linear state-space realizations `x[k+1] = A x[k] + B u[k]`, `y[k] = C x[k]`
//! and their reduction to irreducible form.
//!
//! Ranks are numerical ranks (see [`RankTolerance`]). Reductions project onto
//! orthonormal bases of the reachable or observable subspace, which never
//! increases `||A||_2`, so an `alpha`-stable input stays `alpha`-stable.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, row_major, Matrix, RankTolerance, Vector};
use crate::reservoir::{check_io, StateModel};
use crate::series::TimeSeries;

/// Block columns whose norm drops below this are treated as exact zeros.
const UNDERFLOW_NORM: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RealizationDoc")]
pub struct Realization {
    pub dim: usize,
    #[serde(with = "row_major")]
    pub a: Matrix,
    #[serde(with = "row_major")]
    pub b: Matrix,
    #[serde(with = "row_major")]
    pub c: Matrix,
}

#[derive(Deserialize)]
struct RealizationDoc {
    dim: usize,
    #[serde(with = "row_major")]
    a: Matrix,
    #[serde(with = "row_major")]
    b: Matrix,
    #[serde(with = "row_major")]
    c: Matrix,
}

impl TryFrom<RealizationDoc> for Realization {
    type Error = Error;

    fn try_from(d: RealizationDoc) -> Result<Self> {
        let r = Realization::new(d.a, d.b, d.c)?;
        if r.dim != d.dim {
            return Err(Error::invalid(
                "dim",
                format!("declared {}, matrices imply {}", d.dim, r.dim),
            ));
        }
        Ok(r)
    }
}

impl Realization {
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        numerics::validate(&a, "realization a")?;
        numerics::validate(&b, "realization b")?;
        numerics::validate(&c, "realization c")?;
        let n = a.nrows();
        for (context, expected, found) in [
            ("realization a columns", n, a.ncols()),
            ("realization b rows", n, b.nrows()),
            ("realization c columns", n, c.ncols()),
        ] {
            if expected != found {
                return Err(Error::DimensionMismatch {
                    context,
                    expected,
                    found,
                });
            }
        }
        Ok(Self { dim: n, a, b, c })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    /// Same dynamics with a different output map.
    pub fn with_output(&self, c: Matrix) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), c)
    }

    pub fn stability(&self, alpha: f64) -> StabilityCert {
        StabilityCert::new(alpha, numerics::spectral_norm(&self.a))
    }

    /// Dual system `(A^T, C^T, B^T)`.
    pub fn dual(&self) -> Self {
        Self {
            dim: self.dim,
            a: self.a.transpose(),
            b: self.c.transpose(),
            c: self.b.transpose(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl StateModel for Realization {
    fn state_dim(&self) -> usize {
        self.dim
    }

    fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    fn advance(&self, state: &Vector, input: &[f64]) -> Vector {
        let mut next = &self.a * state;
        next.gemv(1.0, &self.b, &Vector::from_column_slice(input), 1.0);
        next
    }
}

/// Whether `||A||_2 < alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityCert {
    pub alpha: f64,
    pub norm_a: f64,
    pub stable: bool,
}

impl StabilityCert {
    pub fn new(alpha: f64, norm_a: f64) -> Self {
        Self {
            alpha,
            norm_a,
            stable: norm_a < alpha,
        }
    }
}

/// `C A^k B` for `k = 0..count`, by repeated multiplication of `A^k B`.
pub fn markov_parameters(r: &Realization, count: usize) -> Result<Vec<Matrix>> {
    if count == 0 {
        return Err(Error::invalid(
            "count",
            "need at least one Markov parameter",
        ));
    }
    let mut out = Vec::with_capacity(count);
    let mut akb = r.b.clone();
    for k in 0..count {
        if k > 0 {
            akb = &r.a * akb;
        }
        out.push(&r.c * &akb);
    }
    Ok(out)
}

/// Largest Frobenius distance between corresponding Markov parameters,
/// divided by the largest Frobenius norm among the reference's.
pub fn markov_deviation(reference: &Realization, other: &Realization, count: usize) -> Result<f64> {
    let g1 = markov_parameters(reference, count)?;
    let g2 = markov_parameters(other, count)?;
    let scale = g1.iter().map(|g| g.norm()).fold(0.0, f64::max);
    let worst = g1
        .iter()
        .zip(&g2)
        .map(|(a, b)| {
            if a.shape() == b.shape() {
                (a - b).norm()
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

/// `W = [B, AB, ..., A^{N-1} B]`, N x (N p).
pub fn controllability_matrix(r: &Realization) -> Matrix {
    let n = r.dim;
    let p = r.b.ncols();
    let mut w = Matrix::zeros(n, n * p);
    let mut block = r.b.clone();
    for k in 0..n {
        if block.norm() < UNDERFLOW_NORM {
            break;
        }
        w.columns_mut(k * p, p).copy_from(&block);
        block = &r.a * block;
    }
    w
}

/// `G = [C; CA; ...; C A^{N-1}]`, (N q) x N.
pub fn observability_matrix(r: &Realization) -> Matrix {
    controllability_matrix(&r.dual()).transpose()
}

/// The matrix whose rank certifies irreducibility: `W G` when input and
/// output dimensions agree, and the Hankel product `G W` otherwise.
fn coupling_matrix(w: &Matrix, g: &Matrix) -> Matrix {
    if w.ncols() == g.nrows() {
        w * g
    } else {
        g * w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Irreducibility {
    pub irreducible: bool,
    pub dim: usize,
    pub rank_w: usize,
    pub rank_g: usize,
    pub rank_wg: usize,
}

struct Gramians {
    w: Matrix,
    g: Matrix,
    report: Irreducibility,
}

fn analyze(r: &Realization, tol: RankTolerance) -> Gramians {
    let w = controllability_matrix(r);
    let g = observability_matrix(r);
    let rank_w = numerics::numerical_rank(&w, tol);
    let rank_g = numerics::numerical_rank(&g, tol);
    let rank_wg = numerics::numerical_rank(&coupling_matrix(&w, &g), tol);
    Gramians {
        w,
        g,
        report: Irreducibility {
            irreducible: rank_w == r.dim && rank_g == r.dim,
            dim: r.dim,
            rank_w,
            rank_g,
            rank_wg,
        },
    }
}

/// Irreducibility certificate.
///
/// In exact arithmetic `rank(W G) = N` iff `W` and `G` both have rank `N`.
/// Numerically the singular values of the product decay about twice as fast as
/// those of its factors, so `rank_wg` understates the rank of badly conditioned
/// systems; `irreducible` is decided from the factor ranks and `rank_wg` is
/// reported alongside.
pub fn is_irreducible(r: &Realization, tol: RankTolerance) -> Irreducibility {
    analyze(r, tol).report
}

fn project(r: &Realization, v1: &Matrix) -> Result<Realization> {
    let v1t = v1.transpose();
    Realization::new(&v1t * &r.a * v1, &v1t * &r.b, &r.c * v1)
}

/// Restriction to the reachable subspace `range(W)`.
pub fn project_controllable(r: &Realization, tol: RankTolerance) -> Result<Realization> {
    let v1 = numerics::orthonormal_basis(&controllability_matrix(r), tol).map_err(|e| match e {
        Error::EmptyColumnSpace => Error::NoReachableSubspace,
        other => other,
    })?;
    project(r, &v1)
}

/// Restriction to the observable subspace `range(G^T)`.
pub fn project_observable(r: &Realization, tol: RankTolerance) -> Result<Realization> {
    let v1 = numerics::orthonormal_basis(&observability_matrix(r).transpose(), tol).map_err(
        |e| match e {
            Error::EmptyColumnSpace => Error::NoObservableSubspace,
            other => other,
        },
    )?;
    project(r, &v1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Controllability,
    Observability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionStep {
    pub step_kind: StepKind,
    pub dim_before: usize,
    pub dim_after: usize,
    pub rank_w: usize,
    pub rank_g: usize,
    /// `rank(W G)` of the realization produced by this step.
    pub rank_wg: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionTrace {
    pub iterations: Vec<ReductionStep>,
    pub final_dim: usize,
}

/// Minimal stable realization by alternating projections.
///
/// While the realization is reducible, project onto `range(W)` if `W` is rank
/// deficient, else onto `range(G^T)`, then recompute `W` and `G`.
pub fn reduce(r: &Realization, tol: RankTolerance) -> Result<(Realization, ReductionTrace)> {
    let limit = r.dim;
    let mut current = r.clone();
    let mut trace = ReductionTrace {
        iterations: Vec::new(),
        final_dim: r.dim,
    };
    let mut state = analyze(&current, tol);
    while !state.report.irreducible {
        if trace.iterations.len() >= limit {
            return Err(Error::ReductionDidNotConverge { limit, trace });
        }
        let Irreducibility {
            rank_w,
            rank_g,
            dim,
            ..
        } = state.report;
        let (kind, v1) = if rank_w < dim {
            let v1 = numerics::orthonormal_basis(&state.w, tol)
                .map_err(|_| Error::NoReachableSubspace)?;
            (StepKind::Controllability, v1)
        } else {
            let v1 = numerics::orthonormal_basis(&state.g.transpose(), tol)
                .map_err(|_| Error::NoObservableSubspace)?;
            (StepKind::Observability, v1)
        };
        current = project(&current, &v1)?;
        state = analyze(&current, tol);
        trace.iterations.push(ReductionStep {
            step_kind: kind,
            dim_before: dim,
            dim_after: current.dim,
            rank_w,
            rank_g,
            rank_wg: state.report.rank_wg,
        });
        trace.final_dim = current.dim;
    }
    Ok((current, trace))
}

/// Random `n`-dimensional normal matrix `Q D Q^T` whose eigenvalues are uniform
/// on the disk of radius `radius`, so `||A||_2 <= radius`. `Q` is Haar
/// orthogonal; `B` is uniform on `[-1, 1]`; `C` is zero with `output_dim` rows.
pub fn random_stable_realization<R: Rng + ?Sized>(
    n: usize,
    input_dim: usize,
    output_dim: usize,
    radius: f64,
    rng: &mut R,
) -> Result<Realization> {
    if n == 0 || input_dim == 0 || output_dim == 0 {
        return Err(Error::invalid("n", "dimensions must be >= 1"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid("radius", "must be positive and finite"));
    }
    let g = Matrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let signs = qr.r().diagonal().map(|d| if d < 0.0 { -1.0 } else { 1.0 });
    let mut q = qr.q();
    for (j, s) in signs.iter().enumerate() {
        q.column_mut(j).scale_mut(*s);
    }

    let mut d = Matrix::zeros(n, n);
    let mut i = 0;
    while i + 1 < n {
        let r = radius * rng.random::<f64>().sqrt();
        let theta = rng.random_range(0.0..std::f64::consts::PI);
        let (sin, cos) = theta.sin_cos();
        d[(i, i)] = r * cos;
        d[(i + 1, i + 1)] = r * cos;
        d[(i, i + 1)] = r * sin;
        d[(i + 1, i)] = -r * sin;
        i += 2;
    }
    if i < n {
        d[(i, i)] = radius * rng.random_range(-1.0..1.0);
    }
    let a = &q * d * q.transpose();
    let b = Matrix::from_fn(n, input_dim, |_, _| rng.random_range(-1.0..1.0));
    Realization::new(a, b, Matrix::zeros(output_dim, n))
}

/// Outputs `y[1..=T]` for inputs `u[0..T-1]`, starting from `x0` (zero when `None`).
pub fn simulate(r: &Realization, inputs: &TimeSeries, x0: Option<&Vector>) -> Result<TimeSeries> {
    check_io(r, inputs, x0)?;
    let mut x = x0.cloned().unwrap_or_else(|| Vector::zeros(r.dim));
    let mut out = Vec::with_capacity(inputs.len() * r.output_dim());
    for u in inputs.samples() {
        x = r.advance(&x, u);
        out.extend((&r.c * &x).iter());
    }
    let mut ts = TimeSeries::new(r.output_dim(), out)?;
    ts.origin_index = inputs.origin_index + 1;
    Ok(ts)
}

/// Root-sum-square error of `(A, B, readout)` against `refs` (`refs[i]` is the
/// target for `y[i + 1]`), and whether it is within `epsilon`.
pub fn check_epsilon_realization(
    r: &Realization,
    readout: &Matrix,
    inputs: &TimeSeries,
    refs: &TimeSeries,
    epsilon: f64,
) -> Result<(bool, f64)> {
    if inputs.len() != refs.len() {
        return Err(Error::DimensionMismatch {
            context: "reference length",
            expected: inputs.len(),
            found: refs.len(),
        });
    }
    let y = simulate(&r.with_output(readout.clone())?, inputs, None)?;
    let err = crate::training::rss(&y, refs)?;
    Ok((err <= epsilon, err))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rng::substream;
    use rand::Rng;

    fn scalar(a: f64, b: f64, c: f64) -> Realization {
        Realization::new(
            Matrix::from_element(1, 1, a),
            Matrix::from_element(1, 1, b),
            Matrix::from_element(1, 1, c),
        )
        .unwrap()
    }

    fn random(n: usize, p: usize, q: usize, norm: f64, seed: u64) -> Realization {
        fixtures::random_stable(n, p, q, norm, seed)
    }

    #[test]
    fn random_stable_realization_respects_radius() {
        let mut rng = substream(3, 0);
        for n in [1, 2, 7, 40] {
            let r = random_stable_realization(n, 1, 1, 0.8, &mut rng).unwrap();
            let norm = numerics::spectral_norm(&r.a);
            assert!(norm <= 0.8 + 1e-12, "n={n}: {norm}");
            assert!((&r.a * r.a.transpose() - r.a.transpose() * &r.a).amax() < 1e-12);
        }
        let again = random_stable_realization(10, 2, 1, 0.5, &mut substream(9, 0)).unwrap();
        assert_eq!(
            again,
            random_stable_realization(10, 2, 1, 0.5, &mut substream(9, 0)).unwrap()
        );
    }

    #[test]
    fn scalar_markov_parameters() {
        let g = markov_parameters(&scalar(0.5, 2.0, 3.0), 6).unwrap();
        for (k, gk) in g.iter().enumerate() {
            assert!((gk[(0, 0)] - 6.0 * 0.5f64.powi(k as i32)).abs() < 1e-15);
        }
        assert!(markov_parameters(&scalar(0.5, 2.0, 3.0), 0).is_err());
    }

    #[test]
    fn first_markov_parameter_is_cb() {
        let r = random(5, 2, 3, 0.7, 1);
        let g = markov_parameters(&r, 1).unwrap();
        assert!((&g[0] - &r.c * &r.b).amax() < 1e-15);
    }

    #[test]
    fn controllability_of_nilpotent_free_system() {
        let r = Realization::new(
            Matrix::zeros(3, 3),
            Matrix::from_element(3, 1, 1.0),
            Matrix::from_element(1, 3, 2.0),
        )
        .unwrap();
        let w = controllability_matrix(&r);
        assert_eq!(w.shape(), (3, 3));
        assert_eq!(w.column(0).into_owned(), r.b.column(0).into_owned());
        assert!(w.columns(1, 2).amax() == 0.0);
        let g = observability_matrix(&r);
        assert_eq!(g.row(0).into_owned(), r.c.row(0).into_owned());
        assert!(g.rows(1, 2).amax() == 0.0);
        assert_eq!(controllability_matrix(&scalar(0.5, 1.0, 1.0))[(0, 0)], 1.0);
    }

    #[test]
    fn observability_is_dual_controllability() {
        let r = random(4, 2, 3, 0.8, 2);
        let g = observability_matrix(&r);
        let w_dual = controllability_matrix(&r.dual());
        assert_eq!(g, w_dual.transpose());
        assert_eq!(g.shape(), (12, 4));
    }

    #[test]
    fn shift_register_ranks() {
        let r = fixtures::shift_register(5, 0.5);
        let tol = RankTolerance::default();
        // The delay line's controllability matrix is a scaled anti-diagonal.
        let sv = numerics::singular_values(&controllability_matrix(&r));
        assert!(sv.iter().all(|&s| s > 1e-3));
        assert_eq!(
            numerics::numerical_rank(&controllability_matrix(&r), tol),
            5
        );
        assert_eq!(numerics::numerical_rank(&observability_matrix(&r), tol), 5);
        assert!(is_irreducible(&r, tol).irreducible);
    }

    #[test]
    fn scalar_is_irreducible() {
        assert!(is_irreducible(&scalar(0.5, 1.0, 1.0), RankTolerance::default()).irreducible);
    }

    #[test]
    fn padding_makes_reducible() {
        let tol = RankTolerance::default();
        let r = random(4, 1, 1, 0.7, 3);
        assert!(is_irreducible(&r, tol).irreducible);
        let p = fixtures::decoupled_padding(&r, 3, 4);
        let rep = is_irreducible(&p, tol);
        assert!(!rep.irreducible);
        assert_eq!((rep.rank_w, rep.rank_g, rep.rank_wg), (4, 4, 4));

        // Coupled padding: 2 unreachable-but-observable, 1 reachable-but-unobservable.
        let rep = is_irreducible(&fixtures::padded(&r, 2, 1, 4), tol);
        assert!(!rep.irreducible);
        assert_eq!((rep.rank_w, rep.rank_g), (5, 6));
        assert!(rep.rank_wg < 7);
    }

    #[test]
    fn theorem_two_consistency_on_random_cases() {
        let tol = RankTolerance::default();
        for seed in 0..100 {
            let n = 2 + (seed as usize % 6);
            let base = random(n, 1 + seed as usize % 2, 1 + seed as usize % 2, 0.6, seed);
            let r = if seed % 2 == 0 {
                fixtures::padded(&base, seed as usize % 3, 1 + seed as usize % 2, seed)
            } else {
                base
            };
            let rep = is_irreducible(&r, tol);
            assert_eq!(
                rep.irreducible,
                rep.rank_w == r.dim && rep.rank_g == r.dim,
                "seed {seed}"
            );
        }
    }

    #[test]
    fn projections_on_full_rank_systems_keep_dimension() {
        let tol = RankTolerance::default();
        let r = random(5, 1, 1, 0.7, 6);
        for projected in [
            project_controllable(&r, tol).unwrap(),
            project_observable(&r, tol).unwrap(),
        ] {
            assert_eq!(projected.dim, 5);
            assert!(markov_deviation(&r, &projected, 10).unwrap() < 1e-10);
        }
    }

    #[test]
    fn projections_recover_padded_blocks() {
        let tol = RankTolerance::default();
        let r = random(4, 1, 1, 0.7, 7);
        let p = fixtures::padded(&r, 3, 0, 8);
        let ctrl = project_controllable(&p, tol).unwrap();
        assert_eq!(ctrl.dim, 4);
        assert!(markov_deviation(&p, &ctrl, 14).unwrap() < 1e-10);

        let p = fixtures::padded(&r, 0, 3, 9);
        let obs = project_observable(&p, tol).unwrap();
        assert_eq!(obs.dim, 4);
        assert!(markov_deviation(&p, &obs, 14).unwrap() < 1e-10);
    }

    #[test]
    fn projections_never_increase_norm() {
        let tol = RankTolerance::default();
        for seed in 0..100 {
            let base = random(3 + seed as usize % 5, 1, 1, 0.8, 100 + seed);
            let extra = 1 + seed as usize % 4;
            let pc = fixtures::padded(&base, extra, 0, seed);
            let po = fixtures::padded(&base, 0, extra, seed);
            let c = project_controllable(&pc, tol).unwrap();
            let o = project_observable(&po, tol).unwrap();
            assert!(numerics::spectral_norm(&c.a) <= numerics::spectral_norm(&pc.a) + 1e-10);
            assert!(numerics::spectral_norm(&o.a) <= numerics::spectral_norm(&po.a) + 1e-10);
        }
    }

    #[test]
    fn rank_zero_projection_errors() {
        let tol = RankTolerance::default();
        let r = Realization::new(
            Matrix::identity(2, 2) * 0.5,
            Matrix::zeros(2, 1),
            Matrix::from_element(1, 2, 1.0),
        )
        .unwrap();
        assert!(matches!(
            project_controllable(&r, tol),
            Err(Error::NoReachableSubspace)
        ));
        assert!(matches!(
            project_observable(&r.dual(), tol),
            Err(Error::NoObservableSubspace)
        ));
    }

    #[test]
    fn reduce_leaves_irreducible_input_alone() {
        let r = random(6, 1, 1, 0.7, 10);
        let (out, trace) = reduce(&r, RankTolerance::default()).unwrap();
        assert_eq!(out, r);
        assert!(trace.iterations.is_empty());
        assert_eq!(trace.final_dim, 6);
    }

    #[test]
    fn reduce_strips_both_kinds_of_padding() {
        let tol = RankTolerance::default();
        let r = random(5, 1, 1, 0.7, 11);
        let p = fixtures::padded(&r, 2, 3, 12);
        assert_eq!(p.dim, 10);
        let (out, trace) = reduce(&p, tol).unwrap();
        assert_eq!(out.dim, 5);
        assert!(markov_deviation(&p, &out, 20).unwrap() < 1e-8);
        let dims: Vec<_> = trace
            .iterations
            .iter()
            .map(|s| (s.dim_before, s.dim_after))
            .collect();
        assert!(dims.iter().all(|(b, a)| a < b));
        assert_eq!(trace.iterations.last().unwrap().rank_wg, trace.final_dim);
    }

    #[test]
    fn impulse_response_is_markov_sequence() {
        let r = random(4, 1, 2, 0.7, 14);
        let mut u = vec![0.0; 8];
        u[0] = 1.0;
        let y = simulate(&r, &TimeSeries::scalar(u).unwrap(), None).unwrap();
        let g = markov_parameters(&r, 8).unwrap();
        assert_eq!(y.origin_index, 1);
        for k in 1..=8 {
            let yk = y.sample(k - 1);
            assert!((yk[0] - g[k - 1][(0, 0)]).abs() < 1e-14);
            assert!((yk[1] - g[k - 1][(1, 0)]).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_input_zero_output() {
        let r = random(4, 1, 1, 0.7, 15);
        let y = simulate(&r, &TimeSeries::scalar(vec![0.0; 10]).unwrap(), None).unwrap();
        assert!(y.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn simulate_is_linear() {
        let r = random(6, 2, 1, 0.8, 16);
        let mut rng = substream(17, 0);
        let u1: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u2: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sum: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| a + b).collect();
        let y1 = simulate(&r, &TimeSeries::new(2, u1).unwrap(), None).unwrap();
        let y2 = simulate(&r, &TimeSeries::new(2, u2).unwrap(), None).unwrap();
        let ys = simulate(&r, &TimeSeries::new(2, sum).unwrap(), None).unwrap();
        for k in 0..30 {
            assert!((ys.sample(k)[0] - y1.sample(k)[0] - y2.sample(k)[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn reduced_system_has_same_zero_state_response() {
        let r = random(5, 1, 1, 0.7, 18);
        let p = fixtures::padded(&r, 2, 2, 19);
        let (out, _) = reduce(&p, RankTolerance::default()).unwrap();
        let mut rng = substream(20, 0);
        let u =
            TimeSeries::scalar((0..300).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let y1 = simulate(&p, &u, None).unwrap();
        let y2 = simulate(&out, &u, None).unwrap();
        let worst = y1
            .values()
            .iter()
            .zip(y2.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6);
    }

    #[test]
    fn epsilon_realization_checks() {
        let r = random(4, 1, 1, 0.7, 21);
        let u = TimeSeries::scalar((0..40).map(|k| (k as f64 * 0.3).sin()).collect()).unwrap();
        let y = simulate(&r, &u, None).unwrap();
        let (ok, err) = check_epsilon_realization(&r, &r.c, &u, &y, 1e-12).unwrap();
        assert!(ok && err == 0.0);

        let delta = 0.01;
        let shifted = TimeSeries::scalar(y.values().iter().map(|v| v + delta).collect()).unwrap();
        let (ok, err) = check_epsilon_realization(&r, &r.c, &u, &shifted, 0.01).unwrap();
        assert!(!ok);
        assert!((err - delta * 40f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn stability_certificate() {
        let cert = random(4, 1, 1, 0.7, 22).stability(0.8);
        assert!(cert.stable && (cert.norm_a - 0.7).abs() < 1e-12);
        assert!(!random(4, 1, 1, 0.9, 22).stability(0.8).stable);
    }

    #[test]
    fn json_round_trip() {
        let r = random(3, 2, 1, 0.7, 23);
        let back = Realization::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        let (_, trace) = reduce(&fixtures::padded(&r, 1, 1, 24), RankTolerance::default()).unwrap();
        let json = serde_json::to_string(&trace).unwrap();
        assert_eq!(
            serde_json::from_str::<ReductionTrace>(&json).unwrap(),
            trace
        );
    }
}

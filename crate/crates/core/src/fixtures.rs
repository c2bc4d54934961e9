//! Realizations with known structure, for tests and benchmarks.

use rand::Rng;

use crate::numerics::{self, Matrix};
use crate::realization::Realization;
use crate::rng::substream;

/// Delay line `y[k] = u[k - tau]` of dimension `tau` with `||A||_2 = beta`.
///
/// `x_i[k+1] = beta * x_{i+1}[k]`, `x_tau[k+1] = g * u[k]`, `y = x_1`, with the
/// input gain `g = beta^(1 - tau)` so that the only non-zero Markov parameter is
/// `gamma_{tau-1} = 1`.
pub fn shift_register(tau: usize, beta: f64) -> Realization {
    assert!(tau >= 1, "delay must be at least one step");
    let mut a = Matrix::zeros(tau, tau);
    for i in 0..tau - 1 {
        a[(i, i + 1)] = beta;
    }
    let mut b = Matrix::zeros(tau, 1);
    b[(tau - 1, 0)] = beta.powi(1 - tau as i32);
    let mut c = Matrix::zeros(1, tau);
    c[(0, 0)] = 1.0;
    Realization::new(a, b, c).expect("well-formed delay line")
}

fn uniform(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn with_norm(m: Matrix, norm: f64) -> Matrix {
    let s = numerics::spectral_norm(&m);
    if s > 0.0 {
        m * (norm / s)
    } else {
        m
    }
}

/// Dense random realization with `||A||_2 = norm` and entries of `B`, `C`
/// uniform on `[-1, 1]`. Generic draws are controllable and observable.
pub fn random_stable(n: usize, p: usize, q: usize, norm: f64, seed: u64) -> Realization {
    let mut rng = substream(seed, 0);
    let a = with_norm(uniform(n, n, &mut rng), norm);
    let b = uniform(n, p, &mut rng);
    let c = uniform(q, n, &mut rng);
    Realization::new(a, b, c).expect("well-formed random realization")
}

/// Embeds `r` into dimension `r.dim + unreachable + unobservable`.
///
/// State is ordered `[reachable-and-observable (r), unreachable, unobservable]`:
///
/// ```text
///     [ A    A12  0   ]       [ B  ]
/// A = [ 0    A22  0   ],  B = [ 0  ],  C = [ C  C2  0 ]
///     [ A31  A32  A33 ]       [ B3 ]
/// ```
///
/// The unreachable block feeds the original states and is seen by the output
/// but never excited; the unobservable block is driven but never seen. The
/// Markov parameters equal those of `r`, and the padded system's `||A||_2`
/// stays below `max(||A_r||_2, 0.1) * 1.5`.
pub fn padded(r: &Realization, unreachable: usize, unobservable: usize, seed: u64) -> Realization {
    let n = r.dim;
    let (p, q) = (r.b.ncols(), r.c.nrows());
    let total = n + unreachable + unobservable;
    let mut rng = substream(seed, 1);
    let scale = 0.25 * numerics::spectral_norm(&r.a).max(0.1);

    let mut a = Matrix::zeros(total, total);
    let mut b = Matrix::zeros(total, p);
    let mut c = Matrix::zeros(q, total);
    a.view_mut((0, 0), (n, n)).copy_from(&r.a);
    b.rows_mut(0, n).copy_from(&r.b);
    c.columns_mut(0, n).copy_from(&r.c);

    let u0 = n;
    let o0 = n + unreachable;
    if unreachable > 0 {
        let a12 = with_norm(uniform(n, unreachable, &mut rng), scale);
        let a22 = with_norm(uniform(unreachable, unreachable, &mut rng), scale);
        a.view_mut((0, u0), (n, unreachable)).copy_from(&a12);
        a.view_mut((u0, u0), (unreachable, unreachable))
            .copy_from(&a22);
        let c2 = uniform(q, unreachable, &mut rng);
        c.columns_mut(u0, unreachable).copy_from(&c2);
    }
    if unobservable > 0 {
        let a3 = with_norm(uniform(unobservable, o0, &mut rng), scale);
        let a33 = with_norm(uniform(unobservable, unobservable, &mut rng), scale);
        a.view_mut((o0, 0), (unobservable, o0)).copy_from(&a3);
        a.view_mut((o0, o0), (unobservable, unobservable))
            .copy_from(&a33);
        let b3 = uniform(unobservable, p, &mut rng);
        b.rows_mut(o0, unobservable).copy_from(&b3);
    }
    Realization::new(a, b, c).expect("well-formed padded realization")
}

/// `r` plus `extra` states that are fully decoupled: no input drives them, the
/// output ignores them, and they do not interact with the original states.
pub fn decoupled_padding(r: &Realization, extra: usize, seed: u64) -> Realization {
    let n = r.dim;
    let total = n + extra;
    let mut rng = substream(seed, 2);
    let mut a = Matrix::zeros(total, total);
    a.view_mut((0, 0), (n, n)).copy_from(&r.a);
    if extra > 0 {
        let tail = with_norm(
            uniform(extra, extra, &mut rng),
            0.5 * numerics::spectral_norm(&r.a).max(0.1),
        );
        a.view_mut((n, n), (extra, extra)).copy_from(&tail);
    }
    let mut b = Matrix::zeros(total, r.b.ncols());
    b.rows_mut(0, n).copy_from(&r.b);
    let mut c = Matrix::zeros(r.c.nrows(), total);
    c.columns_mut(0, n).copy_from(&r.c);
    Realization::new(a, b, c).expect("well-formed padded realization")
}

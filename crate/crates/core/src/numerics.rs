//! Dense linear-algebra primitives.
//!
//! Everything rank-related goes through the singular value decomposition so
//! that "rank" always means "number of singular values above a relative
//! threshold".

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative singular-value cutoff used by [`numerical_rank`] and
/// [`orthonormal_basis`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct RankTolerance(f64);

impl RankTolerance {
    pub const DEFAULT: f64 = 1e-8;

    pub fn new(relative_threshold: f64) -> Result<Self> {
        if relative_threshold > 0.0 && relative_threshold < 1.0 {
            Ok(Self(relative_threshold))
        } else {
            Err(Error::invalid(
                "relative_threshold",
                format!("must lie in (0, 1), got {relative_threshold}"),
            ))
        }
    }

    pub fn relative_threshold(self) -> f64 {
        self.0
    }
}

impl Default for RankTolerance {
    fn default() -> Self {
        Self(Self::DEFAULT)
    }
}

impl TryFrom<f64> for RankTolerance {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<RankTolerance> for f64 {
    fn from(t: RankTolerance) -> f64 {
        t.0
    }
}

/// Checks the matrix invariants: non-empty and every entry finite.
pub fn validate(m: &Matrix, context: &'static str) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::EmptyMatrix {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if !m[(r, c)].is_finite() {
                return Err(Error::NonFinite {
                    context,
                    row: r,
                    col: c,
                });
            }
        }
    }
    Ok(())
}

/// Builds a matrix from row-major entries, enforcing the matrix invariants.
pub fn from_row_major(rows: usize, cols: usize, entries: &[f64]) -> Result<Matrix> {
    if entries.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            context: "row-major entries",
            expected: rows * cols,
            found: entries.len(),
        });
    }
    let m = Matrix::from_row_slice(rows, cols, entries);
    validate(&m, "from_row_major")?;
    Ok(m)
}

pub fn to_row_major(m: &Matrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        out.extend(m.row(r).iter().copied());
    }
    out
}

fn to_faer(m: &Matrix) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin SVD `m = U diag(s) V^T` with `s` in descending order.
fn thin_svd(m: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
    let svd = to_faer(m).thin_svd().map_err(|_| Error::SvdNoConvergence)?;
    let s = svd.S().column_vector().iter().copied().collect();
    Ok((from_faer(svd.U()), s, from_faer(svd.V())))
}

/// Singular values in descending order.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s = to_faer(m)
        .singular_values()
        .unwrap_or_else(|_| vec![f64::NAN; m.nrows().min(m.ncols())]);
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Matrix 2-norm (largest singular value).
pub fn spectral_norm(m: &Matrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

fn rank_from_sorted(s: &[f64], tol: RankTolerance) -> usize {
    let smax = match s.first() {
        Some(&v) if v > 0.0 => v,
        _ => return 0,
    };
    let cutoff = tol.relative_threshold() * smax;
    s.iter().take_while(|&&v| v > cutoff).count()
}

/// Number of singular values strictly above `tol * sigma_max`.
pub fn numerical_rank(m: &Matrix, tol: RankTolerance) -> usize {
    rank_from_sorted(&singular_values(m), tol)
}

/// Orthonormal basis of the numerically significant column space of `m`.
///
/// The returned matrix has `numerical_rank(m, tol)` columns, ordered by
/// decreasing singular value.
pub fn orthonormal_basis(m: &Matrix, tol: RankTolerance) -> Result<Matrix> {
    let (u, s, _) = thin_svd(m)?;
    let rank = rank_from_sorted(&s, tol);
    if rank == 0 {
        return Err(Error::EmptyColumnSpace);
    }
    Ok(u.columns(0, rank).into_owned())
}

/// Ridge regression `argmin ||X W - Y||_F^2 + lambda ||W||_F^2`.
///
/// `regressors` is samples x features and `targets` is samples x outputs; the
/// result is features x outputs. Solved through the thin SVD of the
/// regressors, `W = V diag(s / (s^2 + lambda)) U^T Y`. With `lambda == 0` this
/// is the minimum-norm least-squares solution (pseudo-inverse with the usual
/// `eps * max(m, n) * s_max` cutoff), so rank-deficient designs never abort.
pub fn ridge_solve(regressors: &Matrix, targets: &Matrix, lambda: f64) -> Result<Matrix> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(
            "lambda",
            format!("must be finite and >= 0, got {lambda}"),
        ));
    }
    if regressors.nrows() == 0 {
        return Err(Error::SeriesTooShort { needed: 1, got: 0 });
    }
    if regressors.nrows() != targets.nrows() {
        return Err(Error::DimensionMismatch {
            context: "ridge_solve sample count",
            expected: regressors.nrows(),
            found: targets.nrows(),
        });
    }
    validate(regressors, "ridge_solve regressors")?;
    validate(targets, "ridge_solve targets")?;

    let (m, n) = regressors.shape();
    let (u, s, v) = thin_svd(regressors)?;
    let smax = s.iter().copied().fold(0.0, f64::max);
    let cutoff = f64::EPSILON * (m.max(n) as f64) * smax;

    // U^T Y, then scale each row by the filter factor, then V.
    let mut projected = u.transpose() * targets;
    for (i, &si) in s.iter().enumerate() {
        let factor = if lambda == 0.0 {
            if si > cutoff {
                1.0 / si
            } else {
                0.0
            }
        } else {
            si / (si * si + lambda)
        };
        projected.row_mut(i).scale_mut(factor);
    }
    Ok(v * projected)
}

/// JSON form of a matrix: dimensions plus row-major entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixDoc {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&Matrix> for MatrixDoc {
    fn from(m: &Matrix) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: to_row_major(m),
        }
    }
}

impl TryFrom<MatrixDoc> for Matrix {
    type Error = Error;

    fn try_from(doc: MatrixDoc) -> Result<Self> {
        from_row_major(doc.rows, doc.cols, &doc.data)
    }
}

/// `serde(with = "row_major")` adapter for [`Matrix`] fields.
pub mod row_major {
    use super::{Matrix, MatrixDoc};
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        MatrixDoc::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let doc = MatrixDoc::deserialize(d)?;
        Matrix::try_from(doc).map_err(D::Error::custom)
    }

    pub mod option {
        use super::{Matrix, MatrixDoc};
        use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

        pub fn serialize<S: Serializer>(m: &Option<Matrix>, s: S) -> Result<S::Ok, S::Error> {
            m.as_ref().map(MatrixDoc::from).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Matrix>, D::Error> {
            match Option::<MatrixDoc>::deserialize(d)? {
                Some(doc) => Matrix::try_from(doc).map(Some).map_err(D::Error::custom),
                None => Ok(None),
            }
        }
    }
}

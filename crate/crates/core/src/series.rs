//! Multivariate time series with CSV interchange.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::ops::Range;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};

/// Ordered sequence of `dim`-dimensional samples.
///
/// Sample `i` carries the absolute index `origin_index + i`, which is what the
/// `k` column of the CSV form holds.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    dim: usize,
    data: Vec<f64>,
    pub origin_index: i64,
    pub meta: BTreeMap<String, String>,
}

impl TimeSeries {
    /// Series from row-major samples (`data.len()` must be a multiple of `dim`).
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "time series dimension must be >= 1"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                context: "time series samples",
                expected: dim,
                found: data.len() % dim,
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "time series",
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(Self {
            dim,
            data,
            origin_index: 0,
            meta: BTreeMap::new(),
        })
    }

    pub fn scalar(values: Vec<f64>) -> Result<Self> {
        Self::new(1, values)
    }

    pub fn from_samples<S: AsRef<[f64]>>(samples: &[S]) -> Result<Self> {
        let dim = samples.first().map(|s| s.as_ref().len()).ok_or_else(|| {
            Error::invalid("samples", "cannot infer dimension of an empty series")
        })?;
        let mut data = Vec::with_capacity(dim * samples.len());
        for s in samples {
            let s = s.as_ref();
            if s.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: "time series sample",
                    expected: dim,
                    found: s.len(),
                });
            }
            data.extend_from_slice(s);
        }
        Self::new(dim, data)
    }

    /// Rows of `m` as samples.
    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        Self::new(m.ncols(), crate::numerics::to_row_major(m))
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_owned(), value.to_string());
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn sample(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn sample_vector(&self, k: usize) -> Vector {
        Vector::from_column_slice(self.sample(k))
    }

    pub fn samples(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    /// Samples `range`, with the origin shifted so absolute indices are kept.
    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        if range.start > range.end || range.end > self.len() {
            return Err(Error::SeriesTooShort {
                needed: range.end,
                got: self.len(),
            });
        }
        Ok(Self {
            dim: self.dim,
            data: self.data[range.start * self.dim..range.end * self.dim].to_vec(),
            origin_index: self.origin_index + range.start as i64,
            meta: self.meta.clone(),
        })
    }

    /// len x dim matrix of the samples.
    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_row_slice(self.len(), self.dim, &self.data)
    }

    /// Scalar projection onto coordinate `index`, keeping length, origin and meta.
    pub fn component(&self, index: usize) -> Result<Self> {
        if index >= self.dim {
            return Err(Error::invalid(
                "index",
                format!("component {index} out of range for dimension {}", self.dim),
            ));
        }
        Ok(Self {
            dim: 1,
            data: self.samples().map(|s| s[index]).collect(),
            origin_index: self.origin_index,
            meta: self.meta.clone(),
        }
        .with_meta("component", index))
    }

    /// Writes `k,u_0,...,u_{p-1}` with 17 significant digits and LF endings.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut header = vec!["k".to_owned()];
        header.extend((0..self.dim).map(|i| format!("u_{i}")));
        w.write_record(&header)?;
        for (i, s) in self.samples().enumerate() {
            let mut rec = Vec::with_capacity(self.dim + 1);
            rec.push((self.origin_index + i as i64).to_string());
            rec.extend(s.iter().map(|&v| format_float(v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(input);
        let header = r.headers()?.clone();
        if header.len() < 2 || &header[0] != "k" {
            return Err(Error::Malformed(
                "time series CSV header must start with `k,u_0`".into(),
            ));
        }
        for (i, name) in header.iter().skip(1).enumerate() {
            if name != format!("u_{i}") {
                return Err(Error::Malformed(format!(
                    "time series CSV column {} should be `u_{i}`, found `{name}`",
                    i + 1
                )));
            }
        }
        let dim = header.len() - 1;
        let mut data = Vec::new();
        let mut origin = None;
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let k: i64 = rec[0]
                .trim()
                .parse()
                .map_err(|_| Error::Malformed(format!("row {row}: bad index `{}`", &rec[0])))?;
            let origin = *origin.get_or_insert(k);
            if k != origin + row as i64 {
                return Err(Error::Malformed(format!(
                    "row {row}: index {k} is not consecutive"
                )));
            }
            for field in rec.iter().skip(1) {
                data.push(
                    field
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Malformed(format!("row {row}: bad value `{field}`")))?,
                );
            }
        }
        let mut ts = Self::new(dim, data)?;
        ts.origin_index = origin.unwrap_or(0);
        Ok(ts)
    }
}

/// 17 significant digits in scientific notation; parses back to the same bits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

//! Dense complex matrices, block stacking and observed trace moments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, BufRead};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::calculus::StackingScheme;
use crate::error::{Error, Result};
use crate::expr::MomentValues;
use crate::partition::PartitionIndex;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrixBuffer {
    data: DMatrix<Complex64>,
}

impl ComplexMatrixBuffer {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            data: DMatrix::zeros(rows, cols),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            data: DMatrix::identity(n, n),
        }
    }

    /// `rows × cols` matrix with `diag` on the main diagonal.
    pub fn from_diagonal(rows: usize, cols: usize, diag: &[f64]) -> Result<Self> {
        if diag.len() > rows.min(cols) {
            return Err(Error::input(format!(
                "{} diagonal entries do not fit a {rows}x{cols} matrix",
                diag.len()
            )));
        }
        let mut m = Self::zeros(rows, cols);
        for (i, &d) in diag.iter().enumerate() {
            m.data[(i, i)] = Complex64::new(d, 0.0);
        }
        Ok(m)
    }

    /// Row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::input(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Ok(Self {
            data: DMatrix::from_row_slice(rows, cols, entries),
        })
    }

    pub fn from_matrix(data: DMatrix<Complex64>) -> Self {
        Self { data }
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.data[(row, col)] = value;
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.data
    }

    pub fn add(&self, other: &ComplexMatrixBuffer) -> Result<ComplexMatrixBuffer> {
        self.check_same_shape(other)?;
        Ok(Self::from_matrix(&self.data + &other.data))
    }

    pub fn scale(&self, factor: f64) -> ComplexMatrixBuffer {
        Self::from_matrix(&self.data * Complex64::new(factor, 0.0))
    }

    pub fn mul(&self, other: &ComplexMatrixBuffer) -> Result<ComplexMatrixBuffer> {
        if self.cols() != other.rows() {
            return Err(Error::input(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows(),
                self.cols(),
                other.rows(),
                other.cols()
            )));
        }
        Ok(Self::from_matrix(&self.data * &other.data))
    }

    fn check_same_shape(&self, other: &ComplexMatrixBuffer) -> Result<()> {
        if self.data.shape() != other.data.shape() {
            return Err(Error::input(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.rows(),
                self.cols(),
                other.rows(),
                other.cols()
            )));
        }
        Ok(())
    }

    /// Parses the text format: `rows cols` on the first line, then one line
    /// per row holding `2·cols` reals (alternating real and imaginary parts).
    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader
            .lines()
            .map(|l| l.map_err(|e| Error::Format(e.to_string())))
            .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty input".into()))??;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::Format(format!("bad dimension '{t}'")))
            })
            .collect::<Result<_>>()?;
        let [rows, cols] = dims[..] else {
            return Err(Error::Format(format!(
                "header must be 'rows cols', got '{header}'"
            )));
        };
        if rows == 0 || cols == 0 {
            return Err(Error::Format("dimensions must be positive".into()));
        }
        let mut entries = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| Error::Format(format!("missing row {}", r + 1)))??;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse()
                        .map_err(|_| Error::Format(format!("bad number '{t}'")))
                })
                .collect::<Result<_>>()?;
            if vals.len() != 2 * cols {
                return Err(Error::Format(format!(
                    "row {} has {} numbers, expected {}",
                    r + 1,
                    vals.len(),
                    2 * cols
                )));
            }
            entries.extend(vals.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])));
        }
        if let Some(extra) = lines.next() {
            extra?;
            return Err(Error::Format("trailing data after last row".into()));
        }
        Self::from_row_major(rows, cols, &entries)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        Self::read_text(io::BufReader::new(file))
    }

    /// Inverse of [`read_text`](Self::read_text); uses shortest round-trip
    /// float formatting.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.rows(), self.cols());
        for r in 0..self.rows() {
            let row: Vec<String> = (0..self.cols())
                .flat_map(|c| {
                    let z = self.get(r, c);
                    [format!("{:?}", z.re), format!("{:?}", z.im)]
                })
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }
}

/// Order in which observations fill the block grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FillOrder {
    /// Observation `block_row · L2 + block_col`.
    #[default]
    RowMajor,
    /// Observation `block_col · L1 + block_row`.
    ColumnMajor,
}

/// Stacks `L1 · L2` equally shaped observations into the
/// `(n L1) × (N L2)` compound matrix, row-major.
pub fn stack(
    observations: &[ComplexMatrixBuffer],
    scheme: StackingScheme,
) -> Result<ComplexMatrixBuffer> {
    stack_with_order(observations, scheme, FillOrder::RowMajor)
}

pub fn stack_with_order(
    observations: &[ComplexMatrixBuffer],
    scheme: StackingScheme,
    order: FillOrder,
) -> Result<ComplexMatrixBuffer> {
    let (l1, l2) = (scheme.l1() as usize, scheme.l2() as usize);
    if observations.len() != l1 * l2 {
        return Err(Error::input(format!(
            "stacking {l1}x{l2} needs {} observations, got {}",
            l1 * l2,
            observations.len()
        )));
    }
    let (n, big_n) = (observations[0].rows(), observations[0].cols());
    if observations
        .iter()
        .any(|o| o.rows() != n || o.cols() != big_n)
    {
        return Err(Error::input("all observations must share one shape"));
    }
    let mut out = DMatrix::zeros(n * l1, big_n * l2);
    for br in 0..l1 {
        for bc in 0..l2 {
            let idx = match order {
                FillOrder::RowMajor => br * l2 + bc,
                FillOrder::ColumnMajor => bc * l1 + br,
            };
            out.view_mut((br * n, bc * big_n), (n, big_n))
                .copy_from(observations[idx].as_matrix());
        }
    }
    Ok(ComplexMatrixBuffer::from_matrix(out))
}

/// `tr(((1/col_norm) Y Yᴴ)^q)` for `q = 1..=max_order`, with `tr`
/// normalized by the row count of `Y`.
///
/// Works on the Gram matrix of the smaller side.
pub fn trace_powers(y: &ComplexMatrixBuffer, col_norm: f64, max_order: usize) -> Vec<f64> {
    assert!(col_norm > 0.0, "column normalization must be positive");
    let m = y.as_matrix();
    let gram = if m.nrows() <= m.ncols() {
        m * m.adjoint()
    } else {
        m.adjoint() * m
    };
    let gram = gram.map(|z| z / col_norm);
    let rows = m.nrows() as f64;
    let mut out = Vec::with_capacity(max_order);
    let mut power = gram.clone();
    for q in 1..=max_order {
        if q > 1 {
            power = &power * &gram;
        }
        out.push(power.trace().re / rows);
    }
    out
}

/// Observed mixed moments for each partition; mixed partitions are products
/// of the single traces of the same matrix.
pub fn gram_moments(
    y: &ComplexMatrixBuffer,
    col_norm: f64,
    partitions: &[PartitionIndex],
) -> BTreeMap<PartitionIndex, f64> {
    let max = partitions
        .iter()
        .flat_map(|p| p.parts().first().copied())
        .max()
        .unwrap_or(0) as usize;
    let singles = MomentValues::from_singles(&trace_powers(y, col_norm, max));
    partitions
        .iter()
        .map(|p| (p.clone(), singles.get(p).expect("all orders computed")))
        .collect()
}

/// Single-trace moments `1..=max_order` as [`MomentValues`].
pub fn moment_values(y: &ComplexMatrixBuffer, col_norm: f64, max_order: usize) -> MomentValues {
    MomentValues::from_singles(&trace_powers(y, col_norm, max_order))
}

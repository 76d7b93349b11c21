//! Dense complex matrix arithmetic.
//!
//! Everything downstream (channel assembly, precoding, the network forward
//! pass) works on small dense complex matrices in double precision, so this
//! module keeps a single owned row-major representation and a handful of
//! operations: products, LU factorization with partial pivoting, left/right
//! linear solves, a least-squares pseudo-inverse and a power-iteration
//! spectral-norm estimate.

mod lu;
mod pinv;

pub use lu::{lu_factor, LuFactorization, SolveSide};
pub use pinv::pinv_left;

use num_complex::Complex64;
use thiserror::Error;

/// Errors reported by matrix operations.
#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("dimension mismatch in {op}: left is {left_rows}x{left_cols}, right is {right_rows}x{right_cols}")]
    DimensionMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("operation {op} requires a square matrix, got {rows}x{cols}")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("matrix is singular to working precision (pivot {pivot_magnitude:.3e} at step {step}, threshold {threshold:.3e})")]
    Singular {
        step: usize,
        pivot_magnitude: f64,
        threshold: f64,
    },
    #[error("matrix is rank deficient: estimated rank {estimated_rank} of {expected}")]
    RankDeficient {
        estimated_rank: usize,
        expected: usize,
    },
    #[error("non-finite entry produced by {op}")]
    NonFinite { op: &'static str },
}

/// Dense row-major complex matrix in double precision.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Build from a row-major entry vector. Panics if the length does not
    /// match `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, entries: Vec<Complex64>) -> Self {
        assert_eq!(
            entries.len(),
            rows * cols,
            "entry count {} does not match {}x{}",
            entries.len(),
            rows,
            cols
        );
        Self {
            rows,
            cols,
            entries,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self {
            rows,
            cols,
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj_transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_same_shape("add", other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            entries,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_same_shape("sub", other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            entries,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// trace(self * selfᴴ), i.e. the squared Frobenius norm as a real number.
    pub fn gram_trace(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.entries
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    fn check_same_shape(&self, op: &'static str, other: &Self) -> Result<(), LinalgError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(LinalgError::DimensionMismatch {
                op,
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: other.rows,
                right_cols: other.cols,
            });
        }
        Ok(())
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.entries[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.entries[i * self.cols + j]
    }
}

/// Complex matrix product `a * b`.
pub fn cmatmul(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    if a.cols != b.rows {
        return Err(LinalgError::DimensionMismatch {
            op: "cmatmul",
            left_rows: a.rows,
            left_cols: a.cols,
            right_rows: b.rows,
            right_cols: b.cols,
        });
    }
    let mut out = ComplexMatrix::zeros(a.rows, b.cols);
    // i-k-j order so the inner loop runs over contiguous rows of b and out.
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a[(i, k)];
            if aik.re == 0.0 && aik.im == 0.0 {
                continue;
            }
            let b_row = b.row(k);
            let out_row = out.row_mut(i);
            for j in 0..b.cols {
                out_row[j] += aik * b_row[j];
            }
        }
    }
    Ok(out)
}

/// Power-iteration estimate of the largest singular value.
///
/// Iterates `v <- normalize(aᴴ a v)` from a fixed pseudo-random start so the
/// result is deterministic, and returns `|a v|` after the final step. A zero
/// matrix yields exactly zero.
pub fn spectral_norm(a: &ComplexMatrix, iters: usize) -> f64 {
    assert!(iters >= 1, "spectral_norm requires at least one iteration");
    if a.rows == 0 || a.cols == 0 {
        return 0.0;
    }
    // Fixed full-spectrum start vector; an LCG keeps it reproducible without
    // pulling in an RNG.
    let mut state = 0x9e37_79b9_7f4a_7c15u64 ^ ((a.rows as u64) << 32 | a.cols as u64);
    let mut next = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut v: Vec<Complex64> = (0..a.cols)
        .map(|_| Complex64::new(next(), next()))
        .collect();

    let mut av = vec![Complex64::new(0.0, 0.0); a.rows];
    for _ in 0..iters {
        // av = a * v
        for (i, slot) in av.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, vj) in v.iter().enumerate() {
                acc += a[(i, j)] * vj;
            }
            *slot = acc;
        }
        // v = aᴴ * av
        for (j, slot) in v.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, avi) in av.iter().enumerate() {
                acc += a[(i, j)].conj() * avi;
            }
            *slot = acc;
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        for z in v.iter_mut() {
            *z /= norm;
        }
    }
    for (i, slot) in av.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, vj) in v.iter().enumerate() {
            acc += a[(i, j)] * vj;
        }
        *slot = acc;
    }
    av.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

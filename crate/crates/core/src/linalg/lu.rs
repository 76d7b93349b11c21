//! LU factorization with partial pivoting and left/right solves.

use num_complex::Complex64;

use super::{ComplexMatrix, LinalgError};

/// Relative pivot threshold below which a matrix is declared singular.
const PIVOT_THRESHOLD: f64 = 1e-14;

/// Which equation system a solve targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveSide {
    /// Solve `A X = B`.
    Left,
    /// Solve `X A = B`.
    Right,
}

/// Packed LU factorization `P A = L U` of a square matrix.
#[derive(Debug, Clone)]
pub struct LuFactorization {
    lu: ComplexMatrix,
    pivots: Vec<usize>,
    sign: i32,
    threshold: f64,
}

/// Factor a square matrix with partial pivoting.
///
/// A pivot of magnitude below `1e-14 * max|entry|` reports the matrix as
/// singular to working precision.
pub fn lu_factor(a: &ComplexMatrix) -> Result<LuFactorization, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            op: "lu_factor",
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    let threshold = PIVOT_THRESHOLD * a.max_abs();

    // The elimination runs on split real/imaginary planes: the inner update
    // then works on contiguous f64 slices, which vectorizes far better than
    // interleaved complex pairs.
    let mut re = vec![0.0f64; n * n];
    let mut im = vec![0.0f64; n * n];
    for (idx, z) in a.entries().iter().enumerate() {
        re[idx] = z.re;
        im[idx] = z.im;
    }

    let mut pivots = vec![0usize; n];
    let mut sign = 1i32;

    for k in 0..n {
        // pivot search on |a[i][k]|^2
        let mut best = k;
        let mut best_mag = re[k * n + k] * re[k * n + k] + im[k * n + k] * im[k * n + k];
        for i in (k + 1)..n {
            let mag = re[i * n + k] * re[i * n + k] + im[i * n + k] * im[i * n + k];
            if mag > best_mag {
                best_mag = mag;
                best = i;
            }
        }
        pivots[k] = best;
        if best != k {
            sign = -sign;
            for j in 0..n {
                re.swap(k * n + j, best * n + j);
                im.swap(k * n + j, best * n + j);
            }
        }
        let pivot_mag = best_mag.sqrt();
        if pivot_mag <= threshold {
            return Err(LinalgError::Singular {
                step: k,
                pivot_magnitude: pivot_mag,
                threshold,
            });
        }

        let piv = Complex64::new(re[k * n + k], im[k * n + k]);
        let inv = piv.finv();
        for i in (k + 1)..n {
            let l = Complex64::new(re[i * n + k], im[i * n + k]) * inv;
            re[i * n + k] = l.re;
            im[i * n + k] = l.im;
            if l.re == 0.0 && l.im == 0.0 {
                continue;
            }
            let (head_re, tail_re) = re.split_at_mut(i * n);
            let (head_im, tail_im) = im.split_at_mut(i * n);
            let row_k_re = &head_re[k * n + k + 1..k * n + n];
            let row_k_im = &head_im[k * n + k + 1..k * n + n];
            let row_i_re = &mut tail_re[k + 1..n];
            let row_i_im = &mut tail_im[k + 1..n];
            for j in 0..row_k_re.len() {
                let ur = row_k_re[j];
                let ui = row_k_im[j];
                row_i_re[j] -= l.re * ur - l.im * ui;
                row_i_im[j] -= l.re * ui + l.im * ur;
            }
        }
    }

    let entries: Vec<Complex64> = re
        .iter()
        .zip(&im)
        .map(|(&r, &i)| Complex64::new(r, i))
        .collect();
    Ok(LuFactorization {
        lu: ComplexMatrix::from_vec(n, n, entries),
        pivots,
        sign,
        threshold,
    })
}

impl LuFactorization {
    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    /// Packed `L \ U` storage (unit-lower L below the diagonal, U on and
    /// above it).
    pub fn packed(&self) -> &ComplexMatrix {
        &self.lu
    }

    /// Row-interchange record: step `k` swapped rows `k` and `pivots[k]`.
    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Permutation sign, `+1` for an even number of swaps.
    pub fn sign(&self) -> i32 {
        self.sign
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Solve `A X = B` or `X A = B` against this factorization.
    pub fn solve(&self, b: &ComplexMatrix, side: SolveSide) -> Result<ComplexMatrix, LinalgError> {
        match side {
            SolveSide::Left => self.solve_left(b),
            SolveSide::Right => self.solve_right(b),
        }
    }

    /// Solve `A X = B` where `B` is `n x k`.
    pub fn solve_left(&self, b: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
        let n = self.dim();
        if b.rows() != n {
            return Err(LinalgError::DimensionMismatch {
                op: "lu_solve(left)",
                left_rows: n,
                left_cols: n,
                right_rows: b.rows(),
                right_cols: b.cols(),
            });
        }
        let k = b.cols();
        let mut x = b.clone();
        // apply row interchanges
        for (step, &p) in self.pivots.iter().enumerate() {
            if p != step {
                for j in 0..k {
                    let tmp = x[(step, j)];
                    x[(step, j)] = x[(p, j)];
                    x[(p, j)] = tmp;
                }
            }
        }
        // forward substitution with unit-lower L
        for i in 1..n {
            for l in 0..i {
                let factor = self.lu[(i, l)];
                if factor.re == 0.0 && factor.im == 0.0 {
                    continue;
                }
                for j in 0..k {
                    let v = x[(l, j)];
                    x[(i, j)] -= factor * v;
                }
            }
        }
        // back substitution with U
        for i in (0..n).rev() {
            for l in (i + 1)..n {
                let factor = self.lu[(i, l)];
                if factor.re == 0.0 && factor.im == 0.0 {
                    continue;
                }
                for j in 0..k {
                    let v = x[(l, j)];
                    x[(i, j)] -= factor * v;
                }
            }
            let inv = self.lu[(i, i)].finv();
            for j in 0..k {
                x[(i, j)] *= inv;
            }
        }
        if !x.is_finite() {
            return Err(LinalgError::NonFinite {
                op: "lu_solve(left)",
            });
        }
        Ok(x)
    }

    /// Solve `X A = B` where `B` is `k x n`, via `Aᵀ Xᵀ = Bᵀ`.
    pub fn solve_right(&self, b: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
        let n = self.dim();
        if b.cols() != n {
            return Err(LinalgError::DimensionMismatch {
                op: "lu_solve(right)",
                left_rows: n,
                left_cols: n,
                right_rows: b.rows(),
                right_cols: b.cols(),
            });
        }
        let k = b.rows();
        // With P A = L U we have Aᵀ = Uᵀ Lᵀ P, so solve Uᵀ z = bᵀ (forward),
        // Lᵀ w = z (backward), then undo the permutation.
        let mut x = b.clone();
        // forward substitution with Uᵀ (lower triangular, non-unit diagonal),
        // operating on rows of x as columns of the transposed system
        for j in 0..n {
            let inv = self.lu[(j, j)].finv();
            for r in 0..k {
                let v = x[(r, j)] * inv;
                x[(r, j)] = v;
            }
            for l in (j + 1)..n {
                let factor = self.lu[(j, l)];
                if factor.re == 0.0 && factor.im == 0.0 {
                    continue;
                }
                for r in 0..k {
                    let v = x[(r, j)];
                    x[(r, l)] -= factor * v;
                }
            }
        }
        // back substitution with Lᵀ (upper triangular, unit diagonal)
        for j in (0..n).rev() {
            for l in 0..j {
                let factor = self.lu[(j, l)];
                if factor.re == 0.0 && factor.im == 0.0 {
                    continue;
                }
                for r in 0..k {
                    let v = x[(r, j)];
                    x[(r, l)] -= factor * v;
                }
            }
        }
        // undo row interchanges (columns of the right-solve unknown)
        for (step, &p) in self.pivots.iter().enumerate().rev() {
            if p != step {
                for r in 0..k {
                    let tmp = x[(r, step)];
                    x[(r, step)] = x[(r, p)];
                    x[(r, p)] = tmp;
                }
            }
        }
        if !x.is_finite() {
            return Err(LinalgError::NonFinite {
                op: "lu_solve(right)",
            });
        }
        Ok(x)
    }

    /// Solve `X Aᴴ = B` reusing this factorization of `A`, via `A Xᴴ = Bᴴ`.
    pub fn solve_right_conj_transpose(
        &self,
        b: &ComplexMatrix,
    ) -> Result<ComplexMatrix, LinalgError> {
        let xh = self.solve_left(&b.conj_transpose())?;
        Ok(xh.conj_transpose())
    }
}

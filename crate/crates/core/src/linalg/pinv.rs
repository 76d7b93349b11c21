//! Left pseudo-inverse of tall matrices via Householder QR.

use num_complex::Complex64;

use super::{ComplexMatrix, LinalgError};

/// Left pseudo-inverse `h⁺` of a tall full-column-rank matrix, so that
/// `h⁺ h = I`.
///
/// Uses an orthogonal-triangular factorization rather than normal equations;
/// rank is checked against the triangular diagonal and a deficiency is
/// reported with the estimated rank.
pub fn pinv_left(h: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    let n = h.rows();
    let m = h.cols();
    if n < m {
        return Err(LinalgError::DimensionMismatch {
            op: "pinv_left",
            left_rows: n,
            left_cols: m,
            right_rows: m,
            right_cols: m,
        });
    }

    let mut r = h.clone();
    // Householder vectors, one per column, each of length n - k.
    let mut reflectors: Vec<Vec<Complex64>> = Vec::with_capacity(m);
    let threshold = 1e-14 * h.max_abs();

    for k in 0..m {
        let mut v: Vec<Complex64> = (k..n).map(|i| r[(i, k)]).collect();
        let norm_x = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let alpha = v[0];
        let phase = if alpha.norm() > 0.0 {
            alpha / alpha.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let beta = -phase * norm_x;
        v[0] -= beta;
        let vsq = v.iter().map(|z| z.norm_sqr()).sum::<f64>();

        if vsq > 0.0 {
            // apply I - 2 v vᴴ / (vᴴ v) to the trailing columns
            for j in k..m {
                let mut dot = Complex64::new(0.0, 0.0);
                for (off, vi) in v.iter().enumerate() {
                    dot += vi.conj() * r[(k + off, j)];
                }
                let scale = dot * (2.0 / vsq);
                for (off, vi) in v.iter().enumerate() {
                    let delta = vi * scale;
                    r[(k + off, j)] -= delta;
                }
            }
        }
        // force the intended diagonal and clear the eliminated column
        r[(k, k)] = beta;
        for i in (k + 1)..n {
            r[(i, k)] = Complex64::new(0.0, 0.0);
        }
        reflectors.push(v);
    }

    let rank = (0..m).filter(|&k| r[(k, k)].norm() > threshold).count();
    if rank < m {
        return Err(LinalgError::RankDeficient {
            estimated_rank: rank,
            expected: m,
        });
    }

    // thin Q: apply reflectors in reverse order to [I_m; 0]
    let mut q = ComplexMatrix::zeros(n, m);
    for k in 0..m {
        q[(k, k)] = Complex64::new(1.0, 0.0);
    }
    for k in (0..m).rev() {
        let v = &reflectors[k];
        let vsq = v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if vsq == 0.0 {
            continue;
        }
        for j in 0..m {
            let mut dot = Complex64::new(0.0, 0.0);
            for (off, vi) in v.iter().enumerate() {
                dot += vi.conj() * q[(k + off, j)];
            }
            let scale = dot * (2.0 / vsq);
            for (off, vi) in v.iter().enumerate() {
                let delta = vi * scale;
                q[(k + off, j)] -= delta;
            }
        }
    }

    // back-substitute R X = Qᴴ, row by row from the bottom
    let mut x = q.conj_transpose(); // m x n
    for i in (0..m).rev() {
        for l in (i + 1)..m {
            let factor = r[(i, l)];
            if factor.re == 0.0 && factor.im == 0.0 {
                continue;
            }
            for j in 0..n {
                let v = x[(l, j)];
                x[(i, j)] -= factor * v;
            }
        }
        let inv = r[(i, i)].finv();
        for j in 0..n {
            x[(i, j)] *= inv;
        }
    }

    if !x.is_finite() {
        return Err(LinalgError::NonFinite { op: "pinv_left" });
    }
    Ok(x)
}

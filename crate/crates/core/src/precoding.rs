//! Weighted sum-rate evaluation, WMMSE precoding and baselines.
//!
//! The WMMSE iteration follows the standard MISO specialization: scalar MMSE
//! receive coefficients, MSE weights scaled by the rate weights, and a
//! precoder update whose power factor is found by bisection. Each full
//! iteration cannot decrease the weighted sum-rate, which the tests assert.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{cmatmul, lu_factor, ComplexMatrix, LinalgError};
use crate::risnet::PhaseConfiguration;

#[derive(Debug, Error)]
pub enum PrecodingError {
    #[error("invalid precoding input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Precoding matrix `V` (BS antennas x users) satisfying the transmit-power
/// budget.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecodingMatrix {
    pub v: ComplexMatrix,
}

impl PrecodingMatrix {
    pub fn transmit_power(&self) -> f64 {
        self.v.gram_trace()
    }
}

/// Convergence and bisection controls for [`wmmse_precoder`].
#[derive(Debug, Clone)]
pub struct WmmseConfig {
    pub max_iters: usize,
    /// Stop when the relative WSR change falls below this.
    pub rel_tol: f64,
    /// Relative power tolerance of the bisection.
    pub bisection_tol: f64,
    /// Growth factor for the bisection upper bound.
    pub mu_growth: f64,
}

impl Default for WmmseConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            rel_tol: 1e-5,
            bisection_tol: 1e-8,
            mu_growth: 2.0,
        }
    }
}

/// Outcome of a WMMSE run: the precoder, the per-iteration WSR trace and a
/// convergence flag.
#[derive(Debug, Clone)]
pub struct WmmseOutcome {
    pub precoder: PrecodingMatrix,
    pub wsr_trace: Vec<f64>,
    pub converged: bool,
}

/// Weighted sum-rate of the effective link matrix `L = C V`:
/// `sum_u w_u log2(1 + |l_uu|^2 / (sum_{v != u} |l_uv|^2 + sigma^2))`.
pub fn wsr_objective(
    c: &ComplexMatrix,
    v: &PrecodingMatrix,
    noise_power: f64,
    weights: &[f64],
) -> Result<f64, PrecodingError> {
    let users = c.rows();
    if weights.len() != users {
        return Err(PrecodingError::InvalidInput(format!(
            "{} weights for {} users",
            weights.len(),
            users
        )));
    }
    if noise_power <= 0.0 {
        return Err(PrecodingError::InvalidInput(
            "noise power must be positive".into(),
        ));
    }
    let l = cmatmul(c, &v.v)?;
    let mut objective = 0.0;
    for u in 0..users {
        let signal = l[(u, u)].norm_sqr();
        let mut interference = 0.0;
        for other in 0..users {
            if other != u {
                interference += l[(u, other)].norm_sqr();
            }
        }
        objective += weights[u] * (1.0 + signal / (interference + noise_power)).log2();
    }
    Ok(objective)
}

/// Maximum-ratio transmission: columns along the conjugated channel rows,
/// jointly scaled to the full power budget. Used as the WMMSE initializer.
pub fn mrt_precoder(
    c: &ComplexMatrix,
    power_budget: f64,
) -> Result<PrecodingMatrix, PrecodingError> {
    let users = c.rows();
    let antennas = c.cols();
    let total: f64 = c.gram_trace();
    if total <= 0.0 {
        return Err(PrecodingError::InvalidInput(
            "all-zero channel has no MRT direction".into(),
        ));
    }
    let scale = (power_budget / total).sqrt();
    let v = ComplexMatrix::from_fn(antennas, users, |m, u| c[(u, m)].conj() * scale);
    Ok(PrecodingMatrix { v })
}

/// One WMMSE precoder update given receive coefficients and MSE weights,
/// with `mu` the power regularizer.
fn wmmse_v_update(
    c: &ComplexMatrix,
    receive: &[Complex64],
    mse_weights: &[f64],
    mu: f64,
) -> Result<ComplexMatrix, PrecodingError> {
    let users = c.rows();
    let antennas = c.cols();
    // B = sum_j lambda_j |u_j|^2 c_j^H c_j + mu I
    let mut b = ComplexMatrix::zeros(antennas, antennas);
    for j in 0..users {
        let coeff = mse_weights[j] * receive[j].norm_sqr();
        for row in 0..antennas {
            for col in 0..antennas {
                b[(row, col)] += c[(j, row)].conj() * c[(j, col)] * coeff;
            }
        }
    }
    for diag in 0..antennas {
        b[(diag, diag)] += Complex64::new(mu, 0.0);
    }
    // v_k = lambda_k u_k^* B^{-1} c_k^H
    let rhs = ComplexMatrix::from_fn(antennas, users, |m, k| {
        c[(k, m)].conj() * (mse_weights[k] * receive[k].conj())
    });
    let solved = lu_factor(&b)?.solve_left(&rhs)?;
    Ok(solved)
}

/// Iterative WMMSE precoding with MRT initialization.
///
/// Each iteration updates the scalar MMSE receive coefficients, the MSE
/// weights `w_k / e_k`, and the precoder with the smallest `mu >= 0` meeting
/// the power budget (found by doubling then bisection). Non-convergence
/// within `max_iters` returns the last iterate with the flag cleared.
pub fn wmmse_precoder(
    c: &ComplexMatrix,
    weights: &[f64],
    noise_power: f64,
    power_budget: f64,
    cfg: &WmmseConfig,
) -> Result<WmmseOutcome, PrecodingError> {
    let users = c.rows();
    if weights.len() != users {
        return Err(PrecodingError::InvalidInput(format!(
            "{} weights for {} users",
            weights.len(),
            users
        )));
    }
    if noise_power <= 0.0 || power_budget <= 0.0 {
        return Err(PrecodingError::InvalidInput(
            "noise power and power budget must be positive".into(),
        ));
    }
    if cfg.max_iters == 0 || cfg.rel_tol <= 0.0 || cfg.bisection_tol <= 0.0 || cfg.mu_growth <= 1.0
    {
        return Err(PrecodingError::InvalidInput(
            "iteration, tolerance and growth controls must be positive (growth above 1)".into(),
        ));
    }

    let mut v = mrt_precoder(c, power_budget)?.v;
    let mut wsr_trace = vec![wsr_objective(
        c,
        &PrecodingMatrix { v: v.clone() },
        noise_power,
        weights,
    )?];
    let mut converged = false;

    for _ in 0..cfg.max_iters {
        let l = cmatmul(c, &v)?;
        // scalar MMSE receive coefficients and MSE weights
        let mut receive = Vec::with_capacity(users);
        let mut mse_weights = Vec::with_capacity(users);
        for k in 0..users {
            let mut total_power = noise_power;
            for j in 0..users {
                total_power += l[(k, j)].norm_sqr();
            }
            let u_k = l[(k, k)] / total_power;
            let e_k = 1.0 - l[(k, k)].norm_sqr() / total_power;
            receive.push(u_k);
            mse_weights.push(weights[k] / e_k);
        }

        // Smallest mu meeting the power budget. A singular system at
        // mu = 0 (rank-deficient Gram sum) means the unconstrained update
        // is unbounded, so the constraint is active and bisection applies.
        let try_mu = |mu: f64| -> Result<Option<(ComplexMatrix, f64)>, PrecodingError> {
            match wmmse_v_update(c, &receive, &mse_weights, mu) {
                Ok(candidate) => {
                    let power = candidate.gram_trace();
                    Ok(Some((candidate, power)))
                }
                Err(PrecodingError::Linalg(LinalgError::Singular { .. })) if mu == 0.0 => Ok(None),
                Err(e) => Err(e),
            }
        };
        let accepted = match try_mu(0.0)? {
            Some((candidate, power)) if power <= power_budget => Some(candidate),
            _ => None,
        };
        v = match accepted {
            Some(candidate) => candidate,
            None => {
                let mut hi = 1.0;
                let mut grow = 0;
                let mut best = loop {
                    if let Some((candidate, power)) = try_mu(hi)? {
                        if power <= power_budget {
                            break candidate;
                        }
                    }
                    hi *= cfg.mu_growth;
                    grow += 1;
                    assert!(grow < 200, "power bisection bracket failed to close");
                };
                let mut lo = if hi > 1.0 { hi / cfg.mu_growth } else { 0.0 };
                loop {
                    let mid = 0.5 * (lo + hi);
                    if let Some((candidate, power)) = try_mu(mid)? {
                        if power <= power_budget {
                            hi = mid;
                            best = candidate;
                        } else {
                            lo = mid;
                        }
                    } else {
                        lo = mid;
                    }
                    if (power_budget - best.gram_trace()).abs() <= cfg.bisection_tol * power_budget
                        || (hi - lo) <= f64::EPSILON * hi.max(1.0)
                    {
                        break;
                    }
                }
                best
            }
        };

        let wsr = wsr_objective(c, &PrecodingMatrix { v: v.clone() }, noise_power, weights)?;
        let prev = *wsr_trace.last().expect("trace is seeded");
        wsr_trace.push(wsr);
        if (wsr - prev).abs() <= cfg.rel_tol * prev.abs().max(1e-30) {
            converged = true;
            break;
        }
    }

    Ok(WmmseOutcome {
        precoder: PrecodingMatrix { v },
        wsr_trace,
        converged,
    })
}

/// Independent uniform phases on `[0, 2 pi)`.
pub fn random_phase_baseline(elements: usize, seed: u64) -> PhaseConfiguration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phases = (0..elements)
        .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
        .collect();
    PhaseConfiguration::new(phases).expect("uniform draws are finite")
}

//! Lyapunov certificate for the PD error dynamics and numerical checks of the
//! decay and boundedness inequalities along simulation traces.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::srb::{Matrix12, Vector12, Vector6};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("closed-loop matrix is not Hurwitz (max real part {0:.3e})")]
    NonHurwitz(f64),
    #[error("Lyapunov equation could not be solved")]
    Singular,
    #[error("Lyapunov solution is not positive definite")]
    NotPositiveDefinite,
    #[error("Q_L must be symmetric positive definite")]
    BadWeight,
    #[error("trace too short: need at least {0} samples")]
    ShortTrace(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovCertificate {
    pub a_m: Matrix12,
    pub q_l: Matrix12,
    pub p: Matrix12,
    pub lambda: f64,
    pub residual: f64,
}

impl LyapunovCertificate {
    /// Spectral norm of `P`.
    pub fn p_norm(&self) -> f64 {
        self.p.symmetric_eigenvalues().max()
    }
}

/// `A_m = [[0, I], [−K_P, −K_D]]` for diagonal gains.
pub fn closed_loop_matrix(kp: &Vector6, kd: &Vector6) -> Matrix12 {
    let mut a = Matrix12::zeros();
    for i in 0..6 {
        a[(i, 6 + i)] = 1.0;
        a[(6 + i, i)] = -kp[i];
        a[(6 + i, 6 + i)] = -kd[i];
    }
    a
}

/// Solves `AᵀP + PA = −Q` through the Kronecker-product linear system.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>, AnalysisError> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    let big = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = DVector::from_iterator(n * n, q.iter().map(|v| -v));
    let x = big.lu().solve(&rhs).ok_or(AnalysisError::Singular)?;
    let p = DMatrix::from_column_slice(n, n, x.as_slice());
    Ok((&p + p.transpose()) * 0.5)
}

pub fn build_certificate(kp: &Vector6, kd: &Vector6, q_l: &Matrix12) -> Result<LyapunovCertificate, AnalysisError> {
    if (q_l - q_l.transpose()).amax() > 1e-12 || q_l.cholesky().is_none() {
        return Err(AnalysisError::BadWeight);
    }
    let a_m = closed_loop_matrix(kp, kd);
    let max_re = a_m
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(max_re < -1e-12) {
        return Err(AnalysisError::NonHurwitz(max_re));
    }
    let a = DMatrix::from_column_slice(12, 12, a_m.as_slice());
    let q = DMatrix::from_column_slice(12, 12, q_l.as_slice());
    let p_dyn = solve_lyapunov(&a, &q)?;
    let p = Matrix12::from_column_slice(p_dyn.as_slice());
    if p.cholesky().is_none() {
        return Err(AnalysisError::NotPositiveDefinite);
    }
    let residual = (a_m.transpose() * p + p * a_m + q_l).amax();
    let lambda = q_l.symmetric_eigenvalues().min() / p.symmetric_eigenvalues().max();
    Ok(LyapunovCertificate { a_m, q_l: *q_l, p, lambda, residual })
}

/// One sample of a closed-loop trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecaySample {
    pub t: f64,
    pub e: Vector12,
    /// Nominal PD input.
    pub u: Vector6,
    /// Input realized by the force solution.
    pub u_star: Vector6,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub lambda: f64,
    pub epsilon_v: f64,
    pub samples: usize,
    pub violations: usize,
    pub violation_fraction: f64,
    pub post_transient_samples: usize,
    pub post_transient_violations: usize,
    pub post_transient_fraction: f64,
}

pub const SMOOTHING_WINDOW: usize = 5;

/// `ε_V = 2‖P‖ δ_η δ_Δ` with the δ constants taken as trace maxima.
pub fn decay_slack(trace: &[DecaySample], cert: &LyapunovCertificate) -> f64 {
    let d_eta = trace.iter().map(|s| s.e.norm()).fold(0.0, f64::max);
    let d_delta = trace.iter().map(|s| (s.u_star - s.u).norm()).fold(0.0, f64::max);
    2.0 * cert.p_norm() * d_eta * d_delta
}

/// Flags samples where `V̇ + λV > ε_V`, with `V = eᵀPe` smoothed over a
/// centred window and differentiated by central differences.
pub fn check_decay(
    trace: &[DecaySample],
    cert: &LyapunovCertificate,
    epsilon_v: Option<f64>,
    transient: f64,
) -> Result<DecayReport, AnalysisError> {
    let min_len = SMOOTHING_WINDOW + 2;
    if trace.len() < min_len {
        return Err(AnalysisError::ShortTrace(min_len));
    }
    let eps = epsilon_v.unwrap_or_else(|| decay_slack(trace, cert));
    let v: Vec<f64> = trace.iter().map(|s| s.e.dot(&(cert.p * s.e))).collect();
    let half = SMOOTHING_WINDOW / 2;
    let smooth: Vec<f64> = (0..v.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(v.len());
            v[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let (mut n, mut bad, mut n_post, mut bad_post) = (0, 0, 0, 0);
    for i in (half + 1)..(v.len() - half - 1) {
        let dt = trace[i + 1].t - trace[i - 1].t;
        if !(dt > 0.0) {
            continue;
        }
        let vdot = (smooth[i + 1] - smooth[i - 1]) / dt;
        let violated = vdot + cert.lambda * smooth[i] > eps;
        n += 1;
        bad += violated as usize;
        if trace[i].t >= transient {
            n_post += 1;
            bad_post += violated as usize;
        }
    }
    let frac = |b: usize, n: usize| if n == 0 { 0.0 } else { b as f64 / n as f64 };
    Ok(DecayReport {
        lambda: cert.lambda,
        epsilon_v: eps,
        samples: n,
        violations: bad,
        violation_fraction: frac(bad, n),
        post_transient_samples: n_post,
        post_transient_violations: bad_post,
        post_transient_fraction: frac(bad_post, n_post),
    })
}

/// Sample for the adaptive-error bound check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundSample {
    pub e_tilde: Vector12,
    /// `Bᵀ H̄ (F̂ − F)`: acceleration mismatch between reference and real
    /// force solutions.
    pub force_mismatch: Vector6,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    pub alpha_max: [f64; 6],
    pub beta_max: [f64; 6],
    /// Bounds on the rates of change of the true α, β.
    pub alpha_rate: f64,
    pub beta_rate: f64,
    /// Diagonal of the adaptation gain.
    pub gamma: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub delta_v_tilde: f64,
    pub epsilon_v_tilde: f64,
    pub e_tilde_ceiling: f64,
    pub alpha_tilde_ceiling: f64,
    pub beta_tilde_ceiling: f64,
    pub max_e_tilde: f64,
    pub violations: usize,
}

pub fn check_bounds(
    trace: &[BoundSample],
    cert: &LyapunovCertificate,
    c: &BoundConstants,
) -> BoundsReport {
    let norm6 = |v: &[f64; 6]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    // |α̂|, |α| ≤ α_max componentwise, so ‖α̃‖ ≤ 2‖α_max‖.
    let a_b = 2.0 * norm6(&c.alpha_max);
    let b_b = 2.0 * norm6(&c.beta_max);
    let gamma_max = c.gamma.iter().cloned().fold(0.0, f64::max);
    let gamma_min = c.gamma.iter().cloned().fold(f64::INFINITY, f64::min);
    let lambda = cert.lambda;
    let p_norm = cert.p_norm();
    let d_e = trace.iter().map(|s| s.e_tilde.norm()).fold(0.0, f64::max);
    let d_delta = trace.iter().map(|s| s.force_mismatch.norm()).fold(0.0, f64::max);
    let eps = 2.0 * p_norm * d_e * d_delta;
    let delta = 2.0 / gamma_min
        * (a_b * a_b + b_b * b_b + a_b * c.alpha_rate / lambda + b_b * c.beta_rate / lambda)
        + eps / lambda;
    let e_ceiling = (delta / p_norm).sqrt();
    let violations = trace.iter().filter(|s| s.e_tilde.norm() > e_ceiling).count();
    BoundsReport {
        delta_v_tilde: delta,
        epsilon_v_tilde: eps,
        e_tilde_ceiling: e_ceiling,
        alpha_tilde_ceiling: (gamma_max * delta).sqrt(),
        beta_tilde_ceiling: (gamma_max * delta).sqrt(),
        max_e_tilde: d_e,
        violations,
    }
}

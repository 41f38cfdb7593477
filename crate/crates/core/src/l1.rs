//! L1 adaptive core: projection-based adaptation of `θ̂ = α̂‖e‖ + β̂`, the
//! second-order low-pass filter producing `u_a = −C(s)θ̂`, and the reference
//! model propagation.

use crate::srb::{
    continuous_matrices_with, FootSet, InertiaRotation, Matrix12, RobotParams, RobotState,
    StanceForces, Vector12, Vector6,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveParams {
    /// Diagonal of Γ.
    pub gamma: Vector6,
    pub omega_n: f64,
    pub zeta: f64,
    pub alpha_max: Vector6,
    pub beta_max: Vector6,
    /// Width of the projection transition layer, as a fraction of the bound.
    pub epsilon: f64,
}

impl Default for AdaptiveParams {
    fn default() -> Self {
        AdaptiveParams {
            gamma: Vector6::new(1.0, 1.0, 5.0, 2.0, 5.0, 1.0) * 1e3,
            omega_n: 60.0,
            zeta: 0.7,
            alpha_max: Vector6::repeat(20.0),
            beta_max: Vector6::new(30.0, 30.0, 60.0, 40.0, 40.0, 40.0),
            epsilon: 0.1,
        }
    }
}

impl AdaptiveParams {
    pub fn validate(&self) -> Result<(), String> {
        if !self.gamma.iter().all(|g| *g > 0.0) {
            return Err("adaptation gains must be positive".into());
        }
        if !(self.omega_n > 0.0) || !(self.zeta > 0.0 && self.zeta < 2.0) {
            return Err("filter needs omega_n > 0 and 0 < zeta < 2".into());
        }
        if !self.alpha_max.iter().chain(self.beta_max.iter()).all(|b| *b > 0.0) {
            return Err("projection bounds must be positive".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err("projection epsilon must be in (0, 1)".into());
        }
        Ok(())
    }
}

/// Scalar projection: passes `y` through unless `θ` is in the outer layer
/// `[(1−ε)b, b]` and `y` points outward, in which case `y` is scaled linearly
/// down to zero at the bound.
pub fn projection(theta: f64, y: f64, bound: f64, epsilon: f64) -> f64 {
    let inner = (1.0 - epsilon) * bound;
    let depth = (theta.abs() - inner) / (epsilon * bound);
    if depth > 0.0 && theta * y > 0.0 {
        y * (1.0 - depth.min(1.0))
    } else {
        y
    }
}

/// Euler step of `θ̇ = Γ Proj(θ, y)`, clamped to the bound.
pub fn projection_update(
    current: &Vector6,
    y: &Vector6,
    bound: &Vector6,
    epsilon: f64,
    gamma: &Vector6,
    dt: f64,
) -> Vector6 {
    Vector6::from_fn(|j, _| {
        let step = gamma[j] * projection(current[j], y[j], bound[j], epsilon) * dt;
        (current[j] + step).clamp(-bound[j], bound[j])
    })
}

/// `y_β = −Bᵀ P ẽ` and `y_α = y_β ‖e‖`.
pub fn projection_functions(e_tilde: &Vector12, e: &Vector12, p: &Matrix12) -> (Vector6, Vector6) {
    let pe = p * e_tilde;
    let y_beta: Vector6 = -pe.fixed_rows::<6>(6);
    (y_beta * e.norm(), y_beta)
}

/// Bilinear-transform biquad of `ω²/(s² + 2ζωs + ω²)`, applied per channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowPassFilter {
    pub b: [f64; 3],
    /// Denominator `[1, a1, a2]`; only `a1`, `a2` stored.
    pub a: [f64; 2],
    pub s1: Vector6,
    pub s2: Vector6,
}

impl LowPassFilter {
    pub fn new(omega_n: f64, zeta: f64, dt: f64) -> Self {
        let k = 2.0 / dt;
        let w2 = omega_n * omega_n;
        let a0 = k * k + 2.0 * zeta * omega_n * k + w2;
        let a1 = 2.0 * (w2 - k * k) / a0;
        let a2 = (k * k - 2.0 * zeta * omega_n * k + w2) / a0;
        let b0 = w2 / a0;
        LowPassFilter {
            b: [b0, 2.0 * b0, b0],
            a: [a1, a2],
            s1: Vector6::zeros(),
            s2: Vector6::zeros(),
        }
    }

    /// `(Σb) / (1 + Σa)`.
    pub fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    pub fn step(&mut self, x: &Vector6) -> Vector6 {
        let y = x * self.b[0] + self.s1;
        self.s1 = x * self.b[1] - y * self.a[0] + self.s2;
        self.s2 = x * self.b[2] - y * self.a[1];
        y
    }

    pub fn reset(&mut self) {
        self.s1 = Vector6::zeros();
        self.s2 = Vector6::zeros();
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyEstimate {
    pub alpha: Vector6,
    pub beta: Vector6,
    pub theta: Vector6,
    pub u_a: Vector6,
    pub filter: LowPassFilter,
}

impl UncertaintyEstimate {
    pub fn new(params: &AdaptiveParams, dt: f64) -> Self {
        UncertaintyEstimate {
            alpha: Vector6::zeros(),
            beta: Vector6::zeros(),
            theta: Vector6::zeros(),
            u_a: Vector6::zeros(),
            filter: LowPassFilter::new(params.omega_n, params.zeta, dt),
        }
    }
}

/// One adaptation step: `ẽ = ê − e` drives α̂, β̂; θ̂ is recomputed and the
/// filter advanced to refresh `u_a`.
pub fn adaptation_tick(
    est: &UncertaintyEstimate,
    e_hat: &Vector12,
    e: &Vector12,
    p: &Matrix12,
    params: &AdaptiveParams,
    dt: f64,
) -> UncertaintyEstimate {
    let e_tilde = e_hat - e;
    let (y_a, y_b) = projection_functions(&e_tilde, e, p);
    let alpha = projection_update(&est.alpha, &y_a, &params.alpha_max, params.epsilon, &params.gamma, dt);
    let beta = projection_update(&est.beta, &y_b, &params.beta_max, params.epsilon, &params.gamma, dt);
    let theta = alpha * e.norm() + beta;
    let mut filter = est.filter;
    let u_a = filter.step(&(-theta));
    UncertaintyEstimate { alpha, beta, theta, u_a, filter }
}

/// Time derivative of the reference model
/// `Ẋ̂ = D X̂ + H̄ F̂ + B G + B·extra` (nominal parameters, yaw-only inertia,
/// real foot positions).
pub fn reference_derivative(
    x: &Vector12,
    f_hat: &StanceForces,
    extra: &Vector6,
    feet: &FootSet,
    nominal: &RobotParams,
) -> Vector12 {
    let state = RobotState::from_vector(x);
    let m = continuous_matrices_with(&state, feet, nominal, InertiaRotation::YawOnly);
    let mut dx = m.derivative(x, &f_hat.forces);
    for i in 0..6 {
        dx[6 + i] += extra[i];
    }
    dx
}

/// One RK4 step of the reference model.
pub fn propagate_reference(
    x_hat: &Vector12,
    f_hat: &StanceForces,
    extra: &Vector6,
    feet: &FootSet,
    nominal: &RobotParams,
    dt: f64,
) -> Vector12 {
    let f = |x: &Vector12| reference_derivative(x, f_hat, extra, feet, nominal);
    let k1 = f(x_hat);
    let k2 = f(&(x_hat + k1 * (dt / 2.0)));
    let k3 = f(&(x_hat + k2 * (dt / 2.0)));
    let k4 = f(&(x_hat + k3 * dt));
    x_hat + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceState {
    pub x_hat: Vector12,
    pub f_hat: StanceForces,
}

impl ReferenceState {
    pub fn new(x_hat: Vector12) -> Self {
        ReferenceState { x_hat, f_hat: StanceForces::zeros() }
    }

    /// Advances `X̂` with the stored `F̂` and extra acceleration `u_a + θ̂`.
    pub fn step(&mut self, u_a: &Vector6, theta: &Vector6, feet: &FootSet, nominal: &RobotParams, dt: f64) {
        self.x_hat = propagate_reference(&self.x_hat, &self.f_hat, &(u_a + theta), feet, nominal, dt);
    }
}

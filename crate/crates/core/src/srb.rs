//! Single-rigid-body model: state types, continuous and discrete dynamics
//! matrices, and the tracking error.
//!
//! State ordering is `X = (p_c, Θ, ṗ_c, ω)` with `Θ = (roll, pitch, yaw)`
//! (Z-Y-X Euler angles) and `ω` expressed in the world frame.

use nalgebra::{DMatrix, Matrix3, Rotation3, SMatrix, SVector, Vector3};
use thiserror::Error;

pub type Vector6 = SVector<f64, 6>;
pub type Vector12 = SVector<f64, 12>;
pub type Vector13 = SVector<f64, 13>;
pub type Matrix6 = SMatrix<f64, 6, 6>;
pub type Matrix12 = SMatrix<f64, 12, 12>;
pub type Matrix13 = SMatrix<f64, 13, 13>;
pub type Matrix6x12 = SMatrix<f64, 6, 12>;
pub type Matrix13x12 = SMatrix<f64, 13, 12>;
pub type Matrix12x6 = SMatrix<f64, 12, 6>;

pub const NUM_LEGS: usize = 4;
pub const LEG_NAMES: [&str; NUM_LEGS] = ["FR", "FL", "RR", "RL"];

/// Rotation angle beyond which the log map is treated as degenerate.
const LOG_MAP_LIMIT: f64 = std::f64::consts::PI - 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid robot parameters: {0}")]
    InvalidParams(String),
    #[error("rotation error angle is too close to pi for a unique log map")]
    DegenerateRotation,
    #[error("time step must be positive")]
    NonPositiveStep,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotParams {
    pub mass: f64,
    /// Body-frame inertia about the COM.
    pub body_inertia: Matrix3<f64>,
    /// World-frame gravity vector.
    pub gravity: Vector3<f64>,
    pub friction_coeff: f64,
    pub fz_min: f64,
    pub fz_max: f64,
}

impl Default for RobotParams {
    /// Unitree A1 nominal values.
    fn default() -> Self {
        RobotParams {
            mass: 12.0,
            body_inertia: Matrix3::from_diagonal(&Vector3::new(0.017, 0.057, 0.065)),
            gravity: Vector3::new(0.0, 0.0, -9.81),
            friction_coeff: 0.6,
            fz_min: 0.0,
            fz_max: 500.0,
        }
    }
}

impl RobotParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidParams(m.to_string()));
        if !(self.mass > 0.0) || !self.mass.is_finite() {
            return bad("mass must be positive");
        }
        let i = &self.body_inertia;
        if (i - i.transpose()).amax() > 1e-12 * i.amax().max(1.0) {
            return bad("body inertia must be symmetric");
        }
        if i.cholesky().is_none() {
            return bad("body inertia must be positive definite");
        }
        if !(self.friction_coeff > 0.0) {
            return bad("friction coefficient must be positive");
        }
        if !(self.fz_min >= 0.0) || !(self.fz_max > self.fz_min) {
            return bad("need 0 <= fz_min < fz_max");
        }
        if !self.gravity.iter().all(|g| g.is_finite()) || self.gravity.norm() == 0.0 {
            return bad("gravity must be finite and nonzero");
        }
        Ok(())
    }

    pub fn gravity_norm(&self) -> f64 {
        self.gravity.norm()
    }

    /// `G = (g, 0)` of the acceleration-level model.
    pub fn gravity_wrench(&self) -> Vector6 {
        let mut g = Vector6::zeros();
        g.fixed_rows_mut::<3>(0).copy_from(&self.gravity);
        g
    }

    /// Upward gravity compensation `(−g, 0)`, i.e. the acceleration the
    /// contact forces must supply to hover.
    pub fn gravity_compensation(&self) -> Vector6 {
        -self.gravity_wrench()
    }

    /// Parameters after rigidly attaching a point mass at `offset` (body
    /// frame) from the current COM. Inertia is taken about the combined COM.
    pub fn with_point_mass(&self, load: f64, offset: Vector3<f64>) -> RobotParams {
        if load == 0.0 {
            return *self;
        }
        let total = self.mass + load;
        let shift = offset * (load / total);
        let parallel = |m: f64, r: Vector3<f64>| {
            (Matrix3::identity() * r.norm_squared() - r * r.transpose()) * m
        };
        let inertia = self.body_inertia + parallel(self.mass, -shift) + parallel(load, offset - shift);
        RobotParams {
            mass: total,
            body_inertia: inertia,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RobotState {
    pub position: Vector3<f64>,
    /// Z-Y-X Euler angles `(roll, pitch, yaw)`.
    pub euler: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// World-frame angular velocity.
    pub angular_velocity: Vector3<f64>,
}

impl RobotState {
    pub fn standing(height: f64) -> Self {
        RobotState {
            position: Vector3::new(0.0, 0.0, height),
            ..Default::default()
        }
    }

    pub fn to_vector(&self) -> Vector12 {
        let mut x = Vector12::zeros();
        x.fixed_rows_mut::<3>(0).copy_from(&self.position);
        x.fixed_rows_mut::<3>(3).copy_from(&self.euler);
        x.fixed_rows_mut::<3>(6).copy_from(&self.velocity);
        x.fixed_rows_mut::<3>(9).copy_from(&self.angular_velocity);
        x
    }

    pub fn from_vector(x: &Vector12) -> Self {
        RobotState {
            position: x.fixed_rows::<3>(0).into_owned(),
            euler: x.fixed_rows::<3>(3).into_owned(),
            velocity: x.fixed_rows::<3>(6).into_owned(),
            angular_velocity: x.fixed_rows::<3>(9).into_owned(),
        }
    }

    pub fn roll(&self) -> f64 {
        self.euler.x
    }

    pub fn pitch(&self) -> f64 {
        self.euler.y
    }

    pub fn yaw(&self) -> f64 {
        self.euler.z
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        euler_rotation(&self.euler)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootSet {
    pub positions: [Vector3<f64>; NUM_LEGS],
    pub contacts: [bool; NUM_LEGS],
}

impl FootSet {
    pub fn num_stance(&self) -> usize {
        self.contacts.iter().filter(|c| **c).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StanceForces {
    pub forces: Vector12,
}

impl StanceForces {
    pub fn zeros() -> Self {
        Self::default()
    }

    pub fn foot(&self, leg: usize) -> Vector3<f64> {
        self.forces.fixed_rows::<3>(3 * leg).into_owned()
    }

    pub fn set_foot(&mut self, leg: usize, f: Vector3<f64>) {
        self.forces.fixed_rows_mut::<3>(3 * leg).copy_from(&f);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateError {
    /// Position and orientation error.
    pub pose: Vector6,
    /// Linear and angular velocity error.
    pub rate: Vector6,
}

impl StateError {
    pub fn to_vector(&self) -> Vector12 {
        let mut e = Vector12::zeros();
        e.fixed_rows_mut::<6>(0).copy_from(&self.pose);
        e.fixed_rows_mut::<6>(6).copy_from(&self.rate);
        e
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }
}

pub fn yaw_rotation(psi: f64) -> Matrix3<f64> {
    let (s, c) = psi.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// `R = R_z(ψ) R_y(θ) R_x(φ)`.
pub fn euler_rotation(euler: &Vector3<f64>) -> Matrix3<f64> {
    Rotation3::from_euler_angles(euler.x, euler.y, euler.z).into_inner()
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Which rotation is used to carry the body inertia into the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InertiaRotation {
    /// Full Z-Y-X rotation (plant).
    Full,
    /// Yaw-only approximation (controllers).
    YawOnly,
}

pub fn world_inertia(state: &RobotState, params: &RobotParams, rot: InertiaRotation) -> Matrix3<f64> {
    let r = match rot {
        InertiaRotation::Full => state.rotation(),
        InertiaRotation::YawOnly => yaw_rotation(state.yaw()),
    };
    r * params.body_inertia * r.transpose()
}

/// `A` mapping stacked foot forces to the net COM wrench.
pub fn force_map(com: &Vector3<f64>, feet: &FootSet) -> Matrix6x12 {
    let mut a = Matrix6x12::zeros();
    for (leg, p) in feet.positions.iter().enumerate() {
        a.fixed_view_mut::<3, 3>(0, 3 * leg).fill_with_identity();
        a.fixed_view_mut::<3, 3>(3, 3 * leg).copy_from(&skew(&(p - com)));
    }
    a
}

pub fn mass_matrix(inertia: &Matrix3<f64>, mass: f64) -> Matrix6 {
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&(Matrix3::identity() * mass));
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(inertia);
    m
}

pub fn mass_matrix_inverse(inertia: &Matrix3<f64>, mass: f64) -> Matrix6 {
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&(Matrix3::identity() / mass));
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(
        &inertia
            .try_inverse()
            .expect("validated inertia is invertible"),
    );
    m
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousModel {
    pub d: Matrix12,
    pub h: Matrix12,
    pub gravity_affine: Vector12,
}

impl ContinuousModel {
    pub fn derivative(&self, x: &Vector12, f: &Vector12) -> Vector12 {
        self.d * x + self.h * f + self.gravity_affine
    }
}

/// `Ẋ = D X + H F + (0, G)` with the world inertia from the full rotation.
pub fn continuous_matrices(state: &RobotState, feet: &FootSet, params: &RobotParams) -> ContinuousModel {
    continuous_matrices_with(state, feet, params, InertiaRotation::Full)
}

pub fn continuous_matrices_with(
    state: &RobotState,
    feet: &FootSet,
    params: &RobotParams,
    rot: InertiaRotation,
) -> ContinuousModel {
    let mut d = Matrix12::zeros();
    d.fixed_view_mut::<3, 3>(0, 6).fill_with_identity();
    d.fixed_view_mut::<3, 3>(3, 9).copy_from(&yaw_rotation(state.yaw()));
    let inertia = world_inertia(state, params, rot);
    let minv_a = mass_matrix_inverse(&inertia, params.mass) * force_map(&state.position, feet);
    let mut h = Matrix12::zeros();
    h.fixed_view_mut::<6, 12>(6, 0).copy_from(&minv_a);
    let mut gravity_affine = Vector12::zeros();
    gravity_affine.fixed_rows_mut::<3>(6).copy_from(&params.gravity);
    ContinuousModel { d, h, gravity_affine }
}

/// Gravity-augmented model on `X^c = (X, ‖g‖)`.
pub fn extended_matrices(
    state: &RobotState,
    feet: &FootSet,
    params: &RobotParams,
    rot: InertiaRotation,
) -> (Matrix13, Matrix13x12) {
    let base = continuous_matrices_with(state, feet, params, rot);
    let mut dc = Matrix13::zeros();
    dc.fixed_view_mut::<12, 12>(0, 0).copy_from(&base.d);
    let g_unit = params.gravity / params.gravity_norm();
    dc.fixed_view_mut::<3, 1>(6, 12).copy_from(&g_unit);
    let mut hc = Matrix13x12::zeros();
    hc.fixed_view_mut::<12, 12>(0, 0).copy_from(&base.h);
    (dc, hc)
}

pub fn augment_gravity(x: &Vector12, g_norm: f64) -> Vector13 {
    let mut xc = Vector13::zeros();
    xc.fixed_rows_mut::<12>(0).copy_from(x);
    xc[12] = g_norm;
    xc
}

/// Zero-order-hold discretization through the exponential of
/// `[[A, B], [0, 0]]·dt`.
pub fn discretize_zoh(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    dt: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>), ModelError> {
    if !(dt > 0.0) {
        return Err(ModelError::NonPositiveStep);
    }
    let n = a.nrows();
    let m = b.ncols();
    let mut big = DMatrix::zeros(n + m, n + m);
    big.view_mut((0, 0), (n, n)).copy_from(&(a * dt));
    big.view_mut((0, n), (n, m)).copy_from(&(b * dt));
    let e = big.exp();
    Ok((
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, m)).into_owned(),
    ))
}

/// Rotation vector of `R`, rejecting angles too close to π.
pub fn rotation_log(r: &Matrix3<f64>) -> Result<Vector3<f64>, ModelError> {
    let rot = Rotation3::from_matrix_unchecked(*r);
    if rot.angle() > LOG_MAP_LIMIT {
        return Err(ModelError::DegenerateRotation);
    }
    Ok(rot.scaled_axis())
}

/// Tracking error `state − desired`. The orientation part is the world-frame
/// rotation vector taking the desired attitude to the actual one.
pub fn state_error(state: &RobotState, desired: &RobotState) -> Result<StateError, ModelError> {
    let r = state.rotation();
    let rd = desired.rotation();
    let orient = rotation_log(&(r * rd.transpose()))?;
    let mut pose = Vector6::zeros();
    pose.fixed_rows_mut::<3>(0).copy_from(&(state.position - desired.position));
    pose.fixed_rows_mut::<3>(3).copy_from(&orient);
    let mut rate = Vector6::zeros();
    rate.fixed_rows_mut::<3>(0).copy_from(&(state.velocity - desired.velocity));
    rate.fixed_rows_mut::<3>(3)
        .copy_from(&(state.angular_velocity - desired.angular_velocity));
    Ok(StateError { pose, rate })
}

/// Selector `B = [0; I]` from 6-dim accelerations into the 12-dim state.
pub fn input_selector() -> Matrix12x6 {
    let mut b = Matrix12x6::zeros();
    b.fixed_view_mut::<6, 6>(6, 0).fill_with_identity();
    b
}

/// Wraps an angle to `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let w = a.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w - two_pi
    } else {
        w
    }
}

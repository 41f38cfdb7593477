//! True rigid-body dynamics driven by realized foot forces.

use nalgebra::{Matrix3, Vector3};

use crate::srb::{RobotParams, RobotState, Vector12, Vector6, NUM_LEGS};

/// Euler-angle rates from the world angular velocity for the ZYX convention.
pub fn euler_rates(euler: &Vector3<f64>, omega: &Vector3<f64>) -> Vector3<f64> {
    let (theta, psi) = (euler.y, euler.z);
    let (s, c) = psi.sin_cos();
    let horiz = c * omega.x + s * omega.y;
    let roll_rate = horiz / theta.cos();
    Vector3::new(roll_rate, -s * omega.x + c * omega.y, omega.z + theta.sin() * roll_rate)
}

/// Loads acting on the body during one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantInput {
    pub forces: [Vector3<f64>; NUM_LEGS],
    pub feet: [Vector3<f64>; NUM_LEGS],
    pub external: Vector6,
}

pub fn plant_derivative(x: &Vector12, input: &PlantInput, params: &RobotParams) -> Vector12 {
    let s = RobotState::from_vector(x);
    let rot = s.rotation();
    let inertia: Matrix3<f64> = rot * params.body_inertia * rot.transpose();
    let mut force = input.external.fixed_rows::<3>(0).into_owned();
    let mut torque = input.external.fixed_rows::<3>(3).into_owned();
    for leg in 0..NUM_LEGS {
        force += input.forces[leg];
        torque += (input.feet[leg] - s.position).cross(&input.forces[leg]);
    }
    let w = s.angular_velocity;
    torque -= w.cross(&(inertia * w));
    let alpha = inertia.lu().solve(&torque).unwrap_or_else(Vector3::zeros);
    let acc = force / params.mass + params.gravity;
    let rates = euler_rates(&s.euler, &w);
    let mut dx = Vector12::zeros();
    dx.fixed_rows_mut::<3>(0).copy_from(&s.velocity);
    dx.fixed_rows_mut::<3>(3).copy_from(&rates);
    dx.fixed_rows_mut::<3>(6).copy_from(&acc);
    dx.fixed_rows_mut::<3>(9).copy_from(&alpha);
    dx
}

pub fn plant_step(state: &RobotState, input: &PlantInput, params: &RobotParams, dt: f64) -> RobotState {
    let x = state.to_vector();
    let f = |x: &Vector12| plant_derivative(x, input, params);
    let k1 = f(&x);
    let k2 = f(&(x + k1 * (dt / 2.0)));
    let k3 = f(&(x + k2 * (dt / 2.0)));
    let k4 = f(&(x + k3 * dt));
    RobotState::from_vector(&(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)))
}

//! Footstep placement and swing-foot trajectories.

use nalgebra::Vector3;

use crate::srb::{RobotState, NUM_LEGS};
use crate::terrain::TerrainModel;

pub const DEFAULT_APEX: f64 = 0.08;
/// Body-frame hip offsets (m) in FR, FL, RR, RL order.
pub const DEFAULT_HIP_OFFSETS: [[f64; 3]; NUM_LEGS] = [
    [0.183, -0.132, 0.0],
    [0.183, 0.132, 0.0],
    [-0.183, -0.132, 0.0],
    [-0.183, 0.132, 0.0],
];

/// Peak of the degree-6 Bernstein basis `B₃,₆` (at s = ½).
const CENTER_BASIS_PEAK: f64 = 20.0 / 64.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwingPlan {
    pub liftoff: Vector3<f64>,
    pub target: Vector3<f64>,
    pub duration: f64,
    pub apex_height: f64,
}

pub fn hip_position(state: &RobotState, offset: &Vector3<f64>) -> Vector3<f64> {
    state.position + state.rotation() * offset
}

/// Raibert step plus capture-point feedback, dropped onto the terrain.
pub fn footstep_target(
    hip: &Vector3<f64>,
    stance_time: f64,
    v_des: &Vector3<f64>,
    v_act: &Vector3<f64>,
    z0: f64,
    g_norm: f64,
    terrain: &TerrainModel,
) -> Vector3<f64> {
    let p = hip + v_des * (stance_time / 2.0) + (v_act - v_des) * (z0 / g_norm).sqrt();
    terrain.project(&p)
}

/// Value and derivative of a 1-D Bézier curve.
fn bezier(cps: &[f64], s: f64) -> (f64, f64) {
    let n = cps.len() - 1;
    let mut pts = cps.to_vec();
    let mut deriv = 0.0;
    for level in 0..n {
        if level == n - 1 {
            deriv = n as f64 * (pts[1] - pts[0]);
        }
        for i in 0..(n - level) {
            pts[i] = (1.0 - s) * pts[i] + s * pts[i + 1];
        }
    }
    (pts[0], deriv)
}

/// Foot position and velocity (per second) at normalized phase `s`.
pub fn swing_position(plan: &SwingPlan, s: f64) -> (Vector3<f64>, Vector3<f64>) {
    let s = s.clamp(0.0, 1.0);
    let (p0, pf) = (plan.liftoff, plan.target);
    let mut pos = Vector3::zeros();
    let mut vel = Vector3::zeros();
    for axis in 0..2 {
        let (v, d) = bezier(&[p0[axis], p0[axis], pf[axis], pf[axis]], s);
        pos[axis] = v;
        vel[axis] = d;
    }
    let (z0, zf) = (p0.z, pf.z);
    let mid = 0.5 * (z0 + zf) + plan.apex_height / CENTER_BASIS_PEAK;
    let (v, d) = bezier(&[z0, z0, z0, mid, zf, zf, zf], s);
    pos.z = v;
    vel.z = d;
    (pos, vel / plan.duration)
}

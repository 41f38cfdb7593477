//! Condensed convex MPC over the gravity-augmented SRB model, with an optional
//! extended state carrying a constant compensation input `u_a`.

use nalgebra::{DMatrix, DVector, SVector, Vector3};
use thiserror::Error;

use crate::balance::{fill_friction, ROWS_PER_FOOT};
use crate::gait::ContactSchedule;
use crate::qp::{QpError, QpProblem, QpSettings, QpSolver, QpStatus, WarmStart};
use crate::srb::{
    augment_gravity, discretize_zoh, extended_matrices, wrap_angle, FootSet, InertiaRotation,
    ModelError, RobotParams, RobotState, StanceForces, Vector12, Vector6, NUM_LEGS,
};

/// Gain with which `u_a` enters the predicted accelerations. `u_a ≈ −θ`, so
/// the prediction must carry `−u_a` for the optimizer to counteract `θ`.
pub const U_A_GAIN: f64 = -1.0;

pub type Vector19 = SVector<f64, 19>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MpcError {
    #[error("invalid MPC configuration: {0}")]
    Config(String),
    #[error("schedule has {got} rows, horizon is {want}")]
    Schedule { got: usize, want: usize },
    #[error("desired trajectory has {got} samples, need {want}")]
    Trajectory { got: usize, want: usize },
    #[error("no stance foot anywhere in the horizon")]
    NoStance,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("MPC problem infeasible")]
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcConfig {
    pub horizon: usize,
    pub dt: f64,
    /// Diagonal of Q in `(p, Θ, ṗ, ω)` order.
    pub q: Vector12,
    pub gamma1: f64,
    /// How long the first planned force is applied before the next solve.
    /// Lever arms of step 0 are taken halfway through this window, those of
    /// later steps halfway through the step. `None` means a full step.
    pub first_hold: Option<f64>,
}

impl Default for MpcConfig {
    fn default() -> Self {
        MpcConfig {
            horizon: 10,
            dt: 0.03,
            q: Vector12::from_row_slice(&[2.5, 2.5, 20.0, 0.25, 0.25, 1.5, 0.2, 0.2, 0.2, 0.1, 0.1, 0.3]),
            gamma1: 1e-6,
            first_hold: None,
        }
    }
}

impl MpcConfig {
    /// Position of step `j`'s sample time inside the step, in `[0, 1)`.
    pub fn sample_fraction(&self, j: usize) -> f64 {
        match (j, self.first_hold) {
            (0, Some(h)) => 0.5 * h / self.dt,
            _ => 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), MpcError> {
        if self.horizon == 0 {
            return Err(MpcError::Config("horizon must be at least 1".into()));
        }
        if !(self.dt > 0.0) {
            return Err(MpcError::Config("dt must be positive".into()));
        }
        if matches!(self.first_hold, Some(h) if !(h > 0.0 && h <= self.dt)) {
            return Err(MpcError::Config("first_hold must lie in (0, dt]".into()));
        }
        if !self.q.iter().all(|w| *w >= 0.0) || !(self.gamma1 >= 0.0) {
            return Err(MpcError::Config("weights must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedState {
    pub eta: Vector19,
}

impl ExtendedState {
    pub fn u_a(&self) -> Vector6 {
        self.eta.fixed_rows::<6>(13).into_owned()
    }
}

pub fn embed_u_a(state: &RobotState, u_a: &Vector6, g_norm: f64) -> ExtendedState {
    let mut eta = Vector19::zeros();
    eta.fixed_rows_mut::<13>(0).copy_from(&augment_gravity(&state.to_vector(), g_norm));
    eta.fixed_rows_mut::<6>(13).copy_from(u_a);
    ExtendedState { eta }
}

/// Continuous extended matrices `(D^e, H̄^e)` on the 19-state.
pub fn extended_state_matrices(
    state: &RobotState,
    feet: &FootSet,
    params: &RobotParams,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let (dc, hc) = extended_matrices(state, feet, params, InertiaRotation::YawOnly);
    let mut a = DMatrix::zeros(19, 19);
    a.view_mut((0, 0), (13, 13)).copy_from(&dc);
    for i in 0..6 {
        a[(6 + i, 13 + i)] = U_A_GAIN;
    }
    let mut b = DMatrix::zeros(19, 12);
    b.view_mut((0, 0), (13, 12)).copy_from(&hc);
    (a, b)
}

/// Discrete one-step model: `x⁺ = A x + B F + B_u u_a` on the 13-state.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub b_u: DMatrix<f64>,
}

pub fn discrete_model(
    state: &RobotState,
    feet: &FootSet,
    params: &RobotParams,
    dt: f64,
) -> Result<DiscreteModel, MpcError> {
    let (dc, hc) = extended_matrices(state, feet, params, InertiaRotation::YawOnly);
    let a_c = DMatrix::from_column_slice(13, 13, dc.as_slice());
    let b_c = DMatrix::from_column_slice(13, 12, hc.as_slice());
    let (a, b) = discretize_zoh(&a_c, &b_c, dt)?;
    let mut g_u = DMatrix::zeros(13, 6);
    for i in 0..6 {
        g_u[(6 + i, i)] = U_A_GAIN;
    }
    let (_, b_u) = discretize_zoh(&a_c, &g_u, dt)?;
    Ok(DiscreteModel { a, b, b_u })
}

pub struct MpcInput<'a> {
    pub state: &'a RobotState,
    /// Lever-arm positions: current stance feet and planned touchdowns.
    pub feet: &'a [Vector3<f64>; NUM_LEGS],
    pub schedule: &'a ContactSchedule,
    /// `k + 1` samples; sample 0 is the current desired state.
    pub desired: &'a [RobotState],
    pub params: &'a RobotParams,
    /// `Some` selects the extended-state variant.
    pub u_a: Option<Vector6>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcProblem {
    pub qp: QpProblem,
    /// `(step, leg)` of each 3-column force block.
    pub columns: Vec<(usize, usize)>,
    /// Free response of the 13-state for steps `1..=k`, stacked.
    pub free: DVector<f64>,
    /// Forced response map, `13k × n`.
    pub forced: DMatrix<f64>,
}

fn check_input(input: &MpcInput, cfg: &MpcConfig) -> Result<(), MpcError> {
    cfg.validate()?;
    if input.schedule.flags.len() != cfg.horizon {
        return Err(MpcError::Schedule { got: input.schedule.flags.len(), want: cfg.horizon });
    }
    if input.desired.len() != cfg.horizon + 1 {
        return Err(MpcError::Trajectory { got: input.desired.len(), want: cfg.horizon + 1 });
    }
    Ok(())
}

/// Desired 12-vector with yaw unwrapped next to the current yaw.
fn desired_vector(d: &RobotState, yaw_now: f64) -> Vector12 {
    let mut x = d.to_vector();
    x[5] = yaw_now + wrap_angle(x[5] - yaw_now);
    x
}

pub fn build_prediction(input: &MpcInput, cfg: &MpcConfig) -> Result<MpcProblem, MpcError> {
    check_input(input, cfg)?;
    let k = cfg.horizon;
    let feet = FootSet { positions: *input.feet, contacts: [true; NUM_LEGS] };
    let model = discrete_model(input.state, &feet, input.params, cfg.dt)?;
    // Lever arms for step j are measured from the COM advanced at constant
    // velocity to the step's sample time; only the input matrix changes.
    let mut inputs: Vec<DMatrix<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let frac = cfg.sample_fraction(j);
        let shift = input.state.velocity * ((j as f64 + frac) * cfg.dt);
        if shift == Vector3::zeros() {
            inputs.push(model.b.clone());
        } else {
            let moved = FootSet { positions: input.feet.map(|f| f - shift), contacts: [true; NUM_LEGS] };
            inputs.push(discrete_model(input.state, &moved, input.params, cfg.dt)?.b);
        }
    }

    let columns: Vec<(usize, usize)> = (0..k)
        .flat_map(|j| {
            let row = input.schedule.flags[j];
            (0..NUM_LEGS).filter(move |&l| row[l]).map(move |l| (j, l))
        })
        .collect();
    if columns.is_empty() {
        return Err(MpcError::NoStance);
    }
    let n = 3 * columns.len();

    let mut forced = DMatrix::zeros(13 * k, n);
    for (c, &(j, leg)) in columns.iter().enumerate() {
        let mut blk = inputs[j].columns(3 * leg, 3).into_owned();
        for i in (j + 1)..=k {
            if i > j + 1 {
                blk = &model.a * &blk;
            }
            forced.view_mut((13 * (i - 1), 3 * c), (13, 3)).copy_from(&blk);
        }
    }

    let x0 = augment_gravity(&input.state.to_vector(), input.params.gravity_norm());
    let mut x = DVector::from_column_slice(x0.as_slice());
    let u_drive = input.u_a.map(|u| &model.b_u * DVector::from_column_slice(u.as_slice()));
    let mut free = DVector::zeros(13 * k);
    for i in 0..k {
        x = &model.a * &x;
        if let Some(d) = &u_drive {
            x += d;
        }
        free.rows_mut(13 * i, 13).copy_from(&x);
    }

    // Weighted tracking residual on the 12 physical states of each step.
    let yaw_now = input.state.yaw();
    let sq = cfg.q.map(f64::sqrt);
    let mut wt = DMatrix::zeros(12 * k, n);
    let mut wr = DVector::zeros(12 * k);
    for i in 0..k {
        let xd = desired_vector(&input.desired[i + 1], yaw_now);
        for s in 0..12 {
            let r = 12 * i + s;
            wr[r] = sq[s] * (free[13 * i + s] - xd[s]);
            for c in 0..n {
                wt[(r, c)] = sq[s] * forced[(13 * i + s, c)];
            }
        }
    }
    let mut hessian = wt.transpose() * &wt;
    for d in 0..n {
        hessian[(d, d)] += cfg.gamma1;
    }
    let hessian = (&hessian + hessian.transpose()) * 0.5;
    let linear_cost = wt.transpose() * wr;

    let m = ROWS_PER_FOOT * columns.len();
    let mut c = DMatrix::zeros(m, n);
    let mut lo = DVector::zeros(m);
    let mut hi = DVector::zeros(m);
    for idx in 0..columns.len() {
        fill_friction(&mut c, &mut lo, &mut hi, input.params, ROWS_PER_FOOT * idx, 3 * idx);
    }
    let qp = QpProblem { hessian, linear_cost, constraint_matrix: c, lower_bounds: lo, upper_bounds: hi };
    Ok(MpcProblem { qp, columns, free, forced })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcOutput {
    pub forces: StanceForces,
    /// Open-loop predicted physical states for steps `1..=k`.
    pub predicted: Vec<Vector12>,
    /// Full force plan, one entry per horizon step.
    pub plan: Vec<StanceForces>,
    pub status: QpStatus,
    pub iterations: usize,
}

fn unpack(prob: &MpcProblem, sol: &crate::qp::QpSolution, k: usize) -> MpcOutput {
    let mut plan = vec![StanceForces::zeros(); k];
    for (c, &(j, leg)) in prob.columns.iter().enumerate() {
        plan[j].set_foot(leg, Vector3::new(sol.primal[3 * c], sol.primal[3 * c + 1], sol.primal[3 * c + 2]));
    }
    let traj = &prob.free + &prob.forced * &sol.primal;
    let predicted = (0..k)
        .map(|i| Vector12::from_iterator(traj.rows(13 * i, 12).iter().cloned()))
        .collect();
    MpcOutput { forces: plan[0], predicted, plan, status: sol.status, iterations: sol.iterations }
}

pub fn mpc_step(
    solver: &mut QpSolver,
    input: &MpcInput,
    cfg: &MpcConfig,
    warm: Option<&WarmStart>,
) -> Result<(MpcOutput, MpcProblem, WarmStart), MpcError> {
    let prob = build_prediction(input, cfg)?;
    let sol = solver.solve(&prob.qp, warm)?;
    if sol.status == QpStatus::Infeasible {
        return Err(MpcError::Infeasible);
    }
    Ok((unpack(&prob, &sol, cfg.horizon), prob, WarmStart::from(&sol)))
}

/// Holds the solver and warm-start data between cycles.
#[derive(Debug, Clone)]
pub struct MpcController {
    pub config: MpcConfig,
    solver: QpSolver,
    warm: Option<(Vec<(usize, usize)>, WarmStart)>,
}

impl MpcController {
    pub fn new(config: MpcConfig, settings: QpSettings) -> Self {
        MpcController { config, solver: QpSolver::new(settings), warm: None }
    }

    pub fn update(&mut self, input: &MpcInput) -> Result<MpcOutput, MpcError> {
        let prob = build_prediction(input, &self.config)?;
        let warm = match &self.warm {
            Some((cols, w)) if *cols == prob.columns => Some(w.clone()),
            _ => None,
        };
        let sol = self.solver.solve(&prob.qp, warm.as_ref())?;
        if sol.status == QpStatus::Infeasible {
            return Err(MpcError::Infeasible);
        }
        let out = unpack(&prob, &sol, self.config.horizon);
        self.warm = Some((prob.columns, WarmStart::from(&sol)));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gait::{horizon_schedule, GaitSpec};

    fn feet() -> [Vector3<f64>; 4] {
        [(0.18, -0.13), (0.18, 0.13), (-0.18, -0.13), (-0.18, 0.13)].map(|(x, y)| Vector3::new(x, y, 0.0))
    }

    #[test]
    fn zero_compensation_gives_identical_problem() {
        let p = RobotParams::default();
        let mut s = RobotState::standing(0.3);
        s.velocity.x = 0.2;
        s.euler.z = 0.4;
        let f = feet();
        let cfg = MpcConfig::default();
        let sched = horizon_schedule(&GaitSpec::trot(), 0.1, cfg.dt, cfg.horizon);
        let des = vec![RobotState::standing(0.3); cfg.horizon + 1];
        let mk = |u_a| MpcInput { state: &s, feet: &f, schedule: &sched, desired: &des, params: &p, u_a };
        let a = build_prediction(&mk(None), &cfg).unwrap();
        let b = build_prediction(&mk(Some(Vector6::zeros())), &cfg).unwrap();
        assert_eq!(a, b);
    }
}

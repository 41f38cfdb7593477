//! Deterministic multirate closed-loop simulator on a 1 ms base tick.

pub mod config;
pub mod log;
pub mod plant;
pub mod scenarios;
pub mod traces;

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::Serialize;
use thiserror::Error;

use crate::analysis::build_certificate;
use crate::balance::{realized_input, BalanceController, BalanceGains};
use crate::gait::{contacts_at, horizon_schedule_sampled, GaitPhase, GaitSpec};
use crate::l1::{adaptation_tick, propagate_reference, AdaptiveParams, UncertaintyEstimate};
use crate::mpc::{MpcConfig, MpcController, MpcInput};
use crate::qp::QpSettings;
use crate::srb::{
    force_map, mass_matrix_inverse, state_error, world_inertia, yaw_rotation, FootSet, InertiaRotation,
    Matrix12, RobotParams, RobotState, StanceForces, StateError, Vector12, Vector6, NUM_LEGS,
};
use crate::swing::{footstep_target, hip_position, swing_position, SwingPlan, DEFAULT_HIP_OFFSETS};
use crate::terrain::{slope_orientation, Penetration, TerrainKind, TerrainModel};

pub use config::{ConfigError, ControllerKind, ScenarioConfig};
pub use log::{LogRecord, TickStatus};
use plant::{plant_step, PlantInput};

pub const SIM_DT: f64 = 1e-3;
pub const FALL_ANGLE: f64 = 0.6;
pub const FALL_HEIGHT: f64 = 0.12;
/// Time after which errors count as steady state for summaries.
pub const TRANSIENT: f64 = 1.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write log: {0}")]
    Log(#[from] csv::Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Fallen { t: f64 },
    SolverFailure { t: f64 },
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Completed => 0,
            RunStatus::Fallen { .. } => 2,
            RunStatus::SolverFailure { .. } => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub controller: String,
    pub status: RunStatus,
    pub ticks: usize,
    pub rms_height_error: f64,
    pub max_height_error: f64,
    /// Mean `|z − z_d|` over the second half of the run.
    pub steady_height_error: f64,
    pub rms_position_error: f64,
    pub max_abs_roll: f64,
    pub max_abs_pitch: f64,
    /// Mean `|pitch − pitch_d|` over the second half of the run.
    pub steady_pitch_error: f64,
    pub max_theta_inf: f64,
    pub max_theta_inf_after_transient: f64,
    pub max_e_tilde_after_transient: f64,
    pub projection_violations: usize,
    pub mpc_solves: usize,
    pub reference_mpc_solves: usize,
    pub csv_path: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub summary: RunSummary,
    pub records: Vec<LogRecord>,
}

/// Advances the desired pose by one step of the command profile.
pub fn reference_trajectory(
    cfg: &ScenarioConfig,
    terrain: &TerrainModel,
    t: f64,
    dt: f64,
    prev: &RobotState,
) -> RobotState {
    let c = cfg.command_at(t);
    let yaw = prev.yaw() + c.z * dt;
    let mut v = yaw_rotation(yaw) * Vector3::new(c.x, c.y, 0.0);
    let x = prev.position.x + v.x * dt;
    let y = prev.position.y + v.y * dt;
    let mut d = RobotState::standing(cfg.height);
    d.position = Vector3::new(x, y, cfg.height + terrain.height_at(x, y));
    if terrain.kind == TerrainKind::RigidSlope {
        let (roll, pitch) = slope_orientation(terrain.plane[1], terrain.plane[2]);
        d.euler.x = roll;
        d.euler.y = pitch;
        v.z = terrain.plane[1] * v.x + terrain.plane[2] * v.y;
    }
    d.euler.z = yaw;
    d.velocity = v;
    d.angular_velocity = Vector3::new(0.0, 0.0, c.z);
    d
}

fn initial_desired(cfg: &ScenarioConfig, terrain: &TerrainModel) -> RobotState {
    let mut start = RobotState::standing(cfg.height);
    start.position.z = cfg.height + terrain.height_at(0.0, 0.0);
    let mut d = reference_trajectory(cfg, terrain, 0.0, 0.0, &start);
    d.position = start.position;
    d
}

#[derive(Debug, Clone)]
struct Legs {
    contact: [bool; NUM_LEGS],
    foot: [Vector3<f64>; NUM_LEGS],
    depth: [f64; NUM_LEGS],
    liftoff: [Vector3<f64>; NUM_LEGS],
    target: [Vector3<f64>; NUM_LEGS],
}

impl Legs {
    fn new(state: &RobotState, terrain: &TerrainModel, phase: &GaitPhase) -> Self {
        let foot = std::array::from_fn(|l| terrain.project(&hip_position(state, &Vector3::from(DEFAULT_HIP_OFFSETS[l]))));
        Legs { contact: phase.contacts, foot, depth: [0.0; NUM_LEGS], liftoff: foot, target: foot }
    }

    /// Stance foot positions including sinkage.
    fn stance_position(&self, leg: usize, terrain: &TerrainModel) -> Vector3<f64> {
        self.foot[leg] - terrain.normal() * self.depth[leg]
    }

    #[allow(clippy::too_many_arguments)]
    fn update(
        &mut self,
        phase: &GaitPhase,
        gait: &GaitSpec,
        state: &RobotState,
        desired: &RobotState,
        terrain: &TerrainModel,
        height: f64,
        g_norm: f64,
        apex: f64,
    ) -> [Vector3<f64>; NUM_LEGS] {
        let mut swing = self.foot;
        for leg in 0..NUM_LEGS {
            let now = phase.contacts[leg];
            if now && !self.contact[leg] {
                self.foot[leg] = terrain.project(&self.target[leg]);
                self.depth[leg] = 0.0;
            } else if !now && self.contact[leg] {
                self.liftoff[leg] = self.stance_position(leg, terrain);
            }
            self.contact[leg] = now;
            if !now {
                let flat = |v: &Vector3<f64>| Vector3::new(v.x, v.y, 0.0);
                // Hip position expected at touchdown.
                let remaining = (1.0 - phase.progress[leg]) * gait.swing_time(leg);
                let hip = hip_position(state, &Vector3::from(DEFAULT_HIP_OFFSETS[leg])) + flat(&desired.velocity) * remaining;
                self.target[leg] = footstep_target(
                    &hip,
                    gait.stance_time(leg),
                    &flat(&desired.velocity),
                    &flat(&state.velocity),
                    height,
                    g_norm,
                    terrain,
                );
                let plan = SwingPlan {
                    liftoff: self.liftoff[leg],
                    target: self.target[leg],
                    duration: gait.swing_time(leg),
                    apex_height: apex,
                };
                swing[leg] = swing_position(&plan, phase.progress[leg]).0;
            }
        }
        swing
    }

    /// Lever-arm positions for controllers: stance feet where they are,
    /// swing feet at their touchdown targets.
    fn controller_feet(&self, terrain: &TerrainModel) -> [Vector3<f64>; NUM_LEGS] {
        std::array::from_fn(|l| if self.contact[l] { self.stance_position(l, terrain) } else { self.target[l] })
    }
}

/// Force sequence from one MPC solve together with the contact pattern it
/// was planned for.
#[derive(Debug, Clone)]
struct Plan {
    t0: f64,
    dt: f64,
    flags: Vec<[bool; NUM_LEGS]>,
    forces: Vec<StanceForces>,
    /// COM position and foot positions at solve time, and the COM shift each
    /// step's lever arms were evaluated at.
    origin: Vector3<f64>,
    feet: [Vector3<f64>; NUM_LEGS],
    shifts: Vec<Vector3<f64>>,
}

impl Plan {
    fn new(t0: f64, cfg: &MpcConfig, state: &RobotState, feet: &[Vector3<f64>; NUM_LEGS], flags: &[[bool; NUM_LEGS]], forces: Vec<StanceForces>) -> Self {
        let shifts = (0..forces.len()).map(|j| state.velocity * ((j as f64 + cfg.sample_fraction(j)) * cfg.dt)).collect();
        Plan { t0, dt: cfg.dt, flags: flags.to_vec(), forces, origin: state.position, feet: *feet, shifts }
    }

    /// Step each stance leg's planned force is taken from at time `t`: the
    /// step nearest to the elapsed time whose scheduled contacts match, or
    /// failing that the nearest step where that leg was planned in stance.
    fn sources(&self, t: f64, contacts: &[bool; NUM_LEGS]) -> [Option<usize>; NUM_LEGS] {
        let k = self.forces.len() as isize;
        let idx = (((t - self.t0) / self.dt) + 1e-9).floor().max(0.0) as isize;
        let idx = idx.min(k - 1);
        let nearest = |ok: &dyn Fn(usize) -> bool| {
            (0..k).flat_map(|d| [idx + d, idx - d]).find(|j| (0..k).contains(j) && ok(*j as usize)).map(|j| j as usize)
        };
        let whole = nearest(&|j| self.flags[j] == *contacts);
        std::array::from_fn(|leg| match (contacts[leg], whole) {
            (false, _) => None,
            (true, Some(j)) => Some(j),
            (true, None) => nearest(&|j| self.flags[j][leg]),
        })
    }

    fn forces_at(&self, t: f64, contacts: &[bool; NUM_LEGS]) -> StanceForces {
        let mut out = StanceForces::zeros();
        for (leg, src) in self.sources(t, contacts).into_iter().enumerate() {
            if let Some(j) = src {
                out.set_foot(leg, self.forces[j].foot(leg));
            }
        }
        out
    }

    /// Planned forces adjusted by the least-norm correction that makes them
    /// produce, about `com` with feet at `feet`, the wrench the plan assumed.
    fn replay(&self, t: f64, contacts: &[bool; NUM_LEGS], com: &Vector3<f64>, feet: &[Vector3<f64>; NUM_LEGS]) -> StanceForces {
        let src = self.sources(t, contacts);
        let mut out = self.forces_at(t, contacts);
        let legs: Vec<usize> = (0..NUM_LEGS).filter(|l| src[*l].is_some()).collect();
        if legs.is_empty() {
            return out;
        }
        let mut moment_err = Vector3::zeros();
        let mut a = nalgebra::DMatrix::zeros(6, 3 * legs.len());
        for (c, &leg) in legs.iter().enumerate() {
            let f = out.foot(leg);
            let planned = self.feet[leg] - self.shifts[src[leg].unwrap()] - self.origin;
            let now = feet[leg] - com;
            moment_err += (planned - now).cross(&f);
            a.view_mut((0, 3 * c), (3, 3)).copy_from(&nalgebra::Matrix3::identity());
            a.view_mut((3, 3 * c), (3, 3)).copy_from(&now.cross_matrix());
        }
        let mut rhs = nalgebra::DVector::zeros(6);
        rhs.rows_mut(3, 3).copy_from(&moment_err);
        if let Ok(df) = a.svd(true, true).solve(&rhs, 1e-9) {
            for (c, &leg) in legs.iter().enumerate() {
                out.set_foot(leg, out.foot(leg) + df.fixed_rows::<3>(3 * c));
            }
        }
        out
    }
}

pub struct Simulation {
    cfg: ScenarioConfig,
    nominal: RobotParams,
    gait: GaitSpec,
    terrain: TerrainModel,
    mpc_cfg: MpcConfig,
    aparams: AdaptiveParams,
    p: Matrix12,
    state: RobotState,
    desired: RobotState,
    legs: Legs,
    balance: Option<BalanceController>,
    ref_balance: Option<BalanceController>,
    mpc: Option<MpcController>,
    ref_mpc: Option<MpcController>,
    plan: Option<Plan>,
    ref_plan: Option<Plan>,
    estimate: UncertaintyEstimate,
    x_hat: Vector12,
    mpc_count: u64,
    pending_ref: Option<u64>,
    n: u64,
    done: bool,
}

impl Simulation {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let cfg = cfg.clone();
        let nominal = cfg.nominal.to_params();
        let gait = cfg.gait.to_spec();
        let terrain = cfg.terrain.to_model();
        let gains: BalanceGains = cfg.balance.to_gains();
        let aparams = cfg.adaptive.to_params();
        let p = build_certificate(&gains.kp, &gains.kd, &Matrix12::identity())
            .map_err(|e| ConfigError::Invalid(e.to_string()))?
            .p;
        let desired = initial_desired(&cfg, &terrain);
        let mut state = desired;
        state.velocity = Vector3::zeros();
        state.angular_velocity = Vector3::zeros();
        let legs = Legs::new(&state, &terrain, &contacts_at(&gait, 0.0));
        let settings = QpSettings::default();
        let kind = cfg.controller;
        let balance = (!kind.uses_mpc()).then(|| BalanceController::new(gains, settings));
        let ref_balance = (kind == ControllerKind::AdaptiveBalance).then(|| BalanceController::new(gains, settings));
        let mpc_cfg = cfg.mpc_config();
        let mpc = kind.uses_mpc().then(|| MpcController::new(mpc_cfg.clone(), settings));
        // The reference plan is replayed step by step between its solves.
        // The reference plan is replayed for a whole period, so its first
        // step uses mid-step lever arms.
        let ref_cfg = MpcConfig { first_hold: None, ..mpc_cfg.clone() };
        let ref_mpc = (kind == ControllerKind::AdaptiveMpc).then(|| MpcController::new(ref_cfg, settings));
        Ok(Simulation {
            estimate: UncertaintyEstimate::new(&aparams, SIM_DT),
            x_hat: state.to_vector(),
            cfg,
            nominal,
            gait,
            terrain,
            mpc_cfg,
            aparams,
            p,
            state,
            desired,
            legs,
            balance,
            ref_balance,
            mpc,
            ref_mpc,
            plan: None,
            ref_plan: None,
            mpc_count: 0,
            pending_ref: None,
            n: 0,
            done: false,
        })
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    fn horizon_desired(&self, t: f64) -> Vec<RobotState> {
        let mut out = Vec::with_capacity(self.mpc_cfg.horizon + 1);
        out.push(self.desired);
        for i in 0..self.mpc_cfg.horizon {
            let next = reference_trajectory(&self.cfg, &self.terrain, t + i as f64 * self.mpc_cfg.dt, self.mpc_cfg.dt, &out[i]);
            out.push(next);
        }
        out
    }

    fn run_mpc(
        ctrl: &mut MpcController,
        state: &RobotState,
        feet: &[Vector3<f64>; NUM_LEGS],
        sched: &crate::gait::ContactSchedule,
        desired: &[RobotState],
        nominal: &RobotParams,
        u_a: Option<Vector6>,
    ) -> Option<crate::mpc::MpcOutput> {
        let input = MpcInput { state, feet, schedule: sched, desired, params: nominal, u_a };
        ctrl.update(&input).ok()
    }

    /// Advances one base tick and returns its log record, or `None` once the
    /// run has ended.
    pub fn step(&mut self) -> Option<LogRecord> {
        if self.done {
            return None;
        }
        let n = self.n;
        let t = n as f64 * SIM_DT;
        if n > 0 {
            self.desired = reference_trajectory(&self.cfg, &self.terrain, t - SIM_DT, SIM_DT, &self.desired);
        }
        let phase = contacts_at(&self.gait, t);
        let g_norm = self.nominal.gravity_norm();
        self.legs.update(&phase, &self.gait, &self.state, &self.desired, &self.terrain, self.cfg.height, g_norm, self.cfg.gait.apex);
        let contacts = phase.contacts;
        let lever = self.legs.controller_feet(&self.terrain);
        let feet = FootSet { positions: lever, contacts };
        let kind = self.cfg.controller;
        let adaptive = kind.is_adaptive();
        let x_hat_state = RobotState::from_vector(&self.x_hat);

        let mut status = TickStatus::Ok;
        let errors = state_error(&self.state, &self.desired).and_then(|e| Ok((e, state_error(&x_hat_state, &self.desired)?)));
        let (e, e_hat) = match errors {
            Ok(v) => v,
            Err(_) => {
                status = TickStatus::SolverFailure;
                (StateError::default(), StateError::default())
            }
        };

        if adaptive && status == TickStatus::Ok {
            self.estimate = adaptation_tick(&self.estimate, &e_hat.to_vector(), &e.to_vector(), &self.p, &self.aparams, SIM_DT);
        }
        let u_a = if adaptive && self.cfg.adaptive.enabled { self.estimate.u_a } else { Vector6::zeros() };
        let theta = self.estimate.theta;

        let mut commanded = StanceForces::zeros();
        let mut f_hat = StanceForces::zeros();
        let mut extra = Vector6::zeros();
        let (mut u, mut iterations, mut kkt) = (Vector6::zeros(), 0, 0.0);
        let (mut mpc_tick, mut ref_tick) = (false, false);

        if status == TickStatus::Ok {
            if let Some(bal) = self.balance.as_mut() {
                let extra_real = if adaptive { u_a } else { Vector6::zeros() };
                match bal.update(&e, &extra_real, &feet, &self.state, &self.nominal) {
                    Ok(out) => {
                        commanded = out.grf.forces;
                        u = out.u;
                        iterations = out.grf.iterations;
                        kkt = out.grf.kkt_residual;
                    }
                    Err(_) => status = TickStatus::SolverFailure,
                }
                if let Some(rb) = self.ref_balance.as_mut() {
                    match rb.update(&e_hat, &(u_a + theta), &feet, &x_hat_state, &self.nominal) {
                        Ok(out) => f_hat = out.grf.forces,
                        Err(_) => status = TickStatus::SolverFailure,
                    }
                }
            } else {
                let desired_h = if self.cfg.rates.is_mpc_tick(n) || self.pending_ref == Some(n) {
                    Some(self.horizon_desired(t))
                } else {
                    None
                };
                if self.cfg.rates.is_mpc_tick(n) {
                    let des = desired_h.as_ref().expect("horizon built on MPC ticks");
                    let cfg = &self.mpc_cfg;
                    let sched = &horizon_schedule_sampled(&self.gait, t, cfg.dt, cfg.horizon, |j| cfg.sample_fraction(j));
                    let ua = (kind == ControllerKind::AdaptiveMpc).then_some(u_a);
                    let mpc = self.mpc.as_mut().expect("MPC controller");
                    match Self::run_mpc(mpc, &self.state, &lever, sched, des, &self.nominal, ua) {
                        Some(out) => {
                            self.plan = Some(Plan::new(t, &self.mpc_cfg, &self.state, &lever, &sched.flags, out.plan));
                            iterations = out.iterations;
                        }
                        None => status = TickStatus::SolverFailure,
                    }
                    mpc_tick = true;
                    if kind == ControllerKind::AdaptiveMpc {
                        if self.mpc_count % self.cfg.rates.reference_every() as u64 == 0 {
                            self.pending_ref = Some(n + self.cfg.rates.mpc_offset_ms as u64);
                        }
                        self.mpc_count += 1;
                    }
                }
                if self.pending_ref == Some(n) && status == TickStatus::Ok {
                    let des = desired_h.as_ref().expect("horizon built on reference ticks");
                    let rm = self.ref_mpc.as_mut().expect("reference MPC");
                    let cfg = &rm.config;
                    // First step takes the contacts in force at solve time.
                    let sched = &horizon_schedule_sampled(&self.gait, t, cfg.dt, cfg.horizon, |j| if j == 0 { 0.0 } else { cfg.sample_fraction(j) });
                    match Self::run_mpc(rm, &x_hat_state, &lever, sched, des, &self.nominal, None) {
                        Some(out) => {
                            self.ref_plan = Some(Plan::new(t, &rm.config, &x_hat_state, &lever, &sched.flags, out.plan))
                        }
                        None => status = TickStatus::SolverFailure,
                    }
                    self.pending_ref = None;
                    ref_tick = true;
                }
                if let Some(plan) = &self.plan {
                    commanded = plan.forces_at(t, &contacts);
                }
                if kind == ControllerKind::AdaptiveMpc {
                    f_hat = match &self.ref_plan {
                        Some(plan) => plan.replay(t, &contacts, &x_hat_state.position, &lever),
                        None => commanded,
                    };
                    extra = u_a + theta;
                }
            }
        }

        let nominal_minv = mass_matrix_inverse(
            &world_inertia(&self.state, &self.nominal, InertiaRotation::YawOnly),
            self.nominal.mass,
        );
        let amap = force_map(&self.state.position, &feet);
        let u_star = realized_input(&commanded, &feet, &self.state, &self.nominal);
        let force_mismatch = if adaptive { nominal_minv * amap * (f_hat.forces - commanded.forces) } else { Vector6::zeros() };

        let x_hat_logged = self.x_hat;
        if adaptive && status == TickStatus::Ok {
            self.x_hat = propagate_reference(&self.x_hat, &f_hat, &extra, &feet, &self.nominal, SIM_DT);
        }

        // Plant.
        let n_hat = self.terrain.normal();
        let rot = self.state.rotation();
        let mut realized = StanceForces::zeros();
        let mut plant_feet = [Vector3::zeros(); NUM_LEGS];
        for leg in 0..NUM_LEGS {
            plant_feet[leg] = self.legs.stance_position(leg, &self.terrain);
            if !contacts[leg] {
                continue;
            }
            let f = commanded.foot(leg);
            if self.terrain.is_rigid() {
                realized.set_foot(leg, f);
            } else {
                let offset = rot * Vector3::from(DEFAULT_HIP_OFFSETS[leg]);
                let hip_vel = self.state.velocity + self.state.angular_velocity.cross(&offset);
                let approach = -hip_vel.dot(&n_hat);
                let depth = self.legs.depth[leg];
                let rate = self.terrain.penetration_rate(depth, f.dot(&n_hat), approach);
                realized.set_foot(leg, self.terrain.realize_force(&f, &Penetration { depth, rate }));
                self.legs.depth[leg] = (depth + rate * SIM_DT).max(0.0);
            }
        }
        let true_params = self.cfg.true_params(t);
        let input = PlantInput { forces: std::array::from_fn(|l| realized.foot(l)), feet: plant_feet, external: self.cfg.external_wrench(t, &rot) };
        let next = plant_step(&self.state, &input, &true_params, SIM_DT);

        let fallen = !next.is_finite()
            || next.roll().abs() > FALL_ANGLE
            || next.pitch().abs() > FALL_ANGLE
            || next.position.z - self.terrain.height_at(next.position.x, next.position.y) < FALL_HEIGHT;
        if status == TickStatus::Ok && fallen {
            status = TickStatus::Fallen;
        }

        let record = LogRecord {
            t,
            state: self.state,
            desired: self.desired,
            reference: x_hat_logged,
            commanded,
            realized,
            alpha: self.estimate.alpha,
            beta: self.estimate.beta,
            theta: self.estimate.theta,
            u_a,
            contacts,
            status,
            iterations,
            kkt_residual: kkt,
            mpc_tick,
            reference_mpc_tick: ref_tick,
            u,
            u_star,
            force_mismatch,
        };
        self.state = next;
        self.n += 1;
        if status != TickStatus::Ok || self.n >= self.total_ticks() {
            self.done = true;
        }
        Some(record)
    }

    /// Number of base ticks covering the configured duration.
    pub fn total_ticks(&self) -> u64 {
        ((self.cfg.duration / SIM_DT) - 1e-9).ceil().max(1.0) as u64
    }
}

pub fn summarize(cfg: &ScenarioConfig, records: &[LogRecord], csv_path: Option<PathBuf>) -> RunSummary {
    let params = cfg.adaptive.to_params();
    let status = match records.last().map(|r| r.status) {
        Some(TickStatus::Fallen) => RunStatus::Fallen { t: records.last().unwrap().t },
        Some(TickStatus::SolverFailure) => RunStatus::SolverFailure { t: records.last().unwrap().t },
        _ => RunStatus::Completed,
    };
    let half = cfg.duration / 2.0;
    let mut sum_h2 = 0.0;
    let mut sum_p2 = 0.0;
    let mut steady_h = (0.0, 0usize);
    let mut steady_p = (0.0, 0usize);
    let mut s = RunSummary {
        name: cfg.name.clone(),
        controller: cfg.controller.name().into(),
        status,
        ticks: records.len(),
        rms_height_error: 0.0,
        max_height_error: 0.0,
        steady_height_error: 0.0,
        rms_position_error: 0.0,
        max_abs_roll: 0.0,
        max_abs_pitch: 0.0,
        steady_pitch_error: 0.0,
        max_theta_inf: 0.0,
        max_theta_inf_after_transient: 0.0,
        max_e_tilde_after_transient: 0.0,
        projection_violations: 0,
        mpc_solves: records.iter().filter(|r| r.mpc_tick).count(),
        reference_mpc_solves: records.iter().filter(|r| r.reference_mpc_tick).count(),
        csv_path,
    };
    for r in records {
        let dz = r.state.position.z - r.desired.position.z;
        let dp = (r.state.position - r.desired.position).norm();
        sum_h2 += dz * dz;
        sum_p2 += dp * dp;
        s.max_height_error = s.max_height_error.max(dz.abs());
        s.max_abs_roll = s.max_abs_roll.max(r.state.roll().abs());
        s.max_abs_pitch = s.max_abs_pitch.max(r.state.pitch().abs());
        let th = r.theta.amax();
        s.max_theta_inf = s.max_theta_inf.max(th);
        if r.t >= TRANSIENT {
            s.max_theta_inf_after_transient = s.max_theta_inf_after_transient.max(th);
            if cfg.controller.is_adaptive() {
                let e_tilde = (r.reference - r.state.to_vector()).norm();
                s.max_e_tilde_after_transient = s.max_e_tilde_after_transient.max(e_tilde);
            }
        }
        if r.t >= half {
            steady_h.0 += dz.abs();
            steady_h.1 += 1;
            steady_p.0 += (r.state.pitch() - r.desired.pitch()).abs();
            steady_p.1 += 1;
        }
        for j in 0..6 {
            if r.alpha[j].abs() > params.alpha_max[j] || r.beta[j].abs() > params.beta_max[j] {
                s.projection_violations += 1;
            }
        }
    }
    let n = records.len().max(1) as f64;
    s.rms_height_error = (sum_h2 / n).sqrt();
    s.rms_position_error = (sum_p2 / n).sqrt();
    s.steady_height_error = steady_h.0 / steady_h.1.max(1) as f64;
    s.steady_pitch_error = steady_p.0 / steady_p.1.max(1) as f64;
    s
}

/// Runs a scenario to completion. When `out_dir` is given, the CSV log is
/// written there as `<name>_<controller>.csv`.
pub fn run_scenario(cfg: &ScenarioConfig, out_dir: Option<&Path>) -> Result<RunResult, SimError> {
    let mut sim = Simulation::new(cfg)?;
    let mut records = Vec::with_capacity(sim.total_ticks() as usize);
    while let Some(r) = sim.step() {
        records.push(r);
    }
    let csv_path = match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("{}_{}.csv", cfg.name, cfg.controller.name()));
            log::write_csv_file(&path, &records)?;
            Some(path)
        }
        None => None,
    };
    let summary = summarize(cfg, &records, csv_path);
    Ok(RunResult { summary, records })
}

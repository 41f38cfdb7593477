use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::balance::BalanceGains;
use crate::gait::{GaitKind, GaitSpec};
use crate::l1::AdaptiveParams;
use crate::mpc::MpcConfig;
use crate::srb::{RobotParams, Vector12, Vector6};
use crate::terrain::{SoftGround, TerrainKind, TerrainModel};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Balance,
    AdaptiveBalance,
    Mpc,
    AdaptiveMpc,
}

impl ControllerKind {
    pub fn is_adaptive(self) -> bool {
        matches!(self, ControllerKind::AdaptiveBalance | ControllerKind::AdaptiveMpc)
    }

    pub fn uses_mpc(self) -> bool {
        matches!(self, ControllerKind::Mpc | ControllerKind::AdaptiveMpc)
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().replace('-', "_").as_str() {
            "balance" => Some(ControllerKind::Balance),
            "adaptive_balance" => Some(ControllerKind::AdaptiveBalance),
            "mpc" => Some(ControllerKind::Mpc),
            "adaptive_mpc" => Some(ControllerKind::AdaptiveMpc),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Balance => "balance",
            ControllerKind::AdaptiveBalance => "adaptive_balance",
            ControllerKind::Mpc => "mpc",
            ControllerKind::AdaptiveMpc => "adaptive_mpc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsConfig {
    pub mass: f64,
    /// Principal body-frame inertia.
    pub inertia: [f64; 3],
    pub friction: f64,
    pub fz_min: f64,
    pub fz_max: f64,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        let p = RobotParams::default();
        ParamsConfig {
            mass: p.mass,
            inertia: [p.body_inertia[(0, 0)], p.body_inertia[(1, 1)], p.body_inertia[(2, 2)]],
            friction: p.friction_coeff,
            fz_min: p.fz_min,
            fz_max: p.fz_max,
        }
    }
}

impl ParamsConfig {
    pub fn to_params(&self) -> RobotParams {
        RobotParams {
            mass: self.mass,
            body_inertia: Matrix3::from_diagonal(&Vector3::from(self.inertia)),
            friction_coeff: self.friction,
            fz_min: self.fz_min,
            fz_max: self.fz_max,
            ..RobotParams::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LoadModel {
    /// Rigidly attached point mass: changes true mass and inertia.
    #[default]
    PointMass,
    /// Weight of the load applied as an external wrench.
    Wrench,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PlantConfig {
    /// Unknown load carried for the whole run.
    pub load_mass: f64,
    /// Body-frame offset of the load from the nominal COM.
    pub load_offset: [f64; 3],
    pub load_model: LoadModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaitConfig {
    pub kind: GaitKind,
    pub period: Option<f64>,
    pub duty: Option<[f64; 4]>,
    pub offsets: Option<[f64; 4]>,
    pub apex: f64,
}

impl Default for GaitConfig {
    fn default() -> Self {
        GaitConfig { kind: GaitKind::Stand, period: None, duty: None, offsets: None, apex: crate::swing::DEFAULT_APEX }
    }
}

impl GaitConfig {
    pub fn to_spec(&self) -> GaitSpec {
        let mut g = GaitSpec::default_for(self.kind);
        if let Some(p) = self.period {
            g.period = p;
        }
        if let Some(d) = self.duty {
            g.duty = d;
        }
        if let Some(o) = self.offsets {
            g.offsets = o;
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TerrainConfig {
    pub kind: TerrainKind,
    /// `z = a0 + a1·x + a2·y`.
    pub plane: [f64; 3],
    pub stiffness: f64,
    pub damping: f64,
    pub force_cap: f64,
    pub leg_admittance: f64,
}

impl Default for TerrainConfig {
    fn default() -> Self {
        let s = SoftGround::default();
        TerrainConfig {
            kind: TerrainKind::RigidFlat,
            plane: [0.0; 3],
            stiffness: s.stiffness,
            damping: s.damping,
            force_cap: s.force_cap,
            leg_admittance: s.leg_admittance,
        }
    }
}

impl TerrainConfig {
    pub fn to_model(&self) -> TerrainModel {
        let soft = SoftGround {
            stiffness: self.stiffness,
            damping: self.damping,
            force_cap: self.force_cap,
            leg_admittance: self.leg_admittance,
        };
        let plane = match self.kind {
            TerrainKind::RigidFlat => [0.0; 3],
            _ => self.plane,
        };
        TerrainModel { kind: self.kind, plane, soft }
    }
}

/// Velocity command knot; commands are linearly interpolated between knots
/// and held beyond the last one. `vx`, `vy` are in the yaw frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct CommandKnot {
    pub t: f64,
    pub vx: f64,
    pub vy: f64,
    pub yaw_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Disturbance {
    pub start: f64,
    pub end: f64,
    /// Linear ramp from zero at `start` to full strength at `ramp_end`.
    pub ramp_end: Option<f64>,
    /// World-frame force at the COM.
    pub force: [f64; 3],
    pub torque: [f64; 3],
    /// Extra point mass while active.
    pub mass: f64,
    pub offset: [f64; 3],
}

impl Default for Disturbance {
    fn default() -> Self {
        Disturbance {
            start: 0.0,
            end: f64::INFINITY,
            ramp_end: None,
            force: [0.0; 3],
            torque: [0.0; 3],
            mass: 0.0,
            offset: [0.0; 3],
        }
    }
}

impl Disturbance {
    /// Strength in `[0, 1]` at time `t`.
    pub fn scale(&self, t: f64) -> f64 {
        if t < self.start || t >= self.end {
            return 0.0;
        }
        match self.ramp_end {
            Some(r) if r > self.start => ((t - self.start) / (r - self.start)).min(1.0),
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatesConfig {
    /// Adaptive/real MPC period in base ticks.
    pub mpc_period_ms: u32,
    /// Run the MPC at exactly 300 Hz with a 3-3-4 ms pattern.
    pub pattern_300hz: bool,
    /// Reference MPC runs after every N-th MPC solve; defaults to 11
    /// (10 with the 300 Hz pattern).
    pub reference_mpc_every: Option<u32>,
    pub mpc_offset_ms: u32,
}

impl Default for RatesConfig {
    fn default() -> Self {
        RatesConfig { mpc_period_ms: 3, pattern_300hz: false, reference_mpc_every: None, mpc_offset_ms: 2 }
    }
}

impl RatesConfig {
    pub fn is_mpc_tick(&self, n: u64) -> bool {
        if self.pattern_300hz {
            matches!(n % 10, 0 | 3 | 6)
        } else {
            n % self.mpc_period_ms as u64 == 0
        }
    }

    pub fn reference_every(&self) -> u32 {
        self.reference_mpc_every.unwrap_or(if self.pattern_300hz { 10 } else { 11 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcSection {
    pub horizon: usize,
    pub dt: f64,
    pub q: [f64; 12],
    pub gamma1: f64,
}

impl Default for MpcSection {
    fn default() -> Self {
        let c = MpcConfig::default();
        let mut q = [0.0; 12];
        q.copy_from_slice(c.q.as_slice());
        MpcSection { horizon: c.horizon, dt: c.dt, q, gamma1: c.gamma1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BalanceSection {
    pub kp: [f64; 6],
    pub kd: [f64; 6],
    pub s: [f64; 6],
    pub gamma1: f64,
    pub gamma2: f64,
}

impl Default for BalanceSection {
    fn default() -> Self {
        let g = BalanceGains::default();
        let arr = |v: &Vector6| [v[0], v[1], v[2], v[3], v[4], v[5]];
        BalanceSection { kp: arr(&g.kp), kd: arr(&g.kd), s: arr(&g.s.diagonal()), gamma1: g.gamma1, gamma2: g.gamma2 }
    }
}

impl BalanceSection {
    pub fn to_gains(&self) -> BalanceGains {
        BalanceGains {
            kp: Vector6::from(self.kp),
            kd: Vector6::from(self.kd),
            s: nalgebra::Matrix6::from_diagonal(&Vector6::from(self.s)),
            gamma1: self.gamma1,
            gamma2: self.gamma2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptiveSection {
    /// When false, `u_a` is held at zero while the estimator still runs.
    pub enabled: bool,
    pub gamma: [f64; 6],
    pub omega_n: f64,
    pub zeta: f64,
    pub alpha_max: [f64; 6],
    pub beta_max: [f64; 6],
    pub epsilon: f64,
}

impl Default for AdaptiveSection {
    fn default() -> Self {
        let a = AdaptiveParams::default();
        let arr = |v: &Vector6| [v[0], v[1], v[2], v[3], v[4], v[5]];
        AdaptiveSection {
            enabled: true,
            gamma: arr(&a.gamma),
            omega_n: a.omega_n,
            zeta: a.zeta,
            alpha_max: arr(&a.alpha_max),
            beta_max: arr(&a.beta_max),
            epsilon: a.epsilon,
        }
    }
}

impl AdaptiveSection {
    pub fn to_params(&self) -> AdaptiveParams {
        AdaptiveParams {
            gamma: Vector6::from(self.gamma),
            omega_n: self.omega_n,
            zeta: self.zeta,
            alpha_max: Vector6::from(self.alpha_max),
            beta_max: Vector6::from(self.beta_max),
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub duration: f64,
    pub controller: ControllerKind,
    /// Nominal standing height above the terrain.
    #[serde(default = "default_height")]
    pub height: f64,
    #[serde(default)]
    pub nominal: ParamsConfig,
    #[serde(default)]
    pub plant: PlantConfig,
    #[serde(default)]
    pub gait: GaitConfig,
    #[serde(default)]
    pub terrain: TerrainConfig,
    #[serde(default)]
    pub command: Vec<CommandKnot>,
    #[serde(default)]
    pub disturbance: Vec<Disturbance>,
    #[serde(default)]
    pub rates: RatesConfig,
    #[serde(default)]
    pub mpc: MpcSection,
    #[serde(default)]
    pub balance: BalanceSection,
    #[serde(default)]
    pub adaptive: AdaptiveSection,
}

fn default_name() -> String {
    "scenario".into()
}

fn default_height() -> f64 {
    0.3
}

impl ScenarioConfig {
    pub fn new(controller: ControllerKind, duration: f64) -> Self {
        ScenarioConfig {
            name: default_name(),
            duration,
            controller,
            height: default_height(),
            nominal: ParamsConfig::default(),
            plant: PlantConfig::default(),
            gait: GaitConfig::default(),
            terrain: TerrainConfig::default(),
            command: Vec::new(),
            disturbance: Vec::new(),
            rates: RatesConfig::default(),
            mpc: MpcSection::default(),
            balance: BalanceSection::default(),
            adaptive: AdaptiveSection::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return bad("duration must be positive".into());
        }
        if !(self.height > 0.0) {
            return bad("height must be positive".into());
        }
        self.nominal.to_params().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.true_params(0.0).validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.plant.load_mass < 0.0 || self.disturbance.iter().any(|d| d.mass < 0.0) {
            return bad("load masses must be non-negative".into());
        }
        self.gait.to_spec().validate().map_err(ConfigError::Invalid)?;
        if !(self.gait.apex >= 0.0) {
            return bad("swing apex must be non-negative".into());
        }
        self.terrain.to_model().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.rates.mpc_period_ms == 0 || self.rates.reference_every() == 0 {
            return bad("controller periods must be at least one tick".into());
        }
        if self.rates.mpc_offset_ms == 0 || self.rates.mpc_offset_ms >= 3 {
            return bad("reference MPC offset must fall strictly between MPC ticks".into());
        }
        self.mpc_config().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.balance.to_gains().validate().map_err(ConfigError::Invalid)?;
        self.adaptive.to_params().validate().map_err(ConfigError::Invalid)?;
        for w in self.command.windows(2) {
            if !(w[1].t > w[0].t) {
                return bad("command knots must have increasing times".into());
            }
        }
        for d in &self.disturbance {
            if !(d.end > d.start) || d.ramp_end.is_some_and(|r| r < d.start) {
                return bad("disturbance windows must satisfy start < end and start <= ramp_end".into());
            }
        }
        Ok(())
    }

    pub fn mpc_config(&self) -> MpcConfig {
        MpcConfig {
            horizon: self.mpc.horizon,
            dt: self.mpc.dt,
            q: Vector12::from_row_slice(&self.mpc.q),
            gamma1: self.mpc.gamma1,
            first_hold: Some((self.rates.mpc_period_ms as f64 * 1e-3).min(self.mpc.dt)),
        }
    }

    /// Commanded `(vx, vy, yaw_rate)` at time `t`.
    pub fn command_at(&self, t: f64) -> Vector3<f64> {
        let k = &self.command;
        let v = |c: &CommandKnot| Vector3::new(c.vx, c.vy, c.yaw_rate);
        match k.len() {
            0 => Vector3::zeros(),
            _ if t <= k[0].t => v(&k[0]),
            _ => {
                for w in k.windows(2) {
                    if t < w[1].t {
                        let s = (t - w[0].t) / (w[1].t - w[0].t);
                        return v(&w[0]) * (1.0 - s) + v(&w[1]) * s;
                    }
                }
                v(&k[k.len() - 1])
            }
        }
    }

    /// Plant parameters at time `t`: nominal model plus any attached masses.
    pub fn true_params(&self, t: f64) -> RobotParams {
        let mut p = self.nominal.to_params();
        if self.plant.load_model == LoadModel::PointMass && self.plant.load_mass > 0.0 {
            p = p.with_point_mass(self.plant.load_mass, Vector3::from(self.plant.load_offset));
        }
        for d in &self.disturbance {
            let s = d.scale(t);
            if d.mass > 0.0 && s > 0.0 {
                p = p.with_point_mass(d.mass * s, Vector3::from(d.offset));
            }
        }
        p
    }

    /// External world-frame wrench `(force, torque)` at time `t`, given the
    /// body rotation for offset loads.
    pub fn external_wrench(&self, t: f64, rotation: &Matrix3<f64>) -> Vector6 {
        let mut w = Vector6::zeros();
        let g = self.nominal.to_params().gravity;
        if self.plant.load_model == LoadModel::Wrench && self.plant.load_mass > 0.0 {
            let f = g * self.plant.load_mass;
            let r = rotation * Vector3::from(self.plant.load_offset);
            w.fixed_rows_mut::<3>(0).add_assign(&f);
            w.fixed_rows_mut::<3>(3).add_assign(&r.cross(&f));
        }
        for d in &self.disturbance {
            let s = d.scale(t);
            if s > 0.0 {
                w.fixed_rows_mut::<3>(0).add_assign(&(Vector3::from(d.force) * s));
                w.fixed_rows_mut::<3>(3).add_assign(&(Vector3::from(d.torque) * s));
            }
        }
        w
    }
}

use std::ops::AddAssign;

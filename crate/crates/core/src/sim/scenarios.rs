//! Preset scenarios matching the acceptance runs.

use super::config::{CommandKnot, Disturbance, ScenarioConfig};
use super::ControllerKind;
use crate::gait::GaitKind;
use crate::terrain::TerrainKind;

fn named(name: &str, controller: ControllerKind, duration: f64) -> ScenarioConfig {
    let mut c = ScenarioConfig::new(controller, duration);
    c.name = name.into();
    c
}

fn forward(vx: f64) -> Vec<CommandKnot> {
    vec![CommandKnot { t: 0.0, vx, ..Default::default() }]
}

pub fn standing(controller: ControllerKind, duration: f64) -> ScenarioConfig {
    named("standing", controller, duration)
}

pub fn trot(controller: ControllerKind, duration: f64, vx: f64) -> ScenarioConfig {
    let mut c = named("trot", controller, duration);
    c.gait.kind = GaitKind::Trot;
    c.command = forward(vx);
    c
}

/// Trot at 0.5 m/s carrying an unknown load.
pub fn load_carrying(controller: ControllerKind, load: f64) -> ScenarioConfig {
    let mut c = trot(controller, 20.0, 0.5);
    c.name = "load".into();
    c.plant.load_mass = load;
    c
}

/// +5 kg, downward force ramping to 60 N over 10 s while the speed command
/// rises to 1 m/s.
pub fn time_varying_load(controller: ControllerKind) -> ScenarioConfig {
    let mut c = trot(controller, 10.0, 0.0);
    c.name = "ramp".into();
    c.plant.load_mass = 5.0;
    c.command = vec![
        CommandKnot { t: 0.0, ..Default::default() },
        CommandKnot { t: 10.0, vx: 1.0, ..Default::default() },
    ];
    c.disturbance.push(Disturbance { start: 0.0, ramp_end: Some(10.0), force: [0.0, 0.0, -60.0], ..Default::default() });
    c
}

pub fn soft_terrain(controller: ControllerKind) -> ScenarioConfig {
    let mut c = trot(controller, 10.0, 0.0);
    c.name = "soft".into();
    c.terrain.kind = TerrainKind::Soft;
    c.terrain.leg_admittance = SOFT_LEG_ADMITTANCE;
    c
}

/// Leg admittance used by the soft-terrain preset.
pub const SOFT_LEG_ADMITTANCE: f64 = 400.0;

pub fn slope(controller: ControllerKind) -> ScenarioConfig {
    let mut c = trot(controller, 10.0, 0.3);
    c.name = "slope".into();
    c.terrain.kind = TerrainKind::RigidSlope;
    c.terrain.plane = [0.0, 0.3, 0.0];
    c
}

pub fn bounding(controller: ControllerKind) -> ScenarioConfig {
    let mut c = named("bound", controller, 10.0);
    c.gait.kind = GaitKind::Bound;
    c
}

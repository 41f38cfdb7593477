//! Phase-driven gait scheduler.
//!
//! Leg order is FR, FL, RR, RL. Leg `i` is in stance at time `t` iff
//! `frac(t/T + offset_i) < duty_i`.

use serde::{Deserialize, Serialize};

use crate::srb::NUM_LEGS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaitKind {
    Stand,
    QuasiStaticWalk,
    Trot,
    Bound,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaitSpec {
    pub kind: GaitKind,
    pub period: f64,
    pub duty: [f64; NUM_LEGS],
    pub offsets: [f64; NUM_LEGS],
}

impl GaitSpec {
    pub fn stand() -> Self {
        GaitSpec {
            kind: GaitKind::Stand,
            period: 1.0,
            duty: [1.0; NUM_LEGS],
            offsets: [0.0; NUM_LEGS],
        }
    }

    pub fn trot() -> Self {
        GaitSpec {
            kind: GaitKind::Trot,
            period: 0.4,
            duty: [0.5; NUM_LEGS],
            offsets: [0.0, 0.5, 0.5, 0.0],
        }
    }

    pub fn bound() -> Self {
        GaitSpec {
            kind: GaitKind::Bound,
            period: 0.4,
            duty: [0.5; NUM_LEGS],
            offsets: [0.0, 0.0, 0.5, 0.5],
        }
    }

    pub fn walk() -> Self {
        GaitSpec {
            kind: GaitKind::QuasiStaticWalk,
            period: 1.2,
            duty: [0.75; NUM_LEGS],
            offsets: [0.0, 0.5, 0.25, 0.75],
        }
    }

    pub fn default_for(kind: GaitKind) -> Self {
        match kind {
            GaitKind::Stand => Self::stand(),
            GaitKind::QuasiStaticWalk => Self::walk(),
            GaitKind::Trot => Self::trot(),
            GaitKind::Bound => Self::bound(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.period > 0.0) {
            return Err("gait period must be positive".into());
        }
        for leg in 0..NUM_LEGS {
            if !(self.duty[leg] > 0.0 && self.duty[leg] <= 1.0) {
                return Err(format!("duty of leg {leg} must be in (0, 1]"));
            }
            if !(0.0..1.0).contains(&self.offsets[leg]) {
                return Err(format!("offset of leg {leg} must be in [0, 1)"));
            }
        }
        if self.kind == GaitKind::Stand && self.duty.iter().any(|d| *d != 1.0) {
            return Err("standing gait needs duty 1 on every leg".into());
        }
        Ok(())
    }

    /// Stance duration of leg `leg`.
    pub fn stance_time(&self, leg: usize) -> f64 {
        self.duty[leg] * self.period
    }

    pub fn swing_time(&self, leg: usize) -> f64 {
        (1.0 - self.duty[leg]) * self.period
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaitPhase {
    pub contacts: [bool; NUM_LEGS],
    /// Normalized progress through the current stance or swing, in `[0, 1)`.
    pub progress: [f64; NUM_LEGS],
    /// Raw phase `frac(t/T + offset)`.
    pub phase: [f64; NUM_LEGS],
}

pub fn contacts_at(gait: &GaitSpec, t: f64) -> GaitPhase {
    let mut out = GaitPhase {
        contacts: [false; NUM_LEGS],
        progress: [0.0; NUM_LEGS],
        phase: [0.0; NUM_LEGS],
    };
    for leg in 0..NUM_LEGS {
        let phi = (t / gait.period + gait.offsets[leg]).rem_euclid(1.0);
        let duty = gait.duty[leg];
        out.phase[leg] = phi;
        if phi < duty {
            out.contacts[leg] = true;
            out.progress[leg] = phi / duty;
        } else {
            out.progress[leg] = (phi - duty) / (1.0 - duty);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactSchedule {
    pub flags: Vec<[bool; NUM_LEGS]>,
    pub stance_time: f64,
}

pub fn horizon_schedule(gait: &GaitSpec, t: f64, dt_mpc: f64, k: usize) -> ContactSchedule {
    assert!(k >= 1, "horizon must have at least one step");
    ContactSchedule {
        flags: (0..k)
            .map(|j| contacts_at(gait, t + j as f64 * dt_mpc).contacts)
            .collect(),
        stance_time: gait.duty[0] * gait.period,
    }
}

/// Like [`horizon_schedule`] but samples step `j` at `t + (j + frac(j))·dt`.
pub fn horizon_schedule_sampled(
    gait: &GaitSpec,
    t: f64,
    dt_mpc: f64,
    k: usize,
    frac: impl Fn(usize) -> f64,
) -> ContactSchedule {
    assert!(k >= 1, "horizon must have at least one step");
    ContactSchedule {
        flags: (0..k)
            .map(|j| contacts_at(gait, t + (j as f64 + frac(j)) * dt_mpc).contacts)
            .collect(),
        stance_time: gait.duty[0] * gait.period,
    }
}

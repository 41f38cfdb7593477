//! Analysis traces extracted from run logs.

use crate::analysis::{BoundSample, DecaySample};
use crate::balance::{pd_input, BalanceGains};
use crate::srb::{state_error, RobotState, Vector6};

use super::log::LogRecord;

fn error_of(r: &LogRecord) -> crate::srb::StateError {
    state_error(&r.state, &r.desired).unwrap_or_default()
}

/// Decay samples from in-memory records, which carry `u` and `u*`.
pub fn decay_trace(records: &[LogRecord]) -> Vec<DecaySample> {
    records
        .iter()
        .map(|r| DecaySample { t: r.t, e: error_of(r).to_vector(), u: r.u, u_star: r.u_star })
        .collect()
}

/// Decay samples from a CSV log, which stores neither input. `u` is rebuilt
/// from the PD law. `u*` is the body acceleration, taken from central
/// differences of the logged rates.
pub fn decay_trace_from_log(records: &[LogRecord], gains: &BalanceGains) -> Vec<DecaySample> {
    let rates = |s: &RobotState| {
        let mut v = Vector6::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&s.velocity);
        v.fixed_rows_mut::<3>(3).copy_from(&s.angular_velocity);
        v
    };
    let n = records.len();
    (0..n)
        .map(|i| {
            let r = &records[i];
            let e = error_of(r);
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            let dt = records[b].t - records[a].t;
            let u_star = if dt > 0.0 { (rates(&records[b].state) - rates(&records[a].state)) / dt } else { Vector6::zeros() };
            DecaySample { t: r.t, e: e.to_vector(), u: pd_input(&e, gains), u_star }
        })
        .collect()
}

/// `ẽ = X̂ − X` together with the logged force mismatch.
pub fn bound_trace(records: &[LogRecord]) -> Vec<BoundSample> {
    records
        .iter()
        .map(|r| BoundSample { e_tilde: r.reference - r.state.to_vector(), force_mismatch: r.force_mismatch })
        .collect()
}

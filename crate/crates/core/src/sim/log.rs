use std::io::{Read, Write};
use std::path::Path;

use crate::srb::{RobotState, StanceForces, Vector12, Vector6, NUM_LEGS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TickStatus {
    Ok,
    Fallen,
    SolverFailure,
}

impl TickStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TickStatus::Ok => "ok",
            TickStatus::Fallen => "fallen",
            TickStatus::SolverFailure => "solver_failure",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ok" => Some(TickStatus::Ok),
            "fallen" => Some(TickStatus::Fallen),
            "solver_failure" => Some(TickStatus::SolverFailure),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub t: f64,
    pub state: RobotState,
    pub desired: RobotState,
    pub reference: Vector12,
    pub commanded: StanceForces,
    pub realized: StanceForces,
    pub alpha: Vector6,
    pub beta: Vector6,
    pub theta: Vector6,
    pub u_a: Vector6,
    pub contacts: [bool; NUM_LEGS],
    pub status: TickStatus,
    // Not part of the CSV schema.
    pub iterations: usize,
    pub kkt_residual: f64,
    pub mpc_tick: bool,
    pub reference_mpc_tick: bool,
    /// Nominal PD input and the input realized by the commanded forces
    /// (balance controllers only).
    pub u: Vector6,
    pub u_star: Vector6,
    /// `Bᵀ H̄ (F̂ − F)` for the adaptive variants.
    pub force_mismatch: Vector6,
}

const STATE_NAMES: [&str; 12] = ["x", "y", "z", "roll", "pitch", "yaw", "vx", "vy", "vz", "wx", "wy", "wz"];

pub fn csv_header() -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(STATE_NAMES.iter().map(|s| s.to_string()));
    h.extend(STATE_NAMES.iter().map(|s| format!("{s}d")));
    h.extend(STATE_NAMES.iter().map(|s| format!("{s}hat")));
    for prefix in ["F", "Fa"] {
        for leg in 1..=NUM_LEGS {
            for ax in ["x", "y", "z"] {
                h.push(format!("{prefix}{leg}{ax}"));
            }
        }
    }
    for name in ["alpha", "beta", "theta", "ua"] {
        h.extend((1..=6).map(|i| format!("{name}{i}")));
    }
    h.extend((1..=NUM_LEGS).map(|i| format!("contact{i}")));
    h.push("status".into());
    h
}

impl LogRecord {
    pub fn csv_fields(&self) -> Vec<String> {
        let mut v: Vec<f64> = vec![self.t];
        v.extend(self.state.to_vector().iter());
        v.extend(self.desired.to_vector().iter());
        v.extend(self.reference.iter());
        v.extend(self.commanded.forces.iter());
        v.extend(self.realized.forces.iter());
        for x in [&self.alpha, &self.beta, &self.theta, &self.u_a] {
            v.extend(x.iter());
        }
        let mut out: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        out.extend(self.contacts.iter().map(|c| (*c as u8).to_string()));
        out.push(self.status.as_str().into());
        out
    }
}

pub fn write_csv<W: Write>(w: W, records: &[LogRecord]) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(csv_header())?;
    for r in records {
        wr.write_record(r.csv_fields())?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, records: &[LogRecord]) -> Result<(), csv::Error> {
    write_csv(std::fs::File::create(path)?, records)
}

/// Parsed CSV row; fields outside the schema are left at zero.
pub fn read_csv<R: Read>(r: R) -> Result<Vec<LogRecord>, csv::Error> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers()?.clone();
    if header.iter().ne(csv_header().iter().map(|s| s.as_str())) {
        return Err(csv::Error::from(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            "unexpected CSV header",
        )));
    }
    let bad = |m: &str| csv::Error::from(std::io::Error::new(std::io::ErrorKind::InvalidData, m.to_string()));
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let n = rec.len();
        let nums: Vec<f64> = rec
            .iter()
            .take(n - 1 - NUM_LEGS)
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad("non-numeric field"))?;
        let vec12 = |o: usize| Vector12::from_row_slice(&nums[o..o + 12]);
        let vec6 = |o: usize| Vector6::from_row_slice(&nums[o..o + 6]);
        let forces = |o: usize| StanceForces { forces: Vector12::from_row_slice(&nums[o..o + 12]) };
        let mut contacts = [false; NUM_LEGS];
        for (i, c) in contacts.iter_mut().enumerate() {
            *c = rec[n - 1 - NUM_LEGS + i] == *"1";
        }
        out.push(LogRecord {
            t: nums[0],
            state: RobotState::from_vector(&vec12(1)),
            desired: RobotState::from_vector(&vec12(13)),
            reference: vec12(25),
            commanded: forces(37),
            realized: forces(49),
            alpha: vec6(61),
            beta: vec6(67),
            theta: vec6(73),
            u_a: vec6(79),
            contacts,
            status: TickStatus::parse(&rec[n - 1]).ok_or_else(|| bad("unknown status"))?,
            iterations: 0,
            kkt_residual: 0.0,
            mpc_tick: false,
            reference_mpc_tick: false,
            u: Vector6::zeros(),
            u_star: Vector6::zeros(),
            force_mismatch: Vector6::zeros(),
        });
    }
    Ok(out)
}

pub fn read_csv_file(path: &Path) -> Result<Vec<LogRecord>, csv::Error> {
    read_csv(std::fs::File::open(path)?)
}

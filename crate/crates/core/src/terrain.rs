//! Ground models, the commanded-to-realized contact force map, and slope
//! estimation from footholds.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TerrainError {
    #[error("points are collinear or too few to define a plane")]
    DegeneratePlane,
    #[error("invalid terrain: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerrainKind {
    RigidFlat,
    RigidSlope,
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftGround {
    /// N/m
    pub stiffness: f64,
    /// N·s/m
    pub damping: f64,
    pub force_cap: f64,
    /// Passive leg damping between hip and foot while pressing on the
    /// ground (N·s/m). Zero means an ideal force source.
    pub leg_admittance: f64,
}

impl Default for SoftGround {
    fn default() -> Self {
        SoftGround {
            stiffness: 8000.0,
            damping: 300.0,
            force_cap: 400.0,
            leg_admittance: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerrainModel {
    pub kind: TerrainKind,
    /// Plane `z = a0 + a1·x + a2·y`.
    pub plane: [f64; 3],
    pub soft: SoftGround,
}

impl Default for TerrainModel {
    fn default() -> Self {
        TerrainModel::flat()
    }
}

/// Compliance state of one foot on soft ground.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Penetration {
    /// Depth below the surface along the normal (m, ≥ 0).
    pub depth: f64,
    /// d(depth)/dt (m/s).
    pub rate: f64,
}

impl TerrainModel {
    pub fn flat() -> Self {
        TerrainModel {
            kind: TerrainKind::RigidFlat,
            plane: [0.0; 3],
            soft: SoftGround::default(),
        }
    }

    pub fn slope(a0: f64, a1: f64, a2: f64) -> Self {
        TerrainModel {
            kind: TerrainKind::RigidSlope,
            plane: [a0, a1, a2],
            soft: SoftGround::default(),
        }
    }

    pub fn soft(soft: SoftGround) -> Self {
        TerrainModel {
            kind: TerrainKind::Soft,
            plane: [0.0; 3],
            soft,
        }
    }

    pub fn validate(&self) -> Result<(), TerrainError> {
        if !self.plane.iter().all(|a| a.is_finite()) {
            return Err(TerrainError::Invalid("plane coefficients must be finite".into()));
        }
        if self.kind == TerrainKind::Soft {
            let s = &self.soft;
            if !(s.stiffness > 0.0 && s.damping > 0.0) {
                return Err(TerrainError::Invalid("soft ground needs positive stiffness and damping".into()));
            }
            if !(s.force_cap > 0.0) || !(s.leg_admittance >= 0.0) {
                return Err(TerrainError::Invalid("soft ground needs a positive force cap".into()));
            }
        }
        Ok(())
    }

    fn effective_plane(&self) -> [f64; 3] {
        match self.kind {
            TerrainKind::RigidFlat => [0.0; 3],
            _ => self.plane,
        }
    }

    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        let [a0, a1, a2] = self.effective_plane();
        a0 + a1 * x + a2 * y
    }

    /// Upward unit normal of the surface.
    pub fn normal(&self) -> Vector3<f64> {
        let [_, a1, a2] = self.effective_plane();
        Vector3::new(-a1, -a2, 1.0).normalize()
    }

    /// Vertical projection of `p` onto the surface.
    pub fn project(&self, p: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(p.x, p.y, self.height_at(p.x, p.y))
    }

    pub fn is_rigid(&self) -> bool {
        self.kind != TerrainKind::Soft
    }

    /// Force the ground actually exerts on a stance foot given the command.
    pub fn realize_force(&self, commanded: &Vector3<f64>, pen: &Penetration) -> Vector3<f64> {
        if self.is_rigid() {
            return *commanded;
        }
        let n = self.normal();
        let s = &self.soft;
        let fa_n = (s.stiffness * pen.depth + s.damping * pen.rate).clamp(0.0, s.force_cap);
        let f_n = commanded.dot(&n);
        let tangential = commanded - n * f_n;
        let scale = if fa_n > 0.0 && f_n > 0.0 { fa_n / f_n } else { 0.0 };
        n * fa_n + tangential * scale
    }

    /// Penetration rate of a massless foot squeezed between the ground's
    /// spring–damper and a leg that pushes with `commanded_normal` plus
    /// `leg_admittance` times the hip's approach speed.
    pub fn penetration_rate(&self, depth: f64, commanded_normal: f64, hip_approach_speed: f64) -> f64 {
        let s = &self.soft;
        let push = commanded_normal.max(0.0) + s.leg_admittance * hip_approach_speed;
        (push - s.stiffness * depth) / (s.leg_admittance + s.damping)
    }
}

/// Least-squares plane `z = a0 + a1·x + a2·y` through `points`.
pub fn fit_slope(points: &[Vector3<f64>]) -> Result<[f64; 3], TerrainError> {
    if points.len() < 3 {
        return Err(TerrainError::DegeneratePlane);
    }
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / n;
    let spread = points
        .iter()
        .map(|p| (p.x - cx).abs().max((p.y - cy).abs()))
        .fold(0.0, f64::max);
    let a = nalgebra::DMatrix::from_fn(points.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => points[i].x - cx,
        _ => points[i].y - cy,
    });
    let z = nalgebra::DVector::from_iterator(points.len(), points.iter().map(|p| p.z));
    let svd = a.svd(true, true);
    let smin = svd.singular_values.min();
    if spread == 0.0 || smin <= 1e-9 * spread.max(1.0) {
        return Err(TerrainError::DegeneratePlane);
    }
    let c = svd
        .solve(&z, 0.0)
        .map_err(|_| TerrainError::DegeneratePlane)?;
    // undo centering
    Ok([c[0] - c[1] * cx - c[2] * cy, c[1], c[2]])
}

/// Desired `(roll, pitch)` on a plane with slopes `a1` (x) and `a2` (y).
pub fn slope_orientation(a1: f64, a2: f64) -> (f64, f64) {
    (a2.atan(), a1.atan())
}

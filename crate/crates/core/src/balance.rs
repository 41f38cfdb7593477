//! QP balance controller: PD law on the tracking error, desired wrench, and
//! the ground-reaction-force QP with friction pyramids.

use nalgebra::{DMatrix, DVector, Vector3};
use thiserror::Error;

use crate::qp::{QpError, QpProblem, QpSettings, QpSolver, QpStatus, WarmStart, UNBOUNDED};
use crate::srb::{
    force_map, mass_matrix, mass_matrix_inverse, world_inertia, FootSet, InertiaRotation, Matrix6,
    RobotParams, RobotState, StanceForces, StateError, Vector6, NUM_LEGS,
};

/// Friction-pyramid and normal-force rows per stance foot.
pub const ROWS_PER_FOOT: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BalanceError {
    #[error("no stance foot")]
    NoStance,
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("force QP is infeasible")]
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceGains {
    pub kp: Vector6,
    pub kd: Vector6,
    pub s: Matrix6,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl Default for BalanceGains {
    fn default() -> Self {
        BalanceGains {
            kp: Vector6::new(50.0, 50.0, 80.0, 120.0, 120.0, 80.0),
            kd: Vector6::new(10.0, 10.0, 20.0, 20.0, 20.0, 20.0),
            s: Matrix6::identity(),
            gamma1: 1e-4,
            gamma2: 1e-3,
        }
    }
}

impl BalanceGains {
    pub fn validate(&self) -> Result<(), String> {
        if !self.kp.iter().chain(self.kd.iter()).all(|k| *k > 0.0) {
            return Err("PD gains must be strictly positive".into());
        }
        if !(self.gamma1 >= 0.0 && self.gamma2 >= 0.0) {
            return Err("force weights must be nonnegative".into());
        }
        if (self.s - self.s.transpose()).amax() > 1e-12 {
            return Err("wrench weight must be symmetric".into());
        }
        if self.s.symmetric_eigenvalues().min() < -1e-12 {
            return Err("wrench weight must be positive semidefinite".into());
        }
        Ok(())
    }
}

/// `u = −K_P e_p − K_D ė_p`.
pub fn pd_input(error: &StateError, gains: &BalanceGains) -> Vector6 {
    -gains.kp.component_mul(&error.pose) - gains.kd.component_mul(&error.rate)
}

fn nominal_mass_matrix(params: &RobotParams, state: &RobotState) -> Matrix6 {
    mass_matrix(&world_inertia(state, params, InertiaRotation::YawOnly), params.mass)
}

/// `b_d = M̄ (u + G↑)` where `G↑ = (−g, 0)` is the acceleration needed to
/// hold the body against gravity.
pub fn desired_dynamics(u: &Vector6, nominal: &RobotParams, state: &RobotState) -> Vector6 {
    nominal_mass_matrix(nominal, state) * (u + nominal.gravity_compensation())
}

/// `u* = M̄⁻¹ A F − G↑`, the acceleration the forces actually command.
pub fn realized_input(f: &StanceForces, feet: &FootSet, state: &RobotState, nominal: &RobotParams) -> Vector6 {
    let minv = mass_matrix_inverse(&world_inertia(state, nominal, InertiaRotation::YawOnly), nominal.mass);
    minv * (force_map(&state.position, feet) * f.forces) - nominal.gravity_compensation()
}

/// Pyramid rows for one foot, in local column order `(Fx, Fy, Fz)`:
/// `Fx − μFz ≤ 0`, `Fx + μFz ≥ 0`, the same for y, and `fz_min ≤ Fz ≤ fz_max`.
pub fn friction_block(params: &RobotParams) -> ([[f64; 3]; ROWS_PER_FOOT], [f64; ROWS_PER_FOOT], [f64; ROWS_PER_FOOT]) {
    let mu = params.friction_coeff;
    (
        [
            [1.0, 0.0, -mu],
            [1.0, 0.0, mu],
            [0.0, 1.0, -mu],
            [0.0, 1.0, mu],
            [0.0, 0.0, 1.0],
        ],
        [-UNBOUNDED, 0.0, -UNBOUNDED, 0.0, params.fz_min],
        [0.0, UNBOUNDED, 0.0, UNBOUNDED, params.fz_max],
    )
}

/// Stacks friction blocks for `n_feet` feet (3 variables each) starting at
/// row `row0`, column `col0`.
pub fn fill_friction(
    c: &mut DMatrix<f64>,
    lo: &mut DVector<f64>,
    hi: &mut DVector<f64>,
    params: &RobotParams,
    row0: usize,
    col0: usize,
) {
    let (rows, l, u) = friction_block(params);
    for r in 0..ROWS_PER_FOOT {
        for k in 0..3 {
            c[(row0 + r, col0 + k)] = rows[r][k];
        }
        lo[row0 + r] = l[r];
        hi[row0 + r] = u[r];
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrfSolution {
    pub forces: StanceForces,
    pub status: QpStatus,
    pub iterations: usize,
    pub kkt_residual: f64,
}

/// Builds the reduced force QP over stance-foot forces only.
pub fn build_grf_qp(
    b_d: &Vector6,
    feet: &FootSet,
    state: &RobotState,
    params: &RobotParams,
    gains: &BalanceGains,
    prev: &StanceForces,
) -> Result<(QpProblem, Vec<usize>), BalanceError> {
    let stance: Vec<usize> = (0..NUM_LEGS).filter(|&l| feet.contacts[l]).collect();
    if stance.is_empty() {
        return Err(BalanceError::NoStance);
    }
    let a_full = force_map(&state.position, feet);
    let nv = 3 * stance.len();
    let mut a = DMatrix::zeros(6, nv);
    let mut f_prev = DVector::zeros(nv);
    for (j, &leg) in stance.iter().enumerate() {
        a.view_mut((0, 3 * j), (6, 3)).copy_from(&a_full.fixed_view::<6, 3>(0, 3 * leg));
        f_prev.rows_mut(3 * j, 3).copy_from(&prev.foot(leg));
    }
    let s = DMatrix::from_column_slice(6, 6, gains.s.as_slice());
    let b = DVector::from_column_slice(b_d.as_slice());
    let ats = a.transpose() * &s;
    let mut hessian = &ats * &a;
    for i in 0..nv {
        hessian[(i, i)] += gains.gamma1 + gains.gamma2;
    }
    let hessian = (&hessian + hessian.transpose()) * 0.5;
    let linear_cost = -(&ats * &b) - &f_prev * gains.gamma2;
    let m = ROWS_PER_FOOT * stance.len();
    let mut c = DMatrix::zeros(m, nv);
    let mut lo = DVector::zeros(m);
    let mut hi = DVector::zeros(m);
    for j in 0..stance.len() {
        fill_friction(&mut c, &mut lo, &mut hi, params, ROWS_PER_FOOT * j, 3 * j);
    }
    Ok((
        QpProblem {
            hessian,
            linear_cost,
            constraint_matrix: c,
            lower_bounds: lo,
            upper_bounds: hi,
        },
        stance,
    ))
}

/// Solves the force QP and scatters the result into a full 12-vector with
/// zeros on swing feet.
pub fn solve_grf(
    solver: &mut QpSolver,
    b_d: &Vector6,
    feet: &FootSet,
    state: &RobotState,
    params: &RobotParams,
    gains: &BalanceGains,
    prev: &StanceForces,
    warm: Option<&WarmStart>,
) -> Result<(GrfSolution, WarmStart), BalanceError> {
    let (problem, stance) = build_grf_qp(b_d, feet, state, params, gains, prev)?;
    let warm = warm.filter(|w| w.dual.len() == problem.num_constraints());
    let sol = solver.solve(&problem, warm)?;
    if sol.status == QpStatus::Infeasible {
        return Err(BalanceError::Infeasible);
    }
    let mut forces = StanceForces::zeros();
    for (j, &leg) in stance.iter().enumerate() {
        forces.set_foot(leg, Vector3::new(sol.primal[3 * j], sol.primal[3 * j + 1], sol.primal[3 * j + 2]));
    }
    Ok((
        GrfSolution {
            forces,
            status: sol.status,
            iterations: sol.iterations,
            kkt_residual: sol.kkt_residual,
        },
        WarmStart::from(&sol),
    ))
}

/// Stateful balance controller: holds `F*_prev`, the QP workspace and the
/// previous active set.
#[derive(Debug, Clone)]
pub struct BalanceController {
    pub gains: BalanceGains,
    solver: QpSolver,
    prev: StanceForces,
    warm: Option<WarmStart>,
    warm_contacts: [bool; NUM_LEGS],
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceOutput {
    pub grf: GrfSolution,
    /// Commanded acceleration `u` (PD plus any extra term).
    pub u: Vector6,
    pub b_d: Vector6,
}

impl BalanceController {
    pub fn new(gains: BalanceGains, settings: QpSettings) -> Self {
        BalanceController {
            gains,
            solver: QpSolver::new(settings),
            prev: StanceForces::zeros(),
            warm: None,
            warm_contacts: [false; NUM_LEGS],
        }
    }

    pub fn previous(&self) -> &StanceForces {
        &self.prev
    }

    /// One control update with `u = PD(e) + extra`.
    pub fn update(
        &mut self,
        error: &StateError,
        extra: &Vector6,
        feet: &FootSet,
        state: &RobotState,
        nominal: &RobotParams,
    ) -> Result<BalanceOutput, BalanceError> {
        let u = pd_input(error, &self.gains) + extra;
        let b_d = desired_dynamics(&u, nominal, state);
        let warm = if self.warm_contacts == feet.contacts { self.warm.as_ref() } else { None };
        let (grf, warm) = solve_grf(&mut self.solver, &b_d, feet, state, nominal, &self.gains, &self.prev, warm)?;
        self.prev = grf.forces;
        self.warm = Some(warm);
        self.warm_contacts = feet.contacts;
        Ok(BalanceOutput { grf, u, b_d })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn square_feet(z: f64) -> FootSet {
        let h = [(0.18, -0.13), (0.18, 0.13), (-0.18, -0.13), (-0.18, 0.13)];
        FootSet {
            positions: h.map(|(x, y)| Vector3::new(x, y, z)),
            contacts: [true; 4],
        }
    }

    #[test]
    fn pd_examples() {
        let g = BalanceGains::default();
        assert_eq!(pd_input(&StateError::default(), &g), Vector6::zeros());
        let mut e = StateError::default();
        e.pose[2] = 1.0;
        let mut g2 = g;
        g2.kp = Vector6::repeat(7.0);
        assert_eq!(pd_input(&e, &g2)[2], -7.0);
    }

    #[test]
    fn desired_dynamics_examples() {
        let p = RobotParams::default();
        let s = RobotState::standing(0.3);
        let b = desired_dynamics(&Vector6::zeros(), &p, &s);
        assert_relative_eq!(b, Vector6::new(0.0, 0.0, 12.0 * 9.81, 0.0, 0.0, 0.0), epsilon = 1e-12);
        let mut u = Vector6::zeros();
        u[2] = 1.0;
        assert_relative_eq!(desired_dynamics(&u, &p, &s)[2], 12.0 * 10.81, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_standing_split() {
        let p = RobotParams::default();
        let s = RobotState::standing(0.3);
        let feet = square_feet(0.0);
        let mut g = BalanceGains::default();
        g.gamma1 = 0.0;
        g.gamma2 = 0.0;
        let b = desired_dynamics(&Vector6::zeros(), &p, &s);
        let mut solver = QpSolver::default();
        let (sol, _) = solve_grf(&mut solver, &b, &feet, &s, &p, &g, &StanceForces::zeros(), None).unwrap();
        for leg in 0..4 {
            let f = sol.forces.foot(leg);
            assert!((f.z - 12.0 * 9.81 / 4.0).abs() < 1e-4, "{f}");
            assert!(f.x.abs() < 1e-4 && f.y.abs() < 1e-4);
        }
        let ustar = realized_input(&sol.forces, &feet, &s, &p);
        assert!(ustar.amax() < 1e-6);
    }

    #[test]
    fn single_foot_under_com_carries_weight() {
        let p = RobotParams::default();
        let s = RobotState::standing(0.3);
        let mut feet = square_feet(0.0);
        feet.positions[0] = Vector3::new(0.0, 0.0, 0.0);
        feet.contacts = [true, false, false, false];
        let b = desired_dynamics(&Vector6::zeros(), &p, &s);
        let mut solver = QpSolver::default();
        let g = BalanceGains { gamma1: 0.0, gamma2: 0.0, ..Default::default() };
        let (sol, _) = solve_grf(&mut solver, &b, &feet, &s, &p, &g, &StanceForces::zeros(), None).unwrap();
        assert!((sol.forces.foot(0).z - 12.0 * 9.81).abs() < 1e-6);
        for leg in 1..4 {
            assert_eq!(sol.forces.foot(leg), Vector3::zeros());
        }
    }

    #[test]
    fn zero_force_is_free_fall() {
        let p = RobotParams::default();
        let s = RobotState::standing(0.3);
        let u = realized_input(&StanceForces::zeros(), &square_feet(0.0), &s, &p);
        assert_relative_eq!(u, Vector6::new(0.0, 0.0, -9.81, 0.0, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn no_stance_is_an_error() {
        let p = RobotParams::default();
        let s = RobotState::standing(0.3);
        let mut feet = square_feet(0.0);
        feet.contacts = [false; 4];
        let mut solver = QpSolver::default();
        let r = solve_grf(&mut solver, &Vector6::zeros(), &feet, &s, &p, &BalanceGains::default(), &StanceForces::zeros(), None);
        assert_eq!(r.unwrap_err(), BalanceError::NoStance);
    }
}

//! Dense convex QP solver.
//!
//! Solves
//!
//! ```text
//! minimize    ½ xᵀ H x + qᵀ x
//! subject to  l ≤ C x ≤ u
//! ```
//!
//! with the Goldfarb–Idnani dual active-set method. The inverse Cholesky
//! factor of the Hessian is kept in orthogonal form (`J`) together with the
//! upper-triangular factor `R` of the active constraint normals, and both are
//! updated with Givens rotations when constraints enter or leave the active
//! set, so each iteration costs O(n²).
//!
//! Hessians that are only positive semidefinite are handled by a proximal
//! point outer loop centred at the origin. Every subproblem is then strictly
//! convex and the iterates converge to the optimal point of least norm.
//!
//! Rows with `l == u` are treated as equalities. Infinite bounds use
//! [`UNBOUNDED`] (positive or negative infinity).

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Sentinel for a missing bound. Use `UNBOUNDED` for upper and `-UNBOUNDED`
/// for lower bounds.
pub const UNBOUNDED: f64 = f64::INFINITY;

pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 4000;

const SYMMETRY_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-9;
/// Hessians whose Cholesky pivots spread more than this (squared ratio) are
/// solved with the proximal loop.
const SINGULAR_PIVOT_RATIO: f64 = 1e-14;
const PROX_RELATIVE_WEIGHT: f64 = 1e-6;
const MAX_PROX_ROUNDS: usize = 500;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("problem data contains NaN")]
    NotANumber,
    #[error("hessian is not symmetric (relative asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("hessian is not positive semidefinite (eigenvalue {0:.3e})")]
    NotPositiveSemidefinite(f64),
    #[error("tolerance must be positive")]
    BadTolerance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub hessian: DMatrix<f64>,
    pub linear_cost: DVector<f64>,
    pub constraint_matrix: DMatrix<f64>,
    pub lower_bounds: DVector<f64>,
    pub upper_bounds: DVector<f64>,
}

impl QpProblem {
    pub fn num_variables(&self) -> usize {
        self.linear_cost.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraint_matrix.nrows()
    }

    /// Checks shapes, NaNs and symmetry. Positive semidefiniteness is checked
    /// lazily by the solver, which only needs an eigen-decomposition when the
    /// Cholesky factorization fails.
    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.linear_cost.len();
        let m = self.constraint_matrix.nrows();
        if self.hessian.shape() != (n, n) {
            return Err(QpError::Dimension(format!(
                "hessian is {:?}, expected ({n}, {n})",
                self.hessian.shape()
            )));
        }
        if m > 0 && self.constraint_matrix.ncols() != n {
            return Err(QpError::Dimension(format!(
                "constraint matrix has {} columns, expected {n}",
                self.constraint_matrix.ncols()
            )));
        }
        if self.lower_bounds.len() != m || self.upper_bounds.len() != m {
            return Err(QpError::Dimension(format!(
                "bounds have lengths {} and {}, expected {m}",
                self.lower_bounds.len(),
                self.upper_bounds.len()
            )));
        }
        let has_nan = self.hessian.iter().any(|v| !v.is_finite())
            || self.linear_cost.iter().any(|v| !v.is_finite())
            || self.constraint_matrix.iter().any(|v| !v.is_finite())
            || self.lower_bounds.iter().any(|v| v.is_nan())
            || self.upper_bounds.iter().any(|v| v.is_nan());
        if has_nan {
            return Err(QpError::NotANumber);
        }
        let scale = self.hessian.amax().max(f64::MIN_POSITIVE);
        let asym = (&self.hessian - self.hessian.transpose()).amax() / scale;
        if asym > SYMMETRY_TOL {
            return Err(QpError::NotSymmetric(asym));
        }
        Ok(())
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.linear_cost.dot(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Solved,
    MaxIterations,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub primal: DVector<f64>,
    /// Row multipliers: positive when the lower bound is active, negative when
    /// the upper bound is active, so that `H x + q − Cᵀ y = 0`.
    pub dual: DVector<f64>,
    pub status: QpStatus,
    pub kkt_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub primal: DVector<f64>,
    pub dual: DVector<f64>,
}

impl From<&QpSolution> for WarmStart {
    fn from(sol: &QpSolution) -> Self {
        WarmStart {
            primal: sol.primal.clone(),
            dual: sol.dual.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        QpSettings {
            tolerance: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Relative KKT residual of a primal/dual pair: the largest of the scaled
/// stationarity, primal infeasibility, dual sign and complementarity errors.
/// Computed only from the problem data.
pub fn kkt_residual(problem: &QpProblem, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let hx = &problem.hessian * x;
    let cty = if problem.num_constraints() > 0 {
        problem.constraint_matrix.tr_mul(y)
    } else {
        DVector::zeros(x.len())
    };
    let stat_scale = hx
        .amax()
        .max(problem.linear_cost.amax())
        .max(cty.amax())
        .max(f64::MIN_POSITIVE);
    let mut worst = (&hx + &problem.linear_cost - &cty).amax() / stat_scale;

    let cx = if problem.num_constraints() > 0 {
        &problem.constraint_matrix * x
    } else {
        DVector::zeros(0)
    };
    let y_scale = 1.0 + y.amax();
    for i in 0..problem.num_constraints() {
        let (lo, hi, v, yi) = (
            problem.lower_bounds[i],
            problem.upper_bounds[i],
            cx[i],
            y[i],
        );
        let infeas = (lo - v).max(v - hi).max(0.0);
        let bound_mag = [lo, hi]
            .iter()
            .filter(|b| b.is_finite())
            .fold(0.0_f64, |a, b| a.max(b.abs()));
        worst = worst.max(infeas / (1.0 + bound_mag));
        let slack = if yi > 0.0 {
            if lo.is_finite() {
                v - lo
            } else {
                f64::INFINITY
            }
        } else if yi < 0.0 {
            if hi.is_finite() {
                hi - v
            } else {
                f64::INFINITY
            }
        } else {
            0.0
        };
        if slack.is_infinite() {
            // multiplier on a missing bound
            worst = worst.max(yi.abs() / y_scale);
        } else {
            worst = worst.max(yi.abs() * slack.abs() / (y_scale * (1.0 + v.abs() + bound_mag)));
        }
    }
    worst
}

/// One-sided constraint `normal · x ≥ rhs` (or `=` for equalities) derived
/// from a row of the problem.
#[derive(Debug, Clone, Copy)]
struct Halfspace {
    row: usize,
    sign: f64,
    rhs: f64,
    equality: bool,
}

struct Constraints {
    list: Vec<Halfspace>,
    /// Normals as columns, in the same order as `list`.
    normals: DMatrix<f64>,
    norms: Vec<f64>,
}

impl Constraints {
    fn from_problem(p: &QpProblem) -> Result<Self, ()> {
        let mut list = Vec::new();
        for i in 0..p.num_constraints() {
            let (lo, hi) = (p.lower_bounds[i], p.upper_bounds[i]);
            if lo > hi {
                return Err(());
            }
            if lo == hi {
                list.push(Halfspace {
                    row: i,
                    sign: 1.0,
                    rhs: lo,
                    equality: true,
                });
                continue;
            }
            if lo.is_finite() {
                list.push(Halfspace {
                    row: i,
                    sign: 1.0,
                    rhs: lo,
                    equality: false,
                });
            }
            if hi.is_finite() {
                list.push(Halfspace {
                    row: i,
                    sign: -1.0,
                    rhs: -hi,
                    equality: false,
                });
            }
        }
        // equalities first
        list.sort_by_key(|h| !h.equality);
        let n = p.num_variables();
        let mut normals = DMatrix::zeros(n, list.len());
        let mut norms = Vec::with_capacity(list.len());
        for (k, h) in list.iter().enumerate() {
            let mut col = normals.column_mut(k);
            for j in 0..n {
                col[j] = h.sign * p.constraint_matrix[(h.row, j)];
            }
            norms.push(col.norm());
        }
        Ok(Constraints {
            list,
            normals,
            norms,
        })
    }

    fn num_equalities(&self) -> usize {
        self.list.iter().take_while(|h| h.equality).count()
    }
}

enum InnerStatus {
    Optimal,
    MaxIterations,
    Infeasible,
}

struct InnerResult {
    x: DVector<f64>,
    active: Vec<usize>,
    u: Vec<f64>,
    iterations: usize,
    status: InnerStatus,
}

/// Factorization workspace of one Goldfarb–Idnani solve.
struct Factor {
    j: DMatrix<f64>,
    r: DMatrix<f64>,
    active: Vec<usize>,
    u: Vec<f64>,
}

impl Factor {
    fn iq(&self) -> usize {
        self.active.len()
    }

    /// Appends a constraint whose transformed normal is `d = Jᵀ n`. Returns
    /// false (leaving the active set unchanged) when the normal is linearly
    /// dependent on the active ones.
    fn add(&mut self, d: &mut DVector<f64>, index: usize, dual: f64) -> bool {
        let n = d.len();
        let iq = self.iq();
        let dnorm = d.norm();
        for jj in ((iq + 1)..n).rev() {
            let (a, b) = (d[jj - 1], d[jj]);
            if b == 0.0 {
                continue;
            }
            let h = a.hypot(b);
            let (c, s) = (a / h, b / h);
            d[jj - 1] = h;
            d[jj] = 0.0;
            for k in 0..n {
                let (p, q) = (self.j[(k, jj - 1)], self.j[(k, jj)]);
                self.j[(k, jj - 1)] = c * p + s * q;
                self.j[(k, jj)] = -s * p + c * q;
            }
        }
        if iq >= n || d[iq].abs() <= 1e-12 * dnorm.max(f64::MIN_POSITIVE) {
            return false;
        }
        for i in 0..=iq {
            self.r[(i, iq)] = d[i];
        }
        self.active.push(index);
        self.u.push(dual);
        true
    }

    /// Removes the active constraint at position `pos` and re-triangularizes.
    fn drop_at(&mut self, pos: usize) {
        let n = self.j.nrows();
        let iq = self.iq();
        self.active.remove(pos);
        self.u.remove(pos);
        for col in pos..(iq - 1) {
            for i in 0..n {
                self.r[(i, col)] = self.r[(i, col + 1)];
            }
        }
        for i in 0..n {
            self.r[(i, iq - 1)] = 0.0;
        }
        for jj in pos..(iq - 1) {
            let (a, b) = (self.r[(jj, jj)], self.r[(jj + 1, jj)]);
            if b == 0.0 {
                continue;
            }
            let h = a.hypot(b);
            let (c, s) = (a / h, b / h);
            self.r[(jj, jj)] = h;
            self.r[(jj + 1, jj)] = 0.0;
            for k in (jj + 1)..(iq - 1) {
                let (p, q) = (self.r[(jj, k)], self.r[(jj + 1, k)]);
                self.r[(jj, k)] = c * p + s * q;
                self.r[(jj + 1, k)] = -s * p + c * q;
            }
            for k in 0..n {
                let (p, q) = (self.j[(k, jj)], self.j[(k, jj + 1)]);
                self.j[(k, jj)] = c * p + s * q;
                self.j[(k, jj + 1)] = -s * p + c * q;
            }
        }
    }

    /// Solves `R r = d[..iq]`.
    fn back_substitute(&self, d: &DVector<f64>) -> Vec<f64> {
        let iq = self.iq();
        let mut r = vec![0.0; iq];
        for i in (0..iq).rev() {
            let mut sum = d[i];
            for k in (i + 1)..iq {
                sum -= self.r[(i, k)] * r[k];
            }
            r[i] = sum / self.r[(i, i)];
        }
        r
    }
}

/// Dense QP solver. Holds a reusable workspace; one instance per thread.
#[derive(Debug, Clone, Default)]
pub struct QpSolver {
    pub settings: QpSettings,
}

impl QpSolver {
    pub fn new(settings: QpSettings) -> Self {
        QpSolver { settings }
    }

    pub fn solve(
        &mut self,
        problem: &QpProblem,
        warm_start: Option<&WarmStart>,
    ) -> Result<QpSolution, QpError> {
        solve_with(problem, warm_start, self.settings.tolerance, self.settings.max_iter)
    }
}

/// Solves `problem` at the given tolerance. See the module docs.
pub fn solve_with(
    problem: &QpProblem,
    warm_start: Option<&WarmStart>,
    tolerance: f64,
    max_iter: usize,
) -> Result<QpSolution, QpError> {
    if !(tolerance > 0.0) {
        return Err(QpError::BadTolerance);
    }
    problem.validate()?;
    let n = problem.num_variables();
    let m = problem.num_constraints();

    let infeasible = |x: DVector<f64>, iterations| QpSolution {
        primal: x,
        dual: DVector::zeros(m),
        status: QpStatus::Infeasible,
        kkt_residual: f64::INFINITY,
        iterations,
    };

    let Ok(cons) = Constraints::from_problem(problem) else {
        return Ok(infeasible(DVector::zeros(n), 0));
    };

    let warm_active = warm_start.map(|w| warm_active_set(&cons, w)).unwrap_or_default();

    let hessian = problem.hessian.clone();
    let chol = hessian.clone().cholesky();
    let strictly_convex = match &chol {
        Some(c) => {
            let diag = c.l_dirty().diagonal();
            let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), &v| {
                (lo.min(v.abs()), hi.max(v.abs()))
            });
            n == 0 || (lo / hi).powi(2) > SINGULAR_PIVOT_RATIO
        }
        None => false,
    };

    if strictly_convex {
        let l = chol.expect("checked above").l();
        let res = gi_solve(&l, &problem.linear_cost, &cons, &warm_active, max_iter);
        return Ok(finish(problem, &cons, res, tolerance, 0));
    }

    // Positive semidefinite: verify, then run the proximal loop.
    if n > 0 {
        let min_eig = hessian
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let scale = hessian.amax().max(1.0);
        if min_eig < -PSD_TOL * scale {
            return Err(QpError::NotPositiveSemidefinite(min_eig));
        }
    }
    let diag_max = hessian.diagonal().amax();
    let rho = PROX_RELATIVE_WEIGHT * if diag_max > 0.0 { diag_max } else { 1.0 };
    let mut shifted = hessian.clone();
    for i in 0..n {
        shifted[(i, i)] += rho;
    }
    let l = shifted
        .cholesky()
        .expect("PSD hessian plus a positive shift is positive definite")
        .l();

    let mut center = DVector::zeros(n);
    let mut active = warm_active;
    let mut total_iter = 0;
    let mut last = None;
    for _ in 0..MAX_PROX_ROUNDS {
        let g0 = &problem.linear_cost - rho * &center;
        let res = gi_solve(&l, &g0, &cons, &active, max_iter.saturating_sub(total_iter));
        total_iter += res.iterations;
        if !matches!(res.status, InnerStatus::Optimal) {
            return Ok(finish(problem, &cons, res, tolerance, total_iter));
        }
        let step = (&res.x - &center).amax();
        center = res.x.clone();
        active = res.active.clone();
        let sol = finish(problem, &cons, res, tolerance, total_iter);
        let converged = sol.kkt_residual <= 0.01 * tolerance
            || step <= 1e-14 * (1.0 + center.amax());
        last = Some(sol);
        if converged || total_iter >= max_iter {
            break;
        }
    }
    let mut sol = last.expect("at least one proximal round");
    sol.status = if sol.kkt_residual <= tolerance {
        QpStatus::Solved
    } else {
        QpStatus::MaxIterations
    };
    Ok(sol)
}

fn warm_active_set(cons: &Constraints, warm: &WarmStart) -> Vec<usize> {
    cons.list
        .iter()
        .enumerate()
        .filter(|(_, h)| {
            !h.equality
                && warm
                    .dual
                    .get(h.row)
                    .map(|&y| y * h.sign > 0.0)
                    .unwrap_or(false)
        })
        .map(|(k, _)| k)
        .collect()
}

fn finish(
    problem: &QpProblem,
    cons: &Constraints,
    res: InnerResult,
    tolerance: f64,
    extra_iterations: usize,
) -> QpSolution {
    let m = problem.num_constraints();
    let mut dual = DVector::zeros(m);
    for (&k, &u) in res.active.iter().zip(res.u.iter()) {
        let h = cons.list[k];
        dual[h.row] += h.sign * u;
    }
    let kkt = kkt_residual(problem, &res.x, &dual);
    let status = match res.status {
        InnerStatus::Infeasible => QpStatus::Infeasible,
        InnerStatus::MaxIterations => QpStatus::MaxIterations,
        InnerStatus::Optimal if kkt <= tolerance => QpStatus::Solved,
        InnerStatus::Optimal => QpStatus::MaxIterations,
    };
    QpSolution {
        primal: res.x,
        dual,
        status,
        kkt_residual: if matches!(status, QpStatus::Infeasible) {
            f64::INFINITY
        } else {
            kkt
        },
        iterations: res.iterations + extra_iterations,
    }
}

/// Goldfarb–Idnani iterations for `½xᵀGx + g0ᵀx` with `G = L Lᵀ`.
fn gi_solve(
    l: &DMatrix<f64>,
    g0: &DVector<f64>,
    cons: &Constraints,
    warm: &[usize],
    max_iter: usize,
) -> InnerResult {
    let n = g0.len();
    let j = l
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .expect("cholesky factor has a positive diagonal")
        .transpose();
    let mut f = Factor {
        j,
        r: DMatrix::zeros(n, n),
        active: Vec::with_capacity(n),
        u: Vec::with_capacity(n),
    };
    let n_eq = cons.num_equalities();
    let mut iterations = 0;

    // Seed the factorization with equalities and the warm active set.
    let mut dependent_equalities = Vec::new();
    for k in (0..n_eq).chain(warm.iter().copied()) {
        let mut d = f.j.tr_mul(&cons.normals.column(k));
        if !f.add(&mut d, k, 0.0) && k < n_eq {
            dependent_equalities.push(k);
        }
    }
    let mut x = subspace_minimizer(&mut f, g0, cons, n_eq);

    for &k in &dependent_equalities {
        let s = cons.normals.column(k).dot(&x) - cons.list[k].rhs;
        if s.abs() > 1e-9 * (1.0 + cons.list[k].rhs.abs()) {
            return InnerResult {
                x,
                active: f.active,
                u: f.u,
                iterations,
                status: InnerStatus::Infeasible,
            };
        }
    }

    let mut is_active = vec![false; cons.list.len()];
    for &k in &f.active {
        is_active[k] = true;
    }

    loop {
        // Step 1: most violated inactive inequality.
        let scale_x = x.amax();
        let mut chosen = None;
        let mut worst = 0.0;
        for k in n_eq..cons.list.len() {
            if is_active[k] {
                continue;
            }
            let h = cons.list[k];
            let s = cons.normals.column(k).dot(&x) - h.rhs;
            let thresh = 1e-11 * (1.0 + h.rhs.abs() + cons.norms[k] * scale_x);
            if s < -thresh {
                let v = s / cons.norms[k].max(f64::MIN_POSITIVE);
                if v < worst {
                    worst = v;
                    chosen = Some(k);
                }
            }
        }
        let Some(p) = chosen else {
            return InnerResult {
                x,
                active: f.active,
                u: f.u,
                iterations,
                status: InnerStatus::Optimal,
            };
        };
        let np = cons.normals.column(p).clone_owned();
        let mut slack = np.dot(&x) - cons.list[p].rhs;
        let mut u_plus = 0.0;

        // Step 2: move until p becomes active.
        loop {
            if iterations >= max_iter {
                return InnerResult {
                    x,
                    active: f.active,
                    u: f.u,
                    iterations,
                    status: InnerStatus::MaxIterations,
                };
            }
            iterations += 1;
            let mut d = f.j.tr_mul(&np);
            let iq = f.iq();
            let mut z = DVector::zeros(n);
            for col in iq..n {
                if d[col] != 0.0 {
                    z.axpy(d[col], &f.j.column(col), 1.0);
                }
            }
            let r = f.back_substitute(&d);

            let mut t1 = f64::INFINITY;
            let mut leaving = None;
            for (pos, &rk) in r.iter().enumerate() {
                if f.active[pos] < n_eq || rk <= 0.0 {
                    continue;
                }
                let ratio = f.u[pos] / rk;
                if ratio < t1 {
                    t1 = ratio;
                    leaving = Some(pos);
                }
            }
            let zn: f64 = d.rows(iq, n - iq).norm_squared();
            let t2 = if zn > 1e-13 * d.norm_squared() {
                -slack / zn
            } else {
                f64::INFINITY
            };

            if t1.is_infinite() && t2.is_infinite() {
                return InnerResult {
                    x,
                    active: f.active,
                    u: f.u,
                    iterations,
                    status: InnerStatus::Infeasible,
                };
            }
            if t2.is_infinite() {
                // Dual-only step, then drop the blocking constraint.
                for (ui, ri) in f.u.iter_mut().zip(&r) {
                    *ui -= t1 * ri;
                }
                u_plus += t1;
                let pos = leaving.expect("finite t1 has a leaving constraint");
                is_active[f.active[pos]] = false;
                f.drop_at(pos);
                continue;
            }
            let t = t1.min(t2);
            x.axpy(t, &z, 1.0);
            for (ui, ri) in f.u.iter_mut().zip(&r) {
                *ui -= t * ri;
            }
            u_plus += t;
            slack += t * zn;
            if t2 <= t1 {
                if f.add(&mut d, p, u_plus) {
                    is_active[p] = true;
                }
                break;
            }
            let pos = leaving.expect("t1 < t2 has a leaving constraint");
            is_active[f.active[pos]] = false;
            f.drop_at(pos);
        }
    }
}

/// Minimizer over the affine set of the current active constraints (all held
/// with equality). Inequalities with negative multipliers are dropped until
/// the pair is dual feasible, which is the invariant the main loop needs.
fn subspace_minimizer(
    f: &mut Factor,
    g0: &DVector<f64>,
    cons: &Constraints,
    n_eq: usize,
) -> DVector<f64> {
    let n = g0.len();
    loop {
        let iq = f.iq();
        let jg = f.j.tr_mul(g0);
        // y1 = R⁻ᵀ b_active
        let mut y = DVector::zeros(n);
        for i in 0..iq {
            let mut sum = cons.list[f.active[i]].rhs;
            for k in 0..i {
                sum -= f.r[(k, i)] * y[k];
            }
            y[i] = sum / f.r[(i, i)];
        }
        for i in iq..n {
            y[i] = -jg[i];
        }
        let x = &f.j * &y;
        let mut rhs = DVector::zeros(n);
        for i in 0..iq {
            rhs[i] = y[i] + jg[i];
        }
        let u = f.back_substitute(&rhs);
        let mut most_negative = None;
        let mut worst = 0.0;
        for (pos, &ui) in u.iter().enumerate() {
            if f.active[pos] >= n_eq && ui < worst {
                worst = ui;
                most_negative = Some(pos);
            }
        }
        f.u = u;
        match most_negative {
            None => return x,
            Some(pos) => f.drop_at(pos),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bounded_scalar() -> QpProblem {
        QpProblem {
            hessian: DMatrix::from_element(1, 1, 1.0),
            linear_cost: DVector::zeros(1),
            constraint_matrix: DMatrix::from_element(1, 1, 1.0),
            lower_bounds: DVector::from_element(1, 1.0),
            upper_bounds: DVector::from_element(1, 2.0),
        }
    }

    #[test]
    fn active_lower_bound_has_unit_multiplier() {
        let sol = solve_with(&bounded_scalar(), None, 1e-9, 100).unwrap();
        assert_eq!(sol.status, QpStatus::Solved);
        assert_abs_diff_eq!(sol.primal[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.dual[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn active_upper_bound_has_negative_multiplier() {
        let mut p = bounded_scalar();
        p.linear_cost[0] = -5.0;
        let sol = solve_with(&p, None, 1e-9, 100).unwrap();
        assert_abs_diff_eq!(sol.primal[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.dual[0], -3.0, epsilon = 1e-12);
    }

    #[test]
    fn unconstrained_identity() {
        let q = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let p = QpProblem {
            hessian: DMatrix::identity(3, 3),
            linear_cost: q.clone(),
            constraint_matrix: DMatrix::zeros(0, 3),
            lower_bounds: DVector::zeros(0),
            upper_bounds: DVector::zeros(0),
        };
        let sol = solve_with(&p, None, 1e-9, 10).unwrap();
        assert_eq!(sol.status, QpStatus::Solved);
        assert_abs_diff_eq!(sol.primal, -q, epsilon = 1e-14);
    }

    #[test]
    fn crossed_bounds_are_infeasible() {
        let mut p = bounded_scalar();
        p.lower_bounds[0] = 3.0;
        let sol = solve_with(&p, None, 1e-6, 100).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn empty_intersection_is_infeasible() {
        // x ≥ 1 and x ≤ 0 written as two rows
        let p = QpProblem {
            hessian: DMatrix::identity(1, 1),
            linear_cost: DVector::zeros(1),
            constraint_matrix: DMatrix::from_vec(2, 1, vec![1.0, 1.0]),
            lower_bounds: DVector::from_vec(vec![1.0, -UNBOUNDED]),
            upper_bounds: DVector::from_vec(vec![UNBOUNDED, 0.0]),
        };
        let sol = solve_with(&p, None, 1e-6, 100).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn equality_rows() {
        // min ½|x|² s.t. x0 + x1 = 2
        let p = QpProblem {
            hessian: DMatrix::identity(2, 2),
            linear_cost: DVector::zeros(2),
            constraint_matrix: DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            lower_bounds: DVector::from_element(1, 2.0),
            upper_bounds: DVector::from_element(1, 2.0),
        };
        let sol = solve_with(&p, None, 1e-9, 10).unwrap();
        assert_eq!(sol.status, QpStatus::Solved);
        assert_abs_diff_eq!(sol.primal[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.dual[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn semidefinite_hessian_returns_least_norm_optimum() {
        // min ½(x0 + x1 − 2)² has a line of minimizers; least norm is (1, 1).
        let p = QpProblem {
            hessian: DMatrix::from_element(2, 2, 1.0),
            linear_cost: DVector::from_element(2, -2.0),
            constraint_matrix: DMatrix::zeros(0, 2),
            lower_bounds: DVector::zeros(0),
            upper_bounds: DVector::zeros(0),
        };
        let sol = solve_with(&p, None, 1e-9, 1000).unwrap();
        assert_eq!(sol.status, QpStatus::Solved);
        assert_abs_diff_eq!(sol.primal[0], 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(sol.primal[1], 1.0, epsilon = 1e-7);
    }

    #[test]
    fn indefinite_hessian_rejected() {
        let mut p = bounded_scalar();
        p.hessian[(0, 0)] = -1.0;
        assert!(matches!(
            solve_with(&p, None, 1e-6, 10),
            Err(QpError::NotPositiveSemidefinite(_))
        ));
    }

    #[test]
    fn asymmetric_hessian_rejected() {
        let p = QpProblem {
            hessian: DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]),
            linear_cost: DVector::zeros(2),
            constraint_matrix: DMatrix::zeros(0, 2),
            lower_bounds: DVector::zeros(0),
            upper_bounds: DVector::zeros(0),
        };
        assert!(matches!(
            solve_with(&p, None, 1e-6, 10),
            Err(QpError::NotSymmetric(_))
        ));
    }

    #[test]
    fn residual_flags_wrong_pair() {
        let p = bounded_scalar();
        let r = kkt_residual(&p, &DVector::from_element(1, 1.5), &DVector::zeros(1));
        assert!(r > 0.1);
    }
}

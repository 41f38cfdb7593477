#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srb_adaptive::qp::{QpProblem, UNBOUNDED};

/// Brute-force optimum of a strictly convex QP: every assignment of rows to
/// {inactive, at lower, at upper} is solved as an equality-constrained KKT
/// system, and the feasible candidate with the smallest objective wins.
pub fn enumerate_qp(p: &QpProblem) -> Option<DVector<f64>> {
    let n = p.num_variables();
    let m = p.num_constraints();
    let choices: Vec<Vec<u8>> = (0..m)
        .map(|i| {
            let mut c = vec![0u8];
            if p.lower_bounds[i].is_finite() {
                c.push(1);
            }
            if p.upper_bounds[i].is_finite() && p.upper_bounds[i] != p.lower_bounds[i] {
                c.push(2);
            }
            c
        })
        .collect();
    let mut idx = vec![0usize; m];
    let mut best: Option<(f64, DVector<f64>)> = None;
    loop {
        let active: Vec<(usize, f64)> = (0..m)
            .filter_map(|i| match choices[i][idx[i]] {
                1 => Some((i, p.lower_bounds[i])),
                2 => Some((i, p.upper_bounds[i])),
                _ => None,
            })
            .collect();
        if active.len() <= n {
            if let Some(x) = eqp(p, &active) {
                let cx = &p.constraint_matrix * &x;
                let feasible = (0..m).all(|i| {
                    cx[i] >= p.lower_bounds[i] - 1e-9 && cx[i] <= p.upper_bounds[i] + 1e-9
                });
                if feasible {
                    let f = p.objective(&x);
                    if best.as_ref().map_or(true, |(bf, _)| f < *bf) {
                        best = Some((f, x));
                    }
                }
            }
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == m {
                return best.map(|(_, x)| x);
            }
            idx[k] += 1;
            if idx[k] < choices[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn eqp(p: &QpProblem, active: &[(usize, f64)]) -> Option<DVector<f64>> {
    let n = p.num_variables();
    let k = active.len();
    let mut kkt = DMatrix::zeros(n + k, n + k);
    let mut rhs = DVector::zeros(n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(&p.hessian);
    for j in 0..n {
        rhs[j] = -p.linear_cost[j];
    }
    for (r, &(row, b)) in active.iter().enumerate() {
        for j in 0..n {
            kkt[(n + r, j)] = p.constraint_matrix[(row, j)];
            kkt[(j, n + r)] = p.constraint_matrix[(row, j)];
        }
        rhs[n + r] = b;
    }
    let lu = kkt.lu();
    let sol = lu.solve(&rhs)?;
    if !sol.iter().all(|v| v.is_finite()) {
        return None;
    }
    Some(sol.rows(0, n).into_owned())
}

/// Random strictly convex QP with a known interior point, so it is feasible.
/// Rows are one- or two-sided at random.
pub fn random_qp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> QpProblem {
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let hessian = &g * g.transpose() + DMatrix::identity(n, n) * 0.1;
    let hessian = (&hessian + hessian.transpose()) * 0.5;
    let linear_cost = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
    let constraint_matrix = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let x0 = DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5));
    let c0 = &constraint_matrix * &x0;
    let mut lower = DVector::from_element(m, -UNBOUNDED);
    let mut upper = DVector::from_element(m, UNBOUNDED);
    for i in 0..m {
        let kind = rng.random_range(0..4);
        let lo = c0[i] - rng.random_range(0.05..1.0);
        let hi = c0[i] + rng.random_range(0.05..1.0);
        match kind {
            0 => lower[i] = lo,
            1 => upper[i] = hi,
            _ if i % 4 == 0 => {
                lower[i] = lo;
                upper[i] = hi;
            }
            _ => lower[i] = lo,
        }
    }
    QpProblem {
        hessian,
        linear_cost,
        constraint_matrix,
        lower_bounds: lower,
        upper_bounds: upper,
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

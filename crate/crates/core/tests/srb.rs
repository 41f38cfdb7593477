use nalgebra::{DMatrix, Matrix3, UnitQuaternion, Vector3};
use proptest::prelude::*;
use srb_adaptive::srb::*;

fn arb_vec3(scale: f64) -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-scale..scale).prop_map(|a| Vector3::new(a[0], a[1], a[2]))
}

fn arb_state() -> impl Strategy<Value = RobotState> {
    (arb_vec3(1.0), arb_vec3(0.5), arb_vec3(1.0), arb_vec3(1.0)).prop_map(|(p, e, v, w)| RobotState {
        position: p,
        euler: e,
        velocity: v,
        angular_velocity: w,
    })
}

fn arb_feet() -> impl Strategy<Value = FootSet> {
    prop::array::uniform4(arb_vec3(0.5)).prop_map(|positions| FootSet {
        positions,
        contacts: [true; 4],
    })
}

fn arb_forces() -> impl Strategy<Value = Vector12> {
    prop::array::uniform12(-100.0f64..100.0).prop_map(|a| Vector12::from_iterator(a))
}

/// Newton–Euler under the simplified model, written out per foot.
fn newton_euler(s: &RobotState, feet: &FootSet, p: &RobotParams, f: &Vector12) -> Vector12 {
    let (cr, sr) = (s.euler.x.cos(), s.euler.x.sin());
    let (cp, sp) = (s.euler.y.cos(), s.euler.y.sin());
    let (cy, sy) = (s.euler.z.cos(), s.euler.z.sin());
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr);
    let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
    let rz = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
    let r = rz * ry * rx;
    let ig = r * p.body_inertia * r.transpose();
    let mut force = Vector3::zeros();
    let mut torque = Vector3::zeros();
    for leg in 0..4 {
        let fi = Vector3::new(f[3 * leg], f[3 * leg + 1], f[3 * leg + 2]);
        force += fi;
        torque += (feet.positions[leg] - s.position).cross(&fi);
    }
    let acc = force / p.mass + p.gravity;
    let alpha = ig.try_inverse().unwrap() * torque;
    let theta_dot = rz * s.angular_velocity;
    let mut out = Vector12::zeros();
    for i in 0..3 {
        out[i] = s.velocity[i];
        out[3 + i] = theta_dot[i];
        out[6 + i] = acc[i];
        out[9 + i] = alpha[i];
    }
    out
}

fn taylor_expm(a: &DMatrix<f64>, terms: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=terms {
        term = &term * a / k as f64;
        sum += &term;
    }
    sum
}

/// RK4 on Φ̇ = AΦ, Γ̇ = ΦB from (I, 0).
fn rk4_zoh(a: &DMatrix<f64>, b: &DMatrix<f64>, dt: f64, steps: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let h = dt / steps as f64;
    let mut phi = DMatrix::identity(n, n);
    let mut gam = DMatrix::zeros(n, b.ncols());
    for _ in 0..steps {
        let k1p = a * &phi;
        let k1g = &phi * b;
        let p2 = &phi + &k1p * (h / 2.0);
        let k2p = a * &p2;
        let k2g = &p2 * b;
        let p3 = &phi + &k2p * (h / 2.0);
        let k3p = a * &p3;
        let k3g = &p3 * b;
        let p4 = &phi + &k3p * h;
        let k4p = a * &p4;
        let k4g = &p4 * b;
        phi += (k1p + &k2p * 2.0 + &k3p * 2.0 + k4p) * (h / 6.0);
        gam += (k1g + k2g * 2.0 + k3g * 2.0 + k4g) * (h / 6.0);
    }
    (phi, gam)
}

fn quaternion_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let q = UnitQuaternion::from_matrix(r);
    let (w, v) = (q.w, q.vector().into_owned());
    let (w, v) = if w < 0.0 { (-w, -v) } else { (w, v) };
    let s = v.norm();
    if s < 1e-300 {
        return Vector3::zeros();
    }
    v * (2.0 * s.atan2(w) / s)
}

#[test]
fn zoh_matches_rk4_on_a_stable_system() {
    let a = DMatrix::from_row_slice(4, 4, &[
        -1.0, 0.5, 0.0, 0.2, //
        -0.3, -2.0, 0.4, 0.0, //
        0.0, 0.1, -0.5, 0.3, //
        0.2, 0.0, -0.6, -1.5,
    ]);
    let b = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.5, -1.0, 0.0, 2.0, 0.3, 0.3]);
    let (ad, bd) = discretize_zoh(&a, &b, 0.02).unwrap();
    let (phi, gam) = rk4_zoh(&a, &b, 0.02, 2000);
    assert!((ad - phi).amax() < 1e-8);
    assert!((bd - gam).amax() < 1e-8);
}

proptest! {
    #[test]
    fn matrices_match_newton_euler(s in arb_state(), feet in arb_feet(), f in arb_forces()) {
        let p = RobotParams::default();
        let m = continuous_matrices(&s, &feet, &p);
        let got = m.derivative(&s.to_vector(), &f);
        let want = newton_euler(&s, &feet, &p, &f);
        prop_assert!((got - want).amax() <= 1e-10 * (1.0 + want.amax()));
        prop_assert_eq!(m.h.rows(0, 6).amax(), 0.0);
    }

    #[test]
    fn zoh_matches_taylor_for_small_steps(entries in prop::collection::vec(-1.0f64..1.0, 25), dt in 0.001f64..0.02) {
        let a = DMatrix::from_vec(5, 5, entries);
        let b = DMatrix::from_fn(5, 2, |i, j| (i + 2 * j) as f64 * 0.1);
        prop_assume!((&a * dt).norm() < 0.1);
        let (ad, bd) = discretize_zoh(&a, &b, dt).unwrap();
        prop_assert!((&ad - taylor_expm(&(&a * dt), 6)).amax() < 1e-9);
        // ∫exp(Aτ)dτ = dt·Σ (A dt)^k/(k+1)!
        let mut integral = DMatrix::zeros(5, 5);
        let mut term = DMatrix::identity(5, 5) * dt;
        for k in 1..=7 {
            integral += &term;
            term = &term * &a * dt / (k + 1) as f64;
        }
        prop_assert!((&bd - integral * &b).amax() < 1e-9);
    }

    #[test]
    fn zoh_semigroup(entries in prop::collection::vec(-2.0f64..2.0, 16), t1 in 0.001f64..0.05, t2 in 0.001f64..0.05) {
        let a = DMatrix::from_vec(4, 4, entries);
        let b = DMatrix::zeros(4, 1);
        let (a1, _) = discretize_zoh(&a, &b, t1).unwrap();
        let (a2, _) = discretize_zoh(&a, &b, t2).unwrap();
        let (a12, _) = discretize_zoh(&a, &b, t1 + t2).unwrap();
        prop_assert!((a1 * a2 - a12).amax() < 1e-9);
    }

    #[test]
    fn orientation_error_matches_quaternion_log(s in arb_state(), d in arb_state()) {
        let e = state_error(&s, &d).unwrap();
        let want = quaternion_log(&(s.rotation() * d.rotation().transpose()));
        prop_assert!((e.pose.fixed_rows::<3>(3).into_owned() - want).amax() < 1e-10);
        prop_assert_eq!(e.pose.fixed_rows::<3>(0).into_owned(), s.position - d.position);
        prop_assert_eq!(e.rate.fixed_rows::<3>(0).into_owned(), s.velocity - d.velocity);
    }

    #[test]
    fn error_vanishes_only_on_match(s in arb_state(), d in arb_state()) {
        let e = state_error(&s, &d).unwrap();
        prop_assert_eq!(state_error(&s, &s).unwrap().norm(), 0.0);
        let same = (s.to_vector() - d.to_vector()).amax() == 0.0;
        prop_assert_eq!(e.norm() == 0.0, same);
    }
}

#[test]
fn free_fall_over_one_millisecond() {
    let p = RobotParams::default();
    let s = RobotState::standing(0.3);
    let feet = FootSet { positions: [Vector3::zeros(); 4], contacts: [false; 4] };
    let (dc, hc) = extended_matrices(&s, &feet, &p, InertiaRotation::YawOnly);
    let (ad, bd) = discretize_zoh(
        &DMatrix::from_column_slice(13, 13, dc.as_slice()),
        &DMatrix::from_column_slice(13, 12, hc.as_slice()),
        1e-3,
    )
    .unwrap();
    let xc = augment_gravity(&s.to_vector(), p.gravity_norm());
    let next = ad * DMatrix::from_column_slice(13, 1, xc.as_slice());
    assert!((next[8] - (-9.81e-3)).abs() < 1e-14);
    assert!((next[2] - (0.3 - 0.5 * 9.81e-6)).abs() < 1e-15);
    assert_eq!(bd.nrows(), 13);
}

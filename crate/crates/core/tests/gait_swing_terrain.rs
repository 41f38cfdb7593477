use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use srb_adaptive::gait::{contacts_at, horizon_schedule, horizon_schedule_sampled, GaitSpec};
use srb_adaptive::swing::{footstep_target, swing_position, SwingPlan};
use srb_adaptive::terrain::{fit_slope, Penetration, SoftGround, TerrainModel};

fn arb_gait() -> impl Strategy<Value = GaitSpec> {
    prop_oneof![
        Just(GaitSpec::stand()),
        Just(GaitSpec::trot()),
        Just(GaitSpec::bound()),
        Just(GaitSpec::walk()),
    ]
}

fn v3(r: f64) -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-r..r).prop_map(|a| Vector3::new(a[0], a[1], a[2]))
}

proptest! {
    #[test]
    fn contacts_are_periodic(g in arb_gait(), t in 0.0f64..20.0) {
        prop_assert_eq!(contacts_at(&g, t).contacts, contacts_at(&g, t + g.period).contacts);
    }

    #[test]
    fn schedule_rows_follow_phase(g in arb_gait(), t in 0.0f64..5.0, k in 1usize..15) {
        let s = horizon_schedule(&g, t, 0.03, k);
        prop_assert_eq!(s.flags.len(), k);
        prop_assert_eq!(s.flags[0], contacts_at(&g, t).contacts);
        for (j, row) in s.flags.iter().enumerate() {
            prop_assert_eq!(*row, contacts_at(&g, t + j as f64 * 0.03).contacts);
        }
    }

    #[test]
    fn zero_offset_sampling_is_the_plain_schedule(g in arb_gait(), t in 0.0f64..5.0, k in 1usize..15) {
        let plain = horizon_schedule(&g, t, 0.03, k);
        let sampled = horizon_schedule_sampled(&g, t, 0.03, k, |_| 0.0);
        prop_assert_eq!(plain.flags, sampled.flags);
    }

    #[test]
    fn midpoint_sampling_reads_the_step_centre(g in arb_gait(), t in 0.0f64..5.0, k in 1usize..15) {
        let s = horizon_schedule_sampled(&g, t, 0.03, k, |_| 0.5);
        for (j, row) in s.flags.iter().enumerate() {
            prop_assert_eq!(*row, contacts_at(&g, t + (j as f64 + 0.5) * 0.03).contacts);
        }
    }

    #[test]
    fn swing_velocity_is_the_time_derivative(
        p0 in v3(0.5), pf in v3(0.5), dur in 0.1f64..0.6, apex in 0.02f64..0.15, s in 0.01f64..0.99,
    ) {
        let plan = SwingPlan { liftoff: p0, target: pf, duration: dur, apex_height: apex };
        let h = 1e-6;
        let (a, _) = swing_position(&plan, s - h);
        let (b, _) = swing_position(&plan, s + h);
        let fd = (b - a) / (2.0 * h * dur);
        let (_, v) = swing_position(&plan, s);
        prop_assert!((fd - v).amax() <= 1e-6 * (1.0 + v.amax()));
    }

    #[test]
    fn swing_clears_the_chord(p0 in v3(0.3), pf in v3(0.3), apex in 0.02f64..0.15) {
        let plan = SwingPlan { liftoff: p0, target: pf, duration: 0.2, apex_height: apex };
        let (mid, _) = swing_position(&plan, 0.5);
        prop_assert!(mid.z - 0.5 * (p0.z + pf.z) >= apex - 1e-12);
    }

    #[test]
    fn capture_term_is_affine_in_velocity_error(
        hip in v3(1.0), vd in v3(1.0), err in v3(1.0), t in 0.1f64..0.5,
    ) {
        let flat = TerrainModel::flat();
        let base = footstep_target(&hip, t, &vd, &vd, 0.3, 9.81, &flat);
        let one = footstep_target(&hip, t, &vd, &(vd + err), 0.3, 9.81, &flat);
        let two = footstep_target(&hip, t, &vd, &(vd + err * 2.0), 0.3, 9.81, &flat);
        let d1 = one - base;
        let d2 = two - base;
        prop_assert!((d2 - d1 * 2.0).amax() < 1e-12);
    }

    #[test]
    fn soft_ground_never_pulls(f in v3(200.0), depth in 0.0f64..0.1, rate in -2.0f64..2.0) {
        let t = TerrainModel::soft(SoftGround::default());
        let fa = t.realize_force(&f, &Penetration { depth, rate });
        prop_assert!(fa.z >= 0.0);
        prop_assert!(fa.z <= SoftGround::default().force_cap);
    }

    #[test]
    fn rigid_identity_is_bitwise(f in v3(500.0), a1 in -0.5f64..0.5) {
        let pen = Penetration { depth: 0.01, rate: 0.1 };
        prop_assert_eq!(TerrainModel::flat().realize_force(&f, &pen), f);
        prop_assert_eq!(TerrainModel::slope(0.0, a1, 0.0).realize_force(&f, &pen), f);
    }

    #[test]
    fn coplanar_fit_is_exact(a in prop::array::uniform3(-1.0f64..1.0), xy in prop::array::uniform8(-1.0f64..1.0)) {
        let pts: Vec<_> = (0..4)
            .map(|i| {
                let (x, y) = (xy[2 * i] + [0.3, 0.3, -0.3, -0.3][i], xy[2 * i + 1] * 0.1 + [0.2, -0.2, 0.2, -0.2][i]);
                Vector3::new(x, y, a[0] + a[1] * x + a[2] * y)
            })
            .collect();
        let c = fit_slope(&pts).unwrap();
        for p in &pts {
            prop_assert!((c[0] + c[1] * p.x + c[2] * p.y - p.z).abs() <= 1e-10);
        }
    }

    #[test]
    fn noisy_fit_matches_normal_equations(xy in prop::array::uniform8(-0.5f64..0.5), noise in prop::array::uniform4(-0.02f64..0.02)) {
        let corners = [(0.2, 0.13), (0.2, -0.13), (-0.2, 0.13), (-0.2, -0.13)];
        let pts: Vec<_> = (0..4)
            .map(|i| {
                let x = corners[i].0 + 0.1 * xy[2 * i];
                let y = corners[i].1 + 0.1 * xy[2 * i + 1];
                Vector3::new(x, y, 0.1 + 0.2 * x - 0.1 * y + noise[i])
            })
            .collect();
        let c = fit_slope(&pts).unwrap();
        let mut ata = Matrix3::zeros();
        let mut atz = Vector3::zeros();
        for p in &pts {
            let r = Vector3::new(1.0, p.x, p.y);
            ata += r * r.transpose();
            atz += r * p.z;
        }
        let want = ata.try_inverse().unwrap() * atz;
        for i in 0..3 {
            prop_assert!((c[i] - want[i]).abs() < 1e-9);
        }
    }
}

#[test]
fn coplanar_fit_recovers_known_planes() {
    let pts: Vec<_> = [(0.3, 0.1), (0.2, -0.4), (-0.2, 0.1), (-0.1, -0.1)]
        .iter()
        .map(|&(x, y)| Vector3::new(x, y, 0.05 * x + 0.2 * y))
        .collect();
    let c = fit_slope(&pts).unwrap();
    assert!((c[1] - 0.05).abs() < 1e-12 && (c[2] - 0.2).abs() < 1e-12 && c[0].abs() < 1e-12);
}

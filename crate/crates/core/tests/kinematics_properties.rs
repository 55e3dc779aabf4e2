mod oracles;

use std::f64::consts::PI;

use musinger::display::kinematics::elbows_outward;
use musinger::display::{
    forward_kinematics, inverse_kinematics, nearest_reachable, workspace_contains, JointAngles,
    KinematicsError, LinkageGeometry, Point,
};
use oracles::{fk_oracle, random_geometry, symmetric_pose_oracle};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn fk_agrees_with_rotation_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut compared = 0;
    for _ in 0..20 {
        let g = random_geometry(&mut rng);
        for _ in 0..2_000 {
            let a = JointAngles::new(
                rng.random_range(g.angle_min_rad..g.angle_max_rad),
                rng.random_range(g.angle_min_rad..g.angle_max_rad),
            );
            match (forward_kinematics(&g, a), fk_oracle(&g, a.theta1_rad, a.theta2_rad)) {
                (Ok(p), Some((x, y))) => {
                    let scale = g.proximal_length_mm + g.distal_length_mm;
                    assert!((p.x - x).abs() <= 1e-9 * scale && (p.y - y).abs() <= 1e-9 * scale, "{p} vs ({x}, {y})");
                    compared += 1;
                }
                (Err(KinematicsError::Singular), None) => {}
                (got, want) => panic!("{a:?}: library {got:?}, oracle {want:?}"),
            }
        }
    }
    assert!(compared > 20_000);
}

#[test]
fn symmetric_poses_land_on_axis() {
    let g = LinkageGeometry::default();
    for deg in -170..=-10 {
        let t1 = (deg as f64).to_radians();
        let a = JointAngles::new(t1, PI - t1 - 2.0 * PI);
        if let Some((x, y)) = (fk_oracle(&g, a.theta1_rad, a.theta2_rad)).map(|_| symmetric_pose_oracle(&g, t1)) {
            let p = forward_kinematics(&g, a).unwrap();
            assert!((p.x - x).abs() < 1e-9 && (p.y - y).abs() < 1e-9, "{deg}: {p} vs ({x}, {y})");
        }
    }
    let p = forward_kinematics(&g, JointAngles::from_degrees(-90.0, -90.0)).unwrap();
    assert!((p.x - 15.0).abs() < 1e-3 && (p.y + 62.081).abs() < 1e-3);
}

#[test]
fn ik_then_fk_recovers_random_targets() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let g = random_geometry(&mut rng);
        let reach = g.proximal_length_mm + g.distal_length_mm;
        let mut solved = 0;
        for _ in 0..2_000 {
            let target = Point::new(
                rng.random_range(-reach..g.base_separation_mm + reach),
                rng.random_range(-reach..0.0),
            );
            // skip the nearest-point search on the error path
            if !workspace_contains(&g, target) {
                continue;
            }
            let a = inverse_kinematics(&g, target).unwrap();
            solved += 1;
            assert!(g.within_limits(a.theta1_rad) && g.within_limits(a.theta2_rad));
            let p = forward_kinematics(&g, a).unwrap();
            assert!(p.distance(target) <= 1e-9 * target.norm().max(1.0), "{target} -> {p}");
            assert!(elbows_outward(&g, a, p));
        }
        assert!(solved > 50, "only {solved} reachable targets");
    }
}

#[test]
fn fk_then_ik_recovers_outward_angles_on_degree_grid() {
    let g = LinkageGeometry::default();
    let mut checked = 0;
    for d1 in -170..=-10 {
        for d2 in -170..=-10 {
            let a = JointAngles::from_degrees(d1 as f64, d2 as f64);
            let Ok(p) = forward_kinematics(&g, a) else { continue };
            if !elbows_outward(&g, a, p) {
                continue;
            }
            let back = inverse_kinematics(&g, p).unwrap_or_else(|e| panic!("({d1}, {d2}) at {p}: {e}"));
            assert!(
                (back.theta1_rad - a.theta1_rad).abs() < 1e-6 && (back.theta2_rad - a.theta2_rad).abs() < 1e-6,
                "({d1}, {d2}) -> {back:?}"
            );
            checked += 1;
        }
    }
    assert!(checked > 5_000, "{checked}");
}

#[test]
fn unreachable_reports_a_reachable_nearest_point() {
    let g = LinkageGeometry::default();
    for target in [Point::new(15.0, 10.0), Point::new(200.0, -40.0), Point::new(15.0, -200.0)] {
        match inverse_kinematics(&g, target) {
            Err(KinematicsError::Unreachable { nearest, .. }) => {
                assert!(workspace_contains(&g, nearest) || inverse_kinematics(&g, nearest).is_ok() || {
                    // the pattern search may stop a hair outside the boundary
                    let (p, _) = nearest_reachable(&g, nearest);
                    p.distance(nearest) < 1e-6
                });
                assert!(nearest.distance(target) > 0.0);
            }
            other => panic!("{target}: {other:?}"),
        }
    }
}

proptest! {
    #[test]
    fn fk_distal_links_have_their_length(t1 in -2.96f64..-0.17, t2 in -2.96f64..-0.17) {
        let g = LinkageGeometry::default();
        if let Ok(p) = forward_kinematics(&g, JointAngles::new(t1, t2)) {
            let (e1, e2) = g.elbows(JointAngles::new(t1, t2));
            prop_assert!((p.distance(e1) - g.distal_length_mm).abs() < 1e-9);
            prop_assert!((p.distance(e2) - g.distal_length_mm).abs() < 1e-9);
        }
    }
}

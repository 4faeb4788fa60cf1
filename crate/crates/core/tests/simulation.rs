mod common;

use std::f64::consts::PI;

use nalgebra::DVector;

use sns::kinematics::Axis;
use sns::sim::{load_scenario, perturb_initial_q, read_log, run, write_log, write_log_file, LogLayout};
use sns::solver::SnsStatus;
use sns::trajectory::{PathSpec, TimingLaw};

use common::{bundled, scenario_path, BUNDLED};

#[test]
fn planar_scenario_matches_the_published_setup() {
    let sc = bundled("planar6r.scn");
    let deg = PI / 180.0;
    let q0 = DVector::from_vec(vec![30.0, -30.0, -30.0, 60.0, -30.0, -30.0]) * deg;
    assert!((&sc.initial_q - q0).amax() < 1e-15);
    assert!(sc.joint_limits.q_max.iter().all(|&q| (q - 90.0 * deg).abs() < 1e-15));
    assert!(sc.joint_limits.q_min.iter().all(|&q| (q + 90.0 * deg).abs() < 1e-15));
    assert!(sc.joint_limits.v_max.iter().all(|&v| (v - 0.5).abs() < 1e-12));
    assert_eq!(sc.cartesian.len(), 5);
    for (i, c) in sc.cartesian.iter().enumerate() {
        assert_eq!(c.point.frame, i + 1, "control point at joint {}", i + 2);
        assert_eq!(c.sel.axes(), &[Axis::Y]);
        assert_eq!((c.p_min[0], c.p_max[0]), (-1.1, 1.0));
        assert_eq!((c.v_min[0], c.v_max[0]), (-0.5, 0.5));
        assert!(c.window.is_none());
    }
    assert_eq!(sc.sample_time, 0.001);
    assert_eq!(sc.duration, 10.0);
    assert_eq!(sc.tick_count(), 10_000);
    assert_eq!(sc.feedback.k_p, DVector::from_element(2, 2.0));
    assert!(matches!(sc.timing, TimingLaw::Quintic { duration, .. } if duration == 10.0));
    // The path starts on the initial end-effector position.
    let PathSpec::Line { start, .. } = &sc.path else { panic!("line path expected") };
    let ee = sc.robot.point_position(&sc.initial_q, &sc.robot.end_effector()).unwrap();
    assert!((ee.x - start[0]).abs() < 1e-12 && (ee.y - start[1]).abs() < 1e-12);
}

#[test]
fn lwr_scenario_matches_the_published_setup() {
    let sc = bundled("lwr7r.scn");
    let deg = PI / 180.0;
    let q_max = [170.0, 120.0, 170.0, 120.0, 170.0, 120.0, 170.0];
    let v_max = [100.0, 110.0, 100.0, 130.0, 130.0, 180.0, 180.0];
    for j in 0..7 {
        assert!((sc.joint_limits.q_max[j] - q_max[j] * deg).abs() < 1e-12);
        assert!((sc.joint_limits.v_max[j] - v_max[j] * deg).abs() < 1e-12);
        assert!((sc.joint_limits.a_max[j] - 300.0 * deg).abs() < 1e-12);
    }
    let window = sc.cartesian.iter().find(|c| c.window.is_some()).unwrap();
    assert_eq!(window.p_max[0], 0.6);
    let w = window.window.unwrap();
    assert_eq!((w.start, w.end), (2.5, 4.5));
    assert_eq!(sc.sample_time, 0.005);
    assert_eq!(sc.feedback.k_p, DVector::from_element(3, 30.0));
    let PathSpec::Circle { center, radius, laps, .. } = &sc.path else { panic!("circle expected") };
    assert_eq!(center.as_slice(), &[0.0, 0.5, 1.5]);
    assert_eq!((*radius, *laps), (0.25, 3));
    let ee = sc.robot.point_position(&sc.initial_q, &sc.robot.end_effector()).unwrap();
    assert!((ee - nalgebra::Vector3::new(0.25, 0.5, 1.5)).amax() < 1e-12);
}

#[test]
fn bundled_scenarios_respect_every_hard_limit() {
    for name in BUNDLED {
        let sc = bundled(name);
        let log = run(&sc).unwrap();
        assert_eq!(log.len(), sc.tick_count());
        let lim = &sc.joint_limits;
        for (k, tick) in log.iter().enumerate() {
            assert!((tick.t - k as f64 * sc.sample_time).abs() < 1e-12);
            for j in 0..tick.q.len() {
                assert!(tick.q[j] >= lim.q_min[j] - 1e-6 && tick.q[j] <= lim.q_max[j] + 1e-6, "{name} q{j} at {}", tick.t);
                assert!(
                    tick.q_dot[j] >= lim.v_min[j] - 1e-8 && tick.q_dot[j] <= lim.v_max[j] + 1e-8,
                    "{name} qd{j} at {}",
                    tick.t
                );
            }
            let mut col = 0;
            for c in &sc.cartesian {
                for i in 0..c.dim() {
                    if c.is_active(tick.t) {
                        let (p, v) = (tick.cp_pos[col], tick.cp_vel[col]);
                        assert!(p >= c.p_min[i] - 1e-4 && p <= c.p_max[i] + 1e-4, "{name} {} at {}", c.id, tick.t);
                        assert!(v >= c.v_min[i] - 1e-8 && v <= c.v_max[i] + 1e-8, "{name} {} at {}", c.id, tick.t);
                    }
                    col += 1;
                }
            }
        }
    }
}

#[test]
fn window_rows_never_saturate_outside_the_window() {
    let sc = bundled("lwr7r.scn");
    let log = run(&sc).unwrap();
    let c = sc.cartesian.iter().find(|c| c.window.is_some()).unwrap();
    let w = c.window.unwrap();
    let tag = format!("{}.", c.id);
    let inside = log.iter().filter(|t| t.sat_tags.contains(&tag)).inspect(|t| assert!(w.contains(t.t))).count();
    assert!(inside > 0);
    assert!(log.iter().any(|t| t.status == SnsStatus::TaskSaturated));
}

#[test]
fn zero_duration_gives_an_empty_log() {
    let mut sc = bundled("planar6r.scn");
    sc.duration = 0.0;
    assert!(run(&sc).unwrap().is_empty());
    let mut buf = Vec::new();
    write_log(&[], &LogLayout::for_scenario(&sc), &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);
}

#[test]
fn csv_round_trip_of_a_real_run() {
    let mut sc = bundled("planar6r.scn");
    sc.duration = 0.2;
    let log = run(&sc).unwrap();
    let layout = LogLayout::for_scenario(&sc);
    assert_eq!(layout.column_count(), 1 + 12 + 4 + 3 + 10);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.csv");
    write_log_file(&log, &layout, &path).unwrap();
    let (back_layout, back) = read_log(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(back_layout, layout);
    assert_eq!(back.len(), log.len());
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()) || (a == 0.0 && b == 0.0);
    for (a, b) in log.iter().zip(&back) {
        assert!(close(a.t, b.t) && close(a.s_star, b.s_star));
        for (x, y) in a.q.iter().chain(&a.q_dot).chain(&a.ee_pos).chain(&a.ee_err).zip(
            b.q.iter().chain(&b.q_dot).chain(&b.ee_pos).chain(&b.ee_err),
        ) {
            assert!(close(*x, *y), "{x} vs {y}");
        }
        for (x, y) in a.cp_pos.iter().chain(&a.cp_vel).zip(b.cp_pos.iter().chain(&b.cp_vel)) {
            assert!(close(*x, *y), "{x} vs {y}");
        }
        assert_eq!(a.status, b.status);
        assert_eq!(a.sat_tags, b.sat_tags);
    }
}

#[test]
fn widened_limits_track_without_scaling() {
    let mut sc = bundled("planar6r.scn").widened(100.0);
    sc.duration = 2.0;
    let log = run(&sc).unwrap();
    assert!(log.iter().all(|t| t.s_star == 1.0 && t.status == SnsStatus::Exact && t.sat_tags.is_empty()));
    assert!(log.iter().all(|t| t.ee_err.norm() < 1e-3));
}

#[test]
fn seeded_perturbation_is_reproducible_and_bounded() {
    let base = bundled("lwr7r.scn");
    let mut a = base.clone();
    let mut b = base.clone();
    perturb_initial_q(&mut a, 7, 0.01);
    perturb_initial_q(&mut b, 7, 0.01);
    assert_eq!(a.initial_q, b.initial_q);
    assert_ne!(a.initial_q, base.initial_q);
    assert!((&a.initial_q - &base.initial_q).amax() <= 0.01);
    let mut c = base.clone();
    perturb_initial_q(&mut c, 8, 0.01);
    assert_ne!(a.initial_q, c.initial_q);
}

#[test]
fn scenario_files_parse_from_text_identically() {
    for name in BUNDLED {
        let text = std::fs::read_to_string(scenario_path(name)).unwrap();
        assert_eq!(load_scenario(&text).unwrap(), bundled(name));
    }
}

use std::f64::consts::PI;

use holonomy_lab::expr::parse;
use holonomy_lab::geometry::{Chart, ChartVar, Curve, GroupElement, Mode};
use holonomy_lab::hybrid::{BaseLoop, HybridBundle, TransitionSpec};
use holonomy_lab::lift::{hybrid_holonomy, hybrid_lift, LiftOptions, Method};
use holonomy_lab::models::{build_planar_walker, build_rolling_disk, planar_walker_definition};
use holonomy_lab::Error;

fn opts() -> LiftOptions {
    LiftOptions::default()
}

#[test]
fn walker_lift_ends_at_the_holonomy() {
    let (b, f) = build_planar_walker(1.0, 0.3).unwrap();
    let lp = f.build(1).unwrap();
    let e0 = GroupElement::from_vec(vec![0.7]);
    let lift = hybrid_lift(&b, &lp, &e0, &opts()).unwrap();
    assert_eq!(lift.pieces.len(), 2);
    assert_eq!(lift.crossings.len(), 2);
    let h = hybrid_holonomy(&b, &lp, Method::Both, &opts()).unwrap();
    assert!((lift.total[0] - h.total[0]).abs() < 1e-12);
    assert!((lift.final_fiber[0] - 0.7 - h.total[0]).abs() < 1e-12);
    assert!((h.total[0].abs() - 4.0 * 0.3_f64.sin()).abs() < 1e-9);
}

#[test]
fn samples_are_left_continuous_at_crossings() {
    let (b, f) = build_planar_walker(1.0, 0.3).unwrap();
    let lift = hybrid_lift(
        &b,
        &f.build(1).unwrap(),
        &GroupElement::identity(1),
        &opts(),
    )
    .unwrap();
    let first = &lift.pieces[0];
    let end = first.samples.last().unwrap();
    assert_eq!(end.t, 0.5);
    // The sample at the crossing instant is the pre-impact state.
    assert!((end.m[0] + 0.3).abs() < 1e-12);
    assert_eq!(end.g, lift.crossings[0].fiber_before);
    let next = &lift.pieces[1].samples[0];
    assert!((next.m[0] - 0.3).abs() < 1e-12);
}

#[test]
fn constant_loop_gives_one_flat_block() {
    let (b, _) = build_planar_walker(1.0, 0.3).unwrap();
    let lp = BaseLoop::single("theta", Curve::constant(&[0.1]));
    let lift = hybrid_lift(&b, &lp, &GroupElement::from_vec(vec![2.5]), &opts()).unwrap();
    assert_eq!(lift.pieces.len(), 1);
    assert!(lift.pieces[0].samples.iter().all(|s| s.g == vec![2.5]));
    let csv = lift.to_csv();
    assert_eq!(csv.split("\n\n").count(), 1);
    assert!(csv.starts_with("t,m_1,g_1,mode_id\n"));
}

#[test]
fn disk_lift_is_monotone() {
    let r = 0.75;
    let (b, f) = build_rolling_disk(r).unwrap();
    let lift = hybrid_lift(
        &b,
        &f.build(1).unwrap(),
        &GroupElement::identity(1),
        &opts(),
    )
    .unwrap();
    let g: Vec<f64> = lift.pieces[0].samples.iter().map(|s| s.g[0]).collect();
    assert!(g.windows(2).all(|w| w[1] > w[0]));
    assert!((g.last().unwrap() - 2.0 * PI * r).abs() < 1e-9);
}

#[test]
fn csv_has_one_block_per_piece() {
    let (b, f) = build_planar_walker(1.0, 0.3).unwrap();
    let lift = hybrid_lift(
        &b,
        &f.build(3).unwrap(),
        &GroupElement::identity(1),
        &LiftOptions {
            tol: 1e-10,
            samples: 5,
        },
    )
    .unwrap();
    let csv = lift.to_csv();
    let blocks: Vec<&str> = csv.trim_end().split("\n\n").collect();
    assert_eq!(blocks.len(), 6);
    for (k, block) in blocks.iter().enumerate() {
        let rows: Vec<&str> = block.lines().collect();
        assert_eq!(rows[0], "t,m_1,g_1,mode_id");
        assert_eq!(rows.len(), 6);
        let mode = if k % 2 == 0 { "theta" } else { "phi" };
        assert!(rows[1..].iter().all(|r| r.ends_with(mode)));
    }
    let log: serde_json::Value = serde_json::from_str(&lift.crossing_log_json().unwrap()).unwrap();
    assert_eq!(log.as_array().unwrap().len(), 6);
}

#[test]
fn fiber_reset_jumps_count_towards_the_total() {
    let mut def = planar_walker_definition(1.0, 0.3);
    for t in &mut def.transitions {
        t.fiber_reset = Some(vec!["x + 0.25".into()]);
    }
    let b = def.build().unwrap().bundle;
    let (_, f) = build_planar_walker(1.0, 0.3).unwrap();
    let lp = f.build(2).unwrap();
    let lift = hybrid_lift(&b, &lp, &GroupElement::identity(1), &opts()).unwrap();
    let jumps: f64 = lift.crossings.iter().map(|c| c.jump[0]).sum();
    assert!((jumps - 4.0 * 0.25).abs() < 1e-12);
    let flows: f64 = lift.pieces.iter().map(|p| p.contribution[0]).sum();
    assert!((lift.total[0] - flows - jumps).abs() < 1e-12);
    assert!((flows + 8.0 * 0.3_f64.sin()).abs() < 1e-9);
    let h = hybrid_holonomy(&b, &lp, Method::Both, &opts()).unwrap();
    assert!((h.total[0] - lift.total[0]).abs() < 1e-12);
}

#[test]
fn inconsistent_potential_fails_the_cross_check() {
    // The potential's gradient is twice the connection.
    let chart = Chart::new(vec![ChartVar::circle("q", 2.0 * PI)]).unwrap();
    let mode = Mode::new(
        "m",
        chart,
        vec!["x".into()],
        vec![vec![parse("1").unwrap()]],
        Some(vec![parse("2*q").unwrap()]),
    )
    .unwrap();
    let b = HybridBundle::new(vec![mode], Vec::<TransitionSpec>::new()).unwrap();
    let lp = BaseLoop::single("m", Curve::parse(&["2*pi*t + 0.5*sin(2*pi*t)"]).unwrap());
    match hybrid_holonomy(&b, &lp, Method::Both, &opts()) {
        Err(Error::CrossCheckFailed {
            difference,
            allowed,
        }) => assert!(difference > allowed),
        other => panic!("expected a cross-check failure, got {other:?}"),
    }
    assert!(hybrid_holonomy(&b, &lp, Method::Quadrature, &opts()).is_ok());
}

#[test]
fn potential_method_needs_a_potential() {
    let chart = Chart::new(vec![ChartVar::line("q")]).unwrap();
    let mode = Mode::new(
        "m",
        chart,
        vec!["x".into()],
        vec![vec![parse("q").unwrap()]],
        None,
    )
    .unwrap();
    let b = HybridBundle::new(vec![mode], Vec::<TransitionSpec>::new()).unwrap();
    let lp = BaseLoop::single("m", Curve::parse(&["sin(2*pi*t)"]).unwrap());
    assert!(matches!(
        hybrid_holonomy(&b, &lp, Method::Potential, &opts()),
        Err(Error::NoPotential(_))
    ));
}

#[test]
fn empty_loop_has_trivial_holonomy() {
    let (b, f) = build_planar_walker(1.0, 0.3).unwrap();
    let h = hybrid_holonomy(&b, &f.build(0).unwrap(), Method::Both, &opts()).unwrap();
    assert_eq!(h.total[0], 0.0);
}

#[test]
fn more_samples_do_not_change_the_result() {
    let (b, f) = build_planar_walker(1.3, 0.2).unwrap();
    let lp = f.build(2).unwrap();
    let e0 = GroupElement::identity(1);
    let coarse = hybrid_lift(
        &b,
        &lp,
        &e0,
        &LiftOptions {
            tol: 1e-10,
            samples: 3,
        },
    )
    .unwrap();
    let fine = hybrid_lift(
        &b,
        &lp,
        &e0,
        &LiftOptions {
            tol: 1e-10,
            samples: 700,
        },
    )
    .unwrap();
    assert_eq!(coarse.total, fine.total);
}

use holonomy_lab::geometry::segment_holonomy_quadrature;
use holonomy_lab::lift::{hybrid_holonomy, LiftOptions, Method};
use holonomy_lab::limits::{
    alternating_holonomy, convergence_sweep, infinitesimal_holonomy, AlternationSpec, SweepCase,
    SweepOptions,
};
use holonomy_lab::models::{build_planar_walker, build_rolling_disk};
use holonomy_lab::Error;

fn walker_case(l: f64) -> impl Fn(u64, f64) -> holonomy_lab::Result<SweepCase> + Sync {
    move |n, delta| {
        let (bundle, f) = build_planar_walker(l, delta)?;
        Ok(SweepCase {
            bundle,
            base_loop: f.build(n as i64)?,
            guard_separation: 2.0 * delta,
        })
    }
}

#[test]
fn alternation_matches_the_explicit_loop() {
    for &(l, delta, n) in &[
        (1.0, 0.3, 1u64),
        (2.0, 0.25, 3),
        (1.2, 0.1, 7),
        (0.5, 1.2, 40),
    ] {
        let closed = alternating_holonomy(&AlternationSpec::walker(l, delta, n).unwrap()).unwrap();
        let (b, f) = build_planar_walker(l, delta).unwrap();
        let lp = f.build(n as i64).unwrap();
        let h = hybrid_holonomy(&b, &lp, Method::Potential, &LiftOptions::default()).unwrap();
        // Both are the same telescoping sum, accumulated in a different order.
        let ulps = 4.0 * n as f64 * f64::EPSILON * closed[0].abs();
        assert!((closed[0] - h.total[0]).abs() <= ulps, "{l} {delta} {n}");
    }
}

#[test]
fn alternation_is_linear_in_cycles() {
    for n in [1u64, 2, 5, 17, 1000] {
        let one = alternating_holonomy(&AlternationSpec::walker(1.3, 0.2, n).unwrap()).unwrap();
        let two = alternating_holonomy(&AlternationSpec::walker(1.3, 0.2, 2 * n).unwrap()).unwrap();
        assert_eq!(two[0], 2.0 * one[0]);
    }
}

#[test]
fn infinitesimal_limit_is_first_order() {
    // |dg_C - Δg_N| as the guard points merge with N‖m₁ - m₂‖ = C fixed.
    let c: f64 = 1.0;
    let mut errors = Vec::new();
    for delta in [1e-1_f64, 1e-2, 1e-3] {
        let sep = 2.0 * delta;
        let n = (c / sep).round() as u64;
        let spec = AlternationSpec::walker(1.0, delta, n).unwrap();
        let c_eff = n as f64 * sep;
        let inf = infinitesimal_holonomy(&spec.f1, &spec.f2, &spec.m1, &[1.0], c_eff).unwrap();
        let alt = alternating_holonomy(&spec).unwrap();
        errors.push((sep, (inf[0] - alt[0]).abs()));
    }
    for w in errors.windows(2) {
        let order = (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln();
        assert!(order >= 1.0, "{errors:?}");
    }
}

#[test]
fn sweep_converges_quadratically_to_four_l_k() {
    let report = convergence_sweep(
        walker_case(1.0),
        0.5,
        &[10, 100, 1000],
        &SweepOptions::default(),
    )
    .unwrap();
    assert!((report.limit[0].abs() - 2.0).abs() < 1e-8);
    let order = report.order.unwrap();
    assert!((order - 2.0).abs() < 0.1, "{order}");
    assert!((report.c - 1.0).abs() < 1e-12);
    for e in &report.entries {
        let exact = 4.0 * e.n as f64 * (0.5 / e.n as f64).sin();
        assert!((e.dg[0].abs() - exact).abs() < 1e-9);
    }
    let csv = report.to_csv();
    assert!(csv.starts_with("N,delta,dg_1,abs_error_vs_limit\n"));
    assert_eq!(csv.lines().count(), 4);
    let summary: serde_json::Value = serde_json::from_str(&report.summary_json().unwrap()).unwrap();
    assert!(summary["order"].is_f64());
}

#[test]
fn walker_limit_matches_the_rolling_disk() {
    let k = 0.5;
    let l = 1.0;
    let report = convergence_sweep(
        walker_case(l),
        k,
        &[100, 1000, 10000],
        &SweepOptions::default(),
    )
    .unwrap();
    // A disk of radius l turning through the same total stance angle 4K.
    let (b, _) = build_rolling_disk(l).unwrap();
    let curve = holonomy_lab::geometry::Curve::parse(&[&format!("{:?}*t", 4.0 * k)]).unwrap();
    let disk = segment_holonomy_quadrature(&b.modes()[0], &curve, 0.0, 1.0, 1e-12).unwrap();
    assert!((report.limit[0].abs() - disk[0].abs()).abs() < 1e-8);
}

#[test]
fn single_entry_schedule_has_no_order() {
    let report = convergence_sweep(walker_case(1.0), 0.5, &[10], &SweepOptions::default()).unwrap();
    assert!(report.order.is_none());
    assert!(!report.warnings.is_empty());
}

#[test]
fn zero_k_gives_zero_holonomy() {
    let report = convergence_sweep(
        walker_case(1.0),
        0.0,
        &[10, 100, 1000],
        &SweepOptions::default(),
    )
    .unwrap();
    assert!(report.entries.iter().all(|e| e.dg[0] == 0.0));
}

#[test]
fn schedule_must_increase() {
    let bad = convergence_sweep(walker_case(1.0), 0.5, &[100, 10], &SweepOptions::default());
    assert!(matches!(bad, Err(Error::InvalidInput(_))));
    let empty = convergence_sweep(walker_case(1.0), 0.5, &[], &SweepOptions::default());
    assert!(matches!(empty, Err(Error::InvalidInput(_))));
}

#[test]
fn thread_count_does_not_change_results() {
    let one = SweepOptions {
        threads: Some(1),
        ..SweepOptions::default()
    };
    let three = SweepOptions {
        threads: Some(3),
        ..SweepOptions::default()
    };
    let a = convergence_sweep(walker_case(1.0), 0.4, &[5, 50, 500], &one).unwrap();
    let b = convergence_sweep(walker_case(1.0), 0.4, &[5, 50, 500], &three).unwrap();
    assert_eq!(a, b);
}

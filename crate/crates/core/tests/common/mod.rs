//! Randomized invariant checks shared by the property suite and the acceptance run.
#![allow(dead_code)]

use std::f64::consts::PI;

use holonomy_lab::expr::{parse, Expr};
use holonomy_lab::geometry::{
    connection_form_eval, segment_holonomy_potential, segment_holonomy_quadrature, Chart, ChartVar,
    Curve, GroupElement, Mode,
};
use holonomy_lab::hybrid::{check_bundle, BaseLoop, HybridBundle, LoopSegment};
use holonomy_lab::lift::{hybrid_holonomy, hybrid_lift, LiftOptions, Method};
use holonomy_lab::models::{build_planar_walker, planar_walker_definition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const INSTANCES: usize = 100;
pub const TOL: f64 = 1e-10;

pub type Check = fn(&mut ChaCha8Rng) -> Result<(), String>;

/// Runs `check` on `n` instances drawn from a generator seeded with `seed`.
/// Returns the number that passed and the first failure.
pub fn run(check: Check, n: usize, seed: u64) -> (usize, Option<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut passed = 0;
    let mut first = None;
    for i in 0..n {
        match check(&mut rng) {
            Ok(()) => passed += 1,
            Err(e) => {
                if first.is_none() {
                    first = Some(format!("instance {i}: {e}"));
                }
            }
        }
    }
    (passed, first)
}

pub fn properties() -> Vec<(&'static str, Check)> {
    vec![
        ("parametrization invariance", parametrization_invariance),
        ("reversal antisymmetry", reversal_antisymmetry),
        ("concatenation additivity", concatenation_additivity),
        ("start-point independence", start_point_independence),
        ("horizontality of lifts", horizontality),
        ("commuting-diagram fault injection", fault_injection),
        ("quadrature agrees with potential", potential_oracle),
    ]
}

fn coef(rng: &mut ChaCha8Rng) -> f64 {
    (rng.gen_range(-2.0..2.0_f64) * 1000.0).round() / 1000.0
}

/// A random smooth function of `a` and `b` mixing polynomial and trigonometric terms.
pub fn random_scalar(rng: &mut ChaCha8Rng) -> String {
    let mut terms = Vec::new();
    for _ in 0..rng.gen_range(2..5) {
        let c = coef(rng);
        let term = match rng.gen_range(0..4) {
            0 => format!(
                "({c:?})*a^{}*b^{}",
                rng.gen_range(0..3),
                rng.gen_range(0..3)
            ),
            1 => format!("({c:?})*sin({:?}*a + {:?}*b)", coef(rng), coef(rng)),
            2 => format!("({c:?})*cos({:?}*a)*b", coef(rng)),
            _ => format!("({c:?})*exp({:?}*b)", 0.5 * coef(rng)),
        };
        terms.push(term);
    }
    terms.join(" + ")
}

/// A 2-D mode whose connection is `dF` plus a random multiple of the non-exact `[-b, a]`.
pub fn random_mode(rng: &mut ChaCha8Rng, exact: bool) -> (Mode, Option<Expr>) {
    let f = parse(&random_scalar(rng)).unwrap();
    let curl = if exact { 0.0 } else { coef(rng) };
    let da = f.derivative("a");
    let db = f.derivative("b");
    let chart = Chart::new(vec![ChartVar::line("a"), ChartVar::line("b")]).unwrap();
    let row = vec![
        parse(&format!("({da}) - ({curl:?})*b")).unwrap(),
        parse(&format!("({db}) + ({curl:?})*a")).unwrap(),
    ];
    let potential = exact.then(|| f.clone());
    let mode = Mode::new(
        "m",
        chart,
        vec!["x".into()],
        vec![row],
        potential.clone().map(|p| vec![p]),
    )
    .unwrap();
    (mode, potential)
}

/// A random planar curve in `t`; closed over `[0, 1]` when `closed`.
pub fn random_curve(rng: &mut ChaCha8Rng, closed: bool) -> [String; 2] {
    let coord = |rng: &mut ChaCha8Rng| {
        let mut s = format!("{:?}", 0.5 * coef(rng));
        for k in 1..=rng.gen_range(1..4) {
            s.push_str(&format!(
                " + ({:?})*sin({k}*2*pi*t) + ({:?})*(cos({k}*2*pi*t) - 1)",
                0.4 * coef(rng),
                0.4 * coef(rng)
            ));
        }
        if !closed {
            s.push_str(&format!(" + ({:?})*t", coef(rng)));
        }
        s
    };
    [coord(rng), coord(rng)]
}

fn curve(src: &[String; 2]) -> Curve {
    Curve::parse(&[&src[0], &src[1]]).unwrap()
}

fn close(a: &GroupElement, b: &GroupElement, tol: f64, what: &str) -> Result<(), String> {
    let d = a.max_diff(b);
    if d <= tol {
        Ok(())
    } else {
        Err(format!("{what}: {a:?} vs {b:?} differ by {d:.3e}"))
    }
}

fn q(mode: &Mode, c: &Curve, t0: f64, t1: f64) -> Result<GroupElement, String> {
    segment_holonomy_quadrature(mode, c, t0, t1, TOL).map_err(|e| e.to_string())
}

/// Holonomy does not depend on how a path is parametrized.
pub fn parametrization_invariance(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let (mode, _) = random_mode(rng, false);
    let src = random_curve(rng, false);
    let amp = rng.gen_range(-0.9..0.9_f64) / (2.0 * PI);
    let warp = format!("(t + ({amp:?})*sin(2*pi*t))");
    let warped = [src[0].replace('t', &warp), src[1].replace('t', &warp)];
    let a = q(&mode, &curve(&src), 0.0, 1.0)?;
    let b = q(&mode, &curve(&warped), 0.0, 1.0)?;
    close(&a, &b, 1e-8, "warped parameter")
}

/// Traversing a path backwards negates its holonomy; for the walker, the whole hybrid loop.
pub fn reversal_antisymmetry(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let (mode, _) = random_mode(rng, false);
    let c = curve(&random_curve(rng, false));
    let fwd = q(&mode, &c, 0.0, 1.0)?;
    let back = q(&mode, &c, 1.0, 0.0)?;
    close(&fwd, &-back.clone(), 1e-9, "reversed integration")?;

    let l = rng.gen_range(0.2..3.0);
    let delta = rng.gen_range(0.01..1.5);
    let n = rng.gen_range(1..5);
    let (b, f) = build_planar_walker(l, delta).map_err(|e| e.to_string())?;
    let h = |lp: &BaseLoop| {
        hybrid_holonomy(&b, lp, Method::Quadrature, &LiftOptions::default())
            .map(|h| h.total)
            .map_err(|e| e.to_string())
    };
    let fwd = h(&f.build(n).unwrap())?;
    let back = h(&f.build(-n).unwrap())?;
    close(&fwd, &-back.clone(), 1e-9, "reversed walker")
}

/// Splitting a path at any point splits its holonomy into a sum.
pub fn concatenation_additivity(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let (mode, _) = random_mode(rng, false);
    let c = curve(&random_curve(rng, false));
    let s = rng.gen_range(0.05..0.95);
    let whole = q(&mode, &c, 0.0, 1.0)?;
    let parts = &q(&mode, &c, 0.0, s)? + &q(&mode, &c, s, 1.0)?;
    close(&whole, &parts, 1e-9, "split path")
}

/// Closed loops give the same holonomy whichever point they start from.
pub fn start_point_independence(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let (mode, _) = random_mode(rng, false);
    let src = random_curve(rng, true);
    let tau = rng.gen_range(0.0..1.0_f64);
    let shift = format!("(t + {tau:?})");
    let shifted = [src[0].replace('t', &shift), src[1].replace('t', &shift)];
    let a = q(&mode, &curve(&src), 0.0, 1.0)?;
    let b = q(&mode, &curve(&shifted), 0.0, 1.0)?;
    close(&a, &b, 1e-8, "shifted start")?;

    // The walker loop started on the second leg.
    let l = rng.gen_range(0.2..3.0);
    let delta = rng.gen_range(0.01..1.5);
    let (b, f) = build_planar_walker(l, delta).map_err(|e| e.to_string())?;
    let cyc = f.cycle().segments();
    let lp = BaseLoop::new(vec![
        LoopSegment {
            mode: cyc[1].mode.clone(),
            t0: 0.0,
            t1: 0.5,
            curve: Curve::parse(&[&format!("{delta:?} - 4*{delta:?}*t")]).unwrap(),
        },
        LoopSegment {
            mode: cyc[0].mode.clone(),
            t0: 0.5,
            t1: 1.0,
            curve: Curve::parse(&[&format!("{delta:?} - 4*{delta:?}*(t - 0.5)")]).unwrap(),
        },
    ])
    .unwrap();
    let opts = LiftOptions::default();
    let a = hybrid_holonomy(&b, &f.build(1).unwrap(), Method::Both, &opts)
        .map_err(|e| e.to_string())?;
    let c = hybrid_holonomy(&b, &lp, Method::Both, &opts).map_err(|e| e.to_string())?;
    close(&a.total, &c.total, 1e-9, "walker started on the other leg")
}

/// Sampled lifts satisfy `ω(γ̃') = 0`, with `ġ` from a sixth-order stencil on the samples.
pub fn horizontality(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let (mode, _) = random_mode(rng, false);
    let src = random_curve(rng, true);
    let b = HybridBundle::new(vec![mode.clone()], Vec::new()).unwrap();
    let lp = BaseLoop::single("m", curve(&src));
    let e0 = GroupElement::from_vec(vec![rng.gen_range(-5.0..5.0)]);
    let opts = LiftOptions {
        tol: TOL,
        samples: 1025,
    };
    let lift = hybrid_lift(&b, &lp, &e0, &opts).map_err(|e| e.to_string())?;
    let c = &lp.segments()[0].curve;
    let s = &lift.pieces[0].samples;
    let mut worst: f64 = 0.0;
    for i in 3..s.len() - 3 {
        let h = s[i + 1].t - s[i].t;
        let g = |k: usize| s[k].g[0];
        let gdot = ((g(i + 3) - g(i - 3)) - 9.0 * (g(i + 2) - g(i - 2))
            + 45.0 * (g(i + 1) - g(i - 1)))
            / (60.0 * h);
        let mdot = c.velocity(s[i].t, 1.0).map_err(|e| e.to_string())?;
        let w = connection_form_eval(&mode, &s[i].m, &mdot, &[gdot]).map_err(|e| e.to_string())?;
        worst = worst.max(w[0].abs());
    }
    if worst <= 1e-6 {
        Ok(())
    } else {
        Err(format!("|ω(γ̃')| reaches {worst:.3e}"))
    }
}

/// A reset whose lifted base part is off by `ε` is caught; the unperturbed one passes.
pub fn fault_injection(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let l = rng.gen_range(0.2..3.0);
    let delta = rng.gen_range(0.01..1.5);
    let seed = rng.gen();
    let clean = build_planar_walker(l, delta).map_err(|e| e.to_string())?.0;
    let report = check_bundle(&clean, 8, seed).map_err(|e| e.to_string())?;
    if !report.passed() {
        return Err("unperturbed walker flagged".into());
    }
    let eps = 10f64.powf(rng.gen_range(-6.0..0.0));
    let which = rng.gen_range(0..4);
    let mut def = planar_walker_definition(l, delta);
    let src = def.transitions[which].source.clone();
    def.transitions[which].lifted_reset = Some(vec![format!("-{src} + {eps:?}")]);
    let broken = def.build().map_err(|e| e.to_string())?.bundle;
    let report = check_bundle(&broken, 8, seed).map_err(|e| e.to_string())?;
    let hit = &report.transitions[which];
    if report.passed() || (hit.max_violation - eps).abs() > 1e-9 * (1.0 + eps) {
        return Err(format!(
            "perturbation {eps:.3e} on transition {which} reported as {:.3e}",
            hit.max_violation
        ));
    }
    if report.failures().count() != 1 {
        return Err("untouched transitions flagged".into());
    }
    Ok(())
}

/// On an exact connection, quadrature matches `F(start) - F(end)`.
pub fn potential_oracle(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let (mode, _) = random_mode(rng, true);
    let c = curve(&random_curve(rng, false));
    let quad = q(&mode, &c, 0.0, 1.0)?;
    let start = c.point(0.0).map_err(|e| e.to_string())?;
    let end = c.point(1.0).map_err(|e| e.to_string())?;
    let pot = segment_holonomy_potential(&mode, &start, &end).map_err(|e| e.to_string())?;
    close(&quad, &pot, 1e-8, "quadrature vs potential")
}

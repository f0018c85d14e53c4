//! Two-mode alternating holonomy, its infinitesimal limit, and convergence sweeps.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{Chart, ChartVar, GroupElement, Potential};
use crate::hybrid::{BaseLoop, HybridBundle};
use crate::lift::{hybrid_holonomy, LiftOptions, Method};
use crate::output::sig17;

/// Two potentials on a shared chart and the two guard points a loop bounces between.
#[derive(Debug, Clone)]
pub struct AlternationSpec {
    pub f1: Potential,
    pub f2: Potential,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub cycles: u64,
}

impl AlternationSpec {
    pub fn new(
        f1: Potential,
        f2: Potential,
        m1: Vec<f64>,
        m2: Vec<f64>,
        cycles: u64,
    ) -> Result<Self> {
        if f1.fiber_dim() != f2.fiber_dim() {
            return Err(Error::InvalidInput(format!(
                "potentials have fiber dimensions {} and {}",
                f1.fiber_dim(),
                f2.fiber_dim()
            )));
        }
        if m1.len() != m2.len() {
            return Err(Error::InvalidInput(
                "guard points have different dimensions".into(),
            ));
        }
        if cycles == 0 {
            return Err(Error::InvalidInput("cycle count must be positive".into()));
        }
        Ok(AlternationSpec {
            f1,
            f2,
            m1,
            m2,
            cycles,
        })
    }

    /// The walker written in stance-angle coordinates of the first leg:
    /// `F₁ = -l sin θ`, `F₂ = l sin θ`, `m₁ = δ`, `m₂ = -δ`.
    pub fn walker(l: f64, delta: f64, cycles: u64) -> Result<Self> {
        let chart = Chart::new(vec![ChartVar::line("theta")])?;
        let f = |sign: f64| -> Result<Potential> {
            let e = Expr::binary(
                crate::expr::BinOp::Mul,
                Expr::num(sign * l),
                Expr::call(crate::expr::Func::Sin, Expr::var("theta")),
            );
            Potential::expr(vec![e], &chart)
        };
        Self::new(f(-1.0)?, f(1.0)?, vec![delta], vec![-delta], cycles)
    }

    fn difference(&self, m: &[f64]) -> Result<Vec<f64>> {
        let a = self.f1.eval(m)?;
        let b = self.f2.eval(m)?;
        Ok(a.iter().zip(&b).map(|(x, y)| x - y).collect())
    }
}

/// `N((F₁ - F₂)(m₁) - (F₁ - F₂)(m₂))`, evaluated in closed form.
pub fn alternating_holonomy(spec: &AlternationSpec) -> Result<GroupElement> {
    let at1 = spec.difference(&spec.m1)?;
    let at2 = spec.difference(&spec.m2)?;
    let n = spec.cycles as f64;
    Ok(GroupElement::from_vec(
        at1.iter().zip(&at2).map(|(a, b)| n * (a - b)).collect(),
    ))
}

/// `C · d(F₁ - F₂)|_{m₁}(direction)` by central differences.
pub fn infinitesimal_holonomy(
    f1: &Potential,
    f2: &Potential,
    m1: &[f64],
    direction: &[f64],
    c: f64,
) -> Result<GroupElement> {
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "direction must be a unit vector, norm is {norm}"
        )));
    }
    if !(c >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "C must be non-negative, got {c}"
        )));
    }
    if direction.len() != m1.len() {
        return Err(Error::InvalidInput(
            "direction and point have different dimensions".into(),
        ));
    }
    let scale = m1.iter().fold(1.0_f64, |acc, x| acc.max(x.abs()));
    let h = 1e-5 * scale;
    let d1 = f1.directional_derivative(m1, direction, h)?;
    let d2 = f2.directional_derivative(m1, direction, h)?;
    Ok(GroupElement::from_vec(
        d1.iter().zip(&d2).map(|(a, b)| c * (a - b)).collect(),
    ))
}

/// One system instance of a sweep.
pub struct SweepCase {
    pub bundle: HybridBundle,
    pub base_loop: BaseLoop,
    /// `‖m₁ - m₂‖` for this instance.
    pub guard_separation: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub method: Method,
    pub lift: LiftOptions,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            method: Method::Both,
            lift: LiftOptions::default(),
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub n: u64,
    pub delta: f64,
    pub dg: GroupElement,
    pub abs_error_vs_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub k: f64,
    pub entries: Vec<SweepEntry>,
    /// Richardson extrapolation of the last two entries assuming error `∝ δ²`.
    pub limit: GroupElement,
    /// Least-squares log-log slope of consecutive differences against `δ`.
    pub order: Option<f64>,
    /// `lim N‖m₁ - m₂‖`, taken from the finest entry.
    pub c: f64,
    pub warnings: Vec<String>,
}

/// Builds the system at each `N` of `schedule` with `δ = k / N`, computes its
/// holonomy and estimates the `N → ∞` limit and the convergence order.
pub fn convergence_sweep<F>(
    factory: F,
    k: f64,
    schedule: &[u64],
    opts: &SweepOptions,
) -> Result<ConvergenceReport>
where
    F: Fn(u64, f64) -> Result<SweepCase> + Sync,
{
    if schedule.is_empty() {
        return Err(Error::InvalidInput("sweep schedule is empty".into()));
    }
    if schedule.windows(2).any(|w| w[0] >= w[1]) || schedule[0] == 0 {
        return Err(Error::InvalidInput(
            "sweep schedule must be positive and strictly increasing".into(),
        ));
    }
    if !k.is_finite() {
        return Err(Error::InvalidInput(format!("invalid K = {k}")));
    }

    if k == 0.0 {
        let dim = factory(schedule[0], 0.0).map_or(1, |c| c.bundle.fiber_dim());
        return Ok(degenerate_sweep(schedule, dim));
    }

    let run = || -> Result<Vec<(u64, f64, GroupElement, f64)>> {
        schedule
            .par_iter()
            .map(|&n| {
                let delta = k / n as f64;
                let case = factory(n, delta)?;
                let h = hybrid_holonomy(&case.bundle, &case.base_loop, opts.method, &opts.lift)?;
                Ok((n, delta, h.total, n as f64 * case.guard_separation))
            })
            .collect()
    };
    let raw = match opts.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };

    let mut warnings = Vec::new();
    let limit = match raw.as_slice() {
        [.., (n0, _, g0, _), (n1, _, g1, _)] => {
            let r = *n1 as f64 / *n0 as f64;
            let denom = r * r - 1.0;
            GroupElement::from_vec(
                g1.components()
                    .iter()
                    .zip(g0.components())
                    .map(|(b, a)| b + (b - a) / denom)
                    .collect(),
            )
        }
        [(_, _, g, _)] => {
            warnings.push("single schedule entry: limit is the raw value, no extrapolation".into());
            g.clone()
        }
        [] => unreachable!(),
    };
    let order = match estimate_order(
        &raw.iter()
            .map(|(_, d, g, _)| (*d, g.clone()))
            .collect::<Vec<_>>(),
    ) {
        Ok(p) => Some(p),
        Err(e) => {
            warnings.push(format!("no order estimate: {e}"));
            None
        }
    };
    let c = raw.last().map_or(0.0, |x| x.3);
    let entries = raw
        .into_iter()
        .map(|(n, delta, dg, _)| SweepEntry {
            n,
            delta,
            abs_error_vs_limit: dg.max_diff(&limit),
            dg,
        })
        .collect();
    Ok(ConvergenceReport {
        k,
        entries,
        limit,
        order,
        c,
        warnings,
    })
}

/// `K = 0`: every loop collapses to a point, so every entry is the identity.
/// Loops are not built since a zero step puts them on the guard.
fn degenerate_sweep(schedule: &[u64], fiber_dim: usize) -> ConvergenceReport {
    let zero = GroupElement::identity(fiber_dim);
    ConvergenceReport {
        k: 0.0,
        entries: schedule
            .iter()
            .map(|&n| SweepEntry {
                n,
                delta: 0.0,
                dg: zero.clone(),
                abs_error_vs_limit: 0.0,
            })
            .collect(),
        limit: zero,
        order: None,
        c: 0.0,
        warnings: vec!["K = 0: every loop is constant, no systems were built".into()],
    }
}

/// Convergence order from `(δ_k, Δg_k)` with decreasing `δ`: the slope of
/// `ln|Δg_k - Δg_{k-1}|` against `ln δ_{k-1}`.
pub fn estimate_order(entries: &[(f64, GroupElement)]) -> Result<f64> {
    if entries.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "order estimation needs at least 3 entries, got {}",
            entries.len()
        )));
    }
    let points: Vec<(f64, f64)> = entries
        .windows(2)
        .filter_map(|w| {
            let d = w[1].1.max_diff(&w[0].1);
            (d > 0.0 && w[0].0 > 0.0).then(|| (w[0].0.ln(), d.ln()))
        })
        .collect();
    if points.len() < 2 {
        return Err(Error::InsufficientData(
            "fewer than two nonzero consecutive differences".into(),
        ));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all step sizes are equal".into()));
    }
    Ok(sxy / sxx)
}

impl ConvergenceReport {
    /// CSV with columns `N, delta, dg_1..dg_n, abs_error_vs_limit`.
    pub fn to_csv(&self) -> String {
        let n = self.limit.dim();
        let mut header = vec!["N".to_string(), "delta".into()];
        header.extend((1..=n).map(|i| format!("dg_{i}")));
        header.push("abs_error_vs_limit".into());
        let mut out = header.join(",");
        out.push('\n');
        for e in &self.entries {
            let mut row = vec![e.n.to_string(), sig17(e.delta)];
            row.extend(e.dg.components().iter().map(|&x| sig17(x)));
            row.push(sig17(e.abs_error_vs_limit));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Summary<'a> {
            k: f64,
            limit: &'a GroupElement,
            order: Option<f64>,
            c: f64,
            entries: usize,
            warnings: &'a [String],
        }
        Ok(serde_json::to_string_pretty(&Summary {
            k: self.k,
            limit: &self.limit,
            order: self.order,
            c: self.c,
            entries: self.entries.len(),
            warnings: &self.warnings,
        })?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn walker_alternation_matches_step_formula() {
        let s = AlternationSpec::walker(1.0, 0.3, 5).unwrap();
        let g = alternating_holonomy(&s).unwrap();
        assert!((g[0].abs() - 20.0 * 0.3_f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn coincident_points_and_identical_modes_are_trivial() {
        let mut s = AlternationSpec::walker(1.0, 0.3, 4).unwrap();
        s.m2 = s.m1.clone();
        assert_eq!(alternating_holonomy(&s).unwrap()[0], 0.0);
        let mut s = AlternationSpec::walker(1.0, 0.3, 4).unwrap();
        s.f2 = s.f1.clone();
        assert_eq!(alternating_holonomy(&s).unwrap()[0], 0.0);
    }

    #[test]
    fn infinitesimal_walker_at_zero() {
        let s = AlternationSpec::walker(1.0, 0.3, 1).unwrap();
        let g = infinitesimal_holonomy(&s.f1, &s.f2, &[0.0], &[1.0], 2.0).unwrap();
        assert!((g[0].abs() - 4.0).abs() < 1e-9);
        let z = infinitesimal_holonomy(&s.f1, &s.f2, &[0.0], &[1.0], 0.0).unwrap();
        assert_eq!(z[0], 0.0);
        assert!(infinitesimal_holonomy(&s.f1, &s.f2, &[0.0], &[2.0], 1.0).is_err());
        assert!(infinitesimal_holonomy(&s.f1, &s.f2, &[0.0], &[1.0], -1.0).is_err());
    }

    #[test]
    fn order_needs_three_entries() {
        let e = vec![
            (0.1, GroupElement::from_vec(vec![1.0])),
            (0.01, GroupElement::from_vec(vec![1.1])),
        ];
        assert!(matches!(
            estimate_order(&e),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn order_of_quadratic_sequence() {
        let e: Vec<_> = [0.1, 0.05, 0.025, 0.0125]
            .iter()
            .map(|&d: &f64| (d, GroupElement::from_vec(vec![2.0 + 3.0 * d * d])))
            .collect();
        assert!((estimate_order(&e).unwrap() - 2.0).abs() < 1e-9);
    }
}

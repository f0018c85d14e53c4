use crate::error::{Error, Result};
use crate::expr::{CompiledExpr, Expr};

/// A parametrized base curve m(t), either closed-form in `t` or a polyline.
#[derive(Debug, Clone, PartialEq)]
pub enum Curve {
    Expr(ExprCurve),
    Polyline(Polyline),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExprCurve {
    exprs: Vec<Expr>,
    compiled: Vec<CompiledExpr>,
    derivatives: Vec<CompiledExpr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    times: Vec<f64>,
    points: Vec<Vec<f64>>,
}

/// Relative step of the fourth-order central stencil used for curve velocities.
const STENCIL_STEP: f64 = 1e-3;

impl Curve {
    /// Closed-form curve with one expression per chart coordinate, in the variable `t`.
    pub fn expr(exprs: Vec<Expr>) -> Result<Self> {
        let compiled = exprs
            .iter()
            .map(|e| e.compile(&["t"]))
            .collect::<Result<Vec<_>>>()?;
        let derivatives = exprs
            .iter()
            .map(|e| e.derivative("t").compile(&["t"]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Curve::Expr(ExprCurve {
            exprs,
            compiled,
            derivatives,
        }))
    }

    pub fn parse(sources: &[&str]) -> Result<Self> {
        Curve::expr(
            sources
                .iter()
                .map(|s| crate::expr::parse(s))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn constant(point: &[f64]) -> Self {
        let exprs: Vec<Expr> = point.iter().map(|&v| Expr::Num(v)).collect();
        let compiled = point.iter().map(|&v| CompiledExpr::constant(v)).collect();
        let derivatives = point.iter().map(|_| CompiledExpr::constant(0.0)).collect();
        Curve::Expr(ExprCurve {
            exprs,
            compiled,
            derivatives,
        })
    }

    pub fn polyline(times: Vec<f64>, points: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() < 2 || times.len() != points.len() {
            return Err(Error::InvalidInput(
                "polyline needs at least two vertices and one time per vertex".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(
                "polyline times must be strictly increasing".into(),
            ));
        }
        let d = points[0].len();
        if points.iter().any(|p| p.len() != d) {
            return Err(Error::InvalidInput(
                "polyline vertices differ in dimension".into(),
            ));
        }
        Ok(Curve::Polyline(Polyline { times, points }))
    }

    pub fn dim(&self) -> usize {
        match self {
            Curve::Expr(c) => c.compiled.len(),
            Curve::Polyline(p) => p.points[0].len(),
        }
    }

    /// The defining expressions, when closed-form.
    pub fn exprs(&self) -> Option<&[Expr]> {
        match self {
            Curve::Expr(c) => Some(&c.exprs),
            Curve::Polyline(_) => None,
        }
    }

    pub fn polyline_data(&self) -> Option<(&[f64], &[Vec<f64>])> {
        match self {
            Curve::Polyline(p) => Some((&p.times, &p.points)),
            Curve::Expr(_) => None,
        }
    }

    pub fn point(&self, t: f64) -> Result<Vec<f64>> {
        match self {
            Curve::Expr(c) => c.compiled.iter().map(|e| e.eval(&[t])).collect(),
            Curve::Polyline(p) => {
                let i = p.piece(t);
                let (t0, t1) = (p.times[i], p.times[i + 1]);
                let s = (t - t0) / (t1 - t0);
                Ok(p.points[i]
                    .iter()
                    .zip(&p.points[i + 1])
                    .map(|(a, b)| a + s * (b - a))
                    .collect())
            }
        }
    }

    /// Velocity m'(t). Closed-form curves use their symbolic derivative; where
    /// that cannot be evaluated (a kink of `abs`, say) they fall back to a
    /// fourth-order central stencil of step `1e-3 * span`, `span` being the
    /// parameter length of the segment the curve is used on. Polylines return
    /// the chord slope of the piece containing `t` (the last piece at the final
    /// vertex).
    pub fn velocity(&self, t: f64, span: f64) -> Result<Vec<f64>> {
        match self {
            Curve::Expr(c) => c
                .compiled
                .iter()
                .zip(&c.derivatives)
                .map(|(e, d)| match d.eval(&[t]) {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => {
                        let h = STENCIL_STEP * span.abs().max(f64::MIN_POSITIVE);
                        let f = |x: f64| e.eval(&[x]);
                        let (m2, m1, p1, p2) =
                            (f(t - 2.0 * h)?, f(t - h)?, f(t + h)?, f(t + 2.0 * h)?);
                        Ok(((m2 - p2) + 8.0 * (p1 - m1)) / (12.0 * h))
                    }
                })
                .collect(),
            Curve::Polyline(p) => {
                let i = p.piece(t);
                let dt = p.times[i + 1] - p.times[i];
                Ok(p.points[i]
                    .iter()
                    .zip(&p.points[i + 1])
                    .map(|(a, b)| (b - a) / dt)
                    .collect())
            }
        }
    }

    /// Velocity for use on a smooth piece `[lo, hi]` of the parameter range; at a
    /// polyline vertex this picks the chord of the piece being integrated.
    pub fn velocity_within(&self, t: f64, span: f64, lo: f64, hi: f64) -> Result<Vec<f64>> {
        match self {
            Curve::Polyline(_) => self.velocity(0.5 * (lo + hi), span),
            Curve::Expr(_) => self.velocity(t, span),
        }
    }

    /// Interior points of `(a, b)` where the curve is not smooth.
    pub fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        match self {
            Curve::Expr(_) => Vec::new(),
            Curve::Polyline(p) => p
                .times
                .iter()
                .copied()
                .filter(|&t| t > lo && t < hi)
                .collect(),
        }
    }
}

impl Polyline {
    fn piece(&self, t: f64) -> usize {
        let last = self.times.len() - 2;
        match self.times.iter().rposition(|&ti| ti <= t) {
            Some(i) => i.min(last),
            None => 0,
        }
    }
}

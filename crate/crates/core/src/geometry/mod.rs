//! Single-mode principal-bundle machinery for an abelian structure group.
//!
//! In a local trivialization the connection is `ω = dg + A(m) dm`; a curve is
//! horizontal when `ġ = -A(m) ṁ`, so a base segment moves the fiber by
//! `Δg = -∫ A(m) dm`. When `A dm = dF` the same displacement is
//! `F(start) - F(end)`.

mod chart;
mod curve;
mod group;
pub mod quadrature;
mod reconstruct;

pub use chart::{Chart, ChartVar};
pub use curve::Curve;
pub use group::GroupElement;
pub use reconstruct::{reconstruct_potential, Reconstruction, TabulatedPotential};

use crate::error::{Error, Result};
use crate::expr::{CompiledExpr, Expr};

/// Connection coefficients `A(m)`, an `n × d` matrix of expressions over the chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionCoeffs {
    exprs: Vec<Vec<Expr>>,
    compiled: Vec<Vec<CompiledExpr>>,
}

impl ConnectionCoeffs {
    pub fn new(exprs: Vec<Vec<Expr>>, chart: &Chart) -> Result<Self> {
        let names = chart.names();
        let compiled = exprs
            .iter()
            .map(|row| {
                if row.len() != chart.dim() {
                    return Err(Error::InvalidInput(format!(
                        "connection row has {} entries, chart dimension is {}",
                        row.len(),
                        chart.dim()
                    )));
                }
                row.iter().map(|e| e.compile(&names)).collect()
            })
            .collect::<Result<Vec<Vec<_>>>>()?;
        Ok(ConnectionCoeffs { exprs, compiled })
    }

    pub fn fiber_dim(&self) -> usize {
        self.exprs.len()
    }

    pub fn exprs(&self) -> &[Vec<Expr>] {
        &self.exprs
    }

    pub fn entry(&self, a: usize, j: usize) -> &CompiledExpr {
        &self.compiled[a][j]
    }

    /// `A(m) · v`.
    pub fn apply(&self, m: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.compiled
            .iter()
            .map(|row| {
                row.iter()
                    .zip(v)
                    .try_fold(0.0, |acc, (e, vj)| Ok(acc + e.eval(m)? * vj))
            })
            .collect()
    }
}

/// A potential `F` with `dF = A dm`, closed-form or tabulated.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Expr(ExprPotential),
    Table(TabulatedPotential),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExprPotential {
    exprs: Vec<Expr>,
    compiled: Vec<CompiledExpr>,
}

impl Potential {
    pub fn expr(exprs: Vec<Expr>, chart: &Chart) -> Result<Self> {
        let names = chart.names();
        let compiled = exprs
            .iter()
            .map(|e| e.compile(&names))
            .collect::<Result<Vec<_>>>()?;
        Ok(Potential::Expr(ExprPotential { exprs, compiled }))
    }

    pub fn fiber_dim(&self) -> usize {
        match self {
            Potential::Expr(p) => p.exprs.len(),
            Potential::Table(t) => t.fiber_dim(),
        }
    }

    pub fn exprs(&self) -> Option<&[Expr]> {
        match self {
            Potential::Expr(p) => Some(&p.exprs),
            Potential::Table(_) => None,
        }
    }

    pub fn eval(&self, m: &[f64]) -> Result<Vec<f64>> {
        match self {
            Potential::Expr(p) => p.compiled.iter().map(|e| e.eval(m)).collect(),
            Potential::Table(t) => t.eval(m),
        }
    }

    /// Central-difference derivative along `direction` with step `h`.
    pub fn directional_derivative(&self, m: &[f64], direction: &[f64], h: f64) -> Result<Vec<f64>> {
        let shifted =
            |s: f64| -> Vec<f64> { m.iter().zip(direction).map(|(x, u)| x + s * u).collect() };
        let up = self.eval(&shifted(h))?;
        let down = self.eval(&shifted(-h))?;
        Ok(up
            .iter()
            .zip(&down)
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect())
    }
}

/// One mode of a hybrid bundle in trivialized coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub id: String,
    pub chart: Chart,
    pub fiber: Vec<String>,
    pub connection: ConnectionCoeffs,
    pub potential: Option<Potential>,
}

impl Mode {
    pub fn new(
        id: impl Into<String>,
        chart: Chart,
        fiber: Vec<String>,
        connection: Vec<Vec<Expr>>,
        potential: Option<Vec<Expr>>,
    ) -> Result<Self> {
        let id = id.into();
        if connection.len() != fiber.len() {
            return Err(Error::InvalidInput(format!(
                "mode `{id}`: connection has {} rows, fiber dimension is {}",
                connection.len(),
                fiber.len()
            )));
        }
        let connection = ConnectionCoeffs::new(connection, &chart)?;
        let potential = match potential {
            Some(p) => {
                if p.len() != fiber.len() {
                    return Err(Error::InvalidInput(format!(
                        "mode `{id}`: potential has {} entries, fiber dimension is {}",
                        p.len(),
                        fiber.len()
                    )));
                }
                Some(Potential::expr(p, &chart)?)
            }
            None => None,
        };
        Ok(Mode {
            id,
            chart,
            fiber,
            connection,
            potential,
        })
    }

    pub fn base_dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber.len()
    }

    pub fn with_potential(mut self, potential: Potential) -> Self {
        self.potential = Some(potential);
        self
    }
}

/// `ω(ṁ, ġ) = ġ + A(m) ṁ` (left translation is the identity for an abelian group).
pub fn connection_form_eval(
    mode: &Mode,
    m: &[f64],
    mdot: &[f64],
    gdot: &[f64],
) -> Result<Vec<f64>> {
    mode.chart.check_point(m)?;
    if gdot.len() != mode.fiber_dim() || mdot.len() != mode.base_dim() {
        return Err(Error::InvalidInput(
            "velocity dimensions do not match the mode".into(),
        ));
    }
    let am = mode.connection.apply(m, mdot)?;
    Ok(gdot.iter().zip(&am).map(|(g, a)| g + a).collect())
}

/// The unique fiber velocity `ġ = -A(m) ṁ` that makes `(ṁ, ġ)` horizontal.
pub fn horizontal_velocity(mode: &Mode, m: &[f64], mdot: &[f64]) -> Result<Vec<f64>> {
    mode.chart.check_point(m)?;
    if mdot.len() != mode.base_dim() {
        return Err(Error::InvalidInput(
            "velocity dimension does not match the chart".into(),
        ));
    }
    Ok(mode
        .connection
        .apply(m, mdot)?
        .into_iter()
        .map(|x| -x)
        .collect())
}

/// `-∫_{t0}^{t1} A(m(t)) m'(t) dt` by adaptive Simpson to absolute error `tol`.
pub fn segment_holonomy_quadrature(
    mode: &Mode,
    curve: &Curve,
    t0: f64,
    t1: f64,
    tol: f64,
) -> Result<GroupElement> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "quadrature tolerance must be positive, got {tol}"
        )));
    }
    if curve.dim() != mode.base_dim() {
        return Err(Error::InvalidInput(format!(
            "curve dimension {} does not match chart dimension {} of mode `{}`",
            curve.dim(),
            mode.base_dim(),
            mode.id
        )));
    }
    let n = mode.fiber_dim();
    if t0 == t1 {
        return Ok(GroupElement::identity(n));
    }
    mode.chart.check_point(&curve.point(t0)?)?;
    mode.chart.check_point(&curve.point(t1)?)?;

    let span = (t1 - t0).abs();

    let mut knots = vec![t0];
    let mut interior = curve.breakpoints(t0, t1);
    if t1 < t0 {
        interior.reverse();
    }
    knots.extend(interior);
    knots.push(t1);

    let pieces = (knots.len() - 1) as f64;
    let mut total = vec![0.0; n];
    for w in knots.windows(2) {
        let integrand = |t: f64| -> Result<Vec<f64>> {
            let m = curve.point(t)?;
            let v = curve.velocity_within(t, span, w[0], w[1])?;
            Ok(mode
                .connection
                .apply(&m, &v)?
                .into_iter()
                .map(|x| -x)
                .collect())
        };
        let part = quadrature::adaptive_simpson(
            integrand,
            w[0],
            w[1],
            tol / pieces,
            quadrature::DEFAULT_MAX_DEPTH,
        )?;
        for (acc, p) in total.iter_mut().zip(part) {
            *acc += p;
        }
    }
    Ok(GroupElement::from_vec(total))
}

/// `F(start) - F(end)`: the horizontal-lift displacement when `A dm = dF`.
pub fn segment_holonomy_potential(
    mode: &Mode,
    m_start: &[f64],
    m_end: &[f64],
) -> Result<GroupElement> {
    let f = mode
        .potential
        .as_ref()
        .ok_or_else(|| Error::NoPotential(mode.id.clone()))?;
    let a = f.eval(m_start)?;
    let b = f.eval(m_end)?;
    Ok(GroupElement::from_vec(
        a.iter().zip(&b).map(|(x, y)| x - y).collect(),
    ))
}

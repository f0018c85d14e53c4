use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One local coordinate of a base chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartVar {
    pub name: String,
    /// Period for S¹-type coordinates. Curves still carry unwound values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<(f64, f64)>,
}

impl ChartVar {
    pub fn line(name: impl Into<String>) -> Self {
        ChartVar {
            name: name.into(),
            period: None,
            bounds: None,
        }
    }

    pub fn circle(name: impl Into<String>, period: f64) -> Self {
        ChartVar {
            name: name.into(),
            period: Some(period),
            bounds: None,
        }
    }

    pub fn bounded(mut self, lo: f64, hi: f64) -> Self {
        self.bounds = Some((lo, hi));
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    vars: Vec<ChartVar>,
}

impl Chart {
    pub fn new(vars: Vec<ChartVar>) -> Result<Self> {
        for (i, v) in vars.iter().enumerate() {
            if vars[..i].iter().any(|w| w.name == v.name) {
                return Err(Error::InvalidInput(format!(
                    "duplicate chart variable `{}`",
                    v.name
                )));
            }
            if let Some(p) = v.period {
                if !(p > 0.0 && p.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "period of `{}` must be positive, got {p}",
                        v.name
                    )));
                }
            }
            if let Some((lo, hi)) = v.bounds {
                if !(lo < hi) {
                    return Err(Error::InvalidInput(format!(
                        "bounds of `{}` are empty: [{lo}, {hi}]",
                        v.name
                    )));
                }
            }
        }
        Ok(Chart { vars })
    }

    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn vars(&self) -> &[ChartVar] {
        &self.vars
    }

    pub fn names(&self) -> Vec<&str> {
        self.vars.iter().map(|v| v.name.as_str()).collect()
    }

    /// Distance between two points, comparing periodic coordinates modulo their period.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.vars
            .iter()
            .zip(a.iter().zip(b))
            .map(|(v, (x, y))| {
                let mut d = x - y;
                if let Some(p) = v.period {
                    d -= p * (d / p).round();
                }
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, m: &[f64]) -> bool {
        m.len() == self.vars.len()
            && self.vars.iter().zip(m).all(|(v, &x)| match v.bounds {
                Some((lo, hi)) => x >= lo && x <= hi,
                None => x.is_finite(),
            })
    }

    pub(crate) fn check_point(&self, m: &[f64]) -> Result<()> {
        if m.len() != self.vars.len() {
            return Err(Error::InvalidInput(format!(
                "point has {} coordinates, chart has {}",
                m.len(),
                self.vars.len()
            )));
        }
        if !self.contains(m) {
            return Err(Error::Domain(format!(
                "point {m:?} lies outside the chart domain"
            )));
        }
        Ok(())
    }

    /// Box used when sampling the chart: declared bounds, else one period, else [-π, π].
    pub fn sampling_box(&self) -> Vec<(f64, f64)> {
        self.vars
            .iter()
            .map(|v| match (v.bounds, v.period) {
                (Some(b), _) => b,
                (None, Some(p)) => (-0.5 * p, 0.5 * p),
                (None, None) => (-PI, PI),
            })
            .collect()
    }
}

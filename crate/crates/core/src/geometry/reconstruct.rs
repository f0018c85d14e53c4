//! Numerical check of exactness of `A dm` and tabulation of a potential.

use std::collections::HashMap;

use super::quadrature::{adaptive_simpson, DEFAULT_MAX_DEPTH};
use super::{Mode, Potential};
use crate::error::{ClosednessViolation, Error, Result};

/// Line integrals used to build the table run at this absolute tolerance.
const LINE_TOL: f64 = 1e-12;

/// A potential sampled on a regular grid and evaluated by multilinear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedPotential {
    axes: Vec<Vec<f64>>,
    /// Row-major over the axes (last axis fastest); each entry has `n` components.
    values: Vec<Vec<f64>>,
    n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub potential: Potential,
    /// Largest |F(q) - F(p) - ∫_p^q A dm| over grid edges p → q.
    pub max_residual: f64,
    /// Largest closedness defect seen on the grid (at most the tolerance).
    pub max_closedness: f64,
}

impl TabulatedPotential {
    pub fn fiber_dim(&self) -> usize {
        self.n
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn node_value(&self, index: &[usize]) -> &[f64] {
        &self.values[self.flat(index)]
    }

    fn flat(&self, index: &[usize]) -> usize {
        index
            .iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, ax)| acc * ax.len() + i)
    }

    pub fn eval(&self, m: &[f64]) -> Result<Vec<f64>> {
        if m.len() != self.axes.len() {
            return Err(Error::InvalidInput(
                "point dimension does not match the table".into(),
            ));
        }
        // Cell index and fractional position per axis.
        let mut cell = Vec::with_capacity(m.len());
        for (x, ax) in m.iter().zip(&self.axes) {
            let (lo, hi) = (ax[0], ax[ax.len() - 1]);
            let slack = 1e-12 * (hi - lo);
            if !(*x >= lo - slack && *x <= hi + slack) {
                return Err(Error::Domain(format!(
                    "point {m:?} lies outside the tabulated region"
                )));
            }
            let x = x.clamp(lo, hi);
            let h = (hi - lo) / (ax.len() - 1) as f64;
            let i = (((x - lo) / h).floor() as usize).min(ax.len() - 2);
            cell.push((i, (x - ax[i]) / (ax[i + 1] - ax[i])));
        }
        let d = m.len();
        let mut out = vec![0.0; self.n];
        let mut idx = vec![0usize; d];
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            for (k, &(i, s)) in cell.iter().enumerate() {
                let up = (corner >> k) & 1 == 1;
                idx[k] = i + up as usize;
                w *= if up { s } else { 1.0 - s };
            }
            if w == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.node_value(&idx)) {
                *o += w * v;
            }
        }
        Ok(out)
    }
}

/// Verifies that `A dm` is closed on a grid over `region` and, if so, tabulates
/// `F` with `dF = A dm` and `F(anchor) = 0`.
///
/// Closedness compares central-difference mixed partials
/// `∂A_{ak}/∂m_j - ∂A_{aj}/∂m_k` against `tol` at every grid node. `F` at a node
/// is the line integral of `A dm` from `anchor` along axis-aligned legs taken in
/// coordinate order.
pub fn reconstruct_potential(
    mode: &Mode,
    anchor: &[f64],
    region: &[(f64, f64)],
    grid: &[usize],
    tol: f64,
) -> Result<Reconstruction> {
    let d = mode.base_dim();
    let n = mode.fiber_dim();
    if d == 0 {
        return Err(Error::InvalidInput(
            "base dimension must be at least 1".into(),
        ));
    }
    if region.len() != d || grid.len() != d || anchor.len() != d {
        return Err(Error::InvalidInput(format!(
            "region, grid and anchor must all have dimension {d}"
        )));
    }
    if grid.iter().any(|&g| g < 2) {
        return Err(Error::InvalidInput(
            "grid needs at least two nodes per axis".into(),
        ));
    }
    if region.iter().any(|&(lo, hi)| !(lo < hi)) {
        return Err(Error::InvalidInput(
            "region bounds must satisfy lo < hi".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let axes: Vec<Vec<f64>> = region
        .iter()
        .zip(grid)
        .map(|(&(lo, hi), &g)| {
            (0..g)
                .map(|i| {
                    if i + 1 == g {
                        hi
                    } else {
                        lo + (hi - lo) * i as f64 / (g - 1) as f64
                    }
                })
                .collect()
        })
        .collect();
    let nodes = node_indices(grid);
    let point =
        |idx: &[usize]| -> Vec<f64> { idx.iter().zip(&axes).map(|(&i, ax)| ax[i]).collect() };

    // Closedness.
    let mut worst: Option<ClosednessViolation> = None;
    for idx in &nodes {
        let p = point(idx);
        for a in 0..n {
            for j in 0..d {
                for k in (j + 1)..d {
                    let dk_aj = mode.connection.entry(a, j).partial(&p, k, None)?;
                    let dj_ak = mode.connection.entry(a, k).partial(&p, j, None)?;
                    let v = dj_ak - dk_aj;
                    if worst.as_ref().is_none_or(|w| v.abs() > w.violation.abs()) {
                        worst = Some(ClosednessViolation {
                            point: p.clone(),
                            component: a,
                            pair: (j, k),
                            violation: v,
                        });
                    }
                }
            }
        }
    }
    let max_closedness = worst.as_ref().map_or(0.0, |w| w.violation.abs());
    if let Some(w) = worst {
        if w.violation.abs() > tol {
            return Err(Error::NotExact(w));
        }
    }

    // ∫ A_{·j} along axis j from `from` to `to`, other coordinates fixed at `base`.
    let leg = |base: &[f64], j: usize, from: f64, to: f64| -> Result<Vec<f64>> {
        if from == to {
            return Ok(vec![0.0; n]);
        }
        let mut p = base.to_vec();
        adaptive_simpson(
            |s| {
                p[j] = s;
                (0..n)
                    .map(|a| mode.connection.entry(a, j).eval(&p))
                    .collect()
            },
            from,
            to,
            LINE_TOL,
            DEFAULT_MAX_DEPTH,
        )
    };

    // Legs depend only on the coordinates already visited, so memoize by prefix.
    let mut prefix: HashMap<Vec<usize>, Vec<f64>> = HashMap::new();
    let mut values = Vec::with_capacity(nodes.len());
    for idx in &nodes {
        let mut acc = vec![0.0; n];
        let mut base = anchor.to_vec();
        for j in 0..d {
            let key = idx[..=j].to_vec();
            let target = axes[j][idx[j]];
            let part = match prefix.get(&key) {
                Some(v) => v.clone(),
                None => {
                    let v = leg(&base, j, anchor[j], target)?;
                    prefix.insert(key, v.clone());
                    v
                }
            };
            for (s, p) in acc.iter_mut().zip(&part) {
                *s += p;
            }
            base[j] = target;
        }
        values.push(acc);
    }
    let table = TabulatedPotential {
        axes: axes.clone(),
        values,
        n,
    };

    let mut max_residual: f64 = 0.0;
    for idx in &nodes {
        for j in 0..d {
            if idx[j] + 1 >= grid[j] {
                continue;
            }
            let mut next = idx.clone();
            next[j] += 1;
            let p = point(idx);
            let line = leg(&p, j, table.axes[j][idx[j]], table.axes[j][next[j]])?;
            for ((f1, f0), l) in table
                .node_value(&next)
                .iter()
                .zip(table.node_value(idx))
                .zip(&line)
            {
                max_residual = max_residual.max((f1 - f0 - l).abs());
            }
        }
    }

    Ok(Reconstruction {
        potential: Potential::Table(table),
        max_residual,
        max_closedness,
    })
}

fn node_indices(grid: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = grid.iter().product();
    (0..total)
        .map(|mut flat| {
            let mut idx = vec![0; grid.len()];
            for k in (0..grid.len()).rev() {
                idx[k] = flat % grid[k];
                flat /= grid[k];
            }
            idx
        })
        .collect()
}

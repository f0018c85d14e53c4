//! Adaptive Simpson quadrature for vector-valued integrands.

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_DEPTH: u32 = 40;

/// Intervals are not accepted before this depth, so a lucky agreement of the
/// first two Simpson estimates cannot end the refinement early.
const MIN_DEPTH: u32 = 2;

/// Integrates `f` over `[a, b]` to absolute error `tol` (max-norm over components).
pub fn adaptive_simpson<F>(mut f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> Result<Vec<f64>>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = simpson(a, b, &fa, &fm, &fb);
    let mut out = vec![0.0; fa.len()];
    recurse(
        &mut f, a, b, &fa, &fm, &fb, &whole, tol, 0, max_depth, &mut out,
    )?;
    Ok(out)
}

fn simpson(a: f64, b: f64, fa: &[f64], fm: &[f64], fb: &[f64]) -> Vec<f64> {
    let w = (b - a) / 6.0;
    fa.iter()
        .zip(fm)
        .zip(fb)
        .map(|((x, y), z)| w * (x + 4.0 * y + z))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn recurse<F>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: &[f64],
    fm: &[f64],
    fb: &[f64],
    whole: &[f64],
    tol: f64,
    depth: u32,
    max_depth: u32,
    out: &mut [f64],
) -> Result<()>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = simpson(a, m, fa, &flm, fm);
    let right = simpson(m, b, fm, &frm, fb);

    let err = left
        .iter()
        .zip(&right)
        .zip(whole)
        .map(|((l, r), w)| (l + r - w).abs())
        .fold(0.0, f64::max);

    if depth >= MIN_DEPTH && err <= 15.0 * tol {
        for (i, o) in out.iter_mut().enumerate() {
            let refined = left[i] + right[i];
            *o += refined + (refined - whole[i]) / 15.0;
        }
        return Ok(());
    }
    if depth >= max_depth || m == a || m == b {
        return Err(Error::QuadratureNoConvergence { a, b, depth });
    }
    recurse(
        f,
        a,
        m,
        fa,
        &flm,
        fm,
        &left,
        0.5 * tol,
        depth + 1,
        max_depth,
        out,
    )?;
    recurse(
        f,
        m,
        b,
        fm,
        &frm,
        fb,
        &right,
        0.5 * tol,
        depth + 1,
        max_depth,
        out,
    )
}

use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::{
    LoopDefinition, LoopFactory, ModeDefinition, SegmentDefinition, SystemDefinition,
    TransitionDefinition,
};
use crate::error::{Error, Result};
use crate::geometry::ChartVar;
use crate::hybrid::HybridBundle;

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// A disk of radius `r` rolling without slipping: `ẋ = r θ̇`.
pub fn rolling_disk_definition(r: f64) -> SystemDefinition {
    SystemDefinition {
        schema_version: super::SCHEMA_VERSION,
        name: "rolling-disk".into(),
        parameters: BTreeMap::from([("r".to_string(), r)]),
        fiber: strings(&["x"]),
        modes: vec![ModeDefinition {
            id: "rolling".into(),
            chart: vec![ChartVar::circle("theta", 2.0 * PI)],
            connection: vec![strings(&["-r"])],
            potential: Some(strings(&["-r*theta"])),
        }],
        transitions: Vec::new(),
        base_loop: Some(LoopDefinition {
            repeat: 1,
            segments: vec![SegmentDefinition {
                mode: "rolling".into(),
                interval: (0.0, 1.0),
                curve: Some(strings(&["2*pi*t"])),
                polyline: None,
            }],
        }),
    }
}

/// A planar two-legged walker. Each leg's stance phase is a mode whose base
/// is that leg's angle; the feet swap when the angles reach `±δ`.
pub fn planar_walker_definition(l: f64, delta: f64) -> SystemDefinition {
    let mode = |angle: &str| ModeDefinition {
        id: angle.into(),
        chart: vec![ChartVar::line(angle)],
        connection: vec![vec![format!("-l*cos({angle})")]],
        potential: Some(vec![format!("-l*sin({angle})")]),
    };
    let swap = |from: &str, to: &str, sign: &str| TransitionDefinition {
        source: from.into(),
        target: to.into(),
        guard: format!("{from} {sign} delta"),
        reset: vec![format!("-{from}")],
        fiber_reset: Some(strings(&["x"])),
        lifted_reset: None,
        eps_t: None,
    };
    let leg = |angle: &str, t0: f64, t1: f64| SegmentDefinition {
        mode: angle.into(),
        interval: (t0, t1),
        curve: Some(vec![format!("delta - 4*delta*(t - {t0:?})")]),
        polyline: None,
    };
    SystemDefinition {
        schema_version: super::SCHEMA_VERSION,
        name: "planar-walker".into(),
        parameters: BTreeMap::from([("l".to_string(), l), ("delta".to_string(), delta)]),
        fiber: strings(&["x"]),
        modes: vec![mode("theta"), mode("phi")],
        transitions: vec![
            swap("theta", "phi", "+"),
            swap("theta", "phi", "-"),
            swap("phi", "theta", "+"),
            swap("phi", "theta", "-"),
        ],
        base_loop: Some(LoopDefinition {
            repeat: 1,
            segments: vec![leg("theta", 0.0, 0.5), leg("phi", 0.5, 1.0)],
        }),
    }
}

fn assemble(def: SystemDefinition) -> Result<(HybridBundle, LoopFactory)> {
    let sys = def.build()?;
    let cycle = sys
        .base_loop
        .ok_or_else(|| Error::InvalidInput("builtin model has no canonical loop".into()))?;
    Ok((sys.bundle, LoopFactory::new(cycle)))
}

/// The rolling disk and its loop factory (`n` windings of `θ: 0 → 2π`).
pub fn build_rolling_disk(r: f64) -> Result<(HybridBundle, LoopFactory)> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "disk radius must be positive, got {r}"
        )));
    }
    assemble(rolling_disk_definition(r))
}

/// The planar walker and its loop factory (`N` full steps, each leg sweeping `δ → -δ`).
pub fn build_planar_walker(l: f64, delta: f64) -> Result<(HybridBundle, LoopFactory)> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "leg length must be positive, got {l}"
        )));
    }
    if !(delta > 0.0 && delta < PI / 2.0) {
        return Err(Error::InvalidInput(format!(
            "delta must lie in (0, pi/2), got {delta}"
        )));
    }
    assemble(planar_walker_definition(l, delta))
}

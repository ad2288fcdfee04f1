use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::battery::clamped_update;
use super::{check_feasible, BatterySpec, GridTrace, LoadTrace, TargetProfile, TariffSchedule, Violation};
use crate::{Error, Result};

/// Summary of one run: target-matching variance, energy cost and
/// feasibility, plus any leakage or attack metrics attached later.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    /// `(1/T) sum (Y_t - W_t)^2`, kW^2.
    pub variance: f64,
    /// `sum tau * Y_t * C_t`, currency.
    pub cost: f64,
    pub feasible: bool,
    pub violations: Vec<(usize, Violation)>,
    pub leakage_bits: Option<f64>,
    pub metrics: BTreeMap<String, f64>,
}

/// Variance around the target and energy cost of a grid trace.
pub fn evaluate(
    grid: &GridTrace,
    trace: &LoadTrace,
    tariff: &TariffSchedule,
    target: &TargetProfile,
) -> Result<RunReport> {
    let n = trace.len();
    if grid.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: grid.len(),
        });
    }
    tariff.check_covers(n)?;
    let w = target.to_series(n)?;
    let prices = tariff.prices();
    let tau = trace.slot_hours();
    let y = grid.values();
    let variance = y.iter().zip(&w).map(|(y, w)| (y - w) * (y - w)).sum::<f64>() / n as f64;
    let cost = y.iter().zip(&prices).map(|(y, c)| tau * y * c).sum();
    Ok(RunReport {
        variance,
        cost,
        feasible: true,
        violations: Vec::new(),
        leakage_bits: None,
        metrics: BTreeMap::new(),
    })
}

/// Replays the battery recursion under `grid` and lists every slot that
/// breaks a constraint. After a violation the level is clamped and the
/// replay continues.
pub fn revalidate(
    grid: &GridTrace,
    trace: &LoadTrace,
    res: &[f64],
    spec: &BatterySpec,
) -> Result<Vec<(usize, Violation)>> {
    let n = trace.len();
    if grid.len() != n || res.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: if grid.len() != n { grid.len() } else { res.len() },
        });
    }
    let tau = trace.slot_hours();
    let mut state = spec.initial_state();
    let mut out = Vec::new();
    for (t, (&x, &y)) in trace.load().iter().zip(grid.values()).enumerate() {
        if let Err(v) = check_feasible(x, y, res[t], &state, spec, tau) {
            out.push((t, v));
        }
        state = clamped_update(&state, x, y, res[t], spec, tau);
    }
    Ok(out)
}

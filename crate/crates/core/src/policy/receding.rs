use alloc::vec::Vec;

use super::offline::PolicyWeights;
use super::shaping::{check_lossless, solve_window, Window, WindowTarget};
use crate::model::{battery_update, BatterySpec, GridTrace, LoadTrace, TariffSchedule};
use crate::{Error, Result};

/// Look-ahead `H_F` and remembered past `H_P`, in slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HorizonSpec {
    pub future: usize,
    pub past: usize,
}

impl HorizonSpec {
    /// Horizon spanning `hours` of look-ahead and memory at slot length
    /// `slot_hours`.
    pub fn from_hours(future_h: f64, past_h: f64, slot_hours: f64) -> Self {
        Self {
            future: libm::round(future_h / slot_hours) as usize,
            past: libm::round(past_h / slot_hours) as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetMode {
    /// Optimize a target level `W_t` jointly with the window's grid loads,
    /// also penalizing the last `H_P` committed grid loads against it.
    JointW,
    /// Follow a given target series (e.g. a low-pass filtered load).
    Series(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecedingOutput {
    pub grid: GridTrace,
    /// Target level in force at each slot.
    pub targets: Vec<f64>,
    /// Largest KKT residual over all window solves.
    pub kkt_residual: f64,
}

/// Short-horizon shaping: at each slot the load of the next `H_F` slots is
/// known, the window problem is solved and only the first grid load is
/// committed.
pub fn solve_receding_horizon(
    trace: &LoadTrace,
    tariff: &TariffSchedule,
    spec: &BatterySpec,
    weights: &PolicyWeights,
    horizon: HorizonSpec,
    mode: &TargetMode,
) -> Result<RecedingOutput> {
    weights.validate()?;
    check_lossless(spec)?;
    let n = trace.len();
    tariff.check_covers(n)?;
    if horizon.future + 1 > n {
        return Err(Error::InvalidParameter(alloc::format!(
            "look-ahead of {} slots exceeds the {n}-slot horizon",
            horizon.future
        )));
    }
    if let TargetMode::Series(w) = mode {
        if w.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: w.len(),
            });
        }
    }
    let prices = tariff.prices();
    let x = trace.load();
    let e: Vec<f64> = (0..n).map(|t| trace.res_at(t)).collect();
    let tau = trace.slot_hours();

    let mut state = spec.initial_state();
    let mut grid: Vec<f64> = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    let mut kkt: f64 = 0.0;
    for t in 0..n {
        let end = (t + horizon.future + 1).min(n);
        let past = &grid[t.saturating_sub(horizon.past)..t];
        let target = match mode {
            TargetMode::JointW => WindowTarget::Joint { past },
            TargetMode::Series(w) => WindowTarget::Fixed(&w[t..end]),
        };
        let sol = solve_window(
            &Window {
                x: &x[t..end],
                e: &e[t..end],
                prices: &prices[t..end],
                stored_kwh: state.stored_kwh,
                tau,
                alpha: weights.alpha,
                target,
            },
            spec,
        )?;
        kkt = kkt.max(sol.kkt_residual);
        let y = clamp_to_box(sol.y[0], x[t], spec);
        state = battery_update(&state, x[t], y, e[t], spec, tau)?;
        grid.push(y);
        targets.push(match mode {
            TargetMode::Series(w) => w[t],
            TargetMode::JointW => sol
                .w
                .unwrap_or_else(|| sol.y.iter().sum::<f64>() / sol.y.len() as f64),
        });
    }
    Ok(RecedingOutput {
        grid: GridTrace::new(grid),
        targets,
        kkt_residual: kkt,
    })
}

/// Removes interior-point round-off outside the per-slot power box.
fn clamp_to_box(y: f64, x: f64, spec: &BatterySpec) -> f64 {
    let mut lo = x - spec.max_discharge_kw;
    if !spec.allow_sell {
        lo = lo.max(0.0);
    }
    y.max(lo).min(x + spec.max_charge_kw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{daily_household_trace, time_of_use_tariff};
    use crate::policy::offline::{shaping_objective, solve_offline_constant_target};
    use alloc::vec;

    #[test]
    fn full_window_reproduces_offline() {
        let trace = daily_household_trace(24, 1, 2).unwrap();
        let tariff = time_of_use_tariff(24, 1).unwrap();
        let spec = BatterySpec::placeholder_4kwh();
        let weights = PolicyWeights::new(0.6).unwrap();
        let off = solve_offline_constant_target(&trace, &tariff, &spec, &weights, None).unwrap();
        let w = vec![trace.mean_load(); 24];
        let rh = solve_receding_horizon(
            &trace,
            &tariff,
            &spec,
            &weights,
            HorizonSpec { future: 23, past: 0 },
            &TargetMode::Series(w.clone()),
        )
        .unwrap();
        let obj = shaping_objective(rh.grid.values(), &w, &tariff.prices(), 0.6);
        assert!((obj - off.objective).abs() <= 1e-5 * off.objective.abs().max(1.0));
    }

    #[test]
    fn myopic_cost_only_without_battery_follows_load() {
        let trace = LoadTrace::new(1.0, vec![1.0, 0.2, 3.0]).unwrap();
        let tariff = TariffSchedule::flat(0.2, 3).unwrap();
        let rh = solve_receding_horizon(
            &trace,
            &tariff,
            &BatterySpec::none(),
            &PolicyWeights::new(0.0).unwrap(),
            HorizonSpec { future: 0, past: 0 },
            &TargetMode::JointW,
        )
        .unwrap();
        for (y, x) in rh.grid.values().iter().zip(trace.load()) {
            assert!((y - x).abs() < 1e-6);
        }
    }

    #[test]
    fn look_ahead_longer_than_trace_is_rejected() {
        let trace = LoadTrace::new(1.0, vec![1.0, 1.0]).unwrap();
        let r = solve_receding_horizon(
            &trace,
            &TariffSchedule::flat(0.1, 2).unwrap(),
            &BatterySpec::none(),
            &PolicyWeights::new(0.5).unwrap(),
            HorizonSpec { future: 2, past: 0 },
            &TargetMode::JointW,
        );
        assert!(r.is_err());
    }
}

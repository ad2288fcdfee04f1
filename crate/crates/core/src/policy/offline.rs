use alloc::format;
use alloc::vec::Vec;

use super::shaping::{check_lossless, solve_window, Window, WindowTarget};
use crate::model::{BatterySpec, GridTrace, LoadTrace, TargetProfile, TariffSchedule};
use crate::{Error, Result};

/// Privacy-cost weight `alpha` and per-slot battery wear cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyWeights {
    pub alpha: f64,
    pub wear_cost: f64,
}

impl PolicyWeights {
    pub fn new(alpha: f64) -> Result<Self> {
        let w = Self {
            alpha,
            wear_cost: 0.0,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn with_wear_cost(mut self, wear_cost: f64) -> Result<Self> {
        self.wear_cost = wear_cost;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!(
                "alpha {} outside [0, 1]",
                self.alpha
            )));
        }
        if !(self.wear_cost >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "wear cost {} < 0",
                self.wear_cost
            )));
        }
        Ok(())
    }
}

/// Output of the offline target-matching solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineSolution {
    pub grid: GridTrace,
    pub target: TargetProfile,
    /// `sum (1 - alpha) C_t Y_t + alpha (Y_t - W_t)^2`.
    pub objective: f64,
    pub kkt_residual: f64,
    /// Outer iterations; the current solvers finish in one.
    pub iterations: usize,
}

/// Privacy-cost objective of a grid trace against a target series.
pub fn shaping_objective(y: &[f64], target: &[f64], prices: &[f64], alpha: f64) -> f64 {
    y.iter()
        .zip(target)
        .zip(prices)
        .map(|((y, w), c)| (1.0 - alpha) * c * y + alpha * (y - w) * (y - w))
        .sum()
}

fn setup(trace: &LoadTrace, tariff: &TariffSchedule, spec: &BatterySpec, weights: &PolicyWeights) -> Result<Vec<f64>> {
    weights.validate()?;
    check_lossless(spec)?;
    tariff.check_covers(trace.len())?;
    Ok(tariff.prices())
}

/// Offline grid load matching a constant target `W` (default: mean user
/// load) at the lowest weighted energy cost, with the whole trace known in
/// advance.
pub fn solve_offline_constant_target(
    trace: &LoadTrace,
    tariff: &TariffSchedule,
    spec: &BatterySpec,
    weights: &PolicyWeights,
    w: Option<f64>,
) -> Result<OfflineSolution> {
    let w = w.unwrap_or_else(|| trace.mean_load());
    let target = TargetProfile::constant(w)?;
    solve_offline_series_target(trace, tariff, spec, weights, &target)
}

/// Offline solver for an arbitrary target profile.
pub fn solve_offline_series_target(
    trace: &LoadTrace,
    tariff: &TariffSchedule,
    spec: &BatterySpec,
    weights: &PolicyWeights,
    target: &TargetProfile,
) -> Result<OfflineSolution> {
    let prices = setup(trace, tariff, spec, weights)?;
    let n = trace.len();
    let w = target.to_series(n)?;
    let e: Vec<f64> = (0..n).map(|t| trace.res_at(t)).collect();
    let sol = solve_window(
        &Window {
            x: trace.load(),
            e: &e,
            prices: &prices,
            stored_kwh: spec.initial_kwh,
            tau: trace.slot_hours(),
            alpha: weights.alpha,
            target: WindowTarget::Fixed(&w),
        },
        spec,
    )?;
    Ok(OfflineSolution {
        grid: GridTrace::new(sol.y),
        target: target.clone(),
        objective: sol.objective,
        kkt_residual: sol.kkt_residual,
        iterations: 1,
    })
}

/// Offline solver with one target level per tariff period. The levels are
/// decision variables next to the grid loads, so a single convex solve
/// finds both.
pub fn solve_piecewise_target(
    trace: &LoadTrace,
    tariff: &TariffSchedule,
    spec: &BatterySpec,
    weights: &PolicyWeights,
) -> Result<OfflineSolution> {
    let prices = setup(trace, tariff, spec, weights)?;
    let n = trace.len();
    let mut group = alloc::vec![0usize; n];
    for (i, p) in tariff.periods().iter().enumerate() {
        for g in &mut group[p.start_slot.min(n)..p.end_slot.min(n)] {
            *g = i;
        }
    }
    let e: Vec<f64> = (0..n).map(|t| trace.res_at(t)).collect();
    let sol = solve_window(
        &Window {
            x: trace.load(),
            e: &e,
            prices: &prices,
            stored_kwh: spec.initial_kwh,
            tau: trace.slot_hours(),
            alpha: weights.alpha,
            target: WindowTarget::Levels { group: &group },
        },
        spec,
    )?;
    let mut levels = sol.levels;
    levels.resize(tariff.periods().len(), 0.0);
    let best = OfflineSolution {
        grid: GridTrace::new(sol.y),
        target: TargetProfile::piecewise_unchecked(levels, tariff),
        objective: sol.objective,
        kkt_residual: sol.kkt_residual,
        iterations: 1,
    };
    // A constant target is one admissible piecewise profile; keeping the
    // better of the two guards against solver tolerance.
    let constant = solve_offline_constant_target(trace, tariff, spec, weights, None)?;
    if constant.objective < best.objective {
        let levels = alloc::vec![trace.mean_load(); tariff.periods().len()];
        return Ok(OfflineSolution {
            target: TargetProfile::piecewise_unchecked(levels, tariff),
            ..constant
        });
    }
    Ok(best)
}

use alloc::vec::Vec;

use super::offline::PolicyWeights;
use crate::model::{
    discharge_range, no_waste_floor, simulate, BatterySpec, GridTrace, LoadTrace, Observation,
    Policy, ResModel, TariffSchedule,
};
use crate::{Result, Rng};

fn trace_res(trace: &LoadTrace) -> ResModel {
    if trace.res().is_some() {
        ResModel::Trace
    } else {
        ResModel::None
    }
}

/// Tracks the previous grid load: the battery covers any rise in demand
/// and absorbs any fall, as far as its state allows. `y_1 = x_1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct BestEffort;

impl Policy for BestEffort {
    fn decide(&mut self, obs: &Observation<'_>, _rng: &mut Rng) -> f64 {
        let x = obs.x();
        let Some(prev) = obs.prev_grid() else {
            return x;
        };
        let state = obs.state();
        let (lo, hi) = discharge_range(x, obs.e(), &state, obs.spec, obs.slot_hours);
        // Do not buy energy that would only be spilled.
        let floor = no_waste_floor(obs.e(), &state, obs.spec, obs.slot_hours);
        let lo = lo.max(floor.min(hi));
        x - (x - prev).clamp(lo, hi)
    }
}

pub fn best_effort_policy(trace: &LoadTrace, spec: &BatterySpec) -> Result<GridTrace> {
    Ok(simulate(trace, spec, &trace_res(trace), &mut BestEffort, 0)?.grid)
}

/// Per-slot surrogate of the wear-aware objective: each slot minimizes
///
/// ```text
/// (1 - alpha) C_t Y_t + alpha (Y_t - W)^2 + C_B 1[X_t != Y_t]
///     + kappa (B_t - B_max / 2)(Y_t - X_t)
/// ```
///
/// over its feasible grid loads, with no look-ahead. The guard term makes
/// charging cheaper below half capacity and discharging cheaper above it.
#[derive(Debug, Clone)]
pub struct MyopicPolicy {
    pub weights: PolicyWeights,
    pub prices: Vec<f64>,
    pub target_kw: f64,
    /// Weight of the battery-level guard; 0 disables it.
    pub kappa: f64,
}

impl MyopicPolicy {
    /// Guard coefficient on the draw `x - y`; off for unbounded batteries.
    fn guard(&self, stored: f64, capacity: f64) -> f64 {
        if self.kappa == 0.0 || !capacity.is_finite() {
            0.0
        } else {
            self.kappa * (stored - capacity / 2.0)
        }
    }

    /// Slot cost of grid load `y`.
    pub fn slot_cost(&self, t: usize, x: f64, y: f64, stored: f64, capacity: f64) -> f64 {
        let a = self.weights.alpha;
        let active = if (x - y).abs() > 1e-12 { self.weights.wear_cost } else { 0.0 };
        (1.0 - a) * self.prices[t] * y
            + a * (y - self.target_kw) * (y - self.target_kw)
            + active
            + self.guard(stored, capacity) * (y - x)
    }
}

impl Policy for MyopicPolicy {
    fn decide(&mut self, obs: &Observation<'_>, _rng: &mut Rng) -> f64 {
        let (t, x) = (obs.slot, obs.x());
        let state = obs.state();
        let cap = obs.spec.capacity_kwh;
        let (lo, hi) = discharge_range(x, obs.e(), &state, obs.spec, obs.slot_hours);
        let (y_lo, y_hi) = (x - hi, x - lo);
        let a = self.weights.alpha;
        // Linear coefficient of the smooth part in y.
        let slope = (1.0 - a) * self.prices[t] + self.guard(state.stored_kwh, cap);
        let y_star = if a > 0.0 {
            (self.target_kw - slope / (2.0 * a)).clamp(y_lo, y_hi)
        } else if slope > 0.0 {
            y_lo
        } else {
            y_hi
        };
        let y_star = if y_star.is_finite() { y_star } else { x };
        let cost = |y| self.slot_cost(t, x, y, state.stored_kwh, cap);
        if cost(x) <= cost(y_star) {
            x
        } else {
            y_star
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MyopicParams {
    /// Constant target; the trace mean when `None`.
    pub target_kw: Option<f64>,
    pub kappa: f64,
}

impl Default for MyopicParams {
    fn default() -> Self {
        Self {
            target_kw: None,
            kappa: 0.0,
        }
    }
}

pub fn myopic_online_policy(
    trace: &LoadTrace,
    tariff: &TariffSchedule,
    spec: &BatterySpec,
    weights: &PolicyWeights,
    params: MyopicParams,
) -> Result<GridTrace> {
    weights.validate()?;
    tariff.check_covers(trace.len())?;
    let mut policy = MyopicPolicy {
        weights: *weights,
        prices: tariff.prices(),
        target_kw: params.target_kw.unwrap_or_else(|| trace.mean_load()),
        kappa: params.kappa,
    };
    Ok(simulate(trace, spec, &trace_res(trace), &mut policy, 0)?.grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{check_feasible, SystemState};
    use alloc::vec;

    fn variance(v: &[f64]) -> f64 {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
    }

    #[test]
    fn best_effort_constant_and_no_battery() {
        let flat = LoadTrace::new(1.0, vec![1.2; 6]).unwrap();
        let y = best_effort_policy(&flat, &BatterySpec::new(2.0, 1.0)).unwrap();
        assert!(y.values().iter().all(|v| *v == 1.2));

        let bumpy = LoadTrace::new(1.0, vec![0.5, 2.0, 0.1, 3.0]).unwrap();
        let y = best_effort_policy(&bumpy, &BatterySpec::none()).unwrap();
        assert_eq!(y.values(), bumpy.load());
    }

    #[test]
    fn best_effort_smooths_square_wave() {
        let x: Vec<f64> = (0..48).map(|t| if (t / 4) % 2 == 0 { 0.5 } else { 2.5 }).collect();
        let trace = LoadTrace::new(0.5, x.clone()).unwrap();
        let y = best_effort_policy(&trace, &BatterySpec::new(10.0, 5.0)).unwrap();
        assert!(variance(y.values()) < variance(&x));
    }

    #[test]
    fn myopic_huge_wear_cost_leaves_battery_idle() {
        let trace = LoadTrace::new(1.0, vec![0.5, 2.0, 1.0]).unwrap();
        let tariff = TariffSchedule::flat(0.2, 3).unwrap();
        let w = PolicyWeights::new(0.7).unwrap().with_wear_cost(1e9).unwrap();
        let y = myopic_online_policy(&trace, &tariff, &BatterySpec::new(5.0, 2.5), &w, MyopicParams::default())
            .unwrap();
        assert_eq!(y.values(), trace.load());
    }

    #[test]
    fn myopic_pure_privacy_hits_target() {
        let trace = LoadTrace::new(1.0, vec![0.5, 2.0, 1.0, 0.5]).unwrap();
        let tariff = TariffSchedule::flat(0.2, 4).unwrap();
        let y = myopic_online_policy(
            &trace,
            &tariff,
            &BatterySpec::new(f64::INFINITY, 10.0),
            &PolicyWeights::new(1.0).unwrap(),
            MyopicParams::default(),
        )
        .unwrap();
        assert!(y.values().iter().all(|v| (v - 1.0).abs() < 1e-12), "{:?}", y.values());
    }

    #[test]
    fn guard_pulls_battery_toward_half() {
        let trace = LoadTrace::new(1.0, vec![1.0; 4]).unwrap();
        let tariff = TariffSchedule::flat(0.0, 4).unwrap();
        let w = PolicyWeights::new(0.5).unwrap();
        let run = |initial: f64, kappa: f64| {
            let spec = BatterySpec::new(4.0, initial).with_peaks(0.5, 0.5);
            let params = MyopicParams { target_kw: Some(1.0), kappa };
            myopic_online_policy(&trace, &tariff, &spec, &w, params).unwrap()
        };
        // On target already: idle without the guard.
        assert_eq!(run(4.0, 0.0).values(), trace.load());
        assert!(run(4.0, 0.5).values()[0] < 1.0);
        assert!(run(0.0, 0.5).values()[0] > 1.0);
    }

    #[test]
    fn myopic_matches_per_slot_grid_search() {
        let x = [0.4, 2.1, 1.3];
        let prices = [0.1, 0.3, 0.2];
        let trace = LoadTrace::new(1.0, x.to_vec()).unwrap();
        let tariff = TariffSchedule::new(vec![
            crate::model::PricePeriod { start_slot: 0, end_slot: 1, price: 0.1 },
            crate::model::PricePeriod { start_slot: 1, end_slot: 2, price: 0.3 },
            crate::model::PricePeriod { start_slot: 2, end_slot: 3, price: 0.2 },
        ])
        .unwrap();
        let spec = BatterySpec::new(1.0, 0.3).with_peaks(0.8, 0.8);
        let (alpha, wear, w) = (0.4, 0.05, 1.2);
        let weights = PolicyWeights::new(alpha).unwrap().with_wear_cost(wear).unwrap();
        let y = myopic_online_policy(&trace, &tariff, &spec, &weights, MyopicParams { target_kw: Some(w), kappa: 0.0 })
            .unwrap();

        // Oracle: scan y on a 1e-4 grid (plus y = x) for every slot.
        let mut b = 0.3;
        for t in 0..3 {
            let cost = |y: f64| {
                let active = if (x[t] - y).abs() > 1e-12 { wear } else { 0.0 };
                (1.0 - alpha) * prices[t] * y + alpha * (y - w) * (y - w) + active
            };
            let state = SystemState { slot: t, stored_kwh: b };
            let mut best = (cost(x[t]), x[t]);
            for k in 0..=40_000 {
                let cand = k as f64 * 1e-4;
                if check_feasible(x[t], cand, 0.0, &state, &spec, 1.0).is_ok() && cost(cand) < best.0 {
                    best = (cost(cand), cand);
                }
            }
            assert!((cost(y.values()[t]) - best.0).abs() < 1e-6, "slot {t}");
            b = (b + y.values()[t] - x[t]).clamp(0.0, 1.0);
        }
    }
}

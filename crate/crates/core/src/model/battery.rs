use alloc::format;

use crate::{Error, Result};

/// Slack allowed on power and energy constraints (kW / kWh). Solver output
/// lands on constraint boundaries up to round-off.
pub const FEAS_TOL: f64 = 1e-7;

/// Rechargeable battery parameters.
///
/// Peak powers may be `f64::INFINITY` (unconstrained). Efficiencies apply
/// multiplicatively: charging at `p` kW stores `eta_charge * p`, drawing
/// `p` kW removes `p / eta_discharge`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatterySpec {
    pub capacity_kwh: f64,
    pub max_charge_kw: f64,
    pub max_discharge_kw: f64,
    pub eta_charge: f64,
    pub eta_discharge: f64,
    pub initial_kwh: f64,
    pub allow_sell: bool,
    /// Average-power budget for RES-only shaping, kW.
    pub avg_power_kw: Option<f64>,
}

impl BatterySpec {
    /// Lossless battery without power limits.
    pub fn new(capacity_kwh: f64, initial_kwh: f64) -> Self {
        Self {
            capacity_kwh,
            max_charge_kw: f64::INFINITY,
            max_discharge_kw: f64::INFINITY,
            eta_charge: 1.0,
            eta_discharge: 1.0,
            initial_kwh,
            allow_sell: false,
            avg_power_kw: None,
        }
    }

    /// No storage at all.
    pub fn none() -> Self {
        Self::new(0.0, 0.0)
    }

    /// Placeholder for a 4 kWh home battery. The capacity matches the
    /// nominal rating; the power limits and starting charge are illustrative
    /// values, not manufacturer data.
    pub fn placeholder_4kwh() -> Self {
        Self::new(4.0, 2.0).with_peaks(3.0, 3.0)
    }

    pub fn with_peaks(mut self, max_charge_kw: f64, max_discharge_kw: f64) -> Self {
        self.max_charge_kw = max_charge_kw;
        self.max_discharge_kw = max_discharge_kw;
        self
    }

    pub fn with_efficiency(mut self, eta_charge: f64, eta_discharge: f64) -> Self {
        self.eta_charge = eta_charge;
        self.eta_discharge = eta_discharge;
        self
    }

    pub fn with_selling(mut self, allow_sell: bool) -> Self {
        self.allow_sell = allow_sell;
        self
    }

    pub fn is_lossless(&self) -> bool {
        self.eta_charge == 1.0 && self.eta_discharge == 1.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidBattery(format!("{what}: {self:?}")));
        if !(self.capacity_kwh >= 0.0) {
            return bad("capacity must be >= 0");
        }
        if !(self.max_charge_kw >= 0.0 && self.max_discharge_kw >= 0.0) {
            return bad("peak powers must be >= 0");
        }
        if !(self.eta_charge > 0.0 && self.eta_charge <= 1.0)
            || !(self.eta_discharge > 0.0 && self.eta_discharge <= 1.0)
        {
            return bad("efficiencies must lie in (0, 1]");
        }
        if !(self.initial_kwh >= 0.0 && self.initial_kwh <= self.capacity_kwh) {
            return bad("initial charge must lie in [0, capacity]");
        }
        if let Some(p) = self.avg_power_kw {
            if !(p >= 0.0) {
                return bad("average power budget must be >= 0");
            }
        }
        Ok(())
    }

    pub fn initial_state(&self) -> SystemState {
        SystemState {
            slot: 0,
            stored_kwh: self.initial_kwh,
        }
    }
}

/// Battery level at the start of `slot`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemState {
    pub slot: usize,
    pub stored_kwh: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    DischargePeak,
    ChargePeak,
    BatteryEmpty,
    NegativeGrid,
}

impl core::fmt::Display for Violation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Violation::DischargePeak => "discharge peak power exceeded",
            Violation::ChargePeak => "charge peak power exceeded",
            Violation::BatteryEmpty => "battery would be drained below zero",
            Violation::NegativeGrid => "negative grid load without selling",
        })
    }
}

/// Stored energy after one slot, before clamping at either end.
fn raw_next_level(x: f64, y: f64, e: f64, stored: f64, spec: &BatterySpec, tau: f64) -> f64 {
    let net = e - (x - y);
    if net >= 0.0 {
        stored + tau * spec.eta_charge * net
    } else {
        stored + tau * net / spec.eta_discharge
    }
}

/// Returns the first violated constraint, checking in the order discharge
/// peak, charge peak, battery emptiness, negative grid load.
pub fn check_feasible(
    x: f64,
    y: f64,
    e: f64,
    state: &SystemState,
    spec: &BatterySpec,
    tau: f64,
) -> core::result::Result<(), Violation> {
    let d = x - y;
    if d > spec.max_discharge_kw + FEAS_TOL {
        return Err(Violation::DischargePeak);
    }
    if d < -spec.max_charge_kw - FEAS_TOL {
        return Err(Violation::ChargePeak);
    }
    if raw_next_level(x, y, e, state.stored_kwh, spec, tau) < -FEAS_TOL {
        return Err(Violation::BatteryEmpty);
    }
    if !spec.allow_sell && y < -FEAS_TOL {
        return Err(Violation::NegativeGrid);
    }
    Ok(())
}

/// One step of the battery recursion `B' = min(B + E - (X - Y), B_max)`,
/// with conversion losses. Energy beyond capacity is spilled.
pub fn battery_update(
    state: &SystemState,
    x: f64,
    y: f64,
    e: f64,
    spec: &BatterySpec,
    tau: f64,
) -> Result<SystemState> {
    check_feasible(x, y, e, state, spec, tau).map_err(|violation| Error::Infeasible {
        slot: state.slot,
        violation,
    })?;
    Ok(clamped_update(state, x, y, e, spec, tau))
}

pub(crate) fn clamped_update(
    state: &SystemState,
    x: f64,
    y: f64,
    e: f64,
    spec: &BatterySpec,
    tau: f64,
) -> SystemState {
    let next = raw_next_level(x, y, e, state.stored_kwh, spec, tau);
    SystemState {
        slot: state.slot + 1,
        stored_kwh: next.clamp(0.0, spec.capacity_kwh),
    }
}

/// Feasible range `[lo, hi]` of battery-side draw `d = x - y` for one slot.
pub fn discharge_range(x: f64, e: f64, state: &SystemState, spec: &BatterySpec, tau: f64) -> (f64, f64) {
    let mut hi = spec
        .max_discharge_kw
        .min(e + state.stored_kwh * spec.eta_discharge / tau);
    if !spec.allow_sell {
        hi = hi.min(x);
    }
    (-spec.max_charge_kw, hi)
}

/// Smallest draw `d` that does not push energy past capacity; anything
/// below it buys energy only to spill it.
pub fn no_waste_floor(e: f64, state: &SystemState, spec: &BatterySpec, tau: f64) -> f64 {
    e - (spec.capacity_kwh - state.stored_kwh) / (tau * spec.eta_charge)
}

use alloc::format;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::math;
use crate::model::{
    check_feasible, discharge_range, simulate, BatterySpec, GridTrace, LoadTrace, Observation,
    Policy, ResModel,
};
use crate::{Error, Result, Rng};

/// Tolerance, in units of `beta`, for treating a load as on the grid.
const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteppingVariant {
    /// Keep the previous level for as long as it stays admissible.
    Hold,
    /// Step up until the battery is full, then down until it is empty.
    ChargeGreedy,
    /// Pick uniformly among the admissible adjacent levels.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteppingSpec {
    /// Quantization step `beta`, kW.
    pub step_kw: f64,
    pub variant: SteppingVariant,
    /// Smoothing factor of an exponentially weighted moving average of the
    /// demand. When set and the hold variant has to change level, it picks
    /// the level nearest this steady-state estimate rather than the one
    /// nearest its previous level.
    pub ewma: Option<f64>,
}

impl SteppingSpec {
    pub fn new(step_kw: f64, variant: SteppingVariant) -> Self {
        Self {
            step_kw,
            variant,
            ewma: None,
        }
    }

    pub fn validate(&self, spec: &BatterySpec) -> Result<()> {
        if !(self.step_kw > 0.0 && self.step_kw.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step {} must be positive",
                self.step_kw
            )));
        }
        if self.step_kw > spec.max_charge_kw.min(spec.max_discharge_kw) {
            return Err(Error::InvalidParameter(format!(
                "step {} exceeds the battery power limits",
                self.step_kw
            )));
        }
        if let Some(a) = self.ewma {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::InvalidParameter(format!("EWMA factor {a} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Quantized-grid-load policy: each slot reports one of the two multiples
/// of `beta` adjacent to the user load.
#[derive(Debug, Clone)]
pub struct SteppingPolicy {
    spec: SteppingSpec,
    charging: bool,
    reference: Option<f64>,
    /// Slots where neither adjacent level was feasible.
    pub privacy_breaks: Vec<usize>,
}

impl SteppingPolicy {
    pub fn new(spec: SteppingSpec) -> Self {
        Self {
            spec,
            charging: true,
            reference: None,
            privacy_breaks: Vec::new(),
        }
    }

    /// The one or two grid levels adjacent to `x`.
    pub fn adjacent_levels(x: f64, beta: f64) -> (f64, f64) {
        let h = x / beta;
        let r = math::round(h);
        if (h - r).abs() <= GRID_TOL {
            (r * beta, r * beta)
        } else {
            (math::floor(h) * beta, math::ceil(h) * beta)
        }
    }

    fn fallback(&mut self, obs: &Observation<'_>) -> f64 {
        self.privacy_breaks.push(obs.slot);
        let beta = self.spec.step_kw;
        let x = obs.x();
        let (lo_d, hi_d) = discharge_range(x, obs.e(), &obs.state(), obs.spec, obs.slot_hours);
        let (y_lo, y_hi) = (x - hi_d, x - lo_d);
        // Nearest grid level inside [y_lo, y_hi], else the nearest point.
        let below = math::floor(x / beta) * beta;
        let above = below + beta;
        let mut best: Option<f64> = None;
        for cand in [math::ceil(y_lo / beta) * beta, math::floor(y_hi / beta) * beta, below, above] {
            if cand >= y_lo - 1e-12 && cand <= y_hi + 1e-12 {
                match best {
                    Some(b) if (b - x).abs() <= (cand - x).abs() => {}
                    _ => best = Some(cand),
                }
            }
        }
        best.unwrap_or_else(|| x.clamp(y_lo, y_hi))
    }
}

impl Policy for SteppingPolicy {
    fn decide(&mut self, obs: &Observation<'_>, rng: &mut Rng) -> f64 {
        let x = obs.x();
        let beta = self.spec.step_kw;
        let state = obs.state();
        let feasible =
            |y: f64| check_feasible(x, y, obs.e(), &state, obs.spec, obs.slot_hours).is_ok();
        let (lo, hi) = Self::adjacent_levels(x, beta);
        let reference = match (self.spec.ewma, self.reference) {
            (Some(a), Some(r)) => a * x + (1.0 - a) * r,
            (Some(_), None) => x,
            (None, _) => obs.prev_grid().unwrap_or(x),
        };
        if self.spec.ewma.is_some() {
            self.reference = Some(reference);
        }
        let cands: Vec<f64> = if lo == hi { alloc::vec![lo] } else { alloc::vec![lo, hi] };
        let ok: Vec<f64> = cands.iter().copied().filter(|y| feasible(*y)).collect();
        if ok.is_empty() {
            return self.fallback(obs);
        }
        match self.spec.variant {
            SteppingVariant::Hold => {
                if let Some(prev) = obs.prev_grid() {
                    if ok.iter().any(|y| (y - prev).abs() <= GRID_TOL * beta) {
                        return prev;
                    }
                }
                // Nearest admissible level to the reference; ties go up.
                let mut best = ok[0];
                for &y in &ok[1..] {
                    if (y - reference).abs() <= (best - reference).abs() {
                        best = y;
                    }
                }
                best
            }
            SteppingVariant::ChargeGreedy => {
                let full = state.stored_kwh >= obs.spec.capacity_kwh - 1e-9;
                if self.charging && full {
                    self.charging = false;
                }
                let want = if self.charging { hi } else { lo };
                if ok.contains(&want) {
                    want
                } else {
                    // Could not continue in this direction: turn around.
                    self.charging = !self.charging;
                    ok[0]
                }
            }
            SteppingVariant::Random => ok[rng.random_range(0..ok.len())],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteppingOutput {
    pub grid: GridTrace,
    pub privacy_breaks: Vec<usize>,
}

/// Runs the stepping policy over `trace` (renewables from its generation
/// column, if any).
pub fn stepping_policy(
    trace: &LoadTrace,
    spec: &BatterySpec,
    stepping: SteppingSpec,
    seed: u64,
) -> Result<SteppingOutput> {
    stepping.validate(spec)?;
    let mut policy = SteppingPolicy::new(stepping);
    let res = if trace.res().is_some() { ResModel::Trace } else { ResModel::None };
    let out = simulate(trace, spec, &res, &mut policy, seed)?;
    Ok(SteppingOutput {
        grid: out.grid,
        privacy_breaks: policy.privacy_breaks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn on_grid(y: f64, beta: f64) -> bool {
        let h = y / beta;
        (h - libm::round(h)).abs() < 1e-9
    }

    #[test]
    fn adjacent_levels() {
        let (lo, hi) = SteppingPolicy::adjacent_levels(1.3, 0.5);
        assert_eq!((lo, hi), (1.0, 1.5));
        assert_eq!(SteppingPolicy::adjacent_levels(1.5, 0.5), (1.5, 1.5));
    }

    #[test]
    fn hold_hand_example() {
        // Hand simulation, B_1 = 1, B_max = 2:
        //   slot 0: x=0.3, levels {0, 0.5}, nearest to x is 0.5, B=1.2
        //   slot 1: 0.5 still adjacent and feasible, held,        B=1.4
        //   slot 2: x=1.3, levels {1.0, 1.5}, nearest to 0.5 is 1.0, B=1.1
        //   slots 3, 4: 1.0 held, B=0.8, 0.5
        let trace = LoadTrace::new(1.0, vec![0.3, 0.3, 1.3, 1.3, 1.3]).unwrap();
        let spec = BatterySpec::new(2.0, 1.0);
        let out = stepping_policy(&trace, &spec, SteppingSpec::new(0.5, SteppingVariant::Hold), 0).unwrap();
        assert_eq!(out.grid.values(), &[0.5, 0.5, 1.0, 1.0, 1.0]);
        assert!(out.privacy_breaks.is_empty());
    }

    #[test]
    fn hold_keeps_level_when_load_is_on_it() {
        let trace = LoadTrace::new(1.0, vec![1.0, 1.0, 1.0]).unwrap();
        let spec = BatterySpec::new(2.0, 1.0);
        let out = stepping_policy(&trace, &spec, SteppingSpec::new(0.5, SteppingVariant::Hold), 0).unwrap();
        assert_eq!(out.grid.values(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn random_variant_is_reproducible_and_feasible() {
        let x = vec![0.3, 1.3, 0.7, 2.2, 0.1];
        let trace = LoadTrace::new(1.0, x.clone()).unwrap();
        let spec = BatterySpec::new(1.0, 0.5).with_peaks(1.0, 1.0);
        let stepping = SteppingSpec::new(0.5, SteppingVariant::Random);
        let a = stepping_policy(&trace, &spec, stepping, 17).unwrap();
        let b = stepping_policy(&trace, &spec, stepping, 17).unwrap();
        assert_eq!(a, b);
        // Brute-force constraint check of every slot.
        let mut level = 0.5;
        for (t, (&x, &y)) in x.iter().zip(a.grid.values()).enumerate() {
            let d = x - y;
            assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&d), "slot {t}");
            assert!(y >= 0.0);
            level += -d;
            assert!(level >= -1e-9, "slot {t}");
            level = level.min(1.0);
            if !a.privacy_breaks.contains(&t) {
                assert!(on_grid(y, 0.5));
                assert!((y - x).abs() < 0.5);
            }
        }
    }

    #[test]
    fn charge_greedy_cycles() {
        let trace = LoadTrace::new(1.0, vec![0.25; 8]).unwrap();
        let spec = BatterySpec::new(0.5, 0.0);
        let out = stepping_policy(&trace, &spec, SteppingSpec::new(0.5, SteppingVariant::ChargeGreedy), 0).unwrap();
        // Charges 0.25 per slot at y=0.5 until full, then drains at y=0.
        assert_eq!(out.grid.values(), &[0.5, 0.5, 0.0, 0.0, 0.5, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn no_battery_forces_privacy_breaks() {
        let trace = LoadTrace::new(1.0, vec![0.3, 0.8]).unwrap();
        let stepping = SteppingSpec::new(0.5, SteppingVariant::Hold);
        // Without storage the upper level is still reachable: the surplus
        // is bought and spilled.
        let out = stepping_policy(&trace, &BatterySpec::none(), stepping, 0).unwrap();
        assert_eq!(out.grid.values(), &[0.5, 1.0]);
        assert!(out.privacy_breaks.is_empty());
        // With no charging power either, only y = x is feasible.
        let rigid = BatterySpec::none().with_peaks(0.0, 0.0);
        let mut policy = SteppingPolicy::new(stepping);
        let out = simulate(&trace, &rigid, &ResModel::None, &mut policy, 0).unwrap();
        assert_eq!(out.grid.values(), &[0.3, 0.8]);
        assert_eq!(policy.privacy_breaks, vec![0, 1]);
    }

    #[test]
    fn step_larger_than_power_limit_is_rejected() {
        let spec = BatterySpec::new(2.0, 1.0).with_peaks(0.2, 0.2);
        assert!(SteppingSpec::new(0.5, SteppingVariant::Hold).validate(&spec).is_err());
    }
}

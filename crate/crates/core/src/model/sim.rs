use alloc::vec::Vec;

use super::{battery_update, BatterySpec, GridTrace, LoadTrace, ResModel, SystemState};
use crate::{rng_stream, Error, Result, Rng};

/// What a causal policy may see when deciding `Y_t`: `X^t`, `E^t`, `B^t`
/// and `Y^{t-1}`.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub slot: usize,
    /// User load up to and including this slot.
    pub load: &'a [f64],
    /// Renewable generation up to and including this slot.
    pub res: &'a [f64],
    /// Battery levels at the start of each slot up to this one.
    pub stored: &'a [f64],
    /// Grid load of all previous slots.
    pub grid: &'a [f64],
    pub spec: &'a BatterySpec,
    pub slot_hours: f64,
}

impl Observation<'_> {
    pub fn x(&self) -> f64 {
        self.load[self.slot]
    }

    pub fn e(&self) -> f64 {
        self.res[self.slot]
    }

    pub fn state(&self) -> SystemState {
        SystemState {
            slot: self.slot,
            stored_kwh: self.stored[self.slot],
        }
    }

    pub fn prev_grid(&self) -> Option<f64> {
        self.grid.last().copied()
    }
}

/// An energy management policy: maps the causal history to the next grid
/// load.
pub trait Policy {
    fn decide(&mut self, obs: &Observation<'_>, rng: &mut Rng) -> f64;

    /// Offline policies were planned with knowledge of the whole trace.
    fn is_offline(&self) -> bool {
        false
    }
}

/// `Y_t = X_t`: no shaping.
#[derive(Debug, Clone, Copy, Default)]
pub struct PassThrough;

impl Policy for PassThrough {
    fn decide(&mut self, obs: &Observation<'_>, _rng: &mut Rng) -> f64 {
        obs.x()
    }
}

/// Replays a precomputed grid load.
#[derive(Debug, Clone)]
pub struct Schedule(pub Vec<f64>);

impl Policy for Schedule {
    fn decide(&mut self, obs: &Observation<'_>, _rng: &mut Rng) -> f64 {
        self.0[obs.slot]
    }

    fn is_offline(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub grid: GridTrace,
    /// `T + 1` states: the initial one and one after every slot.
    pub states: Vec<SystemState>,
    /// Renewable generation actually used to drive the run.
    pub res: Vec<f64>,
}

/// Runs `policy` over `trace`. The renewable process and the policy draw
/// from separate seeded streams, so a run is reproducible from `seed`.
pub fn simulate(
    trace: &LoadTrace,
    spec: &BatterySpec,
    res: &ResModel,
    policy: &mut dyn Policy,
    seed: u64,
) -> Result<SimOutput> {
    spec.validate()?;
    let mut res_rng = rng_stream(seed, 0);
    let mut policy_rng = rng_stream(seed, 1);
    let e = res.generate(trace, &mut res_rng)?;
    simulate_with_res(trace, spec, e, policy, &mut policy_rng)
}

pub(crate) fn simulate_with_res(
    trace: &LoadTrace,
    spec: &BatterySpec,
    e: Vec<f64>,
    policy: &mut dyn Policy,
    rng: &mut Rng,
) -> Result<SimOutput> {
    let n = trace.len();
    if e.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: e.len(),
        });
    }
    let tau = trace.slot_hours();
    let x = trace.load();
    let mut grid = Vec::with_capacity(n);
    let mut stored = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut state = spec.initial_state();
    stored.push(state.stored_kwh);
    states.push(state);
    for t in 0..n {
        let obs = Observation {
            slot: t,
            load: &x[..=t],
            res: &e[..=t],
            stored: &stored[..=t],
            grid: &grid[..t],
            spec,
            slot_hours: tau,
        };
        let y = policy.decide(&obs, rng);
        state = battery_update(&state, x[t], y, e[t], spec, tau)?;
        grid.push(y);
        stored.push(state.stored_kwh);
        states.push(state);
    }
    Ok(SimOutput {
        grid: GridTrace::new(grid),
        states,
        res: e,
    })
}

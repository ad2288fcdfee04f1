//! Discrete-time household model.
//!
//! Grid load `Y_t` is grid-side power: what the meter reports, measured
//! before any battery conversion loss. All powers are kW, energies kWh and
//! slot durations hours.

mod battery;
mod eval;
mod res;
mod sim;
mod synthetic;
mod tariff;
mod target;
mod trace;

pub use battery::{
    battery_update, check_feasible, discharge_range, no_waste_floor, BatterySpec, SystemState,
    Violation, FEAS_TOL,
};
pub use eval::{evaluate, revalidate, RunReport};
pub use res::{generate_synthetic_trace, LoadModel, MarkovChain, ResModel};
pub(crate) use res::{check_rows, sample_index};
pub use sim::{simulate, Observation, PassThrough, Policy, Schedule, SimOutput};
pub use synthetic::{daily_household_trace, time_of_use_tariff};
pub use tariff::{PricePeriod, TariffSchedule};
pub use target::TargetProfile;
pub use trace::{ApplianceLoads, GridTrace, LoadTrace};

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::{LoadTrace, PricePeriod, TariffSchedule};
use crate::{rng_from_seed, Result};

/// A plausible household day: standby base load, a cycling fridge, and
/// randomly placed kettle, cooking and laundry events clustered around
/// morning and evening.
pub fn daily_household_trace(slots_per_day: usize, days: usize, seed: u64) -> Result<LoadTrace> {
    let slots_per_day = slots_per_day.max(1);
    let tau = 24.0 / slots_per_day as f64;
    let n = slots_per_day * days.max(1);
    let mut rng = rng_from_seed(seed);
    let mut load = vec![0.0; n];
    let slot_of = |day: usize, hour: f64| day * slots_per_day + ((hour / tau) as usize).min(slots_per_day - 1);
    let span = |hours: f64| (crate::math::ceil(hours / tau) as usize).max(1);

    for (t, x) in load.iter_mut().enumerate() {
        let hour = (t % slots_per_day) as f64 * tau;
        *x = 0.25 + 0.05 * rng.random::<f64>();
        // Fridge compressor, roughly one hour on in three.
        if ((hour / 1.0) as usize) % 3 == 0 {
            *x += 0.12;
        }
    }

    let mut add = |start: usize, len: usize, kw: f64| {
        for x in load.iter_mut().skip(start).take(len) {
            *x += kw;
        }
    };
    for day in 0..days.max(1) {
        // Morning kettle and toaster.
        let h = 6.5 + 1.5 * rng.random::<f64>();
        add(slot_of(day, h), span(0.25), 2.0);
        add(slot_of(day, h + 0.25), span(0.25), 0.8);
        // Evening cooking.
        let h = 17.0 + 2.0 * rng.random::<f64>();
        add(slot_of(day, h), span(1.0), 2.2);
        // Laundry sometime during the day.
        let h = 9.0 + 8.0 * rng.random::<f64>();
        add(slot_of(day, h), span(1.5), 0.6);
        // TV and lighting.
        add(slot_of(day, 19.0), span(4.0), 0.35);
    }
    LoadTrace::new(tau, load)
}

/// Three-rate tariff: off-peak 00-07, mid 07-16 and 20-24, peak 16-20.
pub fn time_of_use_tariff(slots_per_day: usize, days: usize) -> Result<TariffSchedule> {
    let slots_per_day = slots_per_day.max(1);
    let tau = 24.0 / slots_per_day as f64;
    let bands: [(f64, f64); 4] = [(7.0, 0.10), (16.0, 0.15), (20.0, 0.30), (24.0, 0.15)];
    let mut periods: Vec<PricePeriod> = Vec::new();
    for day in 0..days.max(1) {
        let mut start = day * slots_per_day;
        for (end_hour, price) in bands {
            let end = day * slots_per_day + (crate::math::round(end_hour / tau) as usize).min(slots_per_day);
            if end <= start {
                continue;
            }
            match periods.last_mut() {
                Some(last) if last.price == price && last.end_slot == start => last.end_slot = end,
                _ => periods.push(PricePeriod {
                    start_slot: start,
                    end_slot: end,
                    price,
                }),
            }
            start = end;
        }
    }
    TariffSchedule::new(periods)
}

use meterpriv_core::attacks::peak_recovery;
use meterpriv_core::info::{privacy_power_function, Pmf};
use meterpriv_core::model::{daily_household_trace, time_of_use_tariff, BatterySpec, LoadTrace};
use meterpriv_core::policy::{
    solve_offline_constant_target, solve_piecewise_target, stepping_policy, PolicyWeights, SteppingSpec,
    SteppingVariant,
};
use proptest::prelude::*;

fn hb(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

/// Lossless battery replay; returns the lowest stored level seen.
fn replay(trace: &LoadTrace, spec: &BatterySpec, y: &[f64]) -> f64 {
    let mut b = spec.initial_kwh;
    let mut lowest = b;
    for (t, (x, y)) in trace.load().iter().zip(y).enumerate() {
        assert!(x - y <= spec.max_discharge_kw + 1e-6, "discharge peak at {t}");
        assert!(y - x <= spec.max_charge_kw + 1e-6, "charge peak at {t}");
        assert!(*y >= -1e-6, "negative grid load at {t}");
        b = (b + trace.slot_hours() * (trace.res_at(t) - x + y)).min(spec.capacity_kwh);
        lowest = lowest.min(b);
    }
    lowest
}

proptest! {
    // A binary source can only move mass from 1 to 0, so the channel is a
    // Z-channel with crossover avg / p1.
    #[test]
    fn binary_privacy_power_is_z_channel(p1 in 0.05f64..0.95, frac in 0.01f64..0.99) {
        let avg = frac * p1;
        let p = Pmf::new(vec![0.0, 1.0], vec![1.0 - p1, p1]).unwrap();
        let r = privacy_power_function(&p, avg, 1.0).unwrap();
        let exact = hb(p1 - avg) - p1 * hb(avg / p1);
        prop_assert!((r.bits - exact).abs() < 1e-6, "{} vs {exact}", r.bits);
    }
}

#[test]
fn offline_solutions_replay_within_battery_limits() {
    let spec = BatterySpec::placeholder_4kwh();
    for seed in 0..4 {
        let trace = daily_household_trace(48, 1, seed).unwrap();
        let tariff = time_of_use_tariff(48, 1).unwrap();
        for alpha in [0.2, 0.8] {
            let w = PolicyWeights::new(alpha).unwrap();
            for y in [
                solve_offline_constant_target(&trace, &tariff, &spec, &w, None).unwrap().grid,
                solve_piecewise_target(&trace, &tariff, &spec, &w).unwrap().grid,
            ] {
                assert!(replay(&trace, &spec, y.values()) >= -1e-6);
            }
        }
    }
}

#[test]
fn stepping_output_stays_on_lattice() {
    let spec = BatterySpec::placeholder_4kwh();
    let trace = daily_household_trace(96, 2, 3).unwrap();
    for variant in [SteppingVariant::Hold, SteppingVariant::ChargeGreedy, SteppingVariant::Random] {
        let out = stepping_policy(&trace, &spec, SteppingSpec::new(0.5, variant), 11).unwrap();
        assert!(peak_recovery(out.grid.values(), 0.5).is_ok());
        assert!(replay(&trace, &spec, out.grid.values()) >= -1e-6);
    }
}

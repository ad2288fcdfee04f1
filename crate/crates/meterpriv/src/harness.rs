//! Experiment execution: builds the model from a config, runs the policy at
//! every sweep point and collects one table row per point.
//!
//! Sweep points run in parallel. Every point reuses the configured seed, so
//! points differ only in the swept parameter (common random numbers), and
//! rows are collected in sweep order.

use meterpriv_core::attacks::{estimate_error_exponents, peak_recovery, peak_slots, edge_detector, score_detections, LrtModel};
use meterpriv_core::info::{
    empirical_entropy, empirical_mi_fsm, empirical_mi_plugin, empirical_relative_entropy, min_kl_channel,
    privacy_power_function, EnergyFractionPolicy, HypothesisModel, Pmf, UnitSystem,
};
use meterpriv_core::model::{
    daily_household_trace, evaluate, revalidate, time_of_use_tariff, BatterySpec, GridTrace, LoadTrace, PricePeriod, ResModel,
    TargetProfile, TariffSchedule, Violation,
};
use meterpriv_core::policy::{
    best_effort_policy, lowpass_target, myopic_online_policy, solve_offline_constant_target, solve_piecewise_target,
    solve_receding_horizon, stepping_policy, HorizonSpec, MyopicParams, PolicyWeights, SteppingSpec, SteppingVariant,
    TargetMode,
};
use meterpriv_core::{rng_stream, Error as CoreError};
use rand::Rng as _;
use rayon::prelude::*;

use crate::config::{
    AttackConfig, BaConfig, BatteryConfig, Capacity, ExperimentConfig, LeakageSweepConfig, Metric, PolicyConfig,
    ResConfig, StepVariant, SweepAxis, TariffConfig, TraceConfig,
};
use crate::error::{HarnessError, Result};
use crate::io;
use crate::report::{Table, Value};

pub const STATUS_OK: &str = "ok";
pub const STATUS_INFEASIBLE: &str = "infeasible";

/// Rows plus the number of points that were infeasible.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub table: Table,
    pub infeasible: usize,
}

pub fn load_trace(cfg: &ExperimentConfig) -> Result<LoadTrace> {
    match &cfg.trace {
        TraceConfig::File { path, slot_hours } => io::read_trace(path, *slot_hours),
        TraceConfig::Synthetic { slots_per_day, days } => {
            Ok(daily_household_trace(*slots_per_day, *days, cfg.seed)?)
        }
    }
}

/// The built-in day tariff, cut to the trace length.
fn default_tariff(trace: &LoadTrace) -> Result<TariffSchedule> {
    let per_day = ((24.0 / trace.slot_hours()).round() as usize).max(1);
    let days = trace.len().div_ceil(per_day);
    let full = time_of_use_tariff(per_day, days)?;
    let n = trace.len();
    let periods: Vec<PricePeriod> = full
        .periods()
        .iter()
        .filter(|p| p.start_slot < n)
        .map(|p| PricePeriod {
            end_slot: p.end_slot.min(n),
            ..*p
        })
        .collect();
    Ok(TariffSchedule::new(periods)?)
}

pub fn load_tariff(cfg: &ExperimentConfig, trace: &LoadTrace) -> Result<TariffSchedule> {
    match &cfg.tariff {
        TariffConfig::TimeOfUse => default_tariff(trace),
        TariffConfig::Flat { price } => Ok(TariffSchedule::flat(*price, trace.len())?),
        TariffConfig::File { path } => io::read_tariff(path),
    }
}

/// An infinite capacity becomes `2 T X_max τ` starting half full: any
/// grid schedule in `[0, X_max]` moves the level by at most `T X_max τ`,
/// so the limits never bind.
pub fn battery_spec(b: Option<&BatteryConfig>, trace: &LoadTrace) -> BatterySpec {
    let Some(b) = b else {
        return BatterySpec::placeholder_4kwh();
    };
    let (capacity, initial) = match b.capacity_kwh {
        Capacity::Kwh(c) => (c, b.initial_kwh.unwrap_or(c / 2.0)),
        Capacity::Named(_) => {
            let c = 2.0 * trace.len() as f64 * trace.max_load() * trace.slot_hours();
            (c, b.initial_kwh.unwrap_or(c / 2.0))
        }
    };
    BatterySpec::new(capacity, initial)
        .with_peaks(
            b.max_charge_kw.unwrap_or(f64::INFINITY),
            b.max_discharge_kw.unwrap_or(f64::INFINITY),
        )
        .with_efficiency(b.eta_charge, b.eta_discharge)
}

fn res_model(r: &ResConfig) -> ResModel {
    match r {
        ResConfig::None => ResModel::None,
        ResConfig::Trace => ResModel::Trace,
        ResConfig::Bernoulli { rate, peak_kw } => ResModel::Bernoulli {
            rate: *rate,
            peak_kw: *peak_kw,
        },
    }
}

struct PointResult {
    status: String,
    values: Vec<f64>,
}

fn metric_columns(cfg: &ExperimentConfig) -> Vec<&'static str> {
    let mut cols = vec!["variance", "cost"];
    cols.extend(cfg.metrics.iter().map(Metric::column));
    cols
}

fn infeasible(cfg: &ExperimentConfig, slot: usize, v: Violation) -> PointResult {
    PointResult {
        status: format!("{STATUS_INFEASIBLE}: slot {slot} {v:?}"),
        values: vec![f64::NAN; metric_columns(cfg).len()],
    }
}

fn quantize(v: &[f64], q: f64) -> Vec<f64> {
    v.iter().map(|x| (x / q).round() * q).collect()
}

/// Simulates one configuration on `base` (the trace without generation).
fn run_point(cfg: &ExperimentConfig, base: &LoadTrace) -> Result<PointResult> {
    let res = res_model(&cfg.res).generate(base, &mut rng_stream(cfg.seed, 0))?;
    let trace = base.clone().with_res(res.clone())?;
    let tariff = load_tariff(cfg, &trace)?;
    let spec = battery_spec(cfg.battery.as_ref(), &trace);
    let weights = |alpha: f64| PolicyWeights::new(alpha);
    let mean = TargetProfile::constant(trace.mean_load())?;

    let mut breaks = None;
    let outcome = match &cfg.policy {
        PolicyConfig::PassThrough => Ok((GridTrace::new(pass_through(&trace)), mean)),
        PolicyConfig::BestEffort => best_effort_policy(&trace, &spec).map(|g| (g, mean)),
        PolicyConfig::OfflineConstant { alpha, target_kw } => {
            solve_offline_constant_target(&trace, &tariff, &spec, &weights(*alpha)?, *target_kw).map(|s| (s.grid, s.target))
        }
        PolicyConfig::OfflinePiecewise { alpha } => {
            solve_piecewise_target(&trace, &tariff, &spec, &weights(*alpha)?).map(|s| (s.grid, s.target))
        }
        PolicyConfig::Receding {
            alpha,
            future_h,
            past_h,
            lowpass_cutoff_hz,
        } => {
            let mode = match lowpass_cutoff_hz {
                Some(fc) => TargetMode::Series(lowpass_target(&trace, *fc)?.to_series(trace.len())?),
                None => TargetMode::JointW,
            };
            let horizon = HorizonSpec::from_hours(*future_h, *past_h, trace.slot_hours());
            solve_receding_horizon(&trace, &tariff, &spec, &weights(*alpha)?, horizon, &mode)
                .and_then(|out| Ok((out.grid, TargetProfile::series(out.targets)?)))
        }
        PolicyConfig::Myopic { alpha, kappa, target_kw } => {
            let params = MyopicParams {
                target_kw: *target_kw,
                kappa: *kappa,
            };
            let target = TargetProfile::constant(target_kw.unwrap_or(trace.mean_load()))?;
            myopic_online_policy(&trace, &tariff, &spec, &weights(*alpha)?, params).map(|g| (g, target))
        }
        PolicyConfig::Stepping { step_kw, variant, ewma } => {
            let variant = match variant {
                StepVariant::Hold => SteppingVariant::Hold,
                StepVariant::ChargeGreedy => SteppingVariant::ChargeGreedy,
                StepVariant::Random => SteppingVariant::Random,
            };
            let mut s = SteppingSpec::new(*step_kw, variant);
            s.ewma = *ewma;
            // Policy randomness comes from stream 1, as in `simulate`.
            stepping_policy(&trace, &spec, s, cfg.seed).map(|out| {
                breaks = Some(out.privacy_breaks.len());
                (out.grid, mean)
            })
        }
    };
    let (grid, target) = match outcome {
        Ok(v) => v,
        Err(CoreError::Infeasible { slot, violation }) => return Ok(infeasible(cfg, slot, violation)),
        Err(e) => return Err(e.into()),
    };

    if let Some((slot, v)) = first_violation(&grid, &trace, &res, &spec)? {
        return Ok(infeasible(cfg, slot, v));
    }
    let report = evaluate(&grid, &trace, &tariff, &target)?;
    let x = trace.load();
    let y = grid.values();
    let opts = &cfg.metric_options;
    let mut values = vec![report.variance, report.cost];
    for m in &cfg.metrics {
        values.push(match m {
            Metric::MiPlugin => empirical_mi_plugin(&quantize(x, opts.quantum_kw), &quantize(y, opts.quantum_kw), false)?,
            Metric::RelativeEntropy => empirical_relative_entropy(x, y, opts.bins)?,
            Metric::EdgeRecall | Metric::EdgePrecision => {
                let truth = edge_detector(x, opts.edge_threshold_kw)?.slots();
                let found = edge_detector(y, opts.edge_threshold_kw)?.slots();
                let s = score_detections(&found, &truth, opts.tolerance);
                if *m == Metric::EdgeRecall {
                    s.recall
                } else {
                    s.precision
                }
            }
            Metric::PeakRecall => {
                let step = cfg.policy.step_kw().expect("validated");
                let thr = opts.peak_threshold_kw.unwrap_or(0.8 * trace.max_load());
                let found = peak_recovery(y, step)?;
                score_detections(&found, &peak_slots(x, thr), opts.tolerance).recall
            }
            Metric::PrivacyBreaks => breaks.expect("validated") as f64,
        });
    }
    Ok(PointResult {
        status: STATUS_OK.into(),
        values,
    })
}

/// Replays the battery under the policy's output; a point is only reported
/// if it passes.
fn first_violation(grid: &GridTrace, trace: &LoadTrace, res: &[f64], spec: &BatterySpec) -> Result<Option<(usize, Violation)>> {
    Ok(revalidate(grid, trace, res, spec)?.first().copied())
}

/// Grid load equal to user load net of generation, spilling any surplus.
fn pass_through(trace: &LoadTrace) -> Vec<f64> {
    (0..trace.len()).map(|t| (trace.load()[t] - trace.res_at(t)).max(0.0)).collect()
}

fn with_point(cfg: &ExperimentConfig, axis: SweepAxis, v: f64) -> ExperimentConfig {
    let mut c = cfg.clone();
    match axis {
        SweepAxis::Alpha => {
            if let Some(a) = c.policy.alpha_mut() {
                *a = v;
            }
        }
        SweepAxis::BMax => {
            let mut b = c.battery.take().unwrap_or(BatteryConfig {
                capacity_kwh: Capacity::Kwh(4.0),
                initial_kwh: None,
                max_charge_kw: Some(3.0),
                max_discharge_kw: Some(3.0),
                eta_charge: 1.0,
                eta_discharge: 1.0,
            });
            b.capacity_kwh = Capacity::Kwh(v);
            b.initial_kwh = b.initial_kwh.map(|i| i.min(v));
            c.battery = Some(b);
        }
        SweepAxis::PE => {
            if let ResConfig::Bernoulli { rate, .. } = &mut c.res {
                *rate = v;
            }
        }
    }
    c
}

/// Runs the configured policy once, or at every point of `[sweep]`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let base = load_trace(cfg)?;
    let points: Vec<(Option<f64>, ExperimentConfig)> = match &cfg.sweep {
        Some(s) => s.values.iter().map(|v| (Some(*v), with_point(cfg, s.axis, *v))).collect(),
        None => vec![(None, cfg.clone())],
    };
    log::info!("running {} point(s) on {} slots", points.len(), base.len());
    let results: Vec<Result<PointResult>> = points.par_iter().map(|(_, c)| run_point(c, &base)).collect();

    let mut columns: Vec<String> = Vec::new();
    if let Some(s) = &cfg.sweep {
        columns.push(s.axis.name().into());
    }
    columns.push("status".into());
    columns.extend(metric_columns(cfg).iter().map(|c| c.to_string()));
    let mut table = Table::new(columns);
    let mut infeasible = 0;
    for ((point, _), r) in points.iter().zip(results) {
        let r = r?;
        if r.status != STATUS_OK {
            log::warn!("point {point:?}: {}", r.status);
            infeasible += 1;
        }
        let mut row: Vec<Value> = point.iter().map(|v| Value::Num(*v)).collect();
        row.push(Value::Text(r.status));
        row.extend(r.values.into_iter().map(Value::Num));
        table.push(row);
    }
    Ok(RunOutput { table, infeasible })
}

/// Leakage of the energy-fraction policy for every `(B_max, p_e)` pair.
/// All pairs are driven by the same per-slot uniforms, so differences
/// between cells come from the parameters, not from sampling noise.
pub fn sweep_pe(l: &LeakageSweepConfig, seed: u64) -> Result<Table> {
    let mut rng = rng_stream(seed, 0);
    let uniforms: Vec<[f64; 3]> = (0..l.slots).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    let policy = EnergyFractionPolicy { weights: l.weights };
    let pairs: Vec<(u32, f64)> = l.b_max.iter().flat_map(|b| l.p_e.iter().map(move |p| (*b, *p))).collect();
    let rows: Vec<Result<Vec<Value>>> = pairs
        .par_iter()
        .map(|&(b_max, p_e)| {
            let sys = UnitSystem {
                x_probs: l.x_probs.clone(),
                e_units: l.e_units,
                p_e,
                b_max,
                peak: l.peak,
                initial_level: 0,
            };
            let fsm = sys.fsm(&policy)?;
            let (x, y) = sys.simulate(&policy, &uniforms);
            let leakage = empirical_mi_fsm(&x, &y, &fsm)?;
            Ok(vec![
                Value::Int(b_max as i64),
                Value::Num(p_e),
                Value::Num(leakage),
                Value::Num(empirical_entropy(&x)),
            ])
        })
        .collect();
    let mut table = Table::new(["b_max", "p_e", "leakage_bits", "input_entropy_bits"]);
    for r in rows {
        table.push(r?);
    }
    Ok(table)
}

/// Privacy-power function at every average-power budget.
pub fn privacy_power_table(b: &BaConfig) -> Result<Table> {
    let pmf = Pmf::new(b.support.clone(), b.probs.clone())?;
    let rows: Vec<Result<Vec<Value>>> = b
        .avg
        .par_iter()
        .map(|avg| {
            let r = privacy_power_function(&pmf, *avg, b.peak)?;
            Ok(vec![
                Value::Num(*avg),
                Value::Num(r.bits),
                Value::Num(r.multiplier),
                Value::Num(r.mean_draw),
            ])
        })
        .collect();
    let mut table = Table::new(["avg_power", "bits", "multiplier", "mean_draw"]);
    for r in rows {
        table.push(r?);
    }
    Ok(table)
}

/// Error exponent of the likelihood-ratio attacker on raw loads and on the
/// loads shaped by the divergence-minimizing channel.
pub fn attack_table(a: &AttackConfig, seed: u64) -> Result<Table> {
    let hyp = HypothesisModel::new(
        Pmf::new(a.support.clone(), a.h0.clone())?,
        Pmf::new(a.support.clone(), a.h1.clone())?,
        a.avg_budget,
    )?;
    let raw = LrtModel::raw(&hyp);
    let kl = min_kl_channel(&hyp, a.peak)?;
    let shaped = LrtModel::from_channels(&hyp, [&kl.channels[0], &kl.channels[1]])?;
    let models = [("raw", raw), ("min_kl", shaped)];
    let rows: Vec<Result<Vec<Value>>> = models
        .par_iter()
        .map(|(name, m)| {
            let divergence = meterpriv_core::info::kl_divergence(&m.q0, &m.q1)?;
            let e = estimate_error_exponents(m, a.n, a.trials, a.p_i_cap, seed)?;
            Ok(vec![
                Value::from(*name),
                Value::Num(divergence),
                Value::Num(e.exponent),
                Value::Num(e.ci.0),
                Value::Num(e.ci.1),
                Value::Num(e.p_i),
                Value::Num(e.log2_p_ii),
            ])
        })
        .collect();
    let mut table = Table::new(["channel", "divergence_bits", "exponent", "ci_low", "ci_high", "p_i", "log2_p_ii"]);
    for r in rows {
        table.push(r?);
    }
    Ok(table)
}

pub fn missing(section: &str) -> HarnessError {
    HarnessError::Config(format!("missing [{section}] section"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overdraw_is_reported_not_raised() {
        let trace = LoadTrace::new(1.0, vec![1.0, 1.0, 1.0]).unwrap();
        let spec = BatterySpec::new(1.0, 0.5);
        let grid = GridTrace::new(vec![1.0, 0.0, 1.0]);
        let v = first_violation(&grid, &trace, &[0.0; 3], &spec).unwrap();
        assert_eq!(v, Some((1, Violation::BatteryEmpty)));
        let cfg = ExperimentConfig::from_toml("metrics = [\"mi_plugin\"]").unwrap();
        let r = infeasible(&cfg, 1, Violation::BatteryEmpty);
        assert!(r.status.starts_with(STATUS_INFEASIBLE));
        assert_eq!(r.values.len(), 3);
        assert!(r.values.iter().all(|v| v.is_nan()));
        assert_eq!(first_violation(&GridTrace::new(vec![1.0; 3]), &trace, &[0.0; 3], &spec).unwrap(), None);
    }
}

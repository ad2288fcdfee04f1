//! Acceptance suite: one line per criterion, non-zero exit on any failure.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use meterpriv::config::LeakageSweepConfig;
use meterpriv::{harness, ExperimentConfig, Format};
use meterpriv_core::attacks::{estimate_error_exponents, LrtModel};
use meterpriv_core::info::{
    channel_oracle_search, empirical_mi_plugin, exact_leakage_small_n, min_kl_channel, privacy_power_function,
    trapdoor_bound, BinarySystem, HypothesisModel, Pmf, RandomFeasibleRule,
};
use meterpriv_core::model::{daily_household_trace, time_of_use_tariff, BatterySpec, LoadTrace};
use meterpriv_core::policy::{
    average_cost_gap, q_learning, shaping_objective, solve_offline_constant_target, solve_piecewise_target,
    solve_receding_horizon, value_iteration, ActionSpec, HorizonSpec, MdpSpec, PolicyWeights, QLearningParams,
    TargetMode,
};
use meterpriv_core::smdm::{mask_readings, obfuscate_trace, to_milliwatts, zero_sum_masks, DpSpec};
use meterpriv_core::{rng_from_seed, rng_stream};
use rand::Rng as _;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_budget(elapsed: Duration, limit_s: f64) -> Outcome {
    check(
        elapsed.as_secs_f64() < limit_s,
        format!("{:.2} s of {limit_s} s", elapsed.as_secs_f64()),
    )
}

fn random_pmf(rng: &mut meterpriv_core::Rng, k: usize) -> Pmf {
    let w: Vec<f64> = (0..k).map(|_| 0.05 + rng.random::<f64>()).collect();
    let s: f64 = w.iter().sum();
    Pmf::new((0..k).map(|v| v as f64).collect(), w.iter().map(|v| v / s).collect()).unwrap()
}

fn ba_vs_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from_seed(101);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let k = if i % 2 == 0 { 2 } else { 3 };
        let p = random_pmf(&mut rng, k);
        let peak = if k == 2 { 1.0 } else { [1.0, 2.0][rng.random_range(0..2)] };
        let avg = rng.random::<f64>() * p.mean();
        let ba = privacy_power_function(&p, avg, peak).map_err(|e| e.to_string())?.bits;
        let oracle = channel_oracle_search(&p, avg, peak, 1e-4).map_err(|e| e.to_string())?;
        worst = worst.max((ba - oracle).abs());
    }
    let detail = format!("max |BA - oracle| = {worst:.2e} bits over 20 instances");
    check(worst <= 1e-3, detail.clone())?;
    within_budget(start.elapsed(), 10.0).map(|t| format!("{detail}, {t}"))
}

fn ba_endpoints() -> Outcome {
    let mut rng = rng_from_seed(102);
    let mut worst_zero: f64 = 0.0;
    let mut worst_full: f64 = 0.0;
    for k in [2, 3, 4, 5] {
        let p = random_pmf(&mut rng, k);
        let x_max = (k - 1) as f64;
        let r = privacy_power_function(&p, 0.0, x_max).map_err(|e| e.to_string())?;
        worst_zero = worst_zero.max((r.bits - p.entropy()).abs());
        let r = privacy_power_function(&p, p.mean(), x_max).map_err(|e| e.to_string())?;
        worst_full = worst_full.max(r.bits);
    }
    check(
        worst_zero <= 1e-9 && worst_full <= 1e-6,
        format!("|I*(0) - H(X)| <= {worst_zero:.1e}, I*(E[X]) <= {worst_full:.1e} bits"),
    )
}

fn ba_monotone() -> Outcome {
    let p = Pmf::new(vec![0.0, 1.0, 2.0, 3.0, 4.0], vec![0.1, 0.3, 0.2, 0.25, 0.15]).unwrap();
    let curve = |f: &dyn Fn(f64) -> (f64, f64)| -> Result<Vec<f64>, String> {
        (0..=10)
            .map(|i| {
                let (avg, peak) = f(i as f64 / 10.0);
                privacy_power_function(&p, avg, peak).map(|r| r.bits).map_err(|e| e.to_string())
            })
            .collect()
    };
    let by_avg = curve(&|u| (u * p.mean(), 4.0))?;
    let by_peak = curve(&|u| (0.6 * p.mean(), 4.0 * u))?;
    let mono = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0]);
    check(
        mono(&by_avg) && mono(&by_peak),
        format!(
            "I*(avg) {:.4} -> {:.4}, I*(peak) {:.4} -> {:.4} bits, 11 points each",
            by_avg[0], by_avg[10], by_peak[0], by_peak[10]
        ),
    )
}

fn empirical_mi() -> Outcome {
    let start = Instant::now();
    let n = 100_000;
    let mut rng = rng_from_seed(104);
    let x: Vec<f64> = (0..n).map(|_| f64::from(rng.random::<bool>() as u8)).collect();
    let y: Vec<f64> = x.iter().map(|v| if rng.random::<f64>() < 0.1 { 1.0 - v } else { *v }).collect();
    let z: Vec<f64> = (0..n).map(|_| f64::from(rng.random::<bool>() as u8)).collect();
    let bsc = empirical_mi_plugin(&x, &y, false).map_err(|e| e.to_string())?;
    let indep = empirical_mi_plugin(&x, &z, false).map_err(|e| e.to_string())?;
    let detail = format!("BSC(0.1) {bsc:.4} bits (target 0.531), independent {indep:.1e} bits");
    check((bsc - 0.531).abs() <= 0.02 && indep < 0.01, detail.clone())?;
    within_budget(start.elapsed(), 5.0).map(|t| format!("{detail}, {t}"))
}

fn trapdoor() -> Outcome {
    let a = trapdoor_bound(4, 4).map_err(|e| e.to_string())?;
    let b = trapdoor_bound(9, 2).map_err(|e| e.to_string())?;
    let sys = BinarySystem {
        p_one: 0.5,
        initial_level: vec![0.5, 0.5],
    };
    let mut held = 0;
    for seed in 0..100 {
        let rule = RandomFeasibleRule::new(3, 1, &mut rng_from_seed(seed));
        if exact_leakage_small_n(&rule, &sys, 3).map_err(|e| e.to_string())?.holds() {
            held += 1;
        }
    }
    check(
        (a - 1.0).abs() < 1e-12 && (b - 0.2).abs() < 1e-12 && held == 100,
        format!("bounds {a} and {b} bits, inequality holds for {held}/100 policies"),
    )
}

fn pareto() -> Outcome {
    let start = Instant::now();
    let alphas: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let cfg = ExperimentConfig::from_toml(&format!(
        "seed = 6\n[trace]\nsource = \"synthetic\"\nslots_per_day = 96\ndays = 1\n[policy]\nname = \"offline_constant\"\nalpha = 0.5\n[sweep]\naxis = \"alpha\"\nvalues = {alphas:?}\n"
    ))
    .unwrap();
    let out = harness::run(&cfg).map_err(|e| e.to_string())?;
    let v = out.table.numbers("variance").ok_or("no variance column")?;
    let c = out.table.numbers("cost").ok_or("no cost column")?;
    // Solver output is exact to about 1e-9.
    let slack = 1e-8;
    let v_ok = v.windows(2).all(|w| w[1] <= w[0] + slack);
    let c_ok = c.windows(2).all(|w| w[1] >= w[0] - slack);

    let trace = daily_household_trace(96, 1, cfg.seed).unwrap();
    let tariff = time_of_use_tariff(96, 1).unwrap();
    let spec = BatterySpec::placeholder_4kwh();
    let mut pw_ok = true;
    for a in &alphas {
        let w = PolicyWeights::new(*a).unwrap();
        let constant = solve_offline_constant_target(&trace, &tariff, &spec, &w, None).map_err(|e| e.to_string())?;
        let piecewise = solve_piecewise_target(&trace, &tariff, &spec, &w).map_err(|e| e.to_string())?;
        pw_ok &= piecewise.objective <= constant.objective + slack;
    }
    let detail = format!(
        "V_T {:.3e} -> {:.3e}, C_T {:.4} -> {:.4}, piecewise <= constant at all 11 alphas: {pw_ok}",
        v[0], v[10], c[0], c[10]
    );
    check(v_ok && c_ok && pw_ok && out.infeasible == 0, detail.clone())?;
    within_budget(start.elapsed(), 30.0).map(|t| format!("{detail}, {t}"))
}

fn receding() -> Outcome {
    let mut rng = rng_from_seed(107);
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let trace = daily_household_trace(24, 1, 700 + i).unwrap();
        let tariff = time_of_use_tariff(24, 1).unwrap();
        let cap = 0.5 + 5.0 * rng.random::<f64>();
        let spec = BatterySpec::new(cap, cap * rng.random::<f64>()).with_peaks(1.0 + 2.0 * rng.random::<f64>(), 1.0 + 2.0 * rng.random::<f64>());
        let alpha = 0.05 + 0.95 * rng.random::<f64>();
        let weights = PolicyWeights::new(alpha).unwrap();
        let off = solve_offline_constant_target(&trace, &tariff, &spec, &weights, None).map_err(|e| e.to_string())?;
        let w = vec![trace.mean_load(); trace.len()];
        let rh = solve_receding_horizon(
            &trace,
            &tariff,
            &spec,
            &weights,
            HorizonSpec {
                future: trace.len() - 1,
                past: 0,
            },
            &TargetMode::Series(w.clone()),
        )
        .map_err(|e| e.to_string())?;
        let obj = shaping_objective(rh.grid.values(), &w, &tariff.prices(), alpha);
        worst = worst.max((obj - off.objective).abs() / off.objective.abs().max(1e-12));
    }
    check(worst <= 1e-5, format!("max relative objective gap {worst:.2e} over 10 instances"))
}

fn mdp() -> Outcome {
    let start = Instant::now();
    let det = |reward: f64, to: usize| {
        let mut next = vec![0.0; 2];
        next[to] = 1.0;
        Some(ActionSpec { reward, next })
    };
    let toy = MdpSpec {
        actions: vec![vec![det(1.0, 0), det(0.0, 1)], vec![det(2.0, 1), det(0.0, 0)]],
        discount: 0.9,
    };
    let opt = value_iteration(&toy, 1e-12).map_err(|e| e.to_string())?;
    let learned = q_learning(&toy, &QLearningParams::with_steps(100_000), 108).map_err(|e| e.to_string())?;
    let gap = average_cost_gap(&toy, &opt, &learned.policy).map_err(|e| e.to_string())?;
    let detail = format!(
        "greedy {:?} vs optimal {:?}, average cost gap {gap:.1e}",
        learned.policy, opt.policy
    );
    check(learned.policy == opt.policy && gap < 1e-2, detail.clone())?;
    within_budget(start.elapsed(), 10.0).map(|t| format!("{detail}, {t}"))
}

fn dp_noise() -> Outcome {
    let spec = DpSpec::new(1.5, 0.5, 10).unwrap();
    let lambda = spec.lambda();
    let n = 100_000;
    let zero = LoadTrace::new(1.0, vec![0.0; n]).unwrap();
    let meters: Vec<Vec<f64>> = (0..10).map(|m| obfuscate_trace(&zero, &spec, 109, m).unwrap()).collect();
    let mut agg: Vec<f64> = (0..n).map(|t| meters.iter().map(|m| m[t]).sum()).collect();
    agg.sort_by(f64::total_cmp);
    let cdf = |z: f64| {
        if z < 0.0 {
            0.5 * (z / lambda).exp()
        } else {
            1.0 - 0.5 * (-z / lambda).exp()
        }
    };
    let ks = agg
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let f = cdf(*z);
            (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);

    let mut exact = true;
    let mut rng = rng_stream(109, 7);
    for k in [2usize, 10, 100, 1_000, 10_000] {
        let readings: Vec<f64> = (0..k).map(|_| (rng.random_range(0..20_000_000) as f64) / 1e6).collect();
        let masks = zero_sum_masks(k, 1 << 50, k as u64).unwrap();
        let reported: i64 = mask_readings(&readings, &masks).unwrap().iter().sum();
        let truth: i64 = readings.iter().map(|r| to_milliwatts(*r)).sum();
        exact &= reported == truth;
    }
    check(
        ks < 0.02 && exact,
        format!("KS {ks:.4} vs Laplace({lambda}), masked sums exact for K up to 1e4: {exact}"),
    )
}

fn detection() -> Outcome {
    let start = Instant::now();
    let hyp = HypothesisModel::new(Pmf::bernoulli(0.2).unwrap(), Pmf::bernoulli(0.8).unwrap(), 0.1).unwrap();
    let raw = estimate_error_exponents(&LrtModel::raw(&hyp), 10_000, 2_000, 0.05, 110).map_err(|e| e.to_string())?;
    let kl = min_kl_channel(&hyp, 1.0).map_err(|e| e.to_string())?;
    let shaped_model = LrtModel::from_channels(&hyp, [&kl.channels[0], &kl.channels[1]]).map_err(|e| e.to_string())?;
    let shaped = estimate_error_exponents(&shaped_model, 10_000, 2_000, 0.05, 110).map_err(|e| e.to_string())?;
    let rel = (raw.exponent - 1.2).abs() / 1.2;
    let detail = format!(
        "raw exponent {:.4} ({:.1}% from 1.2, p_I {:.3}), shaped {:.4} bits",
        raw.exponent,
        100.0 * rel,
        raw.p_i,
        shaped.exponent
    );
    check(rel <= 0.2 && raw.p_i <= 0.05 && shaped.exponent < raw.exponent, detail.clone())?;
    within_budget(start.elapsed(), 60.0).map(|t| format!("{detail}, {t}"))
}

fn fig8() -> Outcome {
    let l = LeakageSweepConfig::default();
    let t = harness::sweep_pe(&l, 111).map_err(|e| e.to_string())?;
    let leak = t.numbers("leakage_bits").ok_or("no leakage column")?;
    let h = t.numbers("input_entropy_bits").ok_or("no entropy column")?;
    let np = l.p_e.len();
    let at = |b: usize, p: usize| leak[b * np + p];
    // Cells that should tie (no generation, or all demand covered) agree to
    // rounding only.
    let slack = 1e-12;
    let mut ok = true;
    for b in 0..l.b_max.len() {
        ok &= (1..np).all(|p| at(b, p) <= at(b, p - 1) + slack);
    }
    for p in 0..np {
        ok &= (1..l.b_max.len()).all(|b| at(b, p) <= at(b - 1, p) + slack);
    }
    let base_gap = (at(0, 0) - h[0]).abs();
    check(
        ok && base_gap <= 0.02,
        format!(
            "monotone in p_e and B_max: {ok}; baseline {:.4} vs H(X) {:.4} bits; B_max=2, p_e=0.5: {:.4}",
            at(0, 0),
            h[0],
            at(2, 2)
        ),
    )
}

fn determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("meterpriv-accept-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let cfg_path = dir.join("exp.toml");
    std::fs::write(
        &cfg_path,
        "seed = 12\nmetrics = [\"mi_plugin\", \"edge_recall\"]\n[trace]\nsource = \"synthetic\"\nslots_per_day = 48\ndays = 2\n[res]\nkind = \"bernoulli\"\nrate = 0.2\npeak_kw = 0.4\n[policy]\nname = \"stepping\"\nstep_kw = 0.5\nvariant = \"random\"\n[sweep]\naxis = \"b_max\"\nvalues = [0.5, 1.0, 2.0, 4.0]\n",
    )
    .map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for i in 0..2 {
        let out = dir.join(format!("run{i}.csv"));
        let st = Command::new(env!("CARGO_BIN_EXE_meterpriv"))
            .args(["sweep", "--config"])
            .arg(&cfg_path)
            .arg("--out")
            .arg(&out)
            .status()
            .map_err(|e| e.to_string())?;
        if !st.success() {
            return Err(format!("cli exited with {st}"));
        }
        outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    let cfg = ExperimentConfig::load(&cfg_path).map_err(|e| e.to_string())?;
    let mut lib = Vec::new();
    for _ in 0..2 {
        lib.push(harness::run(&cfg).map_err(|e| e.to_string())?.table.to_bytes(Format::Json));
    }
    let l = LeakageSweepConfig {
        slots: 20_000,
        ..Default::default()
    };
    let pe: Vec<_> = (0..2).map(|_| harness::sweep_pe(&l, 12).map(|t| t.to_bytes(Format::Csv))).collect();
    let _ = std::fs::remove_dir_all(&dir);
    let pe_same = matches!((&pe[0], &pe[1]), (Ok(a), Ok(b)) if a == b);
    check(
        outputs[0] == outputs[1] && lib[0] == lib[1] && pe_same,
        format!("CLI csv ({} bytes), library json and leakage sweep reruns byte-identical", outputs[0].len()),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("privacy-power matches oracle", ba_vs_oracle),
        ("privacy-power endpoints", ba_endpoints),
        ("privacy-power monotone", ba_monotone),
        ("empirical MI consistency", empirical_mi),
        ("trapdoor bound", trapdoor),
        ("Pareto trade-off", pareto),
        ("receding horizon = offline", receding),
        ("MDP learning", mdp),
        ("DP noise and masking", dp_noise),
        ("detection exponents", detection),
        ("leakage vs generation and capacity", fig8),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let r = f();
        let secs = start.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("criterion {}: PASS {name}: {d} [{secs:.2} s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {d} [{secs:.2} s]", i + 1);
            }
        }
    }
    println!("acceptance: {}/12 passed", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

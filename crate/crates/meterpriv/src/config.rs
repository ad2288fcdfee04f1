//! Experiment configuration (TOML).
//!
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub trace: TraceConfig,
    #[serde(default)]
    pub tariff: TariffConfig,
    /// The non-authoritative 4 kWh placeholder when absent.
    pub battery: Option<BatteryConfig>,
    #[serde(default)]
    pub res: ResConfig,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub metric_options: MetricOptions,
    pub sweep: Option<SweepConfig>,
    pub leakage_sweep: Option<LeakageSweepConfig>,
    pub ba: Option<BaConfig>,
    pub attack: Option<AttackConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum TraceConfig {
    File { path: PathBuf, slot_hours: f64 },
    Synthetic { slots_per_day: usize, days: usize },
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig::Synthetic {
            slots_per_day: 96,
            days: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TariffConfig {
    /// Built-in three-period day tariff repeated over the trace.
    #[default]
    TimeOfUse,
    Flat { price: f64 },
    File { path: PathBuf },
}

/// A capacity in kWh or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Capacity {
    Kwh(f64),
    Named(InfiniteTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InfiniteTag {
    #[serde(rename = "inf")]
    Inf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryConfig {
    pub capacity_kwh: Capacity,
    /// Half the capacity when absent.
    pub initial_kwh: Option<f64>,
    pub max_charge_kw: Option<f64>,
    pub max_discharge_kw: Option<f64>,
    #[serde(default = "one")]
    pub eta_charge: f64,
    #[serde(default = "one")]
    pub eta_discharge: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ResConfig {
    #[default]
    None,
    /// The `res_kw` column of the trace file.
    Trace,
    Bernoulli { rate: f64, peak_kw: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepVariant {
    Hold,
    ChargeGreedy,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyConfig {
    PassThrough,
    BestEffort,
    OfflineConstant {
        alpha: f64,
        target_kw: Option<f64>,
    },
    OfflinePiecewise {
        alpha: f64,
    },
    Receding {
        alpha: f64,
        future_h: f64,
        #[serde(default)]
        past_h: f64,
        /// Follow a moving-average target instead of optimizing one.
        lowpass_cutoff_hz: Option<f64>,
    },
    Myopic {
        alpha: f64,
        #[serde(default)]
        kappa: f64,
        target_kw: Option<f64>,
    },
    Stepping {
        step_kw: f64,
        variant: StepVariant,
        ewma: Option<f64>,
    },
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig::OfflineConstant {
            alpha: 0.5,
            target_kw: None,
        }
    }
}

impl PolicyConfig {
    pub fn alpha_mut(&mut self) -> Option<&mut f64> {
        match self {
            PolicyConfig::OfflineConstant { alpha, .. }
            | PolicyConfig::OfflinePiecewise { alpha }
            | PolicyConfig::Receding { alpha, .. }
            | PolicyConfig::Myopic { alpha, .. } => Some(alpha),
            _ => None,
        }
    }

    pub fn step_kw(&self) -> Option<f64> {
        match self {
            PolicyConfig::Stepping { step_kw, .. } => Some(*step_kw),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Plug-in `I(X;Y)` of the quantized loads, bits per slot.
    MiPlugin,
    /// `D(X || Y)` of load histograms, bits.
    RelativeEntropy,
    EdgeRecall,
    EdgePrecision,
    /// Recall of user-load peaks from the top level of a stepping trace.
    PeakRecall,
    PrivacyBreaks,
}

impl Metric {
    pub fn column(&self) -> &'static str {
        match self {
            Metric::MiPlugin => "mi_plugin_bits",
            Metric::RelativeEntropy => "relative_entropy_bits",
            Metric::EdgeRecall => "edge_recall",
            Metric::EdgePrecision => "edge_precision",
            Metric::PeakRecall => "peak_recall",
            Metric::PrivacyBreaks => "privacy_breaks",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricOptions {
    /// Quantization step for plug-in estimates, kW.
    pub quantum_kw: f64,
    pub bins: usize,
    pub edge_threshold_kw: f64,
    /// User load counted as a peak; 80% of the trace maximum when absent.
    pub peak_threshold_kw: Option<f64>,
    /// Slots of slack when matching detections.
    pub tolerance: usize,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            quantum_kw: 0.1,
            bins: 20,
            edge_threshold_kw: 0.5,
            peak_threshold_kw: None,
            tolerance: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Alpha,
    BMax,
    /// Bernoulli generation rate of the renewable source.
    #[serde(rename = "p_e")]
    PE,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Alpha => "alpha",
            SweepAxis::BMax => "b_max",
            SweepAxis::PE => "p_e",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// Leakage of the energy-fraction policy on the integer-unit battery and
/// renewable system, over a grid of generation rates and capacities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LeakageSweepConfig {
    pub b_max: Vec<u32>,
    pub p_e: Vec<f64>,
    /// User-load law on `0, 1, ...`.
    pub x_probs: Vec<f64>,
    pub e_units: u32,
    pub peak: u32,
    pub slots: usize,
    /// Probabilities of drawing all, half or none of the usable energy.
    pub weights: [f64; 3],
}

impl Default for LeakageSweepConfig {
    fn default() -> Self {
        Self {
            b_max: vec![0, 1, 2],
            p_e: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            x_probs: vec![0.2; 5],
            e_units: 4,
            peak: 4,
            slots: 100_000,
            weights: [1.0, 0.0, 0.0],
        }
    }
}

/// Privacy-power function of a discrete load law over average-power
/// budgets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaConfig {
    pub support: Vec<f64>,
    pub probs: Vec<f64>,
    pub peak: f64,
    pub avg: Vec<f64>,
}

/// Binary hypothesis test on i.i.d. loads, with and without the
/// divergence-minimizing channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    pub support: Vec<f64>,
    pub h0: Vec<f64>,
    pub h1: Vec<f64>,
    pub avg_budget: f64,
    pub peak: f64,
    pub n: usize,
    pub trials: usize,
    #[serde(default = "default_p_i")]
    pub p_i_cap: f64,
}

fn default_p_i() -> f64 {
    0.05
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Standard output when absent.
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

fn bad(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

fn check_grid(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(bad(format!("{name}: empty grid")));
    }
    if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| w[0] > w[1]) {
        return Err(bad(format!("{name}: grid must be finite and sorted ascending")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Reads, resolves relative paths and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| crate::io::toml_err(path, &text, &e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let TraceConfig::File { path, .. } = &mut self.trace {
            fix(path);
        }
        if let TariffConfig::File { path } = &mut self.tariff {
            fix(path);
        }
        if let Some(p) = &mut self.output.path {
            fix(p);
        }
    }

    /// Checks that referenced files exist, sweep grids are non-empty and
    /// sorted, and that the sweep axis and metrics fit the policy. Numeric
    /// ranges are left to the core library.
    pub fn validate(&self) -> Result<()> {
        for p in [
            match &self.trace {
                TraceConfig::File { path, .. } => Some(path),
                _ => None,
            },
            match &self.tariff {
                TariffConfig::File { path } => Some(path),
                _ => None,
            },
        ]
        .into_iter()
        .flatten()
        {
            if !p.is_file() {
                return Err(bad(format!("{}: no such file", p.display())));
            }
        }
        if matches!(self.res, ResConfig::Trace) && !matches!(self.trace, TraceConfig::File { .. }) {
            return Err(bad("res kind `trace` needs a trace file"));
        }
        if let Some(s) = &self.sweep {
            check_grid("sweep.values", &s.values)?;
            match s.axis {
                SweepAxis::Alpha if self.policy.clone().alpha_mut().is_none() => {
                    return Err(bad("alpha sweep needs a policy with an alpha weight"));
                }
                SweepAxis::PE if !matches!(self.res, ResConfig::Bernoulli { .. }) => {
                    return Err(bad("p_e sweep needs res kind `bernoulli`"));
                }
                _ => {}
            }
        }
        if let Some(l) = &self.leakage_sweep {
            check_grid("leakage_sweep.p_e", &l.p_e)?;
            if l.b_max.is_empty() || l.b_max.windows(2).any(|w| w[0] > w[1]) {
                return Err(bad("leakage_sweep.b_max: grid must be non-empty and sorted ascending"));
            }
            if l.slots == 0 {
                return Err(bad("leakage_sweep.slots must be positive"));
            }
        }
        if let Some(b) = &self.ba {
            check_grid("ba.avg", &b.avg)?;
        }
        let stepping_only = [Metric::PeakRecall, Metric::PrivacyBreaks];
        if self.policy.step_kw().is_none() {
            if let Some(m) = self.metrics.iter().find(|m| stepping_only.contains(m)) {
                return Err(bad(format!("metric `{}` needs the stepping policy", m.column())));
            }
        }
        Ok(())
    }
}

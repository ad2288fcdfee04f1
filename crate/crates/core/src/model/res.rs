use alloc::format;
use alloc::vec::Vec;

use rand::Rng as _;

use super::LoadTrace;
use crate::{rng_from_seed, Error, Result, Rng};

const ROW_TOL: f64 = 1e-9;

/// First-order Markov chain over discrete power levels whose transition
/// matrix depends on a periodic feature (time of day, day of week, ...).
///
/// The feature at slot `t` is `(t / slots_per_feature) % transitions.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    pub levels: Vec<f64>,
    /// `transitions[f][i][j]`: probability of moving from level `i` to `j`
    /// while feature `f` is active.
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub slots_per_feature: usize,
    pub initial_state: usize,
}

impl MarkovChain {
    /// Single-feature chain.
    pub fn homogeneous(levels: Vec<f64>, rows: Vec<Vec<f64>>, initial_state: usize) -> Self {
        Self {
            levels,
            transitions: alloc::vec![rows],
            slots_per_feature: 1,
            initial_state,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.levels.len();
        if n == 0 || self.transitions.is_empty() || self.slots_per_feature == 0 {
            return Err(Error::InvalidParameter("empty Markov chain".into()));
        }
        if self.initial_state >= n {
            return Err(Error::InvalidParameter(format!(
                "initial state {} out of range",
                self.initial_state
            )));
        }
        for rows in &self.transitions {
            if rows.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: rows.len(),
                });
            }
            check_rows(rows)?;
        }
        Ok(())
    }

    fn feature_at(&self, slot: usize) -> usize {
        (slot / self.slots_per_feature) % self.transitions.len()
    }

    /// Level indices for `horizon` slots; slot 0 is the initial state.
    pub fn sample_states(&self, horizon: usize, rng: &mut Rng) -> Vec<usize> {
        let mut states = Vec::with_capacity(horizon);
        let mut s = self.initial_state;
        for t in 0..horizon {
            if t > 0 {
                s = sample_index(&self.transitions[self.feature_at(t)][s], rng);
            }
            states.push(s);
        }
        states
    }

    pub fn sample(&self, horizon: usize, rng: &mut Rng) -> Vec<f64> {
        self.sample_states(horizon, rng)
            .into_iter()
            .map(|s| self.levels[s])
            .collect()
    }
}

pub(crate) fn check_rows(rows: &[Vec<f64>]) -> Result<()> {
    for (i, row) in rows.iter().enumerate() {
        if row.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::NegativeProbability);
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_TOL {
            return Err(Error::NotStochastic { row: i, sum });
        }
    }
    Ok(())
}

/// Inverse-CDF draw from a probability row.
pub(crate) fn sample_index(row: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Round-off: fall back to the last index with mass.
    row.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// Renewable generation process.
#[derive(Debug, Clone, PartialEq)]
pub enum ResModel {
    /// No renewable source.
    None,
    /// Use the generation column of the driving trace.
    Trace,
    /// Each slot independently produces `peak_kw` with probability `rate`.
    Bernoulli { rate: f64, peak_kw: f64 },
    Markov(MarkovChain),
}

impl ResModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            ResModel::None | ResModel::Trace => Ok(()),
            ResModel::Bernoulli { rate, peak_kw } => {
                if !(0.0..=1.0).contains(rate) {
                    return Err(Error::InvalidParameter(format!("rate {rate} outside [0, 1]")));
                }
                if !(*peak_kw >= 0.0) {
                    return Err(Error::InvalidParameter(format!("peak {peak_kw} < 0")));
                }
                Ok(())
            }
            ResModel::Markov(chain) => chain.validate(),
        }
    }

    /// Generation series aligned with `trace`.
    pub fn generate(&self, trace: &LoadTrace, rng: &mut Rng) -> Result<Vec<f64>> {
        self.validate()?;
        let n = trace.len();
        Ok(match self {
            ResModel::None => alloc::vec![0.0; n],
            ResModel::Trace => (0..n).map(|t| trace.res_at(t)).collect(),
            ResModel::Bernoulli { rate, peak_kw } => (0..n)
                .map(|_| if rng.random::<f64>() < *rate { *peak_kw } else { 0.0 })
                .collect(),
            ResModel::Markov(chain) => chain.sample(n, rng),
        })
    }
}

/// Synthetic user-load generator.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadModel {
    /// `level_kw` with probability `p`, else 0, independently per slot.
    Bernoulli { p: f64, level_kw: f64 },
    /// Independent draws from a discrete law.
    Iid { levels: Vec<f64>, probs: Vec<f64> },
    Markov(MarkovChain),
}

/// Draws a reproducible user-load trace of `horizon` slots.
pub fn generate_synthetic_trace(
    model: &LoadModel,
    horizon: usize,
    slot_hours: f64,
    seed: u64,
) -> Result<LoadTrace> {
    let mut rng = rng_from_seed(seed);
    let load = match model {
        LoadModel::Bernoulli { p, level_kw } => {
            if !(0.0..=1.0).contains(p) || !(*level_kw >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "Bernoulli load needs p in [0, 1] and level >= 0, got p={p}, level={level_kw}"
                )));
            }
            (0..horizon)
                .map(|_| if rng.random::<f64>() < *p { *level_kw } else { 0.0 })
                .collect()
        }
        LoadModel::Iid { levels, probs } => {
            if levels.len() != probs.len() {
                return Err(Error::LengthMismatch {
                    expected: levels.len(),
                    found: probs.len(),
                });
            }
            check_rows(core::slice::from_ref(probs))?;
            (0..horizon)
                .map(|_| levels[sample_index(probs, &mut rng)])
                .collect()
        }
        LoadModel::Markov(chain) => {
            chain.validate()?;
            chain.sample(horizon, &mut rng)
        }
    };
    LoadTrace::new(slot_hours, load)
}

//! Adversaries used to score policies. Each one knows the policy exactly
//! and only sees the grid readings.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::info::{ChannelMatrix, HypothesisModel, LETTER_TOL};
use crate::math;
use crate::model::sample_index;
use crate::{rng_stream, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub slot: usize,
    /// `y_t - y_{t-1}`, kW.
    pub magnitude: f64,
}

/// Detected load changes, in increasing slot order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventList(pub Vec<Event>);

impl EventList {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn slots(&self) -> Vec<usize> {
        self.0.iter().map(|e| e.slot).collect()
    }
}

/// Flags every slot `t >= 1` with `|y_t - y_{t-1}| >= threshold`.
pub fn edge_detector(y: &[f64], threshold: f64) -> Result<EventList> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter(format!("threshold {threshold} must be positive")));
    }
    Ok(EventList(
        y.windows(2)
            .enumerate()
            .filter_map(|(i, w)| {
                let d = w[1] - w[0];
                (d.abs() >= threshold).then_some(Event {
                    slot: i + 1,
                    magnitude: d,
                })
            })
            .collect(),
    ))
}

/// Load-change recovery probe against stepping policies: the slots of the
/// maximal runs at the highest quantization level are reported as demand
/// peaks. A constant trace yields no candidates.
pub fn peak_recovery(y: &[f64], step_kw: f64) -> Result<Vec<usize>> {
    if !(step_kw > 0.0) {
        return Err(Error::InvalidParameter(format!("step {step_kw} must be positive")));
    }
    let mut levels = Vec::with_capacity(y.len());
    for (slot, v) in y.iter().enumerate() {
        let h = math::round(v / step_kw);
        if (h * step_kw - v).abs() > 1e-9 * step_kw.max(v.abs()) {
            return Err(Error::OffGrid { slot, value: *v });
        }
        levels.push(h as i64);
    }
    let (Some(top), Some(bottom)) = (levels.iter().max(), levels.iter().min()) else {
        return Ok(Vec::new());
    };
    if top == bottom {
        return Ok(Vec::new());
    }
    Ok((0..levels.len()).filter(|t| levels[*t] == *top).collect())
}

/// Slots where the user load reaches `threshold`.
pub fn peak_slots(x: &[f64], threshold: f64) -> Vec<usize> {
    (0..x.len()).filter(|t| x[*t] >= threshold).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionScore {
    /// Fraction of true slots with a detection within the tolerance; 1 when
    /// there are no true slots.
    pub recall: f64,
    /// Fraction of detections within the tolerance of a true slot; 1 when
    /// nothing was detected.
    pub precision: f64,
}

/// Scores detected slots against ground truth, matching within
/// `tolerance` slots.
pub fn score_detections(detected: &[usize], truth: &[usize], tolerance: usize) -> DetectionScore {
    let near = |a: usize, set: &[usize]| set.iter().any(|b| a.abs_diff(*b) <= tolerance);
    let frac = |hits: usize, total: usize| if total == 0 { 1.0 } else { hits as f64 / total as f64 };
    DetectionScore {
        recall: frac(truth.iter().filter(|t| near(**t, detected)).count(), truth.len()),
        precision: frac(detected.iter().filter(|d| near(**d, truth)).count(), detected.len()),
    }
}

/// Output laws of a memoryless policy under the two hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct LrtModel {
    pub outputs: Vec<f64>,
    pub q0: Vec<f64>,
    pub q1: Vec<f64>,
}

impl LrtModel {
    pub fn from_channels(hyp: &HypothesisModel, channels: [&ChannelMatrix; 2]) -> Result<Self> {
        let [c0, c1] = channels;
        let same = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(u, v)| (u - v).abs() <= LETTER_TOL);
        if !same(c0.outputs(), c1.outputs()) || !same(c0.inputs(), hyp.h0().support()) || !same(c1.inputs(), hyp.h1().support()) {
            return Err(Error::InvalidParameter("channels and hypotheses disagree on alphabets".into()));
        }
        Ok(Self {
            outputs: c0.outputs().to_vec(),
            q0: c0.output_law(hyp.h0().probs()),
            q1: c1.output_law(hyp.h1().probs()),
        })
    }

    /// The readings are the loads themselves.
    pub fn raw(hyp: &HypothesisModel) -> Self {
        Self {
            outputs: hyp.h0().support().to_vec(),
            q0: hyp.h0().probs().to_vec(),
            q1: hyp.h1().probs().to_vec(),
        }
    }

    /// `log2(q0(y) / q1(y))` per output letter; infinite where one law
    /// vanishes, `None` where both do.
    fn letter_llr(&self) -> Vec<Option<f64>> {
        self.q0
            .iter()
            .zip(&self.q1)
            .map(|(a, b)| match (*a > 0.0, *b > 0.0) {
                (true, true) => Some(math::log2(a / b)),
                (true, false) => Some(f64::INFINITY),
                (false, true) => Some(f64::NEG_INFINITY),
                (false, false) => None,
            })
            .collect()
    }

    fn counts(&self, y: &[f64]) -> Result<Vec<u64>> {
        let mut c = vec![0u64; self.outputs.len()];
        for (slot, v) in y.iter().enumerate() {
            let j = crate::info::letter_index(&self.outputs, *v).ok_or(Error::NotInAlphabet { slot, value: *v })?;
            c[j] += 1;
        }
        Ok(c)
    }

    fn llr_of_counts(&self, llr: &[Option<f64>], counts: &[u64]) -> Result<f64> {
        let mut s = 0.0;
        for (j, c) in counts.iter().enumerate() {
            if *c > 0 {
                let l = llr[j].ok_or(Error::ZeroProbability { slot: j })?;
                s += *c as f64 * l;
            }
        }
        Ok(s)
    }

    /// Log-likelihood ratio `log2 p0(yⁿ) / p1(yⁿ)`.
    pub fn llr(&self, y: &[f64]) -> Result<f64> {
        let llr = self.letter_llr();
        let counts = self.counts(y)?;
        for (j, c) in counts.iter().enumerate() {
            if *c > 0 && llr[j].is_none() {
                let slot = y
                    .iter()
                    .position(|v| (v - self.outputs[j]).abs() <= LETTER_TOL)
                    .unwrap_or(0);
                return Err(Error::ZeroProbability { slot });
            }
        }
        self.llr_of_counts(&llr, &counts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    H0,
    H1,
}

/// Declares h1 when the log-likelihood ratio falls below `threshold`.
pub fn lrt_attacker(y: &[f64], model: &LrtModel, threshold: f64) -> Result<Hypothesis> {
    Ok(if model.llr(y)? < threshold {
        Hypothesis::H1
    } else {
        Hypothesis::H0
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentEstimate {
    /// Achieved false-alarm probability on the calibration runs.
    pub p_i: f64,
    /// Estimated miss probability; may underflow to 0 for long sequences,
    /// see `log2_p_ii`.
    pub p_ii: f64,
    pub log2_p_ii: f64,
    /// `-log2(p_II) / n`, bits per slot.
    pub exponent: f64,
    /// 95% interval on the exponent.
    pub ci: (f64, f64),
    pub threshold: f64,
    /// Probability of declaring h1 when the ratio equals the threshold.
    pub tie_prob: f64,
}

fn sample_counts(q: &[f64], n: usize, rng: &mut crate::Rng) -> Vec<u64> {
    let mut c = vec![0u64; q.len()];
    for _ in 0..n {
        c[sample_index(q, rng)] += 1;
    }
    c
}

/// Neyman–Pearson test at false-alarm level `p_i_cap` on `n` i.i.d.
/// readings.
///
/// The threshold (randomized on ties) is calibrated from `trials` runs
/// under h0. The miss probability `P_1(accept h0)` is then estimated from
/// another `trials` runs under h0 by importance sampling,
/// `E_0[1{accept} 2^{-LLR}]`, which reaches the tiny probabilities of long
/// sequences that plain Monte Carlo cannot.
pub fn estimate_error_exponents(
    model: &LrtModel,
    n: usize,
    trials: usize,
    p_i_cap: f64,
    seed: u64,
) -> Result<ExponentEstimate> {
    if n == 0 || trials < 2 || !(p_i_cap > 0.0 && p_i_cap < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need n >= 1, trials >= 2, 0 < p_I < 1; got {n}, {trials}, {p_i_cap}"
        )));
    }
    crate::model::check_rows(&[model.q0.clone(), model.q1.clone()])?;
    let llr = model.letter_llr();
    let run = |stream: u64| -> Result<Vec<f64>> {
        let mut rng = rng_stream(seed, stream);
        (0..trials)
            .map(|_| model.llr_of_counts(&llr, &sample_counts(&model.q0, n, &mut rng)))
            .collect()
    };

    let mut cal = run(0)?;
    cal.sort_by(f64::total_cmp);
    let m = trials as f64;
    // Smallest threshold whose strict lower tail is within the cap.
    let k = ((p_i_cap * m) as usize).min(trials - 1);
    let threshold = cal[k];
    let below = cal.iter().filter(|s| **s < threshold).count() as f64 / m;
    let equal = cal.iter().filter(|s| **s == threshold).count() as f64 / m;
    let tie_prob = ((p_i_cap - below) / equal).clamp(0.0, 1.0);
    let p_i = below + tie_prob * equal;

    // Weights 1{accept} 2^{-S}, accumulated relative to the largest one.
    let est = run(1)?;
    let accepted: Vec<(f64, f64)> = est
        .iter()
        .filter(|s| **s >= threshold)
        .map(|s| (*s, if *s == threshold { 1.0 - tie_prob } else { 1.0 }))
        .filter(|(_, w)| *w > 0.0)
        .collect();
    let Some(s_min) = accepted.iter().map(|(s, _)| *s).reduce(f64::min) else {
        return Ok(ExponentEstimate {
            p_i,
            p_ii: 0.0,
            log2_p_ii: f64::NEG_INFINITY,
            exponent: f64::INFINITY,
            ci: (f64::INFINITY, f64::INFINITY),
            threshold,
            tie_prob,
        });
    };
    if s_min == f64::INFINITY {
        return Ok(ExponentEstimate {
            p_i,
            p_ii: 0.0,
            log2_p_ii: f64::NEG_INFINITY,
            exponent: f64::INFINITY,
            ci: (f64::INFINITY, f64::INFINITY),
            threshold,
            tie_prob,
        });
    }
    let rel: Vec<f64> = est
        .iter()
        .map(|s| {
            if *s < threshold {
                0.0
            } else {
                let w = if *s == threshold { 1.0 - tie_prob } else { 1.0 };
                w * math::exp2(s_min - s)
            }
        })
        .collect();
    let mean = rel.iter().sum::<f64>() / m;
    let var = rel.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / (m - 1.0);
    let half = 1.96 * math::sqrt(var / m);
    let log2_p_ii = math::log2(mean) - s_min;
    let nf = n as f64;
    let exponent = -log2_p_ii / nf;
    let lo_mean = (mean - half).max(f64::MIN_POSITIVE);
    let ci = (-(math::log2(mean + half) - s_min) / nf, -(math::log2(lo_mean) - s_min) / nf);
    Ok(ExponentEstimate {
        p_i,
        p_ii: math::exp2(log2_p_ii),
        log2_p_ii,
        exponent,
        ci,
        threshold,
        tie_prob,
    })
}

/// Draws `(hypothesis readings)` for testing attackers end to end: `n`
/// i.i.d. loads from the hypothesis law passed through its channel.
pub fn sample_readings(
    hyp: &HypothesisModel,
    channels: [&ChannelMatrix; 2],
    which: Hypothesis,
    n: usize,
    seed: u64,
) -> Vec<f64> {
    let (p, c) = match which {
        Hypothesis::H0 => (hyp.h0(), channels[0]),
        Hypothesis::H1 => (hyp.h1(), channels[1]),
    };
    let mut rng = rng_stream(seed, 0);
    (0..n)
        .map(|_| {
            let i = sample_index(p.probs(), &mut rng);
            c.outputs()[sample_index(c.row(i), &mut rng)]
        })
        .collect()
}

/// Fraction of `runs` sequences of length `n` drawn under `truth` that the
/// attacker classifies correctly.
pub fn attacker_accuracy(
    hyp: &HypothesisModel,
    channels: [&ChannelMatrix; 2],
    truth: Hypothesis,
    threshold: f64,
    n: usize,
    runs: usize,
    seed: u64,
) -> Result<f64> {
    let model = LrtModel::from_channels(hyp, channels)?;
    let mut rng = rng_stream(seed, 1);
    let mut right = 0;
    for _ in 0..runs {
        let y = sample_readings(hyp, channels, truth, n, rng.random());
        if lrt_attacker(&y, &model, threshold)? == truth {
            right += 1;
        }
    }
    Ok(right as f64 / runs.max(1) as f64)
}

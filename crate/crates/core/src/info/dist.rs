use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::model::check_rows;
use crate::{Error, Result};

/// Values closer than this are the same alphabet letter.
pub(crate) const LETTER_TOL: f64 = 1e-9;

/// Probability mass function over a finite set of power levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    support: Vec<f64>,
    probs: Vec<f64>,
}

impl Pmf {
    pub fn new(support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if support.len() != probs.len() {
            return Err(Error::LengthMismatch {
                expected: support.len(),
                found: probs.len(),
            });
        }
        if support.is_empty() {
            return Err(Error::InvalidParameter("empty pmf".into()));
        }
        check_rows(core::slice::from_ref(&probs))?;
        Ok(Self { support, probs })
    }

    pub fn uniform(support: Vec<f64>) -> Result<Self> {
        let n = support.len().max(1);
        Self::new(support, vec![1.0 / n as f64; n])
    }

    /// `P(X = 1) = p` on `{0, 1}`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::new(vec![0.0, 1.0], vec![1.0 - p, p])
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().zip(&self.probs).map(|(v, p)| v * p).sum()
    }

    pub fn entropy(&self) -> f64 {
        math::entropy_bits(self.probs.iter().copied())
    }
}

/// Row-stochastic conditional law `p(y | x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    inputs: Vec<f64>,
    outputs: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

impl ChannelMatrix {
    pub fn new(inputs: Vec<f64>, outputs: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != inputs.len() {
            return Err(Error::LengthMismatch {
                expected: inputs.len(),
                found: rows.len(),
            });
        }
        for r in &rows {
            if r.len() != outputs.len() {
                return Err(Error::LengthMismatch {
                    expected: outputs.len(),
                    found: r.len(),
                });
            }
        }
        check_rows(&rows)?;
        Ok(Self {
            inputs,
            outputs,
            rows,
        })
    }

    /// `Y = X`.
    pub fn identity(alphabet: Vec<f64>) -> Self {
        let n = alphabet.len();
        let rows = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self {
            inputs: alphabet.clone(),
            outputs: alphabet,
            rows,
        }
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn input_index(&self, x: f64) -> Option<usize> {
        letter_index(&self.inputs, x)
    }

    /// `p(x) p(y|x)`; `p` must be over the channel's input alphabet.
    pub fn joint(&self, p: &[f64]) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .zip(p)
            .map(|(row, px)| row.iter().map(|w| px * w).collect())
            .collect()
    }

    pub fn output_law(&self, p: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; self.outputs.len()];
        for (row, px) in self.rows.iter().zip(p) {
            for (qj, w) in q.iter_mut().zip(row) {
                *qj += px * w;
            }
        }
        q
    }

    /// `E[X - Y]` under input law `p`.
    pub fn mean_draw(&self, p: &[f64]) -> f64 {
        let mut m = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            for (j, w) in row.iter().enumerate() {
                m += p[i] * w * (self.inputs[i] - self.outputs[j]);
            }
        }
        m
    }

    /// Checks `0 <= x - y <= peak` on every entry with positive mass.
    pub fn check_support(&self, peak: f64) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            for (j, w) in row.iter().enumerate() {
                let d = self.inputs[i] - self.outputs[j];
                if *w > 0.0 && !(d >= -LETTER_TOL && d <= peak + LETTER_TOL) {
                    return Err(Error::InvalidParameter(format!(
                        "channel puts mass on x={}, y={} outside 0 <= x - y <= {peak}",
                        self.inputs[i], self.outputs[j]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn mutual_information(&self, p: &[f64]) -> f64 {
        mi_from_joint(&self.joint(p))
    }
}

pub(crate) fn letter_index(alphabet: &[f64], v: f64) -> Option<usize> {
    alphabet.iter().position(|a| (a - v).abs() <= LETTER_TOL)
}

/// `I(X;Y)` in bits of a joint law given as a matrix; no validation.
pub(crate) fn mi_from_joint(joint: &[Vec<f64>]) -> f64 {
    let cols = joint.first().map_or(0, |r| r.len());
    let px: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let mut py = vec![0.0; cols];
    for r in joint {
        for (q, v) in py.iter_mut().zip(r) {
            *q += v;
        }
    }
    let mut mi = 0.0;
    for (i, r) in joint.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            if *v > 0.0 {
                mi += v * math::log2(v / (px[i] * py[j]));
            }
        }
    }
    mi.max(0.0)
}

/// Mutual information of a joint pmf matrix, bits.
pub fn mutual_information(joint: &[Vec<f64>]) -> Result<f64> {
    let mut total = 0.0;
    for r in joint {
        for v in r {
            if !(*v >= 0.0) {
                return Err(Error::NegativeProbability);
            }
            total += v;
        }
    }
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::NotStochastic { row: 0, sum: total });
    }
    Ok(mi_from_joint(joint))
}

/// `D(p || q)` in bits.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    let mut d = 0.0;
    for (i, (a, b)) in p.iter().zip(q).enumerate() {
        if *a < 0.0 || *b < 0.0 {
            return Err(Error::NegativeProbability);
        }
        if *a > 0.0 {
            if *b <= 0.0 {
                return Err(Error::AbsoluteContinuity { index: i });
            }
            d += a * math::log2(a / b);
        }
    }
    Ok(d.max(0.0))
}

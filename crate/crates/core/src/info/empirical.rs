//! Plug-in estimators over observed sequences. No bias correction is
//! applied; the plug-in mutual information overestimates by roughly
//! `(|X||Y| - 1) / (2 n ln 2)` bits.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result};

/// Letters closer than this are merged.
const RESOLUTION: f64 = 1e-9;

fn key(v: f64) -> i64 {
    math::quantize_key(v, RESOLUTION)
}

fn entropy_of_counts<K>(counts: &BTreeMap<K, usize>, n: usize) -> f64 {
    let n = n as f64;
    math::entropy_bits(counts.values().map(move |c| *c as f64 / n))
}

fn counts<K: Ord>(keys: impl Iterator<Item = K>) -> BTreeMap<K, usize> {
    let mut m = BTreeMap::new();
    for k in keys {
        *m.entry(k).or_insert(0) += 1;
    }
    m
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::InvalidParameter("empty sequence".into()));
    }
    Ok(())
}

/// Entropy of the empirical marginal of `x`, bits.
pub fn empirical_entropy(x: &[f64]) -> f64 {
    entropy_of_counts(&counts(x.iter().map(|v| key(*v))), x.len())
}

/// Plug-in `I(X;Y)` from the empirical joint of `(x_t, y_t)`. With
/// `normalize`, divided by the empirical `H(X)` (0 when `H(X) = 0`).
pub fn empirical_mi_plugin(x: &[f64], y: &[f64], normalize: bool) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len();
    let hx = entropy_of_counts(&counts(x.iter().map(|v| key(*v))), n);
    let hy = entropy_of_counts(&counts(y.iter().map(|v| key(*v))), n);
    let hxy = entropy_of_counts(
        &counts(x.iter().zip(y).map(|(a, b)| (key(*a), key(*b)))),
        n,
    );
    let mi = (hx + hy - hxy).max(0.0);
    Ok(if normalize {
        if hx > 0.0 {
            mi / hx
        } else {
            0.0
        }
    } else {
        mi
    })
}

/// Plug-in `H(X | Y, C)` from joint frequencies of `(x_t, y_t, c_t)`.
pub fn conditional_entropy_rate(x: &[f64], y: &[f64], c: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    check_pair(x, c)?;
    let n = x.len();
    let hxyc = entropy_of_counts(
        &counts((0..n).map(|t| (key(x[t]), key(y[t]), key(c[t])))),
        n,
    );
    let hyc = entropy_of_counts(&counts((0..n).map(|t| (key(y[t]), key(c[t])))), n);
    Ok((hxyc - hyc).max(0.0))
}

/// `D(P_y || P_x)` between `bins`-bin histograms of `y` and of the
/// reference `x` over their common range. Both histograms get one extra
/// count per bin so the divergence stays finite, and identical inputs give
/// exactly 0.
pub fn empirical_relative_entropy(x: &[f64], y: &[f64], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::InvalidParameter("need at least two bins".into()));
    }
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidParameter("empty sequence".into()));
    }
    let lo = x.iter().chain(y).copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().chain(y).copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let hist = |v: &[f64]| {
        let mut h = vec![1.0; bins];
        for s in v {
            let b = if width > 0.0 {
                (((s - lo) / width) as usize).min(bins - 1)
            } else {
                0
            };
            h[b] += 1.0;
        }
        let total: f64 = h.iter().sum();
        h.iter().map(|c| c / total).collect::<Vec<f64>>()
    };
    super::kl_divergence(&hist(y), &hist(x))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alignment {
    pub lag: usize,
    /// Pearson correlation at `lag`; `None` when undefined (a constant
    /// series) at every lag.
    pub correlation: Option<f64>,
}

/// Pearson correlation of `x_t` with `y_{t+lag}` for `lag` in
/// `0..=max_lag`; returns the lag with the highest correlation.
pub fn max_crosscorr_alignment(x: &[f64], y: &[f64], max_lag: usize) -> Result<Alignment> {
    check_pair(x, y)?;
    let mut best = Alignment {
        lag: 0,
        correlation: None,
    };
    for lag in 0..=max_lag.min(x.len() - 1) {
        let r = pearson(&x[..x.len() - lag], &y[lag..]);
        if let Some(r) = r {
            if best.correlation.map_or(true, |b| r > b) {
                best = Alignment {
                    lag,
                    correlation: Some(r),
                };
            }
        }
    }
    Ok(best)
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    if a.len() < 2 {
        return None;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / math::sqrt(saa * sbb)).clamp(-1.0, 1.0))
}

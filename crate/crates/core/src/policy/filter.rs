use alloc::vec::Vec;

use crate::math;
use crate::model::{LoadTrace, TargetProfile};
use crate::{Error, Result};

/// A length-`L` moving average has its -3 dB point near `0.443 fs / L`.
const MA_HALF_POWER: f64 = 0.443;

/// Odd moving-average length approximating a low-pass with cut-off
/// `cutoff_hz` at slot length `slot_hours`.
pub fn moving_average_len(slot_hours: f64, cutoff_hz: f64) -> Result<usize> {
    let fs = 1.0 / (3600.0 * slot_hours);
    let nyquist = fs / 2.0;
    if !(cutoff_hz > 0.0) || cutoff_hz > nyquist {
        return Err(Error::CutoffAboveNyquist {
            cutoff_hz,
            nyquist_hz: nyquist,
        });
    }
    let len = math::round(MA_HALF_POWER * fs / cutoff_hz).max(1.0) as usize;
    Ok(if len % 2 == 0 { len + 1 } else { len })
}

/// Zero-phase low-pass version of the user load: a centred moving average.
/// Near the ends the window is truncated and renormalized, so a constant
/// load maps to the same constant.
pub fn lowpass_target(trace: &LoadTrace, cutoff_hz: f64) -> Result<TargetProfile> {
    let len = moving_average_len(trace.slot_hours(), cutoff_hz)?;
    Ok(TargetProfile::Series(centered_moving_average(trace.load(), len)))
}

pub(crate) fn centered_moving_average(x: &[f64], len: usize) -> Vec<f64> {
    let half = len / 2;
    let n = x.len();
    // Prefix sums keep this linear in the trace length.
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..n)
        .map(|t| {
            let lo = t.saturating_sub(half);
            let hi = (t + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

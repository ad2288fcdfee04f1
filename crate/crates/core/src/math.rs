//! Float helpers routed through `libm`, plus the entropy kernels every
//! measure builds on. Logs are base 2.

pub const LN_2: f64 = core::f64::consts::LN_2;

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn log2(x: f64) -> f64 {
    libm::log2(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn exp2(x: f64) -> f64 {
    libm::exp2(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

/// `-p log2 p` with the `0 log 0 = 0` convention.
#[inline]
pub fn neg_xlog2x(p: f64) -> f64 {
    if p > 0.0 {
        -p * log2(p)
    } else {
        0.0
    }
}

/// Shannon entropy in bits of a (not necessarily normalized) mass vector;
/// masses are normalized by their total first.
pub fn entropy_bits(mass: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let total: f64 = mass.clone().into_iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    mass.into_iter().map(|m| neg_xlog2x(m / total)).sum()
}

/// `log(sum(exp(v)))` in natural log, stable for large magnitudes.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + ln(values.iter().map(|v| exp(v - max)).sum::<f64>())
}

/// Rounds to a fixed resolution and returns the integer key; used to treat
/// float levels as discrete symbols.
#[inline]
pub fn quantize_key(value: f64, resolution: f64) -> i64 {
    round(value / resolution) as i64
}

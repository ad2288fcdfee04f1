//! Smart-meter data manipulation: the reported readings are altered
//! instead of the physical load.
//!
//! * Differentially private aggregation: each of `K` meters adds
//!   `G₁ - G₂` with `G_i ~ Gamma(shape 1/K, scale λ)`. A sum of `K` such
//!   gammas is exponential with mean `λ`, so the aggregate noise is
//!   Laplace(λ) while each meter adds only a small share.
//! * Zero-sum masking in integer milliwatts, so masks cancel exactly.
//! * Meter-count sizing for obfuscation and downsampling.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, Gamma};

use crate::model::{ApplianceLoads, LoadTrace};
use crate::{rng_stream, Error, Result, Rng};

/// Laplace mechanism shared by a group of meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpSpec {
    /// Sensitivity `S(f)` of the released aggregate, kW.
    pub sensitivity: f64,
    pub epsilon: f64,
    /// Meters in the aggregation group.
    pub group_size: usize,
}

impl DpSpec {
    pub fn new(sensitivity: f64, epsilon: f64, group_size: usize) -> Result<Self> {
        let s = Self {
            sensitivity,
            epsilon,
            group_size,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sensitivity > 0.0 && self.epsilon > 0.0 && self.group_size >= 1) {
            return Err(Error::InvalidParameter(format!(
                "need S > 0, epsilon > 0, K >= 1; got {self:?}"
            )));
        }
        Ok(())
    }

    /// Laplace scale `λ = S / ε` of the aggregate noise.
    pub fn lambda(&self) -> f64 {
        self.sensitivity / self.epsilon
    }

    fn gamma(&self) -> Result<Gamma<f64>> {
        self.validate()?;
        Gamma::new(1.0 / self.group_size as f64, self.lambda())
            .map_err(|e| Error::InvalidParameter(format!("gamma law: {e}")))
    }
}

/// One meter's noise share `G₁ - G₂`.
pub fn gamma_dp_noise(spec: &DpSpec, rng: &mut Rng) -> Result<f64> {
    let g = spec.gamma()?;
    Ok(g.sample(rng) - g.sample(rng))
}

/// Adds an independent noise share to every reading of `trace`. Meter
/// `meter` draws from stream `meter` of `seed`, so meters in a group are
/// independent and each is reproducible.
pub fn obfuscate_trace(trace: &LoadTrace, spec: &DpSpec, seed: u64, meter: u64) -> Result<Vec<f64>> {
    let g = spec.gamma()?;
    let mut rng = rng_stream(seed, meter);
    Ok(trace
        .load()
        .iter()
        .map(|x| x + g.sample(&mut rng) - g.sample(&mut rng))
        .collect())
}

/// Milliwatts per kW.
pub const MW_PER_KW: f64 = 1e6;

pub fn to_milliwatts(kw: f64) -> i64 {
    libm::round(kw * MW_PER_KW) as i64
}

/// `k` integer masks, uniform on `[-range_mw, range_mw]` except the last,
/// which cancels the others.
pub fn zero_sum_masks(k: usize, range_mw: i64, seed: u64) -> Result<Vec<i64>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("masking needs at least 2 meters, got {k}")));
    }
    if range_mw < 0 {
        return Err(Error::InvalidParameter("mask range must be non-negative".into()));
    }
    let mut rng = rng_stream(seed, 0);
    let mut masks: Vec<i64> = (0..k - 1).map(|_| rng.random_range(-range_mw..=range_mw)).collect();
    let sum: i64 = masks.iter().sum();
    masks.push(-sum);
    Ok(masks)
}

/// What each meter reports: its reading in milliwatts plus its mask.
pub fn mask_readings(readings_kw: &[f64], masks: &[i64]) -> Result<Vec<i64>> {
    if readings_kw.len() != masks.len() {
        return Err(Error::LengthMismatch {
            expected: readings_kw.len(),
            found: masks.len(),
        });
    }
    Ok(readings_kw.iter().zip(masks).map(|(r, m)| to_milliwatts(*r) + m).collect())
}

/// Total kW of the group from the masked reports.
pub fn aggregate_masked(readings_kw: &[f64], masks: &[i64]) -> Result<f64> {
    let total: i64 = mask_readings(readings_kw, masks)?.iter().sum();
    Ok(total as f64 / MW_PER_KW)
}

/// Inputs to the obfuscation meter-count formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizingParams {
    /// Confidence-interval width factor.
    pub width: f64,
    /// Peak obfuscation power.
    pub peak: f64,
    pub noise_variance: f64,
    /// Allowed deviation of the aggregate.
    pub deviation: f64,
}

/// `⌈(w v Var[N] / d)²⌉`, the number of meters needed to keep the
/// aggregate within the allowed deviation.
pub fn required_meter_count(p: &SizingParams) -> Result<u64> {
    if !(p.width > 0.0 && p.peak > 0.0 && p.noise_variance > 0.0 && p.deviation > 0.0) {
        return Err(Error::InvalidParameter(format!("sizing parameters must be positive: {p:?}")));
    }
    let r = p.width * p.peak * p.noise_variance / p.deviation;
    // Shave rounding noise so exact squares do not round up.
    Ok(libm::ceil(r * r * (1.0 - 1e-12)) as u64)
}

fn block_means(v: &[f64], factor: usize) -> Vec<f64> {
    // A partial last block is padded with zeros, which keeps the energy.
    v.chunks(factor).map(|c| c.iter().sum::<f64>() / factor as f64).collect()
}

/// Replaces each block of `factor` slots by its mean and scales the slot
/// duration by `factor`; energy is preserved.
pub fn downsample(trace: &LoadTrace, factor: usize) -> Result<LoadTrace> {
    if factor == 0 || factor > trace.len() {
        return Err(Error::InvalidParameter(format!(
            "downsampling factor {factor} must be in 1..={}",
            trace.len()
        )));
    }
    if factor == 1 {
        return Ok(trace.clone());
    }
    let mut out = LoadTrace::new(trace.slot_hours() * factor as f64, block_means(trace.load(), factor))?;
    if let Some(res) = trace.res() {
        out = out.with_res(block_means(res, factor))?;
    }
    if let Some(app) = trace.appliances() {
        let columns: Vec<Vec<f64>> = app.columns.iter().map(|c| block_means(c, factor)).collect();
        // Block means of the columns sum to the block mean of the load up
        // to rounding; re-derive the load from them so the check passes.
        let load: Vec<f64> = (0..out.len()).map(|t| columns.iter().map(|c| c[t]).sum()).collect();
        out = LoadTrace::new(out.slot_hours(), load)?;
        if let Some(res) = trace.res() {
            out = out.with_res(block_means(res, factor))?;
        }
        out = out.with_appliances(ApplianceLoads {
            names: app.names.clone(),
            columns,
        })?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;
    use alloc::vec;
    use proptest::prelude::*;

    fn laplace_cdf(z: f64, lambda: f64) -> f64 {
        if z < 0.0 {
            0.5 * libm::exp(z / lambda)
        } else {
            1.0 - 0.5 * libm::exp(-z / lambda)
        }
    }

    fn ks(mut samples: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        samples.sort_by(f64::total_cmp);
        let n = samples.len() as f64;
        samples
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let f = cdf(*z);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn single_meter_noise_is_laplace() {
        let spec = DpSpec::new(1.0, 0.5, 1).unwrap();
        let mut rng = rng_from_seed(1);
        let s: Vec<f64> = (0..100_000).map(|_| gamma_dp_noise(&spec, &mut rng).unwrap()).collect();
        assert!(ks(s, |z| laplace_cdf(z, 2.0)) < 0.01);
    }

    #[test]
    fn per_meter_noise_is_centered() {
        let spec = DpSpec::new(1.0, 1.0, 10).unwrap();
        let mut rng = rng_from_seed(2);
        let n = 100_000;
        let mean = (0..n).map(|_| gamma_dp_noise(&spec, &mut rng).unwrap()).sum::<f64>() / n as f64;
        // Variance 2 λ² / K per draw.
        let sd = libm::sqrt(2.0 / 10.0 / n as f64);
        assert!(mean.abs() < 3.0 * sd, "{mean}");
    }

    #[test]
    fn group_aggregate_is_laplace() {
        let spec = DpSpec::new(2.0, 1.0, 10).unwrap();
        let trace = LoadTrace::new(1.0, vec![0.0; 100_000]).unwrap();
        let meters: Vec<Vec<f64>> = (0..10).map(|m| obfuscate_trace(&trace, &spec, 7, m).unwrap()).collect();
        let agg: Vec<f64> = (0..trace.len()).map(|t| meters.iter().map(|m| m[t]).sum()).collect();
        assert!(ks(agg, |z| laplace_cdf(z, 2.0)) < 0.02);
    }

    #[test]
    fn masks_cancel() {
        let m = zero_sum_masks(2, 1000, 1).unwrap();
        assert_eq!(m[0], -m[1]);
        let readings = [1.0, 2.0, 3.0];
        let m = zero_sum_masks(3, 5_000_000, 4).unwrap();
        assert_eq!(aggregate_masked(&readings, &m).unwrap(), 6.0);
        let m = zero_sum_masks(100, i64::MAX / 1000, 9).unwrap();
        assert_eq!(m.iter().sum::<i64>(), 0);
        assert!(zero_sum_masks(1, 10, 0).is_err());
    }

    #[test]
    fn meter_counts() {
        let c = |w, v, var, d| required_meter_count(&SizingParams { width: w, peak: v, noise_variance: var, deviation: d });
        assert_eq!(c(1.0, 1.0, 1.0, 1.0).unwrap(), 1);
        assert_eq!(c(2.0, 1.0, 1.0, 1.0).unwrap(), 4);
        assert_eq!(c(1.5, 2.0, 0.5, 1.0).unwrap(), 3);
        assert!(c(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn downsample_examples() {
        let t = LoadTrace::new(0.5, vec![1.0, 3.0]).unwrap();
        assert_eq!(downsample(&t, 1).unwrap(), t);
        let d = downsample(&t, 2).unwrap();
        assert_eq!(d.load(), &[2.0]);
        assert_eq!(d.slot_hours(), 1.0);
        assert!(downsample(&t, 3).is_err());
    }

    proptest! {
        #[test]
        fn downsample_keeps_energy(load in prop::collection::vec(0.0f64..5.0, 1..60), factor in 1usize..8) {
            prop_assume!(factor <= load.len());
            let t = LoadTrace::new(0.25, load).unwrap();
            let d = downsample(&t, factor).unwrap();
            prop_assert!((d.energy_kwh() - t.energy_kwh()).abs() < 1e-9);
        }

        #[test]
        fn masked_aggregate_is_exact(readings in prop::collection::vec(0u32..10_000_000, 2..200), seed in 0u64..1000) {
            let kw: Vec<f64> = readings.iter().map(|r| *r as f64 / MW_PER_KW).collect();
            let masks = zero_sum_masks(kw.len(), 1 << 40, seed).unwrap();
            let truth: i64 = readings.iter().map(|r| *r as i64).sum();
            let reported: i64 = mask_readings(&kw, &masks).unwrap().iter().sum();
            prop_assert_eq!(reported, truth);
        }
    }
}

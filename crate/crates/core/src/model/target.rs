use alloc::format;
use alloc::vec::Vec;

use super::TariffSchedule;
use crate::{Error, Result};

/// Grid-load target `W` that shaping policies try to match.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetProfile {
    Constant(f64),
    /// One level per tariff period; `bounds[i] = (start, end)` of period `i`.
    Piecewise {
        levels: Vec<f64>,
        bounds: Vec<(usize, usize)>,
    },
    Series(Vec<f64>),
}

impl TargetProfile {
    pub fn constant(level: f64) -> Result<Self> {
        check_level(level)?;
        Ok(Self::Constant(level))
    }

    pub fn series(values: Vec<f64>) -> Result<Self> {
        for v in &values {
            check_level(*v)?;
        }
        Ok(Self::Series(values))
    }

    /// One level per period of `tariff`.
    pub fn piecewise(levels: Vec<f64>, tariff: &TariffSchedule) -> Result<Self> {
        if levels.len() != tariff.periods().len() {
            return Err(Error::LengthMismatch {
                expected: tariff.periods().len(),
                found: levels.len(),
            });
        }
        for v in &levels {
            check_level(*v)?;
        }
        Ok(Self::piecewise_unchecked(levels, tariff))
    }

    /// Levels optimized with selling enabled may dip below zero.
    pub(crate) fn piecewise_unchecked(levels: Vec<f64>, tariff: &TariffSchedule) -> Self {
        let bounds = tariff
            .periods()
            .iter()
            .map(|p| (p.start_slot, p.end_slot))
            .collect();
        Self::Piecewise { levels, bounds }
    }

    /// Target at `slot`; `None` when outside the profile.
    pub fn at(&self, slot: usize) -> Option<f64> {
        match self {
            TargetProfile::Constant(w) => Some(*w),
            TargetProfile::Piecewise { levels, bounds } => bounds
                .iter()
                .position(|(s, e)| *s <= slot && slot < *e)
                .map(|i| levels[i]),
            TargetProfile::Series(v) => v.get(slot).copied(),
        }
    }

    /// Target for slots `0..horizon`.
    pub fn to_series(&self, horizon: usize) -> Result<Vec<f64>> {
        (0..horizon)
            .map(|t| {
                self.at(t).ok_or_else(|| {
                    Error::InvalidParameter(format!("target profile does not cover slot {t}"))
                })
            })
            .collect()
    }
}

fn check_level(v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "target level must be finite and >= 0, got {v}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PricePeriod;
    use alloc::vec;

    #[test]
    fn piecewise_follows_periods() {
        let tariff = TariffSchedule::new(vec![
            PricePeriod {
                start_slot: 0,
                end_slot: 2,
                price: 0.1,
            },
            PricePeriod {
                start_slot: 2,
                end_slot: 3,
                price: 0.2,
            },
        ])
        .unwrap();
        let w = TargetProfile::piecewise(vec![1.0, 4.0], &tariff).unwrap();
        assert_eq!(w.to_series(3).unwrap(), vec![1.0, 1.0, 4.0]);
        assert!(w.to_series(4).is_err());
        assert!(TargetProfile::piecewise(vec![1.0], &tariff).is_err());
    }

    #[test]
    fn rejects_negative_levels() {
        assert!(TargetProfile::constant(-1.0).is_err());
        assert!(TargetProfile::series(vec![1.0, f64::NAN]).is_err());
    }
}

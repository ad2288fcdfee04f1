use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Constant price over slots `start_slot..end_slot` (end exclusive).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricePeriod {
    pub start_slot: usize,
    pub end_slot: usize,
    /// Currency per kWh.
    pub price: f64,
}

/// Time-of-use tariff: contiguous, non-overlapping price periods starting
/// at slot 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TariffSchedule {
    periods: Vec<PricePeriod>,
}

impl TariffSchedule {
    pub fn new(periods: Vec<PricePeriod>) -> Result<Self> {
        if periods.is_empty() {
            return Err(Error::InvalidTariff("no price periods".into()));
        }
        let mut next = 0;
        for (i, p) in periods.iter().enumerate() {
            if p.start_slot != next {
                return Err(Error::InvalidTariff(format!(
                    "period {i} starts at slot {}, expected {next}",
                    p.start_slot
                )));
            }
            if p.end_slot <= p.start_slot {
                return Err(Error::InvalidTariff(format!("period {i} is empty")));
            }
            if !(p.price >= 0.0 && p.price.is_finite()) {
                return Err(Error::InvalidTariff(format!(
                    "period {i} has price {}",
                    p.price
                )));
            }
            next = p.end_slot;
        }
        Ok(Self { periods })
    }

    /// Single price over `horizon` slots.
    pub fn flat(price: f64, horizon: usize) -> Result<Self> {
        Self::new(vec![PricePeriod {
            start_slot: 0,
            end_slot: horizon,
            price,
        }])
    }

    pub fn periods(&self) -> &[PricePeriod] {
        &self.periods
    }

    pub fn horizon(&self) -> usize {
        self.periods.last().map_or(0, |p| p.end_slot)
    }

    /// Errors unless the schedule covers exactly `horizon` slots.
    pub fn check_covers(&self, horizon: usize) -> Result<()> {
        if self.horizon() != horizon {
            return Err(Error::InvalidTariff(format!(
                "tariff covers {} slots, trace has {horizon}",
                self.horizon()
            )));
        }
        Ok(())
    }

    pub fn period_of(&self, slot: usize) -> Option<usize> {
        self.periods
            .iter()
            .position(|p| p.start_slot <= slot && slot < p.end_slot)
    }

    pub fn price_at(&self, slot: usize) -> Option<f64> {
        self.period_of(slot).map(|i| self.periods[i].price)
    }

    /// Per-slot prices for the covered horizon.
    pub fn prices(&self) -> Vec<f64> {
        self.periods
            .iter()
            .flat_map(|p| core::iter::repeat(p.price).take(p.end_slot - p.start_slot))
            .collect()
    }
}

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

const APPLIANCE_SUM_TOL: f64 = 1e-9;

/// Per-appliance user load; `columns[a][t]` is appliance `a` at slot `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApplianceLoads {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

/// User load (and optionally renewable generation) sampled on a uniform
/// slot grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadTrace {
    slot_hours: f64,
    load: Vec<f64>,
    res: Option<Vec<f64>>,
    appliances: Option<ApplianceLoads>,
}

impl LoadTrace {
    pub fn new(slot_hours: f64, load: Vec<f64>) -> Result<Self> {
        if !(slot_hours > 0.0 && slot_hours.is_finite()) {
            return Err(Error::InvalidTrace(format!(
                "slot duration must be positive, got {slot_hours}"
            )));
        }
        if load.is_empty() {
            return Err(Error::InvalidTrace("trace is empty".into()));
        }
        if let Some(t) = load.iter().position(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidTrace(format!(
                "load at slot {t} is {} (must be finite and >= 0)",
                load[t]
            )));
        }
        Ok(Self {
            slot_hours,
            load,
            res: None,
            appliances: None,
        })
    }

    pub fn with_res(mut self, res: Vec<f64>) -> Result<Self> {
        if res.len() != self.load.len() {
            return Err(Error::LengthMismatch {
                expected: self.load.len(),
                found: res.len(),
            });
        }
        if let Some(t) = res.iter().position(|e| !(*e >= 0.0 && e.is_finite())) {
            return Err(Error::InvalidTrace(format!(
                "renewable generation at slot {t} is {} (must be finite and >= 0)",
                res[t]
            )));
        }
        self.res = Some(res);
        Ok(self)
    }

    pub fn with_appliances(mut self, appliances: ApplianceLoads) -> Result<Self> {
        if appliances.names.len() != appliances.columns.len() || appliances.columns.is_empty() {
            return Err(Error::MissingApplianceData);
        }
        for column in &appliances.columns {
            if column.len() != self.load.len() {
                return Err(Error::LengthMismatch {
                    expected: self.load.len(),
                    found: column.len(),
                });
            }
        }
        for (t, x) in self.load.iter().enumerate() {
            let sum: f64 = appliances.columns.iter().map(|c| c[t]).sum();
            if (sum - x).abs() > APPLIANCE_SUM_TOL {
                return Err(Error::InvalidTrace(format!(
                    "appliance columns sum to {sum} at slot {t}, load is {x}"
                )));
            }
        }
        self.appliances = Some(appliances);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.load.len()
    }

    pub fn is_empty(&self) -> bool {
        self.load.is_empty()
    }

    pub fn slot_hours(&self) -> f64 {
        self.slot_hours
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn res(&self) -> Option<&[f64]> {
        self.res.as_deref()
    }

    /// Renewable generation at `t`, zero when the trace carries none.
    pub fn res_at(&self, t: usize) -> f64 {
        self.res.as_ref().map_or(0.0, |e| e[t])
    }

    pub fn appliances(&self) -> Option<&ApplianceLoads> {
        self.appliances.as_ref()
    }

    pub fn mean_load(&self) -> f64 {
        self.load.iter().sum::<f64>() / self.load.len() as f64
    }

    pub fn max_load(&self) -> f64 {
        self.load.iter().copied().fold(0.0, f64::max)
    }

    /// Total energy in kWh.
    pub fn energy_kwh(&self) -> f64 {
        self.load.iter().sum::<f64>() * self.slot_hours
    }
}

/// Grid load reported to the utility, one value per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTrace(Vec<f64>);

impl GridTrace {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// First slot with negative grid load, if any.
    pub fn first_negative(&self) -> Option<usize> {
        self.0.iter().position(|y| *y < -super::FEAS_TOL)
    }
}

impl From<Vec<f64>> for GridTrace {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

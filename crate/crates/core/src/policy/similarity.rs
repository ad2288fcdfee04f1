use alloc::vec;
use alloc::vec::Vec;

use crate::model::ApplianceLoads;
use crate::{Error, Result};

/// Similarity of appliance-level grid loads `Y_{a,t}` in time and across
/// appliances.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMetrics {
    /// `temporal_self[a][t0] = Σ_{t != t0} |Y_{a,t} - Y_{a,t0}|`.
    pub temporal_self: Vec<Vec<f64>>,
    /// `pairwise[t] = Σ_{a < j} |Y_{a,t} - Y_{j,t}|`.
    pub pairwise: Vec<f64>,
    /// `Σ_t |Σ_a Y_{a,t+1} - Σ_a Y_{a,t}|`.
    pub aggregate_consecutive: f64,
}

pub fn appliance_similarity_metrics(grid: &ApplianceLoads) -> Result<SimilarityMetrics> {
    let cols = &grid.columns;
    if cols.is_empty() || cols[0].is_empty() {
        return Err(Error::MissingApplianceData);
    }
    let n = cols[0].len();
    if let Some(c) = cols.iter().find(|c| c.len() != n) {
        return Err(Error::LengthMismatch {
            expected: n,
            found: c.len(),
        });
    }
    // Σ_t |y_t - y_t0| over all t; the t = t0 term is zero.
    let temporal_self = cols
        .iter()
        .map(|c| c.iter().map(|y0| c.iter().map(|y| (y - y0).abs()).sum()).collect())
        .collect();
    let mut pairwise = vec![0.0; n];
    for (t, p) in pairwise.iter_mut().enumerate() {
        for a in 0..cols.len() {
            for j in a + 1..cols.len() {
                *p += (cols[a][t] - cols[j][t]).abs();
            }
        }
    }
    let total: Vec<f64> = (0..n).map(|t| cols.iter().map(|c| c[t]).sum()).collect();
    let aggregate_consecutive = total.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    Ok(SimilarityMetrics {
        temporal_self,
        pairwise,
        aggregate_consecutive,
    })
}

//! Target-matching QP shared by the offline and receding-horizon solvers.
//!
//! Decision variables are the grid loads `y` of a window, a spill `s ≥ 0`
//! per slot when the battery has finite capacity (energy bought or
//! generated beyond capacity is discarded, as in the battery recursion),
//! and optionally the target level `W` itself.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::model::BatterySpec;
use crate::qp::{Qp, QpOptions};
use crate::{Error, Result};

/// How the window's target enters the objective.
pub(crate) enum WindowTarget<'a> {
    /// Fixed target per window slot.
    Fixed(&'a [f64]),
    /// One free level `W` shared by the window and the remembered past
    /// grid loads.
    Joint { past: &'a [f64] },
    /// Free level per group; `group[t]` is the level of slot `t`.
    Levels { group: &'a [usize] },
}

pub(crate) struct Window<'a> {
    pub x: &'a [f64],
    pub e: &'a [f64],
    pub prices: &'a [f64],
    pub stored_kwh: f64,
    pub tau: f64,
    pub alpha: f64,
    pub target: WindowTarget<'a>,
}

pub(crate) struct WindowSolution {
    pub y: Vec<f64>,
    pub w: Option<f64>,
    /// Fitted levels for [`WindowTarget::Levels`].
    pub levels: Vec<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
}

pub(crate) fn check_lossless(spec: &BatterySpec) -> Result<()> {
    spec.validate()?;
    if !spec.is_lossless() {
        return Err(Error::InvalidBattery(
            "the convex shaping solvers support lossless batteries only".into(),
        ));
    }
    Ok(())
}

pub(crate) fn solve_window(win: &Window<'_>, spec: &BatterySpec) -> Result<WindowSolution> {
    let k = win.x.len();
    let finite_cap = spec.capacity_kwh.is_finite();
    let joint = matches!(win.target, WindowTarget::Joint { .. }) && win.alpha > 0.0;
    let n_levels = match win.target {
        WindowTarget::Levels { group } if win.alpha > 0.0 => group.iter().max().map_or(0, |m| m + 1),
        _ => 0,
    };
    let n_s = if finite_cap { k } else { 0 };
    let w_idx = k + n_s;
    let n = w_idx + usize::from(joint) + n_levels;
    let a = win.alpha;
    let mut qp = Qp::new(n);

    for t in 0..k {
        qp.p[t * n + t] = 2.0 * a;
        qp.q[t] = (1.0 - a) * win.prices[t];
        match &win.target {
            WindowTarget::Fixed(w) => qp.q[t] -= 2.0 * a * w[t],
            WindowTarget::Joint { .. } if joint => {
                qp.p[t * n + w_idx] = -2.0 * a;
                qp.p[w_idx * n + t] = -2.0 * a;
            }
            WindowTarget::Levels { group } if n_levels > 0 => {
                let g = w_idx + group[t];
                qp.p[t * n + g] = -2.0 * a;
                qp.p[g * n + t] = -2.0 * a;
                qp.p[g * n + g] += 2.0 * a;
            }
            WindowTarget::Joint { .. } | WindowTarget::Levels { .. } => {}
        }
    }
    if joint {
        if let WindowTarget::Joint { past } = &win.target {
            qp.p[w_idx * n + w_idx] = 2.0 * a * (k + past.len()) as f64;
            qp.q[w_idx] = -2.0 * a * past.iter().sum::<f64>();
        }
    }

    // Stored energy after slot t:
    //   B + τ Σ_{j≤t} (e_j − x_j + y_j − s_j)  ∈ [0, B_max].
    let mut offset = win.stored_kwh;
    let mut row = vec![0.0; n];
    for t in 0..k {
        offset += win.tau * (win.e[t] - win.x[t]);
        row[t] = win.tau;
        if finite_cap {
            row[k + t] = -win.tau;
        }
        let neg: Vec<f64> = row.iter().map(|v| -v).collect();
        qp.push_le(&neg, offset);
        if finite_cap {
            qp.push_le(&row, spec.capacity_kwh - offset);
        }
    }
    for t in 0..k {
        if finite_cap {
            qp.push_bound(k + t, -1.0, 0.0);
        }
        if spec.max_charge_kw.is_finite() {
            qp.push_bound(t, 1.0, win.x[t] + spec.max_charge_kw);
        }
        let mut lower = f64::NEG_INFINITY;
        if spec.max_discharge_kw.is_finite() {
            lower = win.x[t] - spec.max_discharge_kw;
        }
        if !spec.allow_sell {
            lower = lower.max(0.0);
        }
        if lower.is_finite() {
            qp.push_bound(t, -1.0, -lower);
        }
    }

    let sol = qp.solve(&QpOptions::default())?;
    let y = sol.z[..k].to_vec();
    let w = joint.then(|| sol.z[w_idx]);
    let levels = match win.target {
        WindowTarget::Levels { group } => {
            if n_levels > 0 {
                sol.z[w_idx..w_idx + n_levels].to_vec()
            } else {
                group_means(&y, group)
            }
        }
        _ => Vec::new(),
    };
    let objective = window_objective(win, &y, w, &levels);
    if !objective.is_finite() {
        return Err(Error::Solver(format!("non-finite objective {objective}")));
    }
    Ok(WindowSolution {
        y,
        w,
        levels,
        objective,
        kkt_residual: sol.kkt_residual,
    })
}

/// Mean of `y` over each group.
pub(crate) fn group_means(y: &[f64], group: &[usize]) -> Vec<f64> {
    let m = group.iter().max().map_or(0, |m| m + 1);
    let mut sum = vec![0.0; m];
    let mut count = vec![0usize; m];
    for (v, g) in y.iter().zip(group) {
        sum[*g] += v;
        count[*g] += 1;
    }
    sum.iter().zip(&count).map(|(s, c)| if *c > 0 { s / *c as f64 } else { 0.0 }).collect()
}

fn window_objective(win: &Window<'_>, y: &[f64], w: Option<f64>, levels: &[f64]) -> f64 {
    let a = win.alpha;
    let mut f: f64 = y.iter().zip(win.prices).map(|(y, c)| (1.0 - a) * c * y).sum();
    match (&win.target, w) {
        (WindowTarget::Fixed(ws), _) => {
            f += a * y.iter().zip(*ws).map(|(y, w)| (y - w) * (y - w)).sum::<f64>();
        }
        (WindowTarget::Joint { past }, Some(w)) => {
            f += a * y.iter().chain(past.iter()).map(|y| (y - w) * (y - w)).sum::<f64>();
        }
        (WindowTarget::Levels { group }, _) => {
            f += a * y.iter().zip(*group).map(|(y, g)| (y - levels[*g]) * (y - levels[*g])).sum::<f64>();
        }
        (WindowTarget::Joint { .. }, None) => {}
    }
    f
}

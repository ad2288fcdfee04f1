//! Privacy-power function
//!
//! ```text
//! I*(P̄) = min I(X;Y)  over p(y|x) with  E[X - Y] ≤ P̄,  0 ≤ X - Y ≤ P̂,
//! ```
//!
//! with the output alphabet equal to the input alphabet. For a fixed
//! multiplier `s` the Lagrangian `I + s E[X - Y]` is minimized by
//! Blahut-Arimoto iterations restricted to the feasible support; `s` is
//! then bisected until the average constraint is met.

use alloc::vec;
use alloc::vec::Vec;

use super::dist::{mi_from_joint, ChannelMatrix, Pmf, LETTER_TOL};
use crate::math;
use crate::{Error, Result};

const BA_GAP: f64 = 1e-12;
/// Share of a uniform law mixed into warm starts.
const WARM_FLOOR: f64 = 1e-9;
const BA_MAX_ITER: usize = 200_000;
const MIN_BISECTIONS: usize = 20;
const MAX_BISECTIONS: usize = 100;
const MAX_MULTIPLIER: f64 = 1e12;

/// `d[x][y] = x - y` where `0 ≤ x - y ≤ peak`, else `None`.
fn draw_matrix(alphabet: &[f64], peak: f64) -> Vec<Vec<Option<f64>>> {
    alphabet
        .iter()
        .map(|x| {
            alphabet
                .iter()
                .map(|y| {
                    let d = x - y;
                    (d >= -LETTER_TOL && d <= peak + LETTER_TOL).then_some(d.max(0.0))
                })
                .collect()
        })
        .collect()
}

/// One Blahut-Arimoto solve at a fixed multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct BaPoint {
    pub rows: Vec<Vec<f64>>,
    pub mutual_information: f64,
    pub mean_draw: f64,
    /// Lagrangian `I + s E[X - Y]` after every iteration.
    pub lagrangian: Vec<f64>,
}

struct Solver<'a> {
    px: &'a [f64],
    d: Vec<Vec<Option<f64>>>,
}

impl Solver<'_> {
    fn rows_for(&self, q: &[f64], s: f64) -> Vec<Vec<f64>> {
        self.d
            .iter()
            .map(|drow| {
                let logw: Vec<f64> = drow
                    .iter()
                    .zip(q)
                    .map(|(d, qy)| match d {
                        Some(d) if *qy > 0.0 => math::log2(*qy) - s * d,
                        _ => f64::NEG_INFINITY,
                    })
                    .collect();
                let m = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = logw.iter().map(|l| math::exp2(l - m)).collect();
                let z: f64 = w.iter().sum();
                w.iter().map(|v| v / z).collect()
            })
            .collect()
    }

    fn output(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        let mut q = vec![0.0; self.d.len()];
        for (row, px) in rows.iter().zip(self.px) {
            for (qy, w) in q.iter_mut().zip(row) {
                *qy += px * w;
            }
        }
        q
    }

    fn stats(&self, rows: &[Vec<f64>]) -> (f64, f64) {
        let joint: Vec<Vec<f64>> = rows
            .iter()
            .zip(self.px)
            .map(|(r, px)| r.iter().map(|w| px * w).collect())
            .collect();
        let mut draw = 0.0;
        for (i, r) in joint.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                if let Some(d) = self.d[i][j] {
                    draw += v * d;
                }
            }
        }
        (mi_from_joint(&joint), draw)
    }

    /// Runs BA from output law `q`; returns rows, final `q`, and the
    /// Lagrangian history if requested. Stops when the gap between the
    /// Blahut upper and lower bounds on the Lagrangian falls below
    /// `BA_GAP`, so a warm start with a nearly vanished output cannot
    /// stall the run.
    fn run(&self, q: Vec<f64>, s: f64, history: bool) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
        let n = q.len() as f64;
        let total: f64 = q.iter().sum();
        let mut q: Vec<f64> = q.iter().map(|v| (v / total + WARM_FLOOR / n) / (1.0 + WARM_FLOOR)).collect();
        let mut hist = Vec::new();
        let mut rows = self.rows_for(&q, s);
        for _ in 0..BA_MAX_ITER {
            let qn = self.output(&rows);
            // c_y = qn_y / q_y; gap = log max c - sum q log c.
            let mut max_log = f64::NEG_INFINITY;
            let mut mean_log = 0.0;
            for (a, b) in q.iter().zip(&qn) {
                if *a > 0.0 && *b > 0.0 {
                    let l = math::log2(b / a);
                    max_log = max_log.max(l);
                    mean_log += a * l;
                }
            }
            q = qn;
            rows = self.rows_for(&q, s);
            if history {
                let (i, d) = self.stats(&rows);
                hist.push(i + s * d);
            }
            if max_log - mean_log < BA_GAP {
                break;
            }
        }
        (rows, q, hist)
    }
}

fn check_inputs(p_x: &Pmf, peak: f64) -> Result<()> {
    if !(peak >= 0.0) {
        return Err(Error::InvalidParameter(alloc::format!(
            "peak power {peak} < 0 leaves no feasible output"
        )));
    }
    let s = p_x.support();
    if s.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter(
            "pmf support must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Blahut-Arimoto at a fixed multiplier `s ≥ 0`, from a uniform output law.
pub fn blahut_arimoto(p_x: &Pmf, peak: f64, s: f64) -> Result<BaPoint> {
    check_inputs(p_x, peak)?;
    let solver = Solver {
        px: p_x.probs(),
        d: draw_matrix(p_x.support(), peak),
    };
    let n = p_x.len();
    let (rows, _, lagrangian) = solver.run(vec![1.0 / n as f64; n], s, true);
    let (mi, draw) = solver.stats(&rows);
    Ok(BaPoint {
        rows,
        mutual_information: mi,
        mean_draw: draw,
        lagrangian,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyPower {
    /// Minimum leakage, bits per slot.
    pub bits: f64,
    pub channel: ChannelMatrix,
    /// `E[X - Y]` of the returned channel.
    pub mean_draw: f64,
    /// Multiplier on the average-power constraint (0 when inactive).
    pub multiplier: f64,
}

/// Minimum mutual information between user and grid load given average
/// (`avg`) and peak (`peak`) shaping power, with the optimal memoryless
/// channel.
pub fn privacy_power_function(p_x: &Pmf, avg: f64, peak: f64) -> Result<PrivacyPower> {
    check_inputs(p_x, peak)?;
    if !(avg >= 0.0) {
        return Err(Error::InvalidParameter(alloc::format!("average power {avg} < 0")));
    }
    let alphabet = p_x.support().to_vec();
    let px = p_x.probs();
    let n = alphabet.len();
    let finish = |rows: Vec<Vec<f64>>, multiplier: f64| -> Result<PrivacyPower> {
        let channel = ChannelMatrix::new(alphabet.clone(), alphabet.clone(), rows)?;
        Ok(PrivacyPower {
            bits: channel.mutual_information(px),
            mean_draw: channel.mean_draw(px),
            channel,
            multiplier,
        })
    };

    if avg == 0.0 {
        return finish(ChannelMatrix::identity(alphabet.clone()).rows().to_vec(), f64::INFINITY);
    }
    // A single output reachable from every likely input leaks nothing; the
    // largest such output draws the least energy.
    let active: Vec<usize> = (0..n).filter(|i| px[*i] > 0.0).collect();
    let lowest = alphabet[active[0]];
    let constant = (0..n).rev().find(|&j| {
        active
            .iter()
            .all(|&i| alphabet[i] - alphabet[j] >= -LETTER_TOL && alphabet[i] - alphabet[j] <= peak + LETTER_TOL)
    });
    if let Some(j) = constant {
        let draw: f64 = active.iter().map(|&i| px[i] * (alphabet[i] - alphabet[j])).sum();
        if draw <= avg {
            debug_assert!(alphabet[j] <= lowest + LETTER_TOL);
            let rows = (0..n)
                .map(|_| (0..n).map(|k| if k == j { 1.0 } else { 0.0 }).collect())
                .collect();
            return finish(rows, 0.0);
        }
    }

    let solver = Solver {
        px,
        d: draw_matrix(&alphabet, peak),
    };
    let uniform = vec![1.0 / n as f64; n];
    let (rows0, q0, _) = solver.run(uniform, 0.0, false);
    let (_, d0) = solver.stats(&rows0);
    if d0 <= avg {
        return finish(rows0, 0.0);
    }

    // Bracket: draw(lo) > avg ≥ draw(hi).
    let (mut lo, mut lo_rows, mut lo_d) = (0.0, rows0, d0);
    let mut q = q0;
    let mut hi = 1.0;
    let (mut hi_rows, mut hi_d);
    loop {
        let (rows, qn, _) = solver.run(q.clone(), hi, false);
        let (_, d) = solver.stats(&rows);
        if d <= avg || hi >= MAX_MULTIPLIER {
            hi_rows = rows;
            hi_d = d;
            q = qn;
            break;
        }
        lo = hi;
        lo_rows = rows;
        lo_d = d;
        q = qn;
        hi *= 2.0;
    }
    for step in 0..MAX_BISECTIONS {
        if step >= MIN_BISECTIONS && hi - lo <= 1e-10 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let (rows, qn, _) = solver.run(q.clone(), mid, false);
        let (_, d) = solver.stats(&rows);
        q = qn;
        if d > avg {
            lo = mid;
            lo_rows = rows;
            lo_d = d;
        } else {
            hi = mid;
            hi_rows = rows;
            hi_d = d;
        }
    }
    // Time-share the bracket ends so the average constraint holds with
    // equality; mutual information is convex, so this only helps.
    let lambda = if lo_d > hi_d {
        ((avg - hi_d) / (lo_d - hi_d)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let rows = lo_rows
        .iter()
        .zip(&hi_rows)
        .map(|(a, b)| a.iter().zip(b).map(|(u, v)| lambda * u + (1.0 - lambda) * v).collect())
        .collect();
    finish(rows, 0.5 * (lo + hi))
}

/// Largest alphabet the grid oracle accepts.
pub const ORACLE_MAX_ALPHABET: usize = 3;

/// Independent check of [`privacy_power_function`]: minimum mutual
/// information over feasible channels found by a nested grid search over
/// the free channel entries, refined until the grid step falls below
/// `grid_res`. Returns an upper bound on the true minimum.
pub fn channel_oracle_search(p_x: &Pmf, avg: f64, peak: f64, grid_res: f64) -> Result<f64> {
    check_inputs(p_x, peak)?;
    let n = p_x.len();
    if n > ORACLE_MAX_ALPHABET {
        return Err(Error::AlphabetTooLarge {
            size: n,
            max: ORACLE_MAX_ALPHABET,
        });
    }
    if !(grid_res > 0.0) {
        return Err(Error::InvalidParameter("grid resolution must be positive".into()));
    }
    let alphabet = p_x.support();
    let px = p_x.probs();
    let d = draw_matrix(alphabet, peak);
    // Allowed outputs per row; a row with k outputs has k - 1 free entries.
    let allowed: Vec<Vec<usize>> = d
        .iter()
        .map(|r| (0..n).filter(|j| r[*j].is_some()).collect())
        .collect();
    let dims: Vec<usize> = allowed.iter().map(|a| a.len() - 1).collect();
    let m: usize = dims.iter().sum();

    let evaluate = |theta: &[f64]| -> Option<f64> {
        let mut joint = vec![vec![0.0; n]; n];
        let mut draw = 0.0;
        let mut k = 0;
        for i in 0..n {
            let free = &theta[k..k + dims[i]];
            k += dims[i];
            let rest = 1.0 - free.iter().sum::<f64>();
            if rest < -1e-12 {
                return None;
            }
            for (slot, &j) in allowed[i].iter().enumerate() {
                let w = if slot < dims[i] { free[slot] } else { rest.max(0.0) };
                joint[i][j] = px[i] * w;
                draw += joint[i][j] * d[i][j].unwrap_or(0.0);
            }
        }
        (draw <= avg + 1e-12).then(|| mi_from_joint(&joint))
    };

    if m == 0 {
        return evaluate(&[]).ok_or_else(|| Error::InvalidParameter("no feasible channel".into()));
    }

    const POINTS: usize = 21;
    let mut center = vec![0.5; m];
    let mut half = 0.5;
    let mut best: Option<(f64, Vec<f64>)> = None;
    loop {
        let step = 2.0 * half / (POINTS - 1) as f64;
        let mut idx = vec![0usize; m];
        let mut theta = vec![0.0; m];
        loop {
            for a in 0..m {
                theta[a] = (center[a] - half + step * idx[a] as f64).clamp(0.0, 1.0);
            }
            if let Some(v) = evaluate(&theta) {
                if best.as_ref().map_or(true, |(b, _)| v < *b) {
                    best = Some((v, theta.clone()));
                }
            }
            // Odometer increment.
            let mut a = 0;
            while a < m {
                idx[a] += 1;
                if idx[a] < POINTS {
                    break;
                }
                idx[a] = 0;
                a += 1;
            }
            if a == m {
                break;
            }
        }
        let Some((_, arg)) = &best else {
            return Err(Error::InvalidParameter("no feasible channel on the grid".into()));
        };
        if step <= grid_res {
            break;
        }
        center = arg.clone();
        half = 3.0 * step;
    }
    Ok(best.map(|(v, _)| v).unwrap_or(0.0))
}

/// Splits a total average-power budget across users.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub budgets: Vec<f64>,
    pub per_user_bits: Vec<f64>,
    pub total_bits: f64,
}

/// Divides `total` among independent users to minimize the summed
/// privacy-power functions (no peak limit). Budget is handed out in
/// `steps` equal increments, each to the user whose leakage drops most;
/// with convex per-user curves this is optimal on the increment grid.
pub fn multiuser_allocate(pmfs: &[Pmf], total: f64, steps: usize) -> Result<Allocation> {
    if !(total >= 0.0) {
        return Err(Error::InvalidParameter(alloc::format!("negative budget {total}")));
    }
    if pmfs.is_empty() || steps == 0 {
        return Err(Error::InvalidParameter("need at least one user and one step".into()));
    }
    let delta = total / steps as f64;
    let leak = |p: &Pmf, budget: f64| -> Result<f64> {
        let span = p.support().last().unwrap() - p.support()[0];
        Ok(privacy_power_function(p, budget, span)?.bits)
    };
    let mut budgets = vec![0.0; pmfs.len()];
    let mut units = vec![0usize; pmfs.len()];
    let mut current: Vec<f64> = pmfs.iter().map(|p| leak(p, 0.0)).collect::<Result<_>>()?;
    let mut next: Vec<f64> = pmfs.iter().map(|p| leak(p, delta)).collect::<Result<_>>()?;
    for _ in 0..steps {
        let mut pick = 0;
        for i in 1..pmfs.len() {
            if current[i] - next[i] > current[pick] - next[pick] {
                pick = i;
            }
        }
        units[pick] += 1;
        budgets[pick] = units[pick] as f64 * delta;
        current[pick] = next[pick];
        next[pick] = leak(&pmfs[pick], (units[pick] + 1) as f64 * delta)?;
    }
    Ok(Allocation {
        total_bits: current.iter().sum(),
        per_user_bits: current,
        budgets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_budget_is_identity() {
        let p = Pmf::new(vec![0.0, 1.0, 2.0], vec![0.2, 0.5, 0.3]).unwrap();
        let r = privacy_power_function(&p, 0.0, 2.0).unwrap();
        assert!((r.bits - p.entropy()).abs() <= 1e-9);
        assert_eq!(r.channel, ChannelMatrix::identity(vec![0.0, 1.0, 2.0]));
    }

    #[test]
    fn enough_budget_leaks_nothing() {
        let p = Pmf::uniform(vec![0.0, 1.0]).unwrap();
        let r = privacy_power_function(&p, 0.5, 1.0).unwrap();
        assert_eq!(r.bits, 0.0);
        assert!((r.mean_draw - 0.5).abs() < 1e-15);
    }

    #[test]
    fn uniform_binary_quarter_budget() {
        // Closed form for a binary source: Y=0 always from x=0; from x=1,
        // send 0 w.p. 2·P̄. I = H(Y) - P(X=1) H_b(2P̄) with P(Y=1) = 0.5 - P̄.
        let p = Pmf::uniform(vec![0.0, 1.0]).unwrap();
        let r = privacy_power_function(&p, 0.25, 1.0).unwrap();
        let hb = |v: f64| -v * libm::log2(v) - (1.0 - v) * libm::log2(1.0 - v);
        let exact = hb(0.25) - 0.5 * hb(0.5);
        assert!((r.bits - exact).abs() < 1e-6, "{} vs {exact}", r.bits);
        assert!((r.mean_draw - 0.25).abs() < 1e-9);
        let oracle = channel_oracle_search(&p, 0.25, 1.0, 1e-4).unwrap();
        assert!((oracle - exact).abs() < 1e-3);
    }

    #[test]
    fn ba_lagrangian_never_increases() {
        let p = Pmf::new(vec![0.0, 1.0, 2.0], vec![0.3, 0.3, 0.4]).unwrap();
        for s in [0.1, 1.0, 5.0] {
            let pt = blahut_arimoto(&p, 2.0, s).unwrap();
            for w in pt.lagrangian.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
        }
    }

    #[test]
    fn oracle_edge_cases() {
        let p = Pmf::new(vec![0.0, 1.0, 2.0], vec![0.2, 0.5, 0.3]).unwrap();
        assert!((channel_oracle_search(&p, 0.0, 2.0, 1e-3).unwrap() - p.entropy()).abs() < 1e-12);
        let point = Pmf::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(channel_oracle_search(&point, 0.3, 1.0, 1e-3).unwrap(), 0.0);
        let big = Pmf::uniform(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            channel_oracle_search(&big, 0.3, 1.0, 1e-3),
            Err(Error::AlphabetTooLarge { .. })
        ));
        assert!(privacy_power_function(&p, 0.1, -1.0).is_err());
    }

    #[test]
    fn single_user_gets_everything() {
        let p = Pmf::uniform(vec![0.0, 1.0]).unwrap();
        let a = multiuser_allocate(&[p], 0.2, 20).unwrap();
        assert!((a.budgets[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn identical_users_split_evenly() {
        let p = Pmf::new(vec![0.0, 1.0], vec![0.4, 0.6]).unwrap();
        let a = multiuser_allocate(&[p.clone(), p], 0.4, 40).unwrap();
        assert!((a.budgets[0] - a.budgets[1]).abs() <= 0.4 / 40.0 + 1e-12);
    }
}

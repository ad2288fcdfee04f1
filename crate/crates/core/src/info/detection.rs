//! Hypothesis-testing privacy: the utility provider decides between two
//! load laws from the grid readings. By the Chernoff–Stein lemma the miss
//! probability decays as `2^{-n D(p_{Y|h0} || p_{Y|h1})}`, so the policy
//! should minimize that divergence.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::dist::{ChannelMatrix, Pmf, LETTER_TOL};
use crate::math;
use crate::{rng_from_seed, Error, Result};

/// Load laws under the two hypotheses and the average renewable budget
/// available for shaping under either.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisModel {
    h0: Pmf,
    h1: Pmf,
    avg_budget: f64,
}

impl HypothesisModel {
    pub fn new(h0: Pmf, h1: Pmf, avg_budget: f64) -> Result<Self> {
        if h0.len() != h1.len() || h0.support().iter().zip(h1.support()).any(|(a, b)| (a - b).abs() > LETTER_TOL) {
            return Err(Error::InvalidParameter("hypotheses must share a support".into()));
        }
        if !(avg_budget >= 0.0) {
            return Err(Error::InvalidParameter(format!("average budget {avg_budget} is negative")));
        }
        Ok(Self { h0, h1, avg_budget })
    }

    pub fn h0(&self) -> &Pmf {
        &self.h0
    }

    pub fn h1(&self) -> &Pmf {
        &self.h1
    }

    pub fn avg_budget(&self) -> f64 {
        self.avg_budget
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinKl {
    /// Channel used under h0 and under h1.
    pub channels: [ChannelMatrix; 2],
    /// `D(p_{Y|h0} || p_{Y|h1})`, bits; infinite if no feasible pair makes
    /// the output laws mutually absolutely continuous.
    pub divergence: f64,
}

const RESTARTS: usize = 16;
const MAX_ITER: usize = 5000;
const SEED: u64 = 0x6b6c;

struct Problem<'a> {
    p: [&'a [f64]; 2],
    /// `x_i - y_j` on allowed entries, `None` elsewhere.
    draw: Vec<Vec<Option<f64>>>,
    budget: f64,
}

type Pair = [Vec<Vec<f64>>; 2];

impl Problem<'_> {
    fn n(&self) -> usize {
        self.draw.len()
    }

    fn outputs(&self, w: &Pair) -> [Vec<f64>; 2] {
        let n = self.n();
        let mut q = [vec![0.0; n], vec![0.0; n]];
        for h in 0..2 {
            for (i, row) in w[h].iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    q[h][j] += self.p[h][i] * v;
                }
            }
        }
        q
    }

    fn objective(&self, w: &Pair) -> f64 {
        let [q0, q1] = self.outputs(w);
        let mut d = 0.0;
        for (a, b) in q0.iter().zip(&q1) {
            if *a > 0.0 {
                if *b <= 0.0 {
                    return f64::INFINITY;
                }
                d += a * math::log2(a / b);
            }
        }
        d.max(0.0)
    }

    fn gradient(&self, w: &Pair) -> Pair {
        let [q0, q1] = self.outputs(w);
        let n = self.n();
        let mut g: Pair = [vec![vec![0.0; n]; n], vec![vec![0.0; n]; n]];
        for j in 0..n {
            let g0 = math::log2(q0[j].max(1e-300) / q1[j].max(1e-300)) + 1.0 / math::LN_2;
            let g1 = if q0[j] > 0.0 { -q0[j] / (q1[j].max(1e-300) * math::LN_2) } else { 0.0 };
            for i in 0..n {
                g[0][i][j] = self.p[0][i] * g0;
                g[1][i][j] = self.p[1][i] * g1;
            }
        }
        g
    }

    fn mean_draw(&self, p: &[f64], w: &[Vec<f64>]) -> f64 {
        let mut m = 0.0;
        for (i, row) in w.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if let Some(d) = self.draw[i][j] {
                    m += p[i] * v * d;
                }
            }
        }
        m
    }

    fn project_rows(&self, v: &[Vec<f64>], p: &[f64], theta: f64) -> Vec<Vec<f64>> {
        v.iter()
            .enumerate()
            .map(|(i, row)| {
                let shifted: Vec<Option<f64>> = row
                    .iter()
                    .zip(&self.draw[i])
                    .map(|(x, d)| d.map(|d| x - theta * p[i] * d))
                    .collect();
                project_masked_simplex(&shifted)
            })
            .collect()
    }

    /// Euclidean projection of one channel onto its feasible set.
    fn project(&self, v: &[Vec<f64>], p: &[f64]) -> Vec<Vec<f64>> {
        let w = self.project_rows(v, p, 0.0);
        if self.mean_draw(p, &w) <= self.budget {
            return w;
        }
        let mut hi = 1.0;
        while self.mean_draw(p, &self.project_rows(v, p, hi)) > self.budget {
            hi *= 2.0;
            if hi > 1e30 {
                break;
            }
        }
        let mut lo = 0.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.mean_draw(p, &self.project_rows(v, p, mid)) > self.budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.project_rows(v, p, hi)
    }

    fn project_pair(&self, v: &Pair) -> Pair {
        [self.project(&v[0], self.p[0]), self.project(&v[1], self.p[1])]
    }

    fn descend(&self, mut w: Pair) -> (Pair, f64) {
        let mut f = self.objective(&w);
        let mut step = 1.0;
        for _ in 0..MAX_ITER {
            if !f.is_finite() || f == 0.0 {
                break;
            }
            let g = self.gradient(&w);
            let mut moved = false;
            while step > 1e-14 {
                let trial: Pair = core::array::from_fn(|h| {
                    w[h].iter()
                        .zip(&g[h])
                        .map(|(row, gr)| row.iter().zip(gr).map(|(a, b)| a - step * b).collect())
                        .collect()
                });
                let cand = self.project_pair(&trial);
                let mut dir = 0.0;
                for h in 0..2 {
                    for i in 0..self.n() {
                        for j in 0..self.n() {
                            dir += g[h][i][j] * (cand[h][i][j] - w[h][i][j]);
                        }
                    }
                }
                let fc = self.objective(&cand);
                if fc <= f + 1e-4 * dir {
                    let gain = f - fc;
                    w = cand;
                    f = fc;
                    moved = gain > 1e-15 * f.max(1e-300);
                    step *= 2.0;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        (w, f)
    }
}

/// Projects onto `{w >= 0, Σ w = 1}` restricted to the `Some` entries;
/// `None` entries are fixed at 0.
fn project_masked_simplex(v: &[Option<f64>]) -> Vec<f64> {
    let mut vals: Vec<f64> = v.iter().flatten().copied().collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (k, u) in vals.iter().enumerate() {
        cum += u;
        let t = (cum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|x| x.map_or(0.0, |x| (x - tau).max(0.0))).collect()
}

/// Minimizes `D(p_{Y|h0} || p_{Y|h1})` over pairs of channels on the load
/// alphabet with `0 <= x - y <= peak` and `E[X - Y | h] <= P̄` under each
/// hypothesis. Projected gradient with Armijo backtracking from
/// [`RESTARTS`](self) random starting points; the best run is kept.
pub fn min_kl_channel(hyp: &HypothesisModel, peak: f64) -> Result<MinKl> {
    if !(peak >= 0.0) {
        return Err(Error::InvalidParameter(format!("peak {peak} is negative")));
    }
    let letters = hyp.h0.support().to_vec();
    let n = letters.len();
    let draw: Vec<Vec<Option<f64>>> = letters
        .iter()
        .map(|x| {
            letters
                .iter()
                .map(|y| {
                    let d = x - y;
                    (d >= -LETTER_TOL && d <= peak + LETTER_TOL).then_some(d.max(0.0))
                })
                .collect()
        })
        .collect();
    let make = |w: Pair, divergence: f64| -> Result<MinKl> {
        let [a, b] = w;
        Ok(MinKl {
            channels: [
                ChannelMatrix::new(letters.clone(), letters.clone(), a)?,
                ChannelMatrix::new(letters.clone(), letters.clone(), b)?,
            ],
            divergence,
        })
    };
    if hyp.avg_budget == 0.0 {
        let id = ChannelMatrix::identity(letters.clone());
        let d = super::kl_divergence(hyp.h0.probs(), hyp.h1.probs()).unwrap_or(f64::INFINITY);
        return Ok(MinKl {
            channels: [id.clone(), id],
            divergence: d,
        });
    }
    let problem = Problem {
        p: [hyp.h0.probs(), hyp.h1.probs()],
        draw,
        budget: hyp.avg_budget,
    };
    let mut rng = rng_from_seed(SEED);
    let mut best: Option<(Pair, f64)> = None;
    for r in 0..RESTARTS {
        let start: Pair = core::array::from_fn(|_| {
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| match problem.draw[i][j] {
                            Some(_) if r == 0 => 1.0,
                            Some(_) => -math::ln(1.0 - rng.random::<f64>()),
                            None => 0.0,
                        })
                        .collect::<Vec<f64>>()
                })
                .map(|row| {
                    let s: f64 = row.iter().sum();
                    row.iter().map(|v| v / s).collect()
                })
                .collect()
        });
        let (w, f) = problem.descend(problem.project_pair(&start));
        if best.as_ref().map_or(true, |b| f < b.1) {
            best = Some((w, f));
        }
    }
    let (w, f) = best.expect("at least one restart");
    make(w, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bern(p: f64) -> Pmf {
        Pmf::bernoulli(p).unwrap()
    }

    #[test]
    fn simplex_projection() {
        let w = project_masked_simplex(&[Some(0.5), None, Some(0.9)]);
        assert!((w[0] - 0.3).abs() < 1e-12 && w[1] == 0.0 && (w[2] - 0.7).abs() < 1e-12);
        let w = project_masked_simplex(&[Some(-3.0), Some(2.0)]);
        assert_eq!(w, vec![0.0, 1.0]);
    }

    #[test]
    fn zero_budget_keeps_raw_readings() {
        let hyp = HypothesisModel::new(bern(0.2), bern(0.8), 0.0).unwrap();
        let r = min_kl_channel(&hyp, 1.0).unwrap();
        assert!((r.divergence - 1.2).abs() < 1e-12);
        assert_eq!(r.channels[0], ChannelMatrix::identity(vec![0.0, 1.0]));
    }

    #[test]
    fn large_budget_hides_everything() {
        let hyp = HypothesisModel::new(bern(0.2), bern(0.8), 1.0).unwrap();
        assert!(min_kl_channel(&hyp, 1.0).unwrap().divergence < 1e-6);
    }

    #[test]
    fn binary_pair_matches_grid_oracle() {
        let hyp = HypothesisModel::new(bern(0.2), bern(0.8), 0.25).unwrap();
        let r = min_kl_channel(&hyp, 1.0).unwrap();
        // Each channel has one free entry: P(Y = 0 | X = 1) = a_h, with
        // P(X = 1 | h) a_h <= 0.25.
        let mut best = f64::INFINITY;
        for i in 0..=1000 {
            let a0 = i as f64 * 1e-3;
            if 0.2 * a0 > 0.25 {
                continue;
            }
            for k in 0..=1000 {
                let a1 = k as f64 * 1e-3;
                if 0.8 * a1 > 0.25 + 1e-12 {
                    break;
                }
                let (u, v) = (0.2 * (1.0 - a0), 0.8 * (1.0 - a1));
                let d = (1.0 - u) * libm::log2((1.0 - u) / (1.0 - v)) + if u > 0.0 { u * libm::log2(u / v) } else { 0.0 };
                best = best.min(d);
            }
        }
        assert!((r.divergence - best).abs() < 1e-3, "{} vs {best}", r.divergence);
        for (c, p) in r.channels.iter().zip([0.2, 0.8]) {
            assert!(c.mean_draw(&[1.0 - p, p]) <= 0.25 + 1e-9);
            c.check_support(1.0).unwrap();
        }
    }

    #[test]
    fn ternary_is_no_worse_than_raw() {
        let h0 = Pmf::new(vec![0.0, 1.0, 2.0], vec![0.5, 0.3, 0.2]).unwrap();
        let h1 = Pmf::new(vec![0.0, 1.0, 2.0], vec![0.2, 0.3, 0.5]).unwrap();
        let raw = super::super::kl_divergence(h0.probs(), h1.probs()).unwrap();
        let hyp = HypothesisModel::new(h0, h1, 0.3).unwrap();
        let r = min_kl_channel(&hyp, 2.0).unwrap();
        assert!(r.divergence < raw);
        assert!(HypothesisModel::new(bern(0.2), bern(0.8), -1.0).is_err());
    }
}

//! Tabular Markov decision processes: exact value iteration and model-free
//! Q-learning on the same specification.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::model::{check_rows, sample_index};
use crate::{rng_from_seed, Error, Result};

/// One available action in a state.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpec {
    /// Expected one-step reward.
    pub reward: f64,
    /// Law of the next state.
    pub next: Vec<f64>,
}

/// `actions[s][a]` is `None` when action `a` is not available in state `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpSpec {
    pub actions: Vec<Vec<Option<ActionSpec>>>,
    pub discount: f64,
}

/// Battery-privacy MDP in integer units: load `X_t ∈ {0..nx}` follows a
/// Markov chain, the grid load `Y_t ∈ {0..ny}` is the action and the
/// battery moves to `min(B_t + Y_t - X_t, b_max)`, which must not go below
/// zero. One unit is `unit_kw` of power for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryMdp {
    pub x_rows: Vec<Vec<f64>>,
    pub y_levels: usize,
    pub b_max: usize,
    pub unit_kw: f64,
    pub alpha: f64,
    pub price: f64,
    pub target_kw: f64,
    pub discount: f64,
}

impl BatteryMdp {
    /// State index of `(b, x)`.
    pub fn state(&self, b: usize, x: usize) -> usize {
        b * self.x_rows.len() + x
    }

    /// Builds the MDP with reward `-[(1-α) Y C + α (Y - W)^2]`.
    pub fn to_spec(&self) -> Result<MdpSpec> {
        check_rows(&self.x_rows)?;
        let nx = self.x_rows.len();
        let ns = (self.b_max + 1) * nx;
        let mut actions = Vec::with_capacity(ns);
        for b in 0..=self.b_max {
            for x in 0..nx {
                let row = (0..self.y_levels)
                    .map(|y| {
                        if b + y < x {
                            return None;
                        }
                        let b2 = (b + y - x).min(self.b_max);
                        let mut next = vec![0.0; ns];
                        for (x2, p) in self.x_rows[x].iter().enumerate() {
                            next[self.state(b2, x2)] += p;
                        }
                        let yk = y as f64 * self.unit_kw;
                        let d = yk - self.target_kw;
                        Some(ActionSpec {
                            reward: -((1.0 - self.alpha) * yk * self.price + self.alpha * d * d),
                            next,
                        })
                    })
                    .collect();
                actions.push(row);
            }
        }
        let spec = MdpSpec {
            actions,
            discount: self.discount,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl MdpSpec {
    pub fn n_states(&self) -> usize {
        self.actions.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::InvalidParameter(format!("discount {} outside [0, 1)", self.discount)));
        }
        let ns = self.n_states();
        for (s, row) in self.actions.iter().enumerate() {
            if row.iter().all(Option::is_none) {
                return Err(Error::InvalidParameter(format!("state {s} has no available action")));
            }
            for a in row.iter().flatten() {
                if !a.reward.is_finite() {
                    return Err(Error::InvalidParameter(format!("non-finite reward in state {s}")));
                }
                if a.next.len() != ns {
                    return Err(Error::LengthMismatch {
                        expected: ns,
                        found: a.next.len(),
                    });
                }
                check_rows(core::slice::from_ref(&a.next))?;
            }
        }
        Ok(())
    }

    fn q_value(&self, a: &ActionSpec, v: &[f64]) -> f64 {
        a.reward + self.discount * a.next.iter().zip(v).map(|(p, w)| p * w).sum::<f64>()
    }

    fn greedy(&self, v: &[f64]) -> (Vec<usize>, Vec<f64>) {
        self.actions
            .iter()
            .map(|row| {
                let mut best = (usize::MAX, f64::NEG_INFINITY);
                for (i, a) in row.iter().enumerate() {
                    if let Some(a) = a {
                        let q = self.q_value(a, v);
                        if q > best.1 {
                            best = (i, q);
                        }
                    }
                }
                best
            })
            .unzip()
    }

    /// Value of a stationary deterministic policy, by iterating its
    /// Bellman operator to a sup-norm change below `tol`.
    pub fn policy_value(&self, policy: &[usize], tol: f64) -> Result<Vec<f64>> {
        self.validate()?;
        let mut v = vec![0.0; self.n_states()];
        for _ in 0..MAX_SWEEPS {
            let next: Vec<f64> = policy
                .iter()
                .enumerate()
                .map(|(s, a)| {
                    let act = self.actions[s]
                        .get(*a)
                        .and_then(Option::as_ref)
                        .ok_or_else(|| Error::InvalidParameter(format!("action {a} unavailable in state {s}")))?;
                    Ok(self.q_value(act, &v))
                })
                .collect::<Result<_>>()?;
            let delta = sup_diff(&next, &v);
            v = next;
            if delta < tol {
                return Ok(v);
            }
        }
        Err(Error::Solver("policy evaluation did not converge".into()))
    }
}

const MAX_SWEEPS: usize = 10_000_000;

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdpSolution {
    /// Greedy action per state; ties go to the lowest index.
    pub policy: Vec<usize>,
    pub values: Vec<f64>,
    pub iterations: usize,
}

/// Runs value iteration until the sup-norm Bellman residual is below `tol`.
pub fn value_iteration(mdp: &MdpSpec, tol: f64) -> Result<MdpSolution> {
    mdp.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let mut v = vec![0.0; mdp.n_states()];
    for it in 1..=MAX_SWEEPS {
        let (policy, next) = mdp.greedy(&v);
        let residual = sup_diff(&next, &v);
        v = next;
        if residual < tol {
            return Ok(MdpSolution {
                policy,
                values: v,
                iterations: it,
            });
        }
    }
    Err(Error::Solver("value iteration did not converge".into()))
}

/// Schedules for [`q_learning`]. With `n` the visit count of the state (or
/// state-action pair), exploration is `epsilon0 / (n + 1)^epsilon_decay`
/// and the learning rate `1 / (n + 1)^lr_decay`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QLearningParams {
    pub steps: usize,
    /// The walk restarts from a uniformly drawn state after this many
    /// steps.
    pub episode_len: usize,
    pub epsilon0: f64,
    pub epsilon_decay: f64,
    pub lr_decay: f64,
}

impl Default for QLearningParams {
    fn default() -> Self {
        Self {
            steps: 100_000,
            episode_len: 100,
            epsilon0: 1.0,
            epsilon_decay: 0.5,
            lr_decay: 0.6,
        }
    }
}

impl QLearningParams {
    pub fn with_steps(steps: usize) -> Self {
        Self {
            steps,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QLearningOutput {
    pub policy: Vec<usize>,
    /// `q[s][a]`; unavailable actions hold `-inf`.
    pub q: Vec<Vec<f64>>,
}

/// Epsilon-greedy Q-learning driven by samples from `mdp`, which is used
/// only as a simulator.
pub fn q_learning(mdp: &MdpSpec, params: &QLearningParams, seed: u64) -> Result<QLearningOutput> {
    mdp.validate()?;
    if params.episode_len == 0 || !(params.lr_decay > 0.5 && params.lr_decay <= 1.0) {
        return Err(Error::InvalidParameter(
            "episode length must be positive and the learning-rate exponent in (0.5, 1]".into(),
        ));
    }
    let mut rng = rng_from_seed(seed);
    let ns = mdp.n_states();
    let mut q: Vec<Vec<f64>> = mdp
        .actions
        .iter()
        .map(|row| row.iter().map(|a| if a.is_some() { 0.0 } else { f64::NEG_INFINITY }).collect())
        .collect();
    let mut state_visits = vec![0usize; ns];
    let mut pair_visits: Vec<Vec<usize>> = mdp.actions.iter().map(|r| vec![0; r.len()]).collect();
    let argmax = |row: &[f64]| {
        let mut best = 0;
        for (i, v) in row.iter().enumerate() {
            if *v > row[best] {
                best = i;
            }
        }
        best
    };

    let mut s = 0;
    for step in 0..params.steps {
        if step % params.episode_len == 0 {
            s = rng.random_range(0..ns);
        }
        let eps = params.epsilon0 / libm::pow(state_visits[s] as f64 + 1.0, params.epsilon_decay);
        state_visits[s] += 1;
        let a = if rng.random::<f64>() < eps {
            let avail: Vec<usize> = (0..q[s].len()).filter(|a| mdp.actions[s][*a].is_some()).collect();
            avail[rng.random_range(0..avail.len())]
        } else {
            argmax(&q[s])
        };
        let act = mdp.actions[s][a].as_ref().expect("available action");
        let s2 = sample_index(&act.next, &mut rng);
        let target = act.reward + mdp.discount * q[s2][argmax(&q[s2])];
        let lr = 1.0 / libm::pow(pair_visits[s][a] as f64 + 1.0, params.lr_decay);
        pair_visits[s][a] += 1;
        q[s][a] += lr * (target - q[s][a]);
        s = s2;
    }
    Ok(QLearningOutput {
        policy: q.iter().map(|row| argmax(row)).collect(),
        q,
    })
}

/// Mean over states of `(1 - γ)(V*(s) - V^π(s))`: the per-step reward lost
/// by following `policy` instead of the optimum.
pub fn average_cost_gap(mdp: &MdpSpec, optimal: &MdpSolution, policy: &[usize]) -> Result<f64> {
    let v = mdp.policy_value(policy, 1e-10)?;
    let n = v.len() as f64;
    Ok(optimal.values.iter().zip(&v).map(|(a, b)| a - b).sum::<f64>() * (1.0 - mdp.discount) / n)
}

//! Leakage of finite-state policies, estimated from one long realization:
//!
//! ```text
//! I(X;Y) ≈ -(1/n) log p(yⁿ) - (1/n) log p(xⁿ) + (1/n) log p(xⁿ, yⁿ)
//! ```
//!
//! Each probability comes from a normalized forward recursion over the
//! hidden state, so the estimate is stable for very long sequences.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::dist::letter_index;
use crate::math;
use crate::model::{check_rows, sample_index};
use crate::{Error, Result, Rng};

/// Law of the user-load process.
#[derive(Debug, Clone, PartialEq)]
pub enum InputLaw {
    Iid(Vec<f64>),
    /// First-order chain: initial law and transition rows.
    Markov {
        initial: Vec<f64>,
        rows: Vec<Vec<f64>>,
    },
}

impl InputLaw {
    fn size(&self) -> usize {
        match self {
            InputLaw::Iid(p) => p.len(),
            InputLaw::Markov { initial, .. } => initial.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            InputLaw::Iid(p) => check_rows(core::slice::from_ref(p)),
            InputLaw::Markov { initial, rows } => {
                check_rows(core::slice::from_ref(initial))?;
                if rows.len() != initial.len() || rows.iter().any(|r| r.len() != initial.len()) {
                    return Err(Error::InvalidParameter("Markov input rows must be square".into()));
                }
                check_rows(rows)
            }
        }
    }

    fn prob(&self, prev: Option<usize>, x: usize) -> f64 {
        match (self, prev) {
            (InputLaw::Iid(p), _) => p[x],
            (InputLaw::Markov { initial, .. }, None) => initial[x],
            (InputLaw::Markov { rows, .. }, Some(p)) => rows[p][x],
        }
    }

    fn sample(&self, prev: Option<usize>, rng: &mut Rng) -> usize {
        match (self, prev) {
            (InputLaw::Iid(p), _) => sample_index(p, rng),
            (InputLaw::Markov { initial, .. }, None) => sample_index(initial, rng),
            (InputLaw::Markov { rows, .. }, Some(p)) => sample_index(&rows[p], rng),
        }
    }
}

/// One possible outcome of a policy step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub y: usize,
    pub next_state: usize,
    pub prob: f64,
}

/// A policy with finite memory (typically the battery level): in state `s`
/// with input letter `x` it emits `y` and moves to `s'` with probability
/// `kernel[s][x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FsmModel {
    pub inputs: Vec<f64>,
    pub outputs: Vec<f64>,
    pub initial_state: Vec<f64>,
    pub input: InputLaw,
    pub kernel: Vec<Vec<Vec<Transition>>>,
}

impl FsmModel {
    pub fn n_states(&self) -> usize {
        self.initial_state.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (ns, nx) = (self.n_states(), self.inputs.len());
        self.input.validate()?;
        if self.input.size() != nx {
            return Err(Error::LengthMismatch {
                expected: nx,
                found: self.input.size(),
            });
        }
        check_rows(core::slice::from_ref(&self.initial_state))?;
        if self.kernel.len() != ns {
            return Err(Error::LengthMismatch {
                expected: ns,
                found: self.kernel.len(),
            });
        }
        for (s, per_x) in self.kernel.iter().enumerate() {
            if per_x.len() != nx {
                return Err(Error::LengthMismatch {
                    expected: nx,
                    found: per_x.len(),
                });
            }
            for (x, outs) in per_x.iter().enumerate() {
                let mut sum = 0.0;
                for tr in outs {
                    if tr.y >= self.outputs.len() || tr.next_state >= ns || !(tr.prob >= 0.0) {
                        return Err(Error::InvalidParameter(format!(
                            "bad transition from state {s}, input {x}: {tr:?}"
                        )));
                    }
                    sum += tr.prob;
                }
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::NotStochastic { row: s * nx + x, sum });
                }
            }
        }
        Ok(())
    }

    /// Draws `(xⁿ, yⁿ)` from the model.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> (Vec<f64>, Vec<f64>) {
        let mut s = sample_index(&self.initial_state, rng);
        let mut prev = None;
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let x = self.input.sample(prev, rng);
            let outs = &self.kernel[s][x];
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = outs[outs.len() - 1];
            for tr in outs {
                acc += tr.prob;
                if u < acc {
                    pick = *tr;
                    break;
                }
            }
            xs.push(self.inputs[x]);
            ys.push(self.outputs[pick.y]);
            s = pick.next_state;
            prev = Some(x);
        }
        (xs, ys)
    }
}

fn indices(alphabet: &[f64], v: &[f64]) -> Result<Vec<usize>> {
    v.iter()
        .enumerate()
        .map(|(slot, x)| letter_index(alphabet, *x).ok_or(Error::NotInAlphabet { slot, value: *x }))
        .collect()
}

/// Normalizes `alpha` in place and returns the log2 of its mass.
fn renormalize(alpha: &mut [f64], slot: usize) -> Result<f64> {
    let z: f64 = alpha.iter().sum();
    if !(z > 0.0) {
        return Err(Error::ZeroProbability { slot });
    }
    for a in alpha.iter_mut() {
        *a /= z;
    }
    Ok(math::log2(z))
}

/// Log-probabilities (base 2) of `xⁿ`, `yⁿ` and `(xⁿ, yⁿ)` under the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsmLogProbs {
    pub log_px: f64,
    pub log_py: f64,
    pub log_pxy: f64,
}

pub fn fsm_log_probs(x: &[f64], y: &[f64], model: &FsmModel) -> Result<FsmLogProbs> {
    model.validate()?;
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let xi = indices(&model.inputs, x)?;
    let yi = indices(&model.outputs, y).map_err(|e| match e {
        Error::NotInAlphabet { slot, .. } => Error::ZeroProbability { slot },
        e => e,
    })?;
    let ns = model.n_states();
    let nx = model.inputs.len();

    let mut log_px = 0.0;
    for t in 0..xi.len() {
        let p = model.input.prob(t.checked_sub(1).map(|u| xi[u]), xi[t]);
        if !(p > 0.0) {
            return Err(Error::ZeroProbability { slot: t });
        }
        log_px += math::log2(p);
    }

    // Joint: forward over the hidden state with x known.
    let mut alpha = model.initial_state.clone();
    let mut log_pxy = log_px;
    let mut next = vec![0.0; ns];
    for t in 0..xi.len() {
        next.iter_mut().for_each(|v| *v = 0.0);
        for (s, a) in alpha.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for tr in &model.kernel[s][xi[t]] {
                if tr.y == yi[t] {
                    next[tr.next_state] += a * tr.prob;
                }
            }
        }
        core::mem::swap(&mut alpha, &mut next);
        log_pxy += renormalize(&mut alpha, t)?;
    }

    // Output only: forward over (state, last input letter).
    let mut beta = vec![0.0; ns * nx];
    let mut next = vec![0.0; ns * nx];
    let mut log_py = 0.0;
    for t in 0..yi.len() {
        next.iter_mut().for_each(|v| *v = 0.0);
        let step = |s: usize, w: f64, prev: Option<usize>, next: &mut [f64]| {
            for x in 0..nx {
                let px = model.input.prob(prev, x);
                if px == 0.0 {
                    continue;
                }
                for tr in &model.kernel[s][x] {
                    if tr.y == yi[t] {
                        next[tr.next_state * nx + x] += w * px * tr.prob;
                    }
                }
            }
        };
        if t == 0 {
            for (s, w) in model.initial_state.iter().enumerate() {
                if *w > 0.0 {
                    step(s, *w, None, &mut next);
                }
            }
        } else {
            for s in 0..ns {
                for xp in 0..nx {
                    let w = beta[s * nx + xp];
                    if w > 0.0 {
                        step(s, w, Some(xp), &mut next);
                    }
                }
            }
        }
        core::mem::swap(&mut beta, &mut next);
        log_py += renormalize(&mut beta, t)?;
    }
    Ok(FsmLogProbs {
        log_px,
        log_py,
        log_pxy,
    })
}

/// Leakage rate in bits per slot of `(xⁿ, yⁿ)` under `model`.
pub fn empirical_mi_fsm(x: &[f64], y: &[f64], model: &FsmModel) -> Result<f64> {
    let n = x.len();
    if n == 0 {
        return Err(Error::InvalidParameter("empty sequence".into()));
    }
    let lp = fsm_log_probs(x, y, model)?;
    Ok((lp.log_pxy - lp.log_px - lp.log_py) / n as f64)
}

/// Energy-fraction policy: each slot the user load is served from the
/// energy at hand (stored plus freshly generated, up to the peak power) by
/// drawing all, half (rounded down) or none of what could be used, with the
/// given probabilities. Leftover generation is stored up to capacity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyFractionPolicy {
    pub weights: [f64; 3],
}

impl Default for EnergyFractionPolicy {
    fn default() -> Self {
        Self {
            weights: [1.0, 0.0, 0.0],
        }
    }
}

impl EnergyFractionPolicy {
    /// `(draw, probability)` options for `usable` units.
    pub fn options(&self, usable: u32) -> [(u32, f64); 3] {
        [
            (usable, self.weights[0]),
            (usable / 2, self.weights[1]),
            (0, self.weights[2]),
        ]
    }
}

/// Integer-unit battery and renewable system for the energy-fraction
/// policy: user load on `0..=x_max`, generation `e_units` with probability
/// `p_e` (else 0), capacity `b_max` units, peak draw `peak` units.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitSystem {
    pub x_probs: Vec<f64>,
    pub e_units: u32,
    pub p_e: f64,
    pub b_max: u32,
    pub peak: u32,
    pub initial_level: u32,
}

impl UnitSystem {
    /// Next battery level and grid load for one slot.
    pub fn step(&self, x: u32, b: u32, e: u32, draw_of: impl Fn(u32) -> u32) -> (u32, u32) {
        let usable = x.min(b + e).min(self.peak);
        let used = draw_of(usable);
        let y = x - used;
        // Generation is spent first, then the battery.
        let from_battery = used.saturating_sub(e);
        let surplus = e.saturating_sub(used);
        let b_next = (b - from_battery + surplus).min(self.b_max);
        (y, b_next)
    }

    /// Hidden-state model of the policy (state = battery level, generation
    /// unobserved).
    pub fn fsm(&self, policy: &EnergyFractionPolicy) -> Result<FsmModel> {
        if !(0.0..=1.0).contains(&self.p_e) {
            return Err(Error::InvalidParameter(format!("p_e {} outside [0, 1]", self.p_e)));
        }
        let nx = self.x_probs.len();
        let ns = self.b_max as usize + 1;
        let mut kernel = vec![vec![Vec::new(); nx]; ns];
        for b in 0..ns as u32 {
            for x in 0..nx as u32 {
                let mut outs: Vec<Transition> = Vec::new();
                for (e, pe) in [(self.e_units, self.p_e), (0, 1.0 - self.p_e)] {
                    if pe == 0.0 {
                        continue;
                    }
                    let usable = x.min(b + e).min(self.peak);
                    for (draw, w) in policy.options(usable) {
                        if w == 0.0 {
                            continue;
                        }
                        let (y, b2) = self.step(x, b, e, |_| draw);
                        let prob = pe * w;
                        match outs.iter_mut().find(|t| t.y == y as usize && t.next_state == b2 as usize) {
                            Some(t) => t.prob += prob,
                            None => outs.push(Transition {
                                y: y as usize,
                                next_state: b2 as usize,
                                prob,
                            }),
                        }
                    }
                }
                kernel[b as usize][x as usize] = outs;
            }
        }
        let mut initial_state = vec![0.0; ns];
        initial_state[self.initial_level.min(self.b_max) as usize] = 1.0;
        let letters: Vec<f64> = (0..nx).map(|v| v as f64).collect();
        let model = FsmModel {
            inputs: letters.clone(),
            outputs: letters,
            initial_state,
            input: InputLaw::Iid(self.x_probs.clone()),
            kernel,
        };
        model.validate()?;
        Ok(model)
    }

    /// Simulates `n` slots from per-slot uniforms `(u_x, u_e, u_policy)`.
    /// Sharing the uniforms across systems couples their runs.
    pub fn simulate(&self, policy: &EnergyFractionPolicy, uniforms: &[[f64; 3]]) -> (Vec<f64>, Vec<f64>) {
        let mut b = self.initial_level.min(self.b_max);
        let mut xs = Vec::with_capacity(uniforms.len());
        let mut ys = Vec::with_capacity(uniforms.len());
        let cdf = |probs: &[f64], u: f64| {
            let mut acc = 0.0;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    return i;
                }
            }
            probs.len() - 1
        };
        for u in uniforms {
            let x = cdf(&self.x_probs, u[0]) as u32;
            let e = if u[1] < self.p_e { self.e_units } else { 0 };
            let (y, b2) = self.step(x, b, e, |usable| {
                let opts = policy.options(usable);
                let w = [opts[0].1, opts[1].1, opts[2].1];
                opts[cdf(&w, u[2])].0
            });
            xs.push(x as f64);
            ys.push(y as f64);
            b = b2;
        }
        (xs, ys)
    }
}

//! Exact leakage of battery policies on short binary sequences, and the
//! trapdoor-channel upper bound.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result};

/// Longest sequence handled by [`exact_leakage_small_n`].
pub const MAX_EXACT_N: usize = 4;
const MAX_EXACT_LEVELS: usize = 8;

/// Binary battery system in integer units: `X_t, Y_t ∈ {0, 1}`,
/// `B_t ∈ {0..=b_max}`, `B_{t+1} = min(B_t + Y_t - X_t, b_max)` and
/// `B_t + Y_t - X_t >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySystem {
    /// `P(X_t = 1)`, i.i.d. over slots.
    pub p_one: f64,
    /// Law of the initial level over `0..=b_max`.
    pub initial_level: Vec<f64>,
}

impl BinarySystem {
    pub fn b_max(&self) -> usize {
        self.initial_level.len().saturating_sub(1)
    }
}

/// A causal policy rule: probability of `Y_t = 1` given slot `t`, load `x`,
/// level `b` and past grid loads.
pub trait LeakageRule {
    fn prob_one(&self, t: usize, x: u8, b: usize, past: &[u8]) -> f64;
}

impl<F: Fn(usize, u8, usize, &[u8]) -> f64> LeakageRule for F {
    fn prob_one(&self, t: usize, x: u8, b: usize, past: &[u8]) -> f64 {
        self(t, x, b, past)
    }
}

/// Policy with an independent draw of `P(Y_t = 1)` for every
/// `(t, x, b, y^{t-1})`, forced to 1 when `Y_t = 0` would overdraw.
#[derive(Debug, Clone)]
pub struct RandomFeasibleRule {
    table: BTreeMap<(usize, u8, usize, Vec<u8>), f64>,
}

impl RandomFeasibleRule {
    pub fn new(n: usize, b_max: usize, rng: &mut crate::Rng) -> Self {
        use rand::Rng as _;
        let mut table = BTreeMap::new();
        for t in 0..n {
            for hist in 0..(1usize << t) {
                let past: Vec<u8> = (0..t).map(|k| ((hist >> k) & 1) as u8).collect();
                for x in 0..2u8 {
                    for b in 0..=b_max {
                        table.insert((t, x, b, past.clone()), rng.random::<f64>());
                    }
                }
            }
        }
        Self { table }
    }
}

impl LeakageRule for RandomFeasibleRule {
    fn prob_one(&self, t: usize, x: u8, b: usize, past: &[u8]) -> f64 {
        if x as usize > b {
            return 1.0;
        }
        self.table.get(&(t, x, b, past.to_vec())).copied().unwrap_or(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactLeakage {
    /// `I(B_1, X^n; Y^n)`, bits.
    pub total_bits: f64,
    /// `total_bits / n`.
    pub rate: f64,
    /// `Σ_t I(X_t, B_t; Y_t | Y^{t-1})`, bits.
    pub per_slot_sum: f64,
}

impl ExactLeakage {
    /// Whether `total_bits >= per_slot_sum` up to rounding.
    pub fn holds(&self) -> bool {
        self.total_bits >= self.per_slot_sum - 1e-9
    }
}

fn entropy_of<K: Ord>(m: &BTreeMap<K, f64>) -> f64 {
    math::entropy_bits(m.values().copied())
}

fn add<K: Ord>(m: &mut BTreeMap<K, f64>, k: K, p: f64) {
    *m.entry(k).or_insert(0.0) += p;
}

/// Exact leakage by enumerating every `(B_1, x^n, y^n)`.
pub fn exact_leakage_small_n(rule: &impl LeakageRule, system: &BinarySystem, n: usize) -> Result<ExactLeakage> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if n > MAX_EXACT_N || system.initial_level.len() > MAX_EXACT_LEVELS {
        return Err(Error::StateSpaceTooLarge(format!(
            "n = {n}, {} battery levels (limits {MAX_EXACT_N}, {MAX_EXACT_LEVELS})",
            system.initial_level.len()
        )));
    }
    if !(0.0..=1.0).contains(&system.p_one) {
        return Err(Error::InvalidParameter(format!("P(X = 1) = {}", system.p_one)));
    }
    crate::model::check_rows(core::slice::from_ref(&system.initial_level))?;
    let b_max = system.b_max();

    // Joint over (b1, x^n, y^n), plus per-slot joints of (x_t, b_t, y^t).
    let mut joint: BTreeMap<(usize, Vec<u8>, Vec<u8>), f64> = BTreeMap::new();
    let mut slot: Vec<BTreeMap<(u8, usize, Vec<u8>), f64>> = vec![BTreeMap::new(); n];
    for (b1, pb) in system.initial_level.iter().enumerate() {
        if *pb == 0.0 {
            continue;
        }
        // Depth-first over slots: (t, level, x so far, y so far, prob).
        let mut stack = vec![(0usize, b1, Vec::new(), Vec::new(), *pb)];
        while let Some((t, b, xs, ys, p)) = stack.pop() {
            if t == n {
                add(&mut joint, (b1, xs, ys), p);
                continue;
            }
            for x in 0..2u8 {
                let px = if x == 1 { system.p_one } else { 1.0 - system.p_one };
                if px == 0.0 {
                    continue;
                }
                let p1 = rule.prob_one(t, x, b, &ys);
                if !(0.0..=1.0).contains(&p1) {
                    return Err(Error::InvalidParameter(format!("rule returned P(Y=1) = {p1}")));
                }
                for y in 0..2u8 {
                    let py = if y == 1 { p1 } else { 1.0 - p1 };
                    if py == 0.0 {
                        continue;
                    }
                    if (b + y as usize) < x as usize {
                        return Err(Error::Infeasible { slot: t, violation: crate::model::Violation::BatteryEmpty });
                    }
                    let q = p * px * py;
                    let mut y_to = ys.clone();
                    y_to.push(y);
                    add(&mut slot[t], (x, b, y_to.clone()), q);
                    let mut x_to = xs.clone();
                    x_to.push(x);
                    let b_next = (b + y as usize - x as usize).min(b_max);
                    stack.push((t + 1, b_next, x_to, y_to, q));
                }
            }
        }
    }

    // I(U; Y^n) = H(U) + H(Y^n) - H(U, Y^n) with U = (B_1, X^n).
    let mut pu = BTreeMap::new();
    let mut py = BTreeMap::new();
    for ((b1, xs, ys), p) in &joint {
        add(&mut pu, (*b1, xs.clone()), *p);
        add(&mut py, ys.clone(), *p);
    }
    let total = (entropy_of(&pu) + entropy_of(&py) - entropy_of(&joint)).max(0.0);

    // I(X_t,B_t; Y_t | Y^{t-1}) = H(X_t,B_t,Y^{t-1}) + H(Y^t) - H(X_t,B_t,Y^t) - H(Y^{t-1}).
    let mut per_slot = 0.0;
    for m in &slot {
        let mut s_past = BTreeMap::new();
        let mut y_t = BTreeMap::new();
        let mut y_past = BTreeMap::new();
        for ((x, b, ys), p) in m {
            let past = ys[..ys.len() - 1].to_vec();
            add(&mut s_past, (*x, *b, past.clone()), *p);
            add(&mut y_t, ys.clone(), *p);
            add(&mut y_past, past, *p);
        }
        per_slot += (entropy_of(&s_past) + entropy_of(&y_t) - entropy_of(m) - entropy_of(&y_past)).max(0.0);
    }
    Ok(ExactLeakage {
        total_bits: total,
        rate: total / n as f64,
        per_slot_sum: per_slot,
    })
}

/// Leakage-rate upper bound `1 / ⌊(B_max + 1) / X_max⌋` bits per slot for
/// integer-unit battery and load. When `B_max + 1 < X_max` the floor is 0
/// and no bound applies; `f64::INFINITY` is returned.
pub fn trapdoor_bound(b_max_units: u64, x_max_units: u64) -> Result<f64> {
    if x_max_units == 0 {
        return Err(Error::InvalidParameter("X_max must be at least 1 unit".into()));
    }
    let k = (b_max_units + 1) / x_max_units;
    Ok(if k == 0 { f64::INFINITY } else { 1.0 / k as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;

    fn system(p_one: f64, b_max: usize) -> BinarySystem {
        let mut initial_level = vec![0.0; b_max + 1];
        initial_level[b_max] = 1.0;
        BinarySystem { p_one, initial_level }
    }

    #[test]
    fn trapdoor_values() {
        assert_eq!(trapdoor_bound(4, 4).unwrap(), 1.0);
        assert!((trapdoor_bound(9, 2).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(trapdoor_bound(0, 1).unwrap(), 1.0);
        assert!(trapdoor_bound(3, 0).is_err());
        assert_eq!(trapdoor_bound(1, 4).unwrap(), f64::INFINITY);
        let mut prev = f64::INFINITY;
        for b in 0..200 {
            let v = trapdoor_bound(b, 3).unwrap();
            assert!(v <= prev);
            prev = v;
        }
        assert!(prev < 0.02);
    }

    #[test]
    fn constant_output_leaks_nothing() {
        // Always Y = 1: never overdraws.
        let r = exact_leakage_small_n(&|_: usize, _: u8, _: usize, _: &[u8]| 1.0, &system(0.3, 1), 3).unwrap();
        assert!(r.total_bits.abs() < 1e-12 && r.per_slot_sum.abs() < 1e-12);
    }

    #[test]
    fn pass_through_leaks_input_entropy() {
        let p = 0.3;
        let rule = |_: usize, x: u8, _: usize, _: &[u8]| x as f64;
        let hb = -p * libm::log2(p) - (1.0 - p) * libm::log2(1.0 - p);
        for n in 1..=4 {
            let r = exact_leakage_small_n(&rule, &system(p, 2), n).unwrap();
            assert!((r.rate - hb).abs() < 1e-12, "n={n}");
            assert!((r.per_slot_sum - n as f64 * hb).abs() < 1e-12);
        }
    }

    #[test]
    fn random_rules_satisfy_inequality() {
        let sys = BinarySystem {
            p_one: 0.5,
            initial_level: vec![0.5, 0.5],
        };
        for seed in 0..100 {
            let rule = RandomFeasibleRule::new(3, 1, &mut rng_from_seed(seed));
            let r = exact_leakage_small_n(&rule, &sys, 3).unwrap();
            assert!(r.holds(), "seed {seed}: {r:?}");
            assert!(r.total_bits <= 3.0 + 1.0 + 1e-12);
        }
    }

    #[test]
    fn overdraw_is_rejected() {
        let r = exact_leakage_small_n(&|_: usize, _: u8, _: usize, _: &[u8]| 0.0, &system(0.5, 0), 2);
        assert!(matches!(r, Err(Error::Infeasible { slot: 0, .. })));
        assert!(matches!(
            exact_leakage_small_n(&|_: usize, _: u8, _: usize, _: &[u8]| 1.0, &system(0.5, 0), 5),
            Err(Error::StateSpaceTooLarge(_))
        ));
    }
}

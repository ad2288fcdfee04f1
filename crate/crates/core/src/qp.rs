//! Dense convex quadratic programs
//!
//! ```text
//! minimize    ½ zᵀ P z + qᵀ z
//! subject to  G z ≤ h
//! ```
//!
//! solved with a Mehrotra predictor-corrector primal-dual interior point
//! method. Problem sizes here are a few hundred variables at most, so the
//! normal equations are formed densely and factored by Cholesky.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpOptions {
    pub max_iter: usize,
    /// Target for the duality measure `sᵀλ / m` and scaled residuals.
    pub tol: f64,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-11,
        }
    }
}

/// A QP in inequality form. `p` is `n x n` row-major, `g` is `m x n`
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Qp {
    pub n: usize,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub z: Vec<f64>,
    /// Multipliers of `G z ≤ h`.
    pub lambda: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Largest of the stationarity, primal feasibility and complementarity
    /// residuals at the returned point.
    pub kkt_residual: f64,
}

impl Qp {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            p: vec![0.0; n * n],
            q: vec![0.0; n],
            g: Vec::new(),
            h: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.h.len()
    }

    /// Appends the constraint `row · z ≤ rhs`.
    pub fn push_le(&mut self, row: &[f64], rhs: f64) {
        debug_assert_eq!(row.len(), self.n);
        self.g.extend_from_slice(row);
        self.h.push(rhs);
    }

    /// Appends `z[i] ≤ rhs` (or `z[i] ≥ -rhs` with `sign = -1`).
    pub fn push_bound(&mut self, i: usize, sign: f64, rhs: f64) {
        let mut row = vec![0.0; self.n];
        row[i] = sign;
        self.push_le(&row, rhs);
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        let n = self.n;
        let mut f = 0.0;
        for i in 0..n {
            let pz: f64 = (0..n).map(|j| self.p[i * n + j] * z[j]).sum();
            f += 0.5 * z[i] * pz + self.q[i] * z[i];
        }
        f
    }

    /// Max-norm KKT residual of a primal-dual pair.
    pub fn kkt_residual(&self, z: &[f64], lambda: &[f64]) -> f64 {
        let (n, m) = (self.n, self.rows());
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let mut r = self.q[i];
            for j in 0..n {
                r += self.p[i * n + j] * z[j];
            }
            for k in 0..m {
                r += self.g[k * n + i] * lambda[k];
            }
            worst = worst.max(r.abs());
        }
        for k in 0..m {
            let gz: f64 = (0..n).map(|j| self.g[k * n + j] * z[j]).sum();
            let slack = self.h[k] - gz;
            worst = worst.max((-slack).max(0.0));
            worst = worst.max((lambda[k] * slack).abs());
            worst = worst.max((-lambda[k]).max(0.0));
        }
        worst
    }

    pub fn solve(&self, opts: &QpOptions) -> Result<QpSolution> {
        let (n, m) = (self.n, self.rows());
        if self.p.len() != n * n || self.q.len() != n || self.g.len() != m * n {
            return Err(Error::Solver(format!(
                "inconsistent QP dimensions: n={n}, m={m}"
            )));
        }
        let p = DMatrix::from_row_slice(n, n, &self.p);
        let q = DVector::from_column_slice(&self.q);
        let g = DMatrix::from_row_slice(m, n, &self.g);
        let h = DVector::from_column_slice(&self.h);
        if m == 0 {
            return self.unconstrained(&p, &q);
        }

        let scale_q = 1.0 + q.amax();
        let scale_h = 1.0 + h.amax();
        let mut z = DVector::zeros(n);
        let mut s = (&h - &g * &z).map(|v| v.max(1.0));
        let mut lam = DVector::from_element(m, 1.0);
        let reg_base = 1e-12 * (1.0 + p.amax());
        let mut best: Option<(f64, QpSolution)> = None;

        for iter in 0..opts.max_iter {
            let rd = &p * &z + &q + g.transpose() * &lam;
            let rp = &g * &z + &s - &h;
            let mu = s.dot(&lam) / m as f64;
            if mu < opts.tol && rd.amax() < 1e-9 * scale_q && rp.amax() < 1e-9 * scale_h {
                return Ok(self.finish(z, lam, iter));
            }
            let merit = mu.max(rd.amax() / scale_q).max(rp.amax() / scale_h);
            if best.as_ref().map_or(true, |(m, _)| merit < *m) {
                best = Some((merit, self.finish(z.clone(), lam.clone(), iter)));
            }
            if merit < 1e-9 && best.as_ref().is_some_and(|(m, _)| *m < 1e-3 * merit) {
                // Stagnating well after convergence.
                return best_or(best, Error::Solver("stalled".into()));
            }

            let w = lam.component_div(&s);
            let mut gw = g.clone();
            for (k, mut row) in gw.row_iter_mut().enumerate() {
                row *= w[k];
            }
            let kmat = &p + g.transpose() * &gw;
            let Some(chol) = factor(kmat, reg_base) else {
                // Past the attainable accuracy the barrier weights overflow
                // the factorization; fall back to the best point seen.
                return best_or(best, Error::Solver(format!("normal equations lost definiteness at iteration {iter}")));
            };

            let direction = |rc: &DVector<f64>| {
                // Δz from the reduced system, then back-substitute.
                let rhs = -&rd - g.transpose() * (w.component_mul(&rp) - rc.component_div(&s));
                let dz = chol.solve(&rhs);
                let dlam = w.component_mul(&(&g * &dz + &rp)) - rc.component_div(&s);
                let ds = -(rc + s.component_mul(&dlam)).component_div(&lam);
                (dz, ds, dlam)
            };

            // Affine predictor.
            let rc_aff = s.component_mul(&lam);
            let (_, ds_a, dl_a) = direction(&rc_aff);
            let a_aff = max_step(&s, &ds_a).min(max_step(&lam, &dl_a));
            let mu_aff = (&s + a_aff * &ds_a).dot(&(&lam + a_aff * &dl_a)) / m as f64;
            let sigma = { let r = mu_aff / mu; r * r * r }.clamp(0.0, 1.0);

            // Centering corrector.
            let rc = s.component_mul(&lam) + ds_a.component_mul(&dl_a)
                - DVector::from_element(m, sigma * mu);
            let (dz, ds, dl) = direction(&rc);
            let step = (0.99 * max_step(&s, &ds).min(max_step(&lam, &dl))).min(1.0);
            z += step * dz;
            s += step * ds;
            lam += step * dl;
            if !z.iter().all(|v| v.is_finite()) {
                return Err(Error::Solver("iterates diverged".into()));
            }
        }
        best_or(best, Error::Solver(format!("no convergence after {} iterations", opts.max_iter)))
    }

    fn unconstrained(&self, p: &DMatrix<f64>, q: &DVector<f64>) -> Result<QpSolution> {
        let chol = p
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Solver("unconstrained QP is unbounded".into()))?;
        let z = chol.solve(&(-q));
        Ok(self.finish(z, DVector::zeros(0), 0))
    }

    fn finish(&self, z: DVector<f64>, lam: DVector<f64>, iterations: usize) -> QpSolution {
        let z: Vec<f64> = z.iter().copied().collect();
        let lambda: Vec<f64> = lam.iter().copied().collect();
        QpSolution {
            objective: self.objective(&z),
            kkt_residual: self.kkt_residual(&z, &lambda),
            z,
            lambda,
            iterations,
        }
    }
}

/// Accepts a near-converged point rather than failing outright.
fn best_or(best: Option<(f64, QpSolution)>, err: Error) -> Result<QpSolution> {
    match best {
        Some((merit, sol)) if merit < ACCEPT_MERIT => Ok(sol),
        _ => Err(err),
    }
}

const ACCEPT_MERIT: f64 = 1e-7;

/// Cholesky factor of `k + δI`, raising `δ` until the factorization
/// succeeds or the shift would distort the system.
fn factor(k: DMatrix<f64>, reg: f64) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let mut delta = reg;
    while delta < 1e-4 {
        let mut shifted = k.clone();
        for i in 0..shifted.nrows() {
            shifted[(i, i)] += delta;
        }
        if let Some(c) = shifted.cholesky() {
            return Some(c);
        }
        delta *= 100.0;
    }
    None
}

/// Largest `a ≤ 1` keeping `v + a·dv ≥ 0`.
fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(1.0, f64::min)
}

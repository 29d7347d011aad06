//! Damped Newton steps on the dual, used to finish small problems where the
//! alternating updates contract too slowly (small `eps`, few atoms).
//!
//! With `F(u, v) = -dual`, `r = pi 1`, `s = pi^T 1`, the Newton system is
//!
//! ```text
//! [ diag(r)  pi      ] [du]        [r - a]
//! [ pi^T     diag(s) ] [dv] = -eps [s - b]
//! ```
//!
//! Eliminating `du` leaves a graph-Laplacian-like system in `dv` whose null
//! space is the constant shift; fixing the last component of `dv` makes it
//! positive definite. Steps are damped by backtracking on the squared
//! gradient norm, for which the Newton direction is always a descent
//! direction.

use nalgebra::{DMatrix, DVector};
use ndarray::Array1;

use super::solver::Problem;
use crate::scalar::Real;

pub(super) struct NewtonOutcome<T> {
    pub u: Array1<T>,
    pub v: Array1<T>,
    pub steps: usize,
}

struct Marginals {
    /// Plan entries, row-major `n x m`.
    plan: Vec<f64>,
    rows: Vec<f64>,
    cols: Vec<f64>,
}

impl Marginals {
    fn compute<T: Real>(p: &Problem<'_, T>, u: &[f64], v: &[f64]) -> Self {
        let (n, m) = (p.n(), p.m());
        let eps = p.eps.as_f64();
        let mut plan = vec![0.0; n * m];
        let mut rows = vec![0.0; n];
        let mut cols = vec![0.0; m];
        for i in 0..n {
            let c = p.row(i);
            let base = p.log_a[i].as_f64() + u[i] / eps;
            for j in 0..m {
                let x = (base + p.log_b[j].as_f64() + (v[j] - c[j].as_f64()) / eps).exp();
                plan[i * m + j] = x;
                rows[i] += x;
                cols[j] += x;
            }
        }
        Self { plan, rows, cols }
    }

    fn gradient<T: Real>(&self, p: &Problem<'_, T>) -> (Vec<f64>, Vec<f64>) {
        let ga = self.rows.iter().zip(p.a.iter()).map(|(r, a)| r - a.as_f64()).collect();
        let gb = self.cols.iter().zip(p.b.iter()).map(|(s, b)| s - b.as_f64()).collect();
        (ga, gb)
    }

    fn merit<T: Real>(&self, p: &Problem<'_, T>) -> (f64, f64) {
        let (ga, gb) = self.gradient(p);
        let l2 = ga.iter().chain(&gb).map(|g| g * g).sum();
        let l1 = ga.iter().chain(&gb).map(|g| g.abs()).sum();
        (l2, l1)
    }
}

fn direction<T: Real>(p: &Problem<'_, T>, mk: &Marginals) -> Option<(Vec<f64>, Vec<f64>)> {
    let (n, m) = (p.n(), p.m());
    let eps = p.eps.as_f64();
    let (ga, gb) = mk.gradient(p);
    if mk.rows.iter().any(|&r| !(r > 0.0)) || m < 2 {
        return None;
    }
    let k = m - 1;
    let w = DMatrix::from_fn(n, k, |i, j| mk.plan[i * m + j] / mk.rows[i].sqrt());
    let mut schur = -w.tr_mul(&w);
    for j in 0..k {
        schur[(j, j)] += mk.cols[j];
    }
    let mut rhs = DVector::from_fn(k, |j, _| -eps * gb[j]);
    for i in 0..n {
        let scale = eps * ga[i] / mk.rows[i];
        for j in 0..k {
            rhs[j] += mk.plan[i * m + j] * scale;
        }
    }
    let top = (0..k).map(|j| schur[(j, j)]).fold(0.0_f64, f64::max);
    let mut shift = 0.0;
    let dv_head = loop {
        let mut mat = schur.clone();
        for j in 0..k {
            mat[(j, j)] += shift;
        }
        if let Some(ch) = mat.cholesky() {
            break ch.solve(&rhs);
        }
        shift = if shift == 0.0 { 1e-14 * top.max(f64::MIN_POSITIVE) } else { shift * 100.0 };
        if shift > 1e-4 * top {
            return None;
        }
    };
    let mut dv = dv_head.iter().copied().collect::<Vec<_>>();
    dv.push(0.0);
    let du = (0..n)
        .map(|i| {
            let coupling: f64 = (0..m).map(|j| mk.plan[i * m + j] * dv[j]).sum();
            -(eps * ga[i] + coupling) / mk.rows[i]
        })
        .collect();
    Some((du, dv))
}

/// Runs at most `max_steps` damped Newton steps from `(u, v)` and stops once
/// the l1 marginal error is at most `target` or no step makes progress.
pub(super) fn polish<T: Real>(
    p: &Problem<'_, T>,
    u: &Array1<T>,
    v: &Array1<T>,
    target: T,
    max_steps: usize,
) -> NewtonOutcome<T> {
    let mut uf: Vec<f64> = u.iter().map(|x| x.as_f64()).collect();
    let mut vf: Vec<f64> = v.iter().map(|x| x.as_f64()).collect();
    let mut mk = Marginals::compute(p, &uf, &vf);
    let (mut merit, mut l1) = mk.merit(p);
    let mut steps = 0;
    while steps < max_steps && l1 > target.as_f64() {
        let Some((du, dv)) = direction(p, &mk) else { break };
        steps += 1;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let un: Vec<f64> = uf.iter().zip(&du).map(|(x, d)| x + t * d).collect();
            let vn: Vec<f64> = vf.iter().zip(&dv).map(|(x, d)| x + t * d).collect();
            let cand = Marginals::compute(p, &un, &vn);
            let (cm, cl1) = cand.merit(p);
            if cm.is_finite() && cm < (1.0 - 1e-4 * t) * merit {
                uf = un;
                vf = vn;
                mk = cand;
                merit = cm;
                l1 = cl1;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    NewtonOutcome {
        u: uf.into_iter().map(T::lit).collect(),
        v: vf.into_iter().map(T::lit).collect(),
        steps,
    }
}

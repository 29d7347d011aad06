use ndarray::{Array1, Array2};

use super::solver::{solve_symmetric_weights, solve_weights};
use super::{SinkhornConfig, SinkhornResult};
use crate::error::{Error, Result};
use crate::measures::{cost_matrix, DiscreteMeasure, GroundCost};
use crate::scalar::{logsumexp, Real};
use crate::scratch;

/// The three solves behind a normalized divergence.
#[derive(Debug, Clone)]
pub struct DivergenceReport<T> {
    pub value: T,
    pub cross: SinkhornResult<T>,
    pub self_a: SinkhornResult<T>,
    pub self_b: SinkhornResult<T>,
}

impl<T: Real> DivergenceReport<T> {
    pub fn converged(&self) -> bool {
        self.cross.converged && self.self_a.converged && self.self_b.converged
    }

    /// Total iterations over the three solves.
    pub fn iterations(&self) -> usize {
        self.cross.iterations + self.self_a.iterations + self.self_b.iterations
    }
}

fn same_measure<T: Real>(a: &DiscreteMeasure<T>, b: &DiscreteMeasure<T>) -> bool {
    a.points() == b.points() && a.weights() == b.weights()
}

fn self_term<T: Real>(
    cost: &GroundCost<T>,
    a: &DiscreteMeasure<T>,
    cfg: &SinkhornConfig<T>,
) -> Result<SinkhornResult<T>> {
    let c = cost_matrix(cost, a, a)?;
    let res = if cost.is_symmetric() {
        solve_symmetric_weights(&c, a.weights(), cfg)
    } else {
        solve_weights(&c, a.weights(), a.weights(), cfg)
    };
    scratch::recycle(c);
    res
}

/// `W_eps(a, b) - (W_eps(a, a) + W_eps(b, b)) / 2` together with the
/// underlying solver results.
///
/// Self-terms of a symmetric cost use the symmetric fixed point; when `b` is
/// the same measure as `a` the cross term reuses it so the value is exactly 0.
pub fn sinkhorn_divergence_report<T: Real>(
    a: &DiscreteMeasure<T>,
    b: &DiscreteMeasure<T>,
    cost: &GroundCost<T>,
    cfg: &SinkhornConfig<T>,
) -> Result<DivergenceReport<T>> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    cfg.validate()?;
    let self_a = self_term(cost, a, cfg)?;
    if same_measure(a, b) && cost.is_symmetric() {
        return Ok(DivergenceReport {
            value: T::zero(),
            cross: self_a.clone(),
            self_b: self_a.clone(),
            self_a,
        });
    }
    let self_b = self_term(cost, b, cfg)?;
    let c = cost_matrix(cost, a, b)?;
    let cross = solve_weights(&c, a.weights(), b.weights(), cfg);
    scratch::recycle(c);
    let cross = cross?;
    let value = cross.primal_value - T::lit(0.5) * (self_a.primal_value + self_b.primal_value);
    Ok(DivergenceReport { value, cross, self_a, self_b })
}

/// Normalized entropic divergence `W_eps(a, b) - (W_eps(a, a) + W_eps(b, b)) / 2`.
pub fn sinkhorn_divergence<T: Real>(
    a: &DiscreteMeasure<T>,
    b: &DiscreteMeasure<T>,
    cost: &GroundCost<T>,
    cfg: &SinkhornConfig<T>,
) -> Result<T> {
    sinkhorn_divergence_report(a, b, cost, cfg).map(|r| r.value)
}

fn mean_kernel<T: Real, K: Fn(&[T], &[T]) -> T>(
    a: &DiscreteMeasure<T>,
    b: &DiscreteMeasure<T>,
    k: &K,
) -> T {
    let mut total = T::zero();
    for i in 0..a.len() {
        let mut row = T::zero();
        for j in 0..b.len() {
            row += b.weights()[j] * k(a.point(i), b.point(j));
        }
        total += a.weights()[i] * row;
    }
    total
}

/// Squared maximum mean discrepancy (biased V-statistic) for kernel `k`.
///
/// With `k = -c/2` this is the large-`eps` limit of the normalized divergence.
pub fn mmd<T: Real, K: Fn(&[T], &[T]) -> T>(
    a: &DiscreteMeasure<T>,
    b: &DiscreteMeasure<T>,
    k: K,
) -> Result<T> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    Ok(mean_kernel(a, a, &k) + mean_kernel(b, b, &k) - T::lit(2.0) * mean_kernel(a, b, &k))
}

/// `sum_i a_i u_i + sum_j b_j v_j - eps sum_ij a_i b_j e^{(u_i + v_j - C_ij)/eps} + eps`.
///
/// The exponential sum is accumulated in the log domain.
pub fn dual_objective<T: Real>(
    u: &Array1<T>,
    v: &Array1<T>,
    a: &Array1<T>,
    b: &Array1<T>,
    cost: &Array2<T>,
    eps: T,
) -> Result<T> {
    let (n, m) = cost.dim();
    for (len, want) in [(u.len(), n), (a.len(), n), (v.len(), m), (b.len(), m)] {
        if len != want {
            return Err(Error::DimensionMismatch { expected: want, got: len });
        }
    }
    if !(eps > T::zero()) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {eps}")));
    }
    let linear = u.dot(a) + v.dot(b);
    let log_mass = logsumexp((0..n).flat_map(|i| {
        (0..m).map(move |j| {
            if a[i] > T::zero() && b[j] > T::zero() {
                a[i].ln() + b[j].ln() + (u[i] + v[j] - cost[[i, j]]) / eps
            } else {
                T::neg_infinity()
            }
        })
    }));
    Ok(linear - eps * log_mass.exp() + eps)
}

/// `H(pi | a x b) = sum pi_ij log(pi_ij / (a_i b_j))` with `0 log 0 = 0`.
pub fn relative_entropy<T: Real>(plan: &Array2<T>, a: &Array1<T>, b: &Array1<T>) -> Result<T> {
    let (n, m) = plan.dim();
    if a.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.len() });
    }
    if b.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: b.len() });
    }
    let mut h = T::zero();
    for ((i, j), &p) in plan.indexed_iter() {
        if p < T::zero() || !p.is_finite() {
            return Err(Error::InvalidPlan(format!("entry ({i}, {j}) = {p}")));
        }
        if p == T::zero() {
            continue;
        }
        let q = a[i] * b[j];
        if !(q > T::zero()) {
            return Err(Error::InvalidPlan(format!(
                "mass {p} at ({i}, {j}) where the product measure vanishes"
            )));
        }
        h += p * (p / q).ln();
    }
    Ok(h)
}

//! One-dimensional analysis of entropic potentials.
//!
//! A semi-discrete dual extends the discrete potential `v` on the atoms of
//! `beta` to every `x` through the optimality condition
//!
//! ```text
//! u(x) = -eps log sum_j b_j exp((v_j - c(x, y_j)) / eps)
//! ```
//!
//! With `gamma(x, y) = exp((u(x) + v(y) - c(x, y)) / eps)`, so that
//! `sum_j gamma(x, y_j) b_j = 1`, the derivatives follow the recurrence
//!
//! ```text
//! u^(k)(x) = sum_j g_k(x, y_j) gamma(x, y_j) b_j
//! g_1 = c',   g_{k+1} = g_k' + ((u' - c') / eps) g_k
//! ```
//!
//! Everything is evaluated with truncated Taylor series in `x`, so `g_k'` is
//! exact whenever the cost supplies enough analytic derivatives. Otherwise the
//! missing cost derivatives come from Richardson-extrapolated differences and
//! the result records it.

mod jet;
mod quadrature;

pub use quadrature::{Quadrature, DEFAULT_PANELS, DEFAULT_POINTS_PER_PANEL};

use ndarray::Array1;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::measures::{cost_matrix, DiscreteMeasure, Domain, GroundCost};
use crate::rng::stream;
use crate::scalar::{logsumexp, Real};
use crate::sinkhorn::{sinkhorn_solve, SinkhornConfig, SinkhornResult};
use crate::stats::fit_line;
use jet::Jet;

/// How cost derivatives past the closed-form order are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMethod {
    /// Every needed cost derivative is closed-form.
    Analytic,
    /// Orders above `analytic_order` are Richardson-extrapolated central
    /// differences of the highest closed-form derivative.
    Richardson { analytic_order: usize },
}

/// `u` extended from the atoms of a one-dimensional `beta` to the whole line.
#[derive(Debug, Clone)]
pub struct SemiDiscreteDual<T: Real> {
    ys: Vec<T>,
    b: Vec<T>,
    log_b: Vec<T>,
    v: Vec<T>,
    eps: T,
    cost: GroundCost<T>,
    domain: Domain<T>,
}

fn require_1d<T: Real>(m: &DiscreteMeasure<T>) -> Result<()> {
    if m.dim() != 1 {
        return Err(Error::Unsupported(format!(
            "potential derivatives are implemented in one dimension, got d = {}",
            m.dim()
        )));
    }
    Ok(())
}

impl<T: Real> SemiDiscreteDual<T> {
    /// Wraps a potential `v` given on the atoms of `target`.
    pub fn new(target: &DiscreteMeasure<T>, v: Array1<T>, cost: GroundCost<T>, eps: T) -> Result<Self> {
        require_1d(target)?;
        if !(eps > T::zero()) || !eps.is_finite() {
            return Err(invalid(format!("epsilon must be positive, got {eps}")));
        }
        if v.len() != target.len() {
            return Err(Error::DimensionMismatch { expected: target.len(), got: v.len() });
        }
        let kept: Vec<usize> = (0..target.len()).filter(|&j| target.weights()[j] > T::zero()).collect();
        Ok(Self {
            ys: kept.iter().map(|&j| target.point(j)[0]).collect(),
            b: kept.iter().map(|&j| target.weights()[j]).collect(),
            log_b: kept.iter().map(|&j| target.weights()[j].ln()).collect(),
            v: kept.iter().map(|&j| v[j]).collect(),
            eps,
            cost,
            domain: target.domain().clone(),
        })
    }

    pub fn epsilon(&self) -> T {
        self.eps
    }

    pub fn cost(&self) -> &GroundCost<T> {
        &self.cost
    }

    pub fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    /// Length scale used for difference steps: the domain side, or 1.
    pub fn scale(&self) -> T {
        self.domain.sides().next().filter(|s| s.is_finite()).unwrap_or(T::one())
    }

    fn c(&self, x: T, j: usize) -> T {
        self.cost.eval(&[x], &[self.ys[j]])
    }

    pub fn u(&self, x: T) -> T {
        let terms = (0..self.ys.len()).map(|j| self.log_b[j] + (self.v[j] - self.c(x, j)) / self.eps);
        -self.eps * logsumexp(terms)
    }

    /// `gamma(x, y_j)` for every atom.
    pub fn gamma(&self, x: T) -> Vec<T> {
        let u = self.u(x);
        (0..self.ys.len()).map(|j| ((u + self.v[j] - self.c(x, j)) / self.eps).exp()).collect()
    }

    /// `sum_j gamma(x, y_j) b_j`, equal to one by construction.
    pub fn normalization(&self, x: T) -> T {
        self.gamma(x).iter().zip(&self.b).map(|(&g, &b)| g * b).sum()
    }

    /// `[min_j (c(x, y_j) - v_j), max_j (c(x, y_j) - v_j)]`, which contains
    /// `u(x)` because a weighted mean of exponentials lies between their
    /// extremes.
    pub fn envelope(&self, x: T) -> (T, T) {
        (0..self.ys.len())
            .map(|j| self.c(x, j) - self.v[j])
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), z| (lo.min(z), hi.max(z)))
    }

    /// `[min_j (v_j - c(x, y_j)), max_j (v_j - c(x, y_j))]`: the same interval
    /// with the sign of its members flipped. It contains `-u(x)`, not `u(x)`;
    /// kept to report how often `u(x)` happens to fall inside it anyway.
    pub fn flipped_envelope(&self, x: T) -> (T, T) {
        let (lo, hi) = self.envelope(x);
        (-hi, -lo)
    }

    /// Lipschitz constant of the cost on the domain, when known.
    pub fn lipschitz(&self) -> Result<T> {
        self.cost.lipschitz(&self.domain)
    }

    fn method_for(&self, n: usize) -> Result<DerivativeMethod> {
        if n > self.cost.smoothness() {
            return Err(Error::Unsupported(format!(
                "cost has {} derivatives, order {n} requested",
                self.cost.smoothness()
            )));
        }
        let a = self.cost.analytic_order();
        Ok(if n <= a { DerivativeMethod::Analytic } else { DerivativeMethod::Richardson { analytic_order: a } })
    }

    /// `c(x, y), c'(x, y), ..., c^(n)(x, y)` in `x`.
    fn cost_derivatives(&self, x: T, y: T, n: usize) -> Vec<T> {
        let a = self.cost.analytic_order();
        let base = |t: T| self.cost.derivative_1d(t, y, a.min(n)).expect("order within analytic range");
        (0..=n)
            .map(|k| match self.cost.derivative_1d(x, y, k) {
                Some(d) => d,
                None => richardson(&base, x, k - a, self.scale()),
            })
            .collect()
    }

    /// Taylor jets of `gamma(x + h, y_j) b_j` and of `c(x + h, y_j)` to order `n`,
    /// plus `u(x + h)`.
    fn jets(&self, x: T, n: usize) -> (Vec<Jet<T>>, Vec<Jet<T>>, Jet<T>) {
        let inv = -T::one() / self.eps;
        let cj: Vec<Jet<T>> =
            self.ys.iter().map(|&y| Jet::from_derivatives(self.cost_derivatives(x, y, n))).collect();
        let z: Vec<Jet<T>> = cj
            .iter()
            .enumerate()
            .map(|(j, c)| c.scale(inv).shift(self.log_b[j] + self.v[j] / self.eps))
            .collect();
        let top = z.iter().map(|z| z.value()).fold(T::neg_infinity(), T::max);
        let w: Vec<Jet<T>> = z.iter().map(|z| z.shift(-top).exp()).collect();
        let total = w.iter().skip(1).fold(w[0].clone(), |acc, x| &acc + x);
        let weights = w.iter().map(|w| w.div(&total)).collect();
        let u = total.ln().shift(top).scale(-self.eps);
        (weights, cj, u)
    }

    /// `u(x), u'(x), ..., u^(n)(x)` read off the Taylor series of the
    /// log-sum-exp directly, without the recurrence.
    pub fn taylor_derivatives(&self, x: T, n: usize) -> Result<Vec<T>> {
        self.method_for(n)?;
        let (_, _, u) = self.jets(x, n);
        Ok((0..=n).map(|k| u.derivative_at(k)).collect())
    }

    /// First derivative in closed form, `sum_j c'(x, y_j) gamma(x, y_j) b_j`.
    pub fn first_derivative(&self, x: T) -> Result<T> {
        self.method_for(1)?;
        let g = self.gamma(x);
        Ok((0..self.ys.len())
            .map(|j| self.cost_derivatives(x, self.ys[j], 1)[1] * g[j] * self.b[j])
            .sum())
    }
}

/// Central difference of order `k` with step `h`, Richardson-extrapolated once
/// (error `O(h^4)`).
fn richardson<T: Real>(f: &impl Fn(T) -> T, x: T, k: usize, scale: T) -> T {
    if k == 0 {
        return f(x);
    }
    let h = scale * T::epsilon().powf(T::one() / T::from_count(k + 4));
    let diff = |h: T| {
        let mut binom = T::one();
        let mut acc = T::zero();
        for i in 0..=k {
            let offset = T::from_count(k) / T::lit(2.0) - T::from_count(i);
            let sign = if i % 2 == 0 { T::one() } else { -T::one() };
            acc += sign * binom * f(x + offset * h);
            binom = binom * T::from_count(k - i) / T::from_count(i + 1);
        }
        acc / h.powi(k as i32)
    };
    let coarse = diff(h);
    let fine = diff(h / T::lit(2.0));
    (T::lit(4.0) * fine - coarse) / T::lit(3.0)
}

/// Solves the discrete problem between `source` and `target` and extends its
/// `v` to a semi-discrete dual.
pub fn semidiscrete_potential<T: Real>(
    source: &DiscreteMeasure<T>,
    target: &DiscreteMeasure<T>,
    cost: &GroundCost<T>,
    cfg: &SinkhornConfig<T>,
) -> Result<(SemiDiscreteDual<T>, SinkhornResult<T>)> {
    require_1d(source)?;
    require_1d(target)?;
    cfg.validate()?;
    let c = cost_matrix(cost, source, target)?;
    let res = sinkhorn_solve(&c, source, target, cfg)?;
    let dual = SemiDiscreteDual::new(target, res.potentials.v.clone(), cost.clone(), cfg.epsilon)?;
    Ok((dual, res))
}

/// The derivative recurrence of a semi-discrete dual up to a fixed order.
#[derive(Debug, Clone)]
pub struct DerivativeRecurrence<'a, T: Real> {
    dual: &'a SemiDiscreteDual<T>,
    order: usize,
    method: DerivativeMethod,
}

/// Values of the recurrence at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeSample<T> {
    pub x: T,
    pub value: T,
    /// `u^(k)(x)` for `k = 1..=order`.
    pub derivatives: Vec<T>,
    /// `max_j |g_k(x, y_j)|` for `k = 1..=order`.
    pub g_sup: Vec<T>,
}

/// Sup norms of `u^(k)` and `g_k` over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceBounds<T> {
    pub sup_derivative: Vec<T>,
    pub sup_g: Vec<T>,
}

impl<T: Real> RecurrenceBounds<T> {
    /// `|u^(k)|_inf <= |g_k|_inf` for every order, up to rounding.
    pub fn holds(&self) -> bool {
        self.sup_derivative
            .iter()
            .zip(&self.sup_g)
            .all(|(&d, &g)| d <= g * (T::one() + T::lit(1e-12)) + T::lit(1e-300))
    }
}

/// Prepares the recurrence up to order `n`.
pub fn potential_derivative<T: Real>(dual: &SemiDiscreteDual<T>, n: usize) -> Result<DerivativeRecurrence<'_, T>> {
    if n == 0 {
        return Err(invalid("derivative order must be at least 1"));
    }
    let method = dual.method_for(n)?;
    Ok(DerivativeRecurrence { dual, order: n, method })
}

impl<T: Real> DerivativeRecurrence<'_, T> {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn method(&self) -> DerivativeMethod {
        self.method
    }

    pub fn eval(&self, x: T) -> DerivativeSample<T> {
        let n = self.order;
        let eps = self.dual.eps;
        let (weights, cj, u) = self.dual.jets(x, n);
        let dc: Vec<Jet<T>> = cj.iter().map(Jet::derive).collect();
        let first = dc
            .iter()
            .zip(&weights)
            .map(|(d, w)| d * &w.clone().truncate(n))
            .fold(Jet::zeros(n), |acc, t| &acc + &t);
        let mut g = dc.clone();
        let mut derivatives = Vec::with_capacity(n);
        let mut g_sup = Vec::with_capacity(n);
        for k in 1..=n {
            if k > 1 {
                g = g
                    .iter()
                    .zip(&dc)
                    .map(|(gk, dck)| {
                        let drift = (&first - dck).scale(T::one() / eps);
                        &gk.derive() + &(&drift * gk)
                    })
                    .collect();
            }
            derivatives.push(g.iter().zip(&weights).map(|(gk, w)| gk.value() * w.value()).sum());
            g_sup.push(g.iter().map(|gk| gk.value().abs()).fold(T::zero(), T::max));
        }
        DerivativeSample { x, value: u.value(), derivatives, g_sup }
    }

    pub fn bounds_on_grid(&self, grid: &[T]) -> RecurrenceBounds<T> {
        let n = self.order;
        let mut sup_derivative = vec![T::zero(); n];
        let mut sup_g = vec![T::zero(); n];
        for &x in grid {
            let s = self.eval(x);
            for k in 0..n {
                sup_derivative[k] = sup_derivative[k].max(s.derivatives[k].abs());
                sup_g[k] = sup_g[k].max(s.g_sup[k]);
            }
        }
        RecurrenceBounds { sup_derivative, sup_g }
    }
}

/// `|u|_{H^s}` with its per-order contributions.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolevEstimate<T> {
    pub order: usize,
    pub nodes: usize,
    /// `int (u^(k))^2` for `k = 0..=order`.
    pub squared_integrals: Vec<T>,
    pub norm: T,
}

/// `(sum_{k <= s} int (u^(k))^2)^(1/2)` by quadrature; `f(x)` must return at
/// least `u(x), u'(x), ..., u^(s)(x)`.
pub fn sobolev_norm<T: Real>(
    f: impl Fn(T) -> Vec<T> + Sync,
    s: usize,
    quad: &Quadrature<T>,
) -> Result<SobolevEstimate<T>> {
    let rows: Vec<Vec<T>> = quad.nodes().par_iter().map(|&x| f(x)).collect();
    if rows.iter().any(|r| r.len() <= s) {
        return Err(invalid(format!("evaluator returned fewer than {} derivatives", s + 1)));
    }
    let squared_integrals: Vec<T> = (0..=s)
        .map(|k| rows.iter().zip(quad.weights()).map(|(r, &w)| w * r[k] * r[k]).sum())
        .collect();
    let norm = squared_integrals.iter().copied().sum::<T>().sqrt();
    Ok(SobolevEstimate { order: s, nodes: quad.len(), squared_integrals, norm })
}

impl<T: Real> SemiDiscreteDual<T> {
    /// `|u|_{H^s}` over the quadrature interval, derivatives from the
    /// recurrence.
    pub fn sobolev_norm(&self, s: usize, quad: &Quadrature<T>) -> Result<SobolevEstimate<T>> {
        if s == 0 {
            return sobolev_norm(|x| vec![self.u(x)], 0, quad);
        }
        let rec = potential_derivative(self, s)?;
        sobolev_norm(
            |x| {
                let smp = rec.eval(x);
                std::iter::once(smp.value).chain(smp.derivatives).collect()
            },
            s,
            quad,
        )
    }
}

/// A one-dimensional discrete problem whose target potential is extended.
#[derive(Debug, Clone)]
pub struct ScalingInstance<T: Real> {
    pub source: DiscreteMeasure<T>,
    pub target: DiscreteMeasure<T>,
    pub cost: GroundCost<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow<T> {
    pub epsilon: T,
    pub norm: T,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingTable<T> {
    pub order: usize,
    pub rows: Vec<ScalingRow<T>>,
    /// Inclusive `eps` range of the slope fit.
    pub fit_range: (T, T),
    /// Least-squares slope of `log |u|` against `log(1 / eps)` over the fit
    /// range, if it holds at least two rows.
    pub slope: Option<T>,
}

impl<T: Real> ScalingTable<T> {
    pub fn norm_at(&self, eps: T) -> Option<T> {
        self.rows
            .iter()
            .find(|r| ((r.epsilon - eps) / eps).abs() < T::lit(1e-12))
            .map(|r| r.norm)
    }
}

/// `|u|_{H^s}` of the extended potential for every `eps`, with the log-log
/// slope against `1 / eps` over `fit_range`.
pub fn sobolev_scaling_experiment<T: Real>(
    instance: &ScalingInstance<T>,
    epsilons: &[T],
    s: usize,
    fit_range: (T, T),
    quad: &Quadrature<T>,
) -> Result<ScalingTable<T>> {
    if epsilons.is_empty() {
        return Err(invalid("empty epsilon grid"));
    }
    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let cfg = SinkhornConfig::new(eps);
        let (dual, res) = semidiscrete_potential(&instance.source, &instance.target, &instance.cost, &cfg)?;
        let est = dual.sobolev_norm(s, quad)?;
        rows.push(ScalingRow { epsilon: eps, norm: est.norm, converged: res.converged });
    }
    let (xs, ys): (Vec<T>, Vec<T>) = rows
        .iter()
        .filter(|r| r.epsilon >= fit_range.0 && r.epsilon <= fit_range.1 && r.norm > T::zero())
        .map(|r| (-r.epsilon.ln(), r.norm.ln()))
        .unzip();
    let slope = fit_line(&xs, &ys).map(|f| f.slope);
    Ok(ScalingTable { order: s, rows, fit_range, slope })
}

/// Numerical checks of a semi-discrete dual at a set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialCheck<T> {
    pub points: usize,
    /// `max |u' - D1 u| / max |D1 u|`, `D1` the central difference with step
    /// `1e-5` of the domain scale.
    pub first_derivative_error: T,
    /// Same for `u''` from the recurrence against second differences with
    /// step `1e-4` of the domain scale.
    pub second_derivative_error: T,
    pub max_abs_first_derivative: T,
    pub lipschitz: T,
    /// `max (|u(x + h) - u(x)| - L h)` over the sampled pairs.
    pub slope_excess: T,
    pub envelope_violations: usize,
    /// Points where `u(x)` leaves the sign-flipped envelope.
    pub flipped_envelope_violations: usize,
    /// `max |sum_j gamma(x, y_j) b_j - 1|`.
    pub normalization_error: T,
    pub recurrence_bounds: RecurrenceBounds<T>,
}

/// Floor of the denominator in the scale-relative derivative errors.
const SCALE_FLOOR: f64 = 1e-8;

/// Runs every pointwise check at `points` random locations of the domain
/// (which must be bounded).
pub fn check_potential<T: Real>(dual: &SemiDiscreteDual<T>, points: usize, seed: u64) -> Result<PotentialCheck<T>> {
    let lo = dual.domain.lower()[0];
    let hi = dual.domain.upper()[0];
    if !dual.domain.is_bounded() {
        return Err(Error::Unsupported("potential checks sample a bounded domain".into()));
    }
    let lipschitz = dual.lipschitz()?;
    let scale = dual.scale();
    let mut rng = stream(seed, "potential-check", &[]);
    let xs: Vec<T> = (0..points).map(|_| lo + (hi - lo) * T::lit(rng.gen::<f64>())).collect();
    let order = if dual.cost.smoothness() >= 2 { 2 } else { 1 };
    let rec = potential_derivative(dual, order)?;
    let samples: Vec<DerivativeSample<T>> = xs.iter().map(|&x| rec.eval(x)).collect();

    let h1 = scale * T::lit(1e-5);
    let h2 = scale * T::lit(1e-4);
    let fd1: Vec<T> = xs.iter().map(|&x| (dual.u(x + h1) - dual.u(x - h1)) / (T::lit(2.0) * h1)).collect();
    let err1 = samples.iter().zip(&fd1).map(|(s, &d)| (s.derivatives[0] - d).abs()).fold(T::zero(), T::max);
    let sup1 = fd1.iter().map(|d| d.abs()).fold(T::zero(), T::max);
    let first_derivative_error = err1 / sup1.max(T::lit(SCALE_FLOOR));
    let second_derivative_error = if order >= 2 {
        let fd2: Vec<T> = xs
            .iter()
            .map(|&x| (dual.u(x + h2) - T::lit(2.0) * dual.u(x) + dual.u(x - h2)) / (h2 * h2))
            .collect();
        let err = samples.iter().zip(&fd2).map(|(s, &d)| (s.derivatives[1] - d).abs()).fold(T::zero(), T::max);
        let sup = fd2.iter().map(|d| d.abs()).fold(T::zero(), T::max);
        err / sup.max(T::lit(SCALE_FLOOR))
    } else {
        T::nan()
    };
    let max_abs_first_derivative = samples.iter().map(|s| s.derivatives[0].abs()).fold(T::zero(), T::max);

    let mut slope_excess = T::neg_infinity();
    let mut envelope_violations = 0;
    let mut flipped_envelope_violations = 0;
    let mut normalization_error = T::zero();
    let tol = T::lit(1e-12) * (T::one() + lipschitz * scale);
    for &x in &xs {
        let h = (hi - lo) * T::lit(rng.gen::<f64>()) * T::lit(0.1);
        let x0 = x.min(hi - h);
        slope_excess = slope_excess.max((dual.u(x0 + h) - dual.u(x0)).abs() - lipschitz * h);
        let u = dual.u(x);
        let (a, b) = dual.envelope(x);
        if u < a - tol || u > b + tol {
            envelope_violations += 1;
        }
        let (fa, fb) = dual.flipped_envelope(x);
        if u < fa - tol || u > fb + tol {
            flipped_envelope_violations += 1;
        }
        normalization_error = normalization_error.max((dual.normalization(x) - T::one()).abs());
    }
    Ok(PotentialCheck {
        points,
        first_derivative_error,
        second_derivative_error,
        max_abs_first_derivative,
        lipschitz,
        slope_excess,
        envelope_violations,
        flipped_envelope_violations,
        normalization_error,
        recurrence_bounds: rec.bounds_on_grid(&xs),
    })
}

//! Matérn kernels, kernel-SGD on the entropic dual, Rademacher complexity of
//! RKHS balls and the constants of the sample-complexity bound.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::WeightedAliasIndex;

use crate::error::{invalid, Error, Result};
use crate::measures::{cost_matrix, DiscreteMeasure, Domain, GroundCost, Sampler};
use crate::rng::stream;
use crate::scalar::Real;

/// Half-integer Matérn smoothness with a closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Smoothness {
    Half,
    ThreeHalves,
    FiveHalves,
}

impl Smoothness {
    pub fn from_nu(nu: f64) -> Result<Self> {
        match nu {
            x if x == 0.5 => Ok(Self::Half),
            x if x == 1.5 => Ok(Self::ThreeHalves),
            x if x == 2.5 => Ok(Self::FiveHalves),
            _ => Err(Error::Unsupported(format!("Matérn smoothness {nu} has no closed form here"))),
        }
    }

    pub fn nu(self) -> f64 {
        match self {
            Self::Half => 0.5,
            Self::ThreeHalves => 1.5,
            Self::FiveHalves => 2.5,
        }
    }

    /// Kernel for the Sobolev order `floor(d/2) + 1`: the exact match
    /// `nu = s - d/2` for odd `d`, and `nu = 3/2` for even `d`, where the
    /// exact `nu = 1` would need a Bessel function.
    pub fn for_dimension(d: usize) -> Self {
        if d % 2 == 1 {
            Self::Half
        } else {
            Self::ThreeHalves
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaternKernel<T> {
    pub smoothness: Smoothness,
    pub lengthscale: T,
    pub variance: T,
}

impl<T: Real> MaternKernel<T> {
    pub fn new(smoothness: Smoothness, lengthscale: T, variance: T) -> Result<Self> {
        if !(lengthscale > T::zero()) || !(variance > T::zero()) {
            return Err(invalid("Matérn lengthscale and variance must be positive"));
        }
        Ok(Self { smoothness, lengthscale, variance })
    }

    /// `k(0, 0)`.
    pub fn diagonal(&self) -> T {
        self.variance
    }

    /// Sobolev order `nu + d/2` of the reproduced space.
    pub fn sobolev_order(&self, d: usize) -> f64 {
        self.smoothness.nu() + d as f64 / 2.0
    }

    /// Value at distance `r`.
    pub fn at_distance(&self, r: T) -> T {
        let t = r / self.lengthscale;
        let s = self.variance;
        match self.smoothness {
            Smoothness::Half => s * (-t).exp(),
            Smoothness::ThreeHalves => {
                let z = T::lit(3f64.sqrt()) * t;
                s * (T::one() + z) * (-z).exp()
            }
            Smoothness::FiveHalves => {
                let z = T::lit(5f64.sqrt()) * t;
                s * (T::one() + z + z * z / T::lit(3.0)) * (-z).exp()
            }
        }
    }

    pub fn eval(&self, x: &[T], y: &[T]) -> T {
        let r2: T = x.iter().zip(y).map(|(&a, &b)| (a - b) * (a - b)).sum();
        self.at_distance(r2.sqrt())
    }

    /// Gram matrix between the rows of `xs` and `ys`.
    pub fn gram(&self, xs: &Array2<T>, ys: &Array2<T>) -> Array2<T> {
        let (xs, ys) = (xs.as_standard_layout(), ys.as_standard_layout());
        let d = xs.ncols().max(1);
        let xr: Vec<&[T]> = xs.as_slice().expect("standard layout").chunks_exact(d).collect();
        let yr: Vec<&[T]> = ys.as_slice().expect("standard layout").chunks_exact(d).collect();
        Array2::from_shape_fn((xr.len(), yr.len()), |(i, j)| self.eval(xr[i], yr[j]))
    }
}

/// `k(x, y)`.
pub fn matern_eval<T: Real>(kernel: &MaternKernel<T>, x: &[T], y: &[T]) -> T {
    kernel.eval(x, y)
}

/// `f = sum_i coeff_i k(x_i, .)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelExpansion<T> {
    pub kernel: MaternKernel<T>,
    dim: usize,
    centers: Vec<T>,
    pub coefficients: Vec<T>,
}

impl<T: Real> KernelExpansion<T> {
    pub fn new(kernel: MaternKernel<T>, dim: usize) -> Self {
        Self { kernel, dim, centers: Vec::new(), coefficients: Vec::new() }
    }

    pub fn with_centers(kernel: MaternKernel<T>, centers: &Array2<T>, coefficients: Vec<T>) -> Result<Self> {
        if coefficients.len() != centers.nrows() {
            return Err(Error::DimensionMismatch { expected: centers.nrows(), got: coefficients.len() });
        }
        Ok(Self {
            kernel,
            dim: centers.ncols(),
            centers: centers.iter().copied().collect(),
            coefficients,
        })
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn center(&self, i: usize) -> &[T] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    pub fn push(&mut self, x: &[T], coefficient: T) {
        self.centers.extend_from_slice(x);
        self.coefficients.push(coefficient);
    }

    pub fn eval(&self, x: &[T]) -> T {
        (0..self.len()).map(|i| self.coefficients[i] * self.kernel.eval(self.center(i), x)).sum()
    }

    /// `coeff^T Gram coeff`, clipped at zero against rounding.
    pub fn norm_squared(&self) -> T {
        let mut acc = T::zero();
        for i in 0..self.len() {
            let mut row = T::zero();
            for j in 0..self.len() {
                row += self.coefficients[j] * self.kernel.eval(self.center(i), self.center(j));
            }
            acc += self.coefficients[i] * row;
        }
        acc.max(T::zero())
    }

    pub fn norm(&self) -> T {
        self.norm_squared().sqrt()
    }

    /// Rescales onto the ball of radius `radius` if outside it.
    pub fn project(&mut self, radius: T) {
        let n = self.norm();
        if n > radius {
            let s = if n > T::zero() { radius / n } else { T::zero() };
            self.coefficients.iter_mut().for_each(|c| *c *= s);
        }
    }
}

/// RKHS norm of the minimum-norm interpolant of `values` at the rows of
/// `points`, with a ridge `ridge * trace / n` added for conditioning.
pub fn interpolant_norm<T: Real>(kernel: &MaternKernel<T>, points: &Array2<T>, values: &[T], ridge: T) -> Result<T> {
    let n = points.nrows();
    if values.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: values.len() });
    }
    let g = kernel.gram(points, points);
    let gm = DMatrix::from_fn(n, n, |i, j| g[[i, j]].as_f64());
    let trace = gm.trace();
    let mut reg = gm.clone();
    for i in 0..n {
        reg[(i, i)] += ridge.as_f64() * trace / n as f64;
    }
    let ch = reg.cholesky().ok_or_else(|| invalid("Gram matrix is not positive definite"))?;
    let y = DVector::from_iterator(n, values.iter().map(|v| v.as_f64()));
    let alpha = ch.solve(&y);
    let sq = alpha.dot(&(&gm * &alpha)).max(0.0);
    Ok(T::lit(sq.sqrt()))
}

/// Radius `2 max(|u|, |v|)` from the interpolants of Sinkhorn potentials.
pub fn calibrate_lambda<T: Real>(
    kernel: &MaternKernel<T>,
    a: &DiscreteMeasure<T>,
    u: &[T],
    b: &DiscreteMeasure<T>,
    v: &[T],
) -> Result<T> {
    let ridge = T::lit(LAMBDA_RIDGE);
    let nu = interpolant_norm(kernel, a.points(), u, ridge)?;
    let nv = interpolant_norm(kernel, b.points(), v, ridge)?;
    Ok(T::lit(LAMBDA_SAFETY) * nu.max(nv))
}

pub const LAMBDA_SAFETY: f64 = 2.0;
pub const LAMBDA_RIDGE: f64 = 1e-10;

/// Where the pairs `(x_t, y_t)` come from.
#[derive(Debug, Clone)]
pub enum SgdData<'a, T: Real> {
    /// Atoms drawn from `a x b`; one coefficient per atom.
    Discrete { a: &'a DiscreteMeasure<T>, b: &'a DiscreteMeasure<T> },
    /// Fresh points from each sampler at every step; one center per draw.
    /// Evaluating the expansion makes a run quadratic in the budget.
    Sampled { alpha: &'a Sampler<T>, beta: &'a Sampler<T> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig<T> {
    pub epsilon: T,
    /// Radius of the RKHS ball both potentials are projected onto.
    pub lambda: T,
    /// Step `theta / (theta0 + sqrt(t))`.
    pub theta: T,
    pub theta0: T,
    pub iterations: usize,
    /// Spacing of trace entries.
    pub trace_every: usize,
    /// Iterates are averaged from this fraction of the budget on.
    pub average_from: f64,
    pub seed: u64,
}

impl<T: Real> SgdConfig<T> {
    pub fn new(epsilon: T, lambda: T) -> Self {
        Self {
            epsilon,
            lambda,
            theta: T::one(),
            theta0: T::one(),
            iterations: 100_000,
            trace_every: 1000,
            average_from: 0.5,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > T::zero()) || !self.epsilon.is_finite() {
            return Err(invalid("epsilon must be positive"));
        }
        if !(self.lambda >= T::zero()) {
            return Err(invalid("ball radius must be nonnegative"));
        }
        if !(self.theta > T::zero()) || !(self.theta0 >= T::zero()) {
            return Err(invalid("step schedule needs theta > 0 and theta0 >= 0"));
        }
        if self.iterations == 0 || self.trace_every == 0 {
            return Err(invalid("iteration budget and trace spacing must be positive"));
        }
        if !(0.0..1.0).contains(&self.average_from) {
            return Err(invalid("average_from must lie in [0, 1)"));
        }
        Ok(())
    }

    fn step(&self, t: usize) -> T {
        self.theta / (self.theta0 + T::from_count(t).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint<T> {
    pub iteration: usize,
    /// Exact dual objective at the current iterate for discrete data, the
    /// mean of the sampled integrand since the previous entry otherwise.
    pub objective: T,
}

#[derive(Debug, Clone)]
pub struct SgdOutcome<T> {
    pub u: KernelExpansion<T>,
    pub v: KernelExpansion<T>,
    pub trace: Vec<TracePoint<T>>,
    /// Dual objective of the averaged iterate (discrete data) or the mean
    /// integrand over the averaging window (sampled data).
    pub dual_value: T,
    pub diverged: bool,
    pub iterations: usize,
}

/// `u + v - eps exp((u + v - c) / eps)`, the integrand of the dual without
/// its constant `+eps`.
fn integrand<T: Real>(u: T, v: T, c: T, eps: T) -> T {
    u + v - eps * ((u + v - c) / eps).exp()
}

/// Dual objective at potential values on the atoms.
pub fn dual_at<T: Real>(u: &[T], v: &[T], a: &[T], b: &[T], cost: &Array2<T>, eps: T) -> T {
    let mut acc = T::zero();
    for i in 0..u.len() {
        for j in 0..v.len() {
            acc += a[i] * b[j] * integrand(u[i], v[j], cost[[i, j]], eps);
        }
    }
    acc + eps
}

/// Stochastic functional ascent on `E[u(x) + v(y) - eps e^{(u+v-c)/eps}] + eps`
/// over the RKHS ball of radius `lambda`, starting from `u = v = 0`.
pub fn kernel_sgd_dual<T: Real>(
    data: SgdData<'_, T>,
    cost: &GroundCost<T>,
    kernel: &MaternKernel<T>,
    cfg: &SgdConfig<T>,
) -> Result<SgdOutcome<T>> {
    cfg.validate()?;
    match data {
        SgdData::Discrete { a, b } => sgd_discrete(a, b, cost, kernel, cfg),
        SgdData::Sampled { alpha, beta } => sgd_sampled(alpha, beta, cost, kernel, cfg),
    }
}

/// Coefficients on fixed centers with the values at the centers and the
/// squared norm maintained incrementally.
struct Tracked<T> {
    gram: Array2<T>,
    coeff: Vec<T>,
    values: Vec<T>,
    norm2: T,
}

impl<T: Real> Tracked<T> {
    fn new(gram: Array2<T>) -> Self {
        let n = gram.nrows();
        Self { gram, coeff: vec![T::zero(); n], values: vec![T::zero(); n], norm2: T::zero() }
    }

    fn add(&mut self, i: usize, delta: T) {
        self.norm2 += T::lit(2.0) * delta * self.values[i] + delta * delta * self.gram[[i, i]];
        self.coeff[i] += delta;
        for (v, &g) in self.values.iter_mut().zip(self.gram.column(i)) {
            *v += delta * g;
        }
    }

    fn project(&mut self, radius: T) {
        let n2 = self.norm2.max(T::zero());
        if n2 > radius * radius {
            let s = if n2 > T::zero() { radius / n2.sqrt() } else { T::zero() };
            self.coeff.iter_mut().for_each(|c| *c *= s);
            self.values.iter_mut().for_each(|c| *c *= s);
            self.norm2 = radius * radius;
        }
    }
}

fn sgd_discrete<T: Real>(
    a: &DiscreteMeasure<T>,
    b: &DiscreteMeasure<T>,
    cost: &GroundCost<T>,
    kernel: &MaternKernel<T>,
    cfg: &SgdConfig<T>,
) -> Result<SgdOutcome<T>> {
    let c = cost_matrix(cost, a, b)?;
    let eps = cfg.epsilon;
    let draw_a = WeightedAliasIndex::new(a.weights().iter().map(|w| w.as_f64()).collect())
        .map_err(|e| invalid(format!("source weights: {e}")))?;
    let draw_b = WeightedAliasIndex::new(b.weights().iter().map(|w| w.as_f64()).collect())
        .map_err(|e| invalid(format!("target weights: {e}")))?;
    let mut rng = stream(cfg.seed, "kernel-sgd", &[]);
    let mut u = Tracked::new(kernel.gram(a.points(), a.points()));
    let mut v = Tracked::new(kernel.gram(b.points(), b.points()));
    let start = ((cfg.iterations as f64) * cfg.average_from) as usize;
    let mut avg_u = vec![T::zero(); a.len()];
    let mut avg_v = vec![T::zero(); b.len()];
    let mut avg_cu = vec![T::zero(); a.len()];
    let mut avg_cv = vec![T::zero(); b.len()];
    let mut averaged = 0usize;
    let objective =
        |u: &[T], v: &[T]| dual_at(u, v, a.weights().as_slice().unwrap(), b.weights().as_slice().unwrap(), &c, eps);
    let mut trace = Vec::new();
    let mut diverged = false;
    let mut done = 0;
    for t in 1..=cfg.iterations {
        let i = rng.sample(&draw_a);
        let j = rng.sample(&draw_b);
        let g = T::one() - ((u.values[i] + v.values[j] - c[[i, j]]) / eps).exp();
        let delta = cfg.step(t) * g;
        if !delta.is_finite() {
            diverged = true;
            break;
        }
        u.add(i, delta);
        v.add(j, delta);
        u.project(cfg.lambda);
        v.project(cfg.lambda);
        done = t;
        if t > start {
            averaged += 1;
            let w = T::one() / T::from_count(averaged);
            for (m, &x) in avg_u.iter_mut().zip(&u.values) {
                *m += w * (x - *m);
            }
            for (m, &x) in avg_v.iter_mut().zip(&v.values) {
                *m += w * (x - *m);
            }
            for (m, &x) in avg_cu.iter_mut().zip(&u.coeff) {
                *m += w * (x - *m);
            }
            for (m, &x) in avg_cv.iter_mut().zip(&v.coeff) {
                *m += w * (x - *m);
            }
        }
        if t % cfg.trace_every == 0 || t == cfg.iterations {
            let obj = objective(&u.values, &v.values);
            trace.push(TracePoint { iteration: t, objective: obj });
            if !obj.is_finite() {
                diverged = true;
                break;
            }
        }
    }
    let (cu, cv, dual_value) = if averaged > 0 && !diverged {
        let val = objective(&avg_u, &avg_v);
        (avg_cu, avg_cv, val)
    } else {
        let val = objective(&u.values, &v.values);
        (u.coeff, v.coeff, val)
    };
    Ok(SgdOutcome {
        u: KernelExpansion::with_centers(*kernel, a.points(), cu)?,
        v: KernelExpansion::with_centers(*kernel, b.points(), cv)?,
        trace,
        dual_value,
        diverged: diverged || !dual_value.is_finite(),
        iterations: done,
    })
}

fn sgd_sampled<T: Real>(
    alpha: &Sampler<T>,
    beta: &Sampler<T>,
    cost: &GroundCost<T>,
    kernel: &MaternKernel<T>,
    cfg: &SgdConfig<T>,
) -> Result<SgdOutcome<T>> {
    let n = cfg.iterations;
    let xs = alpha.with_seed(crate::rng::derive_seed(cfg.seed, "kernel-sgd-x", &[])).sample(n)?;
    let ys = beta.with_seed(crate::rng::derive_seed(cfg.seed, "kernel-sgd-y", &[])).sample(n)?;
    if xs.dim() != ys.dim() {
        return Err(Error::DimensionMismatch { expected: xs.dim(), got: ys.dim() });
    }
    let eps = cfg.epsilon;
    let mut u = KernelExpansion::new(*kernel, xs.dim());
    let mut v = KernelExpansion::new(*kernel, ys.dim());
    let (mut nu2, mut nv2) = (T::zero(), T::zero());
    let start = ((n as f64) * cfg.average_from) as usize;
    let mut window = (T::zero(), 0usize);
    let mut tail = (T::zero(), 0usize);
    let mut trace = Vec::new();
    let mut diverged = false;
    let mut done = 0;
    for t in 1..=n {
        let (x, y) = (xs.point(t - 1), ys.point(t - 1));
        let (ux, vy) = (u.eval(x), v.eval(y));
        let c = cost.eval(x, y);
        let f = integrand(ux, vy, c, eps) + eps;
        window = (window.0 + f, window.1 + 1);
        if t > start {
            tail = (tail.0 + f, tail.1 + 1);
        }
        let delta = cfg.step(t) * (T::one() - ((ux + vy - c) / eps).exp());
        if !delta.is_finite() || !f.is_finite() {
            diverged = true;
            break;
        }
        let k = kernel.diagonal();
        nu2 += T::lit(2.0) * delta * ux + delta * delta * k;
        nv2 += T::lit(2.0) * delta * vy + delta * delta * k;
        u.push(x, delta);
        v.push(y, delta);
        for (exp, n2) in [(&mut u, &mut nu2), (&mut v, &mut nv2)] {
            if *n2 > cfg.lambda * cfg.lambda {
                let s = if *n2 > T::zero() { cfg.lambda / n2.sqrt() } else { T::zero() };
                exp.coefficients.iter_mut().for_each(|c| *c *= s);
                *n2 = cfg.lambda * cfg.lambda;
            }
        }
        done = t;
        if t % cfg.trace_every == 0 || t == n {
            trace.push(TracePoint { iteration: t, objective: window.0 / T::from_count(window.1) });
            window = (T::zero(), 0);
        }
    }
    let dual_value = if tail.1 > 0 { tail.0 / T::from_count(tail.1) } else { T::nan() };
    Ok(SgdOutcome { u, v, trace, dual_value, diverged: diverged || !dual_value.is_finite(), iterations: done })
}

/// Window means of a trace, for checking that it rises.
pub fn smoothed_trace<T: Real>(trace: &[TracePoint<T>], window: usize) -> Vec<T> {
    trace
        .chunks(window.max(1))
        .map(|c| c.iter().map(|p| p.objective).sum::<T>() / T::from_count(c.len()))
        .collect()
}

/// `(lambda / n) sqrt(sum_i k(x_i, x_i))`.
pub fn rademacher_bound<T: Real>(lambda: T, samples: &Array2<T>, kernel: &MaternKernel<T>) -> Result<T> {
    let n = samples.nrows();
    if n == 0 {
        return Err(invalid("need at least one sample"));
    }
    let diag: T = (0..n)
        .map(|i| {
            let x = samples.row(i).to_vec();
            kernel.eval(&x, &x)
        })
        .sum();
    Ok(lambda / T::from_count(n) * diag.sqrt())
}

/// Monte-Carlo estimate of the empirical Rademacher complexity of the ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RademacherEstimate<T> {
    pub mean: T,
    pub std_error: T,
    pub draws: usize,
}

/// Mean over sign vectors `sigma` of `(lambda / n) sqrt(sigma^T Gram sigma)`,
/// the exact supremum over the ball for each draw.
pub fn rademacher_mc<T: Real>(
    lambda: T,
    samples: &Array2<T>,
    kernel: &MaternKernel<T>,
    draws: usize,
    seed: u64,
) -> Result<RademacherEstimate<T>> {
    let n = samples.nrows();
    if n == 0 || draws == 0 {
        return Err(invalid("need at least one sample and one draw"));
    }
    let g = kernel.gram(samples, samples);
    let mut rng = stream(seed, "rademacher", &[]);
    let signs = [T::one(), -T::one()];
    let vals: Vec<T> = (0..draws)
        .map(|_| {
            let s: Vec<T> = (0..n).map(|_| *signs.choose(&mut rng).expect("nonempty")).collect();
            let mut q = T::zero();
            for i in 0..n {
                let row: T = (0..n).map(|j| g[[i, j]] * s[j]).sum();
                q += s[i] * row;
            }
            lambda / T::from_count(n) * q.max(T::zero()).sqrt()
        })
        .collect();
    let mean = crate::stats::mean(&vals);
    let sd = crate::stats::std_dev(&vals);
    Ok(RademacherEstimate { mean, std_error: sd / T::from_count(draws).sqrt(), draws })
}

/// Which `eps`-scaling of the ball radius to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaRule {
    /// `max(1, eps^{-(s-1)})`, `s = floor(d/2) + 1`.
    SobolevOrder,
    /// `max(1, eps^{-d/2})`.
    HalfDimension,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryConstants<T> {
    pub epsilon: T,
    pub dim: usize,
    pub lipschitz: T,
    /// Domain diameter `|X|`.
    pub diameter: T,
    pub sup_cost: T,
    /// `2 L |X| + |c|_inf`.
    pub kappa: T,
    /// `1 + exp(2 (L |X| + |c|_inf) / eps)`.
    pub b_bound: T,
    /// `kappa + eps exp(kappa / eps)`.
    pub c_bound: T,
    /// `k(0, 0)`.
    pub kernel_diagonal: T,
    /// `floor(d/2) + 1`.
    pub sobolev_order: usize,
}

pub fn theory_constants<T: Real>(
    domain: &Domain<T>,
    cost: &GroundCost<T>,
    eps: T,
    kernel: &MaternKernel<T>,
) -> Result<TheoryConstants<T>> {
    if !(eps > T::zero()) {
        return Err(invalid("epsilon must be positive"));
    }
    let diameter = domain
        .diameter()
        .ok_or_else(|| Error::Unsupported("constants need a bounded domain".into()))?;
    let lipschitz = cost.lipschitz(domain)?;
    let sup_cost = cost.sup_norm(domain)?;
    let two = T::lit(2.0);
    let kappa = two * lipschitz * diameter + sup_cost;
    Ok(TheoryConstants {
        epsilon: eps,
        dim: domain.dim(),
        lipschitz,
        diameter,
        sup_cost,
        kappa,
        b_bound: T::one() + (two * (lipschitz * diameter + sup_cost) / eps).exp(),
        c_bound: kappa + eps * (kappa / eps).exp(),
        kernel_diagonal: kernel.diagonal(),
        sobolev_order: domain.dim() / 2 + 1,
    })
}

impl<T: Real> TheoryConstants<T> {
    pub fn lambda_scale(&self, rule: LambdaRule) -> T {
        let power = match rule {
            LambdaRule::SobolevOrder => T::from_count(self.sobolev_order - 1),
            LambdaRule::HalfDimension => T::from_count(self.dim) / T::lit(2.0),
        };
        T::one().max(self.epsilon.powf(-power))
    }

    /// `6 B lambda K / sqrt(n)`, an upper envelope rather than a sharp rate.
    pub fn theorem3_rate(&self, n: usize, lambda: T) -> T {
        T::lit(6.0) * self.b_bound * lambda * self.kernel_diagonal / T::from_count(n).sqrt()
    }

    /// `C sqrt(2 log(1/delta) / n)`.
    pub fn deviation_radius(&self, n: usize, delta: T) -> T {
        self.c_bound * (T::lit(2.0) * (T::one() / delta).ln() / T::from_count(n)).sqrt()
    }

    /// `6 B lambda K / sqrt(n) + C sqrt(2 log(1/delta) / n)`.
    pub fn concentration_bound(&self, n: usize, delta: T, lambda: T) -> T {
        self.theorem3_rate(n, lambda) + self.deviation_radius(n, delta)
    }

    /// `|1 - exp((u + v - c) / eps)| <= B` whenever `u + v <= 2 L |X| + |c|_inf`
    /// and `|c| <= |c|_inf`.
    pub fn gradient_certificate(&self, u_plus_v: T, c: T) -> bool {
        (T::one() - ((u_plus_v - c) / self.epsilon).exp()).abs() <= self.b_bound * (T::one() + T::lit(1e-12))
    }
}

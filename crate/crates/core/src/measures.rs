//! Domains, ground costs, discrete measures and samplers.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::scalar::Real;

/// Tolerance on `sum(weights) == 1`.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// A subset of `R^d`: either an axis-aligned box or all of `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain<T> {
    lower: Vec<T>,
    upper: Vec<T>,
    bounded: bool,
}

impl<T: Real> Domain<T> {
    /// Box `prod_k [lower_k, upper_k]`.
    pub fn new_box(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.is_empty() {
            return Err(invalid("domain dimension must be at least 1"));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), got: upper.len() });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return Err(invalid("box intervals must be finite and non-degenerate"));
        }
        Ok(Self { lower, upper, bounded: true })
    }

    /// `[0, side]^d`.
    pub fn hypercube(d: usize, side: T) -> Result<Self> {
        Self::new_box(vec![T::zero(); d], vec![side; d])
    }

    /// `[0, 1]^d`.
    pub fn unit_cube(d: usize) -> Result<Self> {
        Self::hypercube(d, T::one())
    }

    /// `[lo, hi]` in one dimension.
    pub fn interval(lo: T, hi: T) -> Result<Self> {
        Self::new_box(vec![lo], vec![hi])
    }

    /// All of `R^d` (support of a Gaussian).
    pub fn unbounded(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(invalid("domain dimension must be at least 1"));
        }
        Ok(Self {
            lower: vec![T::neg_infinity(); d],
            upper: vec![T::infinity(); d],
            bounded: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn is_bounded(&self) -> bool {
        self.bounded
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    /// Per-axis side lengths (infinite when unbounded).
    pub fn sides(&self) -> impl Iterator<Item = T> + '_ {
        self.lower.iter().zip(&self.upper).map(|(&l, &u)| u - l)
    }

    /// Euclidean diameter `sup |x - x'|`, `None` when unbounded.
    pub fn diameter(&self) -> Option<T> {
        self.bounded.then(|| self.sides().map(|s| s * s).sum::<T>().sqrt())
    }

    /// Diameter or an `Unsupported` error for unbounded domains.
    pub fn require_diameter(&self) -> Result<T> {
        self.diameter()
            .ok_or_else(|| Error::Unsupported("operation needs a bounded domain".into()))
    }

    pub fn contains(&self, x: ArrayView1<'_, T>) -> bool {
        if !self.bounded {
            return x.iter().all(|v| v.is_finite());
        }
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&v, (&l, &u))| v >= l && v <= u)
    }
}

/// Built-in ground cost families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CostKind {
    /// `|x - y|_2^2`
    SquaredEuclidean,
    /// `|x - y|_1`
    L1,
    /// User-supplied evaluator.
    Custom,
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostKind::SquaredEuclidean => "sqeuclidean",
            CostKind::L1 => "l1",
            CostKind::Custom => "custom",
        })
    }
}

type CostFn<T> = Arc<dyn Fn(&[T], &[T]) -> T + Send + Sync>;
type DerivFn<T> = Arc<dyn Fn(T, T, usize) -> T + Send + Sync>;

/// A user-supplied cost with the constants the bounds need.
#[derive(Clone)]
pub struct CustomCost<T> {
    pub eval: CostFn<T>,
    /// `d^k/dx^k c(x, y)` in one dimension, for `k <= analytic_order`.
    pub derivative: Option<DerivFn<T>>,
    pub analytic_order: usize,
    /// Highest order for which the x-derivatives exist (`usize::MAX` for C-infinity).
    pub smoothness: usize,
    pub lipschitz: T,
    pub sup_norm: T,
    pub symmetric: bool,
}

/// Cost function `c(x, y)`.
#[derive(Clone)]
pub enum GroundCost<T> {
    SquaredEuclidean,
    L1,
    Custom(CustomCost<T>),
}

impl<T: Real> fmt::Debug for GroundCost<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroundCost::Custom(c) => f
                .debug_struct("Custom")
                .field("lipschitz", &c.lipschitz)
                .field("sup_norm", &c.sup_norm)
                .field("analytic_order", &c.analytic_order)
                .finish_non_exhaustive(),
            other => write!(f, "{}", other.kind()),
        }
    }
}

impl<T: Real> GroundCost<T> {
    pub fn kind(&self) -> CostKind {
        match self {
            GroundCost::SquaredEuclidean => CostKind::SquaredEuclidean,
            GroundCost::L1 => CostKind::L1,
            GroundCost::Custom(_) => CostKind::Custom,
        }
    }

    pub fn from_kind(kind: CostKind) -> Result<Self> {
        match kind {
            CostKind::SquaredEuclidean => Ok(GroundCost::SquaredEuclidean),
            CostKind::L1 => Ok(GroundCost::L1),
            CostKind::Custom => Err(invalid("custom costs must be built from a CustomCost")),
        }
    }

    #[inline]
    pub fn eval(&self, x: &[T], y: &[T]) -> T {
        match self {
            GroundCost::SquaredEuclidean => {
                x.iter().zip(y).map(|(&a, &b)| (a - b) * (a - b)).sum()
            }
            GroundCost::L1 => x.iter().zip(y).map(|(&a, &b)| (a - b).abs()).sum(),
            GroundCost::Custom(c) => (c.eval)(x, y),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match self {
            GroundCost::Custom(c) => c.symmetric,
            _ => true,
        }
    }

    /// Lipschitz constant in each argument on `domain`.
    pub fn lipschitz(&self, domain: &Domain<T>) -> Result<T> {
        match self {
            GroundCost::Custom(c) => Ok(c.lipschitz),
            _ => lipschitz_of_builtin(self.kind(), domain),
        }
    }

    /// `sup |c|` over `domain x domain`.
    pub fn sup_norm(&self, domain: &Domain<T>) -> Result<T> {
        match self {
            GroundCost::SquaredEuclidean => {
                let d = domain.require_diameter()?;
                Ok(d * d)
            }
            GroundCost::L1 => {
                domain.require_diameter()?;
                Ok(domain.sides().sum())
            }
            GroundCost::Custom(c) => Ok(c.sup_norm),
        }
    }

    /// Highest x-derivative order that exists.
    pub fn smoothness(&self) -> usize {
        match self {
            GroundCost::SquaredEuclidean => usize::MAX,
            // |x - y| is differentiable only away from the diagonal.
            GroundCost::L1 => 1,
            GroundCost::Custom(c) => c.smoothness,
        }
    }

    /// Highest x-derivative order with a closed-form evaluator.
    pub fn analytic_order(&self) -> usize {
        match self {
            GroundCost::SquaredEuclidean => usize::MAX,
            GroundCost::L1 => 1,
            GroundCost::Custom(c) => {
                if c.derivative.is_some() {
                    c.analytic_order
                } else {
                    0
                }
            }
        }
    }

    /// `d^k/dx^k c(x, y)` for scalar arguments; `None` past
    /// [`GroundCost::analytic_order`].
    pub fn derivative_1d(&self, x: T, y: T, order: usize) -> Option<T> {
        if order > self.analytic_order() {
            return None;
        }
        let two = T::lit(2.0);
        match self {
            GroundCost::SquaredEuclidean => Some(match order {
                0 => (x - y) * (x - y),
                1 => two * (x - y),
                2 => two,
                _ => T::zero(),
            }),
            GroundCost::L1 => Some(match order {
                0 => (x - y).abs(),
                _ => {
                    if x > y {
                        T::one()
                    } else if x < y {
                        -T::one()
                    } else {
                        T::zero()
                    }
                }
            }),
            GroundCost::Custom(c) => {
                if order == 0 {
                    Some((c.eval)(&[x], &[y]))
                } else {
                    c.derivative.as_ref().map(|f| f(x, y, order))
                }
            }
        }
    }
}

/// Lipschitz constant (per argument, Euclidean norm) of a built-in cost on a
/// bounded domain: `2 D` for squared Euclidean, `sqrt(d)` for L1.
pub fn lipschitz_of_builtin<T: Real>(kind: CostKind, domain: &Domain<T>) -> Result<T> {
    let diameter = domain.require_diameter()?;
    match kind {
        CostKind::SquaredEuclidean => Ok(T::lit(2.0) * diameter),
        CostKind::L1 => Ok(T::from_count(domain.dim()).sqrt()),
        CostKind::Custom => Err(invalid("custom costs carry their own Lipschitz constant")),
    }
}

/// Weighted point cloud `sum_i w_i delta_{x_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure<T> {
    points: Array2<T>,
    weights: Array1<T>,
    domain: Domain<T>,
}

impl<T: Real> DiscreteMeasure<T> {
    pub fn new(points: Array2<T>, weights: Array1<T>, domain: Domain<T>) -> Result<Self> {
        let (n, d) = points.dim();
        if n == 0 {
            return Err(invalid("a measure needs at least one atom"));
        }
        if d != domain.dim() {
            return Err(Error::DimensionMismatch { expected: domain.dim(), got: d });
        }
        if weights.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: weights.len() });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < T::zero()) {
            return Err(invalid("weights must be finite and nonnegative"));
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(WEIGHT_SUM_TOLERANCE) {
            return Err(invalid(format!("weights sum to {total}, not 1")));
        }
        if let Some(i) = points.rows().into_iter().position(|p| !domain.contains(p)) {
            return Err(invalid(format!("atom {i} lies outside the domain")));
        }
        Ok(Self { points, weights, domain })
    }

    /// Uniform weights `1/n` on the given points.
    pub fn uniform(points: Array2<T>, domain: Domain<T>) -> Result<Self> {
        let n = points.nrows();
        let w = if n == 0 { T::zero() } else { T::one() / T::from_count(n) };
        Self::new(points, Array1::from_elem(n, w), domain)
    }

    /// Uniform measure on one-dimensional atoms.
    pub fn uniform_1d(xs: &[T], domain: Domain<T>) -> Result<Self> {
        let points = Array2::from_shape_vec((xs.len(), 1), xs.to_vec())
            .map_err(|e| invalid(e.to_string()))?;
        Self::uniform(points, domain)
    }

    /// One-dimensional atoms with explicit weights.
    pub fn weighted_1d(xs: &[T], ws: &[T], domain: Domain<T>) -> Result<Self> {
        let points = Array2::from_shape_vec((xs.len(), 1), xs.to_vec())
            .map_err(|e| invalid(e.to_string()))?;
        Self::new(points, Array1::from(ws.to_vec()), domain)
    }

    /// Dirac mass at `x`.
    pub fn dirac(x: &[T], domain: Domain<T>) -> Result<Self> {
        let points = Array2::from_shape_vec((1, x.len()), x.to_vec())
            .map_err(|e| invalid(e.to_string()))?;
        Self::new(points, Array1::from_elem(1, T::one()), domain)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &Array2<T> {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[T] {
        self.points
            .row(i)
            .to_slice()
            .expect("measure points are stored in standard layout")
    }

    pub fn weights(&self) -> &Array1<T> {
        &self.weights
    }

    pub fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    /// Drops zero-weight atoms (the Sinkhorn solver needs positive weights).
    pub fn strip_zero_weights(&self) -> Self {
        let keep: Vec<usize> =
            (0..self.len()).filter(|&i| self.weights[i] > T::zero()).collect();
        let points = self.points.select(ndarray::Axis(0), &keep);
        let weights = self.weights.select(ndarray::Axis(0), &keep);
        Self { points, weights, domain: self.domain.clone() }
    }
}

/// Dense table `C[i, j] = c(x_i, y_j)`.
pub fn cost_matrix<T: Real>(
    cost: &GroundCost<T>,
    a: &DiscreteMeasure<T>,
    b: &DiscreteMeasure<T>,
) -> Result<Array2<T>> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let (n, m, d) = (a.len(), b.len(), a.dim());
    let mut out = crate::scratch::matrix(n, m);
    if n == 0 || m == 0 {
        return Ok(out);
    }
    let pa = a.points().as_standard_layout();
    let pb = b.points().as_standard_layout();
    let xs = pa.as_slice().expect("standard layout").chunks_exact(d);
    match cost {
        GroundCost::SquaredEuclidean => fill_coordinatewise(&mut out, xs, &pb.view(), |t| t * t),
        GroundCost::L1 => fill_coordinatewise(&mut out, xs, &pb.view(), |t| t.abs()),
        GroundCost::Custom(c) => {
            let ys: Vec<&[T]> = pb.as_slice().expect("standard layout").chunks_exact(d).collect();
            for (x, mut row) in xs.zip(out.rows_mut()) {
                for (c_ij, y) in row.iter_mut().zip(&ys) {
                    *c_ij = (c.eval)(x, y);
                }
            }
        }
    }
    Ok(out)
}

/// `C_ij = sum_k h(x_ik - y_jk)`, summed in coordinate order. The second
/// point set is transposed first so the inner loop runs over contiguous
/// columns.
fn fill_coordinatewise<'a, T: Real>(
    out: &mut Array2<T>,
    xs: impl Iterator<Item = &'a [T]>,
    pb: &ndarray::ArrayView2<'_, T>,
    h: impl Fn(T) -> T,
) {
    let cols: Vec<Vec<T>> = pb.columns().into_iter().map(|c| c.to_vec()).collect();
    for (x, mut row) in xs.zip(out.rows_mut()) {
        let row = row.as_slice_mut().expect("standard layout");
        for (c, &y) in row.iter_mut().zip(&cols[0]) {
            *c = h(x[0] - y);
        }
        for (&xk, col) in x.iter().zip(&cols).skip(1) {
            for (c, &y) in row.iter_mut().zip(col) {
                *c += h(xk - y);
            }
        }
    }
}

type CustomSampler<T> = Arc<dyn Fn(&mut ChaCha8Rng, &mut [T]) + Send + Sync>;

/// Distribution the sampler draws from.
#[derive(Clone)]
pub enum Distribution<T> {
    /// Uniform on the sampler's (bounded) domain box.
    Uniform,
    /// Standard normal on `R^d`.
    StandardNormal,
    /// Fills one point per call.
    Custom(CustomSampler<T>),
}

impl<T> fmt::Debug for Distribution<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distribution::Uniform => f.write_str("Uniform"),
            Distribution::StandardNormal => f.write_str("StandardNormal"),
            Distribution::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// Seeded i.i.d. sampler producing empirical measures.
#[derive(Debug, Clone)]
pub struct Sampler<T> {
    pub distribution: Distribution<T>,
    pub domain: Domain<T>,
    pub seed: u64,
}

impl<T: Real> Sampler<T> {
    /// Uniform sampler on `[0, side]^d`.
    pub fn uniform_hypercube(d: usize, side: T, seed: u64) -> Result<Self> {
        Ok(Self { distribution: Distribution::Uniform, domain: Domain::hypercube(d, side)?, seed })
    }

    /// Standard normal sampler on `R^d`.
    pub fn standard_normal(d: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            distribution: Distribution::StandardNormal,
            domain: Domain::unbounded(d)?,
            seed,
        })
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// Empirical measure of `n` i.i.d. draws with weights `1/n`.
    pub fn sample(&self, n: usize) -> Result<DiscreteMeasure<T>> {
        if n == 0 {
            return Err(invalid("sample size must be at least 1"));
        }
        if matches!(self.distribution, Distribution::Uniform) && !self.domain.is_bounded() {
            return Err(Error::Unsupported("uniform sampling needs a bounded domain".into()));
        }
        let d = self.domain.dim();
        let mut rng = rng::stream(self.seed, "sample", &[]);
        let mut data = vec![T::zero(); n * d];
        for row in data.chunks_exact_mut(d) {
            match &self.distribution {
                Distribution::Uniform => {
                    for (k, v) in row.iter_mut().enumerate() {
                        let t: f64 = rng.gen();
                        let (lo, hi) = (self.domain.lower[k], self.domain.upper[k]);
                        *v = lo + (hi - lo) * T::lit(t);
                    }
                }
                Distribution::StandardNormal => {
                    for v in row.iter_mut() {
                        let z: f64 = rng.sample(StandardNormal);
                        *v = T::lit(z);
                    }
                }
                Distribution::Custom(f) => f(&mut rng, row),
            }
        }
        let points = Array2::from_shape_vec((n, d), data).map_err(|e| invalid(e.to_string()))?;
        DiscreteMeasure::uniform(points, self.domain.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn line(xs: &[f64]) -> DiscreteMeasure<f64> {
        DiscreteMeasure::uniform_1d(xs, Domain::interval(-10.0, 10.0).unwrap()).unwrap()
    }

    #[test]
    fn sample_weights_are_uniform() {
        let s = Sampler::<f64>::uniform_hypercube(2, 1.0, 7).unwrap();
        let m = s.sample(3).unwrap();
        assert_eq!(m.points().dim(), (3, 2));
        for &w in m.weights() {
            assert_eq!(w, 1.0 / 3.0);
        }
        assert!(m.points().iter().all(|&v| (0.0..=1.0).contains(&v)));
        let one = s.sample(1).unwrap();
        assert_eq!(one.weights()[0], 1.0);
    }

    #[test]
    fn sample_rejects_zero() {
        let s = Sampler::<f64>::uniform_hypercube(1, 1.0, 7).unwrap();
        assert!(matches!(s.sample(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn uniform_mean_law_of_large_numbers() {
        for seed in [1_u64, 2, 3] {
            let m = Sampler::<f64>::uniform_hypercube(1, 1.0, seed).unwrap().sample(10_000).unwrap();
            let mean = m.points().iter().sum::<f64>() / 1e4;
            let tol = 3.0 * (1.0 / 12.0_f64).sqrt() / 100.0;
            assert!((mean - 0.5).abs() <= tol, "mean {mean}");
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = Sampler::<f64>::standard_normal(3, 11).unwrap();
        let a = s.sample(50).unwrap();
        let b = s.sample(50).unwrap();
        let bits = |m: &DiscreteMeasure<f64>| m.points().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&s.with_seed(12).sample(50).unwrap()));
    }

    #[test]
    fn cost_matrix_examples() {
        let sq = GroundCost::<f64>::SquaredEuclidean;
        assert_eq!(cost_matrix(&sq, &line(&[0.0]), &line(&[1.0])).unwrap(), array![[1.0]]);
        let dom = Domain::unit_cube(2).unwrap();
        let a = DiscreteMeasure::dirac(&[0.0, 0.0], dom.clone()).unwrap();
        let b = DiscreteMeasure::dirac(&[1.0, 1.0], dom).unwrap();
        assert_eq!(cost_matrix(&GroundCost::L1, &a, &b).unwrap(), array![[2.0]]);
        assert_eq!(
            cost_matrix(&sq, &line(&[0.0, 1.0]), &line(&[2.0, 3.0])).unwrap(),
            array![[4.0, 9.0], [1.0, 4.0]]
        );
    }

    #[test]
    fn cost_matrix_dimension_mismatch() {
        let a = DiscreteMeasure::dirac(&[0.0, 0.0], Domain::unit_cube(2).unwrap()).unwrap();
        let b = line(&[0.0]);
        assert!(matches!(
            cost_matrix(&GroundCost::SquaredEuclidean, &a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn builtin_lipschitz_constants() {
        let unit = Domain::<f64>::unit_cube(1).unwrap();
        assert_eq!(lipschitz_of_builtin(CostKind::SquaredEuclidean, &unit).unwrap(), 2.0);
        assert_eq!(lipschitz_of_builtin(CostKind::L1, &unit).unwrap(), 1.0);
        let sq = Domain::<f64>::unit_cube(2).unwrap();
        let l = lipschitz_of_builtin(CostKind::SquaredEuclidean, &sq).unwrap();
        assert!((l - 2.0 * 2.0_f64.sqrt()).abs() < 1e-15);
        let gauss = Domain::<f64>::unbounded(2).unwrap();
        assert!(matches!(
            lipschitz_of_builtin(CostKind::SquaredEuclidean, &gauss),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn sup_norms() {
        let dom = Domain::<f64>::unit_cube(3).unwrap();
        assert!((GroundCost::SquaredEuclidean.sup_norm(&dom).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(GroundCost::L1.sup_norm(&dom).unwrap(), 3.0);
    }

    #[test]
    fn measure_validation() {
        let dom = Domain::<f64>::unit_cube(1).unwrap();
        assert!(DiscreteMeasure::weighted_1d(&[0.1, 0.2], &[0.5, 0.4], dom.clone()).is_err());
        assert!(DiscreteMeasure::weighted_1d(&[0.1, 2.0], &[0.5, 0.5], dom.clone()).is_err());
        assert!(DiscreteMeasure::uniform_1d(&[], dom.clone()).is_err());
        let m = DiscreteMeasure::weighted_1d(&[0.1, 0.2, 0.3], &[0.5, 0.0, 0.5], dom).unwrap();
        assert_eq!(m.strip_zero_weights().len(), 2);
    }

    #[test]
    fn works_in_single_precision() {
        let dom = Domain::<f32>::unit_cube(1).unwrap();
        let a = DiscreteMeasure::uniform_1d(&[0.0_f32, 1.0], dom.clone()).unwrap();
        let c = cost_matrix(&GroundCost::SquaredEuclidean, &a, &a).unwrap();
        assert_eq!(c, array![[0.0_f32, 1.0], [1.0, 0.0]]);
    }

    proptest! {
        #[test]
        fn builtin_costs_respect_lipschitz(
            d in 1usize..5,
            seed in any::<u64>(),
        ) {
            let dom = Domain::<f64>::unit_cube(d).unwrap();
            let pts = Sampler::uniform_hypercube(d, 1.0, seed).unwrap().sample(3 * 300).unwrap();
            for kind in [CostKind::SquaredEuclidean, CostKind::L1] {
                let cost = GroundCost::from_kind(kind).unwrap();
                let l = cost.lipschitz(&dom).unwrap();
                let sup = cost.sup_norm(&dom).unwrap();
                for t in 0..300 {
                    let (x, x2, y) = (pts.point(3 * t), pts.point(3 * t + 1), pts.point(3 * t + 2));
                    let dx: f64 = x.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                    let cxy = cost.eval(x, y);
                    prop_assert!(cxy >= 0.0);
                    prop_assert!(cxy <= sup + 1e-12);
                    prop_assert!((cxy - cost.eval(y, x)).abs() <= 1e-15);
                    prop_assert!((cxy - cost.eval(x2, y)).abs() <= l * dx + 1e-12);
                }
            }
        }

        #[test]
        fn self_cost_matrix_is_symmetric(n in 1usize..12, seed in any::<u64>()) {
            let a = Sampler::<f64>::uniform_hypercube(2, 1.0, seed).unwrap().sample(n).unwrap();
            for cost in [GroundCost::SquaredEuclidean, GroundCost::L1] {
                let c = cost_matrix(&cost, &a, &a).unwrap();
                prop_assert_eq!(c.clone(), c.t().to_owned());
            }
        }
    }
}

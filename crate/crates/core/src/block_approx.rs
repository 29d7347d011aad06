//! Block approximation of a transport plan and the entropic-gap bound it
//! certifies.
//!
//! Space is cut into half-open hypercubes of side `delta`. Given a plan `pi0`
//! between `a` and `b`, the block approximation keeps the mass `pi0` puts on
//! every pair of blocks `(I, J)` but spreads it as the product of the two
//! measures restricted to `I` and `J`:
//!
//! ```text
//! pi_delta[p, q] = pi0(Q_IJ) / (alpha_I beta_J) * a_p b_q,   p in I, q in J
//! ```
//!
//! It is feasible, moves each unit of mass at most one block diameter farther
//! than `pi0`, and its entropy is controlled by the block entropies of `a` and
//! `b`, which yields `W_eps - W <= 2 eps d log(e^2 L D / (sqrt(d) eps))`.

use std::collections::HashMap;

use ndarray::Array2;

use crate::error::{invalid, Error, Result};
use crate::exact_ot::ExactPlan;
use crate::measures::DiscreteMeasure;
use crate::scalar::Real;
use crate::sinkhorn::relative_entropy;

/// Slack allowed when a certificate is checked numerically.
pub const CERTIFICATE_SLACK: f64 = 1e-9;

/// Partition of space into half-open cubes `origin + [k delta, (k+1) delta)`.
///
/// On a bounded domain the origin is the lower corner of the box and the last
/// cube along each axis is closed, so points on the upper face belong to the
/// cube that meets the box instead of a new one outside it.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPartition<T> {
    delta: T,
    origin: Vec<T>,
    /// Number of cubes along each axis, when the domain is bounded.
    counts: Option<Vec<i64>>,
}

impl<T: Real> BlockPartition<T> {
    pub fn new(delta: T, origin: Vec<T>) -> Result<Self> {
        if !(delta > T::zero()) || !delta.is_finite() {
            return Err(invalid(format!("block side must be positive, got {delta}")));
        }
        Ok(Self { delta, origin, counts: None })
    }

    /// Partition anchored at the corner of the measure's domain box (or at the
    /// origin of space for unbounded domains).
    pub fn for_measure(delta: T, measure: &DiscreteMeasure<T>) -> Result<Self> {
        let domain = measure.domain();
        if !domain.is_bounded() {
            return Self::new(delta, vec![T::zero(); measure.dim()]);
        }
        let mut part = Self::new(delta, domain.lower().to_vec())?;
        let counts = domain
            .sides()
            .map(|side| {
                let k = (side / delta).ceil().to_i64().unwrap_or(i64::MAX);
                k.max(1)
            })
            .collect();
        part.counts = Some(counts);
        Ok(part)
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn origin(&self) -> &[T] {
        &self.origin
    }

    /// Diameter of one cube, `delta sqrt(d)`.
    pub fn block_diameter(&self) -> T {
        self.delta * T::from_count(self.origin.len()).sqrt()
    }

    /// Integer key of the cube containing `x`.
    pub fn key(&self, x: &[T]) -> Vec<i64> {
        x.iter()
            .zip(&self.origin)
            .enumerate()
            .map(|(axis, (&xi, &o))| {
                let k = ((xi - o) / self.delta).floor().to_i64().unwrap_or(i64::MAX);
                match &self.counts {
                    Some(counts) => k.clamp(0, counts[axis] - 1),
                    None => k,
                }
            })
            .collect()
    }

    /// Dense block labels (in order of first appearance) for every atom.
    pub fn labels(&self, measure: &DiscreteMeasure<T>) -> (Vec<usize>, usize) {
        let mut ids: HashMap<Vec<i64>, usize> = HashMap::new();
        let labels = (0..measure.len())
            .map(|p| {
                let next = ids.len();
                *ids.entry(self.key(measure.point(p))).or_insert(next)
            })
            .collect();
        (labels, ids.len())
    }

    fn block_masses(&self, measure: &DiscreteMeasure<T>) -> (Vec<usize>, Vec<T>) {
        let (labels, count) = self.labels(measure);
        let mut mass = vec![T::zero(); count];
        for (p, &l) in labels.iter().enumerate() {
            mass[l] += measure.weights()[p];
        }
        (labels, mass)
    }
}

fn xlogx_sum<T: Real>(masses: &[T]) -> T {
    masses.iter().filter(|&&m| m > T::zero()).map(|&m| m * m.ln()).sum()
}

/// Lower bound `-d log(2 D / delta)` on the block entropy, valid for
/// `delta <= 2 D`.
pub fn block_entropy_floor<T: Real>(d: usize, diameter: T, delta: T) -> T {
    -T::from_count(d) * (T::lit(2.0) * diameter / delta).ln()
}

/// `H_delta(a) = sum_I alpha_I log alpha_I` over the blocks of the partition
/// anchored at the domain corner.
///
/// Fails with [`Error::BoundViolation`] if the value drops below
/// `-d log(2 D / delta)` while `delta <= 2 D`.
pub fn block_entropy<T: Real>(measure: &DiscreteMeasure<T>, delta: T) -> Result<T> {
    let diameter = measure.domain().diameter().ok_or_else(|| {
        Error::Unsupported("block entropy bound needs a bounded domain".into())
    })?;
    let part = BlockPartition::for_measure(delta, measure)?;
    let (_, masses) = part.block_masses(measure);
    let h = xlogx_sum(&masses);
    if delta <= T::lit(2.0) * diameter {
        let floor = block_entropy_floor(measure.dim(), diameter, delta);
        if h < floor - T::lit(CERTIFICATE_SLACK) {
            return Err(Error::BoundViolation(format!(
                "block entropy {h} below -d log(2D/delta) = {floor}"
            )));
        }
    }
    Ok(h)
}

/// The block approximation of a plan with its certificates.
#[derive(Debug, Clone)]
pub struct BlockPlan<T> {
    pub delta: T,
    pub plan: Array2<T>,
    /// `pi0(Q_IJ)` indexed by the dense block labels of `a` and `b`.
    pub block_masses: Array2<T>,
    pub labels_a: Vec<usize>,
    pub labels_b: Vec<usize>,
    /// `C(pi_delta) - C(pi0)`.
    pub cost_gap: T,
    /// `C(pi_delta)`.
    pub transport_cost: T,
    /// `H(pi_delta | a x b)`.
    pub entropy: T,
    pub block_entropy_a: T,
    pub block_entropy_b: T,
}

impl<T: Real> BlockPlan<T> {
    /// `C(pi_delta) + eps H(pi_delta)`, an upper bound on `W_eps`.
    pub fn entropic_value(&self, eps: T) -> T {
        self.transport_cost + eps * self.entropy
    }

    /// `2 L delta sqrt(d)`.
    pub fn cost_gap_bound(&self, lipschitz: T, d: usize) -> T {
        T::lit(2.0) * lipschitz * self.delta * T::from_count(d).sqrt()
    }

    /// `-H_delta(a) - H_delta(b)`.
    pub fn entropy_bound(&self) -> T {
        -self.block_entropy_a - self.block_entropy_b
    }

    /// Checks the cost-gap and both entropy inequalities.
    pub fn verify(&self, lipschitz: T, diameter: T, d: usize) -> Result<()> {
        let slack = T::lit(CERTIFICATE_SLACK);
        let gap_bound = self.cost_gap_bound(lipschitz, d);
        if self.cost_gap > gap_bound + slack {
            return Err(Error::BoundViolation(format!(
                "cost gap {} exceeds 2 L delta sqrt(d) = {gap_bound}",
                self.cost_gap
            )));
        }
        if self.entropy > self.entropy_bound() + slack {
            return Err(Error::BoundViolation(format!(
                "entropy {} exceeds -H(a) - H(b) = {}",
                self.entropy,
                self.entropy_bound()
            )));
        }
        if self.delta <= T::lit(2.0) * diameter {
            let cap = -T::lit(2.0) * block_entropy_floor(d, diameter, self.delta);
            if self.entropy_bound() > cap + slack {
                return Err(Error::BoundViolation(format!(
                    "-H(a) - H(b) = {} exceeds 2 d log(2D/delta) = {cap}",
                    self.entropy_bound()
                )));
            }
        }
        Ok(())
    }
}

/// Builds the block approximation of `pi0` at resolution `delta`; `cost` is the
/// cost matrix between the supports of `a` and `b`.
pub fn block_approximate<T: Real>(
    pi0: &ExactPlan<T>,
    a: &DiscreteMeasure<T>,
    b: &DiscreteMeasure<T>,
    cost: &Array2<T>,
    delta: T,
) -> Result<BlockPlan<T>> {
    let (n, m) = (a.len(), b.len());
    if pi0.plan.dim() != (n, m) {
        return Err(Error::DimensionMismatch { expected: n, got: pi0.plan.nrows() });
    }
    if cost.dim() != (n, m) {
        return Err(Error::DimensionMismatch { expected: n, got: cost.nrows() });
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let part_a = BlockPartition::for_measure(delta, a)?;
    let part_b = BlockPartition::for_measure(delta, b)?;
    let (la, mass_a) = part_a.block_masses(a);
    let (lb, mass_b) = part_b.block_masses(b);

    let mut blocks = Array2::zeros((mass_a.len(), mass_b.len()));
    for ((p, q), &x) in pi0.plan.indexed_iter() {
        blocks[[la[p], lb[q]]] += x;
    }
    let plan = Array2::from_shape_fn((n, m), |(p, q)| {
        let denom = mass_a[la[p]] * mass_b[lb[q]];
        if denom > T::zero() {
            blocks[[la[p], lb[q]]] / denom * a.weights()[p] * b.weights()[q]
        } else {
            T::zero()
        }
    });
    let transport_cost: T = plan.iter().zip(cost.iter()).map(|(&p, &c)| p * c).sum();
    let base_cost: T = pi0.plan.iter().zip(cost.iter()).map(|(&p, &c)| p * c).sum();
    let entropy = relative_entropy(&plan, a.weights(), b.weights())?;
    Ok(BlockPlan {
        delta,
        plan,
        block_masses: blocks,
        labels_a: la,
        labels_b: lb,
        cost_gap: transport_cost - base_cost,
        transport_cost,
        entropy,
        block_entropy_a: xlogx_sum(&mass_a),
        block_entropy_b: xlogx_sum(&mass_b),
    })
}

fn check_positive<T: Real>(name: &str, x: T) -> Result<()> {
    if x > T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive, got {x}")))
    }
}

/// `2 eps d log(e^2 L D / (sqrt(d) eps))`.
pub fn theorem1_bound<T: Real>(eps: T, d: usize, lipschitz: T, diameter: T) -> Result<T> {
    check_positive("epsilon", eps)?;
    check_positive("lipschitz constant", lipschitz)?;
    check_positive("diameter", diameter)?;
    if d == 0 {
        return Err(invalid("dimension must be positive"));
    }
    let dd = T::from_count(d);
    let e2 = T::lit(2.0).exp();
    Ok(T::lit(2.0) * eps * dd * (e2 * lipschitz * diameter / (dd.sqrt() * eps)).ln())
}

/// The same bound written as `4 eps d + 2 eps d log(L D / (sqrt(d) eps))`.
pub fn theorem1_bound_expanded<T: Real>(eps: T, d: usize, lipschitz: T, diameter: T) -> Result<T> {
    theorem1_bound(eps, d, lipschitz, diameter)?;
    let dd = T::from_count(d);
    Ok(T::lit(4.0) * eps * dd
        + T::lit(2.0) * eps * dd * (lipschitz * diameter / (dd.sqrt() * eps)).ln())
}

/// Minimizer `2 sqrt(d) eps / L` of `2 L delta sqrt(d) + 2 eps d log(2 D / delta)`.
pub fn optimal_delta<T: Real>(eps: T, d: usize, lipschitz: T) -> Result<T> {
    check_positive("epsilon", eps)?;
    check_positive("lipschitz constant", lipschitz)?;
    if d == 0 {
        return Err(invalid("dimension must be positive"));
    }
    Ok(T::lit(2.0) * T::from_count(d).sqrt() * eps / lipschitz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_ot::solve_exact;
    use crate::measures::{cost_matrix, Domain, GroundCost, Sampler};
    use crate::sinkhorn::{sinkhorn_solve, SinkhornConfig};
    use ndarray::{array, Axis};
    use proptest::prelude::*;

    fn unit() -> Domain<f64> {
        Domain::unit_cube(1).unwrap()
    }

    #[test]
    fn bound_examples() {
        assert!((theorem1_bound(1.0f64, 1, 1.0, 1.0).unwrap() - 4.0).abs() < 1e-12);
        assert!((optimal_delta(1.0f64, 1, 1.0).unwrap() - 2.0).abs() < 1e-15);
        let v = theorem1_bound(0.1, 2, 2.0, 1.0).unwrap();
        let direct = 0.4 * ((2.0f64).exp() * 2.0 / (2f64.sqrt() * 0.1)).ln();
        assert!((v - direct).abs() < 1e-14);
        assert!((v - 1.859).abs() < 1e-3);
        for (e, d, l, diam) in [(0.3f64, 3, 2.5, 1.7), (1e-3, 5, 4.0, 2.2), (2.0, 1, 0.5, 0.1)] {
            let x = theorem1_bound(e, d, l, diam).unwrap();
            let y = theorem1_bound_expanded(e, d, l, diam).unwrap();
            assert!((x - y).abs() < 1e-12);
        }
        assert!(theorem1_bound(0.0, 1, 1.0, 1.0).is_err());
        assert!(optimal_delta(1.0, 1, -1.0).is_err());
    }

    #[test]
    fn bound_shape() {
        let f = |eps: f64| theorem1_bound(eps, 2, 2.0, 1.0).unwrap();
        assert!(theorem1_bound(0.1, 2, 2.0, 2.0).unwrap() > f(0.1));
        let mut prev = f(1e-2);
        for k in 3..12 {
            let e = 10f64.powi(-k);
            assert!(f(e) < prev);
            prev = f(e);
            // ~ 2 eps d log(1/eps)
            let ratio = f(e) / (2.0 * e * 2.0 * (1.0 / e).ln());
            assert!(ratio > 1.0 && ratio < 1.0 + 10.0 / (1.0 / e).ln());
        }
    }

    #[test]
    fn block_entropy_examples() {
        let one = DiscreteMeasure::uniform_1d(&[0.1, 0.2, 0.3], unit()).unwrap();
        assert_eq!(block_entropy(&one, 0.5).unwrap(), 0.0);
        let two = DiscreteMeasure::uniform_1d(&[0.0, 0.6], unit()).unwrap();
        assert!((block_entropy(&two, 0.5).unwrap() + 2f64.ln()).abs() < 1e-15);
        let xs: Vec<f64> = (0..7).map(|i| (i as f64 + 0.5) / 7.0).collect();
        let spread = DiscreteMeasure::uniform_1d(&xs, unit()).unwrap();
        assert!((block_entropy(&spread, 1.0 / 7.0).unwrap() + 7f64.ln()).abs() < 1e-12);
        let free = DiscreteMeasure::uniform_1d(&[0.0], Domain::unbounded(1).unwrap()).unwrap();
        assert!(matches!(block_entropy(&free, 1.0), Err(Error::Unsupported(_))));
        assert!(block_entropy(&two, 0.0).is_err());
    }

    #[test]
    fn upper_face_stays_in_last_block() {
        let m = DiscreteMeasure::uniform_1d(&[0.0, 1.0], unit()).unwrap();
        let part = BlockPartition::for_measure(1.0, &m).unwrap();
        assert_eq!(part.key(&[1.0]), vec![0]);
        assert_eq!(part.labels(&m).1, 1);
        let half = BlockPartition::for_measure(0.5, &m).unwrap();
        assert_eq!(half.key(&[0.5]), vec![1]);
        assert_eq!(half.key(&[0.4999]), vec![0]);
    }

    #[test]
    fn isolated_pairs_keep_the_plan() {
        let a = DiscreteMeasure::uniform_1d(&[0.0, 0.6], unit()).unwrap();
        let b = DiscreteMeasure::uniform_1d(&[0.1, 0.7], unit()).unwrap();
        let c = cost_matrix(&GroundCost::SquaredEuclidean, &a, &b).unwrap();
        let pi0 = solve_exact(&c, a.weights(), b.weights()).unwrap();
        assert_eq!(pi0.plan, array![[0.5, 0.0], [0.0, 0.5]]);
        let bp = block_approximate(&pi0, &a, &b, &c, 0.5).unwrap();
        assert_eq!(bp.plan, pi0.plan);
        assert!((bp.entropy - 2f64.ln()).abs() < 1e-15);
        assert!(bp.cost_gap.abs() < 1e-15);
    }

    #[test]
    fn coarse_blocks_give_the_product_plan() {
        let s = Sampler::<f64>::uniform_hypercube(2, 1.0, 3).unwrap();
        let a = s.sample(9).unwrap();
        let b = s.with_seed(4).sample(9).unwrap();
        let c = cost_matrix(&GroundCost::SquaredEuclidean, &a, &b).unwrap();
        let pi0 = solve_exact(&c, a.weights(), b.weights()).unwrap();
        let d = a.domain().diameter().unwrap();
        let bp = block_approximate(&pi0, &a, &b, &c, d).unwrap();
        for x in bp.plan.iter() {
            assert!((x - 1.0 / 81.0).abs() < 1e-15);
        }
        assert!(bp.entropy.abs() < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn certificates_hold(seed in 0u64..10_000, n in 1usize..20, m in 1usize..20, d in 1usize..4, log_delta in -2.0f64..0.5) {
            let delta = 10f64.powf(log_delta);
            let s = Sampler::<f64>::uniform_hypercube(d, 1.0, seed).unwrap();
            let a = s.sample(n).unwrap();
            let b = s.with_seed(seed + 77).sample(m).unwrap();
            let c = cost_matrix(&GroundCost::SquaredEuclidean, &a, &b).unwrap();
            let pi0 = solve_exact(&c, a.weights(), b.weights()).unwrap();
            let bp = block_approximate(&pi0, &a, &b, &c, delta).unwrap();
            let rows = bp.plan.sum_axis(Axis(1));
            let cols = bp.plan.sum_axis(Axis(0));
            for (x, y) in rows.iter().zip(a.weights()) { prop_assert!((x - y).abs() < 1e-12); }
            for (x, y) in cols.iter().zip(b.weights()) { prop_assert!((x - y).abs() < 1e-12); }
            // Block masses are preserved.
            let mut again = Array2::<f64>::zeros(bp.block_masses.dim());
            for ((p, q), &x) in bp.plan.indexed_iter() { again[[bp.labels_a[p], bp.labels_b[q]]] += x; }
            for (x, y) in again.iter().zip(bp.block_masses.iter()) { prop_assert!((x - y).abs() < 1e-12); }
            // Entropy closed form over blocks.
            let mass_a = bp.block_masses.sum_axis(Axis(1));
            let mass_b = bp.block_masses.sum_axis(Axis(0));
            let closed: f64 = bp.block_masses.indexed_iter()
                .filter(|(_, &x)| x > 0.0)
                .map(|((i, j), &x)| x * (x / (mass_a[i] * mass_b[j])).ln())
                .sum();
            prop_assert!((closed - bp.entropy).abs() < 1e-12);
            let diam = a.domain().diameter().unwrap();
            let lip = GroundCost::SquaredEuclidean.lipschitz(a.domain()).unwrap();
            prop_assert!(bp.verify(lip, diam, d).is_ok());
            for eps in [0.05, 0.5] {
                let r = sinkhorn_solve(&c, &a, &b, &SinkhornConfig::new(eps)).unwrap();
                prop_assert!(r.primal_value <= bp.entropic_value(eps) + 1e-8);
            }
        }
    }
}

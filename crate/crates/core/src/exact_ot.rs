//! Exact (unregularized) optimal transport between discrete measures.
//!
//! Desk-scale oracle: uniform square problems go through a shortest
//! augmenting path assignment solver, everything else through successive
//! shortest paths on the bipartite transportation network.

use itertools::Itertools;
use ndarray::{Array1, Array2};

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Largest support size accepted by [`solve_exact`].
pub const EXACT_SIZE_CAP: usize = 512;

/// Largest size accepted by [`brute_force_exact`].
pub const BRUTE_FORCE_CAP: usize = 8;

/// Optimal plan and its cost.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactPlan<T> {
    pub plan: Array2<T>,
    pub cost: T,
}

impl<T: Real> ExactPlan<T> {
    /// `sum_ij pi_ij C_ij` recomputed from the plan.
    pub fn recompute_cost(&self, cost: &Array2<T>) -> T {
        self.plan.iter().zip(cost.iter()).map(|(&p, &c)| p * c).sum()
    }
}

fn validate<T: Real>(cost: &Array2<T>, a: &[T], b: &[T]) -> Result<()> {
    let (n, m) = cost.dim();
    if n != a.len() {
        return Err(Error::DimensionMismatch { expected: n, got: a.len() });
    }
    if m != b.len() {
        return Err(Error::DimensionMismatch { expected: m, got: b.len() });
    }
    if n == 0 || m == 0 {
        return Err(invalid("empty transport problem"));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(invalid("cost matrix has non-finite entries"));
    }
    if n.max(m) > EXACT_SIZE_CAP {
        return Err(Error::SizeLimit { size: n.max(m), limit: EXACT_SIZE_CAP });
    }
    let tol = T::lit(1e-9);
    for w in [a, b] {
        if w.iter().any(|x| !x.is_finite() || *x < T::zero()) {
            return Err(invalid("weights must be finite and nonnegative"));
        }
        if (w.iter().copied().sum::<T>() - T::one()).abs() > tol {
            return Err(invalid("weights must sum to 1"));
        }
    }
    Ok(())
}

fn is_uniform<T: Real>(w: &[T]) -> bool {
    let target = T::one() / T::from_count(w.len());
    w.iter().all(|&x| (x - target).abs() <= T::lit(1e-12))
}

/// Solves `min_{pi in Pi(a, b)} <pi, C>`.
pub fn solve_exact<T: Real>(cost: &Array2<T>, a: &Array1<T>, b: &Array1<T>) -> Result<ExactPlan<T>> {
    let (a, b) = (a.to_vec(), b.to_vec());
    validate(cost, &a, &b)?;
    let (n, m) = cost.dim();
    let plan = if n == m && is_uniform(&a) && is_uniform(&b) {
        let assignment = assignment(cost);
        let w = T::one() / T::from_count(n);
        let mut plan = Array2::zeros((n, n));
        for (i, &j) in assignment.iter().enumerate() {
            plan[[i, j]] = w;
        }
        plan
    } else {
        transport_ssp(cost, &a, &b)
    };
    let cost_value = plan.iter().zip(cost.iter()).map(|(&p, &c)| p * c).sum();
    Ok(ExactPlan { plan, cost: cost_value })
}

/// Minimum-cost perfect matching on a square matrix; returns the column
/// assigned to each row. Shortest augmenting paths with row/column potentials,
/// `O(n^3)`.
pub fn assignment<T: Real>(cost: &Array2<T>) -> Vec<usize> {
    let n = cost.nrows();
    debug_assert_eq!(n, cost.ncols());
    // 1-based columns; column 0 is the virtual root of each augmenting tree.
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        matched_row[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![T::infinity(); n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = T::infinity();
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0usize; n];
    for j in 1..=n {
        out[matched_row[j] - 1] = j - 1;
    }
    out
}

/// Successive shortest paths for the transportation problem with real
/// supplies. Reduced costs stay nonnegative through node potentials, so each
/// phase is a dense Dijkstra over the `n + m` nodes.
fn transport_ssp<T: Real>(cost: &Array2<T>, a: &[T], b: &[T]) -> Array2<T> {
    let (n, m) = cost.dim();
    let zero_mass = T::lit(1e-15);
    let mut supply = a.to_vec();
    let mut demand = b.to_vec();
    let mut flow = Array2::<T>::zeros((n, m));
    // Potentials: nodes 0..n are sources, n..n+m sinks.
    let mut phi = vec![T::zero(); n + m];
    for j in 0..m {
        phi[n + j] = (0..n).map(|i| cost[[i, j]]).fold(T::infinity(), T::min);
    }
    let total = n + m;
    let mut iteration = 0usize;
    loop {
        if supply.iter().all(|&s| s <= zero_mass) || demand.iter().all(|&d| d <= zero_mass) {
            break;
        }
        iteration += 1;
        debug_assert!(iteration < 100 * total * total, "transport SSP failed to terminate");
        let mut dist = vec![T::infinity(); total];
        let mut parent = vec![usize::MAX; total];
        let mut done = vec![false; total];
        for i in 0..n {
            if supply[i] > zero_mass {
                dist[i] = T::zero();
            }
        }
        loop {
            let mut best = usize::MAX;
            let mut best_d = T::infinity();
            for k in 0..total {
                if !done[k] && dist[k] < best_d {
                    best_d = dist[k];
                    best = k;
                }
            }
            if best == usize::MAX {
                break;
            }
            done[best] = true;
            if best < n {
                let i = best;
                for j in 0..m {
                    let node = n + j;
                    if done[node] {
                        continue;
                    }
                    let reduced = (cost[[i, j]] + phi[i] - phi[node]).max(T::zero());
                    let cand = best_d + reduced;
                    if cand < dist[node] {
                        dist[node] = cand;
                        parent[node] = i;
                    }
                }
            } else {
                let j = best - n;
                for i in 0..n {
                    if done[i] || flow[[i, j]] <= zero_mass {
                        continue;
                    }
                    let reduced = (phi[best] - cost[[i, j]] - phi[i]).max(T::zero());
                    let cand = best_d + reduced;
                    if cand < dist[i] {
                        dist[i] = cand;
                        parent[i] = best;
                    }
                }
            }
        }
        // Closest sink with remaining demand.
        let mut sink = usize::MAX;
        for j in 0..m {
            if demand[j] > zero_mass
                && dist[n + j].is_finite()
                && (sink == usize::MAX || dist[n + j] < dist[sink])
            {
                sink = n + j;
            }
        }
        if sink == usize::MAX {
            break;
        }
        let reach = dist[sink];
        for k in 0..total {
            phi[k] += dist[k].min(reach);
        }
        // Bottleneck along the path back to a source.
        let mut amount = demand[sink - n];
        let mut node = sink;
        while parent[node] != usize::MAX {
            let prev = parent[node];
            if prev >= n {
                // Reverse arc sink(prev) -> source(node): cancels flow on (node, prev).
                amount = amount.min(flow[[node, prev - n]]);
            }
            node = prev;
        }
        let source = node;
        amount = amount.min(supply[source]);
        let mut node = sink;
        while parent[node] != usize::MAX {
            let prev = parent[node];
            if prev < n {
                flow[[prev, node - n]] += amount;
            } else {
                let f = &mut flow[[node, prev - n]];
                *f = (*f - amount).max(T::zero());
            }
            node = prev;
        }
        supply[source] -= amount;
        demand[sink - n] -= amount;
    }
    flow
}

/// Minimum of `(1/n) sum_i C[i, sigma(i)]` over all permutations, `n <= 8`.
pub fn brute_force_exact<T: Real>(cost: &Array2<T>) -> Result<T> {
    let (n, m) = cost.dim();
    if n != m {
        return Err(Error::DimensionMismatch { expected: n, got: m });
    }
    if n == 0 {
        return Err(invalid("empty cost matrix"));
    }
    if n > BRUTE_FORCE_CAP {
        return Err(Error::SizeLimit { size: n, limit: BRUTE_FORCE_CAP });
    }
    let best = (0..n)
        .permutations(n)
        .map(|perm| perm.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum::<T>())
        .fold(T::infinity(), T::min);
    Ok(best / T::from_count(n))
}

//! Composite Gauss-Legendre rules on an interval.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{invalid, Result};
use crate::scalar::Real;

pub const DEFAULT_PANELS: usize = 256;
pub const DEFAULT_POINTS_PER_PANEL: usize = 8;

/// Nodes and weights of a composite rule; `sum_i w_i f(x_i)` approximates
/// the integral over `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature<T> {
    pub lower: T,
    pub upper: T,
    pub panels: usize,
    pub points_per_panel: usize,
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> Quadrature<T> {
    /// `panels` equal sub-intervals with a `points`-node Gauss-Legendre rule
    /// on each.
    pub fn composite(lower: T, upper: T, panels: usize, points: usize) -> Result<Self> {
        if !(upper > lower) || !lower.is_finite() || !upper.is_finite() {
            return Err(invalid(format!("quadrature needs a finite interval, got [{lower}, {upper}]")));
        }
        let (Some(np), Some(_)) = (NonZeroUsize::new(points), NonZeroUsize::new(panels)) else {
            return Err(invalid("quadrature needs at least one panel and one node"));
        };
        let rule = GaussLegendre::new(np);
        let width = (upper - lower) / T::from_count(panels);
        let half = width / T::lit(2.0);
        let mut nodes = Vec::with_capacity(panels * points);
        let mut weights = Vec::with_capacity(panels * points);
        for p in 0..panels {
            let mid = lower + width * (T::from_count(p) + T::lit(0.5));
            for &(x, w) in rule.as_node_weight_pairs() {
                nodes.push(mid + half * T::lit(x));
                weights.push(half * T::lit(w));
            }
        }
        Ok(Self { lower, upper, panels, points_per_panel: points, nodes, weights })
    }

    /// The default 2048-node rule (256 panels of 8 nodes).
    pub fn standard(lower: T, upper: T) -> Result<Self> {
        Self::composite(lower, upper, DEFAULT_PANELS, DEFAULT_POINTS_PER_PANEL)
    }

    /// Same interval and per-panel rule with twice the panels.
    pub fn refined(&self) -> Self {
        Self::composite(self.lower, self.upper, 2 * self.panels, self.points_per_panel)
            .expect("refining a valid rule")
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(T) -> T) -> T {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

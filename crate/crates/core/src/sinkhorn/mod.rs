//! Entropic optimal transport between discrete measures.
//!
//! The solver keeps the dual potentials `(u, v)` in the log domain and runs
//! the alternating updates
//!
//! ```text
//! u_i <- -eps * log sum_j b_j exp((v_j - C_ij) / eps)
//! v_j <- -eps * log sum_i a_i exp((u_i - C_ij) / eps)
//! ```
//!
//! until the l1 violation of both marginals of
//! `pi_ij = a_i b_j exp((u_i + v_j - C_ij) / eps)` drops below the tolerance.
//! Three update schemes reach the same fixed point:
//!
//! * [`Scheme::LogDomain`]: every half-step is a max-shifted log-sum-exp.
//! * [`Scheme::Stabilized`] (default): potentials are absorbed into a kernel
//!   `exp((f_i + g_j - C_ij) / eps)` and the inner loop only rescales, falling
//!   back to a log-domain half-step whenever a scaling under- or overflows.
//!   Each iteration costs two matrix-vector products instead of `2nm`
//!   exponentials.
//! * [`Scheme::Scaling`]: the textbook `exp(-C/eps)` kernel without any
//!   stabilization. Only meaningful for moderate `eps`; kept as a cross-check.
//!
//! Small problems that are still unconverged after a fixed budget of
//! alternating updates are finished with damped Newton steps on the dual
//! (see [`SinkhornConfig::newton`]); each Newton step counts as one iteration.
//!
//! Whatever the scheme, the reported values, marginal error and plan are
//! computed from the final potentials in the log domain.

mod divergence;
mod newton;
mod solver;

pub use divergence::{
    dual_objective, mmd, relative_entropy, sinkhorn_divergence, sinkhorn_divergence_report,
    DivergenceReport,
};
pub use solver::{sinkhorn_solve, sinkhorn_solve_symmetric, NEWTON_SIZE_CAP};

use ndarray::{Array1, Array2};

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// How the additive constant of the potentials is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Anchoring {
    /// `sum_i a_i u_i = 0`.
    #[default]
    MeanZeroU,
    /// `u_0 = 0` (the anchoring used for the Lipschitz set of the sample
    /// complexity argument).
    FirstPointZero,
}

/// Update scheme; see the module documentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    LogDomain,
    #[default]
    Stabilized,
    Scaling,
}

/// Over-relaxation of the half-steps, `u <- (1 - w) u + w T(u)` in the log
/// domain. Any `w` in `(0, 2)` keeps the same fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Relaxation<T> {
    /// Plain Sinkhorn (`w = 1`).
    Off,
    Fixed(T),
    /// Starts at `w = 1`, estimates the linear rate `r` from the observed
    /// marginal errors and switches to `w = 2 / (1 + sqrt(1 - r))`. Reverts to
    /// `w = 1` if the error blows up.
    #[default]
    Adaptive,
}

/// Warm-start continuation in `eps`, from `start` down to the target by
/// multiplying with `factor` each stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Annealing<T> {
    pub start: T,
    pub factor: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornConfig<T> {
    pub epsilon: T,
    pub max_iterations: usize,
    /// Target for `|pi 1 - a|_1 + |pi^T 1 - b|_1`.
    pub marginal_tolerance: T,
    pub anchoring: Anchoring,
    pub scheme: Scheme,
    pub relaxation: Relaxation<T>,
    /// Off unless set.
    pub annealing: Option<Annealing<T>>,
    /// Finish with damped Newton steps on the dual when the alternating
    /// updates have not converged after a fixed budget and the problem has
    /// at most [`NEWTON_SIZE_CAP`] atoms in total.
    pub newton: bool,
}

pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;
pub const DEFAULT_MARGINAL_TOLERANCE: f64 = 1e-9;

impl<T: Real> SinkhornConfig<T> {
    pub fn new(epsilon: T) -> Self {
        Self {
            epsilon,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            marginal_tolerance: T::lit(DEFAULT_MARGINAL_TOLERANCE),
            anchoring: Anchoring::default(),
            scheme: Scheme::default(),
            relaxation: Relaxation::default(),
            annealing: None,
            newton: true,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_anchoring(mut self, anchoring: Anchoring) -> Self {
        self.anchoring = anchoring;
        self
    }

    pub fn with_relaxation(mut self, relaxation: Relaxation<T>) -> Self {
        self.relaxation = relaxation;
        self
    }

    pub fn with_tolerance(mut self, tol: T) -> Self {
        self.marginal_tolerance = tol;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn with_annealing(mut self, annealing: Annealing<T>) -> Self {
        self.annealing = Some(annealing);
        self
    }

    pub fn with_newton(mut self, newton: bool) -> Self {
        self.newton = newton;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > T::zero()) || !self.epsilon.is_finite() {
            return Err(invalid(format!("epsilon must be positive and finite, got {}", self.epsilon)));
        }
        if !(self.marginal_tolerance > T::zero()) {
            return Err(invalid("marginal tolerance must be positive"));
        }
        if let Relaxation::Fixed(w) = self.relaxation {
            if !(w > T::zero() && w < T::lit(2.0)) {
                return Err(invalid("relaxation factor must lie in (0, 2)"));
            }
        }
        if let Some(a) = self.annealing {
            if !(a.factor > T::zero() && a.factor < T::one()) || !(a.start > T::zero()) {
                return Err(invalid("annealing needs start > 0 and factor in (0, 1)"));
            }
        }
        Ok(())
    }
}

/// Dual potentials evaluated on the two supports.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPotentials<T> {
    pub u: Array1<T>,
    pub v: Array1<T>,
}

/// Solver bookkeeping that does not affect the returned values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    /// Kernel rebuilds of the stabilized scheme.
    pub absorptions: usize,
    /// Half-steps redone in the log domain after a scaling under/overflow.
    pub log_domain_fallbacks: usize,
    /// Damped Newton steps taken after the alternating updates.
    pub newton_steps: usize,
    /// Relaxation factor in use when the solver stopped.
    pub final_relaxation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornResult<T> {
    pub potentials: DualPotentials<T>,
    pub epsilon: T,
    pub iterations: usize,
    /// Exact l1 marginal violation of the returned plan.
    pub marginal_error: T,
    pub converged: bool,
    /// `<pi, C> + eps H(pi | a x b)`.
    pub primal_value: T,
    /// Dual objective at the returned potentials.
    pub dual_value: T,
    /// `<pi, C>`.
    pub transport_cost: T,
    /// `H(pi | a x b)`.
    pub entropy: T,
    pub diagnostics: Diagnostics,
    log_a: Array1<T>,
    log_b: Array1<T>,
}

impl<T: Real> SinkhornResult<T> {
    /// Entropic transport cost `W_eps`.
    pub fn entropic_cost(&self) -> T {
        self.primal_value
    }

    pub fn duality_gap(&self) -> T {
        (self.primal_value - self.dual_value).abs()
    }

    /// Materializes `pi_ij = a_i b_j exp((u_i + v_j - C_ij) / eps)`.
    pub fn plan(&self, cost: &Array2<T>) -> Array2<T> {
        let (u, v) = (&self.potentials.u, &self.potentials.v);
        Array2::from_shape_fn(cost.dim(), |(i, j)| {
            (self.log_a[i] + self.log_b[j] + (u[i] + v[j] - cost[[i, j]]) / self.epsilon).exp()
        })
    }
}

/// `W_eps` of a solved problem.
pub fn entropic_cost<T: Real>(result: &SinkhornResult<T>) -> T {
    result.entropic_cost()
}

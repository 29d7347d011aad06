//! Entropic optimal transport between sampled measures.
//!
//! The crate solves entropy-regularized transport problems between discrete
//! measures, evaluates normalized Sinkhorn divergences, and carries the
//! constructive checks behind three facts about them: the `eps`-approximation
//! of exact transport, the Sobolev regularity of the potentials, and the
//! `1/sqrt(n)` sample complexity.
//!
//! Every numeric routine is generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`.

pub mod bench;
pub mod block_approx;
pub mod error;
pub mod exact_ot;
pub mod measures;
pub mod potentials;
pub mod rkhs;
pub mod rng;
pub mod scalar;
mod scratch;
pub mod sinkhorn;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Domain = measures::Domain<f64>;
pub type DiscreteMeasure = measures::DiscreteMeasure<f64>;
pub type GroundCost = measures::GroundCost<f64>;
pub type Sampler = measures::Sampler<f64>;
pub type ExactPlan = exact_ot::ExactPlan<f64>;
pub type SinkhornConfig = sinkhorn::SinkhornConfig<f64>;
pub type SinkhornResult = sinkhorn::SinkhornResult<f64>;
pub type DivergenceReport = sinkhorn::DivergenceReport<f64>;
pub type BlockPlan = block_approx::BlockPlan<f64>;
pub type SemiDiscreteDual = potentials::SemiDiscreteDual<f64>;
pub type Quadrature = potentials::Quadrature<f64>;
pub type MaternKernel = rkhs::MaternKernel<f64>;
pub type KernelExpansion = rkhs::KernelExpansion<f64>;
pub type TheoryConstants = rkhs::TheoryConstants<f64>;

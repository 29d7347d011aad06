use std::path::Path;

use anyhow::Result;
use sinkhorn_lab::measures::{GroundCost, Sampler};
use sinkhorn_lab::potentials::{
    check_potential, semidiscrete_potential, sobolev_scaling_experiment, PotentialCheck, Quadrature,
    ScalingInstance,
};
use sinkhorn_lab::rng::derive_seed;
use sinkhorn_lab::sinkhorn::SinkhornConfig;
use sinkhorn_lab::Error;

use super::{mark, Status};
use crate::config::Config;
use crate::output::Csv;

pub const FIRST_DERIVATIVE_TOL: f64 = 1e-5;
pub const SECOND_DERIVATIVE_TOL: f64 = 1e-4;
pub const LIPSCHITZ_SLACK: f64 = 1e-8;
pub const NORMALIZATION_TOL: f64 = 1e-10;
/// Largest relative change of the norm between the two largest `eps`.
pub const PLATEAU_TOL: f64 = 0.1;
/// Largest log-log slope of the norm against `1/eps` over the fit range.
pub const SLOPE_CAP: f64 = 1.2;

pub fn check_passes(c: &PotentialCheck<f64>) -> bool {
    c.first_derivative_error <= FIRST_DERIVATIVE_TOL
        && !(c.second_derivative_error > SECOND_DERIVATIVE_TOL)
        && c.max_abs_first_derivative <= c.lipschitz + LIPSCHITZ_SLACK
        && c.envelope_violations == 0
        && c.normalization_error <= NORMALIZATION_TOL
}

pub fn run(cfg: &Config, out: &Path) -> Result<Status> {
    let p = &cfg.potentials;
    if p.d != 1 {
        return Err(Error::Unsupported(format!(
            "the derivative recurrence and Sobolev checks are one-dimensional (got d = {})",
            p.d
        ))
        .into());
    }
    let sampler = Sampler::uniform_hypercube(1, 1.0, derive_seed(cfg.seed, "potentials", &[0]))?;
    let instance = ScalingInstance {
        source: sampler.sample(p.source_atoms)?,
        target: sampler.with_seed(derive_seed(cfg.seed, "potentials", &[1])).sample(p.target_atoms)?,
        cost: GroundCost::SquaredEuclidean,
    };
    let mut status = Status::Pass;
    let solver = |eps: f64| {
        SinkhornConfig::new(eps)
            .with_tolerance(cfg.solver.marginal_tolerance)
            .with_max_iterations(cfg.solver.max_iterations)
    };

    let mut checks = Csv::new(&[
        "epsilon",
        "first_derivative_error",
        "second_derivative_error",
        "max_abs_first_derivative",
        "lipschitz",
        "envelope_violations",
        "flipped_envelope_violations",
        "normalization_error",
        "recurrence_bounds",
        "pass",
    ]);
    println!("finite-difference residuals at {} points", p.points);
    for (k, &eps) in p.check_epsilons.iter().enumerate() {
        let (dual, _) = semidiscrete_potential(&instance.source, &instance.target, &instance.cost, &solver(eps))?;
        let c = check_potential(&dual, p.points, derive_seed(cfg.seed, "potential-points", &[k as u64]))?;
        let pass = check_passes(&c);
        if !pass {
            status = Status::Fail;
        }
        println!(
            "{} eps={eps}: u' err {:.2e}, u'' err {:.2e}, max|u'| {:.4} <= L {:.4}, envelope misses {}, \
             normalization err {:.2e}, sign-flipped envelope misses {}",
            mark(pass),
            c.first_derivative_error,
            c.second_derivative_error,
            c.max_abs_first_derivative,
            c.lipschitz,
            c.envelope_violations,
            c.normalization_error,
            c.flipped_envelope_violations,
        );
        checks.row(&[
            &eps,
            &c.first_derivative_error,
            &c.second_derivative_error,
            &c.max_abs_first_derivative,
            &c.lipschitz,
            &c.envelope_violations,
            &c.flipped_envelope_violations,
            &c.normalization_error,
            &c.recurrence_bounds.holds(),
            &pass,
        ]);
    }

    let quad = Quadrature::standard(0.0, 1.0)?;
    let range = (p.fit_range[0], p.fit_range[1]);
    let table = sobolev_scaling_experiment(&instance, &p.scaling_epsilons, p.sobolev_order, range, &quad)?;
    let mut scaling = Csv::new(&["epsilon", "norm", "converged"]);
    println!("H^{} norm of the extended potential", table.order);
    for r in &table.rows {
        println!("  eps={:<8} norm {:.6}{}", r.epsilon, r.norm, if r.converged { "" } else { " (not converged)" });
        scaling.row(&[&r.epsilon, &r.norm, &r.converged]);
    }
    let mut sorted = p.scaling_epsilons.clone();
    sorted.sort_by(f64::total_cmp);
    if let [.., e1, e2] = sorted[..] {
        if let (Some(n1), Some(n2)) = (table.norm_at(e1), table.norm_at(e2)) {
            let rel = (n1 - n2).abs() / n2.abs();
            let ok = rel <= PLATEAU_TOL;
            println!("{} plateau: |norm(eps={e1}) - norm(eps={e2})| / norm(eps={e2}) = {rel:.4}", mark(ok));
            if !ok {
                status = Status::Fail;
            }
        }
    }
    match table.slope {
        Some(s) => {
            let ok = s <= SLOPE_CAP;
            println!("{} log-log slope over eps in [{}, {}]: {s:.4} (cap {SLOPE_CAP})", mark(ok), range.0, range.1);
            if !ok {
                status = Status::Fail;
            }
        }
        None => println!("no slope: fewer than two epsilons inside the fit range"),
    }
    std::fs::create_dir_all(out)?;
    checks.write(&out.join("potentials_checks.csv"))?;
    scaling.write(&out.join("potentials_scaling.csv"))?;
    Ok(status)
}

use std::path::Path;

use anyhow::{bail, Result};
use sinkhorn_lab::block_approx::theorem1_bound;
use sinkhorn_lab::exact_ot::{brute_force_exact, solve_exact, BRUTE_FORCE_CAP};
use sinkhorn_lab::measures::{cost_matrix, DiscreteMeasure, Domain, GroundCost, Sampler};
use sinkhorn_lab::rng::derive_seed;
use sinkhorn_lab::sinkhorn::{sinkhorn_solve, SinkhornConfig};

use super::{mark, Status};
use crate::config::{Config, Theorem1Preset};
use crate::output::Csv;

/// Slack granted below zero for the regularized-minus-exact gap.
const LOWER_SLACK: f64 = 1e-9;
/// Slack granted above the bound (solver tolerance).
const UPPER_SLACK: f64 = 1e-6;

fn instance(cfg: &Config, k: usize) -> Result<(DiscreteMeasure<f64>, DiscreteMeasure<f64>)> {
    let t = &cfg.theorem1;
    Ok(match t.preset {
        Theorem1Preset::Random => {
            let s = Sampler::uniform_hypercube(t.d, 1.0, derive_seed(cfg.seed, "theorem1", &[k as u64, 0]))?;
            (s.sample(t.n)?, s.with_seed(derive_seed(cfg.seed, "theorem1", &[k as u64, 1])).sample(t.n)?)
        }
        Theorem1Preset::SingleAtom => {
            let domain = Domain::unit_cube(t.d)?;
            (
                DiscreteMeasure::dirac(&vec![0.25; t.d], domain.clone())?,
                DiscreteMeasure::dirac(&vec![0.75; t.d], domain)?,
            )
        }
        Theorem1Preset::TwoPoint => {
            let domain = Domain::interval(0.0, 3.0)?;
            (
                DiscreteMeasure::uniform_1d(&[0.0, 1.0], domain.clone())?,
                DiscreteMeasure::uniform_1d(&[2.0, 3.0], domain)?,
            )
        }
    })
}

pub fn run(cfg: &Config, out: &Path) -> Result<Status> {
    let t = &cfg.theorem1;
    if t.epsilons.is_empty() {
        bail!("theorem1 needs at least one epsilon");
    }
    let instances = match t.preset {
        Theorem1Preset::Random => t.instances,
        _ => 1,
    };
    let cost = GroundCost::from_kind(t.cost.into())?;
    let mut table = Csv::new(&["instance", "epsilon", "exact", "entropic", "gap", "bound", "converged", "pass"]);
    let mut status = Status::Pass;
    println!("{:>8} {:>8} {:>14} {:>14} {:>12} {:>12}", "instance", "epsilon", "exact", "entropic", "gap", "bound");
    for k in 0..instances {
        let (a, b) = instance(cfg, k)?;
        let domain = a.domain().clone();
        let (d, diameter) = (domain.dim(), domain.require_diameter()?);
        let lipschitz = cost.lipschitz(&domain)?;
        let c = cost_matrix(&cost, &a, &b)?;
        let exact = solve_exact(&c, a.weights(), b.weights())?.cost;
        let uniform_square = a.len() == b.len() && t.preset != Theorem1Preset::SingleAtom;
        if uniform_square && a.len() <= BRUTE_FORCE_CAP {
            let brute = brute_force_exact(&c)?;
            let ok = (brute - exact).abs() <= 1e-9 * (1.0 + brute.abs());
            println!("{} instance {k}: assignment {exact} vs enumeration {brute}", mark(ok));
            if !ok {
                status = Status::Fail;
            }
        }
        for &eps in &t.epsilons {
            let scfg = SinkhornConfig::new(eps)
                .with_tolerance(cfg.solver.marginal_tolerance)
                .with_max_iterations(cfg.solver.max_iterations);
            let r = sinkhorn_solve(&c, &a, &b, &scfg)?;
            let gap = r.primal_value - exact;
            let bound = theorem1_bound(eps, d, lipschitz, diameter)?;
            let pass = r.converged && gap >= -LOWER_SLACK && gap <= bound + UPPER_SLACK;
            if !pass {
                status = Status::Fail;
            }
            println!(
                "{k:>8} {eps:>8} {exact:>14.8} {:>14.8} {gap:>12.4e} {bound:>12.4e} {}",
                r.primal_value,
                mark(pass)
            );
            table.row(&[&k, &eps, &exact, &r.primal_value, &gap, &bound, &r.converged, &pass]);
        }
    }
    std::fs::create_dir_all(out)?;
    table.write(&out.join("theorem1.csv"))?;
    println!("{} theorem1 sandwich 0 <= W_eps - W <= bound", mark(status == Status::Pass));
    Ok(status)
}

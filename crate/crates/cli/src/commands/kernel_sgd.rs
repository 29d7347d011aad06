use std::path::Path;

use anyhow::{Context, Result};
use sinkhorn_lab::measures::{cost_matrix, GroundCost, Sampler};
use sinkhorn_lab::rkhs::{calibrate_lambda, dual_at, kernel_sgd_dual, MaternKernel, SgdConfig, SgdData, Smoothness};
use sinkhorn_lab::rng::derive_seed;
use sinkhorn_lab::sinkhorn::{sinkhorn_solve, SinkhornConfig};

use super::Status;
use crate::config::Config;
use crate::output::Csv;

/// Runs the stochastic dual ascent against the Sinkhorn oracle. This is a
/// diagnostic: a diverged run or a large gap prints a FAIL line but the
/// command still succeeds.
pub fn run(cfg: &Config, out: &Path) -> Result<Status> {
    let k = &cfg.kernel_sgd;
    let sampler = Sampler::uniform_hypercube(k.d, 1.0, derive_seed(cfg.seed, "kernel-sgd-data", &[0]))?;
    let a = sampler.sample(k.n)?;
    let b = sampler.with_seed(derive_seed(cfg.seed, "kernel-sgd-data", &[1])).sample(k.n)?;
    let cost = GroundCost::SquaredEuclidean;
    let c = cost_matrix(&cost, &a, &b)?;
    let scfg = SinkhornConfig::new(k.epsilon)
        .with_tolerance(cfg.solver.marginal_tolerance)
        .with_max_iterations(cfg.solver.max_iterations);
    let oracle = sinkhorn_solve(&c, &a, &b, &scfg)?;
    let kernel = MaternKernel::new(Smoothness::from_nu(k.nu)?, k.lengthscale, 1.0)?;
    let lambda = match k.lambda {
        Some(l) => l,
        None => {
            let u = oracle.potentials.u.as_slice().context("contiguous potentials")?;
            let v = oracle.potentials.v.as_slice().context("contiguous potentials")?;
            calibrate_lambda(&kernel, &a, u, &b, v)?
        }
    };
    println!("Sinkhorn dual {} (eps {}, n {}, d {}), ball radius {lambda}", oracle.dual_value, k.epsilon, k.n, k.d);
    if lambda == 0.0 {
        let zeros = vec![0.0; k.n];
        let w = a.weights().to_vec();
        let value = dual_at(&zeros, &zeros, &w, &b.weights().to_vec(), &c, k.epsilon);
        println!("dual objective at u = v = 0: {value}");
    }

    let mut trace = Csv::new(&["run", "iteration", "objective"]);
    let mut gaps = Vec::with_capacity(k.runs);
    let mut failed = false;
    for run in 0..k.runs {
        let scfg = SgdConfig {
            epsilon: k.epsilon,
            lambda,
            theta: k.theta,
            theta0: k.theta0,
            iterations: k.iterations,
            trace_every: k.trace_every,
            average_from: SgdConfig::new(k.epsilon, lambda).average_from,
            seed: derive_seed(cfg.seed, "kernel-sgd", &[run as u64]),
        };
        let res = kernel_sgd_dual(SgdData::Discrete { a: &a, b: &b }, &cost, &kernel, &scfg)?;
        for p in &res.trace {
            trace.row(&[&run, &p.iteration, &p.objective]);
        }
        if res.diverged {
            println!("FAIL run {run}: diverged after {} iterations", res.iterations);
            failed = true;
            continue;
        }
        let gap = (oracle.dual_value - res.dual_value) / oracle.dual_value.abs();
        println!("run {run}: averaged dual {} relative gap {gap:.4e}", res.dual_value);
        gaps.push(gap);
    }
    std::fs::create_dir_all(out)?;
    trace.write(&out.join("kernel_sgd_trace.csv"))?;
    if !gaps.is_empty() {
        let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let ok = !failed && mean_gap.abs() <= k.gap_tolerance;
        println!(
            "{} mean relative gap {mean_gap:.4e} over {} run(s) (tolerance {})",
            if ok { "PASS" } else { "FAIL" },
            gaps.len(),
            k.gap_tolerance
        );
    }
    Ok(Status::Pass)
}

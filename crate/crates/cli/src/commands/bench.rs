use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use sinkhorn_lab::bench::{
    concentration_check, fit_slopes, mean_inversions, run_grid, variance_profile, ExperimentRecord,
    MIN_CONCENTRATION_REPS,
};
use sinkhorn_lab::measures::{Domain, GroundCost};
use sinkhorn_lab::rkhs::{theory_constants, LambdaRule, MaternKernel, Smoothness, TheoryConstants};

use super::Status;
use crate::config::Config;
use crate::output::{Csv, Opt};

pub const RESULTS_HEADER: [&str; 8] = ["d", "epsilon", "n", "rep", "value", "seed", "iterations", "converged"];

pub fn results_csv(records: &[ExperimentRecord]) -> Csv {
    let mut t = Csv::new(&RESULTS_HEADER);
    for r in records {
        t.row(&[&r.d, &r.epsilon, &r.n, &r.rep, &r.value, &r.seed, &r.iterations, &r.converged]);
    }
    t
}

/// Constants of a bounded `(d, eps)` cell on the unit cube.
fn constants(cfg: &Config, d: usize, eps: f64) -> Result<TheoryConstants<f64>> {
    let domain = Domain::unit_cube(d)?;
    let cost = GroundCost::from_kind(cfg.bench.cost.into())?;
    let kernel = MaternKernel::new(Smoothness::for_dimension(d), 1.0, 1.0)?;
    Ok(theory_constants(&domain, &cost, eps, &kernel)?)
}

pub fn run(cfg: &Config, out: &Path, threads: usize) -> Result<Status> {
    let grid = cfg.grid();
    let bounded = grid.sampler.is_bounded();
    if !bounded {
        eprintln!(
            "warning: normal samples have unbounded support; the theory bound columns are omitted from summary.csv"
        );
    }
    let records = run_grid(&grid, threads)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    results_csv(&records).write(&out.join("results.csv"))?;

    let report = fit_slopes(&records);
    let mut slopes = Csv::new(&["d", "epsilon", "slope", "intercept", "residual", "n_min", "n_max", "points"]);
    for f in &report.fits {
        slopes.row(&[&f.d, &f.epsilon, &f.slope, &f.intercept, &f.residual, &f.n_min, &f.n_max, &f.points]);
    }
    slopes.write(&out.join("slopes.csv"))?;

    let mut header = vec!["d", "epsilon", "n", "reps", "mean", "std_dev", "converged_reps"];
    if bounded {
        header.extend(["rate_envelope", "deviation_radius", "fraction_within"]);
    }
    let mut summary = Csv::new(&header);
    let delta = cfg.bench.delta;
    let rule: LambdaRule = cfg.bench.lambda_rule.into();
    for c in variance_profile(&records) {
        if !bounded {
            summary.row(&[&c.d, &c.epsilon, &c.n, &c.reps, &c.mean, &c.std_dev, &c.converged_reps]);
            continue;
        }
        let k = constants(cfg, c.d, c.epsilon)?;
        let lambda = k.lambda_scale(rule);
        let fraction = if c.reps >= MIN_CONCENTRATION_REPS {
            let rows: Vec<ExperimentRecord> =
                records.iter().filter(|r| (r.d, r.epsilon, r.n) == (c.d, c.epsilon, c.n)).copied().collect();
            concentration_check(&rows, delta, Some(&k), lambda)?.fraction_within
        } else {
            None
        };
        summary.row(&[
            &c.d,
            &c.epsilon,
            &c.n,
            &c.reps,
            &c.mean,
            &c.std_dev,
            &c.converged_reps,
            &k.theorem3_rate(c.n, lambda),
            &k.deviation_radius(c.n, delta),
            &Opt(fraction),
        ]);
    }
    summary.write(&out.join("summary.csv"))?;
    // The manifest carries everything the CSV rows leave implicit, notably
    // the solver tolerance; it never mentions the thread count.
    fs::write(out.join("manifest.toml"), cfg.to_toml()?).context("writing manifest.toml")?;

    println!("{} records written to {}", records.len(), out.join("results.csv").display());
    println!("solver tolerance {} (l1 marginal error), budget {}", cfg.solver.marginal_tolerance, cfg.solver.max_iterations);
    for f in &report.fits {
        println!("d={} eps={}: slope {:.4} over n {}..{}", f.d, f.epsilon, f.slope, f.n_min, f.n_max);
    }
    for s in &report.skipped {
        println!("d={} eps={}: no slope ({})", s.d, s.epsilon, s.reason);
    }
    for ((d, eps), k) in mean_inversions(&records) {
        println!("d={d} eps={eps}: {k} mean inversion(s) along n");
    }
    if report.unconverged_rows > 0 {
        println!("{} unconverged rows excluded from the slope fits", report.unconverged_rows);
    }
    if report.nonpositive_means > 0 {
        println!("{} cells with a nonpositive mean excluded from the slope fits", report.nonpositive_means);
    }
    Ok(Status::Pass)
}

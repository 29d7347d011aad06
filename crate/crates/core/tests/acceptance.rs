//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run a subset with `cargo test -p sinkhorn-lab --test acceptance -- 3 9`.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use sinkhorn_lab::bench::{
    concentration_check, fit_slopes, mean_inversions, run_grid, ExperimentGrid, ExperimentRecord, SamplerKind,
};
use sinkhorn_lab::block_approx::{block_approximate, block_entropy_floor, optimal_delta, theorem1_bound};
use sinkhorn_lab::exact_ot::{brute_force_exact, solve_exact, BRUTE_FORCE_CAP};
use sinkhorn_lab::measures::{cost_matrix, CostKind, DiscreteMeasure, Domain, GroundCost, Sampler};
use sinkhorn_lab::potentials::{
    check_potential, semidiscrete_potential, sobolev_scaling_experiment, Quadrature, ScalingInstance,
};
use sinkhorn_lab::rkhs::{
    calibrate_lambda, kernel_sgd_dual, rademacher_bound, rademacher_mc, theory_constants, LambdaRule, MaternKernel,
    SgdConfig, SgdData, Smoothness,
};
use sinkhorn_lab::rng::{derive_seed, stream};
use sinkhorn_lab::sinkhorn::{sinkhorn_divergence, sinkhorn_solve, mmd, SinkhornConfig};
use sinkhorn_lab::Result;

const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn random_weights(rng: &mut impl Rng, n: usize) -> Array1<f64> {
    let w: Array1<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s = w.sum();
    w / s
}

fn random_cloud(rng: &mut impl Rng, n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| rng.gen::<f64>())
}

/// Duality and feasibility on random weighted instances.
fn duality() -> Result<Outcome> {
    let start = Instant::now();
    let mut rng = stream(SEED, "acceptance-duality", &[]);
    let mut worst_gap = 0.0f64;
    let mut worst_marginal = 0.0f64;
    let mut failures = 0;
    let epsilons = [0.05, 0.5, 5.0];
    for k in 0..200 {
        let d = rng.gen_range(1..=5);
        let (n, m) = (rng.gen_range(2..=100), rng.gen_range(2..=100));
        let domain = Domain::unit_cube(d)?;
        let a = DiscreteMeasure::new(random_cloud(&mut rng, n, d), random_weights(&mut rng, n), domain.clone())?;
        let b = DiscreteMeasure::new(random_cloud(&mut rng, m, d), random_weights(&mut rng, m), domain)?;
        let eps = epsilons[k % 3];
        let c = cost_matrix(&GroundCost::SquaredEuclidean, &a, &b)?;
        let r = sinkhorn_solve(&c, &a, &b, &SinkhornConfig::new(eps))?;
        let rel = r.duality_gap() / (1.0 + r.primal_value.abs());
        worst_gap = worst_gap.max(rel);
        worst_marginal = worst_marginal.max(r.marginal_error);
        if !(r.duality_gap() <= 1e-6 * (1.0 + r.primal_value.abs()) && r.marginal_error <= 1e-9) {
            failures += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && elapsed < Duration::from_secs(60),
        format!(
            "200 instances, {failures} violations, worst relative gap {worst_gap:.2e}, worst marginal error \
             {worst_marginal:.2e}, {elapsed:.1?} (limit 60s)"
        ),
    )
}

/// Unit-cube instances shared by the sandwich and block criteria.
struct CubeInstance {
    d: usize,
    a: DiscreteMeasure<f64>,
    b: DiscreteMeasure<f64>,
    cost: Array2<f64>,
}

fn cube_instances() -> Result<Vec<CubeInstance>> {
    let sizes = [2, 3, 5, 8, 12, 16, 24, 32, 48, 64];
    (0..50)
        .map(|k| {
            let d = 1 + k % 3;
            let n = sizes[k % sizes.len()];
            let s = Sampler::uniform_hypercube(d, 1.0, derive_seed(SEED, "acceptance-cube", &[k as u64, 0]))?;
            let a = s.sample(n)?;
            let b = s.with_seed(derive_seed(SEED, "acceptance-cube", &[k as u64, 1])).sample(n)?;
            let cost = cost_matrix(&GroundCost::SquaredEuclidean, &a, &b)?;
            Ok(CubeInstance { d, a, b, cost })
        })
        .collect()
}

const SANDWICH_EPSILONS: [f64; 4] = [0.02, 0.1, 0.5, 1e-3];

/// Regularized minus exact transport lies between 0 and the bound.
fn sandwich() -> Result<Outcome> {
    let mut violations = 0;
    let mut brute_checked = 0;
    let mut brute_mismatch = 0;
    let mut tightest = f64::INFINITY;
    for inst in cube_instances()? {
        let domain = inst.a.domain();
        let diameter = domain.require_diameter()?;
        let lipschitz = 2.0 * diameter;
        let exact = solve_exact(&inst.cost, inst.a.weights(), inst.b.weights())?.cost;
        if inst.a.len() <= BRUTE_FORCE_CAP {
            brute_checked += 1;
            let brute = brute_force_exact(&inst.cost)?;
            if (brute - exact).abs() > 1e-12 * (1.0 + brute.abs()) {
                brute_mismatch += 1;
            }
        }
        for eps in SANDWICH_EPSILONS {
            let r = sinkhorn_solve(&inst.cost, &inst.a, &inst.b, &SinkhornConfig::new(eps))?;
            let gap = r.primal_value - exact;
            let bound = theorem1_bound(eps, inst.d, lipschitz, diameter)?;
            tightest = tightest.min(bound + 1e-6 - gap);
            if !(r.converged && gap >= -1e-9 && gap <= bound + 1e-6) {
                violations += 1;
            }
        }
    }
    outcome(
        violations == 0 && brute_mismatch == 0,
        format!(
            "50 instances x 4 epsilons, {violations} violations, smallest upper margin {tightest:.3e}; \
             {brute_checked} brute-force cross-checks, {brute_mismatch} mismatches"
        ),
    )
}

/// Certificates of the block approximation.
fn block_certificates() -> Result<Outcome> {
    let mut failures = Vec::new();
    let mut checked = 0;
    for (k, inst) in cube_instances()?.into_iter().enumerate() {
        let domain = inst.a.domain();
        let diameter = domain.require_diameter()?;
        let lipschitz = 2.0 * diameter;
        let pi0 = solve_exact(&inst.cost, inst.a.weights(), inst.b.weights())?;
        for eps in SANDWICH_EPSILONS {
            let w_eps = sinkhorn_solve(&inst.cost, &inst.a, &inst.b, &SinkhornConfig::new(eps))?.primal_value;
            let opt = optimal_delta(eps, inst.d, lipschitz)?;
            for delta in [opt, 2.0 * opt] {
                checked += 1;
                let bp = block_approximate(&pi0, &inst.a, &inst.b, &inst.cost, delta)?;
                let rows = bp.plan.sum_axis(Axis(1));
                let cols = bp.plan.sum_axis(Axis(0));
                let marg = (&rows - inst.a.weights())
                    .iter()
                    .chain((&cols - inst.b.weights()).iter())
                    .fold(0.0f64, |m, x| m.max(x.abs()));
                let mut bad = Vec::new();
                if marg > 1e-12 {
                    bad.push(format!("marginals off by {marg:.2e}"));
                }
                if bp.cost_gap > bp.cost_gap_bound(lipschitz, inst.d) {
                    bad.push(format!("cost gap {:.3e}", bp.cost_gap));
                }
                // Equality is attainable in the first entropy inequality, so
                // it is compared up to rounding of the sums involved.
                let h_bound = bp.entropy_bound();
                let round = 1e-12 * (1.0 + h_bound.abs());
                if bp.entropy > h_bound + round {
                    bad.push(format!("H = {} > {h_bound}", bp.entropy));
                }
                let cap = -2.0 * block_entropy_floor(inst.d, diameter, delta);
                if h_bound > cap + round {
                    bad.push(format!("block entropies {h_bound} > {cap}"));
                }
                if w_eps > bp.entropic_value(eps) + 1e-8 {
                    bad.push(format!("W_eps {w_eps} above C + eps H = {}", bp.entropic_value(eps)));
                }
                if !bad.is_empty() {
                    failures.push(format!("instance {k} eps {eps} delta {delta}: {}", bad.join(", ")));
                }
            }
        }
    }
    let mut detail = format!("{checked} plans, {} failing", failures.len());
    if let Some(f) = failures.first() {
        write!(detail, "; first: {f}").ok();
    }
    outcome(failures.is_empty(), detail)
}

/// Large-eps divergence against the energy-distance MMD.
fn mmd_limit() -> Result<Outcome> {
    let eps = 1e4;
    let cost = GroundCost::SquaredEuclidean;
    let mut worst = 0.0f64;
    for k in 0..20u64 {
        let d = 1 + (k as usize) % 3;
        let n = 5 + (k as usize * 7) % 46;
        let s = Sampler::uniform_hypercube(d, 1.0, derive_seed(SEED, "acceptance-mmd", &[k, 0]))?;
        let a = s.sample(n)?;
        let b = s.with_seed(derive_seed(SEED, "acceptance-mmd", &[k, 1])).sample(n)?;
        let div = sinkhorn_divergence(&a, &b, &cost, &SinkhornConfig::new(eps))?;
        let m = mmd(&a, &b, |x: &[f64], y: &[f64]| -0.5 * cost.eval(x, y))?;
        worst = worst.max((div - m).abs());
    }
    outcome(worst <= 1e-2, format!("20 instances at eps = 1e4, largest |divergence - MMD| {worst:.3e} (limit 1e-2)"))
}

fn potential_instance() -> Result<ScalingInstance<f64>> {
    let sampler = Sampler::uniform_hypercube(1, 1.0, derive_seed(SEED, "acceptance-potentials", &[0]))?;
    Ok(ScalingInstance {
        source: sampler.sample(16)?,
        target: sampler.with_seed(derive_seed(SEED, "acceptance-potentials", &[1])).sample(8)?,
        cost: GroundCost::SquaredEuclidean,
    })
}

/// Pointwise checks of 1D semi-discrete potentials.
fn potentials() -> Result<Outcome> {
    let inst = potential_instance()?;
    let mut pass = true;
    let mut detail = String::new();
    for (k, eps) in [0.05, 0.5, 5.0].into_iter().enumerate() {
        let (dual, _) = semidiscrete_potential(&inst.source, &inst.target, &inst.cost, &SinkhornConfig::new(eps))?;
        let c = check_potential(&dual, 1000, derive_seed(SEED, "acceptance-points", &[k as u64]))?;
        let ok = c.first_derivative_error <= 1e-5
            && c.second_derivative_error <= 1e-4
            && c.max_abs_first_derivative <= c.lipschitz + 1e-8
            && c.envelope_violations == 0
            && c.normalization_error <= 1e-10;
        pass &= ok;
        write!(
            detail,
            "{}eps {eps}: u' {:.1e}, u'' {:.1e}, max|u'| {:.3} vs L {:.3}, envelope misses {}, normalization {:.1e}",
            if k > 0 { "; " } else { "" },
            c.first_derivative_error,
            c.second_derivative_error,
            c.max_abs_first_derivative,
            c.lipschitz,
            c.envelope_violations,
            c.normalization_error
        )
        .ok();
    }
    outcome(pass, detail)
}

/// Plateau and small-eps growth of the H^2 norm.
fn sobolev_scaling() -> Result<Outcome> {
    let inst = potential_instance()?;
    let epsilons = [0.01, 0.02, 0.05, 0.1, 1.0, 10.0, 100.0, 1000.0];
    let table = sobolev_scaling_experiment(&inst, &epsilons, 2, (0.01, 0.1), &Quadrature::standard(0.0, 1.0)?)?;
    let (n100, n1000) = match (table.norm_at(100.0), table.norm_at(1000.0)) {
        (Some(a), Some(b)) => (a, b),
        _ => return outcome(false, "norms at eps = 100 or 1000 missing".into()),
    };
    let rel = (n100 - n1000).abs() / n1000;
    let converged = table.rows.iter().all(|r| r.converged);
    match table.slope {
        Some(slope) => outcome(
            converged && rel <= 0.1 && slope <= 1.2,
            format!("plateau change {rel:.4} (limit 0.1), slope {slope:.4} (cap 1.2), all solves converged: {converged}"),
        ),
        None => outcome(false, "no slope over [1e-2, 1e-1]".into()),
    }
}

fn desk_grid() -> ExperimentGrid {
    ExperimentGrid { seed: SEED, ..ExperimentGrid::desk(vec![2, 5], vec![0.01, 1.0, 10.0]) }
}

/// The CSV the CLI writes for a bench run.
fn results_csv(records: &[ExperimentRecord]) -> String {
    let mut s = String::from("d,epsilon,n,rep,value,seed,iterations,converged\n");
    for r in records {
        writeln!(s, "{},{},{},{},{},{},{},{}", r.d, r.epsilon, r.n, r.rep, r.value, r.seed, r.iterations, r.converged)
            .ok();
    }
    s
}

struct DeskRun {
    threads: usize,
    csv: String,
}

/// Monotone means, slope ordering and runtime of the desk bench.
fn desk_bench(keep: &mut Option<DeskRun>) -> Result<Outcome> {
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let start = Instant::now();
    let records = run_grid(&desk_grid(), threads)?;
    let elapsed = start.elapsed();
    *keep = Some(DeskRun { threads, csv: results_csv(&records) });
    let inversions = mean_inversions(&records);
    let worst_inv = inversions.iter().map(|(_, k)| *k).max().unwrap_or(0);
    let report = fit_slopes(&records);
    let slope = |d, e| report.slope(d, e).unwrap_or(f64::NAN);
    let (s5_small, s5_large) = (slope(5, 0.01), slope(5, 10.0));
    let (s2_one, s2_ten) = (slope(2, 1.0), slope(2, 10.0));
    let unconverged = records.iter().filter(|r| !r.converged).count();
    let a = worst_inv <= 1;
    let b = s5_large <= s5_small - 0.1;
    let c = (s2_one - s2_ten).abs() <= 0.15;
    let runtime = elapsed <= Duration::from_secs(20 * 60);
    let slopes: Vec<String> = report.fits.iter().map(|f| format!("d{} eps{}: {:.3}", f.d, f.epsilon, f.slope)).collect();
    outcome(
        a && b && c && runtime,
        format!(
            "(a) max inversions {worst_inv} [{}]; (b) d=5 slope(10) {s5_large:.3} vs slope(0.01) {s5_small:.3} [{}]; \
             (c) d=2 |slope(1) - slope(10)| {:.3} [{}]; runtime {:.1} min on {threads} thread(s) [{}]; \
             {unconverged} unconverged reps; slopes {}",
            mark(a),
            mark(b),
            (s2_one - s2_ten).abs(),
            mark(c),
            elapsed.as_secs_f64() / 60.0,
            mark(runtime),
            slopes.join(", ")
        ),
    )
}

/// L1-cost and Gaussian variants of the bench harness.
fn variants() -> Result<Outcome> {
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, sampler, cost) in [
        ("l1 uniform", SamplerKind::UniformCube, CostKind::L1),
        ("quadratic gaussian", SamplerKind::StandardNormal, CostKind::SquaredEuclidean),
    ] {
        let grid = ExperimentGrid {
            ns: (5..=9).map(|k| 1usize << k).collect(),
            reps: 50,
            sampler,
            cost,
            ..desk_grid()
        };
        let records = run_grid(&grid, std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))?;
        let finite = records.iter().all(|r| r.value.is_finite());
        let worst_inv = mean_inversions(&records).iter().map(|(_, k)| *k).max().unwrap_or(0);
        let ok = finite && worst_inv <= 1;
        pass &= ok;
        detail.push(format!("{name}: finite {finite}, max inversions {worst_inv}"));
    }
    outcome(pass, detail.join("; "))
}

/// Deviation of the reps from their mean against the concentration radius.
fn concentration() -> Result<Outcome> {
    let grid = ExperimentGrid { ns: vec![256], reps: 200, ..ExperimentGrid::desk(vec![2], vec![1.0]) };
    let grid = ExperimentGrid { seed: SEED, ..grid };
    let records = run_grid(&grid, std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))?;
    let kernel = MaternKernel::new(Smoothness::for_dimension(2), 1.0, 1.0)?;
    let constants = theory_constants(&Domain::unit_cube(2)?, &GroundCost::SquaredEuclidean, 1.0, &kernel)?;
    let lambda = constants.lambda_scale(LambdaRule::SobolevOrder);
    let rep = concentration_check(&records, 0.05, Some(&constants), lambda)?;
    let fraction = rep.fraction_within.unwrap_or(0.0);
    outcome(
        fraction >= 0.95,
        format!(
            "fraction within C sqrt(2 log(1/delta)/n) = {:.3e}: {fraction} (need 0.95); largest deviation {:.3e}",
            rep.radius.unwrap_or(f64::NAN),
            rep.max_deviation
        ),
    )
}

/// Averaged kernel SGD against the Sinkhorn dual.
fn kernel_sgd() -> Result<Outcome> {
    let (n, eps) = (20, 0.5);
    let sampler = Sampler::uniform_hypercube(1, 1.0, derive_seed(SEED, "acceptance-sgd", &[0]))?;
    let a = sampler.sample(n)?;
    let b = sampler.with_seed(derive_seed(SEED, "acceptance-sgd", &[1])).sample(n)?;
    let cost = GroundCost::SquaredEuclidean;
    let c = cost_matrix(&cost, &a, &b)?;
    let oracle = sinkhorn_solve(&c, &a, &b, &SinkhornConfig::new(eps))?;
    let kernel = MaternKernel::new(Smoothness::ThreeHalves, 1.0, 1.0)?;
    let u = oracle.potentials.u.to_vec();
    let v = oracle.potentials.v.to_vec();
    let lambda = calibrate_lambda(&kernel, &a, &u, &b, &v)?;
    let mut values = Vec::new();
    let mut diverged = 0;
    for run in 0..5u64 {
        let cfg = SgdConfig { seed: derive_seed(SEED, "acceptance-sgd-run", &[run]), ..SgdConfig::new(eps, lambda) };
        let res = kernel_sgd_dual(SgdData::Discrete { a: &a, b: &b }, &cost, &kernel, &cfg)?;
        diverged += usize::from(res.diverged);
        values.push(res.dual_value);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let gap = (oracle.dual_value - mean).abs() / oracle.dual_value.abs();
    outcome(
        diverged == 0 && gap <= 0.05,
        format!(
            "Sinkhorn dual {:.6}, mean SGD dual {mean:.6} over 5 runs of 1e5 steps, relative gap {gap:.4} \
             (limit 0.05), ball radius {lambda:.3}, {diverged} diverged",
            oracle.dual_value
        ),
    )
}

/// Monte-Carlo Rademacher complexity against its closed-form bound.
fn rademacher() -> Result<Outcome> {
    let mut rng = stream(SEED, "acceptance-rademacher", &[]);
    let smooth = [Smoothness::Half, Smoothness::ThreeHalves, Smoothness::FiveHalves];
    let mut violations = 0;
    let mut worst_ratio = 0.0f64;
    for k in 0..50u64 {
        let d = rng.gen_range(1..=3);
        let n = rng.gen_range(2..=64);
        let lambda = 10f64.powf(rng.gen_range(-1.0..2.0));
        let kernel = MaternKernel::new(smooth[k as usize % 3], rng.gen_range(0.1..2.0), 1.0)?;
        let xs = random_cloud(&mut rng, n, d);
        let bound = rademacher_bound(lambda, &xs, &kernel)?;
        let mc = rademacher_mc(lambda, &xs, &kernel, 2000, derive_seed(SEED, "acceptance-rademacher-mc", &[k]))?;
        worst_ratio = worst_ratio.max(mc.mean / bound);
        if mc.mean > bound + 3.0 * mc.std_error {
            violations += 1;
        }
    }
    outcome(
        violations == 0,
        format!("50 configurations, {violations} violations, largest MC / bound {worst_ratio:.4}"),
    )
}

/// The desk bench CSV does not depend on the worker count.
fn determinism(desk: &Option<DeskRun>) -> Result<Outcome> {
    let mut csvs = Vec::new();
    for threads in [1, 4] {
        match desk {
            Some(run) if run.threads == threads => csvs.push(run.csv.clone()),
            _ => csvs.push(results_csv(&run_grid(&desk_grid(), threads)?)),
        }
    }
    let same = csvs[0] == csvs[1];
    outcome(same, format!("results.csv at 1 and 4 threads byte-identical: {same} ({} bytes)", csvs[0].len()))
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "fail"
    }
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |k: usize| selected.is_empty() || selected.contains(&k);
    let mut desk = None;
    let mut failed = 0;
    let names = [
        "duality and feasibility",
        "regularized vs exact sandwich",
        "block certificates",
        "MMD limit",
        "1D potentials",
        "Sobolev scaling",
        "desk bench",
        "l1 and gaussian variants",
        "concentration",
        "kernel SGD",
        "Rademacher complexity",
        "thread-count determinism",
    ];
    for (k, name) in names.iter().enumerate().map(|(i, n)| (i + 1, n)) {
        if !wanted(k) {
            continue;
        }
        let start = Instant::now();
        let res = match k {
            1 => duality(),
            2 => sandwich(),
            3 => block_certificates(),
            4 => mmd_limit(),
            5 => potentials(),
            6 => sobolev_scaling(),
            7 => desk_bench(&mut desk),
            8 => variants(),
            9 => concentration(),
            10 => kernel_sgd(),
            11 => rademacher(),
            _ => determinism(&desk),
        };
        let (pass, detail) = match res {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "{} criterion {k:>2} {name} ({:.1?}): {detail}",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed()
        );
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}

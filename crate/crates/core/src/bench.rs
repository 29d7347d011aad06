//! Monte-Carlo sample-complexity experiments.
//!
//! Every cell `(d, eps, n, rep)` draws two independent `n`-samples from the
//! same distribution and records their normalized divergence. Cells are
//! seeded from `(master seed, d index, eps index, n index, rep)` alone, so the
//! output does not depend on the number of threads or the execution order.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::measures::{CostKind, GroundCost, Sampler};
use crate::rkhs::TheoryConstants;
use crate::rng::derive_seed;
use crate::sinkhorn::{sinkhorn_divergence_report, SinkhornConfig, DEFAULT_MARGINAL_TOLERANCE, DEFAULT_MAX_ITERATIONS};
use crate::stats::{fit_line, mean, std_dev};

/// Distribution both samples of a cell are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplerKind {
    /// Uniform on `[0, 1]^d`.
    UniformCube,
    /// Standard normal on `R^d`.
    StandardNormal,
}

impl SamplerKind {
    pub fn sampler(self, d: usize, seed: u64) -> Result<Sampler<f64>> {
        match self {
            Self::UniformCube => Sampler::uniform_hypercube(d, 1.0, seed),
            Self::StandardNormal => Sampler::standard_normal(d, seed),
        }
    }

    pub fn is_bounded(self) -> bool {
        matches!(self, Self::UniformCube)
    }
}

/// Solver settings shared by every cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub marginal_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { marginal_tolerance: DEFAULT_MARGINAL_TOLERANCE, max_iterations: DEFAULT_MAX_ITERATIONS }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    pub dims: Vec<usize>,
    pub epsilons: Vec<f64>,
    /// Strictly increasing sample sizes.
    pub ns: Vec<usize>,
    pub reps: usize,
    pub sampler: SamplerKind,
    pub cost: CostKind,
    pub seed: u64,
    pub solver: SolverSettings,
    /// Draw both samples of a cell from the same sub-seed (the divergence is
    /// then exactly zero); a sanity mode for the harness.
    pub identical_samples: bool,
}

impl ExperimentGrid {
    /// Desk-scale defaults: `R = 100`, `n = 32, 64, ..., 4096`.
    pub fn desk(dims: Vec<usize>, epsilons: Vec<f64>) -> Self {
        Self {
            dims,
            epsilons,
            ns: (5..=12).map(|k| 1usize << k).collect(),
            reps: 100,
            sampler: SamplerKind::UniformCube,
            cost: CostKind::SquaredEuclidean,
            seed: 0,
            solver: SolverSettings::default(),
            identical_samples: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.epsilons.is_empty() || self.ns.is_empty() {
            return Err(invalid("dims, epsilons and n values must be nonempty"));
        }
        if self.dims.contains(&0) {
            return Err(invalid("dimensions must be positive"));
        }
        if self.epsilons.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(invalid("epsilons must be positive and finite"));
        }
        if self.ns[0] == 0 || self.ns.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("n values must be positive and strictly increasing"));
        }
        if self.reps < 2 {
            return Err(invalid("at least two repetitions are needed"));
        }
        if self.cost == CostKind::Custom {
            return Err(Error::Unsupported("the bench runs built-in costs only".into()));
        }
        if !(self.solver.marginal_tolerance > 0.0) || self.solver.max_iterations == 0 {
            return Err(invalid("solver tolerance and iteration budget must be positive"));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.dims.len() * self.epsilons.len() * self.ns.len() * self.reps
    }

    fn config(&self, eps: f64) -> SinkhornConfig<f64> {
        SinkhornConfig::new(eps)
            .with_tolerance(self.solver.marginal_tolerance)
            .with_max_iterations(self.solver.max_iterations)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentRecord {
    pub d: usize,
    pub epsilon: f64,
    pub n: usize,
    pub rep: usize,
    pub value: f64,
    pub seed: u64,
    /// Iterations over the three solves.
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    key: [usize; 4],
    d: usize,
    epsilon: f64,
    n: usize,
}

/// Seed of the cell with grid indices `(d, eps, n, rep)`.
pub fn cell_seed(master: u64, key: [usize; 4]) -> u64 {
    derive_seed(master, "bench-cell", &key.map(|k| k as u64))
}

fn run_cell(grid: &ExperimentGrid, cost: &GroundCost<f64>, cell: Cell) -> Result<ExperimentRecord> {
    let seed = cell_seed(grid.seed, cell.key);
    let a = grid.sampler.sampler(cell.d, derive_seed(seed, "sample", &[0]))?.sample(cell.n)?;
    let b = if grid.identical_samples {
        a.clone()
    } else {
        grid.sampler.sampler(cell.d, derive_seed(seed, "sample", &[1]))?.sample(cell.n)?
    };
    let rep = sinkhorn_divergence_report(&a, &b, cost, &grid.config(cell.epsilon))?;
    Ok(ExperimentRecord {
        d: cell.d,
        epsilon: cell.epsilon,
        n: cell.n,
        rep: cell.key[3],
        value: rep.value,
        seed,
        iterations: rep.iterations(),
        converged: rep.converged(),
    })
}

/// Runs every cell on a pool of `threads` workers. Records come back ordered
/// by `(d, eps, n, rep)` grid index.
pub fn run_grid(grid: &ExperimentGrid, threads: usize) -> Result<Vec<ExperimentRecord>> {
    grid.validate()?;
    let cost = GroundCost::from_kind(grid.cost)?;
    let mut cells = Vec::with_capacity(grid.cells());
    for (di, &d) in grid.dims.iter().enumerate() {
        for (ei, &epsilon) in grid.epsilons.iter().enumerate() {
            for (ni, &n) in grid.ns.iter().enumerate() {
                for rep in 0..grid.reps {
                    cells.push(Cell { key: [di, ei, ni, rep], d, epsilon, n });
                }
            }
        }
    }
    // Largest cells first for load balance; the output order is restored below.
    cells.sort_by(|x, y| y.n.cmp(&x.n).then(x.key.cmp(&y.key)));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    let mut out: Vec<([usize; 4], ExperimentRecord)> = pool.install(|| {
        cells
            .par_iter()
            .with_max_len(1)
            .map(|&c| run_cell(grid, &cost, c).map(|r| (c.key, r)))
            .collect::<Result<Vec<_>>>()
    })?;
    out.sort_by_key(|(k, _)| *k);
    Ok(out.into_iter().map(|(_, r)| r).collect())
}

/// Cells of a record set keyed by `(d, eps)` in first-seen order, each mapping
/// `n` to its records.
fn group(records: &[ExperimentRecord]) -> Vec<((usize, f64), BTreeMap<usize, Vec<&ExperimentRecord>>)> {
    let mut groups: Vec<((usize, f64), BTreeMap<usize, Vec<&ExperimentRecord>>)> = Vec::new();
    for r in records {
        let key = (r.d, r.epsilon);
        let idx = match groups.iter().position(|(k, _)| *k == key) {
            Some(i) => i,
            None => {
                groups.push((key, BTreeMap::new()));
                groups.len() - 1
            }
        };
        groups[idx].1.entry(r.n).or_default().push(r);
    }
    groups
}

/// Log-log fit of the mean value against `n` for one `(d, eps)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub d: usize,
    pub epsilon: f64,
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedCell {
    pub d: usize,
    pub epsilon: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SlopeReport {
    pub fits: Vec<SlopeFit>,
    pub skipped: Vec<SkippedCell>,
    /// `n` values dropped because their mean was not positive.
    pub nonpositive_means: usize,
    /// Rows left out of the means because their solve did not converge.
    pub unconverged_rows: usize,
}

impl SlopeReport {
    pub fn slope(&self, d: usize, epsilon: f64) -> Option<f64> {
        self.fits.iter().find(|f| f.d == d && f.epsilon == epsilon).map(|f| f.slope)
    }
}

/// Least squares of `log mean value` on `log n` per `(d, eps)`, over
/// converged rows only.
pub fn fit_slopes(records: &[ExperimentRecord]) -> SlopeReport {
    let mut report = SlopeReport::default();
    for ((d, epsilon), by_n) in group(records) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut ns = Vec::new();
        for (&n, rows) in &by_n {
            let vals: Vec<f64> = rows.iter().filter(|r| r.converged).map(|r| r.value).collect();
            report.unconverged_rows += rows.len() - vals.len();
            if vals.is_empty() {
                continue;
            }
            let m = mean(&vals);
            if m > 0.0 {
                xs.push((n as f64).ln());
                ys.push(m.ln());
                ns.push(n);
            } else {
                report.nonpositive_means += 1;
            }
        }
        let fit = (xs.len() >= 3).then(|| fit_line(&xs, &ys)).flatten();
        match fit {
            Some(f) => report.fits.push(SlopeFit {
                d,
                epsilon,
                slope: f.slope,
                intercept: f.intercept,
                residual: f.residual,
                n_min: ns[0],
                n_max: ns[ns.len() - 1],
                points: ns.len(),
            }),
            None => report.skipped.push(SkippedCell {
                d,
                epsilon,
                reason: format!("{} usable n values, at least 3 needed", xs.len()),
            }),
        }
    }
    report
}

/// Per-cell summary over repetitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSummary {
    pub d: usize,
    pub epsilon: f64,
    pub n: usize,
    pub reps: usize,
    pub mean: f64,
    /// `n - 1` convention.
    pub std_dev: f64,
    pub converged_reps: usize,
}

/// Mean and standard deviation of every `(d, eps, n)` cell over all its rows.
pub fn variance_profile(records: &[ExperimentRecord]) -> Vec<CellSummary> {
    let mut out = Vec::new();
    for ((d, epsilon), by_n) in group(records) {
        for (n, rows) in by_n {
            let vals: Vec<f64> = rows.iter().map(|r| r.value).collect();
            out.push(CellSummary {
                d,
                epsilon,
                n,
                reps: vals.len(),
                mean: mean(&vals),
                std_dev: std_dev(&vals),
                converged_reps: rows.iter().filter(|r| r.converged).count(),
            });
        }
    }
    out
}

/// Number of increases of the mean along increasing `n`, per `(d, eps)`.
pub fn mean_inversions(records: &[ExperimentRecord]) -> Vec<((usize, f64), usize)> {
    let profile = variance_profile(records);
    let mut out: Vec<((usize, f64), usize)> = Vec::new();
    for w in profile.windows(2) {
        let key = (w[0].d, w[0].epsilon);
        if out.last().map(|(k, _)| *k) != Some(key) {
            out.push((key, 0));
        }
        if (w[1].d, w[1].epsilon) == key && w[1].mean > w[0].mean {
            out.last_mut().expect("pushed above").1 += 1;
        }
    }
    if let Some(last) = profile.last() {
        let key = (last.d, last.epsilon);
        if out.last().map(|(k, _)| *k) != Some(key) {
            out.push((key, 0));
        }
    }
    out
}

pub const MIN_CONCENTRATION_REPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationReport {
    pub n: usize,
    pub reps: usize,
    pub delta: f64,
    pub mean: f64,
    /// `C sqrt(2 log(1/delta) / n)`, when the constants are available.
    pub radius: Option<f64>,
    /// Fraction of reps within `radius` of the cell mean.
    pub fraction_within: Option<f64>,
    /// `6 B lambda K / sqrt(n) + radius`.
    pub full_bound: Option<f64>,
    /// Largest `|value - mean|` observed.
    pub max_deviation: f64,
}

impl ConcentrationReport {
    /// Whether the fraction within the radius reaches `1 - delta`.
    pub fn holds(&self) -> Option<bool> {
        self.fraction_within.map(|f| f >= 1.0 - self.delta)
    }
}

/// Empirical check of the deviation term on the reps of one `(d, eps, n)`
/// cell. Without constants (unbounded domain) only the empirical part is
/// filled in.
pub fn concentration_check(
    records: &[ExperimentRecord],
    delta: f64,
    constants: Option<&TheoryConstants<f64>>,
    lambda: f64,
) -> Result<ConcentrationReport> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid("delta must lie in (0, 1]"));
    }
    let Some(first) = records.first() else {
        return Err(invalid("no records"));
    };
    if records.iter().any(|r| (r.d, r.epsilon, r.n) != (first.d, first.epsilon, first.n)) {
        return Err(invalid("records span several cells"));
    }
    if records.len() < MIN_CONCENTRATION_REPS {
        return Err(invalid(format!(
            "{} reps, at least {MIN_CONCENTRATION_REPS} needed",
            records.len()
        )));
    }
    let vals: Vec<f64> = records.iter().map(|r| r.value).collect();
    let m = mean(&vals);
    let max_deviation = vals.iter().map(|v| (v - m).abs()).fold(0.0, f64::max);
    let radius = constants.map(|c| c.deviation_radius(first.n, delta));
    let fraction_within = radius.map(|r| {
        vals.iter().filter(|v| (*v - m).abs() <= r).count() as f64 / vals.len() as f64
    });
    let full_bound = constants.map(|c| c.concentration_bound(first.n, delta, lambda));
    Ok(ConcentrationReport {
        n: first.n,
        reps: records.len(),
        delta,
        mean: m,
        radius,
        fraction_within,
        full_bound,
        max_deviation,
    })
}

//! Run configuration: one TOML file with a section per command. Every field
//! has a default, unknown keys are rejected, and command-line flags override
//! whatever the file sets.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sinkhorn_lab::bench::{ExperimentGrid, SamplerKind, SolverSettings};
use sinkhorn_lab::measures::CostKind;
use sinkhorn_lab::rkhs::{LambdaRule, Smoothness};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub solver: SolverSection,
    pub bench: BenchSection,
    pub theorem1: Theorem1Section,
    pub potentials: PotentialsSection,
    pub kernel_sgd: KernelSgdSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            solver: SolverSection::default(),
            bench: BenchSection::default(),
            theorem1: Theorem1Section::default(),
            potentials: PotentialsSection::default(),
            kernel_sgd: KernelSgdSection::default(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// The bench grid this configuration describes.
    pub fn grid(&self) -> ExperimentGrid {
        ExperimentGrid {
            dims: self.bench.dims.clone(),
            epsilons: self.bench.epsilons.clone(),
            ns: self.bench.ns.clone(),
            reps: self.bench.reps,
            sampler: self.bench.dist.into(),
            cost: self.bench.cost.into(),
            seed: self.seed,
            solver: SolverSettings {
                marginal_tolerance: self.solver.marginal_tolerance,
                max_iterations: self.solver.max_iterations,
            },
            identical_samples: self.bench.identical_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub marginal_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverSettings::default();
        Self { marginal_tolerance: s.marginal_tolerance, max_iterations: s.max_iterations }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Dist {
    Uniform,
    Normal,
}

impl From<Dist> for SamplerKind {
    fn from(d: Dist) -> Self {
        match d {
            Dist::Uniform => SamplerKind::UniformCube,
            Dist::Normal => SamplerKind::StandardNormal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Cost {
    Sqeuclidean,
    L1,
}

impl From<Cost> for CostKind {
    fn from(c: Cost) -> Self {
        match c {
            Cost::Sqeuclidean => CostKind::SquaredEuclidean,
            Cost::L1 => CostKind::L1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    SobolevOrder,
    HalfDimension,
}

impl From<Rule> for LambdaRule {
    fn from(r: Rule) -> Self {
        match r {
            Rule::SobolevOrder => LambdaRule::SobolevOrder,
            Rule::HalfDimension => LambdaRule::HalfDimension,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub dims: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub ns: Vec<usize>,
    pub reps: usize,
    pub dist: Dist,
    pub cost: Cost,
    pub identical_samples: bool,
    /// Confidence parameter of the deviation-radius column.
    pub delta: f64,
    /// Ball-radius scaling used in the rate column.
    pub lambda_rule: Rule,
}

impl Default for BenchSection {
    fn default() -> Self {
        let g = ExperimentGrid::desk(vec![2, 5], vec![0.01, 1.0, 10.0]);
        Self {
            dims: g.dims,
            epsilons: g.epsilons,
            ns: g.ns,
            reps: g.reps,
            dist: Dist::Uniform,
            cost: Cost::Sqeuclidean,
            identical_samples: false,
            delta: 0.05,
            lambda_rule: Rule::SobolevOrder,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem1Preset {
    /// Random uniform samples on the unit cube.
    Random,
    /// Two Dirac masses; the regularized and exact values coincide.
    SingleAtom,
    /// `(d0 + d1)/2` against `(d2 + d3)/2` on `[0, 3]`.
    TwoPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Theorem1Section {
    pub preset: Theorem1Preset,
    pub instances: usize,
    pub n: usize,
    pub d: usize,
    pub epsilons: Vec<f64>,
    pub cost: Cost,
}

impl Default for Theorem1Section {
    fn default() -> Self {
        Self {
            preset: Theorem1Preset::Random,
            instances: 10,
            n: 16,
            d: 2,
            epsilons: vec![0.001, 0.02, 0.1, 0.5],
            cost: Cost::Sqeuclidean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialsSection {
    pub d: usize,
    pub source_atoms: usize,
    pub target_atoms: usize,
    /// Regularizations at which the pointwise checks run.
    pub check_epsilons: Vec<f64>,
    pub points: usize,
    pub sobolev_order: usize,
    pub scaling_epsilons: Vec<f64>,
    pub fit_range: [f64; 2],
}

impl Default for PotentialsSection {
    fn default() -> Self {
        Self {
            d: 1,
            source_atoms: 16,
            target_atoms: 8,
            check_epsilons: vec![0.05, 0.5, 5.0],
            points: 1000,
            sobolev_order: 2,
            scaling_epsilons: vec![0.01, 0.02, 0.05, 0.1, 1.0, 10.0, 100.0, 1000.0],
            fit_range: [0.01, 0.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSgdSection {
    pub n: usize,
    pub d: usize,
    pub epsilon: f64,
    /// Ball radius; calibrated from the Sinkhorn potentials when absent.
    pub lambda: Option<f64>,
    pub iterations: usize,
    pub trace_every: usize,
    pub theta: f64,
    pub theta0: f64,
    /// Matérn smoothness `nu` (0.5, 1.5 or 2.5).
    pub nu: f64,
    pub lengthscale: f64,
    pub runs: usize,
    /// Largest relative gap to the Sinkhorn dual reported as PASS.
    pub gap_tolerance: f64,
}

impl Default for KernelSgdSection {
    fn default() -> Self {
        Self {
            n: 20,
            d: 1,
            epsilon: 0.5,
            lambda: None,
            iterations: 100_000,
            trace_every: 1000,
            theta: 1.0,
            theta0: 1.0,
            nu: Smoothness::ThreeHalves.nu(),
            lengthscale: 1.0,
            runs: 1,
            gap_tolerance: 0.05,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = Config::default();
        let text = c.to_toml().unwrap();
        assert_eq!(Config::parse(&text).unwrap(), c);
    }

    #[test]
    fn edited_round_trips() {
        let mut c = Config::default();
        // TOML integers are signed 64-bit.
        c.seed = i64::MAX as u64;
        c.bench.epsilons = vec![0.1 + 0.2, 1e-300, 7.0];
        c.kernel_sgd.lambda = Some(3.25);
        c.theorem1.preset = Theorem1Preset::TwoPoint;
        let back = Config::parse(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.bench.epsilons[0].to_bits(), (0.1f64 + 0.2).to_bits());
    }

    #[test]
    fn partial_files_and_unknown_keys() {
        let c = Config::parse("seed = 7\n[bench]\nreps = 3\n").unwrap();
        assert_eq!((c.seed, c.bench.reps), (7, 3));
        assert_eq!(c.bench.dims, vec![2, 5]);
        assert!(Config::parse("sed = 7\n").is_err());
        assert!(Config::parse("[bench]\nrepz = 3\n").is_err());
        assert!(Config::parse("[bench]\ndist = \"cauchy\"\n").is_err());
    }

    #[test]
    fn grid_mirrors_sections() {
        let mut c = Config::default();
        c.seed = 11;
        c.bench.dist = Dist::Normal;
        c.solver.marginal_tolerance = 1e-7;
        let g = c.grid();
        assert_eq!(g.seed, 11);
        assert_eq!(g.sampler, SamplerKind::StandardNormal);
        assert_eq!(g.solver.marginal_tolerance, 1e-7);
        assert_eq!(g.ns, vec![32, 64, 128, 256, 512, 1024, 2048, 4096]);
    }
}

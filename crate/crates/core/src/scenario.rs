//! TOML scenario files.
//!
//! Matrices are written row by row (`[[1.0, 0.0], [0.0, 1.0]]`). Schedules
//! carry a `form` tag:
//!
//! ```toml
//! a = { form = "constant", value = [[0.0, 1.0], [0.0, 0.0]] }
//! a = { form = "polynomial", entries = [[[0.8, -0.1]]] }   # per entry, ascending powers
//! a = { form = "piecewise_constant", breaks = [0.0, 0.5], values = [[[1.0]], [[2.0]]] }
//! a = { form = "table", times = [0.0, 1.0], values = [[[1.0]], [[2.0]]] }
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::montecarlo::SimulationOptions;
use crate::noise::{JumpChannel, JumpLaw, NoiseComponent, NoiseSpec};
use crate::schedule::{MatrixSchedule, ScheduleForm};
use crate::steering::SolveOptions;
use crate::system::{uniform_grid, LtvSystem, SteeringProblem};

const EXAMPLE1: &str = include_str!("../scenarios/example1.toml");
const EXAMPLE2: &str = include_str!("../scenarios/example2.toml");

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ScheduleSpec {
    Constant { value: Rows },
    Polynomial { entries: Vec<Vec<Vec<f64>>> },
    PiecewiseConstant { breaks: Vec<f64>, values: Vec<Rows> },
    Table { times: Vec<f64>, values: Vec<Rows> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum LawSpec {
    Constant { value: f64 },
    Normal { mean: f64, std_dev: f64 },
    Exponential { rate: f64 },
    TwoPoint { low: f64, high: f64, p_low: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub rate: ScheduleSpec,
    pub law: LawSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseBlock {
    Wiener {
        scale: Rows,
    },
    CompoundPoisson {
        #[serde(default)]
        compensated: bool,
        channels: Vec<ChannelSpec>,
    },
    Precomputed {
        rate: ScheduleSpec,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    pub a: ScheduleSpec,
    pub b: ScheduleSpec,
    pub c: ScheduleSpec,
    pub r: ScheduleSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    pub mu0: Vec<f64>,
    pub sigma0: Rows,
    pub mu1: Vec<f64>,
    pub sigma1: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverBlock {
    pub tol: f64,
    pub max_iterations: usize,
    pub homotopy: bool,
    pub warm_start: bool,
    /// Points of the controllability check grid.
    pub check_points: usize,
    pub rank_tol: f64,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let s = SolveOptions::default();
        SolverBlock {
            tol: s.tol,
            max_iterations: s.max_iterations,
            homotopy: s.homotopy,
            warm_start: s.warm_start,
            check_points: 101,
            rank_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationBlock {
    pub paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub record_stride: usize,
    pub keep_paths: usize,
}

impl Default for SimulationBlock {
    fn default() -> Self {
        let s = SimulationOptions::default();
        SimulationBlock {
            paths: s.n_paths,
            dt: s.dt,
            seed: s.seed,
            record_stride: s.record_stride,
            keep_paths: s.keep_paths,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: String,
    pub gains: bool,
    pub pi: bool,
    pub moments: bool,
    pub paths: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            dir: "out".into(),
            gains: true,
            pi: false,
            moments: true,
            paths: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub system: SystemBlock,
    #[serde(default)]
    pub noise: Vec<NoiseBlock>,
    pub problem: ProblemBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub simulation: SimulationBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

fn matrix(rows: &Rows, what: &str) -> Result<Mat> {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    if r == 0 || c == 0 || rows.iter().any(|x| x.len() != c) {
        return Err(Error::Scenario(format!("{what}: matrix rows must be nonempty and of equal length")));
    }
    Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
}

fn rows_of(m: &Mat) -> Rows {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl ScheduleSpec {
    pub fn build(&self, what: &str) -> Result<MatrixSchedule> {
        let mats = |v: &[Rows]| v.iter().map(|r| matrix(r, what)).collect::<Result<Vec<_>>>();
        match self {
            ScheduleSpec::Constant { value } => Ok(MatrixSchedule::constant(matrix(value, what)?)),
            ScheduleSpec::Polynomial { entries } => MatrixSchedule::polynomial(entries.clone()),
            ScheduleSpec::PiecewiseConstant { breaks, values } => {
                MatrixSchedule::piecewise_constant(breaks.clone(), mats(values)?)
            }
            ScheduleSpec::Table { times, values } => MatrixSchedule::tabulated(times.clone(), mats(values)?),
        }
    }

    pub fn from_schedule(s: &MatrixSchedule) -> Self {
        let (r, c) = s.shape();
        match s.form() {
            ScheduleForm::Constant(m) => ScheduleSpec::Constant { value: rows_of(m) },
            ScheduleForm::Polynomial { coefficients } => ScheduleSpec::Polynomial {
                entries: (0..r)
                    .map(|i| (0..c).map(|j| coefficients[j * r + i].clone()).collect())
                    .collect(),
            },
            ScheduleForm::PiecewiseConstant { breaks, values } => ScheduleSpec::PiecewiseConstant {
                breaks: breaks.clone(),
                values: values.iter().map(rows_of).collect(),
            },
            ScheduleForm::Tabulated { times, values } => ScheduleSpec::Table {
                times: times.clone(),
                values: values.iter().map(rows_of).collect(),
            },
        }
    }
}

impl LawSpec {
    fn build(&self) -> JumpLaw {
        match *self {
            LawSpec::Constant { value } => JumpLaw::Constant(value),
            LawSpec::Normal { mean, std_dev } => JumpLaw::Normal { mean, std_dev },
            LawSpec::Exponential { rate } => JumpLaw::Exponential { rate },
            LawSpec::TwoPoint { low, high, p_low } => JumpLaw::TwoPoint { low, high, p_low },
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Embedded scenarios: `example1`, `example2`.
    pub fn builtin(name: &str) -> Option<Self> {
        let text = match name {
            "example1" => EXAMPLE1,
            "example2" => EXAMPLE2,
            _ => return None,
        };
        Some(Self::from_toml(text).expect("embedded scenario parses"))
    }

    pub fn build_system(&self) -> Result<LtvSystem> {
        let s = &self.system;
        let c = s.c.build("c")?;
        let q = c.cols();
        let mut comps = Vec::with_capacity(self.noise.len());
        for block in &self.noise {
            comps.push(match block {
                NoiseBlock::Wiener { scale } => NoiseComponent::Wiener {
                    scale: matrix(scale, "wiener scale")?,
                },
                NoiseBlock::CompoundPoisson { compensated, channels } => NoiseComponent::CompoundPoisson {
                    channels: channels
                        .iter()
                        .map(|ch| JumpChannel::new(ch.rate.build("jump rate")?, ch.law.build()))
                        .collect::<Result<_>>()?,
                    compensated: *compensated,
                },
                NoiseBlock::Precomputed { rate } => NoiseComponent::Precomputed {
                    rate: rate.build("precomputed rate")?,
                },
            });
        }
        LtvSystem::new(
            s.a.build("a")?,
            s.b.build("b")?,
            c,
            s.r.build("r")?,
            NoiseSpec::new(q, comps)?,
        )
    }

    pub fn build_problem(&self) -> Result<SteeringProblem> {
        let p = &self.problem;
        SteeringProblem::new(
            Vector::from_vec(p.mu0.clone()),
            matrix(&p.sigma0, "sigma0")?,
            Vector::from_vec(p.mu1.clone()),
            matrix(&p.sigma1, "sigma1")?,
        )
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.solver.tol,
            max_iterations: self.solver.max_iterations,
            homotopy: self.solver.homotopy,
            warm_start: self.solver.warm_start,
        }
    }

    pub fn check_grid(&self) -> Vec<f64> {
        uniform_grid(self.solver.check_points.max(2))
    }

    pub fn simulation_options(&self) -> SimulationOptions {
        SimulationOptions {
            n_paths: self.simulation.paths,
            dt: self.simulation.dt,
            seed: self.simulation.seed,
            record_stride: self.simulation.record_stride,
            keep_paths: self.simulation.keep_paths,
            threads: None,
        }
    }
}

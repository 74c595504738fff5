//! Optimal covariance steering for linear time-varying systems driven by
//! Wiener and compound-Poisson noise.

pub mod controller;
pub mod error;
pub mod linalg;
pub mod montecarlo;
pub mod noise;
pub mod ode;
pub mod propagation;
pub mod quadrature;
pub mod riccati;
pub mod scenario;
pub mod schedule;
pub mod steering;
pub mod system;

pub use controller::{synthesize, ControlLaw, FeedbackLaw, GainSchedule, Synthesis};
pub use error::{Error, Result};
pub use linalg::{Mat, Vector};
pub use montecarlo::{covariance_ode, empirical_moments, mean_ode, simulate, PathEnsemble, SimulationOptions};
pub use noise::{JumpChannel, JumpLaw, NoiseComponent, NoiseSpec};
pub use propagation::{check_controllability, ControllabilityReport, GramianTable};
pub use riccati::RiccatiSolution;
pub use scenario::Scenario;
pub use schedule::MatrixSchedule;
pub use steering::{solve_pi0, BoundaryMapWorkspace, Eta, SolveOptions, SolverTrace};
pub use system::{LtvSystem, SteeringProblem};

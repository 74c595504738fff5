//! The optimal control law `u = K(t) x + nu(t)`.
//!
//! `K = -R^{-1} B^T Pi` comes from the Riccati flow anchored at the solved
//! `Pi0`. The feedforward has two parts:
//!
//! * drift cancellation `u_c = -R^{-1} B^T W^+ C g`, which removes the part
//!   of the jump compensator drift lying in the range of `W = B R^{-1} B^T`;
//! * minimum-energy mean steering through the closed loop `Psi = Phi_{A - W Pi}`,
//!   `nu_m(t) = R^{-1} B^T Psi(1, t)^T M^{-1} (mu1 - Psi(1, 0) mu0 - int Psi(1, s) h ds)`,
//!   `M = int Psi(1, s) W Psi(1, s)^T ds`, with `h = C g + B u_c` the drift left over.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::propagation::GramianTable;
use crate::quadrature::{integrate_graded_mat, simpson_uniform};
use crate::steering::{self, SolveOptions, SolverTrace};
use crate::system::{uniform_grid, LtvSystem, SteeringProblem};

/// Number of points of the default gain grid.
pub const GAIN_GRID_POINTS: usize = 1001;

/// A feedback law `u = K(t) x + nu(t)`.
pub trait FeedbackLaw: Sync {
    fn gain(&self, t: f64) -> Mat;
    fn feedforward(&self, t: f64) -> Vector;
}

/// Law evaluated from the closed forms at any `t`.
#[derive(Debug, Clone)]
pub struct ControlLaw {
    system: LtvSystem,
    table: GramianTable,
    pi0: Mat,
    /// `Phi_{A - W Pi}(1, 0)`.
    phi_cl10: Mat,
    /// `M^{-1} d`, the costate of the mean two-point problem.
    costate: Vector,
}

impl ControlLaw {
    pub fn new(system: &LtvSystem, pi0: &Mat, mu0: &Vector, mu1: &Vector) -> Result<Self> {
        let n = system.n();
        let table = GramianTable::new(system)?;
        let pi0 = linalg::symmetrize(pi0);
        if !(linalg::upper_margin(&table.gramian_from0(1.0), &pi0) > 0.0) {
            return Err(Error::Infeasible("Pi0 violates Pi0 < N(1,0)^-1".into()));
        }
        let id = Mat::identity(n, n);
        let (phi10, _, n10) = table.state(1.0);
        let phi_cl10 = &phi10 * (&id - &n10 * &pi0);
        let mut law = ControlLaw {
            system: system.clone(),
            table,
            pi0,
            phi_cl10,
            costate: Vector::zeros(n),
        };
        // Psi(0, s) = (I - N_s Pi0)^{-1} Phi(0, s)
        let inner_m = integrate_graded_mat(
            |s| {
                let g = law.psi_0s(s);
                &g * law.system.control_weight(s) * g.transpose()
            },
            0.0,
            1.0,
            1e-12,
            0.0,
        )
        .0;
        let m = linalg::symmetrize(&(&law.phi_cl10 * inner_m * law.phi_cl10.transpose()));
        let drift_scale = (0..=10)
            .map(|k| law.residual_drift(k as f64 / 10.0).norm())
            .fold(0.0, f64::max);
        let drift_int = if drift_scale > 0.0 {
            integrate_graded_mat(
                |s| {
                    let v = law.psi_0s(s) * law.residual_drift(s);
                    Mat::from_column_slice(n, 1, v.as_slice())
                },
                0.0,
                1.0,
                1e-12,
                0.0,
            )
            .0
            .column(0)
            .into_owned()
        } else {
            Vector::zeros(n)
        };
        let d = mu1 - &law.phi_cl10 * mu0 - &law.phi_cl10 * drift_int;
        let m_inv = linalg::spd_inverse(&m)
            .map_err(|_| Error::Infeasible("closed-loop controllability Gramian is singular".into()))?;
        law.costate = m_inv * d;
        Ok(law)
    }

    pub fn system(&self) -> &LtvSystem {
        &self.system
    }

    pub fn table(&self) -> &GramianTable {
        &self.table
    }

    pub fn pi0(&self) -> &Mat {
        &self.pi0
    }

    fn x_inv(&self, n_s: &Mat) -> Mat {
        let n = self.pi0.nrows();
        (Mat::identity(n, n) - n_s * &self.pi0)
            .try_inverse()
            .unwrap_or_else(|| Mat::from_element(n, n, f64::NAN))
    }

    /// `Phi_{A - W Pi}(0, s)`.
    fn psi_0s(&self, s: f64) -> Mat {
        let (_, phi0s, n_s) = self.table.state(s);
        self.x_inv(&n_s) * phi0s
    }

    /// `Pi(t) = Phi(0, t)^T Pi0 (I - N(t, 0) Pi0)^{-1} Phi(0, t)`.
    pub fn pi(&self, t: f64) -> Mat {
        let (_, phi0t, n_t) = self.table.state(t);
        linalg::symmetrize(&(phi0t.transpose() * &self.pi0 * self.x_inv(&n_t) * phi0t))
    }

    /// Drift-cancelling feedforward `-R^{-1} B^T W^+ C g`.
    pub fn drift_cancellation(&self, t: f64) -> Vector {
        let g = self.system.jump_drift(t);
        if g.iter().all(|&x| x == 0.0) {
            return Vector::zeros(self.system.p());
        }
        let w = self.system.control_weight(t);
        let w_pinv = w
            .clone()
            .pseudo_inverse(1e-12 * w.amax().max(f64::MIN_POSITIVE))
            .unwrap_or_else(|_| Mat::zeros(w.nrows(), w.ncols()));
        -(self.system.r_inv(t) * self.system.b().eval(t).transpose() * w_pinv * g)
    }

    /// Jump drift not cancelled by [`Self::drift_cancellation`].
    pub fn residual_drift(&self, t: f64) -> Vector {
        self.system.jump_drift(t) + self.system.b().eval(t) * self.drift_cancellation(t)
    }

    /// Minimum-energy mean-steering feedforward.
    pub fn mean_feedforward(&self, t: f64) -> Vector {
        let psi_1t = &self.phi_cl10 * self.psi_0s(t);
        self.system.r_inv(t) * self.system.b().eval(t).transpose() * psi_1t.transpose() * &self.costate
    }
}

impl FeedbackLaw for ControlLaw {
    fn gain(&self, t: f64) -> Mat {
        -(self.system.r_inv(t) * self.system.b().eval(t).transpose() * self.pi(t))
    }

    fn feedforward(&self, t: f64) -> Vector {
        self.drift_cancellation(t) + self.mean_feedforward(t)
    }
}

/// Gains and feedforward sampled on a uniform grid, interpolated linearly.
#[derive(Debug, Clone)]
pub struct GainSchedule {
    pub grid: Vec<f64>,
    pub k: Vec<Mat>,
    pub nu: Vec<Vector>,
    pub pi: Vec<Mat>,
}

impl GainSchedule {
    pub fn sample(law: &ControlLaw, points: usize) -> Result<Self> {
        let grid = uniform_grid(points.max(2));
        let k: Vec<Mat> = grid.iter().map(|&t| law.gain(t)).collect();
        if k.iter().any(|m| !linalg::all_finite(m)) {
            return Err(Error::Infeasible("gain schedule has non-finite entries".into()));
        }
        Ok(GainSchedule {
            nu: grid.iter().map(|&t| law.feedforward(t)).collect(),
            pi: grid.iter().map(|&t| law.pi(t)).collect(),
            grid,
            k,
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let m = self.grid.len() - 1;
        let h = 1.0 / m as f64;
        let x = (t / h).clamp(0.0, m as f64);
        let i = (x.floor() as usize).min(m - 1);
        (i, x - i as f64)
    }
}

impl FeedbackLaw for GainSchedule {
    fn gain(&self, t: f64) -> Mat {
        let (i, w) = self.locate(t);
        &self.k[i] * (1.0 - w) + &self.k[i + 1] * w
    }

    fn feedforward(&self, t: f64) -> Vector {
        let (i, w) = self.locate(t);
        &self.nu[i] * (1.0 - w) + &self.nu[i + 1] * w
    }
}

/// Everything produced by [`synthesize`].
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub pi0: Mat,
    pub trace: SolverTrace,
    pub law: ControlLaw,
    pub schedule: GainSchedule,
}

/// Solve for `Pi0` and assemble the control law.
pub fn synthesize(system: &LtvSystem, problem: &SteeringProblem, opts: &SolveOptions) -> Result<Synthesis> {
    problem.check_against(system)?;
    let (pi0, trace) = if system.n() == 1 {
        let pi0 = steering::solve_pi0_scalar(system, problem.sigma0[(0, 0)], problem.sigma1[(0, 0)])?;
        let residual = (steering::boundary_map(system, &problem.sigma0, &pi0)? - &problem.sigma1).norm();
        let trace = SolverTrace {
            iterates: vec![steering::Iterate {
                pi0: pi0.as_slice().to_vec(),
                residual,
                damping: 1.0,
                theta: 1.0,
            }],
            converged: true,
            final_residual: residual,
            ..Default::default()
        };
        (pi0, trace)
    } else {
        steering::solve_pi0(system, problem, opts)?
    };
    let law = ControlLaw::new(system, &pi0, &problem.mu0, &problem.mu1)?;
    let schedule = GainSchedule::sample(&law, GAIN_GRID_POINTS)?;
    Ok(Synthesis { pi0, trace, law, schedule })
}

/// `E int u^T R u dt` from moment trajectories on the schedule grid, by
/// composite Simpson.
pub fn expected_cost(system: &LtvSystem, schedule: &GainSchedule, sigma: &[Mat], mu: &[Vector]) -> Result<f64> {
    let m = schedule.len();
    if sigma.len() != m || mu.len() != m {
        return Err(Error::InvalidModel(format!(
            "moment trajectories have {} and {} points, schedule has {m}",
            sigma.len(),
            mu.len()
        )));
    }
    let vals: Vec<f64> = (0..m)
        .map(|i| {
            let t = schedule.grid[i];
            let r = system.r().eval(t);
            let k = &schedule.k[i];
            let mean_u = k * &mu[i] + &schedule.nu[i];
            (&r * k * &sigma[i] * k.transpose()).trace() + mean_u.dot(&(&r * &mean_u))
        })
        .collect();
    Ok(simpson_uniform(&vals, 1.0 / (m - 1) as f64))
}

//! The boundary map `f: Pi(0) -> Sigma(1)`, its Jacobian, and solvers that
//! invert it.
//!
//! With `N_s = N(s, 0)`, `Phi_{ts} = Phi_A(t, s)` and noise kernel
//! `K_s = C D C^T (s)`:
//!
//! `f(Pi0) = Phi_10 (I - N_10 Pi0) [Sigma0 + int_0^1 P_s ds] (I - Pi0 N_10) Phi_10^T`,
//! `P_s = (I - N_s Pi0)^{-1} Phi_0s K_s Phi_0s^T (I - Pi0 N_s)^{-1}`,
//! `T_s = (I - N_s Pi0)^{-1} N_s`.

mod newton;
mod scalar;

pub use newton::{closed_form_pi0, solve_pi0, solve_with_workspace, Iterate, SolveOptions, SolverTrace};
pub use scalar::{eta, solve_pi0_scalar, Eta};

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::propagation::GramianTable;
use crate::quadrature::{GradedRule, MAX_LEVEL};
use crate::system::LtvSystem;

/// Relative agreement required between successive quadrature levels.
pub const QUAD_REL_TOL: f64 = 1e-10;
/// Feasibility floor: `lambda_max(N_10^{1/2} Pi0 N_10^{1/2}) < 1 - FEAS_MARGIN`.
pub const FEAS_MARGIN: f64 = 1e-10;

#[derive(Debug)]
struct LevelData {
    weights: Vec<f64>,
    /// `N(s, 0)`.
    ns: Vec<Mat>,
    /// `Phi(0, s) W(s) Phi(0, s)^T`.
    qw: Vec<Mat>,
    /// `Phi(0, s) K(s) Phi(0, s)^T`.
    qk: Vec<Mat>,
}

/// Cached data for repeated evaluations of the boundary map of one system.
#[derive(Debug)]
pub struct BoundaryMapWorkspace<'a> {
    system: &'a LtvSystem,
    table: GramianTable,
    sigma0: Mat,
    phi10: Mat,
    phi01: Mat,
    n10: Mat,
    /// Kernel blend `(1 - theta) * scale * W + theta * C D C^T`.
    theta: f64,
    scale: f64,
    levels: Vec<OnceLock<LevelData>>,
}

/// One evaluation of the map with the intermediate quantities the Jacobian needs.
#[derive(Debug, Clone)]
pub struct MapValue {
    pub sigma1: Mat,
    /// `int_0^1 P_s ds`.
    pub noise_integral: Mat,
    /// `Phi_{A - W Pi}(1, 0) = Phi_10 (I - N_10 Pi0)`.
    pub phi_cl10: Mat,
    pub level: usize,
}

impl<'a> BoundaryMapWorkspace<'a> {
    pub fn new(system: &'a LtvSystem, sigma0: &Mat) -> Result<Self> {
        let table = GramianTable::new(system)?;
        Self::with_table(system, table, sigma0)
    }

    pub fn with_table(system: &'a LtvSystem, table: GramianTable, sigma0: &Mat) -> Result<Self> {
        let n = system.n();
        if sigma0.shape() != (n, n) {
            return Err(Error::dim("Sigma0", (n, n), sigma0.shape()));
        }
        let (phi10, phi01, n10) = table.state(1.0);
        Ok(BoundaryMapWorkspace {
            system,
            table,
            sigma0: linalg::symmetrize(sigma0),
            phi10,
            phi01,
            n10,
            theta: 1.0,
            scale: 1.0,
            levels: (0..=MAX_LEVEL).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn system(&self) -> &LtvSystem {
        self.system
    }

    pub fn table(&self) -> &GramianTable {
        &self.table
    }

    pub fn n(&self) -> usize {
        self.system.n()
    }

    pub fn sigma0(&self) -> &Mat {
        &self.sigma0
    }

    pub fn n10(&self) -> &Mat {
        &self.n10
    }

    /// `Phi_A(1, 0)`.
    pub fn phi10(&self) -> &Mat {
        &self.phi10
    }

    /// `Phi_A(0, 1)`.
    pub fn phi01(&self) -> &Mat {
        &self.phi01
    }

    /// Replace the noise kernel by `(1 - theta) * scale * W + theta * C D C^T`.
    pub fn set_blend(&mut self, theta: f64, scale: f64) {
        self.theta = theta;
        self.scale = scale;
    }

    pub fn blend(&self) -> (f64, f64) {
        (self.theta, self.scale)
    }

    /// Kernel in effect at time `s`.
    pub fn kernel(&self, s: f64) -> Mat {
        self.blend_kernel(&self.system.control_weight(s), &self.system.noise_kernel(s))
    }

    fn blend_kernel(&self, w: &Mat, k: &Mat) -> Mat {
        if self.theta == 1.0 {
            k.clone()
        } else if self.theta == 0.0 {
            w * self.scale
        } else {
            w * ((1.0 - self.theta) * self.scale) + k * self.theta
        }
    }

    /// `int tr(C D C^T) / int tr(W)` over [0, 1].
    pub fn kernel_scale(&self) -> f64 {
        let lv = self.level(0);
        let (mut num, mut den) = (0.0, 0.0);
        let rule = GradedRule::new(0.0, 1.0, 0);
        for (&s, &w) in rule.nodes.iter().zip(&lv.weights) {
            num += w * self.system.noise_kernel(s).trace();
            den += w * self.system.control_weight(s).trace();
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }

    fn level(&self, level: usize) -> &LevelData {
        self.levels[level].get_or_init(|| {
            let rule = GradedRule::new(0.0, 1.0, level);
            let mut ns = Vec::with_capacity(rule.len());
            let mut qw = Vec::with_capacity(rule.len());
            let mut qk = Vec::with_capacity(rule.len());
            for &s in &rule.nodes {
                let (_, phi0s, n_s) = self.table.state(s);
                let w = self.system.control_weight(s);
                let k = self.system.noise_kernel(s);
                qw.push(linalg::symmetrize(&(&phi0s * w * phi0s.transpose())));
                qk.push(linalg::symmetrize(&(&phi0s * k * phi0s.transpose())));
                ns.push(n_s);
            }
            LevelData {
                weights: rule.weights,
                ns,
                qw,
                qk,
            }
        })
    }

    /// `lambda_min(I - N_10^{1/2} Pi0 N_10^{1/2})`.
    pub fn margin(&self, pi0: &Mat) -> f64 {
        linalg::upper_margin(&self.n10, pi0)
    }

    pub fn check_feasible(&self, pi0: &Mat) -> Result<()> {
        let n = self.n();
        if pi0.shape() != (n, n) {
            return Err(Error::dim("Pi0", (n, n), pi0.shape()));
        }
        if !linalg::all_finite(pi0) {
            return Err(Error::Infeasible("Pi0 has non-finite entries".into()));
        }
        let m = self.margin(pi0);
        if !(m > 0.0) {
            return Err(Error::Infeasible(format!(
                "Pi0 violates Pi0 < N(1,0)^-1 (eigenvalue margin {m:e})"
            )));
        }
        Ok(())
    }

    /// Per-node `(I - N_s Pi0)^{-1}`, `P_s` at a quadrature level.
    fn node_terms(&self, pi0: &Mat, lv: &LevelData, i: usize) -> (Mat, Mat) {
        let n = self.n();
        let id = Mat::identity(n, n);
        let x_inv = (&id - &lv.ns[i] * pi0)
            .try_inverse()
            .unwrap_or_else(|| Mat::from_element(n, n, f64::NAN));
        let q = self.blend_kernel(&lv.qw[i], &lv.qk[i]);
        let p = linalg::symmetrize(&(&x_inv * q * x_inv.transpose()));
        (x_inv, p)
    }

    fn noise_integral_at(&self, pi0: &Mat, level: usize) -> Mat {
        let lv = self.level(level);
        let n = self.n();
        let mut acc = Mat::zeros(n, n);
        if self.theta == 0.0 && self.scale == 0.0 {
            return acc;
        }
        for (i, &w) in lv.weights.iter().enumerate() {
            let (_, p) = self.node_terms(pi0, lv, i);
            acc += p * w;
        }
        acc
    }

    fn assemble(&self, pi0: &Mat, noise_integral: Mat, level: usize) -> MapValue {
        let n = self.n();
        let phi_cl10 = &self.phi10 * (Mat::identity(n, n) - &self.n10 * pi0);
        let sigma1 = linalg::symmetrize(&(&phi_cl10 * (&self.sigma0 + &noise_integral) * phi_cl10.transpose()));
        MapValue {
            sigma1,
            noise_integral,
            phi_cl10,
            level,
        }
    }

    /// The map evaluated with a fixed quadrature level.
    pub fn map_at_level(&self, pi0: &Mat, level: usize) -> Result<MapValue> {
        self.check_feasible(pi0)?;
        let pi0 = linalg::symmetrize(pi0);
        let level = level.min(MAX_LEVEL);
        let ni = self.noise_integral_at(&pi0, level);
        Ok(self.assemble(&pi0, ni, level))
    }

    /// The map with quadrature refined until two levels agree.
    pub fn map(&self, pi0: &Mat) -> Result<MapValue> {
        self.check_feasible(pi0)?;
        let pi0 = linalg::symmetrize(pi0);
        let mut prev = self.noise_integral_at(&pi0, 0);
        let mut used = MAX_LEVEL;
        for level in 1..=MAX_LEVEL {
            let cur = self.noise_integral_at(&pi0, level);
            let scale = linalg::frobenius(&(&self.sigma0 + &cur));
            let done = linalg::frobenius(&(&cur - &prev)) <= QUAD_REL_TOL * scale;
            prev = cur;
            if done {
                used = level;
                break;
            }
        }
        Ok(self.assemble(&pi0, prev, used))
    }

    /// Bracket `S` of the Jacobian at a fixed level, so that
    /// `J = -(Phi_cl10 kron Phi_cl10) S`.
    pub fn jacobian_bracket(&self, pi0: &Mat, level: usize) -> Result<Mat> {
        self.check_feasible(pi0)?;
        let pi0 = linalg::symmetrize(pi0);
        let n = self.n();
        let id = Mat::identity(n, n);
        let t10 = linalg::symmetrize(&((&id - &self.n10 * &pi0).try_inverse().ok_or_else(|| {
            Error::Infeasible("I - N(1,0) Pi0 is singular".into())
        })? * &self.n10));
        let mut s = linalg::kron(&self.sigma0, &t10) + linalg::kron(&t10, &self.sigma0);
        let lv = self.level(level.min(MAX_LEVEL));
        for (i, &w) in lv.weights.iter().enumerate() {
            let (x_inv, p) = self.node_terms(&pi0, lv, i);
            let diff = &t10 - linalg::symmetrize(&(x_inv * &lv.ns[i]));
            s += (linalg::kron(&p, &diff) + linalg::kron(&diff, &p)) * w;
        }
        Ok(s)
    }

    /// Jacobian of `vec f` at `vec Pi0`, evaluated at the given level.
    pub fn jacobian_at_level(&self, pi0: &Mat, level: usize) -> Result<Mat> {
        let s = self.jacobian_bracket(pi0, level)?;
        let n = self.n();
        let phi_cl10 = &self.phi10 * (Mat::identity(n, n) - &self.n10 * linalg::symmetrize(pi0));
        Ok(-linalg::kron(&phi_cl10, &phi_cl10) * s)
    }

    /// Jacobian at the level the adaptive map settles on.
    pub fn jacobian(&self, pi0: &Mat) -> Result<Mat> {
        let level = self.map(pi0)?.level;
        self.jacobian_at_level(pi0, level)
    }

    /// `Sigma(t)` under the closed loop started from `Pi0`:
    /// `Phi_cl(t, 0) [Sigma0 + int_0^t P_s ds] Phi_cl(t, 0)^T`.
    pub fn covariance_at(&self, pi0: &Mat, t: f64) -> Result<Mat> {
        self.check_feasible(pi0)?;
        let pi0 = linalg::symmetrize(pi0);
        let n = self.n();
        let id = Mat::identity(n, n);
        if t >= 1.0 {
            return Ok(self.map(&pi0)?.sigma1);
        }
        if t <= 0.0 {
            return Ok(self.sigma0.clone());
        }
        let integral_at = |level: usize| {
            let rule = GradedRule::new(0.0, t, level);
            let mut acc = Mat::zeros(n, n);
            for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
                let (_, phi0s, n_s) = self.table.state(s);
                let x_inv = (&id - &n_s * &pi0).try_inverse().unwrap_or_else(|| Mat::from_element(n, n, f64::NAN));
                let g = &x_inv * phi0s;
                acc += (&g * self.kernel(s) * g.transpose()) * w;
            }
            linalg::symmetrize(&acc)
        };
        let mut prev = integral_at(0);
        for level in 1..=MAX_LEVEL {
            let cur = integral_at(level);
            let done = linalg::frobenius(&(&cur - &prev)) <= QUAD_REL_TOL * linalg::frobenius(&(&self.sigma0 + &cur));
            prev = cur;
            if done {
                break;
            }
        }
        let (phi_t0, _, n_t) = self.table.state(t);
        let phi_cl = phi_t0 * (&id - n_t * &pi0);
        Ok(linalg::symmetrize(&(&phi_cl * (&self.sigma0 + prev) * phi_cl.transpose())))
    }
}

/// Matrix of `vec X -> vec((X + X^T) / 2)`. The Jacobian describes the map
/// along symmetric directions; composing with this projector gives the
/// derivative with respect to unconstrained entries of a map that
/// symmetrizes its argument.
pub fn symmetrizer(n: usize) -> Mat {
    let mut p = Mat::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            p[(j * n + i, j * n + i)] += 0.5;
            p[(i * n + j, j * n + i)] += 0.5;
        }
    }
    p
}

/// `f(Pi0)` for a one-off query.
pub fn boundary_map(system: &LtvSystem, sigma0: &Mat, pi0: &Mat) -> Result<Mat> {
    Ok(BoundaryMapWorkspace::new(system, sigma0)?.map(pi0)?.sigma1)
}

/// Jacobian of `vec f` at `vec Pi0` (column-major vectorization).
pub fn jacobian(system: &LtvSystem, sigma0: &Mat, pi0: &Mat) -> Result<Mat> {
    BoundaryMapWorkspace::new(system, sigma0)?.jacobian(pi0)
}

/// `Sigma(t)` from the explicit closed-loop formula.
pub fn propagate_covariance(system: &LtvSystem, pi0: &Mat, sigma0: &Mat, t: f64) -> Result<Mat> {
    BoundaryMapWorkspace::new(system, sigma0)?.covariance_at(pi0, t)
}

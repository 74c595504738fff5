//! Newton inversion of the boundary map and the closed form for kernels
//! proportional to the control weight.

use serde::Serialize;

use super::{BoundaryMapWorkspace, FEAS_MARGIN};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::system::{uniform_grid, LtvSystem, SteeringProblem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Converged when `||f(Pi0) - Sigma1||_F <= tol * max(1, ||Sigma1||_F)`.
    pub tol: f64,
    pub max_iterations: usize,
    /// Fall back to kernel continuation when plain Newton stalls.
    pub homotopy: bool,
    /// Start from the closed form of a surrogate with kernel `c W`.
    pub warm_start: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            max_iterations: 60,
            homotopy: true,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Iterate {
    /// Column-major entries of the candidate `Pi0`.
    pub pi0: Vec<f64>,
    pub residual: f64,
    /// Line-search step length that produced this iterate (1 for the start).
    pub damping: f64,
    /// Kernel blend parameter in effect.
    pub theta: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SolverTrace {
    pub iterates: Vec<Iterate>,
    pub converged: bool,
    /// 2-norm condition number of the Jacobian at the last iterate.
    pub jacobian_condition: f64,
    pub homotopy_used: bool,
    /// Blend parameters visited by continuation.
    pub stages: Vec<f64>,
    pub final_residual: f64,
    pub quadrature_level: usize,
}

impl SolverTrace {
    fn record(&mut self, pi0: &Mat, residual: f64, damping: f64, theta: f64) {
        self.iterates.push(Iterate {
            pi0: pi0.as_slice().to_vec(),
            residual,
            damping,
            theta,
        });
    }
}

fn residual_norm(ws: &BoundaryMapWorkspace, pi0: &Mat, sigma1: &Mat) -> Result<(f64, usize)> {
    let v = ws.map(pi0)?;
    Ok((linalg::frobenius(&(v.sigma1 - sigma1)), v.level))
}

fn feasible_enough(ws: &BoundaryMapWorkspace, pi0: &Mat) -> bool {
    ws.margin(pi0) > FEAS_MARGIN
}

fn condition(j: &Mat) -> f64 {
    let sv = j.clone().svd(false, false).singular_values;
    let (mx, mn) = (sv.max(), sv.min());
    if mn > 0.0 {
        mx / mn
    } else {
        f64::INFINITY
    }
}

enum Outcome {
    Converged(Mat),
    Stalled(String),
}

/// Damped Newton on the current kernel blend.
fn newton(
    ws: &BoundaryMapWorkspace,
    start: Mat,
    sigma1: &Mat,
    opts: &SolveOptions,
    trace: &mut SolverTrace,
) -> Result<Outcome> {
    let n = ws.n();
    let target = opts.tol * linalg::frobenius(sigma1).max(1.0);
    let theta = ws.blend().0;
    let mut pi = linalg::symmetrize(&start);
    let (mut res, mut level) = residual_norm(ws, &pi, sigma1)?;
    trace.record(&pi, res, 1.0, theta);
    for _ in 0..opts.max_iterations {
        trace.final_residual = res;
        trace.quadrature_level = level;
        if res <= target {
            return Ok(Outcome::Converged(pi));
        }
        let value = ws.map(&pi)?;
        let j = ws.jacobian_at_level(&pi, value.level)?;
        trace.jacobian_condition = condition(&j);
        let r = linalg::vec(&(value.sigma1 - sigma1));
        let step = match j.lu().solve(&(-r)) {
            Some(s) => linalg::symmetrize(&linalg::unvec(&s, n, n)),
            None => return Ok(Outcome::Stalled("singular Jacobian".into())),
        };
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = linalg::symmetrize(&(&pi + &step * alpha));
            if feasible_enough(ws, &cand) {
                let (r_new, lv) = residual_norm(ws, &cand, sigma1)?;
                if r_new < res {
                    accepted = Some((cand, r_new, lv));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((cand, r_new, lv)) => {
                pi = cand;
                res = r_new;
                level = lv;
                trace.record(&pi, res, alpha, theta);
            }
            None => {
                trace.final_residual = res;
                return Ok(Outcome::Stalled("line search failed to reduce the residual".into()));
            }
        }
    }
    trace.final_residual = res;
    if res <= target {
        Ok(Outcome::Converged(pi))
    } else {
        Ok(Outcome::Stalled(format!("no convergence in {} iterations", opts.max_iterations)))
    }
}

/// Closed form of `f^{-1}(Sigma1)` for the kernel `c W`:
/// `Pi0 = N^{-1} + (c/2) Sigma0^{-1} - S^{-1} (c^2/4 I + S M S)^{1/2} S^{-1}`,
/// `S = Sigma0^{1/2}`, `M = N^{-1} Phi(0,1) Sigma1 Phi(0,1)^T N^{-1}`, `N = N(1, 0)`.
pub(crate) fn closed_form_scaled(ws: &BoundaryMapWorkspace, sigma1: &Mat, c: f64) -> Result<Mat> {
    let n = ws.n();
    let n_inv = linalg::spd_inverse(ws.n10())?;
    let s = linalg::sym_sqrt(ws.sigma0());
    let s_inv = linalg::sym_inv_sqrt(ws.sigma0())
        .map_err(|_| Error::Infeasible("closed form needs Sigma0 positive definite".into()))?;
    let m = &n_inv * ws.phi01() * sigma1 * ws.phi01().transpose() * &n_inv;
    let inner = Mat::identity(n, n) * (0.25 * c * c) + &s * m * &s;
    let root = linalg::sym_sqrt(&inner);
    Ok(linalg::symmetrize(&(n_inv + (&s_inv * &s_inv) * (0.5 * c) - &s_inv * root * &s_inv)))
}

/// Largest deviation of `C D C^T` from `B R^{-1} B^T` on a 101-point grid.
fn kernel_mismatch(system: &LtvSystem) -> Option<(f64, f64)> {
    for t in uniform_grid(101) {
        let w = system.control_weight(t);
        let k = system.noise_kernel(t);
        let dev = (&k - &w).amax();
        if dev > 1e-9 * w.amax().max(1.0) {
            return Some((t, dev));
        }
    }
    None
}

/// `Pi0` in closed form when `C D C^T = B R^{-1} B^T` on [0, 1].
pub fn closed_form_pi0(system: &LtvSystem, sigma0: &Mat, sigma1: &Mat) -> Result<Mat> {
    if let Some((t, deviation)) = kernel_mismatch(system) {
        return Err(Error::KernelMismatch { t, deviation });
    }
    let ws = BoundaryMapWorkspace::new(system, sigma0)?;
    closed_form_scaled(&ws, sigma1, 1.0)
}

/// Solve `f(Pi0) = Sigma1` by damped Newton with optional kernel continuation.
pub fn solve_pi0(system: &LtvSystem, problem: &SteeringProblem, opts: &SolveOptions) -> Result<(Mat, SolverTrace)> {
    problem.check_against(system)?;
    let n = system.n();
    if linalg::min_eigenvalue(&problem.sigma0) <= 0.0 {
        if n == 1 {
            let pi = super::solve_pi0_scalar(system, problem.sigma0[(0, 0)].max(0.0), problem.sigma1[(0, 0)])?;
            let residual = linalg::frobenius(&(super::boundary_map(system, &problem.sigma0, &pi)? - &problem.sigma1));
            let mut trace = SolverTrace {
                converged: true,
                final_residual: residual,
                ..Default::default()
            };
            trace.record(&pi, residual, 1.0, 1.0);
            return Ok((pi, trace));
        }
        return Err(Error::OutOfScope(
            "singular initial covariance is only supported for scalar systems".into(),
        ));
    }
    let mut ws = BoundaryMapWorkspace::new(system, &problem.sigma0)?;
    solve_with_workspace(&mut ws, &problem.sigma1, opts)
}

/// Newton solve reusing an existing workspace; the workspace blend is reset to the true kernel.
pub fn solve_with_workspace(
    ws: &mut BoundaryMapWorkspace,
    sigma1: &Mat,
    opts: &SolveOptions,
) -> Result<(Mat, SolverTrace)> {
    let n = ws.n();
    let mut trace = SolverTrace::default();
    let scale = ws.kernel_scale();
    ws.set_blend(1.0, scale);

    let zero = Mat::zeros(n, n);
    let mut start = zero.clone();
    if opts.warm_start {
        if let Ok(guess) = closed_form_scaled(ws, sigma1, scale) {
            if feasible_enough(ws, &guess) {
                let r_guess = residual_norm(ws, &guess, sigma1)?.0;
                let r_zero = residual_norm(ws, &zero, sigma1)?.0;
                if r_guess < r_zero {
                    start = guess;
                }
            }
        }
    }

    let reason = match newton(ws, start, sigma1, opts, &mut trace)? {
        Outcome::Converged(pi) => {
            trace.converged = true;
            return Ok((pi, trace));
        }
        Outcome::Stalled(reason) => reason,
    };
    if !opts.homotopy {
        return Err(Error::SolverDiverged {
            reason,
            trace: Box::new(trace),
        });
    }

    trace.homotopy_used = true;
    let result = continuation(ws, sigma1, scale, opts, &mut trace);
    ws.set_blend(1.0, scale);
    match result {
        Ok(pi) => {
            trace.converged = true;
            Ok((pi, trace))
        }
        Err(reason) => Err(Error::SolverDiverged {
            reason,
            trace: Box::new(trace),
        }),
    }
}

/// Track the root from the kernel `scale * W` (closed form) to the true kernel.
fn continuation(
    ws: &mut BoundaryMapWorkspace,
    sigma1: &Mat,
    scale: f64,
    opts: &SolveOptions,
    trace: &mut SolverTrace,
) -> std::result::Result<Mat, String> {
    ws.set_blend(0.0, scale);
    let mut pi = closed_form_scaled(ws, sigma1, scale).map_err(|e| e.to_string())?;
    if !feasible_enough(ws, &pi) {
        pi = Mat::zeros(ws.n(), ws.n());
    }
    let mut theta = 0.0;
    let mut step = 0.25;
    trace.stages.push(0.0);
    while theta < 1.0 {
        let next = if step >= 1.0 - theta { 1.0 } else { theta + step };
        ws.set_blend(next, scale);
        match newton(ws, pi.clone(), sigma1, opts, trace).map_err(|e| e.to_string())? {
            Outcome::Converged(p) => {
                pi = p;
                theta = next;
                trace.stages.push(theta);
            }
            Outcome::Stalled(reason) => {
                step *= 0.5;
                if step < 1.0 / 1024.0 {
                    return Err(format!("continuation stalled at blend {next}: {reason}"));
                }
            }
        }
    }
    Ok(pi)
}

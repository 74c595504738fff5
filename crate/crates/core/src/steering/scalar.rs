//! Scalar systems: the bound on variances reachable from a deterministic
//! initial state, and a bisection solver for the monotone map.

use super::BoundaryMapWorkspace;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::quadrature::adaptive_gk;
use crate::system::LtvSystem;

/// Supremum of terminal variances reachable from `sigma0 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Eta {
    Finite(f64),
    Infinite,
    /// The partial integrals neither settled nor clearly diverged.
    Undetermined { last_partial: f64 },
}

impl Eta {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Eta::Finite(v) => Some(v),
            Eta::Infinite => Some(f64::INFINITY),
            Eta::Undetermined { .. } => None,
        }
    }
}

const CUTOFFS: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];
const SETTLED: f64 = 1e-4;
const NOT_SHRINKING: f64 = 0.95;

fn require_scalar(system: &LtvSystem) -> Result<()> {
    if (system.n(), system.p(), system.q()) != (1, 1, 1) {
        return Err(Error::dim("scalar system (n, p, q)", (1, 1), (system.n(), system.p() * system.q())));
    }
    Ok(())
}

/// `eta = int_0^1 (Phi_10 N_10 / (Phi(t,0) N(t,0)))^2 k(t) dt` with
/// `k = c^2 d`; `+inf` whenever `k(0) > 0`.
pub fn eta(system: &LtvSystem) -> Result<Eta> {
    require_scalar(system)?;
    if system.noise_kernel(0.0)[(0, 0)] > 0.0 {
        return Ok(Eta::Infinite);
    }
    let ws = BoundaryMapWorkspace::new(system, &Mat::zeros(1, 1))?;
    let table = ws.table();
    let num = ws.phi10()[(0, 0)] * ws.n10()[(0, 0)];
    let integrand = |t: f64| {
        let (phi, _, n) = table.state(t);
        let ratio = num / (phi[(0, 0)] * n[(0, 0)]);
        ratio * ratio * system.noise_kernel(t)[(0, 0)]
    };
    let partial: Vec<f64> = CUTOFFS
        .iter()
        .map(|&eps| adaptive_gk(integrand, eps, 1.0, 1e-12, 1e-300))
        .collect();
    let inc: Vec<f64> = partial.windows(2).map(|w| w[1] - w[0]).collect();
    let last = *partial.last().unwrap();
    let d_last = *inc.last().unwrap();
    let d_prev = inc[inc.len() - 2];
    if d_last.abs() <= SETTLED * last.abs() {
        // geometric tail beyond the smallest cutoff
        let r = if d_prev != 0.0 { d_last / d_prev } else { 0.0 };
        let tail = if (0.0..1.0).contains(&r) { d_last * r / (1.0 - r) } else { 0.0 };
        return Ok(Eta::Finite(last + tail));
    }
    let shrinking = inc.windows(2).any(|w| w[0] != 0.0 && w[1] / w[0] < NOT_SHRINKING);
    if !shrinking && d_last > 0.0 {
        return Ok(Eta::Infinite);
    }
    Ok(Eta::Undetermined { last_partial: last })
}

/// Bisection for `f(pi0) = sigma1` using that `f` is decreasing.
pub fn solve_pi0_scalar(system: &LtvSystem, sigma0: f64, sigma1: f64) -> Result<Mat> {
    require_scalar(system)?;
    if !(sigma0 >= 0.0) || !(sigma1 > 0.0) {
        return Err(Error::InvalidModel(format!(
            "need sigma0 >= 0 and sigma1 > 0, got {sigma0} and {sigma1}"
        )));
    }
    if sigma0 == 0.0 {
        let bound = eta(system)?;
        if let Eta::Finite(e) = bound {
            if sigma1 >= e {
                return Err(Error::UnreachableFromDeterministicStart { sigma1, eta: e });
            }
        }
    }
    let ws = BoundaryMapWorkspace::new(system, &Mat::from_element(1, 1, sigma0))?;
    let f = |p: f64| -> Result<f64> { Ok(ws.map(&Mat::from_element(1, 1, p))?.sigma1[(0, 0)]) };
    let accept = 1e-10 * sigma1.max(1.0);
    let tol = 1e-3 * accept;
    let n_inv = 1.0 / ws.n10()[(0, 0)];

    let f0 = f(0.0)?;
    if (f0 - sigma1).abs() <= accept {
        return Ok(Mat::zeros(1, 1));
    }
    let (mut lo, mut hi);
    if f0 > sigma1 {
        // root lies in (0, 1/N): move the upper end toward the boundary
        lo = 0.0;
        let mut delta = 1e-3;
        loop {
            hi = n_inv * (1.0 - delta);
            if f(hi)? < sigma1 {
                break;
            }
            lo = hi;
            delta *= 1e-2;
            if delta < 1e-15 {
                return Err(Error::Infeasible(format!("no feasible pi0 yields variance {sigma1}")));
            }
        }
    } else {
        hi = 0.0;
        let mut l = 1.0;
        loop {
            lo = -l;
            if f(lo)? > sigma1 {
                break;
            }
            hi = lo;
            l *= 10.0;
            if l > 1e14 {
                return Err(match eta(system)? {
                    Eta::Finite(e) | Eta::Undetermined { last_partial: e } if sigma0 == 0.0 => {
                        Error::UnreachableFromDeterministicStart { sigma1, eta: e }
                    }
                    _ => Error::Infeasible(format!("could not bracket variance {sigma1}")),
                });
            }
        }
    }
    // f(lo) > sigma1 > f(hi)
    let mut best = (f64::INFINITY, 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        let err = (fm - sigma1).abs();
        if err < best.0 {
            best = (err, mid);
        }
        if err <= tol {
            return Ok(Mat::from_element(1, 1, mid));
        }
        if fm > sigma1 {
            lo = mid;
        } else {
            hi = mid;
        }
        if mid == lo && mid == hi || hi - lo <= f64::EPSILON * mid.abs() {
            break;
        }
    }
    if best.0 <= accept {
        return Ok(Mat::from_element(1, 1, best.1));
    }
    Err(Error::SolverDiverged {
        reason: format!("bisection stopped at residual {:e}", best.0),
        trace: Box::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{NoiseComponent, NoiseSpec};
    use crate::schedule::MatrixSchedule;

    fn with_kernel(c: Vec<f64>) -> LtvSystem {
        // k = c(t)^2 with a unit Wiener channel
        LtvSystem::new(
            MatrixSchedule::zeros(1, 1),
            MatrixSchedule::identity(1),
            MatrixSchedule::scalar_polynomial(c),
            MatrixSchedule::identity(1),
            NoiseSpec::new(1, vec![NoiseComponent::Wiener { scale: Mat::identity(1, 1) }]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn eta_cases() {
        assert_eq!(eta(&with_kernel(vec![1.0])).unwrap(), Eta::Infinite);
        match eta(&with_kernel(vec![0.0, 1.0])).unwrap() {
            Eta::Finite(v) => assert!((v - 1.0).abs() < 1e-6, "{v}"),
            other => panic!("{other:?}"),
        }
        // k = t: c = sqrt(t) is not polynomial, use a precomputed rate instead
        let sys = LtvSystem::new(
            MatrixSchedule::zeros(1, 1),
            MatrixSchedule::identity(1),
            MatrixSchedule::identity(1),
            MatrixSchedule::identity(1),
            NoiseSpec::new(1, vec![NoiseComponent::Precomputed { rate: MatrixSchedule::scalar_polynomial(vec![0.0, 1.0]) }])
                .unwrap(),
        )
        .unwrap();
        assert_eq!(eta(&sys).unwrap(), Eta::Infinite);
    }

    #[test]
    fn unreachable_variance_is_rejected() {
        let sys = with_kernel(vec![0.0, 1.0]);
        match solve_pi0_scalar(&sys, 0.0, 2.0) {
            Err(Error::UnreachableFromDeterministicStart { eta, .. }) => assert!((eta - 1.0).abs() < 1e-6),
            other => panic!("{other:?}"),
        }
        let pi = solve_pi0_scalar(&sys, 0.0, 0.5).unwrap();
        let back = super::super::boundary_map(&sys, &Mat::zeros(1, 1), &pi).unwrap()[(0, 0)];
        assert!((back - 0.5).abs() < 1e-10);
    }

    #[test]
    fn bisection_recovers_zero() {
        let sys = with_kernel(vec![1.0]);
        let s0 = Mat::identity(1, 1);
        let f0 = super::super::boundary_map(&sys, &s0, &Mat::zeros(1, 1)).unwrap()[(0, 0)];
        let pi = solve_pi0_scalar(&sys, 1.0, f0).unwrap();
        assert!(pi[(0, 0)].abs() < 1e-12);
    }
}

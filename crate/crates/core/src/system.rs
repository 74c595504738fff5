//! The controlled system `dx = A x dt + B u dt + C dm` and the boundary data
//! of a steering problem.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::noise::NoiseSpec;
use crate::schedule::MatrixSchedule;

/// Uniform grid of `m` points on [0, 1].
pub fn uniform_grid(m: usize) -> Vec<f64> {
    match m {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..m).map(|i| i as f64 / (m - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LtvSystem {
    n: usize,
    p: usize,
    q: usize,
    a: MatrixSchedule,
    b: MatrixSchedule,
    c: MatrixSchedule,
    r: MatrixSchedule,
    noise: NoiseSpec,
}

impl LtvSystem {
    pub fn new(
        a: MatrixSchedule,
        b: MatrixSchedule,
        c: MatrixSchedule,
        r: MatrixSchedule,
        noise: NoiseSpec,
    ) -> Result<Self> {
        let n = a.rows();
        if a.shape() != (n, n) {
            return Err(Error::dim("A", (n, n), a.shape()));
        }
        let p = b.cols();
        if b.rows() != n {
            return Err(Error::dim("B", (n, p), b.shape()));
        }
        let q = c.cols();
        if c.rows() != n {
            return Err(Error::dim("C", (n, q), c.shape()));
        }
        if r.shape() != (p, p) {
            return Err(Error::dim("R", (p, p), r.shape()));
        }
        if noise.q() != q {
            return Err(Error::dim("noise channels", (q, 1), (noise.q(), 1)));
        }
        Ok(LtvSystem { n, p, q, a, b, c, r, noise })
    }

    /// `dx = A x dt + B u dt + dw` with unit weight and `C = I`.
    pub fn with_unit_noise(a: MatrixSchedule, b: MatrixSchedule) -> Result<Self> {
        let n = a.rows();
        let p = b.cols();
        Self::new(a, b, MatrixSchedule::identity(n), MatrixSchedule::identity(p), NoiseSpec::unit_wiener(n))
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn q(&self) -> usize {
        self.q
    }
    pub fn a(&self) -> &MatrixSchedule {
        &self.a
    }
    pub fn b(&self) -> &MatrixSchedule {
        &self.b
    }
    pub fn c(&self) -> &MatrixSchedule {
        &self.c
    }
    pub fn r(&self) -> &MatrixSchedule {
        &self.r
    }
    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    /// Same system with another noise model.
    pub fn with_noise(&self, c: MatrixSchedule, noise: NoiseSpec) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), c, self.r.clone(), noise)
    }

    /// `R(t)^{-1}`.
    pub fn r_inv(&self, t: f64) -> Mat {
        let r = self.r.eval(t);
        linalg::spd_inverse(&r)
            .or_else(|_| linalg::inverse(&r))
            .unwrap_or_else(|_| Mat::from_element(self.p, self.p, f64::NAN))
    }

    /// Control weight `W(t) = B R^{-1} B^T`.
    pub fn control_weight(&self, t: f64) -> Mat {
        let b = self.b.eval(t);
        linalg::symmetrize(&(&b * self.r_inv(t) * b.transpose()))
    }

    /// Noise kernel `C D C^T`.
    pub fn noise_kernel(&self, t: f64) -> Mat {
        let c = self.c.eval(t);
        linalg::symmetrize(&(&c * self.noise.intensity_unchecked(t) * c.transpose()))
    }

    /// Drift `C g` contributed by raw jump processes.
    pub fn jump_drift(&self, t: f64) -> Vector {
        self.c.eval(t) * self.noise.driving_drift(t)
    }

    /// Pointwise checks on `grid`; every violation is collected.
    pub fn validate(&self, grid: &[f64]) -> ValidationReport {
        let mut report = ValidationReport::default();
        if grid.is_empty() {
            report.push(None, "empty validation grid");
        }
        for &t in grid {
            if !(0.0..=1.0).contains(&t) {
                report.push(Some(t), "grid point outside [0, 1]");
                continue;
            }
            for (name, s) in [("A", &self.a), ("B", &self.b), ("C", &self.c), ("R", &self.r)] {
                if !linalg::all_finite(&s.eval(t)) {
                    report.push(Some(t), format!("{name} has non-finite entries"));
                }
            }
            let r = self.r.eval(t);
            if linalg::asymmetry(&r) > 1e-12 * r.amax().max(1.0) {
                report.push(Some(t), "R is not symmetric");
            }
            if nalgebra::Cholesky::new(r.clone()).is_none() {
                report.push(Some(t), "R is not positive definite");
            }
            match self.noise.effective_intensity(t) {
                Err(e) => report.push(Some(t), e.to_string()),
                Ok(d) => {
                    if !linalg::all_finite(&d) {
                        report.push(Some(t), "D has non-finite entries");
                    } else if linalg::min_eigenvalue(&d) < -1e-12 * d.amax().max(1.0) {
                        report.push(Some(t), "D is not positive semidefinite");
                    }
                }
            }
        }
        report
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub t: Option<f64>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn push(&mut self, t: Option<f64>, message: impl Into<String>) {
        self.violations.push(Violation { t, message: message.into() });
    }

    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    /// Distinct times at which something failed.
    pub fn failing_times(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self.violations.iter().filter_map(|v| v.t).collect();
        ts.dedup();
        ts
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            return Ok(());
        }
        let msg = self
            .violations
            .iter()
            .take(5)
            .map(|v| match v.t {
                Some(t) => format!("t = {t}: {}", v.message),
                None => v.message.clone(),
            })
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::InvalidModel(format!("{} violation(s): {msg}", self.violations.len())))
    }
}

/// Boundary moments.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringProblem {
    pub mu0: Vector,
    pub sigma0: Mat,
    pub mu1: Vector,
    pub sigma1: Mat,
}

impl SteeringProblem {
    /// Checks shapes, symmetry, `Sigma0 >= 0` and `Sigma1 > 0`.
    pub fn new(mu0: Vector, sigma0: Mat, mu1: Vector, sigma1: Mat) -> Result<Self> {
        let n = mu0.len();
        if mu1.len() != n {
            return Err(Error::dim("mu1", (n, 1), (mu1.len(), 1)));
        }
        for (name, s) in [("Sigma0", &sigma0), ("Sigma1", &sigma1)] {
            if s.shape() != (n, n) {
                return Err(Error::dim(name, (n, n), s.shape()));
            }
            if !linalg::all_finite(s) || linalg::asymmetry(s) > 1e-12 * s.amax().max(1.0) {
                return Err(Error::InvalidModel(format!("{name} must be finite and symmetric")));
            }
        }
        if linalg::min_eigenvalue(&sigma0) < -1e-12 * sigma0.amax().max(1.0) {
            return Err(Error::InvalidModel("Sigma0 must be positive semidefinite".into()));
        }
        if linalg::min_eigenvalue(&sigma1) <= 0.0 {
            return Err(Error::InvalidModel("Sigma1 must be positive definite".into()));
        }
        Ok(SteeringProblem { mu0, sigma0, mu1, sigma1 })
    }

    pub fn n(&self) -> usize {
        self.mu0.len()
    }

    pub fn check_against(&self, system: &LtvSystem) -> Result<()> {
        if self.n() != system.n() {
            return Err(Error::dim("problem state", (system.n(), 1), (self.n(), 1)));
        }
        Ok(())
    }
}

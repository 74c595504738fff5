//! State transition matrices, controllability Gramians and rank diagnostics.
//!
//! A single forward integration over [0, 1] carries `Phi(t, 0)`, its inverse
//! `Phi(0, t)` and `G(t) = N(t, 0)`. Every other transition or Gramian is
//! recovered algebraically:
//!
//! `Phi(t, s) = Phi(t, 0) Phi(0, s)`,
//! `N(t, s) = Phi(s, 0) (G(t) - G(s)) Phi(s, 0)^T`.
//!
//! `N(t, s)` is negative semidefinite for `t < s`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::ode::{self, DenseSolution, OdeOptions};
use crate::system::LtvSystem;

#[derive(Debug, Clone)]
pub struct GramianTable {
    n: usize,
    sol: DenseSolution,
}

impl GramianTable {
    pub fn new(system: &LtvSystem) -> Result<Self> {
        Self::with_options(system, &OdeOptions::tight())
    }

    pub fn with_options(system: &LtvSystem, opts: &OdeOptions) -> Result<Self> {
        let n = system.n();
        let n2 = n * n;
        let mut y0 = vec![0.0; 3 * n2];
        for i in 0..n {
            y0[i * n + i] = 1.0;
            y0[n2 + i * n + i] = 1.0;
        }
        let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
            let a = system.a().eval(t);
            let w = system.control_weight(t);
            let phi = Mat::from_column_slice(n, n, &y[..n2]);
            let psi = Mat::from_column_slice(n, n, &y[n2..2 * n2]);
            let dphi = &a * &phi;
            let dpsi = -(&psi * &a);
            let dg = &psi * w * psi.transpose();
            dy[..n2].copy_from_slice(dphi.as_slice());
            dy[n2..2 * n2].copy_from_slice(dpsi.as_slice());
            dy[2 * n2..].copy_from_slice(dg.as_slice());
        };
        let sol = ode::integrate(rhs, 0.0, 1.0, &y0, opts)?;
        Ok(GramianTable { n, sol })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_steps(&self) -> usize {
        self.sol.n_steps()
    }

    fn block(&self, t: f64, k: usize) -> Mat {
        let n2 = self.n * self.n;
        let y = self.sol.eval(t);
        Mat::from_column_slice(self.n, self.n, &y[k * n2..(k + 1) * n2])
    }

    /// `(Phi(t, 0), Phi(0, t), N(t, 0))` from one dense-output evaluation.
    pub fn state(&self, t: f64) -> (Mat, Mat, Mat) {
        let n = self.n;
        let n2 = n * n;
        let y = self.sol.eval(t);
        (
            Mat::from_column_slice(n, n, &y[..n2]),
            Mat::from_column_slice(n, n, &y[n2..2 * n2]),
            linalg::symmetrize(&Mat::from_column_slice(n, n, &y[2 * n2..])),
        )
    }

    /// `Phi_A(t, 0)`.
    pub fn phi_from0(&self, t: f64) -> Mat {
        self.block(t, 0)
    }

    /// `Phi_A(0, t)`.
    pub fn phi_to0(&self, t: f64) -> Mat {
        self.block(t, 1)
    }

    /// `Phi_A(t, s)`.
    pub fn transition(&self, t: f64, s: f64) -> Mat {
        if t == s {
            return Mat::identity(self.n, self.n);
        }
        self.phi_from0(t) * self.phi_to0(s)
    }

    /// `N(t, 0)`.
    pub fn gramian_from0(&self, t: f64) -> Mat {
        linalg::symmetrize(&self.block(t, 2))
    }

    /// `N(t, s) = int_s^t Phi(s, tau) W(tau) Phi(s, tau)^T dtau`.
    pub fn gramian(&self, t: f64, s: f64) -> Mat {
        if t == s {
            return Mat::zeros(self.n, self.n);
        }
        if s == 0.0 {
            return self.gramian_from0(t);
        }
        let (phi_s, _, g_s) = self.state(s);
        let g_t = self.gramian_from0(t);
        linalg::symmetrize(&(&phi_s * (g_t - g_s) * phi_s.transpose()))
    }
}

/// `Phi_A(t, s)` for a one-off query.
pub fn transition(system: &LtvSystem, t: f64, s: f64) -> Result<Mat> {
    Ok(GramianTable::new(system)?.transition(t, s))
}

/// `N(t1, t0)` for a one-off query.
pub fn gramian(system: &LtvSystem, t1: f64, t0: f64) -> Result<Mat> {
    Ok(GramianTable::new(system)?.gramian(t1, t0))
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Blocks `Gamma_0, ..., Gamma_n` at `t`, with `Gamma_0 = B` and
/// `Gamma_k = -A Gamma_{k-1} + d/dt Gamma_{k-1}`.
pub fn gamma_blocks(system: &LtvSystem, t: f64) -> Result<Vec<Mat>> {
    let n = system.n();
    // d[j] holds the j-th derivative of the current Gamma_k
    let mut d: Vec<Mat> = (0..=n)
        .map(|j| system.b().derivative(j, t))
        .collect::<Result<_>>()
        .map_err(|e| rename_order(e, "B", n))?;
    let a_der: Vec<Mat> = (0..n)
        .map(|j| system.a().derivative(j, t))
        .collect::<Result<_>>()
        .map_err(|e| rename_order(e, "A", n.saturating_sub(1)))?;
    let mut blocks = vec![d[0].clone()];
    for k in 1..=n {
        let keep = n - k;
        let mut next = Vec::with_capacity(keep + 1);
        for j in 0..=keep {
            let mut m = d[j + 1].clone();
            for i in 0..=j {
                m -= &a_der[i] * &d[j - i] * binomial(j, i);
            }
            next.push(m);
        }
        d = next;
        blocks.push(d[0].clone());
    }
    Ok(blocks)
}

fn rename_order(e: Error, matrix: &str, required: usize) -> Error {
    match e {
        Error::DerivativeOrder { available, .. } => Error::DerivativeOrder {
            matrix: matrix.to_string(),
            required,
            available,
        },
        other => other,
    }
}

/// `(Theta_n(t), Theta_{n+1}(t))`, where `Theta_i = [Gamma_0 ... Gamma_{i-1}]`.
pub fn controllability_matrix(system: &LtvSystem, t: f64) -> Result<(Mat, Mat)> {
    let blocks = gamma_blocks(system, t)?;
    let n = system.n();
    let p = system.p();
    let mut theta = Mat::zeros(n, (n + 1) * p);
    for (k, g) in blocks.iter().enumerate() {
        theta.view_mut((0, k * p), (n, p)).copy_from(g);
    }
    Ok((theta.columns(0, n * p).into_owned(), theta))
}

#[derive(Debug, Clone, Serialize)]
pub struct GramianSample {
    pub s: f64,
    pub t: f64,
    pub min_eig: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ControllabilityReport {
    pub grid: Vec<f64>,
    /// Ranks of `Theta_1 .. Theta_{n+1}` per grid time.
    pub theta_ranks: Vec<Vec<usize>>,
    pub uniform: bool,
    pub total: bool,
    pub index_invariant: bool,
    pub min_gramian_eig: Vec<GramianSample>,
    /// First grid time with `rank Theta_n < n`.
    pub uniform_witness: Option<f64>,
    /// First grid window or Gramian pair that failed.
    pub total_witness: Option<(f64, f64)>,
    pub index_witness: Option<f64>,
    pub rank_tol: f64,
    pub note: String,
}

/// Smallest Gramian eigenvalue accepted as positive.
pub const GRAMIAN_EIG_FLOOR: f64 = 1e-12;
const MAX_GRAMIAN_POINTS: usize = 21;

pub fn check_controllability(system: &LtvSystem, grid: &[f64], rank_tol: f64) -> Result<ControllabilityReport> {
    if grid.len() < 2 {
        return Err(Error::InvalidModel("controllability grid needs at least two points".into()));
    }
    let n = system.n();
    let p = system.p();
    let mut theta_ranks = Vec::with_capacity(grid.len());
    for &t in grid {
        let (_, theta) = controllability_matrix(system, t)?;
        let ranks: Vec<usize> = (1..=n + 1)
            .map(|i| linalg::rank(&theta.columns(0, i * p).into_owned(), rank_tol))
            .collect();
        theta_ranks.push(ranks);
    }
    let full = |r: &Vec<usize>| r[n - 1] == n;

    let uniform_witness = grid.iter().zip(&theta_ranks).find(|(_, r)| !full(r)).map(|(t, _)| *t);
    let uniform = uniform_witness.is_none();

    let mut total_witness = (0..grid.len() - 1)
        .find(|&i| !full(&theta_ranks[i]) && !full(&theta_ranks[i + 1]))
        .map(|i| (grid[i], grid[i + 1]));

    let table = GramianTable::new(system)?;
    let stride = (grid.len() - 1).div_ceil(MAX_GRAMIAN_POINTS - 1).max(1);
    let mut sub: Vec<f64> = grid.iter().step_by(stride).copied().collect();
    if sub.last() != grid.last() {
        sub.push(*grid.last().unwrap());
    }
    let mut min_gramian_eig = Vec::new();
    for (i, &s) in sub.iter().enumerate() {
        for &t in &sub[i + 1..] {
            let e = linalg::min_eigenvalue(&table.gramian(t, s));
            if !(e > GRAMIAN_EIG_FLOOR) && total_witness.is_none() {
                total_witness = Some((s, t));
            }
            min_gramian_eig.push(GramianSample { s, t, min_eig: e });
        }
    }
    let total = total_witness.is_none();

    let first = &theta_ranks[0];
    let index_witness = if first[n - 1] != first[n] {
        Some(grid[0])
    } else {
        grid.iter().zip(&theta_ranks).find(|(_, r)| *r != first).map(|(t, _)| *t)
    };
    let index_invariant = index_witness.is_none();

    Ok(ControllabilityReport {
        grid: grid.to_vec(),
        theta_ranks,
        uniform,
        total,
        index_invariant,
        min_gramian_eig,
        uniform_witness,
        total_witness,
        index_witness,
        rank_tol,
        note: format!(
            "certified on grid: {} rank points, {} Gramian pairs; ranks use threshold {rank_tol:e} * sigma_max",
            grid.len(),
            sub.len() * (sub.len() - 1) / 2
        ),
    })
}

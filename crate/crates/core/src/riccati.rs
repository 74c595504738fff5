//! Closed-form solution of the Riccati equation
//! `dPi/dt = -A^T Pi - Pi A + Pi W Pi`, `W = B R^{-1} B^T`,
//! anchored at `Pi(s) = Pi_s`:
//!
//! `Pi(t) = Phi(s, t)^T Pi_s (I - N(t, s) Pi_s)^{-1} Phi(s, t)`.
//!
//! The solution exists on [0, 1] iff `N(0, s)^{-1} < Pi_s < N(1, s)^{-1}`,
//! with the conventions `N(0, 0)^{-1} = -inf` and `N(1, 1)^{-1} = +inf`.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::propagation::GramianTable;

/// Resolution of the escape-time bisection.
pub const ESCAPE_TOL: f64 = 1e-8;
const SCAN_POINTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Existence {
    pub feasible: bool,
    /// `min(lower, upper)`; positive iff feasible.
    pub margin: f64,
    /// `lambda_min(I + M^{1/2} Pi M^{1/2})`, `M = -N(0, s)`; `+inf` at `s = 0`.
    pub lower: f64,
    /// `lambda_min(I - N^{1/2} Pi N^{1/2})`, `N = N(1, s)`; `+inf` at `s = 1`.
    pub upper: f64,
}

/// Eigenvalue gap of the existence condition between `s` and `t`:
/// positive while the flow from `(s, Pi_s)` is still defined at `t`.
fn gap(table: &GramianTable, pi_s: &Mat, s: f64, t: f64) -> f64 {
    if t == s {
        return 1.0;
    }
    let n = table.gramian(t, s);
    if t > s {
        linalg::upper_margin(&n, pi_s)
    } else {
        linalg::upper_margin(&(-n), &(-pi_s))
    }
}

pub fn existence_condition(table: &GramianTable, pi_s: &Mat, s: f64) -> Existence {
    let lower = if s > 0.0 { gap(table, pi_s, s, 0.0) } else { f64::INFINITY };
    let upper = if s < 1.0 { gap(table, pi_s, s, 1.0) } else { f64::INFINITY };
    let margin = lower.min(upper);
    Existence {
        feasible: margin > 0.0,
        margin,
        lower,
        upper,
    }
}

/// Maximal existence interval intersected with [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExistenceInterval {
    pub start: f64,
    pub end: f64,
    /// The solution escapes at `start` (backward in time) before reaching 0.
    pub escapes_before: bool,
    /// The solution escapes at `end` before reaching 1.
    pub escapes_after: bool,
}

fn first_crossing(table: &GramianTable, pi_s: &Mat, s: f64, target: f64) -> Option<f64> {
    let len = (target - s).abs();
    if len == 0.0 {
        return None;
    }
    let steps = ((len * SCAN_POINTS as f64).ceil() as usize).max(1);
    let mut inside = s;
    for k in 1..=steps {
        let t = s + (target - s) * k as f64 / steps as f64;
        if gap(table, pi_s, s, t) <= 0.0 {
            let (mut a, mut b) = (inside, t);
            while (b - a).abs() > ESCAPE_TOL {
                let m = 0.5 * (a + b);
                if gap(table, pi_s, s, m) > 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            return Some(0.5 * (a + b));
        }
        inside = t;
    }
    None
}

pub fn maximal_interval(table: &GramianTable, pi_s: &Mat, s: f64) -> ExistenceInterval {
    let before = first_crossing(table, pi_s, s, 0.0);
    let after = first_crossing(table, pi_s, s, 1.0);
    ExistenceInterval {
        start: before.unwrap_or(0.0),
        end: after.unwrap_or(1.0),
        escapes_before: before.is_some(),
        escapes_after: after.is_some(),
    }
}

/// A Riccati flow anchored at `(s, Pi_s)`.
#[derive(Debug, Clone)]
pub struct RiccatiSolution<'a> {
    table: &'a GramianTable,
    anchor: f64,
    pi_s: Mat,
    existence: Existence,
}

impl<'a> RiccatiSolution<'a> {
    pub fn new(table: &'a GramianTable, pi_s: Mat, s: f64) -> Self {
        let pi_s = linalg::symmetrize(&pi_s);
        let existence = existence_condition(table, &pi_s, s);
        RiccatiSolution { table, anchor: s, pi_s, existence }
    }

    /// Anchored flow that must exist on all of [0, 1].
    pub fn feasible(table: &'a GramianTable, pi_s: Mat, s: f64) -> Result<Self> {
        let sol = Self::new(table, pi_s, s);
        sol.require_feasible()?;
        Ok(sol)
    }

    pub fn anchor(&self) -> (f64, &Mat) {
        (self.anchor, &self.pi_s)
    }

    pub fn existence(&self) -> Existence {
        self.existence
    }

    pub fn is_feasible(&self) -> bool {
        self.existence.feasible
    }

    pub fn interval(&self) -> ExistenceInterval {
        maximal_interval(self.table, &self.pi_s, self.anchor)
    }

    /// Finite-escape error with the escape time nearest to the anchor.
    pub fn require_feasible(&self) -> Result<()> {
        if self.existence.feasible {
            return Ok(());
        }
        let iv = self.interval();
        let escape = match (iv.escapes_before, iv.escapes_after) {
            (_, true) if !iv.escapes_before || iv.end - self.anchor <= self.anchor - iv.start => iv.end,
            (true, _) => iv.start,
            // margin is nonpositive only at an endpoint
            _ => {
                if self.existence.upper <= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        };
        Err(Error::FiniteEscape { anchor: self.anchor, escape })
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if self.existence.feasible {
            return Ok(());
        }
        let iv = self.interval();
        if t > iv.start && t < iv.end || t == self.anchor {
            Ok(())
        } else {
            let escape = if t >= iv.end { iv.end } else { iv.start };
            Err(Error::FiniteEscape { anchor: self.anchor, escape })
        }
    }

    /// `Pi(t)` without existence checks.
    pub fn eval_unchecked(&self, t: f64) -> Mat {
        let n = self.pi_s.nrows();
        if t == self.anchor {
            return self.pi_s.clone();
        }
        let phi = self.table.transition(self.anchor, t);
        let x = Mat::identity(n, n) - self.table.gramian(t, self.anchor) * &self.pi_s;
        let inner = match x.try_inverse() {
            Some(xi) => &self.pi_s * xi,
            None => Mat::from_element(n, n, f64::NAN),
        };
        linalg::symmetrize(&(phi.transpose() * inner * phi))
    }

    pub fn eval(&self, t: f64) -> Result<Mat> {
        self.check_time(t)?;
        Ok(self.eval_unchecked(t))
    }

    /// `Phi_{A - W Pi}(t, r) = Phi_A(t, r) (I - N(t, r) Pi(r))`.
    pub fn closed_loop_transition(&self, t: f64, r: f64) -> Result<Mat> {
        self.check_time(t)?;
        self.check_time(r)?;
        let n = self.pi_s.nrows();
        if t == r {
            return Ok(Mat::identity(n, n));
        }
        let pi_r = self.eval_unchecked(r);
        Ok(self.table.transition(t, r) * (Mat::identity(n, n) - self.table.gramian(t, r) * pi_r))
    }
}

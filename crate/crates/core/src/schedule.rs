//! Time-varying matrix coefficients on the unit horizon.

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Central finite-difference step for first derivatives of tabulated data.
pub const FD_STEP: f64 = 1e-5;
/// Highest derivative order served by finite differences.
pub const MAX_FD_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleForm {
    Constant(Mat),
    /// One coefficient vector per entry (column-major entry order),
    /// ascending powers of `t`.
    Polynomial { coefficients: Vec<Vec<f64>> },
    /// `values[k]` holds on `[breaks[k], breaks[k+1])`; the last value extends to 1.
    PiecewiseConstant { breaks: Vec<f64>, values: Vec<Mat> },
    /// Linear interpolation between samples, linear extrapolation outside.
    Tabulated { times: Vec<f64>, values: Vec<Mat> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSchedule {
    rows: usize,
    cols: usize,
    form: ScheduleForm,
}

fn poly_eval(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &x| acc * t + x)
}

fn poly_deriv_eval(c: &[f64], order: usize, t: f64) -> f64 {
    if order >= c.len() {
        return 0.0;
    }
    let mut acc = 0.0;
    for k in (order..c.len()).rev() {
        let falling: f64 = (0..order).map(|j| (k - j) as f64).product();
        acc = acc * t + c[k] * falling;
    }
    acc
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

impl MatrixSchedule {
    pub fn constant(m: Mat) -> Self {
        MatrixSchedule {
            rows: m.nrows(),
            cols: m.ncols(),
            form: ScheduleForm::Constant(m),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::constant(Mat::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(Mat::identity(n, n))
    }

    pub fn scalar_constant(v: f64) -> Self {
        Self::constant(Mat::from_element(1, 1, v))
    }

    /// Scalar polynomial `c[0] + c[1] t + ...`.
    pub fn scalar_polynomial(c: Vec<f64>) -> Self {
        MatrixSchedule {
            rows: 1,
            cols: 1,
            form: ScheduleForm::Polynomial { coefficients: vec![c] },
        }
    }

    /// Per-entry polynomials given in row-major order: `entries[i][j]` is the
    /// coefficient list of entry `(i, j)`.
    pub fn polynomial(entries: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let rows = entries.len();
        let cols = entries.first().map_or(0, |r| r.len());
        if entries.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidModel("ragged polynomial schedule".into()));
        }
        let mut coefficients = vec![Vec::new(); rows * cols];
        for (i, row) in entries.into_iter().enumerate() {
            for (j, c) in row.into_iter().enumerate() {
                if c.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidModel("non-finite polynomial coefficient".into()));
                }
                coefficients[j * rows + i] = c;
            }
        }
        Ok(MatrixSchedule {
            rows,
            cols,
            form: ScheduleForm::Polynomial { coefficients },
        })
    }

    pub fn piecewise_constant(breaks: Vec<f64>, values: Vec<Mat>) -> Result<Self> {
        Self::check_table(&breaks, &values, "piecewise-constant")?;
        Ok(MatrixSchedule {
            rows: values[0].nrows(),
            cols: values[0].ncols(),
            form: ScheduleForm::PiecewiseConstant { breaks, values },
        })
    }

    pub fn tabulated(times: Vec<f64>, values: Vec<Mat>) -> Result<Self> {
        Self::check_table(&times, &values, "tabulated")?;
        if times.len() < 2 {
            return Err(Error::InvalidModel("tabulated schedule needs two samples".into()));
        }
        Ok(MatrixSchedule {
            rows: values[0].nrows(),
            cols: values[0].ncols(),
            form: ScheduleForm::Tabulated { times, values },
        })
    }

    fn check_table(times: &[f64], values: &[Mat], kind: &str) -> Result<()> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidModel(format!(
                "{kind} schedule needs matching, nonempty times and values"
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidModel(format!("{kind} schedule times must increase")));
        }
        let (r, c) = values[0].shape();
        if values.iter().any(|v| v.shape() != (r, c)) {
            return Err(Error::InvalidModel(format!("{kind} schedule values differ in shape")));
        }
        if values.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidModel(format!("{kind} schedule has non-finite values")));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn form(&self) -> &ScheduleForm {
        &self.form
    }

    /// Number of analytically available derivatives.
    pub fn deriv_order(&self) -> usize {
        match self.form {
            ScheduleForm::Constant(_)
            | ScheduleForm::Polynomial { .. }
            | ScheduleForm::PiecewiseConstant { .. } => usize::MAX,
            ScheduleForm::Tabulated { .. } => 0,
        }
    }

    pub fn eval(&self, t: f64) -> Mat {
        match &self.form {
            ScheduleForm::Constant(m) => m.clone(),
            ScheduleForm::Polynomial { coefficients } => {
                Mat::from_fn(self.rows, self.cols, |i, j| {
                    poly_eval(&coefficients[j * self.rows + i], t)
                })
            }
            ScheduleForm::PiecewiseConstant { breaks, values } => {
                let k = breaks.partition_point(|&b| b <= t).saturating_sub(1);
                values[k].clone()
            }
            ScheduleForm::Tabulated { times, values } => {
                let last = times.len() - 1;
                let k = times.partition_point(|&x| x <= t).clamp(1, last) - 1;
                let w = (t - times[k]) / (times[k + 1] - times[k]);
                &values[k] * (1.0 - w) + &values[k + 1] * w
            }
        }
    }

    /// Scalar value of a 1×1 schedule.
    pub fn eval_scalar(&self, t: f64) -> f64 {
        self.eval(t)[(0, 0)]
    }

    /// `order`-th time derivative at `t`: exact where the form allows it,
    /// central finite differences otherwise.
    pub fn derivative(&self, order: usize, t: f64) -> Result<Mat> {
        if order == 0 {
            return Ok(self.eval(t));
        }
        match &self.form {
            ScheduleForm::Constant(_) | ScheduleForm::PiecewiseConstant { .. } => {
                Ok(Mat::zeros(self.rows, self.cols))
            }
            ScheduleForm::Polynomial { coefficients } => Ok(Mat::from_fn(self.rows, self.cols, |i, j| {
                poly_deriv_eval(&coefficients[j * self.rows + i], order, t)
            })),
            ScheduleForm::Tabulated { .. } => {
                if order > MAX_FD_ORDER {
                    return Err(Error::DerivativeOrder {
                        matrix: "tabulated schedule".into(),
                        required: order,
                        available: MAX_FD_ORDER,
                    });
                }
                Ok(self.finite_difference(order, t))
            }
        }
    }

    fn finite_difference(&self, order: usize, t: f64) -> Mat {
        // step grows with the order to balance truncation against round-off
        let h = if order == 1 {
            FD_STEP
        } else {
            f64::EPSILON.powf(1.0 / (order as f64 + 2.0))
        };
        let mut acc = Mat::zeros(self.rows, self.cols);
        for k in 0..=order {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let offset = (order as f64 / 2.0 - k as f64) * h;
            acc += self.eval(t + offset) * (sign * binomial(order, k));
        }
        acc / h.powi(order as i32)
    }

    /// Upper bound of a scalar schedule on [0, 1]; rigorous for every form.
    pub fn scalar_upper_bound(&self) -> f64 {
        match &self.form {
            ScheduleForm::Constant(m) => m[(0, 0)],
            ScheduleForm::PiecewiseConstant { values, .. } | ScheduleForm::Tabulated { values, .. } => {
                values.iter().map(|v| v[(0, 0)]).fold(f64::NEG_INFINITY, f64::max)
            }
            ScheduleForm::Polynomial { coefficients } => {
                let c = &coefficients[0];
                let m = 1000;
                let lip: f64 = c.iter().enumerate().skip(1).map(|(k, x)| k as f64 * x.abs()).sum();
                let sampled = (0..=m)
                    .map(|i| poly_eval(c, i as f64 / m as f64))
                    .fold(f64::NEG_INFINITY, f64::max);
                sampled + lip * 0.5 / m as f64
            }
        }
    }
}

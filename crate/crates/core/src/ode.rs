//! Dormand–Prince 5(4) integrator with the standard 4th-order continuous
//! extension. Accepted steps keep their interpolation coefficients so the
//! solution can be evaluated anywhere inside the integration span.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub atol: f64,
    pub rtol: f64,
    pub max_steps: usize,
    pub h_min: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            atol: 1e-10,
            rtol: 1e-8,
            max_steps: 200_000,
            h_min: 1e-14,
        }
    }
}

impl OdeOptions {
    pub fn tight() -> Self {
        OdeOptions {
            atol: 1e-13,
            rtol: 1e-12,
            ..Default::default()
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone)]
struct DenseStep {
    t0: f64,
    h: f64,
    // five coefficient blocks of length dim, laid out contiguously
    coef: Vec<f64>,
}

/// Dense solution of an initial value problem.
#[derive(Debug, Clone)]
pub struct DenseSolution {
    dim: usize,
    t_start: f64,
    t_end: f64,
    y_end: Vec<f64>,
    steps: Vec<DenseStep>,
}

impl DenseSolution {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn span(&self) -> (f64, f64) {
        (self.t_start, self.t_end)
    }

    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn final_state(&self) -> &[f64] {
        &self.y_end
    }

    /// Evaluate at `t`; times outside the span are clamped to it.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let dim = self.dim;
        if self.steps.is_empty() {
            out.copy_from_slice(&self.y_end);
            return;
        }
        let forward = self.t_end >= self.t_start;
        let (lo, hi) = if forward {
            (self.t_start, self.t_end)
        } else {
            (self.t_end, self.t_start)
        };
        let t = t.clamp(lo, hi);
        if t == self.t_end {
            out.copy_from_slice(&self.y_end);
            return;
        }
        // steps are ordered along the integration direction
        let idx = if forward {
            self.steps.partition_point(|s| s.t0 <= t).saturating_sub(1)
        } else {
            self.steps.partition_point(|s| s.t0 >= t).saturating_sub(1)
        };
        let s = &self.steps[idx];
        let theta = (t - s.t0) / s.h;
        let theta1 = 1.0 - theta;
        let c = &s.coef;
        for i in 0..dim {
            out[i] = c[i]
                + theta
                    * (c[dim + i]
                        + theta1
                            * (c[2 * dim + i] + theta * (c[3 * dim + i] + theta1 * c[4 * dim + i])));
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out);
        out
    }
}

fn error_norm(y: &[f64], y1: &[f64], err: &[f64], opts: &OdeOptions) -> f64 {
    let mut acc = 0.0;
    for i in 0..y.len() {
        let sc = opts.atol + opts.rtol * y[i].abs().max(y1[i].abs());
        let r = err[i] / sc;
        acc += r * r;
    }
    (acc / y.len().max(1) as f64).sqrt()
}

/// Integrate `y' = f(t, y)` from `t0` to `t1` (either direction).
pub fn integrate<F>(mut f: F, t0: f64, t1: f64, y0: &[f64], opts: &OdeOptions) -> Result<DenseSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let dim = y0.len();
    let mut sol = DenseSolution {
        dim,
        t_start: t0,
        t_end: t1,
        y_end: y0.to_vec(),
        steps: Vec::new(),
    };
    if t1 == t0 || dim == 0 {
        return Ok(sol);
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();

    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut k5 = vec![0.0; dim];
    let mut k6 = vec![0.0; dim];
    let mut k7 = vec![0.0; dim];
    let mut ytmp = vec![0.0; dim];
    let mut y1 = vec![0.0; dim];
    let mut err = vec![0.0; dim];

    let mut t = t0;
    f(t, &y, &mut k1);

    // initial step from the scaled derivative norms
    let mut h = {
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..dim {
            let sc = opts.atol + opts.rtol * y[i].abs();
            d0 += (y[i] / sc).powi(2);
            d1 += (k1[i] / sc).powi(2);
        }
        let (d0, d1) = ((d0 / dim as f64).sqrt(), (d1 / dim as f64).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0.min(span).max(opts.h_min * 10.0)
    };

    let mut reject_last = false;
    let mut n_steps = 0usize;
    loop {
        let remaining = (t1 - t) * dir;
        if remaining <= 0.0 {
            break;
        }
        if n_steps >= opts.max_steps {
            return Err(Error::Integration {
                t,
                step: h,
                reason: format!("exceeded {} steps", opts.max_steps),
            });
        }
        let mut last = false;
        if h >= remaining * (1.0 - 1e-12) {
            h = remaining;
            last = true;
        }
        let hs = h * dir;

        for i in 0..dim {
            ytmp[i] = y[i] + hs * A21 * k1[i];
        }
        f(t + C2 * hs, &ytmp, &mut k2);
        for i in 0..dim {
            ytmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * hs, &ytmp, &mut k3);
        for i in 0..dim {
            ytmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * hs, &ytmp, &mut k4);
        for i in 0..dim {
            ytmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * hs, &ytmp, &mut k5);
        for i in 0..dim {
            ytmp[i] =
                y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if last { t1 } else { t + hs };
        f(t_new, &ytmp, &mut k6);
        for i in 0..dim {
            y1[i] =
                y[i] + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(t_new, &y1, &mut k7);
        for i in 0..dim {
            err[i] = hs
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let en = error_norm(&y, &y1, &err, opts);
        if !en.is_finite() {
            if h <= opts.h_min {
                return Err(Error::Integration {
                    t,
                    step: h,
                    reason: "non-finite state".into(),
                });
            }
            h *= 0.1;
            reject_last = true;
            continue;
        }

        if en <= 1.0 {
            let mut coef = vec![0.0; 5 * dim];
            for i in 0..dim {
                let ydiff = y1[i] - y[i];
                let bspl = hs * k1[i] - ydiff;
                coef[i] = y[i];
                coef[dim + i] = ydiff;
                coef[2 * dim + i] = bspl;
                coef[3 * dim + i] = ydiff - hs * k7[i] - bspl;
                coef[4 * dim + i] = hs
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            sol.steps.push(DenseStep { t0: t, h: hs, coef });
            n_steps += 1;
            t = t_new;
            std::mem::swap(&mut y, &mut y1);
            std::mem::swap(&mut k1, &mut k7);
            if last {
                break;
            }
            let mut fac = 0.9 * en.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 10.0);
            if reject_last {
                fac = fac.min(1.0);
            }
            h *= fac;
            reject_last = false;
        } else {
            let fac = (0.9 * en.powf(-0.2)).clamp(0.1, 1.0);
            h *= fac;
            reject_last = true;
            if h < opts.h_min {
                return Err(Error::Integration {
                    t,
                    step: h,
                    reason: format!("step size underflow (error norm {en:e})"),
                });
            }
        }
    }
    sol.y_end = y;
    Ok(sol)
}

//! Quadrature rules.
//!
//! [`GradedRule`] is a composite Gauss–Legendre rule whose panels shrink
//! geometrically toward both endpoints, so boundary layers as thin as
//! `2^-GRADING_DEPTH` are resolved without a uniformly fine mesh. Refinement
//! levels split every panel in two.

use std::sync::OnceLock;

use nalgebra::DMatrix;

/// Points per Gauss–Legendre panel.
pub const PANEL_ORDER: usize = 8;
/// Number of geometrically shrinking panels on each side of the interval.
pub const GRADING_DEPTH: usize = 40;
pub const MAX_LEVEL: usize = 7;

/// Gauss–Legendre nodes and weights on [-1, 1], via Newton on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn panel_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_ORDER))
}

/// Panel breakpoints of the graded mesh on [0, 1] at refinement level 0.
fn base_breaks() -> Vec<f64> {
    let mut left: Vec<f64> = (1..=GRADING_DEPTH).rev().map(|k| 0.5f64.powi(k as i32)).collect();
    left.insert(0, 0.0);
    // left now spans [0, 1/2]; mirror it onto [1/2, 1]
    let mut breaks = left.clone();
    for &b in left.iter().rev().skip(1) {
        breaks.push(1.0 - b);
    }
    breaks
}

/// Nodes and weights of the graded composite rule on `[a, b]`.
#[derive(Debug, Clone)]
pub struct GradedRule {
    pub level: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GradedRule {
    pub fn new(a: f64, b: f64, level: usize) -> Self {
        let (gx, gw) = panel_rule();
        let breaks = base_breaks();
        let split = 1usize << level;
        let len = b - a;
        let mut nodes = Vec::with_capacity((breaks.len() - 1) * split * PANEL_ORDER);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for win in breaks.windows(2) {
            let (u0, u1) = (win[0], win[1]);
            let du = (u1 - u0) / split as f64;
            for j in 0..split {
                let lo = u0 + j as f64 * du;
                let half = 0.5 * du;
                let mid = lo + half;
                for k in 0..PANEL_ORDER {
                    nodes.push(a + len * (mid + half * gx[k]));
                    weights.push(len * half * gw[k]);
                }
            }
        }
        GradedRule { level, nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Integrate a scalar function with the graded rule, doubling until two
/// successive levels agree to `rel_tol`. Returns the value and the level used.
pub fn integrate_graded(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> (f64, usize) {
    let eval = |level: usize| {
        let r = GradedRule::new(a, b, level);
        r.nodes.iter().zip(&r.weights).map(|(&x, &w)| w * f(x)).sum::<f64>()
    };
    let mut prev = eval(0);
    for level in 1..=MAX_LEVEL {
        let cur = eval(level);
        if (cur - prev).abs() <= rel_tol * cur.abs() || cur == prev {
            return (cur, level);
        }
        prev = cur;
    }
    (prev, MAX_LEVEL)
}

/// Matrix-valued version of [`integrate_graded`]; agreement is measured in
/// the Frobenius norm relative to the larger of the result and `scale`.
pub fn integrate_graded_mat(
    f: impl Fn(f64) -> DMatrix<f64>,
    a: f64,
    b: f64,
    rel_tol: f64,
    scale: f64,
) -> (DMatrix<f64>, usize) {
    let eval = |level: usize| {
        let r = GradedRule::new(a, b, level);
        let mut acc: Option<DMatrix<f64>> = None;
        for (&x, &w) in r.nodes.iter().zip(&r.weights) {
            let v = f(x) * w;
            acc = Some(match acc {
                Some(m) => m + v,
                None => v,
            });
        }
        acc.unwrap_or_else(|| f(a) * 0.0)
    };
    let mut prev = eval(0);
    for level in 1..=MAX_LEVEL {
        let cur = eval(level);
        if (&cur - &prev).norm() <= rel_tol * cur.norm().max(scale) {
            return (cur, level);
        }
        prev = cur;
    }
    (prev, MAX_LEVEL)
}

const GK_X: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const GK_WK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const GK_WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * GK_WK[7];
    let mut g = fc * GK_WG[3];
    for j in 0..7 {
        let x = h * GK_X[j];
        let s = f(c - x) + f(c + x);
        k += GK_WK[j] * s;
        if j % 2 == 1 {
            g += GK_WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive Gauss–Kronrod 7/15 quadrature.
pub fn adaptive_gk(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> f64 {
    let mut segs: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = gk15(&f, a, b);
    segs.push((a, b, v, e));
    for _ in 0..5000 {
        let total: f64 = segs.iter().map(|s| s.2).sum();
        let err: f64 = segs.iter().map(|s| s.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        let (i, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (lo, hi, _, _) = segs.swap_remove(i);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        segs.push((lo, mid, v1, e1));
        segs.push((mid, hi, v2, e2));
    }
    // sum in interval order so the result does not depend on refinement history
    segs.sort_by(|x, y| x.0.total_cmp(&y.0));
    segs.iter().map(|s| s.2).sum()
}

/// Composite Simpson on a uniform grid with an even number of intervals,
/// falling back to the trapezoid rule otherwise.
pub fn simpson_uniform(values: &[f64], h: f64) -> f64 {
    let m = values.len();
    if m < 2 {
        return 0.0;
    }
    if (m - 1) % 2 != 0 {
        return values.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum();
    }
    let mut s = values[0] + values[m - 1];
    for (i, v) in values.iter().enumerate().take(m - 1).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

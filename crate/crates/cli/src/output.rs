//! CSV writers. Numbers use 17 significant digits so they read back exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use covsteer_core::montecarlo::PathEnsemble;
use covsteer_core::{empirical_moments, GainSchedule, Result, SolverTrace};

fn num(out: &mut String, x: f64) {
    let _ = write!(out, ",{x:.16e}");
}

fn row(out: &mut String, t: f64, vals: impl IntoIterator<Item = f64>) {
    let _ = write!(out, "{t:.16e}");
    for v in vals {
        num(out, v);
    }
    out.push('\n');
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}

/// `t, K entries (column-major), nu entries`.
pub fn gains_csv(path: &Path, s: &GainSchedule) -> Result<()> {
    let (p, n) = s.k[0].shape();
    let mut out = String::from("t");
    for j in 0..n {
        for i in 0..p {
            let _ = write!(out, ",k_{i}_{j}");
        }
    }
    for i in 0..p {
        let _ = write!(out, ",nu_{i}");
    }
    out.push('\n');
    for (idx, &t) in s.grid.iter().enumerate() {
        row(&mut out, t, s.k[idx].iter().copied().chain(s.nu[idx].iter().copied()));
    }
    write(path, &out)
}

/// `t, Pi entries (column-major)`.
pub fn pi_csv(path: &Path, s: &GainSchedule) -> Result<()> {
    let n = s.pi[0].nrows();
    let mut out = String::from("t");
    for j in 0..n {
        for i in 0..n {
            let _ = write!(out, ",pi_{i}_{j}");
        }
    }
    out.push('\n');
    for (idx, &t) in s.grid.iter().enumerate() {
        row(&mut out, t, s.pi[idx].iter().copied());
    }
    write(path, &out)
}

pub fn trace_csv(path: &Path, trace: &SolverTrace) -> Result<()> {
    let mut out = String::from("iteration,residual,damping,theta\n");
    for (k, it) in trace.iterates.iter().enumerate() {
        let _ = writeln!(out, "{k},{:.16e},{:.16e},{:.16e}", it.residual, it.damping, it.theta);
    }
    write(path, &out)
}

/// Per-step `t, mean_i, cov_i_j (column-major), lower_i, upper_i` with
/// bands at the mean plus or minus three standard deviations.
pub fn moments_csv(path: &Path, ens: &PathEnsemble) -> Result<()> {
    let n = ens.n;
    let mut out = String::from("t");
    for i in 0..n {
        let _ = write!(out, ",mean_{i}");
    }
    for j in 0..n {
        for i in 0..n {
            let _ = write!(out, ",cov_{i}_{j}");
        }
    }
    for i in 0..n {
        let _ = write!(out, ",lower_{i}");
    }
    for i in 0..n {
        let _ = write!(out, ",upper_{i}");
    }
    out.push('\n');
    for (k, t) in ens.times().into_iter().enumerate() {
        let t_grid = k as f64 * ens.dt;
        let (m, c) = empirical_moments(ens, t_grid)?;
        let sd: Vec<f64> = (0..n).map(|i| c[(i, i)].max(0.0).sqrt()).collect();
        let vals = m
            .iter()
            .copied()
            .chain(c.iter().copied())
            .chain((0..n).map(|i| m[i] - 3.0 * sd[i]))
            .chain((0..n).map(|i| m[i] + 3.0 * sd[i]));
        row(&mut out, t, vals);
    }
    write(path, &out)
}

/// Long format: one row per (step, kept path).
pub fn paths_csv(path: &Path, ens: &PathEnsemble) -> Result<()> {
    let n = ens.n;
    let mut out = String::from("t,path");
    for i in 0..n {
        let _ = write!(out, ",x_{i}");
    }
    out.push('\n');
    for (k, t) in ens.times().into_iter().enumerate() {
        for (p, traj) in ens.full_paths.iter().enumerate() {
            let _ = write!(out, "{t:.16e},{p}");
            for v in &traj[k * n..(k + 1) * n] {
                num(&mut out, *v);
            }
            out.push('\n');
        }
    }
    write(path, &out)
}

pub fn json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json value serializes");
    text.push('\n');
    write(path, &text)
}

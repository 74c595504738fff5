//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use covsteer_core::linalg::{self, Mat};
use covsteer_core::montecarlo::{covariance_ode, simulate, SimulationOptions};
use covsteer_core::riccati::{existence_condition, RiccatiSolution};
use covsteer_core::steering::{
    boundary_map, closed_form_pi0, eta, solve_pi0, solve_pi0_scalar, symmetrizer, BoundaryMapWorkspace, Eta,
};
use covsteer_core::{
    check_controllability, empirical_moments, synthesize, Error, GainSchedule, GramianTable, JumpChannel, JumpLaw,
    LtvSystem, MatrixSchedule, NoiseComponent, NoiseSpec, Scenario, SolveOptions, SteeringProblem, Vector,
};

type Outcome = Result<String, String>;

// ---------------------------------------------------------------------------
// random instances

fn poly_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, max_deg: usize, amp: f64) -> MatrixSchedule {
    let entries = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| {
                    let deg = rng.random_range(0..=max_deg);
                    (0..=deg).map(|_| rng.random_range(-amp..amp)).collect()
                })
                .collect()
        })
        .collect();
    MatrixSchedule::polynomial(entries).unwrap()
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let l = gaussian_matrix(rng, n, n);
    &l * l.transpose() + Mat::identity(n, n) * 0.2
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Mat {
    let m = gaussian_matrix(rng, n, n);
    (&m + m.transpose()) * (0.5 * scale)
}

/// Random noise acting through a random `C`: a Wiener part plus one
/// compound-Poisson channel per noise coordinate.
fn random_noise(rng: &mut ChaCha8Rng, n: usize) -> (MatrixSchedule, NoiseSpec) {
    let q = rng.random_range(1..=n);
    let c = poly_matrix(rng, n, q, 1, 1.0);
    let channels = (0..q)
        .map(|_| {
            let rate = MatrixSchedule::scalar_polynomial(vec![rng.random_range(0.5..2.0), rng.random_range(-0.4..1.0)]);
            let law = JumpLaw::Normal {
                mean: rng.random_range(-0.5..0.5),
                std_dev: rng.random_range(0.05..0.5),
            };
            JumpChannel::new(rate, law).unwrap()
        })
        .collect();
    let noise = NoiseSpec::new(
        q,
        vec![
            NoiseComponent::Wiener {
                scale: gaussian_matrix(rng, q, q) * 0.5,
            },
            NoiseComponent::CompoundPoisson {
                channels,
                compensated: rng.random_bool(0.5),
            },
        ],
    )
    .unwrap();
    (c, noise)
}

/// Totally controllable system with polynomial `A` and `B`, `R = I`.
fn random_system(rng: &mut ChaCha8Rng, n: usize, noisy: bool) -> LtvSystem {
    let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    loop {
        let p = rng.random_range(1..=n);
        let a = poly_matrix(rng, n, n, 2, 1.0);
        let b = poly_matrix(rng, n, p, 1, 1.0);
        let (c, noise) = if noisy {
            random_noise(rng, n)
        } else {
            (MatrixSchedule::identity(n), NoiseSpec::unit_wiener(n))
        };
        let sys = LtvSystem::new(a, b, c, MatrixSchedule::identity(p), noise).unwrap();
        let report = check_controllability(&sys, &grid, 1e-9).unwrap();
        let table = GramianTable::new(&sys).unwrap();
        if report.total && linalg::min_eigenvalue(&table.gramian_from0(1.0)) > 1e-4 {
            return sys;
        }
    }
}

/// Random symmetric anchor at `s` whose existence margin is at least `margin`.
fn feasible_anchor(rng: &mut ChaCha8Rng, table: &GramianTable, s: f64, margin: f64) -> Mat {
    let n = table.n();
    let scale = rng.random_range(0.2..3.0);
    let mut pi = random_symmetric(rng, n, scale);
    while existence_condition(table, &pi, s).margin < margin {
        pi *= 0.5;
    }
    pi
}

// ---------------------------------------------------------------------------
// fixed-step RK4 oracle

fn rk4<F: Fn(f64, &Mat) -> Mat>(f: &F, t0: f64, t1: f64, y0: &Mat, max_h: f64) -> Mat {
    let steps = ((t1 - t0).abs() / max_h).ceil().max(1.0) as usize;
    let h = (t1 - t0) / steps as f64;
    let mut y = y0.clone();
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let k1 = f(t, &y);
        let k2 = f(t + 0.5 * h, &(&y + &k1 * (0.5 * h)));
        let k3 = f(t + 0.5 * h, &(&y + &k2 * (0.5 * h)));
        let k4 = f(t + h, &(&y + &k3 * h));
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    y
}

fn riccati_rhs(sys: &LtvSystem) -> impl Fn(f64, &Mat) -> Mat + '_ {
    move |t, pi| {
        let a = sys.a().eval(t);
        let w = sys.control_weight(t);
        -(a.transpose() * pi) - pi * &a + pi * w * pi
    }
}

/// `Pi` at the given times by RK4 from `(s, pi_s)`; times need not be sorted.
fn riccati_oracle(sys: &LtvSystem, s: f64, pi_s: &Mat, times: &[f64]) -> Vec<Mat> {
    let f = riccati_rhs(sys);
    times
        .iter()
        .map(|&t| rk4(&f, s, t, pi_s, 2e-4))
        .collect()
}

fn sample_times() -> Vec<f64> {
    (0..=20).map(|k| k as f64 / 20.0).collect()
}

// ---------------------------------------------------------------------------
// criteria

fn riccati_instances() -> Vec<(LtvSystem, f64, Mat)> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    (0..100)
        .map(|i| {
            let n = 1 + i % 4;
            let sys = random_system(&mut rng, n, false);
            let table = GramianTable::new(&sys).unwrap();
            let s = rng.random_range(0.0..1.0);
            let pi_s = feasible_anchor(&mut rng, &table, s, 0.05);
            (sys, s, pi_s)
        })
        .collect()
}

fn criterion_1(instances: &[(LtvSystem, f64, Mat)]) -> Outcome {
    let times = sample_times();
    let mut worst = 0.0f64;
    for (sys, s, pi_s) in instances {
        let table = GramianTable::new(sys).map_err(|e| e.to_string())?;
        let sol = RiccatiSolution::feasible(&table, pi_s.clone(), *s).map_err(|e| e.to_string())?;
        let oracle = riccati_oracle(sys, *s, pi_s, &times);
        for (t, o) in times.iter().zip(&oracle) {
            let closed = sol.eval(*t).map_err(|e| e.to_string())?;
            worst = worst.max((closed - o).amax());
        }
    }
    let msg = format!("max |Pi_closed - Pi_ode| = {worst:.2e} over 100 systems x 21 times");
    if worst < 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_2(instances: &[(LtvSystem, f64, Mat)]) -> Outcome {
    let times = sample_times();
    let mut worst = 0.0f64;
    for (sys, s, pi_s) in instances {
        let n = sys.n();
        let table = GramianTable::new(sys).map_err(|e| e.to_string())?;
        let sol = RiccatiSolution::feasible(&table, pi_s.clone(), *s).map_err(|e| e.to_string())?;
        // joint RK4 of [Pi, Phi] forward from t = 0
        let pi0 = riccati_oracle(sys, *s, pi_s, &[0.0]).remove(0);
        let f = |t: f64, y: &Mat| {
            let pi = y.columns(0, n).into_owned();
            let phi = y.columns(n, n).into_owned();
            let a = sys.a().eval(t);
            let w = sys.control_weight(t);
            let dpi = -(a.transpose() * &pi) - &pi * &a + &pi * &w * &pi;
            let dphi = (&a - &w * &pi) * phi;
            let mut d = Mat::zeros(n, 2 * n);
            d.columns_mut(0, n).copy_from(&dpi);
            d.columns_mut(n, n).copy_from(&dphi);
            d
        };
        let mut y = Mat::zeros(n, 2 * n);
        y.columns_mut(0, n).copy_from(&pi0);
        y.columns_mut(n, n).copy_from(&Mat::identity(n, n));
        let mut t_prev = 0.0;
        for &t in &times {
            y = rk4(&f, t_prev, t, &y, 2e-4);
            t_prev = t;
            let closed = sol.closed_loop_transition(t, 0.0).map_err(|e| e.to_string())?;
            worst = worst.max((closed - y.columns(n, n)).amax());
        }
    }
    let msg = format!("max |Phi_cl closed - Phi_cl ode| = {worst:.2e} over 100 systems x 21 times");
    if worst < 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let h = 1e-6;
    let mut worst_rel = 0.0f64;
    let mut worst_s = f64::INFINITY;
    for i in 0..50 {
        let n = 1 + i % 3;
        let sys = random_system(&mut rng, n, i % 5 != 0);
        let sigma0 = random_spd(&mut rng, n);
        let ws = BoundaryMapWorkspace::new(&sys, &sigma0).map_err(|e| e.to_string())?;
        let pi0 = feasible_anchor(&mut rng, ws.table(), 0.0, 0.05);
        let level = ws.map(&pi0).map_err(|e| e.to_string())?.level;
        let jac = ws.jacobian_at_level(&pi0, level).map_err(|e| e.to_string())? * symmetrizer(n);
        let mut fd = Mat::zeros(n * n, n * n);
        for k in 0..n * n {
            let mut plus = pi0.clone();
            let mut minus = pi0.clone();
            plus[(k % n, k / n)] += h;
            minus[(k % n, k / n)] -= h;
            let fp = ws.map_at_level(&plus, level).map_err(|e| e.to_string())?.sigma1;
            let fm = ws.map_at_level(&minus, level).map_err(|e| e.to_string())?.sigma1;
            let col = (fp - fm) / (2.0 * h);
            fd.column_mut(k).copy_from(&linalg::vec(&col));
        }
        worst_rel = worst_rel.max(linalg::frobenius(&(&jac - &fd)) / linalg::frobenius(&jac));
        let s = ws.jacobian_bracket(&pi0, level).map_err(|e| e.to_string())?;
        worst_s = worst_s.min(linalg::min_eigenvalue(&linalg::symmetrize(&s)));
    }
    let msg = format!("max relative FD error {worst_rel:.2e}, min eig(S) {worst_s:.2e} over 50 instances");
    if worst_rel < 1e-5 && worst_s > 0.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let opts = SolveOptions::default();
    let (mut worst_err, mut worst_res, mut homotopy) = (0.0f64, 0.0f64, 0usize);
    for i in 0..100 {
        let n = 1 + i % 3;
        let sys = random_system(&mut rng, n, true);
        let sigma0 = random_spd(&mut rng, n);
        let table = GramianTable::new(&sys).map_err(|e| e.to_string())?;
        let pi0 = feasible_anchor(&mut rng, &table, 0.0, 0.05);
        let sigma1 = boundary_map(&sys, &sigma0, &pi0).map_err(|e| e.to_string())?;
        let prob = SteeringProblem::new(Vector::zeros(n), sigma0, Vector::zeros(n), sigma1.clone())
            .map_err(|e| e.to_string())?;
        let (got, trace) = solve_pi0(&sys, &prob, &opts).map_err(|e| format!("instance {i}: {e}"))?;
        worst_err = worst_err.max((got - &pi0).amax());
        worst_res = worst_res.max(trace.final_residual / linalg::frobenius(&sigma1).max(1.0));
        homotopy += trace.homotopy_used as usize;
    }
    let msg = format!(
        "max |Pi0_solved - Pi0| = {worst_err:.2e}, max relative residual {worst_res:.2e}, homotopy {homotopy}/100"
    );
    if worst_err < 1e-7 && worst_res <= 1e-10 && homotopy < 10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    // without the warm start Newton cannot simply return the closed form
    let opts = SolveOptions {
        warm_start: false,
        ..SolveOptions::default()
    };
    let mut worst = 0.0f64;
    for i in 0..20 {
        let n = 1 + i % 3;
        let base = random_system(&mut rng, n, false);
        let p = base.p();
        let sys = LtvSystem::new(
            base.a().clone(),
            base.b().clone(),
            base.b().clone(),
            MatrixSchedule::identity(p),
            NoiseSpec::unit_wiener(p),
        )
        .map_err(|e| e.to_string())?;
        let sigma0 = random_spd(&mut rng, n);
        let sigma1 = random_spd(&mut rng, n);
        let closed = closed_form_pi0(&sys, &sigma0, &sigma1).map_err(|e| e.to_string())?;
        let prob = SteeringProblem::new(Vector::zeros(n), sigma0, Vector::zeros(n), sigma1).map_err(|e| e.to_string())?;
        let (newton, _) = solve_pi0(&sys, &prob, &opts).map_err(|e| format!("instance {i}: {e}"))?;
        worst = worst.max((closed - newton).amax());
    }
    let msg = format!("max |closed form - Newton| = {worst:.2e} over 20 instances");
    if worst < 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn scalar_system(c: Vec<f64>) -> LtvSystem {
    LtvSystem::new(
        MatrixSchedule::zeros(1, 1),
        MatrixSchedule::identity(1),
        MatrixSchedule::scalar_polynomial(c),
        MatrixSchedule::identity(1),
        NoiseSpec::unit_wiener(1),
    )
    .unwrap()
}

fn criterion_6() -> Outcome {
    let mut notes = Vec::new();
    // approach N(1,0)^-1 along Pi0 = N^{-1/2} (1 - delta) N^{-1/2}
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for i in 0..5 {
        let n = 1 + i % 3;
        let sys = random_system(&mut rng, n, true);
        let sigma0 = random_spd(&mut rng, n);
        let ws = BoundaryMapWorkspace::new(&sys, &sigma0).map_err(|e| e.to_string())?;
        let root_inv = linalg::sym_inv_sqrt(ws.n10()).map_err(|e| e.to_string())?;
        let norms: Vec<f64> = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
            .iter()
            .map(|&d| {
                let pi0 = &root_inv * (1.0 - d) * &root_inv;
                ws.map(&pi0).map(|v| linalg::frobenius(&v.sigma1))
            })
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let decreasing = norms.windows(2).all(|w| w[1] < w[0]);
        // a positive limit would flatten the log-log slope to zero; require
        // each of the last two decades to keep a slope of at least 0.1
        let slopes: Vec<f64> = norms.windows(2).map(|w| (w[0] / w[1]).log10()).collect();
        let still_decaying = slopes[2..].iter().all(|&k| k >= 0.1);
        if !(decreasing && still_decaying) {
            return Err(format!("instance {i}: |f| along the boundary approach = {norms:?}"));
        }
        notes.push(slopes[3]);
    }
    // scalar, sigma0 = 0, k = t^2: f increases toward eta = 1
    let sys = scalar_system(vec![0.0, 1.0]);
    let zero = Mat::zeros(1, 1);
    let vals: Vec<f64> = [-1.0, -10.0, -100.0, -1e3, -1e4]
        .iter()
        .map(|&p| boundary_map(&sys, &zero, &Mat::from_element(1, 1, p)).map(|m| m[(0, 0)]))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let eta_val = match eta(&sys).map_err(|e| e.to_string())? {
        Eta::Finite(v) => v,
        other => return Err(format!("eta returned {other:?}")),
    };
    let increasing = vals.windows(2).all(|w| w[1] > w[0]);
    let below = vals.iter().all(|&v| v < eta_val);
    let gaps: Vec<f64> = vals.iter().map(|v| eta_val - v).collect();
    let msg = format!(
        "boundary log-log slope over the last decade >= {:.2}; scalar f -> {:.6} (eta = {eta_val:.9})",
        notes.iter().cloned().fold(f64::INFINITY, f64::min),
        vals[4]
    );
    if increasing && below && gaps[4] < 1e-2 && (eta_val - 1.0).abs() <= 1e-6 {
        Ok(msg)
    } else {
        Err(format!("{msg}; values {vals:?}"))
    }
}

fn example_check(name: &str) -> Result<(covsteer_core::PathEnsemble, SteeringProblem, Mat), String> {
    let sc = Scenario::builtin(name).unwrap();
    let sys = sc.build_system().map_err(|e| e.to_string())?;
    let prob = sc.build_problem().map_err(|e| e.to_string())?;
    let syn = synthesize(&sys, &prob, &sc.solve_options()).map_err(|e| e.to_string())?;
    let sigma_ode = covariance_ode(&sys, &syn.law, &prob.sigma0).map_err(|e| e.to_string())?.terminal();
    let dense = GainSchedule::sample(&syn.law, 20_001).map_err(|e| e.to_string())?;
    let opts = SimulationOptions {
        n_paths: 100_000,
        dt: 1e-3,
        seed: sc.simulation.seed,
        ..Default::default()
    };
    let ens = simulate(&sys, &dense, &prob, &opts).map_err(|e| e.to_string())?;
    Ok((ens, prob, sigma_ode))
}

fn criterion_7() -> Outcome {
    let (ens, prob, sigma_ode) = example_check("example1")?;
    let (m, c) = empirical_moments(&ens, 1.0).map_err(|e| e.to_string())?;
    let (mse, cse) = ens.batch_standard_errors(1.0).map_err(|e| e.to_string())?;
    let zm = (m[0] - prob.mu1[0]) / mse[0];
    let zv = (c[(0, 0)] - prob.sigma1[(0, 0)]) / cse[(0, 0)];
    let ode_err = (sigma_ode[(0, 0)] - 2.0).abs();
    let msg = format!(
        "mean {:.5} ({zm:+.2} SE), variance {:.5} ({zv:+.2} SE), ODE variance error {ode_err:.1e}",
        m[0],
        c[(0, 0)]
    );
    if zm.abs() <= 3.0 && zv.abs() <= 3.0 && ode_err <= 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_8() -> Outcome {
    let (ens, prob, _) = example_check("example2")?;
    let (m, c) = empirical_moments(&ens, 1.0).map_err(|e| e.to_string())?;
    let (mse, cse) = ens.batch_standard_errors(1.0).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for i in 0..2 {
        worst = worst.max(((m[i] - prob.mu1[i]) / mse[i]).abs());
        for j in 0..2 {
            worst = worst.max(((c[(i, j)] - prob.sigma1[(i, j)]) / cse[(i, j)]).abs());
        }
    }
    let msg = format!(
        "covariance [{:.4}, {:.4}; {:.4}, {:.4}], mean [{:.4}, {:.4}], worst deviation {worst:.2} SE",
        c[(0, 0)],
        c[(0, 1)],
        c[(1, 0)],
        c[(1, 1)],
        m[0],
        m[1]
    );
    if worst <= 3.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_9() -> Outcome {
    let sys = LtvSystem::with_unit_noise(MatrixSchedule::zeros(1, 1), MatrixSchedule::identity(1)).unwrap();
    let table = GramianTable::new(&sys).map_err(|e| e.to_string())?;
    let sol = RiccatiSolution::new(&table, Mat::from_element(1, 1, 2.0), 0.0);
    let escape = match sol.require_feasible() {
        Err(Error::FiniteEscape { escape, .. }) => escape,
        other => return Err(format!("pi0 = 2 gave {other:?}")),
    };
    // random infeasible anchors must also be rejected
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut rejected = 0;
    for i in 0..20 {
        let sys = random_system(&mut rng, 1 + i % 3, false);
        let table = GramianTable::new(&sys).map_err(|e| e.to_string())?;
        let n10 = table.gramian_from0(1.0);
        let pi = linalg::spd_inverse(&n10).map_err(|e| e.to_string())? * rng.random_range(1.05..3.0);
        if let Err(Error::FiniteEscape { escape, .. }) = RiccatiSolution::new(&table, pi, 0.0).require_feasible() {
            if escape > 0.0 && escape < 1.0 {
                rejected += 1;
            }
        }
    }
    let unreachable = scalar_system(vec![0.0, 1.0]);
    let (eta_cited, text) = match solve_pi0_scalar(&unreachable, 0.0, 1.5) {
        Err(e @ Error::UnreachableFromDeterministicStart { .. }) => {
            let Error::UnreachableFromDeterministicStart { eta, .. } = e else { unreachable!() };
            (eta, e.to_string())
        }
        other => return Err(format!("sigma0 = 0, sigma1 = 1.5 gave {other:?}")),
    };
    let msg = format!("escape at {escape:.9}, {rejected}/20 random anchors rejected, \"{text}\"");
    if (escape - 0.5).abs() <= 1e-6 && rejected == 20 && (eta_cited - 1.0).abs() < 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn run_reproduce(bin: &str, dir: &Path) -> Result<(), String> {
    let status = Command::new(bin)
        .args(["reproduce", "example1", "--seed", "7", "--out"])
        .arg(dir)
        .env("COVSTEER_THREADS", "2")
        .stdout(std::process::Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    if status.success() {
        Ok(())
    } else {
        Err(format!("covsteer exited with {status}"))
    }
}

fn criterion_10() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_covsteer");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_reproduce(bin, &a)?;
    run_reproduce(bin, &b)?;
    let mut names: Vec<_> = std::fs::read_dir(&a)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name())
        .filter(|n| n.to_string_lossy().ends_with(".csv"))
        .collect();
    names.sort();
    if names.len() < 3 {
        return Err(format!("expected several CSV files, found {names:?}"));
    }
    for name in &names {
        let x = std::fs::read(a.join(name)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.join(name)).map_err(|e| e.to_string())?;
        if x != y {
            return Err(format!("{} differs between runs", name.to_string_lossy()));
        }
    }
    Ok(format!("{} CSV files byte-identical across two runs", names.len()))
}

fn main() {
    let instances = riccati_instances();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("Riccati closed form vs ODE", Box::new(|| criterion_1(&instances))),
        ("closed-loop transition vs ODE", Box::new(|| criterion_2(&instances))),
        ("Jacobian vs finite differences", Box::new(criterion_3)),
        ("round-trip solve", Box::new(criterion_4)),
        ("matched-channel closed form", Box::new(criterion_5)),
        ("limit behavior", Box::new(criterion_6)),
        ("example 1 reproduction", Box::new(criterion_7)),
        ("example 2 reproduction", Box::new(criterion_8)),
        ("infeasibility detection", Box::new(criterion_9)),
        ("determinism", Box::new(criterion_10)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let what = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {what}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {:>2} {name} ({secs:.1} s): {detail}", i + 1);
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}

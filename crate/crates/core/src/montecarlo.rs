//! Closed-loop jump-diffusion Monte Carlo and the moment ODEs used to check it.
//!
//! Each path owns a ChaCha8 stream seeded from `(master seed, path index)`, so
//! the ensemble does not depend on how paths are spread over threads. Paths
//! are generated in fixed batches and merged in index order.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;

use crate::controller::FeedbackLaw;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::noise::{JumpChannel, NoiseComponent};
use crate::ode::{integrate, DenseSolution, OdeOptions};
use crate::system::{LtvSystem, SteeringProblem};

/// Largest admissible time step.
pub const MAX_DT: f64 = 1e-3;
/// Target for `|A + B K| h` on each Euler substep.
pub const STIFFNESS_STEP: f64 = 0.0025;
const BATCH: usize = 1000;
const SE_BATCHES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    /// States of every path are stored at every `record_stride`-th step.
    pub record_stride: usize,
    /// Number of leading paths stored at full resolution.
    pub keep_paths: usize,
    /// Worker threads; `None` reads `COVSTEER_THREADS`, then uses rayon's default.
    pub threads: Option<usize>,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions {
            n_paths: 100_000,
            dt: 1e-3,
            seed: 0,
            record_stride: 50,
            keep_paths: 10,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub t: f64,
    /// Noise coordinate the jump enters through.
    pub channel: usize,
    pub size: f64,
}

/// Running mean and scatter matrix.
#[derive(Debug, Clone, PartialEq)]
struct Welford {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(n: usize) -> Self {
        Welford {
            count: 0,
            mean: vec![0.0; n],
            m2: vec![0.0; n * n],
        }
    }

    fn push(&mut self, x: &[f64], delta: &mut [f64]) {
        let n = x.len();
        self.count += 1;
        let c = self.count as f64;
        for i in 0..n {
            delta[i] = x[i] - self.mean[i];
            self.mean[i] += delta[i] / c;
        }
        // m2 += delta_old * (x - mean_new)^T
        for j in 0..n {
            let post = x[j] - self.mean[j];
            for i in 0..n {
                self.m2[i + j * n] += delta[i] * post;
            }
        }
    }

    /// Chan's pairwise combination.
    fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let n = self.mean.len();
        let (na, nb) = (self.count as f64, other.count as f64);
        let tot = na + nb;
        let delta: Vec<f64> = (0..n).map(|i| other.mean[i] - self.mean[i]).collect();
        for j in 0..n {
            for i in 0..n {
                self.m2[i + j * n] += other.m2[i + j * n] + delta[i] * delta[j] * na * nb / tot;
            }
        }
        for i in 0..n {
            self.mean[i] += delta[i] * nb / tot;
        }
        self.count += other.count;
    }

    fn mean(&self) -> Vector {
        Vector::from_column_slice(&self.mean)
    }

    fn covariance(&self) -> Option<Mat> {
        let n = self.mean.len();
        (self.count >= 2).then(|| {
            let c = Mat::from_column_slice(n, n, &self.m2) / (self.count as f64 - 1.0);
            linalg::symmetrize(&c)
        })
    }
}

/// Monte Carlo sample paths with their seeds and jump logs.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub n_paths: usize,
    pub dt: f64,
    pub n_steps: usize,
    pub n: usize,
    pub record_stride: usize,
    /// Per-path RNG seed.
    pub seeds: Vec<u64>,
    /// Per-path jump events, sorted by time.
    pub jump_log: Vec<Vec<JumpEvent>>,
    /// `states[path][record][i]` flattened; records at steps `0, stride, 2 stride, ...`.
    states: Vec<f64>,
    /// Full-resolution trajectories of the leading paths, `[step][i]` flattened.
    pub full_paths: Vec<Vec<f64>>,
    /// `int u^T R u dt` per path.
    pub control_energy: Vec<f64>,
    step_moments: Vec<Welford>,
}

impl PathEnsemble {
    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| k as f64 * self.dt).collect()
    }

    pub fn n_records(&self) -> usize {
        self.n_steps / self.record_stride + 1
    }

    pub fn recorded_steps(&self) -> Vec<usize> {
        (0..self.n_records()).map(|r| r * self.record_stride).collect()
    }

    /// State of `path` at the `record`-th recorded step.
    pub fn recorded_state(&self, path: usize, record: usize) -> Vector {
        let n = self.n;
        let off = (path * self.n_records() + record) * n;
        Vector::from_column_slice(&self.states[off..off + n])
    }

    pub fn terminal_states(&self) -> Vec<Vector> {
        let last = self.n_records() - 1;
        (0..self.n_paths).map(|p| self.recorded_state(p, last)).collect()
    }

    /// Index of the step at time `t`, if `t` lies on the step grid.
    pub fn step_index(&self, t: f64) -> Option<usize> {
        let x = t / self.dt;
        let k = x.round();
        ((x - k).abs() < 1e-6 && k >= 0.0 && k <= self.n_steps as f64).then_some(k as usize)
    }

    /// Mean number of jumps per path.
    pub fn mean_jump_count(&self) -> f64 {
        self.jump_log.iter().map(|j| j.len() as f64).sum::<f64>() / self.n_paths as f64
    }

    /// Standard errors of the sample mean and covariance at a recorded step,
    /// from the spread over 20 contiguous batches of paths.
    pub fn batch_standard_errors(&self, t: f64) -> Result<(Vector, Mat)> {
        let k = self.step_index(t).ok_or_else(|| Error::Simulation(format!("t = {t} is not on the step grid")))?;
        if k % self.record_stride != 0 {
            return Err(Error::Simulation(format!("t = {t} is not a recorded step")));
        }
        if self.n_paths < 2 * SE_BATCHES {
            return Err(Error::Simulation(format!("need at least {} paths for batch errors", 2 * SE_BATCHES)));
        }
        let rec = k / self.record_stride;
        let n = self.n;
        let per = self.n_paths / SE_BATCHES;
        let mut means = Vec::with_capacity(SE_BATCHES);
        let mut covs = Vec::with_capacity(SE_BATCHES);
        let mut delta = vec![0.0; n];
        for b in 0..SE_BATCHES {
            let mut w = Welford::new(n);
            for p in b * per..(b + 1) * per {
                let x = self.recorded_state(p, rec);
                w.push(x.as_slice(), &mut delta);
            }
            means.push(w.mean());
            covs.push(w.covariance().unwrap());
        }
        let g = SE_BATCHES as f64;
        let mbar = means.iter().fold(Vector::zeros(n), |a, m| a + m) / g;
        let cbar = covs.iter().fold(Mat::zeros(n, n), |a, c| a + c) / g;
        let mse = means
            .iter()
            .fold(Vector::zeros(n), |a, m| a + (m - &mbar).map(|x| x * x))
            .map(|s| (s / (g - 1.0) / g).sqrt());
        let cse = covs
            .iter()
            .fold(Mat::zeros(n, n), |a, c| a + (c - &cbar).map(|x| x * x))
            .map(|s| (s / (g - 1.0) / g).sqrt());
        Ok((mse, cse))
    }

    /// Mean control energy and its standard error.
    pub fn energy_estimate(&self) -> (f64, f64) {
        let m = self.n_paths as f64;
        let mean = self.control_energy.iter().sum::<f64>() / m;
        let var = self.control_energy.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (m - 1.0);
        (mean, (var / m).sqrt())
    }
}

/// Sample mean and covariance (divisor `m - 1`) over all paths at step time `t`.
pub fn empirical_moments(ensemble: &PathEnsemble, t: f64) -> Result<(Vector, Mat)> {
    let k = ensemble
        .step_index(t)
        .ok_or_else(|| Error::Simulation(format!("t = {t} is not on the step grid")))?;
    let w = &ensemble.step_moments[k];
    let cov = w
        .covariance()
        .ok_or_else(|| Error::Simulation("covariance needs at least two paths".into()))?;
    Ok((w.mean(), cov))
}

/// Sample mean and covariance of a set of vectors.
pub fn sample_moments(samples: &[Vector]) -> Result<(Vector, Mat)> {
    let n = samples.first().map_or(0, |v| v.len());
    let mut w = Welford::new(n);
    let mut delta = vec![0.0; n];
    for s in samples {
        w.push(s.as_slice(), &mut delta);
    }
    let cov = w
        .covariance()
        .ok_or_else(|| Error::Simulation("covariance needs at least two samples".into()))?;
    Ok((w.mean(), cov))
}

/// Seed of path `index`: one SplitMix64 output keyed by the master seed.
pub fn path_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Coefficients on the (path-independent) substep grid, stored flat.
struct Coefficients {
    n: usize,
    p: usize,
    q: usize,
    /// First substep of each step; `len = n_steps + 1`.
    step_start: Vec<usize>,
    tau: Vec<f64>,
    h: Vec<f64>,
    /// `A + B K`, column-major n×n.
    f: Vec<f64>,
    /// `B nu` plus compensated-jump correction.
    c: Vec<f64>,
    /// Symmetric root of the Gaussian covariance rate, n×n; empty when noise-free.
    l: Vec<f64>,
    /// `C`, n×q.
    cm: Vec<f64>,
    /// Energy terms on substep nodes including t = 1.
    k: Vec<f64>,
    nu: Vec<f64>,
    r: Vec<f64>,
}

fn flat(m: &Mat, out: &mut Vec<f64>) {
    out.extend_from_slice(m.as_slice());
}

impl Coefficients {
    fn build(system: &LtvSystem, law: &dyn FeedbackLaw, dt: f64, n_steps: usize) -> Result<Self> {
        let (n, p, q) = (system.n(), system.p(), system.q());
        let noise = system.noise();
        let diffusive = noise
            .components()
            .iter()
            .any(|c| !matches!(c, NoiseComponent::CompoundPoisson { .. }));
        let closed = |t: f64| system.a().eval(t) + system.b().eval(t) * law.gain(t);
        let mut co = Coefficients {
            n,
            p,
            q,
            step_start: Vec::with_capacity(n_steps + 1),
            tau: Vec::new(),
            h: Vec::new(),
            f: Vec::new(),
            c: Vec::new(),
            l: Vec::new(),
            cm: Vec::new(),
            k: Vec::new(),
            nu: Vec::new(),
            r: Vec::new(),
        };
        let mut f_prev = closed(0.0);
        for s in 0..n_steps {
            let t0 = s as f64 * dt;
            let f_next = closed((s + 1) as f64 * dt);
            let stiff = linalg::frobenius(&f_prev).max(linalg::frobenius(&f_next));
            if !stiff.is_finite() {
                return Err(Error::Simulation(format!("closed-loop matrix is not finite near t = {t0}")));
            }
            let m = ((stiff * dt / STIFFNESS_STEP).ceil() as usize).max(1);
            co.step_start.push(co.tau.len());
            let h = dt / m as f64;
            for j in 0..m {
                let tau = t0 + j as f64 * h;
                co.push_node(system, law, tau)?;
                co.tau.push(tau);
                co.h.push(h);
                let ctau = system.c().eval(tau);
                let b = system.b().eval(tau);
                let comp = &ctau * (noise.compensator_drift(tau) - noise.driving_drift(tau));
                let cv = b * law.feedforward(tau) - comp;
                co.c.extend_from_slice(cv.as_slice());
                flat(&(system.a().eval(tau) + system.b().eval(tau) * law.gain(tau)), &mut co.f);
                flat(&ctau, &mut co.cm);
                if diffusive {
                    let cov = &ctau * noise.diffusion_intensity(tau) * ctau.transpose();
                    flat(&linalg::sym_sqrt(&linalg::symmetrize(&cov)), &mut co.l);
                }
            }
            f_prev = f_next;
        }
        co.step_start.push(co.tau.len());
        co.push_node(system, law, 1.0)?;
        Ok(co)
    }

    fn push_node(&mut self, system: &LtvSystem, law: &dyn FeedbackLaw, t: f64) -> Result<()> {
        let k = law.gain(t);
        let nu = law.feedforward(t);
        if !linalg::all_finite(&k) || nu.iter().any(|x| !x.is_finite()) {
            return Err(Error::Simulation(format!("control law is not finite at t = {t}")));
        }
        flat(&k, &mut self.k);
        self.nu.extend_from_slice(nu.as_slice());
        flat(&system.r().eval(t), &mut self.r);
        Ok(())
    }

    fn diffusive(&self) -> bool {
        !self.l.is_empty()
    }

    /// `u^T R u` with `u = K x + nu` at node `i`.
    fn energy(&self, i: usize, x: &[f64], u: &mut [f64]) -> f64 {
        let (n, p) = (self.n, self.p);
        let k = &self.k[i * p * n..(i + 1) * p * n];
        let nu = &self.nu[i * p..(i + 1) * p];
        let r = &self.r[i * p * p..(i + 1) * p * p];
        for a in 0..p {
            let mut s = nu[a];
            for j in 0..n {
                s += k[a + j * p] * x[j];
            }
            u[a] = s;
        }
        let mut e = 0.0;
        for j in 0..p {
            for a in 0..p {
                e += u[a] * r[a + j * p] * u[j];
            }
        }
        e
    }

    /// One Euler–Maruyama update of length `h` with the coefficients of substep `i`.
    fn em<R: Rng>(&self, i: usize, h: f64, x: &mut [f64], scratch: &mut [f64], rng: &mut R) {
        if h <= 0.0 {
            return;
        }
        let n = self.n;
        let f = &self.f[i * n * n..(i + 1) * n * n];
        let c = &self.c[i * n..(i + 1) * n];
        let (dx, z) = scratch.split_at_mut(n);
        for a in 0..n {
            let mut s = c[a];
            for j in 0..n {
                s += f[a + j * n] * x[j];
            }
            dx[a] = s * h;
        }
        if self.diffusive() {
            let l = &self.l[i * n * n..(i + 1) * n * n];
            let sh = h.sqrt();
            for zj in z.iter_mut() {
                *zj = rng.sample::<f64, _>(StandardNormal) * sh;
            }
            for j in 0..n {
                for a in 0..n {
                    dx[a] += l[a + j * n] * z[j];
                }
            }
        }
        for a in 0..n {
            x[a] += dx[a];
        }
    }

    fn jump(&self, i: usize, ev: &JumpEvent, x: &mut [f64]) {
        let n = self.n;
        let cm = &self.cm[i * n * self.q..(i + 1) * n * self.q];
        for a in 0..n {
            x[a] += cm[a + ev.channel * n] * ev.size;
        }
    }
}

/// A jump channel with its thinning envelope.
struct Sampler {
    coordinate: usize,
    channel: JumpChannel,
    envelope: f64,
}

fn samplers(system: &LtvSystem) -> Result<Vec<Sampler>> {
    let mut out = Vec::new();
    for comp in system.noise().components() {
        if let NoiseComponent::CompoundPoisson { channels, .. } = comp {
            for (i, ch) in channels.iter().enumerate() {
                let envelope = ch.rate.scalar_upper_bound();
                if !envelope.is_finite() {
                    return Err(Error::Simulation(format!("rate of jump channel {i} is unbounded on [0, 1]")));
                }
                if envelope > 0.0 {
                    out.push(Sampler {
                        coordinate: i,
                        channel: ch.clone(),
                        envelope,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Jump times of one channel by thinning a rate-`envelope` Poisson process.
fn thin<R: Rng>(s: &Sampler, rng: &mut R, out: &mut Vec<JumpEvent>) -> Result<()> {
    let mut t = 0.0;
    loop {
        let e: f64 = rng.sample(Exp1);
        t += e / s.envelope;
        if t >= 1.0 {
            return Ok(());
        }
        let rate = s.channel.rate_at(t);
        if rate > s.envelope * (1.0 + 1e-9) {
            return Err(Error::Simulation(format!(
                "jump rate {rate} at t = {t} exceeds its envelope {}",
                s.envelope
            )));
        }
        let u: f64 = rng.random();
        if u * s.envelope < rate {
            out.push(JumpEvent {
                t,
                channel: s.coordinate,
                size: s.channel.law.sample(rng),
            });
        }
    }
}

struct BatchOut {
    moments: Vec<Welford>,
    states: Vec<f64>,
    jumps: Vec<Vec<JumpEvent>>,
    energy: Vec<f64>,
    full: Vec<Vec<f64>>,
    seeds: Vec<u64>,
}

struct Shared<'a> {
    co: Coefficients,
    samplers: Vec<Sampler>,
    mu0: &'a Vector,
    root0: Mat,
    opts: SimulationOptions,
    n_steps: usize,
}

fn run_batch(sh: &Shared<'_>, paths: std::ops::Range<usize>) -> Result<BatchOut> {
    let co = &sh.co;
    let n = co.n;
    let stride = sh.opts.record_stride;
    let n_rec = sh.n_steps / stride + 1;
    let mut out = BatchOut {
        moments: vec![Welford::new(n); sh.n_steps + 1],
        states: Vec::with_capacity(paths.len() * n_rec * n),
        jumps: Vec::with_capacity(paths.len()),
        energy: Vec::with_capacity(paths.len()),
        full: Vec::new(),
        seeds: Vec::with_capacity(paths.len()),
    };
    let mut x = vec![0.0; n];
    let mut scratch = vec![0.0; 2 * n];
    let mut delta = vec![0.0; n];
    let mut u = vec![0.0; co.p];
    for path in paths {
        let seed = path_seed(sh.opts.seed, path as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x0 = sh.mu0 + &sh.root0 * z;
        x.copy_from_slice(x0.as_slice());

        let mut events = Vec::new();
        for s in &sh.samplers {
            thin(s, &mut rng, &mut events)?;
        }
        events.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.channel.cmp(&b.channel)));

        let keep = path < sh.opts.keep_paths;
        let mut full = Vec::new();
        let mut record = |k: usize, x: &[f64], out: &mut BatchOut, full: &mut Vec<f64>| {
            out.moments[k].push(x, &mut delta);
            if k % stride == 0 {
                out.states.extend_from_slice(x);
            }
            if keep {
                full.extend_from_slice(x);
            }
        };
        record(0, &x, &mut out, &mut full);

        let mut ev = 0;
        let mut energy = 0.0;
        let mut e_prev = co.energy(0, &x, &mut u);
        for k in 0..sh.n_steps {
            for i in co.step_start[k]..co.step_start[k + 1] {
                let end = co.tau[i] + co.h[i];
                let mut cur = co.tau[i];
                while ev < events.len() && events[ev].t < end {
                    let tj = events[ev].t.max(cur);
                    co.em(i, tj - cur, &mut x, &mut scratch, &mut rng);
                    co.jump(i, &events[ev], &mut x);
                    cur = tj;
                    ev += 1;
                }
                co.em(i, end - cur, &mut x, &mut scratch, &mut rng);
                let e_next = co.energy(i + 1, &x, &mut u);
                energy += 0.5 * co.h[i] * (e_prev + e_next);
                e_prev = e_next;
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Simulation(format!("path {path} diverged before t = {}", (k + 1) as f64 * sh.opts.dt)));
            }
            record(k + 1, &x, &mut out, &mut full);
        }
        out.jumps.push(events);
        out.energy.push(energy);
        out.seeds.push(seed);
        if keep {
            out.full.push(full);
        }
    }
    Ok(out)
}

fn thread_count(opts: &SimulationOptions) -> Option<usize> {
    opts.threads.or_else(|| {
        std::env::var("COVSTEER_THREADS")
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
    })
}

/// Simulate the closed loop `dx = (A x + B u) dt + C dm`, `u = K x + nu`.
///
/// Jumps are sampled exactly by thinning and applied at their own times; the
/// rest is Euler–Maruyama, with each step of length `dt` split so that
/// `|A + B K| h <= 0.0025`.
pub fn simulate(
    system: &LtvSystem,
    law: &dyn FeedbackLaw,
    problem: &SteeringProblem,
    opts: &SimulationOptions,
) -> Result<PathEnsemble> {
    problem.check_against(system)?;
    if opts.n_paths == 0 {
        return Err(Error::Simulation("need at least one path".into()));
    }
    if !(opts.dt > 0.0 && opts.dt <= MAX_DT * (1.0 + 1e-12)) {
        return Err(Error::Simulation(format!("dt must lie in (0, {MAX_DT}], got {}", opts.dt)));
    }
    let steps = 1.0 / opts.dt;
    let n_steps = steps.round() as usize;
    if (steps - n_steps as f64).abs() > 1e-6 {
        return Err(Error::Simulation(format!("dt = {} does not divide [0, 1]", opts.dt)));
    }
    let dt = 1.0 / n_steps as f64;
    let stride = opts.record_stride.clamp(1, n_steps);
    if n_steps % stride != 0 {
        return Err(Error::Simulation(format!("record stride {stride} does not divide {n_steps} steps")));
    }
    let opts = SimulationOptions {
        record_stride: stride,
        dt,
        ..*opts
    };
    let shared = Shared {
        co: Coefficients::build(system, law, dt, n_steps)?,
        samplers: samplers(system)?,
        mu0: &problem.mu0,
        root0: linalg::sym_sqrt(&problem.sigma0),
        opts,
        n_steps,
    };
    let ranges: Vec<_> = (0..opts.n_paths)
        .step_by(BATCH)
        .map(|s| s..(s + BATCH).min(opts.n_paths))
        .collect();
    let work = || -> Vec<Result<BatchOut>> { ranges.par_iter().map(|r| run_batch(&shared, r.clone())).collect() };
    let batches = match thread_count(&opts) {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Simulation(e.to_string()))?
            .install(work),
        None => work(),
    };

    let n = system.n();
    let mut ens = PathEnsemble {
        n_paths: opts.n_paths,
        dt,
        n_steps,
        n,
        record_stride: stride,
        seeds: Vec::with_capacity(opts.n_paths),
        jump_log: Vec::with_capacity(opts.n_paths),
        states: Vec::with_capacity(opts.n_paths * (n_steps / stride + 1) * n),
        full_paths: Vec::new(),
        control_energy: Vec::with_capacity(opts.n_paths),
        step_moments: vec![Welford::new(n); n_steps + 1],
    };
    for b in batches {
        let b = b?;
        for (acc, w) in ens.step_moments.iter_mut().zip(&b.moments) {
            acc.merge(w);
        }
        ens.states.extend(b.states);
        ens.jump_log.extend(b.jumps);
        ens.control_energy.extend(b.energy);
        ens.full_paths.extend(b.full);
        ens.seeds.extend(b.seeds);
    }
    Ok(ens)
}

/// Matrix trajectory from a dense ODE solution.
#[derive(Debug, Clone)]
pub struct MatrixPath {
    rows: usize,
    cols: usize,
    sol: DenseSolution,
}

impl MatrixPath {
    pub fn eval(&self, t: f64) -> Mat {
        Mat::from_column_slice(self.rows, self.cols, &self.sol.eval(t))
    }

    pub fn terminal(&self) -> Mat {
        self.eval(1.0)
    }
}

/// `Sigma' = F Sigma + Sigma F^T + C D C^T` with `F = A + B K`.
pub fn covariance_ode(system: &LtvSystem, law: &dyn FeedbackLaw, sigma0: &Mat) -> Result<MatrixPath> {
    let n = system.n();
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let s = Mat::from_column_slice(n, n, y);
        let f = system.a().eval(t) + system.b().eval(t) * law.gain(t);
        let fs = &f * &s;
        let d = &fs + fs.transpose() + system.noise_kernel(t);
        dy.copy_from_slice(d.as_slice());
    };
    let sol = integrate(rhs, 0.0, 1.0, sigma0.as_slice(), &OdeOptions::tight())?;
    Ok(MatrixPath { rows: n, cols: n, sol })
}

/// `mu' = (A + B K) mu + B nu + C g` with `g` the drift of the driving noise.
pub fn mean_ode(system: &LtvSystem, law: &dyn FeedbackLaw, mu0: &Vector) -> Result<MatrixPath> {
    let n = system.n();
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let m = Vector::from_column_slice(y);
        let b = system.b().eval(t);
        let d = (system.a().eval(t) + &b * law.gain(t)) * m + b * law.feedforward(t) + system.jump_drift(t);
        dy.copy_from_slice(d.as_slice());
    };
    let sol = integrate(rhs, 0.0, 1.0, mu0.as_slice(), &OdeOptions::tight())?;
    Ok(MatrixPath { rows: n, cols: 1, sol })
}

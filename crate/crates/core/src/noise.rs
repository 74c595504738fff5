//! Martingale noise: Wiener components, nonhomogeneous compound-Poisson
//! channels and precomputed covariance rates.
//!
//! Jump channels are independent of each other and of the Wiener part, so
//! their contribution to `D(t)` is diagonal.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::schedule::MatrixSchedule;

/// Distribution of a single jump size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpLaw {
    Constant(f64),
    Normal { mean: f64, std_dev: f64 },
    /// Exponential with the given rate (mean `1 / rate`).
    Exponential { rate: f64 },
    /// `low` with probability `p_low`, otherwise `high`.
    TwoPoint { low: f64, high: f64, p_low: f64 },
}

impl JumpLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            JumpLaw::Constant(v) => v.is_finite(),
            JumpLaw::Normal { mean, std_dev } => mean.is_finite() && std_dev.is_finite() && std_dev >= 0.0,
            JumpLaw::Exponential { rate } => rate.is_finite() && rate > 0.0,
            JumpLaw::TwoPoint { low, high, p_low } => {
                low.is_finite() && high.is_finite() && (0.0..=1.0).contains(&p_low)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!("jump law {self:?} has invalid parameters")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            JumpLaw::Constant(v) => v,
            JumpLaw::Normal { mean, .. } => mean,
            JumpLaw::Exponential { rate } => 1.0 / rate,
            JumpLaw::TwoPoint { low, high, p_low } => p_low * low + (1.0 - p_low) * high,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            JumpLaw::Constant(v) => v * v,
            JumpLaw::Normal { mean, std_dev } => mean * mean + std_dev * std_dev,
            JumpLaw::Exponential { rate } => 2.0 / (rate * rate),
            JumpLaw::TwoPoint { low, high, p_low } => p_low * low * low + (1.0 - p_low) * high * high,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpLaw::Constant(v) => v,
            JumpLaw::Normal { mean, std_dev } => {
                if std_dev == 0.0 {
                    mean
                } else {
                    Normal::new(mean, std_dev).expect("validated").sample(rng)
                }
            }
            JumpLaw::Exponential { rate } => Exp::new(rate).expect("validated").sample(rng),
            JumpLaw::TwoPoint { low, high, p_low } => {
                if rng.random::<f64>() < p_low {
                    low
                } else {
                    high
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpChannel {
    /// Scalar (1×1) arrival-rate schedule.
    pub rate: MatrixSchedule,
    pub law: JumpLaw,
}

impl JumpChannel {
    pub fn new(rate: MatrixSchedule, law: JumpLaw) -> Result<Self> {
        if rate.shape() != (1, 1) {
            return Err(Error::dim("jump rate", (1, 1), rate.shape()));
        }
        law.validate()?;
        Ok(JumpChannel { rate, law })
    }

    /// A channel that never jumps.
    pub fn silent() -> Self {
        JumpChannel {
            rate: MatrixSchedule::scalar_constant(0.0),
            law: JumpLaw::Constant(0.0),
        }
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        self.rate.eval_scalar(t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseComponent {
    /// `scale · dw` with `w` a standard q-dimensional Wiener process.
    Wiener { scale: Mat },
    /// One compound-Poisson channel per noise coordinate. When `compensated`
    /// is false the raw jump process drives the system and its compensator
    /// appears as a deterministic drift.
    CompoundPoisson { channels: Vec<JumpChannel>, compensated: bool },
    /// A martingale known only through its covariance rate; simulated as a
    /// Gaussian increment with that covariance.
    Precomputed { rate: MatrixSchedule },
}

/// Additive noise model with `q` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    q: usize,
    components: Vec<NoiseComponent>,
}

impl NoiseSpec {
    pub fn new(q: usize, components: Vec<NoiseComponent>) -> Result<Self> {
        for c in &components {
            match c {
                NoiseComponent::Wiener { scale } => {
                    if scale.shape() != (q, q) {
                        return Err(Error::dim("Wiener scale", (q, q), scale.shape()));
                    }
                }
                NoiseComponent::CompoundPoisson { channels, .. } => {
                    if channels.len() != q {
                        return Err(Error::dim("compound-Poisson channels", (q, 1), (channels.len(), 1)));
                    }
                    for ch in channels {
                        ch.law.validate()?;
                    }
                }
                NoiseComponent::Precomputed { rate } => {
                    if rate.shape() != (q, q) {
                        return Err(Error::dim("precomputed covariance rate", (q, q), rate.shape()));
                    }
                }
            }
        }
        Ok(NoiseSpec { q, components })
    }

    /// Standard Wiener noise in `q` channels.
    pub fn unit_wiener(q: usize) -> Self {
        NoiseSpec {
            q,
            components: vec![NoiseComponent::Wiener { scale: Mat::identity(q, q) }],
        }
    }

    pub fn silent(q: usize) -> Self {
        NoiseSpec { q, components: Vec::new() }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn components(&self) -> &[NoiseComponent] {
        &self.components
    }

    fn intensity(&self, t: f64, check: bool) -> Result<Mat> {
        let mut d = Mat::zeros(self.q, self.q);
        for c in &self.components {
            match c {
                NoiseComponent::Wiener { scale } => d += scale * scale.transpose(),
                NoiseComponent::CompoundPoisson { channels, .. } => {
                    for (i, ch) in channels.iter().enumerate() {
                        let lam = ch.rate_at(t);
                        if check && !(lam >= 0.0) {
                            return Err(Error::InvalidModel(format!(
                                "jump rate of channel {i} is {lam} < 0 at t = {t}"
                            )));
                        }
                        d[(i, i)] += lam * ch.law.second_moment();
                    }
                }
                NoiseComponent::Precomputed { rate } => d += rate.eval(t),
            }
        }
        Ok(d)
    }

    /// Covariance rate `D(t) = d E[m m^T] / dt`, summed over components.
    pub fn effective_intensity(&self, t: f64) -> Result<Mat> {
        self.intensity(t, true)
    }

    /// `D(t)` without rate-sign checks, for models already validated.
    pub fn intensity_unchecked(&self, t: f64) -> Mat {
        self.intensity(t, false).expect("unchecked evaluation cannot fail")
    }

    fn drift(&self, t: f64, only_raw: bool) -> Vector {
        let mut g = Vector::zeros(self.q);
        for c in &self.components {
            if let NoiseComponent::CompoundPoisson { channels, compensated } = c {
                if only_raw && *compensated {
                    continue;
                }
                for (i, ch) in channels.iter().enumerate() {
                    g[i] += ch.rate_at(t) * ch.law.mean();
                }
            }
        }
        g
    }

    /// Compensator rate `g(t) = sum_i lambda_i(t) E[chi_i]` over all jump components.
    pub fn compensator_drift(&self, t: f64) -> Vector {
        self.drift(t, false)
    }

    /// Mean drift actually entering the dynamics: the compensator of jump
    /// components whose raw (uncompensated) process drives the system.
    pub fn driving_drift(&self, t: f64) -> Vector {
        self.drift(t, true)
    }

    /// Covariance rate of the continuous (Gaussian) part only.
    pub fn diffusion_intensity(&self, t: f64) -> Mat {
        let mut d = Mat::zeros(self.q, self.q);
        for c in &self.components {
            match c {
                NoiseComponent::Wiener { scale } => d += scale * scale.transpose(),
                NoiseComponent::Precomputed { rate } => d += rate.eval(t),
                NoiseComponent::CompoundPoisson { .. } => {}
            }
        }
        d
    }
}

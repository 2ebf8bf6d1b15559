//! Laws for harvested power and channel gain, and the seeded random streams
//! used to draw realizations.
//!
//! Every (seed, trial, variable) triple owns an independent ChaCha8 stream,
//! so a realization never depends on how many other draws happened before.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Stream ids; the stream number is `(trial << 8) | id`.
pub const STREAM_HARVEST: u64 = 0;
pub const STREAM_GAIN: u64 = 1;
/// Streams reserved for fitting constant-ratio policies.
pub const STREAM_FIT_HARVEST: u64 = 2;
pub const STREAM_FIT_GAIN: u64 = 3;

pub fn stream(seed: u64, trial: u64, var: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((trial << 8) | var);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    pub support: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(support: Vec<f64>, probabilities: Vec<f64>) -> Result<Self> {
        let d = DiscreteDistribution { support, probabilities };
        d.validate()?;
        Ok(d)
    }

    pub fn uniform(support: Vec<f64>) -> Result<Self> {
        let n = support.len();
        Self::new(support, vec![1.0 / n.max(1) as f64; n])
    }

    pub fn point(x: f64) -> Self {
        DiscreteDistribution { support: vec![x], probabilities: vec![1.0] }
    }

    /// `k` equiprobable bins of the unit-mean exponential, each represented
    /// by its conditional mean.
    pub fn exponential_quantized(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::validation("gain_bins", "need at least one bin"));
        }
        let edge = |i: usize| if i == k { f64::INFINITY } else { -(1.0 - i as f64 / k as f64).ln() };
        // Integral of x e^-x from a to b is (a+1)e^-a - (b+1)e^-b.
        let tail = |a: f64| if a.is_infinite() { 0.0 } else { (a + 1.0) * (-a).exp() };
        let support = (0..k).map(|i| k as f64 * (tail(edge(i)) - tail(edge(i + 1)))).collect();
        Self::new(support, vec![1.0 / k as f64; k])
    }

    pub fn validate(&self) -> Result<()> {
        if self.support.is_empty() || self.support.len() != self.probabilities.len() {
            return Err(Error::validation("distribution", "support and probabilities must be nonempty and equally long"));
        }
        if self.support.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("distribution.support", "values must be finite"));
        }
        if self.probabilities.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::validation("distribution.probabilities", "must be nonnegative"));
        }
        let s: f64 = self.probabilities.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::validation("distribution.probabilities", format!("sum to {s}, expected 1")));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().zip(&self.probabilities).map(|(x, p)| x * p).sum()
    }

    /// Index of the support point closest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let mut best = 0;
        for (i, s) in self.support.iter().enumerate() {
            if (s - x).abs() < (self.support[best] - x).abs() {
                best = i;
            }
        }
        best
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (x, p) in self.support.iter().zip(&self.probabilities) {
            acc += p;
            if u < acc {
                return *x;
            }
        }
        *self.support.last().expect("validated nonempty")
    }
}

/// Law of a per-frame quantity over a horizon.
#[derive(Debug, Clone, PartialEq)]
pub enum Law {
    /// The same list in every trial.
    Deterministic(Vec<f64>),
    /// I.i.d. draws from a finite distribution.
    Discrete(DiscreteDistribution),
    /// I.i.d. exponential with the given mean.
    Exponential { mean: f64 },
}

impl Law {
    pub fn validate(&self, horizon: usize, key: &str) -> Result<()> {
        match self {
            Law::Deterministic(v) => {
                if v.len() != horizon {
                    return Err(Error::validation(key, format!("deterministic list has {} values, expected {horizon}", v.len())));
                }
                if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                    return Err(Error::validation(key, "values must be finite and nonnegative"));
                }
                Ok(())
            }
            Law::Discrete(d) => {
                d.validate()?;
                if d.support.iter().any(|x| *x < 0.0) {
                    return Err(Error::validation(key, "support must be nonnegative"));
                }
                Ok(())
            }
            Law::Exponential { mean } => {
                if !(mean.is_finite() && *mean > 0.0) {
                    return Err(Error::validation(key, "exponential mean must be positive"));
                }
                Ok(())
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Law::Deterministic(v) => v.iter().sum::<f64>() / v.len().max(1) as f64,
            Law::Discrete(d) => d.mean(),
            Law::Exponential { mean } => *mean,
        }
    }

    /// Finite i.i.d. law used by dynamic programming; exponentials are
    /// quantized into `bins` equiprobable cells.
    pub fn to_discrete(&self, bins: usize) -> Result<DiscreteDistribution> {
        match self {
            Law::Deterministic(v) => {
                let first = v.first().copied().unwrap_or(0.0);
                if v.iter().any(|x| *x != first) {
                    return Err(Error::validation("law", "dynamic programming needs an i.i.d. law, not a varying list"));
                }
                Ok(DiscreteDistribution::point(first))
            }
            Law::Discrete(d) => Ok(d.clone()),
            Law::Exponential { mean } => {
                let mut d = DiscreteDistribution::exponential_quantized(bins)?;
                d.support.iter_mut().for_each(|x| *x *= mean);
                Ok(d)
            }
        }
    }

    pub fn sample_path<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        match self {
            Law::Deterministic(v) => v.clone(),
            Law::Discrete(d) => (0..n).map(|_| d.sample(rng)).collect(),
            Law::Exponential { mean } => (0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    -mean * (-u).ln_1p()
                })
                .collect(),
        }
    }
}

/// Harvested powers and channel gains for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub harvest: Vec<f64>,
    pub gain: Vec<f64>,
}

/// Draws trial `trial` using the streams `(harvest_var, gain_var)`.
pub fn realize(harvest: &Law, gain: &Law, horizon: usize, seed: u64, trial: u64, vars: (u64, u64)) -> Realization {
    let harvest = harvest.sample_path(horizon, &mut stream(seed, trial, vars.0));
    let gain = gain.sample_path(horizon, &mut stream(seed, trial, vars.1));
    Realization { harvest, gain }
}

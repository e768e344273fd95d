//! Discrete-time leaky integrate-and-fire neurons.
//!
//! The per-step update is
//!
//! ```text
//! candidate = V[t-1] - (V[t-1] - V_rest) / tau_m + drive[t]
//! S[t]      = 1 if candidate >= theta else 0
//! V[t]      = candidate - S[t] * theta          (soft reset)
//! ```
//!
//! The spike is decided on the pre-reset candidate, then theta is subtracted.
//! A hard reset (back to `V_rest`) is available behind [`ResetMode`] for
//! sensitivity checks; the soft subtract-theta form is the default.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::encoding::SpikeTrain;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResetMode {
    /// Subtract theta from the candidate potential on spike.
    Soft,
    /// Return to the resting potential on spike.
    Hard,
}

/// Membrane time constant, resting potential, and firing threshold shared by
/// a population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LifParams {
    pub tau_m: f64,
    pub v_rest: f64,
    pub theta: f64,
    pub reset: ResetMode,
}

impl Default for LifParams {
    fn default() -> Self {
        Self {
            tau_m: 20.0,
            v_rest: 0.0,
            theta: 1.0,
            reset: ResetMode::Soft,
        }
    }
}

impl LifParams {
    pub fn validate(&self) -> Result<()> {
        if !self.tau_m.is_finite() || self.tau_m < 1.0 {
            return Err(Error::Config(format!("tau_m must be >= 1, got {}", self.tau_m)));
        }
        if !self.v_rest.is_finite() || !self.theta.is_finite() {
            return Err(Error::Config("v_rest and theta must be finite".into()));
        }
        if self.theta <= self.v_rest {
            return Err(Error::Config(format!(
                "theta ({}) must exceed v_rest ({})",
                self.theta, self.v_rest
            )));
        }
        Ok(())
    }
}

/// A population of LIF neurons sharing one parameter set.
///
/// The membrane state is a mutable vector; one writer per instance, fresh
/// instances per concurrent worker.
#[derive(Debug, Clone)]
pub struct LifPopulation {
    params: LifParams,
    v: Vec<f64>,
}

impl LifPopulation {
    pub fn new(n: usize, params: LifParams) -> Self {
        Self {
            params,
            v: vec![params.v_rest; n],
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn params(&self) -> &LifParams {
        &self.params
    }

    pub fn potentials(&self) -> &[f64] {
        &self.v
    }

    /// Reset every membrane potential to `v_rest`.
    pub fn reset(&mut self) {
        self.v.fill(self.params.v_rest);
    }

    /// Advance one time step under the given per-neuron drive. `spikes` is
    /// cleared and refilled with the indices of spiking neurons, ascending.
    pub fn step(&mut self, drive: &[f64], spikes: &mut Vec<u32>) -> Result<()> {
        if drive.len() != self.v.len() {
            return Err(Error::Shape(format!(
                "drive length {} does not match population size {}",
                drive.len(),
                self.v.len()
            )));
        }
        spikes.clear();
        let p = self.params;
        for (i, (v, &d)) in self.v.iter_mut().zip(drive).enumerate() {
            if !d.is_finite() {
                return Err(Error::Numeric(format!("non-finite drive {d} at neuron {i}")));
            }
            let candidate = *v - (*v - p.v_rest) / p.tau_m + d;
            if candidate >= p.theta {
                spikes.push(i as u32);
                *v = match p.reset {
                    ResetMode::Soft => candidate - p.theta,
                    ResetMode::Hard => p.v_rest,
                };
            } else {
                *v = candidate;
            }
        }
        Ok(())
    }
}

/// Drive a population with a spike train through an input weight matrix of
/// shape (neurons × input channels), starting from rest. Returns the output
/// raster.
pub fn run_population(
    pop: &mut LifPopulation,
    input: &SpikeTrain,
    weights: &Array2<f64>,
) -> Result<SpikeTrain> {
    let n = pop.len();
    if weights.nrows() != n || weights.ncols() != input.channels() {
        return Err(Error::Shape(format!(
            "weight matrix {}×{} does not match {} neurons × {} channels",
            weights.nrows(),
            weights.ncols(),
            n,
            input.channels()
        )));
    }
    pop.reset();
    let mut out = SpikeTrain::silent(input.steps(), n);
    let mut drive = vec![0.0; n];
    let mut fired = Vec::with_capacity(n);
    for t in 0..input.steps() {
        drive.fill(0.0);
        for &j in input.active_at(t) {
            for i in 0..n {
                drive[i] += weights[[i, j as usize]];
            }
        }
        fired.clear();
        pop.step(&drive, &mut fired)?;
        for &i in &fired {
            out.record(t, i);
        }
    }
    Ok(out)
}

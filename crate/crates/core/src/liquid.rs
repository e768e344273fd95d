//! Fixed-weight recurrent LIF reservoir ("liquid").
//!
//! The reservoir projects an input spike train through sparse random input
//! weights into a sparse randomly-wired recurrent LIF population and reads
//! out per-neuron spike counts. Its weights are drawn once from a seeded
//! RNG and never trained. Excitatory/inhibitory identity is a property of
//! the source neuron: every outgoing recurrent weight of a neuron shares
//! that neuron's sign. Recurrent feedback acts with a one-step delay, so
//! an input spike can influence other neurons no earlier than the next
//! step, and each run starts from rest — no state carries across samples.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoding::SpikeTrain;
use crate::error::{Error, Result};
use crate::lif::{LifParams, LifPopulation};

/// Construction parameters for one reservoir.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LiquidConfig {
    /// Reservoir size.
    pub n_neurons: usize,
    /// Fraction of neurons that are excitatory (the rest inhibit).
    pub exc_fraction: f64,
    /// Connection probability input channel → neuron.
    pub p_in: f64,
    /// Connection probability neuron → neuron (no self-loops).
    pub p_rec: f64,
    /// Expected total input weight per neuron: the per-connection
    /// magnitude is `input_budget / (n_inputs · p_in)`, so a reservoir
    /// sees the same input drive per neuron regardless of how many
    /// channels feed it.
    pub input_budget: f64,
    /// Mean magnitude of one excitatory recurrent weight.
    pub w_scale_rec: f64,
    /// Magnitude multiplier for inhibitory neurons' outgoing recurrent
    /// weights. The default, `exc_fraction / (1 − exc_fraction)`, balances
    /// total excitation against total inhibition: without it the dominant
    /// excitatory population ignites the whole reservoir into firing every
    /// step, and the readout carries no information about the input.
    pub inhib_gain: f64,
    /// Membrane parameters shared by all neurons.
    pub lif: LifParams,
    /// Weight-draw seed.
    pub seed: u64,
}

impl Default for LiquidConfig {
    fn default() -> Self {
        Self {
            n_neurons: 400,
            exc_fraction: 0.8,
            p_in: 0.1,
            p_rec: 0.1,
            input_budget: 0.5,
            w_scale_rec: 0.1,
            inhib_gain: 5.0,
            lif: LifParams::default(),
            seed: 0,
        }
    }
}

impl LiquidConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_neurons == 0 {
            return Err(Error::Config("liquid needs at least one neuron".into()));
        }
        for (name, p) in [
            ("exc_fraction", self.exc_fraction),
            ("p_in", self.p_in),
            ("p_rec", self.p_rec),
        ] {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        for (name, w) in [
            ("input_budget", self.input_budget),
            ("w_scale_rec", self.w_scale_rec),
            ("inhib_gain", self.inhib_gain),
        ] {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be finite and non-negative, got {w}"
                )));
            }
        }
        self.lif.validate()
    }
}

/// Sign class of a reservoir neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeuronSign {
    Excitatory,
    Inhibitory,
}

impl NeuronSign {
    pub fn factor(self) -> f64 {
        match self {
            NeuronSign::Excitatory => 1.0,
            NeuronSign::Inhibitory => -1.0,
        }
    }
}

/// A built reservoir: immutable weights plus the membrane parameters.
///
/// Weights are stored transposed — row `s` holds the outgoing weights of
/// source `s` — so the per-step update walks one contiguous row per active
/// source instead of striding down a column.
#[derive(Debug, Clone)]
pub struct LiquidNetwork {
    /// (n_inputs × n_neurons): row = input channel, column = target neuron.
    w_in_t: Array2<f64>,
    /// (n_neurons × n_neurons): row = source neuron, column = target.
    w_rec_t: Array2<f64>,
    signs: Vec<NeuronSign>,
    params: LifParams,
}

/// Summary counts for diagnostics dumps.
#[derive(Debug, Clone, Serialize)]
pub struct LiquidStats {
    pub n_neurons: usize,
    pub n_inputs: usize,
    pub n_excitatory: usize,
    pub input_connections: usize,
    pub recurrent_connections: usize,
    pub mean_abs_w_in: f64,
    pub mean_abs_w_rec: f64,
}

impl LiquidNetwork {
    /// Assemble a reservoir from explicit weight matrices (`w_in` and
    /// `w_rec` indexed `(target, source)`). Rejects self-loops and
    /// recurrent weights whose sign contradicts the source neuron's class.
    pub fn from_parts(
        w_in: &Array2<f64>,
        w_rec: &Array2<f64>,
        signs: Vec<NeuronSign>,
        params: LifParams,
    ) -> Result<Self> {
        let n = signs.len();
        if w_in.nrows() != n || w_rec.nrows() != n || w_rec.ncols() != n {
            return Err(Error::Shape(format!(
                "weight shapes {:?}/{:?} inconsistent with {n} neurons",
                w_in.dim(),
                w_rec.dim()
            )));
        }
        params.validate()?;
        for ((i, j), &w) in w_rec.indexed_iter() {
            if w == 0.0 {
                continue;
            }
            if i == j {
                return Err(Error::Config(format!("self-loop on neuron {i}")));
            }
            let wrong = match signs[j] {
                NeuronSign::Excitatory => w < 0.0,
                NeuronSign::Inhibitory => w > 0.0,
            };
            if wrong {
                return Err(Error::Config(format!(
                    "weight {j}→{i} contradicts source sign"
                )));
            }
        }
        Ok(Self {
            w_in_t: w_in.t().to_owned().as_standard_layout().to_owned(),
            w_rec_t: w_rec.t().to_owned().as_standard_layout().to_owned(),
            signs,
            params,
        })
    }

    pub fn n_neurons(&self) -> usize {
        self.signs.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.w_in_t.nrows()
    }

    pub fn params(&self) -> &LifParams {
        &self.params
    }

    pub fn sign(&self, neuron: usize) -> NeuronSign {
        self.signs[neuron]
    }

    /// Input weight onto `target` from input channel `source`.
    pub fn w_in(&self, target: usize, source: usize) -> f64 {
        self.w_in_t[[source, target]]
    }

    /// Recurrent weight onto `target` from neuron `source`.
    pub fn w_rec(&self, target: usize, source: usize) -> f64 {
        self.w_rec_t[[source, target]]
    }

    pub fn stats(&self) -> LiquidStats {
        let nz = |m: &Array2<f64>| m.iter().filter(|&&w| w != 0.0).count();
        let mean_abs = |m: &Array2<f64>| {
            let n = nz(m);
            if n == 0 {
                0.0
            } else {
                m.iter().map(|w| w.abs()).sum::<f64>() / n as f64
            }
        };
        LiquidStats {
            n_neurons: self.n_neurons(),
            n_inputs: self.n_inputs(),
            n_excitatory: self
                .signs
                .iter()
                .filter(|s| **s == NeuronSign::Excitatory)
                .count(),
            input_connections: nz(&self.w_in_t),
            recurrent_connections: nz(&self.w_rec_t),
            mean_abs_w_in: mean_abs(&self.w_in_t),
            mean_abs_w_rec: mean_abs(&self.w_rec_t),
        }
    }

    /// SHA-256 over dimensions, weights, and signs; two reservoirs hash
    /// equal exactly when their wiring is bit-identical.
    pub fn weights_hash(&self) -> String {
        let mut h = Sha256::new();
        for d in [self.n_inputs() as u64, self.n_neurons() as u64] {
            h.update(d.to_le_bytes());
        }
        for w in self.w_in_t.iter().chain(self.w_rec_t.iter()) {
            h.update(w.to_le_bytes());
        }
        for s in &self.signs {
            h.update([matches!(s, NeuronSign::Excitatory) as u8]);
        }
        hex::encode(h.finalize())
    }
}

/// Draw a reservoir from its config. The same `(config, n_inputs)` pair
/// always yields the same wiring.
pub fn build_liquid(n_inputs: usize, cfg: &LiquidConfig) -> Result<LiquidNetwork> {
    use rand::Rng;
    use rand::SeedableRng;

    cfg.validate()?;
    if n_inputs == 0 {
        return Err(Error::Config("liquid needs at least one input".into()));
    }
    let n = cfg.n_neurons;
    let n_exc = ((cfg.exc_fraction * n as f64).round() as usize).min(n);
    let signs: Vec<NeuronSign> = (0..n)
        .map(|i| {
            if i < n_exc {
                NeuronSign::Excitatory
            } else {
                NeuronSign::Inhibitory
            }
        })
        .collect();

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    // Magnitudes are uniform in [0.5, 1.5)·scale so the mean connection
    // weight equals the configured scale.
    let magnitude = |scale: f64, rng: &mut rand_chacha::ChaCha8Rng| {
        scale * (0.5 + rng.random::<f64>())
    };

    // Per-connection input magnitude keeping each neuron's expected total
    // input weight at `input_budget` whatever the channel count.
    let in_scale = if cfg.p_in > 0.0 {
        cfg.input_budget / (n_inputs as f64 * cfg.p_in)
    } else {
        0.0
    };
    let mut w_in_t = Array2::zeros((n_inputs, n));
    for s in 0..n_inputs {
        for i in 0..n {
            if rng.random_bool(cfg.p_in) {
                w_in_t[[s, i]] = magnitude(in_scale, &mut rng);
            }
        }
    }
    let mut w_rec_t = Array2::zeros((n, n));
    for j in 0..n {
        let sign = signs[j].factor();
        let scale = match signs[j] {
            NeuronSign::Excitatory => cfg.w_scale_rec,
            NeuronSign::Inhibitory => cfg.w_scale_rec * cfg.inhib_gain,
        };
        for i in 0..n {
            if i != j && rng.random_bool(cfg.p_rec) {
                w_rec_t[[j, i]] = sign * magnitude(scale, &mut rng);
            }
        }
    }

    // Normalize each neuron's realized excitatory and inhibitory recurrent
    // in-weights to their expected totals. Connection-count fluctuations
    // otherwise shift the recurrent loop gain from draw to draw, and a
    // net-excitatory draw runs away into saturation; scaling the realized
    // sums keeps the excitation/inhibition balance a property of the
    // config, not of the wiring luck. Relative magnitudes within a class
    // are preserved, so connection diversity is untouched.
    let n_inh = n - n_exc;
    for i in 0..n {
        let (mut sum_exc, mut sum_inh) = (0.0f64, 0.0f64);
        for j in 0..n {
            let w = w_rec_t[[j, i]];
            if w > 0.0 {
                sum_exc += w;
            } else {
                sum_inh -= w;
            }
        }
        let exc_sources = n_exc - usize::from(i < n_exc);
        let inh_sources = n_inh - usize::from(i >= n_exc);
        let target_exc = cfg.w_scale_rec * cfg.p_rec * exc_sources as f64;
        let target_inh = cfg.w_scale_rec * cfg.inhib_gain * cfg.p_rec * inh_sources as f64;
        let f_exc = if sum_exc > 0.0 { target_exc / sum_exc } else { 0.0 };
        let f_inh = if sum_inh > 0.0 { target_inh / sum_inh } else { 0.0 };
        for j in 0..n {
            let w = w_rec_t[[j, i]];
            if w > 0.0 {
                w_rec_t[[j, i]] = w * f_exc;
            } else if w < 0.0 {
                w_rec_t[[j, i]] = w * f_inh;
            }
        }
    }

    Ok(LiquidNetwork {
        w_in_t,
        w_rec_t,
        signs,
        params: cfg.lif.clone(),
    })
}

/// Run one input window through the reservoir from rest and return the
/// reservoir spike train. The per-neuron count vector (the readout the
/// rest of the pipeline consumes) is `result.channel_counts()`.
pub fn run_liquid(net: &LiquidNetwork, input: &SpikeTrain) -> Result<SpikeTrain> {
    if input.channels() != net.n_inputs() {
        return Err(Error::Shape(format!(
            "input has {} channels, reservoir expects {}",
            input.channels(),
            net.n_inputs()
        )));
    }
    let n = net.n_neurons();
    let steps = input.steps();
    let mut pop = LifPopulation::new(n, net.params().clone());
    let mut out = SpikeTrain::silent(steps, n);
    let mut drive = vec![0.0f64; n];
    let mut prev: Vec<u32> = Vec::new();
    let mut fired: Vec<u32> = Vec::new();

    for t in 0..steps {
        drive.fill(0.0);
        for &ch in input.active_at(t) {
            let row = self_row(&net.w_in_t, ch as usize);
            for (d, &w) in drive.iter_mut().zip(row) {
                *d += w;
            }
        }
        for &j in &prev {
            let row = self_row(&net.w_rec_t, j as usize);
            for (d, &w) in drive.iter_mut().zip(row) {
                *d += w;
            }
        }
        pop.step(&drive, &mut fired)?;
        for &i in &fired {
            out.record(t, i);
        }
        std::mem::swap(&mut prev, &mut fired);
    }
    Ok(out)
}

fn self_row(m: &Array2<f64>, row: usize) -> &[f64] {
    // Rows of a standard-layout Array2 are contiguous.
    m.row(row).to_slice().expect("standard layout")
}

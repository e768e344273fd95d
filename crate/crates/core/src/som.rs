//! Spiking self-organizing map trained by pair-based STDP.
//!
//! This is the only trained stage of the pipeline. Neurons sit on a 2-D
//! grid and share one LIF parameter set. Each training pattern is
//! presented twice: a plain pass picks the winner (most output spikes),
//! then a second pass re-runs the window with the winner's neighborhood
//! excited and everyone else laterally inhibited, applying STDP online to
//! the spikes of that modified run. Classification never uses modifiers:
//! neurons are labeled from their mean response per class on the training
//! split, and a test pattern takes the class whose labeled neurons respond
//! most on average.

use std::io::{Read, Write};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoding::SpikeTrain;
use crate::error::{Error, Result};
use crate::lif::{LifParams, LifPopulation};

/// Trace-based pair STDP constants.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct StdpParams {
    /// Potentiation step per unit of presynaptic trace.
    pub a_plus: f64,
    /// Depression step per unit of postsynaptic trace.
    pub a_minus: f64,
    /// Presynaptic trace time constant (steps).
    pub tau_plus: f64,
    /// Postsynaptic trace time constant (steps).
    pub tau_minus: f64,
    /// Hard lower weight bound.
    pub w_min: f64,
    /// Hard upper weight bound.
    pub w_max: f64,
}

impl Default for StdpParams {
    /// These defaults put the rule in its timing-sensitive regime. With
    /// post firing driven by specific recent input spikes (see the short
    /// membrane and `tau_plus` constants in [`SomConfig`]), causal channels
    /// collect extra potentiation, while the depression integral is sized
    /// slightly above the potentiation integral
    /// (`a_minus / (1 − e^(−1/tau_minus)) > a_plus / (1 − e^(−1/tau_plus))`)
    /// so channels uncorrelated with a neuron's firing drift down instead
    /// of railing at `w_max`. Amplitudes are small against the weight range
    /// so one window cannot saturate a synapse.
    fn default() -> Self {
        Self {
            a_plus: 1e-4,
            a_minus: 3e-5,
            tau_plus: 4.0,
            tau_minus: 20.0,
            w_min: 0.0,
            w_max: 1.0,
        }
    }
}

impl StdpParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a_plus", self.a_plus), ("a_minus", self.a_minus)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        for (name, tau) in [("tau_plus", self.tau_plus), ("tau_minus", self.tau_minus)] {
            if !tau.is_finite() || tau < 1.0 {
                return Err(Error::Config(format!("{name} must be >= 1, got {tau}")));
            }
        }
        if !(self.w_min < self.w_max) {
            return Err(Error::Config(format!(
                "w_min {} must be below w_max {}",
                self.w_min, self.w_max
            )));
        }
        Ok(())
    }
}

/// How the competition pass picks its winner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CompetitionMode {
    /// Run the LIF grid and take the neuron with the most output spikes.
    #[default]
    LifCount,
    /// Skip the dynamics: take the neuron with the largest summed weight
    /// onto the input spike counts.
    WeightedCount,
}

/// Map construction and training parameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SomConfig {
    pub rows: usize,
    pub cols: usize,
    /// Window length (steps) used when encoding map inputs.
    pub steps: usize,
    /// Peak per-step spike probability for map-input encoding.
    pub max_rate: f64,
    /// Drive gain. Each neuron's weighted input sum is divided by that
    /// neuron's total weight mass (synaptic scaling), so `input_scale` is
    /// the drive a neuron receives when all of its weight mass sits on
    /// simultaneously active channels — independent of input width and of
    /// any uniform weight scaling. Without this normalization the
    /// count-based competition degenerates: whichever neuron starts with
    /// the largest summed weights wins every pattern and the map never
    /// differentiates.
    pub input_scale: f64,
    /// Number of input channels each neuron samples; `0`, or any value at
    /// or above the input width, connects every channel. On wide inputs a
    /// fully connected neuron's drive collapses onto the population mean
    /// (relative spread shrinks as 1/√width), so competition has nothing
    /// to differentiate on; sparse fan-in gives each neuron a distinct
    /// receptive field with usable drive contrast. Unsampled synapses are
    /// structurally absent: plasticity never grows them.
    pub fan_in: usize,
    /// Peak drive boost for the winner and its neighborhood.
    pub excite_gain: f64,
    /// Constant drive penalty outside the neighborhood.
    pub inhibit_strength: f64,
    /// Initial neighborhood radius (grid distance).
    pub radius0: f64,
    /// Multiplicative radius decay per epoch.
    pub radius_decay: f64,
    /// Radius floor.
    pub radius_min: f64,
    pub epochs: usize,
    pub competition: CompetitionMode,
    /// Initial weights are drawn uniformly from this interval.
    pub w_init_lo: f64,
    pub w_init_hi: f64,
    pub stdp: StdpParams,
    pub lif: LifParams,
    pub seed: u64,
}

impl Default for SomConfig {
    fn default() -> Self {
        Self {
            rows: 10,
            cols: 10,
            steps: 100,
            max_rate: 0.5,
            input_scale: 3.0,
            fan_in: 48,
            excite_gain: 0.15,
            inhibit_strength: 1.5,
            radius0: 3.0,
            radius_decay: 0.7,
            radius_min: 0.5,
            epochs: 3,
            competition: CompetitionMode::default(),
            w_init_lo: 0.3,
            w_init_hi: 0.7,
            stdp: StdpParams::default(),
            // Short membrane constant, matched to `stdp.tau_plus`: a map
            // neuron's spike must implicate the input spikes of the last
            // few steps, or the trace rule cannot tell causal channels
            // from bystanders. The excitation boost is a nudge, not a
            // clamp-to-saturation — learning happens because a pattern is
            // present while a neuron is allowed to fire.
            lif: LifParams {
                tau_m: 4.0,
                ..LifParams::default()
            },
            seed: 0,
        }
    }
}

impl SomConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Config("map grid must be non-empty".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("map window must have at least one step".into()));
        }
        if !(self.max_rate > 0.0 && self.max_rate <= 1.0) {
            return Err(Error::Config(format!(
                "max_rate must be in (0, 1], got {}",
                self.max_rate
            )));
        }
        if !(self.input_scale.is_finite() && self.input_scale > 0.0) {
            return Err(Error::Config("input_scale must be positive".into()));
        }
        for (name, v) in [
            ("excite_gain", self.excite_gain),
            ("inhibit_strength", self.inhibit_strength),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if !(self.radius0.is_finite() && self.radius0 > 0.0) {
            return Err(Error::Config("radius0 must be positive".into()));
        }
        if !(self.radius_decay > 0.0 && self.radius_decay <= 1.0) {
            return Err(Error::Config(format!(
                "radius_decay must be in (0, 1], got {}",
                self.radius_decay
            )));
        }
        if !(self.radius_min.is_finite() && self.radius_min > 0.0) {
            return Err(Error::Config("radius_min must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("training needs at least one epoch".into()));
        }
        if !(self.w_init_lo <= self.w_init_hi) {
            return Err(Error::Config("w_init_lo must not exceed w_init_hi".into()));
        }
        self.stdp.validate()?;
        if self.w_init_lo < self.stdp.w_min || self.w_init_hi > self.stdp.w_max {
            return Err(Error::Config(
                "initial weight interval must sit inside [w_min, w_max]".into(),
            ));
        }
        self.lif.validate()
    }
}

/// Exponential pre/post traces plus the elementary STDP updates.
///
/// Per step the caller runs: `decay`, then `on_pre` for each input spike,
/// then the membrane update, then `on_post` for each output spike. A
/// pre and post spike in the same step therefore pairs as pre-before-post
/// (the fresh presynaptic trace potentiates). Every elementary update
/// clamps immediately, so weights can never leave `[w_min, w_max]`.
struct StdpState {
    x_pre: Vec<f64>,
    x_post: Vec<f64>,
    decay_pre: f64,
    decay_post: f64,
}

impl StdpState {
    fn new(n_pre: usize, n_post: usize, p: &StdpParams) -> Self {
        Self {
            x_pre: vec![0.0; n_pre],
            x_post: vec![0.0; n_post],
            decay_pre: (-1.0 / p.tau_plus).exp(),
            decay_post: (-1.0 / p.tau_minus).exp(),
        }
    }

    fn decay(&mut self) {
        for x in &mut self.x_pre {
            *x *= self.decay_pre;
        }
        for x in &mut self.x_post {
            *x *= self.decay_post;
        }
    }

    /// Input spike on channel `ch`: depress its outgoing row, bump its
    /// trace. Synapses absent from the fan-in mask stay at zero.
    fn on_pre(
        &mut self,
        ch: usize,
        w_t: &mut Array2<f64>,
        mask_t: Option<&Array2<f64>>,
        p: &StdpParams,
    ) {
        let row = w_t
            .row_mut(ch)
            .into_slice()
            .expect("standard layout");
        match mask_t {
            None => {
                for (w, &x) in row.iter_mut().zip(&self.x_post) {
                    *w = (*w - p.a_minus * x).clamp(p.w_min, p.w_max);
                }
            }
            Some(mask) => {
                let m_row = mask.row(ch);
                let m_row = m_row.to_slice().expect("standard layout");
                for ((w, &x), &m) in row.iter_mut().zip(&self.x_post).zip(m_row) {
                    if m != 0.0 {
                        *w = (*w - p.a_minus * x).clamp(p.w_min, p.w_max);
                    }
                }
            }
        }
        self.x_pre[ch] += 1.0;
    }

    /// Output spike on neuron `j`: potentiate its incoming column, bump its
    /// trace. Synapses absent from the fan-in mask stay at zero.
    fn on_post(
        &mut self,
        j: usize,
        w_t: &mut Array2<f64>,
        mask_t: Option<&Array2<f64>>,
        p: &StdpParams,
    ) {
        match mask_t {
            None => {
                for (w, &x) in w_t.column_mut(j).iter_mut().zip(&self.x_pre) {
                    *w = (*w + p.a_plus * x).clamp(p.w_min, p.w_max);
                }
            }
            Some(mask) => {
                for ((w, &x), m) in w_t
                    .column_mut(j)
                    .iter_mut()
                    .zip(&self.x_pre)
                    .zip(mask.column(j))
                {
                    if *m != 0.0 {
                        *w = (*w + p.a_plus * x).clamp(p.w_min, p.w_max);
                    }
                }
            }
        }
        self.x_post[j] += 1.0;
    }
}

/// Outcome of one training run.
#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub final_radius: f64,
    /// How often each neuron won, summed over all epochs.
    pub winner_counts: Vec<u32>,
}

const SAVE_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SaveFile {
    format_version: u32,
    n_inputs: usize,
    config: SomConfig,
    /// Row-major (input channel × neuron).
    weights: Vec<f64>,
    /// Fan-in mask in the same layout, as 0/1 bytes; absent when fully
    /// connected.
    #[serde(default)]
    mask: Option<Vec<u8>>,
    neuron_labels: Vec<Option<u8>>,
}

/// The map itself: grid geometry, input weights, and (after label
/// assignment) per-neuron class labels.
///
/// Weights are stored transposed — row `ch` holds channel `ch`'s weights
/// onto every neuron — so the hot per-step drive gather walks contiguous
/// rows.
#[derive(Debug, Clone)]
pub struct SomNetwork {
    cfg: SomConfig,
    /// (n_inputs × n_neurons).
    w_t: Array2<f64>,
    /// Fan-in mask, same layout as `w_t`: 1 where the synapse exists,
    /// 0 where it is structurally absent. `None` means fully connected.
    mask_t: Option<Array2<f64>>,
    labels: Vec<Option<u8>>,
}

impl SomNetwork {
    /// Fresh map with uniformly drawn initial weights. When `cfg.fan_in`
    /// is nonzero and below the input width, each neuron samples that many
    /// distinct channels and all other synapses are absent.
    pub fn new(n_inputs: usize, cfg: SomConfig) -> Result<Self> {
        cfg.validate()?;
        if n_inputs == 0 {
            return Err(Error::Config("map needs at least one input".into()));
        }
        let n = cfg.rows * cfg.cols;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let span = cfg.w_init_hi - cfg.w_init_lo;
        let mut w_t =
            Array2::from_shape_fn((n_inputs, n), |_| cfg.w_init_lo + span * rng.random::<f64>());
        let mask_t = if cfg.fan_in > 0 && cfg.fan_in < n_inputs {
            if cfg.stdp.w_min > 0.0 {
                return Err(Error::Config(
                    "sparse fan_in needs w_min <= 0 so absent synapses can sit at zero".into(),
                ));
            }
            let mut mask = Array2::zeros((n_inputs, n));
            for j in 0..n {
                for ch in rand::seq::index::sample(&mut rng, n_inputs, cfg.fan_in) {
                    mask[[ch, j]] = 1.0;
                }
            }
            for (w, &m) in w_t.iter_mut().zip(&mask) {
                *w *= m;
            }
            Some(mask)
        } else {
            None
        };
        Ok(Self {
            cfg,
            w_t,
            mask_t,
            labels: vec![None; n],
        })
    }

    /// Build a fully connected map with explicit weights, indexed
    /// `(neuron, input)`.
    pub fn from_weights(cfg: SomConfig, weights: &Array2<f64>) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.rows * cfg.cols;
        if weights.nrows() != n || weights.ncols() == 0 {
            return Err(Error::Shape(format!(
                "weights {:?} do not match a {}x{} grid",
                weights.dim(),
                cfg.rows,
                cfg.cols
            )));
        }
        if weights
            .iter()
            .any(|w| !w.is_finite() || *w < cfg.stdp.w_min || *w > cfg.stdp.w_max)
        {
            return Err(Error::Config(
                "explicit weights must lie inside [w_min, w_max]".into(),
            ));
        }
        Ok(Self {
            labels: vec![None; n],
            w_t: weights.t().to_owned().as_standard_layout().to_owned(),
            mask_t: None,
            cfg,
        })
    }

    pub fn config(&self) -> &SomConfig {
        &self.cfg
    }

    pub fn n_neurons(&self) -> usize {
        self.cfg.rows * self.cfg.cols
    }

    pub fn n_inputs(&self) -> usize {
        self.w_t.nrows()
    }

    /// Grid coordinates of neuron `j` (row-major layout).
    pub fn grid_pos(&self, j: usize) -> (usize, usize) {
        (j / self.cfg.cols, j % self.cfg.cols)
    }

    /// Weight onto `neuron` from input `channel`.
    pub fn weight(&self, neuron: usize, channel: usize) -> f64 {
        self.w_t[[channel, neuron]]
    }

    /// Whether the synapse onto `neuron` from `channel` exists. Absent
    /// synapses are outside the fan-in sample: their weight is pinned to
    /// zero and plasticity never touches them.
    pub fn synapse_present(&self, neuron: usize, channel: usize) -> bool {
        match &self.mask_t {
            None => true,
            Some(m) => m[[channel, neuron]] != 0.0,
        }
    }

    pub fn neuron_labels(&self) -> &[Option<u8>] {
        &self.labels
    }

    pub fn min_max_weights(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &w in &self.w_t {
            lo = lo.min(w);
            hi = hi.max(w);
        }
        (lo, hi)
    }

    /// SHA-256 over grid shape, weights, and the fan-in mask.
    pub fn weights_hash(&self) -> String {
        let mut h = Sha256::new();
        for d in [self.n_inputs() as u64, self.n_neurons() as u64] {
            h.update(d.to_le_bytes());
        }
        for w in &self.w_t {
            h.update(w.to_le_bytes());
        }
        if let Some(mask) = &self.mask_t {
            for m in mask {
                h.update([(*m != 0.0) as u8]);
            }
        }
        hex::encode(h.finalize())
    }

    fn check_input(&self, input: &SpikeTrain) -> Result<()> {
        if input.channels() != self.n_inputs() {
            return Err(Error::Shape(format!(
                "input has {} channels, map expects {}",
                input.channels(),
                self.n_inputs()
            )));
        }
        Ok(())
    }

    /// Per-neuron drive gains `input_scale / Σ_ch w[ch][j]`, the synaptic
    /// scaling factors for one window. Recomputed at window entry, not per
    /// step: homeostatic scaling is slow against a single presentation.
    /// A neuron whose weights have all decayed away gets gain 0.
    fn drive_gains(&self) -> Vec<f64> {
        let mut mass = vec![0.0f64; self.n_neurons()];
        for row in self.w_t.rows() {
            let row = row.to_slice().expect("standard layout");
            for (m, &w) in mass.iter_mut().zip(row) {
                *m += w;
            }
        }
        mass.iter()
            .map(|&m| if m > 0.0 { self.cfg.input_scale / m } else { 0.0 })
            .collect()
    }

    /// Run one window without plasticity. `modifiers`, when given, is a
    /// per-neuron constant drive offset.
    pub fn forward(&self, input: &SpikeTrain, modifiers: Option<&[f64]>) -> Result<SpikeTrain> {
        self.check_input(input)?;
        let n = self.n_neurons();
        if let Some(m) = modifiers {
            if m.len() != n {
                return Err(Error::Shape(format!(
                    "{} modifiers for {n} neurons",
                    m.len()
                )));
            }
        }
        let gains = self.drive_gains();
        let mut pop = LifPopulation::new(n, self.cfg.lif.clone());
        let mut out = SpikeTrain::silent(input.steps(), n);
        let mut drive = vec![0.0f64; n];
        let mut fired: Vec<u32> = Vec::new();
        for t in 0..input.steps() {
            drive.fill(0.0);
            for &ch in input.active_at(t) {
                let row = self.w_t.row(ch as usize);
                let row = row.to_slice().expect("standard layout");
                for (d, &w) in drive.iter_mut().zip(row) {
                    *d += w;
                }
            }
            for (d, &g) in drive.iter_mut().zip(&gains) {
                *d *= g;
            }
            if let Some(m) = modifiers {
                for (d, &b) in drive.iter_mut().zip(m) {
                    *d += b;
                }
            }
            pop.step(&drive, &mut fired)?;
            for &j in &fired {
                out.record(t, j);
            }
        }
        Ok(out)
    }

    /// Per-neuron output spike counts for one window (no modifiers).
    pub fn forward_counts(&self, input: &SpikeTrain) -> Result<Vec<u32>> {
        Ok(self.forward(input, None)?.channel_counts())
    }

    /// Competition winner for one pattern; ties go to the lowest index.
    pub fn winner(&self, input: &SpikeTrain) -> Result<usize> {
        self.check_input(input)?;
        match self.cfg.competition {
            CompetitionMode::LifCount => {
                let counts = self.forward_counts(input)?;
                Ok(argmax_first(counts.iter().map(|&c| c as f64)))
            }
            CompetitionMode::WeightedCount => {
                let counts = input.channel_counts();
                let gains = self.drive_gains();
                let scores = (0..self.n_neurons()).map(|j| {
                    gains[j]
                        * counts
                            .iter()
                            .enumerate()
                            .map(|(ch, &c)| c as f64 * self.w_t[[ch, j]])
                            .sum::<f64>()
                });
                Ok(argmax_first(scores))
            }
        }
    }

    /// Per-neuron drive offsets for a competition winner: Gaussian
    /// excitation inside `radius` (peaking at `excite_gain` on the winner),
    /// constant `-inhibit_strength` outside.
    pub fn neighborhood_modifiers(&self, winner: usize, radius: f64) -> Vec<f64> {
        let (wr, wc) = self.grid_pos(winner);
        (0..self.n_neurons())
            .map(|j| {
                let (r, c) = self.grid_pos(j);
                let d2 = {
                    let dr = r as f64 - wr as f64;
                    let dc = c as f64 - wc as f64;
                    dr * dr + dc * dc
                };
                if d2.sqrt() <= radius {
                    self.cfg.excite_gain * (-d2 / (2.0 * radius * radius)).exp()
                } else {
                    -self.cfg.inhibit_strength
                }
            })
            .collect()
    }

    /// Plasticity pass: run one window with drive modifiers, applying STDP
    /// online to the spikes of this very run. Weight changes take effect
    /// immediately, so later steps of the window see the updated synapses.
    pub fn stdp_window(&mut self, input: &SpikeTrain, modifiers: &[f64]) -> Result<SpikeTrain> {
        self.check_input(input)?;
        let n = self.n_neurons();
        if modifiers.len() != n {
            return Err(Error::Shape(format!(
                "{} modifiers for {n} neurons",
                modifiers.len()
            )));
        }
        let gains = self.drive_gains();
        let p = self.cfg.stdp.clone();
        let mut stdp = StdpState::new(self.n_inputs(), n, &p);
        let mut pop = LifPopulation::new(n, self.cfg.lif.clone());
        let mut out = SpikeTrain::silent(input.steps(), n);
        let mut drive = vec![0.0f64; n];
        let mut fired: Vec<u32> = Vec::new();
        for t in 0..input.steps() {
            stdp.decay();
            drive.fill(0.0);
            // The arriving spikes act through the synapse at its current
            // strength; this step's depression lands afterwards.
            for &ch in input.active_at(t) {
                let row = self.w_t.row(ch as usize);
                let row = row.to_slice().expect("standard layout");
                for (d, &w) in drive.iter_mut().zip(row) {
                    *d += w;
                }
            }
            for &ch in input.active_at(t) {
                stdp.on_pre(ch as usize, &mut self.w_t, self.mask_t.as_ref(), &p);
            }
            for (d, (&g, &b)) in drive.iter_mut().zip(gains.iter().zip(modifiers)) {
                *d = *d * g + b;
            }
            pop.step(&drive, &mut fired)?;
            for &j in &fired {
                out.record(t, j);
                stdp.on_post(j as usize, &mut self.w_t, self.mask_t.as_ref(), &p);
            }
        }
        Ok(out)
    }

    /// Train on a pattern set: per pattern, pick the winner on the current
    /// weights, then run the plasticity pass with that winner's
    /// neighborhood. Patterns are visited in the order given; the radius
    /// shrinks once per epoch.
    pub fn train(&mut self, patterns: &[SpikeTrain]) -> Result<TrainReport> {
        self.train_with_inspector(patterns, |_, _, _| Ok(()))
    }

    /// [`train`](Self::train) with a callback after every pattern,
    /// receiving `(epoch, pattern index, &map)` — the seam tests use to
    /// watch invariants mid-training.
    pub fn train_with_inspector<F>(
        &mut self,
        patterns: &[SpikeTrain],
        mut inspect: F,
    ) -> Result<TrainReport>
    where
        F: FnMut(usize, usize, &SomNetwork) -> Result<()>,
    {
        if patterns.is_empty() {
            return Err(Error::InsufficientData("no training patterns".into()));
        }
        let mut radius = self.cfg.radius0;
        let mut winner_counts = vec![0u32; self.n_neurons()];
        for epoch in 0..self.cfg.epochs {
            for (i, pattern) in patterns.iter().enumerate() {
                let winner = self.winner(pattern)?;
                winner_counts[winner] += 1;
                let modifiers = self.neighborhood_modifiers(winner, radius);
                self.stdp_window(pattern, &modifiers)?;
                inspect(epoch, i, self)?;
            }
            radius = (radius * self.cfg.radius_decay).max(self.cfg.radius_min);
        }
        Ok(TrainReport {
            epochs_run: self.cfg.epochs,
            final_radius: radius,
            winner_counts,
        })
    }

    /// Label each neuron with the class it responds to most, measured as
    /// the per-class mean output count over the training patterns. Neurons
    /// that never spike stay unlabeled; exact nonzero ties go to the lower
    /// class.
    pub fn assign_labels(&mut self, patterns: &[SpikeTrain], labels: &[u8]) -> Result<()> {
        if patterns.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} patterns vs {} labels",
                patterns.len(),
                labels.len()
            )));
        }
        if patterns.is_empty() {
            return Err(Error::InsufficientData("no labeling patterns".into()));
        }
        let n = self.n_neurons();
        let mut sums = [vec![0.0f64; n], vec![0.0f64; n]];
        let mut class_sizes = [0usize; 2];
        for (pattern, &label) in patterns.iter().zip(labels) {
            if label > 1 {
                return Err(Error::Config(format!("label must be 0 or 1, got {label}")));
            }
            class_sizes[label as usize] += 1;
            let counts = self.forward_counts(pattern)?;
            for (s, &c) in sums[label as usize].iter_mut().zip(&counts) {
                *s += c as f64;
            }
        }
        self.labels = (0..n)
            .map(|j| {
                let mean = |c: usize| {
                    if class_sizes[c] == 0 {
                        0.0
                    } else {
                        sums[c][j] / class_sizes[c] as f64
                    }
                };
                let (m0, m1) = (mean(0), mean(1));
                if m0 == 0.0 && m1 == 0.0 {
                    None
                } else if m1 > m0 {
                    Some(1)
                } else {
                    Some(0)
                }
            })
            .collect();
        Ok(())
    }

    /// Classify one pattern: the class whose labeled neurons spike most on
    /// average. A class with no labeled neurons can never win; an exact
    /// tie goes to class 0.
    pub fn classify(&self, input: &SpikeTrain) -> Result<u8> {
        if self.labels.iter().all(Option::is_none) {
            return Err(Error::State(
                "map has no labeled neurons; assign labels first".into(),
            ));
        }
        let counts = self.forward_counts(input)?;
        let mut sums = [0.0f64; 2];
        let mut sizes = [0usize; 2];
        for (j, label) in self.labels.iter().enumerate() {
            if let Some(c) = label {
                sums[*c as usize] += counts[j] as f64;
                sizes[*c as usize] += 1;
            }
        }
        let score = |c: usize| {
            if sizes[c] == 0 {
                f64::NEG_INFINITY
            } else {
                sums[c] / sizes[c] as f64
            }
        };
        Ok(if score(1) > score(0) { 1 } else { 0 })
    }

    /// Serialize the map (config, weights, labels) as versioned JSON.
    pub fn save_json<W: Write>(&self, out: W) -> Result<()> {
        let file = SaveFile {
            format_version: SAVE_FORMAT_VERSION,
            n_inputs: self.n_inputs(),
            config: self.cfg.clone(),
            weights: self.w_t.iter().copied().collect(),
            mask: self
                .mask_t
                .as_ref()
                .map(|m| m.iter().map(|&v| (v != 0.0) as u8).collect()),
            neuron_labels: self.labels.clone(),
        };
        serde_json::to_writer_pretty(out, &file)
            .map_err(|e| Error::Format(format!("map serialization failed: {e}")))
    }

    /// Load a map saved by [`save_json`](Self::save_json).
    pub fn load_json<R: Read>(input: R) -> Result<Self> {
        let file: SaveFile = serde_json::from_reader(input)
            .map_err(|e| Error::Format(format!("map deserialization failed: {e}")))?;
        if file.format_version != SAVE_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported map format version {} (expected {SAVE_FORMAT_VERSION})",
                file.format_version
            )));
        }
        file.config.validate()?;
        let n = file.config.rows * file.config.cols;
        if file.n_inputs == 0
            || file.weights.len() != file.n_inputs * n
            || file.neuron_labels.len() != n
        {
            return Err(Error::Shape(format!(
                "map file inconsistent: {} weights for {} inputs x {n} neurons",
                file.weights.len(),
                file.n_inputs
            )));
        }
        let (w_min, w_max) = (file.config.stdp.w_min, file.config.stdp.w_max);
        let mask_t = match file.mask {
            None => None,
            Some(mask) => {
                if mask.len() != file.weights.len() {
                    return Err(Error::Shape(format!(
                        "map file mask length {} != weight count {}",
                        mask.len(),
                        file.weights.len()
                    )));
                }
                if mask
                    .iter()
                    .zip(&file.weights)
                    .any(|(&m, &w)| m == 0 && w != 0.0)
                {
                    return Err(Error::Format(
                        "map file holds nonzero weights on absent synapses".into(),
                    ));
                }
                Some(
                    Array2::from_shape_vec(
                        (file.n_inputs, n),
                        mask.iter().map(|&m| f64::from(m != 0)).collect(),
                    )
                    .map_err(|e| Error::Shape(e.to_string()))?,
                )
            }
        };
        // Present synapses must respect the bounds; absent ones are pinned
        // at zero (verified against the mask above).
        let present = |i: usize| match &mask_t {
            None => true,
            Some(m) => m.as_slice().expect("standard layout")[i] != 0.0,
        };
        if file
            .weights
            .iter()
            .enumerate()
            .any(|(i, w)| !w.is_finite() || *w > w_max || (present(i) && *w < w_min))
        {
            return Err(Error::Format(
                "map file holds weights outside [w_min, w_max]".into(),
            ));
        }
        let w_t = Array2::from_shape_vec((file.n_inputs, n), file.weights)
            .map_err(|e| Error::Shape(e.to_string()))?;
        Ok(Self {
            cfg: file.config,
            w_t,
            mask_t,
            labels: file.neuron_labels,
        })
    }
}

fn argmax_first<I: Iterator<Item = f64>>(scores: I) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, s) in scores.enumerate() {
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{encode_rate, EncoderConfig};
    use approx::assert_abs_diff_eq;
    use ndarray::arr2;

    fn one_synapse() -> (StdpState, Array2<f64>, StdpParams) {
        let p = StdpParams {
            a_plus: 0.01,
            a_minus: 0.005,
            tau_plus: 20.0,
            tau_minus: 20.0,
            w_min: 0.0,
            w_max: 1.0,
        };
        let stdp = StdpState::new(1, 1, &p);
        (stdp, arr2(&[[0.5]]), p)
    }

    #[test]
    fn causal_pair_potentiates_by_decayed_trace() {
        // Pre spike two steps before the post spike: the presynaptic
        // trace has decayed twice when potentiation fires.
        let (mut stdp, mut w, p) = one_synapse();
        for t in 0..=7 {
            stdp.decay();
            if t == 5 {
                stdp.on_pre(0, &mut w, None, &p);
            }
            if t == 7 {
                stdp.on_post(0, &mut w, None, &p);
            }
        }
        let expected = 0.01 * (-2.0f64 / 20.0).exp();
        assert_abs_diff_eq!(w[[0, 0]] - 0.5, expected, epsilon = 1e-15);
    }

    #[test]
    fn anti_causal_pair_depresses_by_decayed_trace() {
        let (mut stdp, mut w, p) = one_synapse();
        for t in 0..=4 {
            stdp.decay();
            if t == 2 {
                stdp.on_post(0, &mut w, None, &p);
            }
            if t == 4 {
                stdp.on_pre(0, &mut w, None, &p);
            }
        }
        let expected = -0.005 * (-2.0f64 / 20.0).exp();
        assert_abs_diff_eq!(w[[0, 0]] - 0.5, expected, epsilon = 1e-15);
    }

    #[test]
    fn same_step_pair_counts_as_causal() {
        let (mut stdp, mut w, p) = one_synapse();
        stdp.decay();
        stdp.on_pre(0, &mut w, None, &p);
        stdp.on_post(0, &mut w, None, &p);
        assert_abs_diff_eq!(w[[0, 0]] - 0.5, 0.01, epsilon = 1e-15);
    }

    #[test]
    fn every_elementary_update_clamps() {
        let p = StdpParams {
            a_plus: 0.9,
            a_minus: 0.9,
            ..StdpParams::default()
        };
        let mut stdp = StdpState::new(1, 1, &p);
        let mut w = arr2(&[[0.5]]);
        for _ in 0..5 {
            stdp.decay();
            stdp.on_pre(0, &mut w, None, &p);
            stdp.on_post(0, &mut w, None, &p);
            assert!(w[[0, 0]] <= p.w_max && w[[0, 0]] >= p.w_min);
        }
        assert_eq!(w[[0, 0]], p.w_max);

        // Now drive it down: post trace high, repeated pre spikes.
        for _ in 0..20 {
            stdp.decay();
            stdp.on_post(0, &mut w, None, &p);
            stdp.on_pre(0, &mut w, None, &p);
        }
        assert_eq!(w[[0, 0]], p.w_min);
    }

    fn tiny_cfg() -> SomConfig {
        SomConfig {
            rows: 1,
            cols: 2,
            steps: 60,
            seed: 5,
            ..SomConfig::default()
        }
    }

    fn constant_train(steps: usize, channels: usize, hot: std::ops::Range<usize>) -> SpikeTrain {
        let mut t = SpikeTrain::silent(steps, channels);
        for step in 0..steps {
            for ch in hot.clone() {
                t.record(step, ch as u32);
            }
        }
        t
    }

    #[test]
    fn winner_prefers_aligned_weights_in_both_modes() {
        for competition in [CompetitionMode::LifCount, CompetitionMode::WeightedCount] {
            let cfg = SomConfig {
                competition,
                ..tiny_cfg()
            };
            // Equal total mass, opposite preferences; only channel 0 is
            // active, so neuron 1 (mass concentrated there) must win.
            let som = SomNetwork::from_weights(cfg, &arr2(&[[0.1, 0.9], [0.9, 0.1]])).unwrap();
            let input = constant_train(60, 2, 0..1);
            assert_eq!(som.winner(&input).unwrap(), 1);
        }
    }

    #[test]
    fn winner_tie_goes_to_lowest_index() {
        let som = SomNetwork::from_weights(tiny_cfg(), &arr2(&[[0.5, 0.5], [0.5, 0.5]])).unwrap();
        let input = constant_train(60, 2, 0..2);
        assert_eq!(som.winner(&input).unwrap(), 0);
    }

    #[test]
    fn neighborhood_peaks_at_winner_and_inhibits_outside() {
        let cfg = SomConfig {
            rows: 5,
            cols: 5,
            ..SomConfig::default()
        };
        let som = SomNetwork::new(4, cfg).unwrap();
        let winner = 12; // grid center (2, 2)
        let radius = 2.0;
        let m = som.neighborhood_modifiers(winner, radius);
        assert_abs_diff_eq!(m[12], som.config().excite_gain, epsilon = 1e-12);
        // d=1 neighbor: Gaussian falloff.
        let expect = som.config().excite_gain * (-1.0 / (2.0 * radius * radius)).exp();
        assert_abs_diff_eq!(m[11], expect, epsilon = 1e-12);
        assert!(m[12] > m[11]);
        // Corner (0,0): d = 2.83 > 2 → inhibited.
        assert_abs_diff_eq!(m[0], -som.config().inhibit_strength, epsilon = 1e-12);
    }

    #[test]
    fn neighborhood_is_radially_monotone_inside_radius() {
        let cfg = SomConfig {
            rows: 7,
            cols: 7,
            ..SomConfig::default()
        };
        let som = SomNetwork::new(4, cfg).unwrap();
        let m = som.neighborhood_modifiers(24, 3.0); // center (3, 3)
        // Walk straight right from the winner: monotone decreasing.
        assert!(m[24] > m[25] && m[25] > m[26] && m[26] > m[27]);
    }

    fn encoded(values: &[f64], seed: u64) -> SpikeTrain {
        encode_rate(
            values,
            &EncoderConfig {
                steps: 60,
                max_rate: 0.5,
                seed,
            },
        )
        .unwrap()
    }

    fn block_pattern(hot: std::ops::Range<usize>, seed: u64) -> SpikeTrain {
        let values: Vec<f64> = (0..10)
            .map(|i| if hot.contains(&i) { 0.9 } else { 0.05 })
            .collect();
        encoded(&values, seed)
    }

    #[test]
    fn training_sharpens_selectivity_and_classification() {
        // Two block patterns, two neurons pre-biased toward one block
        // each; training must amplify the bias until each neuron owns its
        // block and the labeled map classifies fresh encodings correctly.
        let cfg = SomConfig {
            radius0: 0.5, // below the 1-step grid distance: no co-excitation
            epochs: 6,
            ..tiny_cfg()
        };
        let mut w = Array2::from_elem((2, 10), 0.45);
        for ch in 0..5 {
            w[[0, ch]] = 0.55;
        }
        for ch in 5..10 {
            w[[1, ch]] = 0.55;
        }
        let mut som = SomNetwork::from_weights(cfg, &w).unwrap();

        let patterns: Vec<SpikeTrain> = (0..8)
            .map(|i| {
                if i % 2 == 0 {
                    block_pattern(0..5, 100 + i)
                } else {
                    block_pattern(5..10, 100 + i)
                }
            })
            .collect();
        let labels: Vec<u8> = (0..8).map(|i| (i % 2) as u8).collect();

        let report = som.train(&patterns).unwrap();
        assert_eq!(report.epochs_run, 6);
        assert_eq!(report.winner_counts.iter().sum::<u32>(), 48);
        // Competition stays balanced: neither neuron may capture the
        // other's block.
        assert!(report.winner_counts.iter().all(|&c| c >= 12));

        // Selectivity: neuron 0's weights on its block beat its weights
        // off-block by a clear margin.
        let on: f64 = (0..5).map(|ch| som.weight(0, ch)).sum();
        let off: f64 = (5..10).map(|ch| som.weight(0, ch)).sum();
        assert!(on > off + 0.5, "on {on}, off {off}");

        som.assign_labels(&patterns, &labels).unwrap();
        assert_eq!(som.neuron_labels()[0], Some(0));
        assert_eq!(som.neuron_labels()[1], Some(1));
        assert_eq!(som.classify(&block_pattern(0..5, 999)).unwrap(), 0);
        assert_eq!(som.classify(&block_pattern(5..10, 998)).unwrap(), 1);
    }

    #[test]
    fn weights_stay_in_bounds_throughout_training() {
        let cfg = SomConfig {
            stdp: StdpParams {
                a_plus: 0.2,
                a_minus: 0.2,
                ..StdpParams::default()
            },
            ..tiny_cfg()
        };
        let mut som = SomNetwork::new(10, cfg).unwrap();
        let patterns: Vec<SpikeTrain> = (0..4).map(|i| block_pattern(0..5, i)).collect();
        som.train_with_inspector(&patterns, |_, _, map| {
            let (lo, hi) = map.min_max_weights();
            let p = &map.config().stdp;
            if lo < p.w_min || hi > p.w_max {
                return Err(Error::Numeric(format!("weights escaped: [{lo}, {hi}]")));
            }
            Ok(())
        })
        .unwrap();
    }

    #[test]
    fn radius_decay_stops_at_floor() {
        let cfg = SomConfig {
            radius0: 2.0,
            radius_decay: 0.5,
            radius_min: 0.4,
            epochs: 4,
            ..tiny_cfg()
        };
        let mut som = SomNetwork::new(10, cfg).unwrap();
        let report = som.train(&[block_pattern(0..2, 1)]).unwrap();
        // 2.0 → 1.0 → 0.5 → 0.4 (floor) → 0.4
        assert_abs_diff_eq!(report.final_radius, 0.4, epsilon = 1e-12);
    }

    #[test]
    fn unlabeled_map_refuses_to_classify() {
        let som = SomNetwork::new(10, tiny_cfg()).unwrap();
        assert!(som.classify(&block_pattern(0..5, 1)).is_err());
    }

    #[test]
    fn save_load_round_trip_preserves_behavior() {
        let mut som = SomNetwork::new(10, tiny_cfg()).unwrap();
        let patterns: Vec<SpikeTrain> = (0..4)
            .map(|i| block_pattern(if i % 2 == 0 { 0..5 } else { 5..10 }, i))
            .collect();
        som.train(&patterns).unwrap();
        som.assign_labels(&patterns, &[0, 1, 0, 1]).unwrap();

        let mut buf = Vec::new();
        som.save_json(&mut buf).unwrap();
        let loaded = SomNetwork::load_json(buf.as_slice()).unwrap();
        assert_eq!(som.weights_hash(), loaded.weights_hash());
        assert_eq!(som.neuron_labels(), loaded.neuron_labels());
        let probe = block_pattern(0..5, 77);
        assert_eq!(
            som.classify(&probe).unwrap(),
            loaded.classify(&probe).unwrap()
        );
    }

    #[test]
    fn load_rejects_tampered_files() {
        let som = SomNetwork::new(3, tiny_cfg()).unwrap();
        let mut buf = Vec::new();
        som.save_json(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();

        let wrong_version = text.replace("\"format_version\": 1", "\"format_version\": 9");
        assert!(SomNetwork::load_json(wrong_version.as_bytes()).is_err());

        let wrong_inputs = text.replace("\"n_inputs\": 3", "\"n_inputs\": 4");
        assert!(SomNetwork::load_json(wrong_inputs.as_bytes()).is_err());
    }

    #[test]
    fn construction_is_seed_deterministic() {
        let a = SomNetwork::new(10, tiny_cfg()).unwrap();
        let b = SomNetwork::new(10, tiny_cfg()).unwrap();
        assert_eq!(a.weights_hash(), b.weights_hash());
        let c = SomNetwork::new(
            10,
            SomConfig {
                seed: 6,
                ..tiny_cfg()
            },
        )
        .unwrap();
        assert_ne!(a.weights_hash(), c.weights_hash());
    }

    /// Wide config that triggers the sparse fan-in path (48 < 100).
    fn wide_cfg() -> SomConfig {
        SomConfig {
            rows: 2,
            cols: 3,
            steps: 60,
            seed: 9,
            ..SomConfig::default()
        }
    }

    fn wide_pattern(hot: std::ops::Range<usize>, seed: u64) -> SpikeTrain {
        let values: Vec<f64> = (0..100)
            .map(|i| if hot.contains(&i) { 0.9 } else { 0.05 })
            .collect();
        encoded(&values, seed)
    }

    #[test]
    fn sparse_fan_in_samples_distinct_channels_per_neuron() {
        let som = SomNetwork::new(100, wide_cfg()).unwrap();
        let fan_in = som.config().fan_in;
        let mut fields = Vec::new();
        for j in 0..som.n_neurons() {
            let field: Vec<usize> = (0..100).filter(|&ch| som.synapse_present(j, ch)).collect();
            assert_eq!(field.len(), fan_in);
            for ch in 0..100 {
                if !som.synapse_present(j, ch) {
                    assert_eq!(som.weight(j, ch), 0.0);
                } else {
                    assert!(som.weight(j, ch) > 0.0);
                }
            }
            fields.push(field);
        }
        // Receptive fields must differ between neurons, or sparsity buys
        // no diversity.
        assert!(fields.windows(2).any(|w| w[0] != w[1]));
    }

    #[test]
    fn sparse_map_requires_nonpositive_weight_floor() {
        let cfg = SomConfig {
            stdp: StdpParams {
                w_min: 0.1,
                ..StdpParams::default()
            },
            ..wide_cfg()
        };
        assert!(SomNetwork::new(100, cfg).is_err());
    }

    #[test]
    fn fan_in_at_input_width_is_fully_connected() {
        for fan_in in [0, 100, 150] {
            let som = SomNetwork::new(
                100,
                SomConfig {
                    fan_in,
                    ..wide_cfg()
                },
            )
            .unwrap();
            assert!((0..som.n_neurons()).all(|j| (0..100).all(|ch| som.synapse_present(j, ch))));
        }
        // With no mask in play, the requested fan-in width cannot change
        // the draw.
        let a = SomNetwork::new(
            100,
            SomConfig {
                fan_in: 0,
                ..wide_cfg()
            },
        )
        .unwrap();
        let b = SomNetwork::new(
            100,
            SomConfig {
                fan_in: 100,
                ..wide_cfg()
            },
        )
        .unwrap();
        assert_eq!(a.weights_hash(), b.weights_hash());
    }

    #[test]
    fn absent_synapses_stay_at_zero_through_training() {
        let mut som = SomNetwork::new(100, wide_cfg()).unwrap();
        let absent: Vec<(usize, usize)> = (0..som.n_neurons())
            .flat_map(|j| (0..100).map(move |ch| (j, ch)))
            .filter(|&(j, ch)| !som.synapse_present(j, ch))
            .collect();
        assert!(!absent.is_empty());

        let patterns: Vec<SpikeTrain> = (0..6)
            .map(|i| {
                if i % 2 == 0 {
                    wide_pattern(0..50, 200 + i)
                } else {
                    wide_pattern(50..100, 200 + i)
                }
            })
            .collect();
        som.train(&patterns).unwrap();

        for &(j, ch) in &absent {
            assert_eq!(som.weight(j, ch), 0.0, "synapse ({j}, {ch}) regrew");
        }
        let p = &som.config().stdp;
        let (lo, hi) = som.min_max_weights();
        assert!(lo >= p.w_min && hi <= p.w_max);
    }

    #[test]
    fn sparse_save_load_round_trip_preserves_mask_and_behavior() {
        let mut som = SomNetwork::new(100, wide_cfg()).unwrap();
        let patterns: Vec<SpikeTrain> = (0..6)
            .map(|i| wide_pattern(if i % 2 == 0 { 0..50 } else { 50..100 }, i))
            .collect();
        som.train(&patterns).unwrap();
        som.assign_labels(&patterns, &[0, 1, 0, 1, 0, 1]).unwrap();

        let mut buf = Vec::new();
        som.save_json(&mut buf).unwrap();
        let loaded = SomNetwork::load_json(buf.as_slice()).unwrap();
        assert_eq!(som.weights_hash(), loaded.weights_hash());
        for j in 0..som.n_neurons() {
            for ch in 0..100 {
                assert_eq!(som.synapse_present(j, ch), loaded.synapse_present(j, ch));
            }
        }
        let probe = wide_pattern(0..50, 777);
        assert_eq!(
            som.classify(&probe).unwrap(),
            loaded.classify(&probe).unwrap()
        );
    }

    #[test]
    fn load_rejects_weight_on_absent_synapse() {
        let som = SomNetwork::new(100, wide_cfg()).unwrap();
        let mut buf = Vec::new();
        som.save_json(&mut buf).unwrap();

        let mut doc: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        let mask: Vec<u8> = doc["mask"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap() as u8)
            .collect();
        let hole = mask.iter().position(|&m| m == 0).unwrap();
        doc["weights"][hole] = serde_json::json!(0.5);
        let tampered = serde_json::to_vec(&doc).unwrap();
        assert!(SomNetwork::load_json(tampered.as_slice()).is_err());
    }

    #[test]
    fn config_validation_rejects_nonsense() {
        for cfg in [
            SomConfig {
                rows: 0,
                ..SomConfig::default()
            },
            SomConfig {
                epochs: 0,
                ..SomConfig::default()
            },
            SomConfig {
                max_rate: 0.0,
                ..SomConfig::default()
            },
            SomConfig {
                w_init_hi: 2.0,
                ..SomConfig::default()
            },
            SomConfig {
                radius_decay: 1.5,
                ..SomConfig::default()
            },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }
}

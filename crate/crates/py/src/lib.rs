//! Python bindings for the uwb-snn pipeline: spike trains and the rate
//! encoder, LIF populations, fixed-weight reservoirs, the plastic
//! self-organizing map, classification metrics, and the strategy
//! evaluation harness.
//!
//! Build with `cargo build --release -p uwb-snn-python`; the module is
//! the produced `libuwb_snn_py.so` (import name `uwb_snn_py`).

use std::fs::File;
use std::io::{BufReader, BufWriter};

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use uwb_snn::config::PipelineConfig;
use uwb_snn::encoding::{encode_rate, EncoderConfig};
use uwb_snn::lif::{LifParams, LifPopulation, ResetMode};
use uwb_snn::liquid::{build_liquid, run_liquid, LiquidConfig, LiquidNetwork};
use uwb_snn::pipeline::{run_all, strategy_by_id, strategy_table};
use uwb_snn::som::{SomConfig, SomNetwork};
use uwb_snn::synthetic::generate_synthetic;

fn err(e: uwb_snn::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_reset(reset: &str) -> PyResult<ResetMode> {
    match reset {
        "soft" => Ok(ResetMode::Soft),
        "hard" => Ok(ResetMode::Hard),
        other => Err(PyValueError::new_err(format!(
            "reset must be 'soft' or 'hard', got '{other}'"
        ))),
    }
}

/// A binary spike raster: which channels fired at each time step.
#[pyclass(from_py_object)]
#[derive(Clone)]
struct SpikeTrain {
    inner: uwb_snn::encoding::SpikeTrain,
}

#[pymethods]
impl SpikeTrain {
    /// A silent raster of the given shape.
    #[new]
    fn new(steps: usize, channels: usize) -> Self {
        Self {
            inner: uwb_snn::encoding::SpikeTrain::silent(steps, channels),
        }
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps()
    }

    #[getter]
    fn channels(&self) -> usize {
        self.inner.channels()
    }

    /// Mark channel `channel` as firing at step `t`.
    fn record(&mut self, t: usize, channel: u32) {
        self.inner.record(t, channel);
    }

    /// Channels that fired at step `t`, ascending.
    fn active_at(&self, t: usize) -> Vec<u32> {
        self.inner.active_at(t).to_vec()
    }

    /// Total spike count per channel.
    fn channel_counts(&self) -> Vec<u32> {
        self.inner.channel_counts()
    }

    fn total_spikes(&self) -> u64 {
        self.inner.total_spikes()
    }

    /// Stack another raster's channels side by side with this one.
    fn concat(&self, other: &SpikeTrain) -> PyResult<SpikeTrain> {
        Ok(Self {
            inner: self.inner.concat(&other.inner).map_err(err)?,
        })
    }

    /// One `t channel` line per spike.
    fn to_events(&self) -> String {
        self.inner.to_event_lines()
    }

    #[staticmethod]
    fn from_events(text: &str, steps: usize, channels: usize) -> PyResult<SpikeTrain> {
        Ok(Self {
            inner: uwb_snn::encoding::SpikeTrain::from_event_lines(text, steps, channels)
                .map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "SpikeTrain(steps={}, channels={}, spikes={})",
            self.inner.steps(),
            self.inner.channels(),
            self.inner.total_spikes()
        )
    }
}

/// Poisson rate coding: each value in [0, 1] fires independently per step
/// with probability `value * max_rate`.
#[pyfunction]
#[pyo3(signature = (values, steps=250, max_rate=0.5, seed=0))]
fn encode(values: Vec<f64>, steps: usize, max_rate: f64, seed: u64) -> PyResult<SpikeTrain> {
    let cfg = EncoderConfig {
        steps,
        max_rate,
        seed,
    };
    Ok(SpikeTrain {
        inner: encode_rate(&values, &cfg).map_err(err)?,
    })
}

/// A population of leaky integrate-and-fire neurons stepped manually.
#[pyclass]
struct LifNeurons {
    pop: LifPopulation,
}

#[pymethods]
impl LifNeurons {
    #[new]
    #[pyo3(signature = (n, tau_m=20.0, v_rest=0.0, theta=1.0, reset="soft"))]
    fn new(n: usize, tau_m: f64, v_rest: f64, theta: f64, reset: &str) -> PyResult<Self> {
        let params = LifParams {
            tau_m,
            v_rest,
            theta,
            reset: parse_reset(reset)?,
        };
        params.validate().map_err(err)?;
        Ok(Self {
            pop: LifPopulation::new(n, params),
        })
    }

    /// Advance one step under per-neuron drive; returns spiking indices.
    fn step(&mut self, drive: Vec<f64>) -> PyResult<Vec<u32>> {
        let mut spikes = Vec::new();
        self.pop.step(&drive, &mut spikes).map_err(err)?;
        Ok(spikes)
    }

    fn potentials(&self) -> Vec<f64> {
        self.pop.potentials().to_vec()
    }

    /// Return every membrane potential to rest.
    fn reset(&mut self) {
        self.pop.reset();
    }

    fn __len__(&self) -> usize {
        self.pop.len()
    }
}

/// A fixed-weight recurrent LIF reservoir. Weights are drawn once from
/// the seed and never change: the reservoir is a temporal feature
/// expansion, not a trained layer.
#[pyclass]
struct Liquid {
    net: LiquidNetwork,
}

#[pymethods]
impl Liquid {
    #[new]
    #[pyo3(signature = (n_inputs, n_neurons=400, exc_fraction=0.8, p_in=0.1, p_rec=0.1,
                        input_budget=0.5, w_scale_rec=0.1, inhib_gain=5.0, tau_m=20.0, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        n_inputs: usize,
        n_neurons: usize,
        exc_fraction: f64,
        p_in: f64,
        p_rec: f64,
        input_budget: f64,
        w_scale_rec: f64,
        inhib_gain: f64,
        tau_m: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let cfg = LiquidConfig {
            n_neurons,
            exc_fraction,
            p_in,
            p_rec,
            input_budget,
            w_scale_rec,
            inhib_gain,
            lif: LifParams {
                tau_m,
                ..LifParams::default()
            },
            seed,
        };
        Ok(Self {
            net: build_liquid(n_inputs, &cfg).map_err(err)?,
        })
    }

    #[getter]
    fn n_neurons(&self) -> usize {
        self.net.n_neurons()
    }

    #[getter]
    fn n_inputs(&self) -> usize {
        self.net.n_inputs()
    }

    /// Run an input raster through the reservoir from rest.
    fn run(&self, input: &SpikeTrain) -> PyResult<SpikeTrain> {
        Ok(SpikeTrain {
            inner: run_liquid(&self.net, &input.inner).map_err(err)?,
        })
    }

    /// Per-neuron spike counts for an input raster — the readout vector
    /// the rest of the pipeline consumes.
    fn counts(&self, input: &SpikeTrain) -> PyResult<Vec<u32>> {
        Ok(run_liquid(&self.net, &input.inner).map_err(err)?.channel_counts())
    }

    /// Digest of the wiring; equal exactly when the wiring is identical.
    fn weights_hash(&self) -> String {
        self.net.weights_hash()
    }

    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = self.net.stats();
        let d = PyDict::new(py);
        d.set_item("n_neurons", s.n_neurons)?;
        d.set_item("n_inputs", s.n_inputs)?;
        d.set_item("n_excitatory", s.n_excitatory)?;
        d.set_item("input_connections", s.input_connections)?;
        d.set_item("recurrent_connections", s.recurrent_connections)?;
        d.set_item("mean_abs_w_in", s.mean_abs_w_in)?;
        d.set_item("mean_abs_w_rec", s.mean_abs_w_rec)?;
        Ok(d)
    }
}

/// A spiking self-organizing map trained by spike-timing-dependent
/// plasticity, with winner-take-all competition and a shrinking
/// neighborhood. Training never sees labels; `assign_labels` names the
/// neurons afterwards so `classify` can vote.
#[pyclass]
struct SpikingSom {
    som: SomNetwork,
}

#[pymethods]
impl SpikingSom {
    #[new]
    #[pyo3(signature = (n_inputs, rows=10, cols=10, steps=100, max_rate=0.5, input_scale=3.0,
                        fan_in=48, epochs=3, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        n_inputs: usize,
        rows: usize,
        cols: usize,
        steps: usize,
        max_rate: f64,
        input_scale: f64,
        fan_in: usize,
        epochs: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let cfg = SomConfig {
            rows,
            cols,
            steps,
            max_rate,
            input_scale,
            fan_in,
            epochs,
            seed,
            ..SomConfig::default()
        };
        Ok(Self {
            som: SomNetwork::new(n_inputs, cfg).map_err(err)?,
        })
    }

    #[getter]
    fn n_neurons(&self) -> usize {
        self.som.n_neurons()
    }

    #[getter]
    fn n_inputs(&self) -> usize {
        self.som.n_inputs()
    }

    /// Unsupervised training pass over the patterns; returns a report
    /// dict with `epochs_run`, `final_radius`, and `winner_counts`.
    fn train<'py>(
        &mut self,
        py: Python<'py>,
        patterns: Vec<SpikeTrain>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let inner: Vec<_> = patterns.into_iter().map(|p| p.inner).collect();
        let report = self.som.train(&inner).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("epochs_run", report.epochs_run)?;
        d.set_item("final_radius", report.final_radius)?;
        d.set_item("winner_counts", report.winner_counts)?;
        Ok(d)
    }

    /// Name each neuron after the class it responds to most, using the
    /// labels only for naming — never for weight updates.
    fn assign_labels(&mut self, patterns: Vec<SpikeTrain>, labels: Vec<u8>) -> PyResult<()> {
        let inner: Vec<_> = patterns.into_iter().map(|p| p.inner).collect();
        self.som.assign_labels(&inner, &labels).map_err(err)
    }

    fn classify(&self, input: &SpikeTrain) -> PyResult<u8> {
        self.som.classify(&input.inner).map_err(err)
    }

    fn winner(&self, input: &SpikeTrain) -> PyResult<usize> {
        self.som.winner(&input.inner).map_err(err)
    }

    /// Per-neuron output spike counts for one input raster.
    fn forward_counts(&self, input: &SpikeTrain) -> PyResult<Vec<u32>> {
        self.som.forward_counts(&input.inner).map_err(err)
    }

    /// Per-neuron class names; None for neurons that stayed silent
    /// during label assignment.
    fn neuron_labels(&self) -> Vec<Option<u8>> {
        self.som.neuron_labels().to_vec()
    }

    fn weights_hash(&self) -> String {
        self.som.weights_hash()
    }

    /// Whether the synapse from `channel` onto `neuron` exists (sparse
    /// fan-in leaves the rest structurally absent).
    fn synapse_present(&self, neuron: usize, channel: usize) -> bool {
        self.som.synapse_present(neuron, channel)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        let file = File::create(path).map_err(|e| PyValueError::new_err(e.to_string()))?;
        self.som.save_json(BufWriter::new(file)).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let file = File::open(path).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self {
            som: SomNetwork::load_json(BufReader::new(file)).map_err(err)?,
        })
    }
}

/// Score binary predictions (1 = NLOS = positive class). Returns the
/// confusion counts and derived rates as a dict.
#[pyfunction]
fn compute_metrics<'py>(
    py: Python<'py>,
    truth: Vec<u8>,
    predicted: Vec<u8>,
) -> PyResult<Bound<'py, PyDict>> {
    let m = uwb_snn::metrics::compute_metrics(&truth, &predicted).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("tp", m.tp)?;
    d.set_item("fp", m.fp)?;
    d.set_item("fn", m.fn_)?;
    d.set_item("tn", m.tn)?;
    d.set_item("accuracy", m.accuracy)?;
    d.set_item("precision", m.precision)?;
    d.set_item("recall", m.recall)?;
    d.set_item("f1", m.f1)?;
    d.set_item("precision_undefined", m.precision_undefined)?;
    d.set_item("recall_undefined", m.recall_undefined)?;
    d.set_item("f1_undefined", m.f1_undefined)?;
    Ok(d)
}

/// The ten ablation strategies as a list of dicts.
#[pyfunction]
fn strategy_matrix(py: Python<'_>) -> PyResult<Vec<Bound<'_, PyDict>>> {
    strategy_table()
        .iter()
        .map(|s| {
            let d = PyDict::new(py);
            d.set_item("id", s.id)?;
            d.set_item("name", s.name())?;
            d.set_item("features", s.features.label())?;
            d.set_item("rf_liquid", s.rf_liquid)?;
            d.set_item("cir_liquid", s.cir_liquid)?;
            Ok(d)
        })
        .collect()
}

/// Evaluate strategies on the generated separable dataset and return the
/// run manifest as a JSON string. `config_path` loads a TOML pipeline
/// configuration; otherwise built-in defaults apply.
#[pyfunction]
#[pyo3(signature = (n=400, strategy_ids=vec![1], seeds=vec![1], config_path=None))]
fn evaluate_synthetic(
    py: Python<'_>,
    n: usize,
    strategy_ids: Vec<u8>,
    seeds: Vec<u64>,
    config_path: Option<&str>,
) -> PyResult<String> {
    let mut cfg = match config_path {
        Some(p) => PipelineConfig::load(std::path::Path::new(p)).map_err(err)?,
        None => PipelineConfig::default(),
    };
    cfg.eval.seeds = seeds;
    cfg.validate().map_err(err)?;
    let strategies: Vec<_> = strategy_ids
        .iter()
        .map(|&id| strategy_by_id(id).map_err(err))
        .collect::<PyResult<_>>()?;
    // The evaluation is long-running pure Rust; let other Python threads
    // make progress meanwhile.
    let manifest = py
        .detach(|| -> uwb_snn::Result<_> {
            let data = generate_synthetic(n, cfg.dataset.split_seed)?;
            let output = run_all(&cfg, &data.samples, &data.files, &strategies)?;
            Ok(output.manifest)
        })
        .map_err(err)?;
    serde_json::to_string_pretty(&manifest).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn uwb_snn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<SpikeTrain>()?;
    m.add_class::<LifNeurons>()?;
    m.add_class::<Liquid>()?;
    m.add_class::<SpikingSom>()?;
    m.add_function(wrap_pyfunction!(encode, m)?)?;
    m.add_function(wrap_pyfunction!(compute_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(strategy_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_synthetic, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

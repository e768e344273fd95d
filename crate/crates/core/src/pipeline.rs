//! End-to-end evaluation pipeline and the ten-strategy ablation harness.
//!
//! One strategy = a feature set (RF registers, a CIR window, or both)
//! plus per-branch reservoir switches. Per branch the pipeline extracts
//! raw vectors, normalizes them with bounds fitted on the training split
//! only, rate-encodes them, and reads out per-channel spike counts —
//! through the branch reservoir when it is enabled, straight from the
//! encoded train otherwise. The concatenated branch counts are normalized
//! again, re-encoded, and fed to the spiking map, which is the only
//! trained component. Test labels are touched exclusively by the final
//! scoring step.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::dataset::{subsample_stratified, split_dataset, DatasetSplit, Sample, SourceFile};
use crate::encoding::{encode_rate, EncoderConfig, SpikeTrain};
use crate::error::{Error, Result};
use crate::features::{
    extract_cir_segment, extract_rf, pad_uniform, shape_profile, NormalizationStats, RfSpec,
};
use crate::liquid::{build_liquid, run_liquid, LiquidStats};
use crate::metrics::{compute_metrics, Metrics};
use crate::seeds::derive_seed;
use crate::som::SomNetwork;

/// Feature families a strategy can consume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    Rf,
    Cir50,
    Cir120,
    RfCir50,
    RfCir120,
}

impl FeatureSet {
    pub fn has_rf(self) -> bool {
        matches!(self, FeatureSet::Rf | FeatureSet::RfCir50 | FeatureSet::RfCir120)
    }

    /// CIR window length, when the set includes a CIR branch.
    pub fn cir_len(self) -> Option<usize> {
        match self {
            FeatureSet::Rf => None,
            FeatureSet::Cir50 | FeatureSet::RfCir50 => Some(50),
            FeatureSet::Cir120 | FeatureSet::RfCir120 => Some(120),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FeatureSet::Rf => "RF",
            FeatureSet::Cir50 => "CIR50",
            FeatureSet::Cir120 => "CIR120",
            FeatureSet::RfCir50 => "RF+CIR50",
            FeatureSet::RfCir120 => "RF+CIR120",
        }
    }
}

/// One ablation row: which features, and which branches run through a
/// reservoir.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub id: u8,
    pub features: FeatureSet,
    pub rf_liquid: bool,
    pub cir_liquid: bool,
}

impl StrategyConfig {
    pub fn name(&self) -> String {
        format!("S{}", self.id)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rf_liquid && !self.features.has_rf() {
            return Err(Error::Config(format!(
                "strategy {}: RF reservoir enabled without RF features",
                self.id
            )));
        }
        if self.cir_liquid && self.features.cir_len().is_none() {
            return Err(Error::Config(format!(
                "strategy {}: CIR reservoir enabled without CIR features",
                self.id
            )));
        }
        Ok(())
    }
}

/// The fixed ten-strategy ablation matrix.
pub fn strategy_table() -> [StrategyConfig; 10] {
    let s = |id, features, rf_liquid, cir_liquid| StrategyConfig {
        id,
        features,
        rf_liquid,
        cir_liquid,
    };
    [
        s(1, FeatureSet::RfCir50, true, true),
        s(2, FeatureSet::RfCir120, true, true),
        s(3, FeatureSet::Rf, true, false),
        s(4, FeatureSet::Rf, false, false),
        s(5, FeatureSet::Cir50, false, true),
        s(6, FeatureSet::Cir50, false, false),
        s(7, FeatureSet::Cir120, false, true),
        s(8, FeatureSet::Cir120, false, false),
        s(9, FeatureSet::RfCir50, false, false),
        s(10, FeatureSet::RfCir120, false, false),
    ]
}

/// Look up one strategy by its 1-based id.
pub fn strategy_by_id(id: u8) -> Result<StrategyConfig> {
    strategy_table()
        .into_iter()
        .find(|s| s.id == id)
        .ok_or_else(|| Error::Config(format!("no strategy S{id}; valid ids are 1..=10")))
}

// Domain-separation tags for derived seeds.
const TAG_ENCODE: u64 = 0x45_4e_43; // branch encoding streams
const TAG_LIQUID: u64 = 0x4c_49_51; // reservoir wiring
const TAG_MAP: u64 = 0x4d_41_50; // map construction
const TAG_MAP_ENCODE: u64 = 0x4d_45; // map input encoding streams

const BRANCH_RF: u64 = 0;
const BRANCH_CIR: u64 = 1;

/// Per-branch diagnostics kept for dumps and the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct BranchDiagnostics {
    pub weights_hash: String,
    pub stats: LiquidStats,
    /// Mean spikes per neuron per step over the whole dataset.
    pub firing_rate: f64,
}

/// Outcome of one strategy under one run seed.
#[derive(Debug, Clone, Serialize)]
pub struct StrategyRun {
    pub strategy_id: u8,
    pub seed: u64,
    pub metrics: Metrics,
    pub som_weights_hash: String,
    pub rf_liquid: Option<BranchDiagnostics>,
    pub cir_liquid: Option<BranchDiagnostics>,
    /// (sample id, true label, predicted label) over the test split.
    #[serde(skip)]
    pub predictions: Vec<(usize, u8, u8)>,
}

struct BranchCounts {
    train: Vec<Vec<f64>>,
    test: Vec<Vec<f64>>,
    diagnostics: Option<BranchDiagnostics>,
}

fn branch_raw(
    samples: &[Sample],
    branch: u64,
    rf_spec: &RfSpec,
    cir_len: usize,
    pad_spacing: usize,
) -> Result<Vec<Vec<f64>>> {
    samples
        .iter()
        .map(|s| {
            if branch == BRANCH_RF {
                Ok(extract_rf(s, rf_spec)?.to_vec())
            } else {
                let seg = extract_cir_segment(s, cir_len)?;
                Ok(pad_uniform(&seg, pad_spacing)?.values)
            }
        })
        .collect()
}

/// Run one feature branch: normalize, encode, and read out counts —
/// through a reservoir when enabled.
fn run_branch(
    cfg: &PipelineConfig,
    split: &DatasetSplit,
    branch: u64,
    cir_len: usize,
    liquid_on: bool,
    run_seed: u64,
) -> Result<BranchCounts> {
    let rf_spec = cfg.features.to_rf_spec()?;
    let raw_train = branch_raw(&split.train, branch, &rf_spec, cir_len, cfg.features.cir_pad_spacing)?;
    let raw_test = branch_raw(&split.test, branch, &rf_spec, cir_len, cfg.features.cir_pad_spacing)?;

    let stats = NormalizationStats::fit(raw_train.iter().map(|v| v.as_slice()))?;
    let dim = stats.dim();

    let liquid = if liquid_on {
        let section = if branch == BRANCH_RF {
            &cfg.liquid.rf
        } else {
            &cfg.liquid.cir
        };
        let lcfg = section.to_liquid_config(cfg.lif, derive_seed(&[run_seed, TAG_LIQUID, branch]));
        Some(build_liquid(dim, &lcfg)?)
    } else {
        None
    };

    let mut spike_total = 0u64;
    let mut step_total = 0u64;
    let mut readout = |samples: &[Sample], raw: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
        samples
            .iter()
            .zip(raw)
            .map(|(sample, values)| {
                let normalized = stats.apply(values)?;
                let encoded = encode_rate(
                    &normalized,
                    &EncoderConfig {
                        steps: cfg.encoder.steps,
                        max_rate: cfg.encoder.max_rate,
                        seed: derive_seed(&[run_seed, TAG_ENCODE, branch, sample.id as u64]),
                    },
                )?;
                let counts = match &liquid {
                    Some(net) => {
                        let states = run_liquid(net, &encoded)?;
                        spike_total += states.total_spikes();
                        step_total += states.steps() as u64;
                        states.channel_counts()
                    }
                    None => encoded.channel_counts(),
                };
                Ok(counts.into_iter().map(|c| c as f64).collect())
            })
            .collect()
    };

    let train = readout(&split.train, &raw_train)?;
    let test = readout(&split.test, &raw_test)?;

    let diagnostics = liquid.map(|net| {
        let denom = (net.n_neurons() as u64 * step_total.max(1)) as f64;
        BranchDiagnostics {
            weights_hash: net.weights_hash(),
            stats: net.stats(),
            firing_rate: spike_total as f64 / denom,
        }
    });

    Ok(BranchCounts {
        train,
        test,
        diagnostics,
    })
}

fn concat_rows(a: Option<&Vec<Vec<f64>>>, b: Option<&Vec<Vec<f64>>>, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut row = Vec::new();
            if let Some(a) = a {
                row.extend_from_slice(&a[i]);
            }
            if let Some(b) = b {
                row.extend_from_slice(&b[i]);
            }
            row
        })
        .collect()
}

/// Evaluate one strategy under one run seed on a fixed split.
pub fn run_strategy(
    cfg: &PipelineConfig,
    strategy: &StrategyConfig,
    split: &DatasetSplit,
    run_seed: u64,
) -> Result<StrategyRun> {
    strategy.validate()?;
    if split.train.is_empty() || split.test.is_empty() {
        return Err(Error::InsufficientData(
            "strategy run needs non-empty train and test splits".into(),
        ));
    }

    let rf = if strategy.features.has_rf() {
        Some(run_branch(cfg, split, BRANCH_RF, 0, strategy.rf_liquid, run_seed)?)
    } else {
        None
    };
    let cir = match strategy.features.cir_len() {
        Some(len) => Some(run_branch(cfg, split, BRANCH_CIR, len, strategy.cir_liquid, run_seed)?),
        None => None,
    };

    let joint_train = concat_rows(
        rf.as_ref().map(|b| &b.train),
        cir.as_ref().map(|b| &b.train),
        split.train.len(),
    );
    let joint_test = concat_rows(
        rf.as_ref().map(|b| &b.test),
        cir.as_ref().map(|b| &b.test),
        split.test.len(),
    );

    let joint_stats = NormalizationStats::fit(joint_train.iter().map(|v| v.as_slice()))?;
    let encode_map_input = |sample: &Sample, joint: &[f64]| -> Result<SpikeTrain> {
        let normalized = joint_stats.apply(joint)?;
        let profile = shape_profile(&normalized, cfg.som.input_gamma, cfg.som.input_mean_rate);
        encode_rate(
            &profile,
            &EncoderConfig {
                steps: cfg.som.steps,
                max_rate: cfg.som.max_rate,
                seed: derive_seed(&[run_seed, TAG_MAP_ENCODE, sample.id as u64]),
            },
        )
    };

    let train_patterns: Vec<SpikeTrain> = split
        .train
        .iter()
        .zip(&joint_train)
        .map(|(s, v)| encode_map_input(s, v))
        .collect::<Result<_>>()?;
    let train_labels: Vec<u8> = split.train.iter().map(|s| s.label).collect();

    let mut som = SomNetwork::new(
        joint_stats.dim(),
        cfg.som
            .to_som_config(derive_seed(&[run_seed, TAG_MAP])),
    )?;
    som.train(&train_patterns)?;
    som.assign_labels(&train_patterns, &train_labels)?;

    let mut predictions = Vec::with_capacity(split.test.len());
    for (sample, joint) in split.test.iter().zip(&joint_test) {
        let pattern = encode_map_input(sample, joint)?;
        predictions.push((sample.id, sample.label, som.classify(&pattern)?));
    }

    let truth: Vec<u8> = predictions.iter().map(|p| p.1).collect();
    let predicted: Vec<u8> = predictions.iter().map(|p| p.2).collect();
    let metrics = compute_metrics(&truth, &predicted)?;

    Ok(StrategyRun {
        strategy_id: strategy.id,
        seed: run_seed,
        metrics,
        som_weights_hash: som.weights_hash(),
        rf_liquid: rf.and_then(|b| b.diagnostics),
        cir_liquid: cir.and_then(|b| b.diagnostics),
        predictions,
    })
}

/// Seed-level entry in the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedEntry {
    pub seed: u64,
    pub metrics: Metrics,
    pub som_weights_hash: String,
    pub rf_liquid_hash: Option<String>,
    pub cir_liquid_hash: Option<String>,
    pub rf_firing_rate: Option<f64>,
    pub cir_firing_rate: Option<f64>,
}

/// Seed-aggregated numbers for one strategy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy_id: u8,
    pub features: String,
    pub rf_liquid: bool,
    pub cir_liquid: bool,
    pub accuracy_mean: f64,
    /// Population standard deviation over seeds.
    pub accuracy_std: f64,
    pub precision_mean: f64,
    pub recall_mean: f64,
    pub f1_mean: f64,
    pub per_seed: Vec<SeedEntry>,
}

/// Dataset provenance recorded in the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetProvenance {
    pub files: Vec<SourceFile>,
    pub total_rows: usize,
    /// Cap applied before splitting (0 = none).
    pub subsample_cap: usize,
    pub rows_used: usize,
    pub split_seed: u64,
    pub stratified: bool,
    pub n_train: usize,
    pub n_test: usize,
}

/// The reproducibility record one run writes. Everything in here is a
/// pure function of (dataset, config, seeds); wall-clock timings live in
/// a separate file so two identical runs emit identical bytes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub tool_version: String,
    pub dataset: DatasetProvenance,
    pub config_hash: String,
    pub config: PipelineConfig,
    pub seeds: Vec<u64>,
    pub results: Vec<StrategySummary>,
}

/// Wall-clock record for one run; deliberately outside the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunTimings {
    pub total_seconds: f64,
    pub per_run: Vec<(String, u64, f64)>,
}

/// Everything a full evaluation produces.
pub struct RunOutput {
    pub manifest: RunManifest,
    pub timings: RunTimings,
    pub runs: Vec<StrategyRun>,
}

fn mean(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count();
    if n == 0 {
        return 0.0;
    }
    values.sum::<f64>() / n as f64
}

fn summarize(strategy: &StrategyConfig, runs: &[StrategyRun]) -> StrategySummary {
    let acc = || runs.iter().map(|r| r.metrics.accuracy);
    let accuracy_mean = mean(acc());
    let variance = mean(acc().map(|a| (a - accuracy_mean) * (a - accuracy_mean)));
    StrategySummary {
        strategy_id: strategy.id,
        features: strategy.features.label().to_string(),
        rf_liquid: strategy.rf_liquid,
        cir_liquid: strategy.cir_liquid,
        accuracy_mean,
        accuracy_std: variance.sqrt(),
        precision_mean: mean(runs.iter().map(|r| r.metrics.precision)),
        recall_mean: mean(runs.iter().map(|r| r.metrics.recall)),
        f1_mean: mean(runs.iter().map(|r| r.metrics.f1)),
        per_seed: runs
            .iter()
            .map(|r| SeedEntry {
                seed: r.seed,
                metrics: r.metrics.clone(),
                som_weights_hash: r.som_weights_hash.clone(),
                rf_liquid_hash: r.rf_liquid.as_ref().map(|d| d.weights_hash.clone()),
                cir_liquid_hash: r.cir_liquid.as_ref().map(|d| d.weights_hash.clone()),
                rf_firing_rate: r.rf_liquid.as_ref().map(|d| d.firing_rate),
                cir_firing_rate: r.cir_liquid.as_ref().map(|d| d.firing_rate),
            })
            .collect(),
    }
}

/// Evaluate a strategy set over the seed list, reporting each finished
/// (strategy, seed) through `on_run`.
pub fn run_all_with<F>(
    cfg: &PipelineConfig,
    samples: &[Sample],
    files: &[SourceFile],
    strategies: &[StrategyConfig],
    mut on_run: F,
) -> Result<RunOutput>
where
    F: FnMut(&StrategyRun, f64),
{
    cfg.validate()?;
    if strategies.is_empty() {
        return Err(Error::Config("no strategies selected".into()));
    }
    let total_rows = samples.len();
    let capped: Vec<Sample> = if cfg.dataset.subsample > 0 && samples.len() > cfg.dataset.subsample
    {
        subsample_stratified(samples, cfg.dataset.subsample, cfg.dataset.split_seed)
    } else {
        samples.to_vec()
    };
    let split = split_dataset(&capped, cfg.dataset.split_seed, cfg.dataset.stratified)?;

    let started = Instant::now();
    let mut runs: Vec<StrategyRun> = Vec::new();
    let mut per_run_times = Vec::new();
    let mut results = Vec::new();
    for strategy in strategies {
        let mut strategy_runs = Vec::new();
        for &seed in &cfg.eval.seeds {
            let t0 = Instant::now();
            let run = run_strategy(cfg, strategy, &split, seed)?;
            let secs = t0.elapsed().as_secs_f64();
            per_run_times.push((strategy.name(), seed, secs));
            on_run(&run, secs);
            strategy_runs.push(run);
        }
        results.push(summarize(strategy, &strategy_runs));
        runs.extend(strategy_runs);
    }

    let manifest = RunManifest {
        manifest_version: 1,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        dataset: DatasetProvenance {
            files: files.to_vec(),
            total_rows,
            subsample_cap: cfg.dataset.subsample,
            rows_used: capped.len(),
            split_seed: cfg.dataset.split_seed,
            stratified: cfg.dataset.stratified,
            n_train: split.train.len(),
            n_test: split.test.len(),
        },
        config_hash: cfg.hash(),
        config: cfg.clone(),
        seeds: cfg.eval.seeds.clone(),
        results,
    };
    Ok(RunOutput {
        manifest,
        timings: RunTimings {
            total_seconds: started.elapsed().as_secs_f64(),
            per_run: per_run_times,
        },
        runs,
    })
}

/// [`run_all_with`] without progress reporting.
pub fn run_all(
    cfg: &PipelineConfig,
    samples: &[Sample],
    files: &[SourceFile],
    strategies: &[StrategyConfig],
) -> Result<RunOutput> {
    run_all_with(cfg, samples, files, strategies, |_, _| {})
}

/// Fixed-width summary table of the per-strategy means.
pub fn format_metrics_table(manifest: &RunManifest) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<9} {:<10} {:<10} {:<11} {:<14} {:<10} {:<8} {:<6}\n",
        "strategy", "features", "rf_liquid", "cir_liquid", "accuracy_%", "precision", "recall", "f1"
    ));
    for r in &manifest.results {
        let yn = |b: bool| if b { "yes" } else { "no" };
        out.push_str(&format!(
            "{:<9} {:<10} {:<10} {:<11} {:<14} {:<10.3} {:<8.3} {:<6.3}\n",
            format!("S{}", r.strategy_id),
            r.features,
            yn(r.rf_liquid),
            yn(r.cir_liquid),
            format!(
                "{:.1} +/- {:.1}",
                100.0 * r.accuracy_mean,
                100.0 * r.accuracy_std
            ),
            r.precision_mean,
            r.recall_mean,
            r.f1_mean,
        ));
    }
    out
}

/// Write manifest, timings, and the summary table into `out_dir`;
/// `predictions` adds a per-record CSV, `liquid_dump` a per-run reservoir
/// diagnostics file.
pub fn write_outputs(
    out_dir: &Path,
    output: &RunOutput,
    predictions: bool,
    liquid_dump: bool,
) -> Result<()> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source: std::io::Error| Error::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let manifest_path = out_dir.join("manifest.json");
    let mut manifest_bytes = serde_json::to_vec_pretty(&output.manifest)
        .map_err(|e| Error::Format(format!("manifest serialization failed: {e}")))?;
    manifest_bytes.push(b'\n');
    fs::write(&manifest_path, manifest_bytes).map_err(io_err(&manifest_path))?;

    let timings_path = out_dir.join("timings.json");
    let timings = serde_json::to_vec_pretty(&output.timings)
        .map_err(|e| Error::Format(format!("timings serialization failed: {e}")))?;
    fs::write(&timings_path, timings).map_err(io_err(&timings_path))?;

    let table_path = out_dir.join("metrics_table.txt");
    fs::write(&table_path, format_metrics_table(&output.manifest))
        .map_err(io_err(&table_path))?;

    if predictions {
        let path = out_dir.join("predictions.csv");
        let mut text = String::from("strategy,seed,sample_id,label,predicted\n");
        for run in &output.runs {
            for (id, truth, pred) in &run.predictions {
                text.push_str(&format!(
                    "S{},{},{id},{truth},{pred}\n",
                    run.strategy_id, run.seed
                ));
            }
        }
        fs::write(&path, text).map_err(io_err(&path))?;
    }

    if liquid_dump {
        #[derive(Serialize)]
        struct Entry<'a> {
            strategy: String,
            seed: u64,
            rf: &'a Option<BranchDiagnostics>,
            cir: &'a Option<BranchDiagnostics>,
        }
        let entries: Vec<Entry> = output
            .runs
            .iter()
            .filter(|r| r.rf_liquid.is_some() || r.cir_liquid.is_some())
            .map(|r| Entry {
                strategy: format!("S{}", r.strategy_id),
                seed: r.seed,
                rf: &r.rf_liquid,
                cir: &r.cir_liquid,
            })
            .collect();
        let path = out_dir.join("liquid_stats.json");
        let bytes = serde_json::to_vec_pretty(&entries)
            .map_err(|e| Error::Format(format!("stats serialization failed: {e}")))?;
        fs::write(&path, bytes).map_err(io_err(&path))?;
    }
    Ok(())
}

//! TOML run configuration.
//!
//! Every section has complete defaults, so an empty file (or no file) is a
//! valid configuration; unknown keys are rejected rather than ignored.
//! Seeds for network construction and encoding are not stored here — they
//! are derived per run from the evaluation seed list — and the membrane
//! parameters in `[lif]` are shared by the reservoirs and the map.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::Schema;
use crate::error::{Error, Result};
use crate::features::{RfFeature, RfSpec, RF_DIM};
use crate::lif::LifParams;
use crate::liquid::LiquidConfig;
use crate::som::{CompetitionMode, SomConfig, StdpParams};

/// Dataset location, split, and size controls.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    /// CSV files to parse and concatenate.
    pub paths: Vec<PathBuf>,
    pub schema: Schema,
    /// Seed for the train/test shuffle; fixed independently of the
    /// evaluation seeds so every run scores the same split.
    pub split_seed: u64,
    /// Split each class 5:2 separately.
    pub stratified: bool,
    /// Cap on record count (0 = unlimited); applied before the split and
    /// recorded in the manifest.
    pub subsample: usize,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            paths: Vec::new(),
            schema: Schema::default(),
            split_seed: 7,
            stratified: true,
            subsample: 0,
        }
    }
}

/// Source columns for the derived first-path power feature.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FpPowerColumns {
    pub amp1: String,
    pub amp2: String,
    pub amp3: String,
    pub rxpacc: String,
}

impl Default for FpPowerColumns {
    fn default() -> Self {
        Self {
            amp1: "FP_AMP1".into(),
            amp2: "FP_AMP2".into(),
            amp3: "FP_AMP3".into(),
            rxpacc: "RXPACC".into(),
        }
    }
}

/// Feature extraction controls.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FeaturesSection {
    /// Registers copied verbatim into the RF vector, in order. The
    /// derived first-path power fills the last slot.
    pub rf_columns: Vec<String>,
    pub fp_power: FpPowerColumns,
    /// One silent spacer channel is inserted after every block of this
    /// many CIR taps.
    pub cir_pad_spacing: usize,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        Self {
            rf_columns: [
                "RANGE",
                "FP_IDX",
                "FP_AMP1",
                "FP_AMP2",
                "FP_AMP3",
                "STDEV_NOISE",
                "CIR_PWR",
                "MAX_NOISE",
                "RXPACC",
            ]
            .into_iter()
            .map(String::from)
            .collect(),
            fp_power: FpPowerColumns::default(),
            cir_pad_spacing: 10,
        }
    }
}

impl FeaturesSection {
    /// Assemble the RF feature list: the named columns plus the derived
    /// power feature in the final slot.
    pub fn to_rf_spec(&self) -> Result<RfSpec> {
        let mut features: Vec<RfFeature> = self
            .rf_columns
            .iter()
            .map(|c| RfFeature::Column(c.clone()))
            .collect();
        features.push(RfFeature::FirstPathPower {
            amp1: self.fp_power.amp1.clone(),
            amp2: self.fp_power.amp2.clone(),
            amp3: self.fp_power.amp3.clone(),
            rxpacc: self.fp_power.rxpacc.clone(),
        });
        let spec = RfSpec(features);
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rf_columns.len() + 1 != RF_DIM {
            return Err(Error::Config(format!(
                "rf_columns must list {} registers (plus the derived power slot), got {}",
                RF_DIM - 1,
                self.rf_columns.len()
            )));
        }
        if self.cir_pad_spacing == 0 {
            return Err(Error::Config("cir_pad_spacing must be positive".into()));
        }
        Ok(())
    }
}

/// Rate-encoder controls for the feature branches.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderSection {
    /// Window length in steps.
    pub steps: usize,
    /// Per-step spike probability at input value 1.0.
    pub max_rate: f64,
}

impl Default for EncoderSection {
    fn default() -> Self {
        Self {
            steps: 250,
            max_rate: 0.5,
        }
    }
}

impl EncoderSection {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("encoder window needs at least one step".into()));
        }
        if !(self.max_rate > 0.0 && self.max_rate <= 1.0) {
            return Err(Error::Config(format!(
                "encoder max_rate must be in (0, 1], got {}",
                self.max_rate
            )));
        }
        Ok(())
    }
}

/// File-side reservoir settings (membrane parameters and seed flow in from
/// `[lif]` and the run seed).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LiquidSection {
    pub n_neurons: usize,
    pub exc_fraction: f64,
    pub p_in: f64,
    pub p_rec: f64,
    pub input_budget: f64,
    pub w_scale_rec: f64,
    pub inhib_gain: f64,
}

impl LiquidSection {
    fn with_size(n_neurons: usize, input_budget: f64, w_scale_rec: f64, inhib_gain: f64) -> Self {
        Self {
            n_neurons,
            exc_fraction: 0.8,
            p_in: 0.1,
            p_rec: 0.1,
            input_budget,
            w_scale_rec,
            inhib_gain,
        }
    }

    pub fn to_liquid_config(&self, lif: LifParams, seed: u64) -> LiquidConfig {
        LiquidConfig {
            n_neurons: self.n_neurons,
            exc_fraction: self.exc_fraction,
            p_in: self.p_in,
            p_rec: self.p_rec,
            input_budget: self.input_budget,
            w_scale_rec: self.w_scale_rec,
            inhib_gain: self.inhib_gain,
            lif,
            seed,
        }
    }
}

impl Default for LiquidSection {
    fn default() -> Self {
        Self::with_size(400, 0.5, 0.1, 5.0)
    }
}

/// The two reservoir branches.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LiquidBranches {
    pub rf: LiquidSection,
    pub cir: LiquidSection,
}

impl Default for LiquidBranches {
    fn default() -> Self {
        Self {
            rf: LiquidSection::with_size(400, 0.5, 0.1, 5.0),
            cir: LiquidSection::with_size(500, 3.0, 0.1, 5.0),
        }
    }
}

/// File-side map settings (the seed flows in at run time, as for the
/// reservoirs). The map carries its own membrane parameters, separate
/// from the `[lif]` section used by encoders and reservoirs: plasticity
/// needs a much shorter membrane memory than reservoir dynamics do.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SomSection {
    pub rows: usize,
    pub cols: usize,
    pub steps: usize,
    pub max_rate: f64,
    /// Exponent compressing each normalized joint component before the
    /// map sees it (1 = linear). Values below 1 spread a concentrated
    /// pattern's activity across more channels.
    pub input_gamma: f64,
    /// Per-pattern mean rate the joint vector is rescaled to before
    /// encoding. Fixing the mean gives every pattern the same spike
    /// budget, so map competition reflects pattern shape rather than
    /// overall activity level.
    pub input_mean_rate: f64,
    pub input_scale: f64,
    pub fan_in: usize,
    pub excite_gain: f64,
    pub inhibit_strength: f64,
    pub radius0: f64,
    pub radius_decay: f64,
    pub radius_min: f64,
    pub epochs: usize,
    pub competition: CompetitionMode,
    pub w_init_lo: f64,
    pub w_init_hi: f64,
    pub stdp: StdpParams,
    pub lif: LifParams,
}

impl Default for SomSection {
    fn default() -> Self {
        let d = SomConfig::default();
        Self {
            rows: d.rows,
            cols: d.cols,
            steps: d.steps,
            max_rate: d.max_rate,
            input_gamma: 0.5,
            input_mean_rate: 0.3,
            input_scale: d.input_scale,
            fan_in: d.fan_in,
            excite_gain: d.excite_gain,
            inhibit_strength: d.inhibit_strength,
            radius0: d.radius0,
            radius_decay: d.radius_decay,
            radius_min: d.radius_min,
            epochs: d.epochs,
            competition: d.competition,
            w_init_lo: d.w_init_lo,
            w_init_hi: d.w_init_hi,
            stdp: d.stdp,
            lif: d.lif,
        }
    }
}

impl SomSection {
    pub fn to_som_config(&self, seed: u64) -> SomConfig {
        SomConfig {
            rows: self.rows,
            cols: self.cols,
            steps: self.steps,
            max_rate: self.max_rate,
            input_scale: self.input_scale,
            fan_in: self.fan_in,
            excite_gain: self.excite_gain,
            inhibit_strength: self.inhibit_strength,
            radius0: self.radius0,
            radius_decay: self.radius_decay,
            radius_min: self.radius_min,
            epochs: self.epochs,
            competition: self.competition,
            w_init_lo: self.w_init_lo,
            w_init_hi: self.w_init_hi,
            stdp: self.stdp.clone(),
            lif: self.lif,
            seed,
        }
    }
}

/// Evaluation sweep controls.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Run seeds; every strategy is evaluated once per seed and the
    /// reported numbers are means over this list.
    pub seeds: Vec<u64>,
    /// Record count for generated datasets.
    pub synthetic_n: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            seeds: vec![1, 2, 3, 4, 5],
            synthetic_n: 2000,
        }
    }
}

/// The whole run configuration.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub dataset: DatasetSection,
    pub features: FeaturesSection,
    pub encoder: EncoderSection,
    pub lif: LifParams,
    pub liquid: LiquidBranches,
    pub som: SomSection,
    pub eval: EvalSection,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: PipelineConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        self.encoder.validate()?;
        self.lif.validate()?;
        // Exercise the derived runtime configs so their own checks run.
        self.liquid.rf.to_liquid_config(self.lif, 0).validate()?;
        self.liquid.cir.to_liquid_config(self.lif, 0).validate()?;
        self.som.to_som_config(0).validate()?;
        if !(self.som.input_gamma > 0.0 && self.som.input_gamma <= 1.0) {
            return Err(Error::Config(format!(
                "som.input_gamma must be in (0, 1], got {}",
                self.som.input_gamma
            )));
        }
        if !(self.som.input_mean_rate > 0.0 && self.som.input_mean_rate <= 1.0) {
            return Err(Error::Config(format!(
                "som.input_mean_rate must be in (0, 1], got {}",
                self.som.input_mean_rate
            )));
        }
        if self.eval.seeds.is_empty() {
            return Err(Error::Config("eval.seeds must not be empty".into()));
        }
        let mut sorted = self.eval.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.eval.seeds.len() {
            return Err(Error::Config("eval.seeds contains duplicates".into()));
        }
        if self.eval.synthetic_n == 0 {
            return Err(Error::Config("eval.synthetic_n must be positive".into()));
        }
        Ok(())
    }

    /// Stable digest of the full configuration, recorded in the manifest.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_toml_is_the_default_config() {
        let cfg: PipelineConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let cfg = PipelineConfig::default();
        let text = toml::to_string_pretty(&cfg).unwrap();
        let back: PipelineConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_override_keeps_other_defaults() {
        let cfg: PipelineConfig = toml::from_str(
            r#"
            [encoder]
            steps = 100

            [liquid.cir]
            n_neurons = 300

            [som]
            epochs = 2

            [lif]
            tau_m = 10.0
            reset = "hard"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.encoder.steps, 100);
        assert_eq!(cfg.encoder.max_rate, 0.5);
        assert_eq!(cfg.liquid.cir.n_neurons, 300);
        assert_eq!(cfg.liquid.rf.n_neurons, 400);
        assert_eq!(cfg.som.epochs, 2);
        assert_eq!(cfg.lif.tau_m, 10.0);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<PipelineConfig>("[encoder]\nstep = 4\n").is_err());
        assert!(toml::from_str::<PipelineConfig>("[typo]\n").is_err());
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut cfg = PipelineConfig::default();
        cfg.encoder.max_rate = 1.5;
        assert!(cfg.validate().is_err());

        let mut cfg = PipelineConfig::default();
        cfg.eval.seeds = vec![1, 1];
        assert!(cfg.validate().is_err());

        let mut cfg = PipelineConfig::default();
        cfg.features.rf_columns.pop();
        assert!(cfg.validate().is_err());

        let mut cfg = PipelineConfig::default();
        cfg.liquid.rf.p_rec = -0.1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rf_spec_has_power_feature_last() {
        let spec = FeaturesSection::default().to_rf_spec().unwrap();
        assert_eq!(spec.0.len(), RF_DIM);
        assert!(matches!(
            spec.0.last().unwrap(),
            RfFeature::FirstPathPower { .. }
        ));
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = PipelineConfig::default();
        let b = PipelineConfig::default();
        assert_eq!(a.hash(), b.hash());
        let mut c = PipelineConfig::default();
        c.som.epochs += 1;
        assert_ne!(a.hash(), c.hash());
    }
}

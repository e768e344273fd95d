//! Feature extraction: RF diagnostic vectors, first-path-aligned CIR
//! segments, silent-spacer padding, and min/max normalization.
//!
//! Both feature families end up as non-negative vectors in [0, 1] so they
//! can be fed straight into the rate encoder.

use serde::{Deserialize, Serialize};

use crate::dataset::Sample;
use crate::error::{Error, Result};

/// Width of the RF diagnostic vector.
pub const RF_DIM: usize = 10;

/// How one slot of the RF vector is produced from a record.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum RfFeature {
    /// Copy a named register verbatim.
    Column(String),
    /// First-path power estimate in dB, computed from three first-path
    /// amplitude registers and the preamble accumulation count:
    /// `10·log10((a1² + a2² + a3²) / rxpacc²) − 121.74`.
    FirstPathPower {
        amp1: String,
        amp2: String,
        amp3: String,
        rxpacc: String,
    },
}

/// The ten slots of the RF vector, in order.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RfSpec(pub Vec<RfFeature>);

impl Default for RfSpec {
    fn default() -> Self {
        let col = |n: &str| RfFeature::Column(n.into());
        RfSpec(vec![
            col("RANGE"),
            col("FP_IDX"),
            col("FP_AMP1"),
            col("FP_AMP2"),
            col("FP_AMP3"),
            col("STDEV_NOISE"),
            col("CIR_PWR"),
            col("MAX_NOISE"),
            col("RXPACC"),
            RfFeature::FirstPathPower {
                amp1: "FP_AMP1".into(),
                amp2: "FP_AMP2".into(),
                amp3: "FP_AMP3".into(),
                rxpacc: "RXPACC".into(),
            },
        ])
    }
}

impl RfSpec {
    pub fn validate(&self) -> Result<()> {
        if self.0.len() != RF_DIM {
            return Err(Error::Config(format!(
                "RF spec must list exactly {RF_DIM} features, got {}",
                self.0.len()
            )));
        }
        Ok(())
    }
}

const FP_POWER_OFFSET_DB: f64 = 121.74;
/// Floor for the power ratio so all-zero amplitudes stay finite.
const POWER_EPS: f64 = 1e-12;

fn register(sample: &Sample, name: &str) -> Result<f64> {
    sample
        .rf_raw
        .get(name)
        .copied()
        .ok_or_else(|| Error::MissingRegister(name.to_string()))
}

/// Build the raw (unnormalized) RF vector for one record.
pub fn extract_rf(sample: &Sample, spec: &RfSpec) -> Result<[f64; RF_DIM]> {
    spec.validate()?;
    let mut out = [0.0; RF_DIM];
    for (slot, feature) in spec.0.iter().enumerate() {
        out[slot] = match feature {
            RfFeature::Column(name) => register(sample, name)?,
            RfFeature::FirstPathPower {
                amp1,
                amp2,
                amp3,
                rxpacc,
            } => {
                let a1 = register(sample, amp1)?;
                let a2 = register(sample, amp2)?;
                let a3 = register(sample, amp3)?;
                let n = register(sample, rxpacc)?;
                if n <= 0.0 {
                    return Err(Error::Numeric(format!(
                        "sample {}: {rxpacc} must be positive, got {n}",
                        sample.id
                    )));
                }
                let ratio = (a1 * a1 + a2 * a2 + a3 * a3) / (n * n);
                10.0 * ratio.max(POWER_EPS).log10() - FP_POWER_OFFSET_DB
            }
        };
        if !out[slot].is_finite() {
            return Err(Error::Numeric(format!(
                "sample {}: RF slot {slot} is not finite",
                sample.id
            )));
        }
    }
    Ok(out)
}

/// A first-path-aligned CIR window.
#[derive(Debug, Clone, PartialEq)]
pub struct CirSegment {
    pub values: Vec<f64>,
    /// Nominal window length before any padding (50 or 120).
    pub segment_len: usize,
    /// Whether silent spacer slots have been inserted.
    pub padded: bool,
}

/// Window lengths the pipeline supports.
pub const CIR_SEGMENT_LENGTHS: [usize; 2] = [50, 120];

/// Cut `segment_len` taps starting at the record's first-path index.
/// Windows running past the end of the CIR are zero-filled, so the output
/// length is always exactly `segment_len`.
pub fn extract_cir_segment(sample: &Sample, segment_len: usize) -> Result<CirSegment> {
    if !CIR_SEGMENT_LENGTHS.contains(&segment_len) {
        return Err(Error::Config(format!(
            "CIR segment length must be one of {CIR_SEGMENT_LENGTHS:?}, got {segment_len}"
        )));
    }
    if sample.fp_idx >= sample.cir.len() {
        return Err(Error::Shape(format!(
            "sample {}: fp_idx {} outside CIR of length {}",
            sample.id,
            sample.fp_idx,
            sample.cir.len()
        )));
    }
    let mut values = vec![0.0; segment_len];
    let avail = (sample.cir.len() - sample.fp_idx).min(segment_len);
    values[..avail].copy_from_slice(&sample.cir[sample.fp_idx..sample.fp_idx + avail]);
    Ok(CirSegment {
        values,
        segment_len,
        padded: false,
    })
}

/// Insert one zero slot after every complete block of `spacing` values.
/// A 50-tap segment at spacing 10 becomes 55 values with zeros at output
/// indices 10, 21, 32, 43, 54; a trailing partial block gets no spacer.
/// The spacers act as guaranteed-silent channels that keep the encoded
/// blocks from smearing together.
pub fn pad_uniform(segment: &CirSegment, spacing: usize) -> Result<CirSegment> {
    if spacing == 0 {
        return Err(Error::Config("pad spacing must be positive".into()));
    }
    if segment.padded {
        return Err(Error::State("segment is already padded".into()));
    }
    let n = segment.values.len();
    let mut values = Vec::with_capacity(n + n / spacing);
    for (i, &v) in segment.values.iter().enumerate() {
        values.push(v);
        if (i + 1) % spacing == 0 {
            values.push(0.0);
        }
    }
    Ok(CirSegment {
        values,
        segment_len: segment.segment_len,
        padded: true,
    })
}

/// Remove the spacer slots inserted by [`pad_uniform`].
pub fn unpad_uniform(segment: &CirSegment, spacing: usize) -> Result<CirSegment> {
    if spacing == 0 {
        return Err(Error::Config("pad spacing must be positive".into()));
    }
    if !segment.padded {
        return Err(Error::State("segment is not padded".into()));
    }
    let values: Vec<f64> = segment
        .values
        .iter()
        .enumerate()
        .filter(|(i, _)| (i + 1) % (spacing + 1) != 0)
        .map(|(_, &v)| v)
        .collect();
    Ok(CirSegment {
        values,
        segment_len: segment.segment_len,
        padded: false,
    })
}

/// Per-dimension min/max bounds fitted on the training split and applied
/// everywhere, so the test split never leaks into the scaling.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NormalizationStats {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl NormalizationStats {
    /// Fit bounds over a set of equal-length vectors.
    pub fn fit<'a, I>(vectors: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut lo: Vec<f64> = Vec::new();
        let mut hi: Vec<f64> = Vec::new();
        let mut seen = 0usize;
        for v in vectors {
            if seen == 0 {
                lo = v.to_vec();
                hi = v.to_vec();
            } else {
                if v.len() != lo.len() {
                    return Err(Error::Shape(format!(
                        "normalization fit: vector length {} != {}",
                        v.len(),
                        lo.len()
                    )));
                }
                for ((l, h), &x) in lo.iter_mut().zip(hi.iter_mut()).zip(v) {
                    *l = l.min(x);
                    *h = h.max(x);
                }
            }
            seen += 1;
        }
        if seen == 0 {
            return Err(Error::InsufficientData(
                "normalization fit over empty set".into(),
            ));
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Map a vector into [0, 1] with the fitted bounds. Out-of-range
    /// values (possible on the test split) clamp to the interval edge;
    /// constant dimensions map to 0.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.lo.len() {
            return Err(Error::Shape(format!(
                "normalize: vector length {} != fitted {}",
                v.len(),
                self.lo.len()
            )));
        }
        Ok(v.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&x, (&l, &h))| {
                let span = h - l;
                if span <= 0.0 {
                    0.0
                } else {
                    ((x - l) / span).clamp(0.0, 1.0)
                }
            })
            .collect())
    }
}

/// Reshape a normalized vector into a fixed-budget activity profile:
/// compress each component with `v^gamma`, then rescale so the mean
/// component equals `mean_rate`, clamping into [0, 1].
///
/// Fixing the per-pattern mean gives every pattern the same expected
/// spike budget downstream, so competitive readouts compare pattern
/// shapes instead of overall activity levels — otherwise a pattern with
/// one hot channel barely drives anything while a diffuse pattern of the
/// same salience dominates. The compression exponent (γ ≤ 1) limits how
/// much of a concentrated pattern's budget the [0, 1] clamp discards.
/// An all-zero vector is returned unchanged.
pub fn shape_profile(values: &[f64], gamma: f64, mean_rate: f64) -> Vec<f64> {
    let powered: Vec<f64> = values.iter().map(|&v| v.max(0.0).powf(gamma)).collect();
    let sum: f64 = powered.iter().sum();
    if sum <= 0.0 {
        return powered;
    }
    let scale = mean_rate * powered.len() as f64 / sum;
    powered.iter().map(|&v| (v * scale).min(1.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sample_with(regs: &[(&str, f64)], cir: Vec<f64>, fp_idx: usize) -> Sample {
        Sample {
            id: 0,
            label: 0,
            rf_raw: regs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            cir,
            fp_idx,
        }
    }

    fn full_register_sample() -> Sample {
        sample_with(
            &[
                ("RANGE", 7.5),
                ("FP_IDX", 744.0),
                ("FP_AMP1", 2000.0),
                ("FP_AMP2", 2500.0),
                ("FP_AMP3", 1500.0),
                ("STDEV_NOISE", 60.0),
                ("CIR_PWR", 9000.0),
                ("MAX_NOISE", 500.0),
                ("RXPACC", 1024.0),
            ],
            vec![1.0; 1016],
            744,
        )
    }

    #[test]
    fn rf_vector_copies_columns_in_order() {
        let s = full_register_sample();
        let v = extract_rf(&s, &RfSpec::default()).unwrap();
        assert_eq!(v[0], 7.5);
        assert_eq!(v[1], 744.0);
        assert_eq!(v[2], 2000.0);
        assert_eq!(v[8], 1024.0);
    }

    #[test]
    fn first_path_power_matches_hand_computation() {
        let s = full_register_sample();
        let v = extract_rf(&s, &RfSpec::default()).unwrap();
        // Hand-derived: (2000² + 2500² + 1500²) / 1024² = 12.5e6 / 1048576
        // = 11.920929; 10·log10 of that is 10.763101, minus 121.74.
        let ratio = (2000.0f64.powi(2) + 2500.0f64.powi(2) + 1500.0f64.powi(2)) / 1024.0f64.powi(2);
        let expected = 10.0 * ratio.log10() - 121.74;
        assert_abs_diff_eq!(v[9], expected, epsilon = 1e-12);
        assert_abs_diff_eq!(v[9], -110.976899, epsilon = 1e-5);
    }

    #[test]
    fn first_path_power_with_zero_amps_stays_finite() {
        let mut s = full_register_sample();
        for k in ["FP_AMP1", "FP_AMP2", "FP_AMP3"] {
            s.rf_raw.insert(k.into(), 0.0);
        }
        let v = extract_rf(&s, &RfSpec::default()).unwrap();
        assert!(v[9].is_finite());
        assert_abs_diff_eq!(v[9], 10.0 * POWER_EPS.log10() - 121.74, epsilon = 1e-9);
    }

    #[test]
    fn missing_register_is_an_error() {
        let s = sample_with(&[("RANGE", 1.0)], vec![0.0; 8], 0);
        let err = extract_rf(&s, &RfSpec::default()).unwrap_err();
        assert!(matches!(err, Error::MissingRegister(_)));
    }

    #[test]
    fn rf_spec_must_have_ten_slots() {
        let spec = RfSpec(vec![RfFeature::Column("RANGE".into())]);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn cir_segment_inside_record() {
        let s = sample_with(&[], (0..200).map(|i| i as f64).collect(), 40);
        let seg = extract_cir_segment(&s, 50).unwrap();
        assert_eq!(seg.values.len(), 50);
        assert_eq!(seg.values[0], 40.0);
        assert_eq!(seg.values[49], 89.0);
        assert!(!seg.padded);
    }

    #[test]
    fn cir_segment_zero_fills_past_end() {
        // First path near the tail of a 1016-tap record: 16 real values,
        // then 34 zeros.
        let s = sample_with(&[], (0..1016).map(|i| 1.0 + i as f64).collect(), 1000);
        let seg = extract_cir_segment(&s, 50).unwrap();
        assert_eq!(seg.values.len(), 50);
        assert_eq!(seg.values[0], 1001.0);
        assert_eq!(seg.values[15], 1016.0);
        assert!(seg.values[16..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cir_segment_at_origin_len_120() {
        let s = sample_with(&[], (0..150).map(|i| i as f64).collect(), 0);
        let seg = extract_cir_segment(&s, 120).unwrap();
        assert_eq!(seg.values.len(), 120);
        assert_eq!(seg.values[119], 119.0);
    }

    #[test]
    fn unsupported_length_and_bad_fp_rejected() {
        let s = sample_with(&[], vec![0.0; 100], 0);
        assert!(extract_cir_segment(&s, 64).is_err());
        let s = sample_with(&[], vec![0.0; 100], 100);
        assert!(extract_cir_segment(&s, 50).is_err());
    }

    #[test]
    fn padding_inserts_zeros_at_block_boundaries() {
        let seg = CirSegment {
            values: vec![1.0; 50],
            segment_len: 50,
            padded: false,
        };
        let padded = pad_uniform(&seg, 10).unwrap();
        assert_eq!(padded.values.len(), 55);
        for idx in [10, 21, 32, 43, 54] {
            assert_eq!(padded.values[idx], 0.0, "index {idx}");
        }
        assert_eq!(padded.values.iter().filter(|&&v| v == 1.0).count(), 50);
    }

    #[test]
    fn padded_length_formula() {
        for (len, spacing, expect) in [(50, 10, 55), (120, 10, 132), (7, 3, 9), (9, 3, 12)] {
            let seg = CirSegment {
                values: vec![2.0; len],
                segment_len: 50,
                padded: false,
            };
            assert_eq!(pad_uniform(&seg, spacing).unwrap().values.len(), expect);
        }
    }

    #[test]
    fn unpad_inverts_pad() {
        let seg = CirSegment {
            values: (1..=120).map(|i| i as f64).collect(),
            segment_len: 120,
            padded: false,
        };
        let padded = pad_uniform(&seg, 10).unwrap();
        assert_eq!(padded.values.len(), 132);
        let back = unpad_uniform(&padded, 10).unwrap();
        assert_eq!(back, seg);
    }

    #[test]
    fn double_pad_and_zero_spacing_rejected() {
        let seg = CirSegment {
            values: vec![0.0; 50],
            segment_len: 50,
            padded: false,
        };
        assert!(pad_uniform(&seg, 0).is_err());
        let padded = pad_uniform(&seg, 10).unwrap();
        assert!(pad_uniform(&padded, 10).is_err());
        assert!(unpad_uniform(&seg, 10).is_err());
    }

    #[test]
    fn normalization_maps_bounds_and_midpoint() {
        let rows: Vec<Vec<f64>> = vec![vec![0.0, 10.0], vec![4.0, 30.0], vec![2.0, 20.0]];
        let stats = NormalizationStats::fit(rows.iter().map(|r| r.as_slice())).unwrap();
        assert_eq!(stats.lo, vec![0.0, 10.0]);
        assert_eq!(stats.hi, vec![4.0, 30.0]);
        let mid = stats.apply(&[2.0, 20.0]).unwrap();
        assert_abs_diff_eq!(mid[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(mid[1], 0.5, epsilon = 1e-12);
        assert_eq!(stats.apply(&[0.0, 10.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(stats.apply(&[4.0, 30.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn normalization_clamps_out_of_range() {
        let rows = [vec![0.0], vec![1.0]];
        let stats = NormalizationStats::fit(rows.iter().map(|r| r.as_slice())).unwrap();
        assert_eq!(stats.apply(&[-5.0]).unwrap(), vec![0.0]);
        assert_eq!(stats.apply(&[5.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn constant_dimension_maps_to_zero() {
        let rows = [vec![3.0, 1.0], vec![3.0, 2.0]];
        let stats = NormalizationStats::fit(rows.iter().map(|r| r.as_slice())).unwrap();
        assert_eq!(stats.apply(&[3.0, 1.5]).unwrap()[0], 0.0);
        assert_eq!(stats.apply(&[99.0, 1.5]).unwrap()[0], 0.0);
    }

    #[test]
    fn fit_rejects_empty_and_ragged() {
        assert!(NormalizationStats::fit(std::iter::empty()).is_err());
        let rows = [vec![1.0, 2.0], vec![1.0]];
        assert!(NormalizationStats::fit(rows.iter().map(|r| r.as_slice())).is_err());
    }

    #[test]
    fn apply_checks_dimension() {
        let rows = [vec![0.0, 1.0]];
        let stats = NormalizationStats::fit(rows.iter().map(|r| r.as_slice())).unwrap();
        assert!(stats.apply(&[0.5]).is_err());
    }

    #[test]
    fn shape_profile_fixes_the_mean_rate() {
        // Concentrated and diffuse patterns end up with the same budget.
        for values in [
            vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.2; 8],
            vec![0.9, 0.5, 0.3, 0.1, 0.05, 0.0, 0.4, 0.7],
        ] {
            let out = shape_profile(&values, 0.5, 0.3);
            let mean = out.iter().sum::<f64>() / out.len() as f64;
            // The single-hot pattern loses budget to the [0, 1] clamp;
            // everything else must hit the target exactly.
            if out.iter().all(|&v| v < 1.0) {
                assert_abs_diff_eq!(mean, 0.3, epsilon = 1e-12);
            } else {
                assert!(mean <= 0.3 + 1e-12);
            }
            assert!(out.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn shape_profile_gamma_flattens_contrast() {
        let values = [0.81, 0.04];
        let sqrt = shape_profile(&values, 0.5, 0.3);
        let linear = shape_profile(&values, 1.0, 0.3);
        // Same budget, but the compressed profile spends less of it on
        // the loud channel.
        assert!(sqrt[0] / sqrt[1] < linear[0] / linear[1]);
        assert_abs_diff_eq!(sqrt[0] / sqrt[1], 4.5, epsilon = 1e-12);
        assert_abs_diff_eq!(linear[0] / linear[1], 20.25, epsilon = 1e-12);
    }

    #[test]
    fn shape_profile_passes_zero_vectors_through() {
        assert_eq!(shape_profile(&[0.0, 0.0], 0.5, 0.3), vec![0.0, 0.0]);
        assert_eq!(shape_profile(&[], 0.5, 0.3), Vec::<f64>::new());
    }
}

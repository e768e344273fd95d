//! Self-contained synthetic dataset with a cleanly separable LOS/NLOS
//! structure, for end-to-end runs and CI where no measurement CSVs exist.
//!
//! Class 0 (LOS) records get a tall narrow first-path peak with a fast
//! exponential tail and low noise; class 1 (NLOS) records get a weak broad
//! peak, a slow tail, extra multipath echoes, and stronger noise. The RF
//! registers are derived from the generated CIR the way a receiver would
//! report them, so every feature family carries class signal.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::dataset::{Dataset, Sample, SourceFile};
use crate::error::{Error, Result};
use crate::seeds::derive_seed;

/// CIR length of every synthetic record.
pub const SYNTHETIC_CIR_LEN: usize = 200;

/// Domain-separation tag for per-sample RNG streams.
const TAG_SYNTH: u64 = 0x53_59_4e; // "SYN"

const REGISTER_COLUMNS: [&str; 9] = [
    "RANGE",
    "FP_IDX",
    "FP_AMP1",
    "FP_AMP2",
    "FP_AMP3",
    "STDEV_NOISE",
    "CIR_PWR",
    "MAX_NOISE",
    "RXPACC",
];

struct ClassProfile {
    peak_mean: f64,
    peak_sd: f64,
    peak_floor: f64,
    decay_tau: f64,
    noise_sd: f64,
    echoes: std::ops::RangeInclusive<usize>,
    range_lo: f64,
    range_hi: f64,
    rxpacc_mean: f64,
    rxpacc_sd: f64,
}

fn profile(label: u8) -> ClassProfile {
    if label == 0 {
        ClassProfile {
            peak_mean: 9000.0,
            peak_sd: 900.0,
            peak_floor: 5000.0,
            decay_tau: 2.5,
            noise_sd: 30.0,
            echoes: 0..=0,
            range_lo: 1.0,
            range_hi: 8.0,
            rxpacc_mean: 1024.0,
            rxpacc_sd: 30.0,
        }
    } else {
        ClassProfile {
            peak_mean: 3000.0,
            peak_sd: 700.0,
            peak_floor: 800.0,
            decay_tau: 14.0,
            noise_sd: 75.0,
            echoes: 2..=4,
            range_lo: 4.0,
            range_hi: 18.0,
            rxpacc_mean: 800.0,
            rxpacc_sd: 100.0,
        }
    }
}

fn generate_sample(id: usize, seed: u64) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, TAG_SYNTH, id as u64]));
    let label = (id % 2) as u8;
    let p = profile(label);

    let fp_idx = rng.random_range(40..70usize);
    let peak = Normal::new(p.peak_mean, p.peak_sd)
        .unwrap()
        .sample(&mut rng)
        .max(p.peak_floor);
    let noise = Normal::new(0.0, p.noise_sd).unwrap();

    let n_echoes = rng.random_range(p.echoes.clone());
    let echoes: Vec<(f64, f64)> = (0..n_echoes)
        .map(|_| {
            let center = fp_idx as f64 + rng.random_range(5.0..60.0);
            let amp = peak * rng.random_range(0.3..0.7);
            (center, amp)
        })
        .collect();

    let mut cir = Vec::with_capacity(SYNTHETIC_CIR_LEN);
    for i in 0..SYNTHETIC_CIR_LEN {
        let mut v = noise.sample(&mut rng).abs();
        if i >= fp_idx {
            v += peak * (-((i - fp_idx) as f64) / p.decay_tau).exp();
            for &(center, amp) in &echoes {
                let d = i as f64 - center;
                v += amp * (-d * d / 8.0).exp();
            }
        }
        cir.push(v.max(0.0).round());
    }

    let range = {
        let r = rng.random_range(p.range_lo..p.range_hi);
        (r * 100.0).round() / 100.0
    };
    let rxpacc = Normal::new(p.rxpacc_mean, p.rxpacc_sd)
        .unwrap()
        .sample(&mut rng)
        .clamp(100.0, 2048.0)
        .round();
    let stdev_noise = (p.noise_sd * rng.random_range(0.9..1.1)).round();
    let max_noise = cir[..fp_idx]
        .iter()
        .copied()
        .fold(0.0f64, f64::max)
        .round();
    let cir_pwr = (cir.iter().map(|v| v * v).sum::<f64>() / 131072.0).round();

    let mut rf_raw = BTreeMap::new();
    rf_raw.insert("RANGE".into(), range);
    rf_raw.insert("FP_IDX".into(), fp_idx as f64);
    rf_raw.insert("FP_AMP1".into(), cir[fp_idx]);
    rf_raw.insert("FP_AMP2".into(), cir[fp_idx + 1]);
    rf_raw.insert("FP_AMP3".into(), cir[fp_idx + 2]);
    rf_raw.insert("STDEV_NOISE".into(), stdev_noise);
    rf_raw.insert("CIR_PWR".into(), cir_pwr);
    rf_raw.insert("MAX_NOISE".into(), max_noise);
    rf_raw.insert("RXPACC".into(), rxpacc);

    Sample {
        id,
        label,
        rf_raw,
        cir,
        fp_idx,
    }
}

/// Generate `n` records (ids 0..n, classes alternating) from one seed.
/// Each record draws from its own derived RNG stream, so any subset is
/// reproducible independent of generation order.
pub fn generate_synthetic(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Config("synthetic dataset needs n >= 1".into()));
    }
    let samples: Vec<Sample> = (0..n).map(|id| generate_sample(id, seed)).collect();

    let mut header: Vec<String> = vec!["NLOS".into()];
    header.extend(REGISTER_COLUMNS.iter().map(|s| s.to_string()));
    header.extend((0..SYNTHETIC_CIR_LEN).map(|i| format!("CIR{i}")));

    let mut h = Sha256::new();
    for s in &samples {
        h.update([s.label]);
        h.update((s.fp_idx as u64).to_le_bytes());
        for v in s.rf_raw.values() {
            h.update(v.to_le_bytes());
        }
        for v in &s.cir {
            h.update(v.to_le_bytes());
        }
    }

    Ok(Dataset {
        samples,
        header,
        files: vec![SourceFile {
            path: PathBuf::from(format!("synthetic://n={n}&seed={seed}")),
            sha256: hex::encode(h.finalize()),
            rows: n,
        }],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{parse_dataset, write_csv, Schema};
    use crate::features::{extract_rf, RfSpec};
    use std::io::Write as _;

    #[test]
    fn generation_is_seed_deterministic() {
        let a = generate_synthetic(24, 7).unwrap();
        let b = generate_synthetic(24, 7).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.files[0].sha256, b.files[0].sha256);
        let c = generate_synthetic(24, 8).unwrap();
        assert_ne!(a.files[0].sha256, c.files[0].sha256);
    }

    #[test]
    fn prefix_generation_matches_larger_run() {
        // Per-sample RNG streams: the first k records of a bigger set are
        // the same records.
        let small = generate_synthetic(10, 3).unwrap();
        let large = generate_synthetic(30, 3).unwrap();
        assert_eq!(small.samples[..], large.samples[..10]);
    }

    #[test]
    fn classes_alternate_and_balance() {
        let d = generate_synthetic(100, 1).unwrap();
        let nlos = d.samples.iter().filter(|s| s.label == 1).count();
        assert_eq!(nlos, 50);
        assert_eq!(d.samples[0].label, 0);
        assert_eq!(d.samples[1].label, 1);
    }

    #[test]
    fn records_are_well_formed() {
        let d = generate_synthetic(60, 2).unwrap();
        for s in &d.samples {
            assert_eq!(s.cir.len(), SYNTHETIC_CIR_LEN);
            assert!((40..70).contains(&s.fp_idx));
            assert!(s.cir.iter().all(|&v| v >= 0.0 && v.is_finite()));
            assert_eq!(s.rf_raw.len(), REGISTER_COLUMNS.len());
            // The default RF spec must apply cleanly.
            extract_rf(s, &RfSpec::default()).unwrap();
        }
    }

    #[test]
    fn peak_amplitude_separates_classes() {
        // Independent of any network: a fixed threshold on the first-path
        // amplitude alone should classify nearly everything.
        let d = generate_synthetic(400, 5).unwrap();
        let correct = d
            .samples
            .iter()
            .filter(|s| {
                let predicted = if s.rf_raw["FP_AMP1"] < 6000.0 { 1 } else { 0 };
                predicted == s.label
            })
            .count();
        assert!(correct >= 380, "only {correct}/400 separable");
    }

    #[test]
    fn csv_round_trip_preserves_records() {
        let d = generate_synthetic(12, 9).unwrap();
        let mut buf = Vec::new();
        write_csv(&d, &Schema::default(), &mut buf).unwrap();
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(&buf).unwrap();
        let parsed = parse_dataset(f.path(), &Schema::default()).unwrap();
        assert_eq!(parsed.samples, d.samples);
    }
}

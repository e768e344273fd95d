//! Spike trains and Poisson rate coding.
//!
//! A scalar in [0, 1] becomes a Bernoulli spike probability per time step:
//! channel `n` with value `v` spikes independently each step with probability
//! `v * max_rate`. Each channel draws from its own ChaCha stream derived from
//! `(seed, channel)`, so encodings are reproducible and independent of how
//! channels are later concatenated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Binary spike raster over `steps` time steps × `channels` channels.
///
/// Stored as a per-step sorted list of active channel indices; at most one
/// spike per (step, channel).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeTrain {
    steps: usize,
    channels: usize,
    events: Vec<Vec<u32>>,
}

impl SpikeTrain {
    /// An all-silent train of the given shape.
    pub fn silent(steps: usize, channels: usize) -> Self {
        Self {
            steps,
            channels,
            events: vec![Vec::new(); steps],
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Record a spike at (t, n). Spikes must be pushed in ascending channel
    /// order within a step; duplicates are ignored.
    pub fn record(&mut self, t: usize, n: u32) {
        debug_assert!(t < self.steps && (n as usize) < self.channels);
        let row = &mut self.events[t];
        match row.last() {
            Some(&last) if last == n => {}
            Some(&last) => {
                debug_assert!(last < n, "spikes must be recorded in channel order");
                row.push(n);
            }
            None => row.push(n),
        }
    }

    /// Channels spiking at step t, ascending.
    pub fn active_at(&self, t: usize) -> &[u32] {
        &self.events[t]
    }

    pub fn has_spike(&self, t: usize, n: u32) -> bool {
        self.events[t].binary_search(&n).is_ok()
    }

    /// Per-channel spike totals over the whole window.
    pub fn channel_counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.channels];
        for row in &self.events {
            for &n in row {
                counts[n as usize] += 1;
            }
        }
        counts
    }

    pub fn total_spikes(&self) -> u64 {
        self.events.iter().map(|row| row.len() as u64).sum()
    }

    /// Concatenate along the channel axis: `self` keeps channels
    /// [0, self.channels), `other` is shifted by `self.channels`. Timing is
    /// preserved; step counts must match.
    pub fn concat(&self, other: &SpikeTrain) -> Result<SpikeTrain> {
        if self.steps != other.steps {
            return Err(Error::Shape(format!(
                "cannot concatenate spike trains with {} and {} steps",
                self.steps, other.steps
            )));
        }
        let offset = self.channels as u32;
        let events = self
            .events
            .iter()
            .zip(&other.events)
            .map(|(a, b)| {
                let mut row = Vec::with_capacity(a.len() + b.len());
                row.extend_from_slice(a);
                row.extend(b.iter().map(|&n| n + offset));
                row
            })
            .collect();
        Ok(SpikeTrain {
            steps: self.steps,
            channels: self.channels + other.channels,
            events,
        })
    }

    /// Event-list text form for debugging: one `t n` pair per line, ordered
    /// by step then channel.
    pub fn to_event_lines(&self) -> String {
        let mut out = String::new();
        for (t, row) in self.events.iter().enumerate() {
            for &n in row {
                out.push_str(&format!("{t} {n}\n"));
            }
        }
        out
    }

    /// Parse the event-list text form back into a train of the given shape.
    pub fn from_event_lines(text: &str, steps: usize, channels: usize) -> Result<SpikeTrain> {
        let mut train = SpikeTrain::silent(steps, channels);
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let (t, n) = match (it.next(), it.next(), it.next()) {
                (Some(t), Some(n), None) => (t, n),
                _ => {
                    return Err(Error::Format(format!(
                        "event line {}: expected 't n', got '{line}'",
                        lineno + 1
                    )))
                }
            };
            let t: usize = t
                .parse()
                .map_err(|_| Error::Format(format!("event line {}: bad step '{t}'", lineno + 1)))?;
            let n: u32 = n
                .parse()
                .map_err(|_| Error::Format(format!("event line {}: bad channel '{n}'", lineno + 1)))?;
            if t >= steps || n as usize >= channels {
                return Err(Error::Format(format!(
                    "event line {}: ({t}, {n}) outside {steps}×{channels}",
                    lineno + 1
                )));
            }
            let row = &mut train.events[t];
            match row.binary_search(&n) {
                Ok(_) => {}
                Err(pos) => row.insert(pos, n),
            }
        }
        Ok(train)
    }
}

/// Rate-encoder settings: window length, peak per-step spike probability,
/// and the RNG seed.
#[derive(Debug, Clone, Copy)]
pub struct EncoderConfig {
    pub steps: usize,
    pub max_rate: f64,
    pub seed: u64,
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("encoder steps must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.max_rate) {
            return Err(Error::Config(format!(
                "encoder max_rate must be in [0, 1], got {}",
                self.max_rate
            )));
        }
        Ok(())
    }
}

/// Rate-encode a [0, 1] vector: channel `n` spikes each step with probability
/// `values[n] * max_rate`. Deterministic for a fixed seed.
pub fn encode_rate(values: &[f64], cfg: &EncoderConfig) -> Result<SpikeTrain> {
    cfg.validate()?;
    for (n, &v) in values.iter().enumerate() {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::Encoding(format!(
                "channel {n}: value {v} outside [0, 1] (normalizer contract violated)"
            )));
        }
    }
    let mut train = SpikeTrain::silent(cfg.steps, values.len());
    // One independent stream per channel so that encodings do not depend on
    // channel count or concatenation order.
    for (n, &v) in values.iter().enumerate() {
        let p = v * cfg.max_rate;
        if p == 0.0 {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(n as u64);
        for t in 0..cfg.steps {
            // random::<f64>() is in [0, 1), so p == 1 fires on every step.
            if rng.random::<f64>() < p {
                train.events[t].push(n as u32);
            }
        }
    }
    Ok(train)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(steps: usize, max_rate: f64, seed: u64) -> EncoderConfig {
        EncoderConfig {
            steps,
            max_rate,
            seed,
        }
    }

    #[test]
    fn zero_value_is_silent() {
        let train = encode_rate(&[0.0, 0.0], &cfg(500, 1.0, 3)).unwrap();
        assert_eq!(train.total_spikes(), 0);
    }

    #[test]
    fn saturated_value_fires_every_step() {
        let train = encode_rate(&[1.0], &cfg(250, 1.0, 9)).unwrap();
        assert_eq!(train.channel_counts(), vec![250]);
    }

    #[test]
    fn half_rate_within_binomial_bounds() {
        // Binomial(1000, 0.5): mean 500, sigma = sqrt(250) ~ 15.8.
        let train = encode_rate(&[0.5], &cfg(1000, 1.0, 42)).unwrap();
        let count = train.channel_counts()[0] as f64;
        assert!((count - 500.0).abs() < 3.0 * 250f64.sqrt(), "count {count}");
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = encode_rate(&[0.3, 0.7, 0.1], &cfg(200, 0.5, 7)).unwrap();
        let b = encode_rate(&[0.3, 0.7, 0.1], &cfg(200, 0.5, 7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fixed_seed_counts_monotone_in_value() {
        // With a shared per-channel stream, u < p is pointwise monotone in p.
        let mut last = 0;
        for &v in &[0.0, 0.25, 0.5, 0.75, 1.0] {
            let train = encode_rate(&[v], &cfg(400, 1.0, 11)).unwrap();
            let count = train.channel_counts()[0];
            assert!(count >= last, "count dropped at value {v}");
            last = count;
        }
    }

    #[test]
    fn channel_stream_independent_of_vector_length(){
        // Channel 0 must encode identically whether or not channel 1 exists.
        let solo = encode_rate(&[0.4], &cfg(100, 0.5, 13)).unwrap();
        let pair = encode_rate(&[0.4, 0.9], &cfg(100, 0.5, 13)).unwrap();
        for t in 0..100 {
            assert_eq!(solo.has_spike(t, 0), pair.has_spike(t, 0));
        }
    }

    #[test]
    fn rejects_out_of_range_input() {
        assert!(encode_rate(&[1.2], &cfg(10, 1.0, 0)).is_err());
        assert!(encode_rate(&[-0.1], &cfg(10, 1.0, 0)).is_err());
        assert!(encode_rate(&[f64::NAN], &cfg(10, 1.0, 0)).is_err());
    }

    #[test]
    fn concat_offsets_channels() {
        let mut a = SpikeTrain::silent(5, 3);
        a.record(1, 2);
        let mut b = SpikeTrain::silent(5, 4);
        b.record(2, 1);
        let joined = a.concat(&b).unwrap();
        assert_eq!(joined.channels(), 7);
        assert_eq!(joined.steps(), 5);
        assert!(joined.has_spike(1, 2));
        assert!(joined.has_spike(2, 4)); // b's channel 1 lands at 3 + 1
        assert_eq!(joined.total_spikes(), 2);
    }

    #[test]
    fn concat_with_empty_is_identity() {
        let train = encode_rate(&[0.5, 0.5], &cfg(20, 1.0, 5)).unwrap();
        let empty = SpikeTrain::silent(20, 0);
        let joined = train.concat(&empty).unwrap();
        assert_eq!(joined, train);
    }

    #[test]
    fn concat_rejects_step_mismatch() {
        let a = SpikeTrain::silent(5, 1);
        let b = SpikeTrain::silent(6, 1);
        assert!(a.concat(&b).is_err());
    }

    #[test]
    fn event_lines_round_trip() {
        let train = encode_rate(&[0.5, 0.2, 0.9], &cfg(30, 0.8, 21)).unwrap();
        let text = train.to_event_lines();
        let back = SpikeTrain::from_event_lines(&text, 30, 3).unwrap();
        assert_eq!(back, train);
    }
}

//! Detection channels: spectral/polarization filtering, efficiency,
//! timing jitter, dark counts and dead time.
//!
//! Each channel models one single-photon detector behind a spectral
//! filter. An emitted photon reaches channel `c` when its line passes
//! the channel's line filter and its polarization passes the
//! polarization filter; it is then registered with probability
//! `efficiency`, displaced by Gaussian timing jitter, and finally
//! thinned by a non-paralyzable dead time. Dark counts arrive as a
//! homogeneous Poisson process over the full acquisition span.
//!
//! Every channel draws from its own RNG seeded by the master seed and
//! the channel number, so adding, removing or reordering channels never
//! changes another channel's tags.

use super::{CompiledCascade, SimulationOutput, LINE_XX_GROUND, LINE_X_BRIGHT};
use crate::correlator::{TagStream, TimeTagRecord};
use crate::error::{Error, Result};
use crate::levels::Polarization;
use crate::seeding::{sub_seed, Stream};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

/// Gaussian FWHM divided by its standard deviation.
const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

/// One detection channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorChannel {
    /// Channel number in the output tag stream.
    pub channel: u8,
    /// Line ids accepted by the spectral filter; `None` accepts all.
    #[serde(default)]
    pub line_filter: Option<Vec<String>>,
    /// Accepted polarization; `None` accepts both.
    #[serde(default)]
    pub polarization_filter: Option<Polarization>,
    /// Detection probability per arriving photon.
    pub efficiency: f64,
    /// Full width at half maximum of the Gaussian timing jitter.
    #[serde(default)]
    pub jitter_fwhm_ps: f64,
    #[serde(default)]
    pub dark_count_rate_hz: f64,
    /// Non-paralyzable dead time; a tag closer than this to the last
    /// accepted tag on the same channel is dropped.
    #[serde(default)]
    pub dead_time_ps: u64,
}

impl DetectorChannel {
    /// A noise-free unit-efficiency channel accepting the given lines.
    pub fn ideal(channel: u8, line_ids: &[&str]) -> DetectorChannel {
        DetectorChannel {
            channel,
            line_filter: Some(line_ids.iter().map(|s| s.to_string()).collect()),
            polarization_filter: None,
            efficiency: 1.0,
            jitter_fwhm_ps: 0.0,
            dark_count_rate_hz: 0.0,
            dead_time_ps: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.efficiency.is_finite() || !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::parameter(format!(
                "channel {}: efficiency must lie in [0, 1], got {}",
                self.channel, self.efficiency
            )));
        }
        if !self.jitter_fwhm_ps.is_finite() || self.jitter_fwhm_ps < 0.0 {
            return Err(Error::parameter(format!(
                "channel {}: jitter FWHM must be non-negative",
                self.channel
            )));
        }
        if !self.dark_count_rate_hz.is_finite() || self.dark_count_rate_hz < 0.0 {
            return Err(Error::parameter(format!(
                "channel {}: dark count rate must be non-negative",
                self.channel
            )));
        }
        if self.polarization_filter == Some(Polarization::Unpolarized) {
            return Err(Error::parameter(format!(
                "channel {}: polarization filter must be H or V",
                self.channel
            )));
        }
        if let Some(filter) = &self.line_filter {
            if filter.is_empty() {
                return Err(Error::config(format!(
                    "channel {}: empty line filter accepts nothing; use no filter to accept all",
                    self.channel
                )));
            }
        }
        Ok(())
    }
}

/// The canonical three-arm setup: the triplet-quartet lines, the ground
/// biexciton line and the exciton line, at typical fibre-coupled
/// system efficiencies and 400 ps detector jitter.
pub fn default_detector_channels() -> Vec<DetectorChannel> {
    let channel = |channel, lines: &[&str], efficiency| DetectorChannel {
        channel,
        line_filter: Some(lines.iter().map(|s| s.to_string()).collect()),
        polarization_filter: None,
        efficiency,
        jitter_fwhm_ps: 400.0,
        dark_count_rate_hz: 0.0,
        dead_time_ps: 0,
    };
    vec![
        channel(
            0,
            &["xxx_tt2_h1", "xxx_tt2_v1", "xxx_tt2_h2", "xxx_tt2_v2"],
            1.0 / 600.0,
        ),
        channel(1, &[LINE_XX_GROUND], 1.0 / 750.0),
        channel(2, &[LINE_X_BRIGHT], 1.0 / 1000.0),
    ]
}

/// Runs the detection chain over simulated emission, producing one
/// merged, time-sorted tag stream.
pub fn detect(
    compiled: &CompiledCascade,
    output: &SimulationOutput,
    channels: &[DetectorChannel],
    master_seed: u64,
) -> Result<TagStream> {
    if channels.is_empty() {
        return Err(Error::config("no detector channels configured".to_string()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for ch in channels {
        ch.validate()?;
        if !seen.insert(ch.channel) {
            return Err(Error::config(format!(
                "channel number {} used twice",
                ch.channel
            )));
        }
    }

    let span_ps = output.span_ps();
    let mut records: Vec<TimeTagRecord> = Vec::new();
    for ch in channels {
        // Resolve the line filter against the compiled table once.
        let line_mask: Option<Vec<bool>> = match &ch.line_filter {
            None => None,
            Some(names) => {
                let mut mask = vec![false; compiled.lines().len()];
                for name in names {
                    let idx = compiled.line_index(name).ok_or_else(|| {
                        Error::config(format!(
                            "channel {}: unknown line id {name:?} in filter",
                            ch.channel
                        ))
                    })?;
                    mask[idx as usize] = true;
                }
                Some(mask)
            }
        };

        let mut rng =
            ChaCha8Rng::seed_from_u64(sub_seed(master_seed, Stream::Detector, ch.channel as u64));
        let mut tags: Vec<u64> = Vec::new();
        let jitter = if ch.jitter_fwhm_ps > 0.0 {
            Some(Normal::new(0.0, ch.jitter_fwhm_ps / FWHM_PER_SIGMA).expect("validated sigma"))
        } else {
            None
        };
        for event in &output.events {
            if let Some(mask) = &line_mask {
                if !mask[event.line_index as usize] {
                    continue;
                }
            }
            if let Some(pol) = ch.polarization_filter {
                if event.polarization != pol {
                    continue;
                }
            }
            if ch.efficiency < 1.0 && !rng.random_bool(ch.efficiency) {
                continue;
            }
            let t = match jitter {
                Some(n) => {
                    let shifted = event.time_ps as i64 + n.sample(&mut rng).round() as i64;
                    shifted.max(0) as u64
                }
                None => event.time_ps,
            };
            tags.push(t);
        }

        if ch.dark_count_rate_hz > 0.0 && span_ps > 0 {
            let mean = ch.dark_count_rate_hz * span_ps as f64 * 1e-12;
            let n = Poisson::new(mean).expect("validated mean").sample(&mut rng) as u64;
            for _ in 0..n {
                tags.push(rng.random_range(0..span_ps));
            }
        }

        tags.sort_unstable();
        let mut last_accepted: Option<u64> = None;
        for t in tags {
            if let Some(last) = last_accepted {
                if t - last < ch.dead_time_ps {
                    continue;
                }
            }
            last_accepted = Some(t);
            records.push(TimeTagRecord {
                channel: ch.channel,
                time_ps: t,
            });
        }
    }

    records.sort_unstable_by_key(|r| (r.time_ps, r.channel));
    let channel_count = channels.iter().map(|c| c.channel as u16).max().unwrap() + 1;
    TagStream::new(channel_count, records)
}

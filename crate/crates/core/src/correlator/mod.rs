//! Multi-channel photon time-tag correlation analysis.
//!
//! Operates on streams of `(channel, time)` tags on a 1 ps integer grid.
//! Second- and third-order correlations are multi-stop: every pair
//! (triple) whose delays fall inside the requested windows is counted,
//! not just nearest neighbours. Histograms are normalized by the
//! accidental-coincidence expectation
//!
//! ```text
//! g2[k]    = raw[k]    / (r_a * r_b * T * dt)
//! g3[i,j]  = raw[i,j]  / (r_1 * r_2 * r_3 * T * dt1 * dt2)
//! ```
//!
//! where `r` are singles rates and `T` the total observation time, so an
//! uncorrelated (Poissonian) input converges to 1 everywhere.
//!
//! Counting kernels come in two interchangeable flavours: a streaming
//! sorted-merge kernel (chunk-parallel, used by default) and a
//! brute-force kernel kept deliberately simple so the fast path can be
//! verified against it on the same input (`Kernel::Naive`). Both produce
//! identical integer counts.

mod events;
mod io;
mod kernels;

pub use events::{count_events, estimate_efficiency, EfficiencyEstimate, EventCounts};
pub use io::{
    read_tags, read_tags_from, write_hist1d_csv, write_hist2d_csv, write_tags, write_tags_to,
    TagFormat, TTG1_HEADER_LEN, TTG1_RECORD_LEN,
};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// One detected photon: channel index and arrival time in picoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeTagRecord {
    pub channel: u8,
    pub time_ps: u64,
}

/// A time-sorted multi-channel tag stream.
#[derive(Debug, Clone)]
pub struct TagStream {
    channel_count: u16,
    records: Vec<TimeTagRecord>,
    per_channel: Vec<u64>,
}

impl TagStream {
    /// Builds a stream from records sorted by time (non-decreasing).
    ///
    /// Channels must lie below `channel_count`. Fails with a data error
    /// naming the offending record index otherwise.
    pub fn new(channel_count: u16, records: Vec<TimeTagRecord>) -> Result<Self> {
        if channel_count == 0 {
            return Err(Error::parameter("channel_count must be at least 1"));
        }
        let mut per_channel = vec![0u64; channel_count as usize];
        let mut prev = 0u64;
        for (i, r) in records.iter().enumerate() {
            if (r.channel as u16) >= channel_count {
                return Err(Error::data(
                    format!("record {i}"),
                    format!("channel {} out of range (< {channel_count})", r.channel),
                ));
            }
            if r.time_ps < prev {
                return Err(Error::data(
                    format!("record {i}"),
                    format!("time regression: {} ps after {} ps", r.time_ps, prev),
                ));
            }
            if r.time_ps > i64::MAX as u64 {
                return Err(Error::data(
                    format!("record {i}"),
                    "timestamp exceeds the supported range".to_string(),
                ));
            }
            prev = r.time_ps;
            per_channel[r.channel as usize] += 1;
        }
        Ok(TagStream {
            channel_count,
            records,
            per_channel,
        })
    }

    pub fn channel_count(&self) -> u16 {
        self.channel_count
    }

    pub fn records(&self) -> &[TimeTagRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Number of tags on one channel.
    pub fn singles(&self, channel: u8) -> u64 {
        self.per_channel
            .get(channel as usize)
            .copied()
            .unwrap_or(0)
    }

    /// Observation time in seconds: span from first to last tag of the
    /// merged stream.
    pub fn total_time_s(&self) -> f64 {
        match (self.records.first(), self.records.last()) {
            (Some(a), Some(b)) => (b.time_ps - a.time_ps) as f64 * 1e-12,
            _ => 0.0,
        }
    }

    /// Sorted times of one channel, as signed picoseconds.
    pub fn channel_times(&self, channel: u8) -> Vec<i64> {
        self.records
            .iter()
            .filter(|r| r.channel == channel)
            .map(|r| r.time_ps as i64)
            .collect()
    }

    fn check_channel(&self, channel: u8) -> Result<()> {
        if (channel as u16) < self.channel_count {
            Ok(())
        } else {
            Err(Error::parameter(format!(
                "channel {channel} out of range: stream has {} channels",
                self.channel_count
            )))
        }
    }
}

/// Upper limit on histogram bins per axis and on 2-D cells in total.
pub const MAX_BINS: i64 = 1 << 24;

/// A uniform delay axis: half-open window `[tau_min, tau_max)` split into
/// bins of equal width. A delay exactly at `tau_max` is not counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinningSpec {
    pub tau_min_ps: i64,
    pub tau_max_ps: i64,
    pub bin_width_ps: i64,
}

impl BinningSpec {
    pub fn new(tau_min_ps: i64, tau_max_ps: i64, bin_width_ps: i64) -> Result<Self> {
        let spec = BinningSpec {
            tau_min_ps,
            tau_max_ps,
            bin_width_ps,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Symmetric window `[-half_window, +half_window)`.
    pub fn symmetric(half_window_ps: i64, bin_width_ps: i64) -> Result<Self> {
        Self::new(-half_window_ps, half_window_ps, bin_width_ps)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bin_width_ps <= 0 {
            return Err(Error::parameter("bin width must be positive"));
        }
        if self.tau_min_ps >= self.tau_max_ps {
            return Err(Error::parameter("window must satisfy tau_min < tau_max"));
        }
        let span = self.tau_max_ps - self.tau_min_ps;
        if span % self.bin_width_ps != 0 {
            return Err(Error::parameter(format!(
                "window span {span} ps is not a multiple of the bin width {} ps",
                self.bin_width_ps
            )));
        }
        if span / self.bin_width_ps > MAX_BINS {
            return Err(Error::parameter(format!(
                "bin count {} exceeds the cap of {MAX_BINS}",
                span / self.bin_width_ps
            )));
        }
        Ok(())
    }

    pub fn bin_count(&self) -> usize {
        ((self.tau_max_ps - self.tau_min_ps) / self.bin_width_ps) as usize
    }

    /// Bin index for a delay, or None when it falls outside the window.
    #[inline]
    pub fn bin_index(&self, tau_ps: i64) -> Option<usize> {
        if tau_ps < self.tau_min_ps || tau_ps >= self.tau_max_ps {
            None
        } else {
            Some(((tau_ps - self.tau_min_ps) / self.bin_width_ps) as usize)
        }
    }

    /// Center of bin `k` in picoseconds.
    pub fn bin_center(&self, k: usize) -> f64 {
        self.tau_min_ps as f64 + (k as f64 + 0.5) * self.bin_width_ps as f64
    }

    pub fn bin_width_s(&self) -> f64 {
        self.bin_width_ps as f64 * 1e-12
    }
}

/// Which counting implementation to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    /// Sorted-merge sweep, chunk-parallel. The production path.
    #[default]
    Streaming,
    /// Brute-force reference kernel for verification.
    Naive,
}

/// A second-order correlation histogram.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Hist1D {
    pub axis: BinningSpec,
    pub channel_pair: (u8, u8),
    pub raw_counts: Vec<u64>,
    /// Per-bin accidental-coincidence expectation `r_a * r_b * T * dt`.
    pub normalization: Vec<f64>,
    pub g2: Vec<f64>,
    /// Poisson standard error of `g2`: `sqrt(raw) / normalization`.
    pub poisson_err: Vec<f64>,
    pub singles_rates_hz: (f64, f64),
    pub total_time_s: f64,
}

/// A third-order correlation histogram over `(tau1, tau2)`, stored
/// row-major: cell `(i, j)` of shape `(n1, n2)` lives at `i * n2 + j`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Hist2D {
    pub axis1: BinningSpec,
    pub axis2: BinningSpec,
    pub channels: (u8, u8, u8),
    pub raw_counts: Vec<u64>,
    /// Accidental expectation per cell, `r_1 * r_2 * r_3 * T * dt1 * dt2`
    /// (uniform across the histogram).
    pub normalization: f64,
    pub g3: Vec<f64>,
    pub singles_rates_hz: (f64, f64, f64),
    pub total_time_s: f64,
}

impl Hist2D {
    pub fn shape(&self) -> (usize, usize) {
        (self.axis1.bin_count(), self.axis2.bin_count())
    }

    pub fn raw(&self, i: usize, j: usize) -> u64 {
        self.raw_counts[i * self.axis2.bin_count() + j]
    }

    pub fn g3_at(&self, i: usize, j: usize) -> f64 {
        self.g3[i * self.axis2.bin_count() + j]
    }

    /// Poisson standard error of one g3 cell.
    pub fn poisson_err(&self, i: usize, j: usize) -> f64 {
        (self.raw(i, j) as f64).sqrt() / self.normalization
    }
}

/// Axis to average over when reducing a g3 histogram to a g2 estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginalAxis {
    Tau1,
    Tau2,
}

fn singles_rate(tags: &TagStream, channel: u8, total_time_s: f64) -> Result<f64> {
    let n = tags.singles(channel);
    if n == 0 {
        return Err(Error::Normalization(format!(
            "channel {channel} has no tags"
        )));
    }
    if total_time_s <= 0.0 {
        return Err(Error::Normalization(
            "observation time is zero; need tags at two distinct times".to_string(),
        ));
    }
    Ok(n as f64 / total_time_s)
}

/// Computes the normalized second-order correlation between two channels.
pub fn g2(tags: &TagStream, ch_a: u8, ch_b: u8, spec: &BinningSpec) -> Result<Hist1D> {
    g2_with_kernel(tags, ch_a, ch_b, spec, Kernel::Streaming)
}

pub fn g2_with_kernel(
    tags: &TagStream,
    ch_a: u8,
    ch_b: u8,
    spec: &BinningSpec,
    kernel: Kernel,
) -> Result<Hist1D> {
    spec.validate()?;
    tags.check_channel(ch_a)?;
    tags.check_channel(ch_b)?;
    if ch_a == ch_b {
        return Err(Error::parameter(
            "g2 requires two distinct channels".to_string(),
        ));
    }
    let total_time_s = tags.total_time_s();
    let r_a = singles_rate(tags, ch_a, total_time_s)?;
    let r_b = singles_rate(tags, ch_b, total_time_s)?;

    let a = tags.channel_times(ch_a);
    let b = tags.channel_times(ch_b);
    let raw_counts = match kernel {
        Kernel::Streaming => kernels::pair_counts_streaming(&a, &b, spec),
        Kernel::Naive => kernels::pair_counts_naive(&a, &b, spec),
    };

    let per_bin = r_a * r_b * total_time_s * spec.bin_width_s();
    let normalization = vec![per_bin; spec.bin_count()];
    let g2 = raw_counts.iter().map(|&c| c as f64 / per_bin).collect();
    let poisson_err = raw_counts
        .iter()
        .map(|&c| (c as f64).sqrt() / per_bin)
        .collect();
    Ok(Hist1D {
        axis: *spec,
        channel_pair: (ch_a, ch_b),
        raw_counts,
        normalization,
        g2,
        poisson_err,
        singles_rates_hz: (r_a, r_b),
        total_time_s,
    })
}

/// Computes the normalized third-order correlation of three channels.
///
/// Cell `(i, j)` counts ordered triples with `t2 - t1` in bin `i` of
/// `axis1` and `t3 - t1` in bin `j` of `axis2`.
pub fn g3(
    tags: &TagStream,
    channels: (u8, u8, u8),
    axis1: &BinningSpec,
    axis2: &BinningSpec,
) -> Result<Hist2D> {
    g3_with_kernel(tags, channels, axis1, axis2, Kernel::Streaming)
}

pub fn g3_with_kernel(
    tags: &TagStream,
    channels: (u8, u8, u8),
    axis1: &BinningSpec,
    axis2: &BinningSpec,
    kernel: Kernel,
) -> Result<Hist2D> {
    axis1.validate()?;
    axis2.validate()?;
    let (c1, c2, c3) = channels;
    for ch in [c1, c2, c3] {
        tags.check_channel(ch)?;
    }
    if c1 == c2 || c1 == c3 || c2 == c3 {
        return Err(Error::parameter(
            "g3 requires three distinct channels".to_string(),
        ));
    }
    let cells = axis1.bin_count() as i64 * axis2.bin_count() as i64;
    if cells > MAX_BINS {
        return Err(Error::parameter(format!(
            "g3 grid has {cells} cells, exceeding the cap of {MAX_BINS}"
        )));
    }
    let total_time_s = tags.total_time_s();
    let r1 = singles_rate(tags, c1, total_time_s)?;
    let r2 = singles_rate(tags, c2, total_time_s)?;
    let r3 = singles_rate(tags, c3, total_time_s)?;

    let t1 = tags.channel_times(c1);
    let t2 = tags.channel_times(c2);
    let t3 = tags.channel_times(c3);
    let raw_counts = match kernel {
        Kernel::Streaming => kernels::triple_counts_streaming(&t1, &t2, &t3, axis1, axis2),
        Kernel::Naive => kernels::triple_counts_naive(&t1, &t2, &t3, axis1, axis2),
    };

    let normalization = r1 * r2 * r3 * total_time_s * axis1.bin_width_s() * axis2.bin_width_s();
    let g3 = raw_counts
        .iter()
        .map(|&c| c as f64 / normalization)
        .collect();
    Ok(Hist2D {
        axis1: *axis1,
        axis2: *axis2,
        channels,
        raw_counts,
        normalization,
        g3,
        singles_rates_hz: (r1, r2, r3),
        total_time_s,
    })
}

/// Averages a g3 histogram over one delay axis with uniform cell weights.
///
/// Averaging over `tau2` estimates the pair correlation `g2(c1, c2)` as a
/// function of `tau1`; averaging over `tau1` estimates `g2(c1, c3)` as a
/// function of `tau2`. A single-bin axis returns that row or column
/// unchanged. Errors propagate as independent Poisson counts.
pub fn marginalize_g3(h: &Hist2D, over: MarginalAxis) -> Hist1D {
    let (n1, n2) = h.shape();
    let (axis, pair, rates, kept, reduced) = match over {
        MarginalAxis::Tau2 => (
            h.axis1,
            (h.channels.0, h.channels.1),
            (h.singles_rates_hz.0, h.singles_rates_hz.1),
            n1,
            n2,
        ),
        MarginalAxis::Tau1 => (
            h.axis2,
            (h.channels.0, h.channels.2),
            (h.singles_rates_hz.0, h.singles_rates_hz.2),
            n2,
            n1,
        ),
    };
    let mut raw_counts = vec![0u64; kept];
    for i in 0..n1 {
        for j in 0..n2 {
            let k = match over {
                MarginalAxis::Tau2 => i,
                MarginalAxis::Tau1 => j,
            };
            raw_counts[k] += h.raw(i, j);
        }
    }
    let per_bin = h.normalization * reduced as f64;
    let normalization = vec![per_bin; kept];
    let g2 = raw_counts.iter().map(|&c| c as f64 / per_bin).collect();
    let poisson_err = raw_counts
        .iter()
        .map(|&c| (c as f64).sqrt() / per_bin)
        .collect();
    Hist1D {
        axis,
        channel_pair: pair,
        raw_counts,
        normalization,
        g2,
        poisson_err,
        singles_rates_hz: rates,
        total_time_s: h.total_time_s,
    }
}

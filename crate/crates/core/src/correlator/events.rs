//! Coincidence-event clustering and detection-efficiency estimation.
//!
//! Tags are grouped into events by a fixed window anchored at the first
//! tag of each cluster: a cluster contains every tag with
//! `t - t_first < window` (half-open), and the next cluster starts at the
//! first tag at or beyond the window edge. Events are classified by the
//! set of distinct channels present.
//!
//! With `N_123` triple events and `N_jk` exactly-pair events, the
//! detection efficiency of the remaining channel is
//! `eta_i = N_123 / (N_jk + N_123)`: of all cascades whose other two
//! photons were seen, the fraction where photon `i` was seen as well.

use super::TagStream;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Tally of coincidence events between three designated channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    /// Total clusters, including single-channel ones.
    pub total_events: u64,
    /// Clusters whose channel set is exactly the designated pair.
    pub n12: u64,
    pub n13: u64,
    pub n23: u64,
    /// Clusters containing all three designated channels.
    pub n123: u64,
    pub window_ps: u64,
}

impl EventCounts {
    /// Fraction of multi-photon events that are two-photon.
    pub fn two_photon_fraction(&self) -> f64 {
        let pairs = self.n12 + self.n13 + self.n23;
        let multi = pairs + self.n123;
        if multi == 0 {
            return 0.0;
        }
        pairs as f64 / multi as f64
    }
}

/// Per-channel detection efficiencies recovered from coincidence ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyEstimate {
    /// `eta[i]` estimates the efficiency of designated channel `i`.
    pub eta: [f64; 3],
    /// Binomial standard errors `sqrt(eta * (1 - eta) / N)` with
    /// `N = N_jk + N_123` trials.
    pub err: [f64; 3],
}

/// Clusters a tag stream into events and tallies pair and triple
/// coincidences between the three designated channels.
///
/// Tags on other channels are ignored. The window must be shorter than
/// the excitation cycle period so one event cannot swallow the next
/// cycle's photons.
pub fn count_events(
    tags: &TagStream,
    channels: [u8; 3],
    window_ps: u64,
    cycle_period_ps: u64,
) -> Result<EventCounts> {
    if window_ps == 0 {
        return Err(Error::parameter("event window must be positive"));
    }
    if window_ps >= cycle_period_ps {
        return Err(Error::parameter(format!(
            "event window {window_ps} ps must be shorter than the cycle period {cycle_period_ps} ps"
        )));
    }
    if channels[0] == channels[1] || channels[0] == channels[2] || channels[1] == channels[2] {
        return Err(Error::parameter("designated channels must be distinct"));
    }

    let mask_of = |ch: u8| -> Option<u8> {
        channels
            .iter()
            .position(|&c| c == ch)
            .map(|i| 1u8 << i)
    };

    let mut counts = EventCounts {
        total_events: 0,
        n12: 0,
        n13: 0,
        n23: 0,
        n123: 0,
        window_ps,
    };

    let mut iter = tags
        .records()
        .iter()
        .filter_map(|r| mask_of(r.channel).map(|m| (r.time_ps, m)))
        .peekable();

    while let Some((start, first_mask)) = iter.next() {
        let mut mask = first_mask;
        while let Some(&(t, m)) = iter.peek() {
            if t - start < window_ps {
                mask |= m;
                iter.next();
            } else {
                break;
            }
        }
        counts.total_events += 1;
        match mask {
            0b011 => counts.n12 += 1,
            0b101 => counts.n13 += 1,
            0b110 => counts.n23 += 1,
            0b111 => counts.n123 += 1,
            _ => {}
        }
    }
    Ok(counts)
}

/// Recovers per-channel efficiencies from coincidence ratios.
///
/// The trial count for channel `i` is every cluster where the other two
/// channels fired, whether or not `i` did: `N_jk + N_123`. Dividing by
/// the exclusive pair count instead would inflate the estimate by
/// `1 / (1 - eta)`.
pub fn estimate_efficiency(counts: &EventCounts) -> Result<EfficiencyEstimate> {
    let pair_for = [
        (counts.n23, "n23"),
        (counts.n13, "n13"),
        (counts.n12, "n12"),
    ];
    let mut eta = [0.0; 3];
    let mut err = [0.0; 3];
    for (i, &(n_jk, name)) in pair_for.iter().enumerate() {
        let trials = n_jk + counts.n123;
        if trials == 0 {
            return Err(Error::data(
                format!("channel {i}"),
                format!("efficiency undefined: {name} and n123 are both zero"),
            ));
        }
        let e = counts.n123 as f64 / trials as f64;
        eta[i] = e;
        err[i] = (e * (1.0 - e) / trials as f64).sqrt();
    }
    Ok(EfficiencyEstimate { eta, err })
}

//! Exact per-cycle coincidence outcome probabilities and a matching
//! categorical sampler.
//!
//! Event-level simulation becomes infeasible when per-channel
//! efficiencies drop to the per-mille scale: recovering ten thousand
//! triple events then takes on the order of 1e13 excitation cycles.
//! This module walks the cascade's small outcome tree instead and
//! computes, in closed form, the probability that one cycle produces a
//! click on each subset of three designated channels. Coincidence
//! tallies for any number of cycles can then be drawn exactly from the
//! resulting multinomial, reproducing what per-event clustering would
//! count.
//!
//! The closed form assumes what per-cycle clustering assumes: the event
//! window covers a whole cascade but not two (no dark counts, and dead
//! time only matters within one cycle, where the disjoint line filters
//! of a three-arm setup make double hits impossible).

use super::detector::DetectorChannel;
use super::CompiledCascade;
use crate::correlator::EventCounts;
use crate::error::{Error, Result};
use crate::levels::Polarization;
use crate::seeding::{sub_seed, Stream};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

/// Probability of each exclusive per-cycle coincidence category among
/// three designated channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleOutcomeProbabilities {
    pub p123: f64,
    pub p12: f64,
    pub p13: f64,
    pub p23: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p_none: f64,
}

impl CycleOutcomeProbabilities {
    /// Probability that a cycle produces any click at all.
    pub fn p_any(&self) -> f64 {
        1.0 - self.p_none
    }

    pub fn sum(&self) -> f64 {
        self.p123 + self.p12 + self.p13 + self.p23 + self.p1 + self.p2 + self.p3 + self.p_none
    }
}

/// Detection probability of one photon on one channel, given the
/// compiled line table.
fn pass_probability(
    compiled: &CompiledCascade,
    channel: &DetectorChannel,
    line: u16,
    line_mask: &Option<Vec<bool>>,
) -> f64 {
    if let Some(mask) = line_mask {
        if !mask[line as usize] {
            return 0.0;
        }
    }
    let pol_factor = match channel.polarization_filter {
        None => 1.0,
        Some(filter) => match compiled.lines()[line as usize].polarization {
            // Intrinsic cascade photons carry a random polarization.
            Polarization::Unpolarized => 0.5,
            p if p == filter => 1.0,
            _ => 0.0,
        },
    };
    channel.efficiency * pol_factor
}

/// Computes the exact per-cycle coincidence category probabilities for
/// three designated channels.
pub fn cycle_outcome_probabilities(
    compiled: &CompiledCascade,
    channels: &[DetectorChannel; 3],
) -> Result<CycleOutcomeProbabilities> {
    for ch in channels {
        ch.validate()?;
        if ch.dark_count_rate_hz != 0.0 {
            return Err(Error::parameter(format!(
                "channel {}: closed-form outcome probabilities assume no dark counts",
                ch.channel
            )));
        }
    }
    let masks: Vec<Option<Vec<bool>>> = channels
        .iter()
        .map(|ch| match &ch.line_filter {
            None => Ok(None),
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
                Ok(Some(mask))
            }
        })
        .collect::<Result<_>>()?;

    let pass = |arm: usize, line: u16| -> f64 {
        pass_probability(compiled, &channels[arm], line, &masks[arm])
    };

    let model = compiled.model();
    let mut category = [0.0f64; 8];
    let prepared = compiled.prepared_probability();
    category[0] += 1.0 - prepared;

    // Probability-weighted leaves of the per-cycle outcome tree. Each
    // leaf fixes the emitted photon set; arms then click independently.
    let mut add_leaf = |weight: f64, photons: &[u16]| {
        let click: Vec<f64> = (0..3)
            .map(|arm| {
                let miss: f64 = photons.iter().map(|&l| 1.0 - pass(arm, l)).product();
                1.0 - miss
            })
            .collect();
        for (bits, slot) in category.iter_mut().enumerate() {
            let p: f64 = (0..3)
                .map(|arm| {
                    if bits & (1 << arm) != 0 {
                        click[arm]
                    } else {
                        1.0 - click[arm]
                    }
                })
                .product();
            *slot += weight * p;
        }
    };

    let initial_weights = [
        model.thermal_bright_fraction / 2.0,
        model.thermal_bright_fraction / 2.0,
        (1.0 - model.thermal_bright_fraction) / 2.0,
        (1.0 - model.thermal_bright_fraction) / 2.0,
    ];
    let xx = compiled.xx_line;
    let x = compiled.x_line;
    let xd = compiled.xd_line;

    for (slot, &w_init) in initial_weights.iter().enumerate() {
        if w_init == 0.0 {
            continue;
        }
        let base = prepared * w_init;

        // Direct route: same for every initial state.
        if model.branch_direct > 0.0 {
            for (line, share) in compiled.direct_choice.shares() {
                add_leaf(base * model.branch_direct * share, &[line, xx, x]);
            }
        }

        // Indirect route through the chosen line's final manifold.
        let w_indirect = base * (1.0 - model.branch_direct);
        if w_indirect == 0.0 {
            continue;
        }
        for (line, share) in compiled.indirect_choice[slot].shares() {
            let p_odd = match model.odd_routing_probability {
                Some(p) => p,
                None => {
                    let spin = compiled.lines()[line as usize].final_state.spin.value();
                    if spin.abs() % 2 == 1 {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
            if p_odd > 0.0 {
                add_leaf(w_indirect * share * p_odd, &[line, xd]);
            }
            if p_odd < 1.0 {
                add_leaf(w_indirect * share * (1.0 - p_odd), &[line, xx, x]);
            }
        }
    }

    let probs = CycleOutcomeProbabilities {
        p_none: category[0b000],
        p1: category[0b001],
        p2: category[0b010],
        p3: category[0b100],
        p12: category[0b011],
        p13: category[0b101],
        p23: category[0b110],
        p123: category[0b111],
    };
    debug_assert!((probs.sum() - 1.0).abs() < 1e-12, "sum {}", probs.sum());
    Ok(probs)
}

/// Draws exact multinomial coincidence tallies for `cycles` excitation
/// cycles from per-cycle category probabilities.
///
/// Sampling is sequential-conditional binomial, so it is exact in
/// distribution and handles cycle counts far beyond what event-level
/// simulation could reach. `window_ps` is recorded verbatim.
pub fn sample_event_counts(
    probs: &CycleOutcomeProbabilities,
    cycles: u64,
    window_ps: u64,
    master_seed: u64,
) -> Result<EventCounts> {
    let categories = [
        probs.p123, probs.p12, probs.p13, probs.p23, probs.p1, probs.p2, probs.p3,
    ];
    for p in categories.iter().chain([&probs.p_none]) {
        if !p.is_finite() || *p < 0.0 {
            return Err(Error::parameter(format!(
                "category probabilities must be finite and non-negative, got {p}"
            )));
        }
    }
    if (probs.sum() - 1.0).abs() > 1e-9 {
        return Err(Error::parameter(format!(
            "category probabilities must sum to 1, got {}",
            probs.sum()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(master_seed, Stream::Synthetic, cycles));
    let mut remaining_mass = 1.0f64;
    let mut remaining = cycles;
    let mut drawn = [0u64; 7];
    for (i, &p) in categories.iter().enumerate() {
        if remaining == 0 || remaining_mass <= 0.0 {
            break;
        }
        let conditional = (p / remaining_mass).clamp(0.0, 1.0);
        drawn[i] = Binomial::new(remaining, conditional)
            .expect("clamped probability")
            .sample(&mut rng);
        remaining -= drawn[i];
        remaining_mass -= p;
    }

    Ok(EventCounts {
        total_events: drawn.iter().sum(),
        n123: drawn[0],
        n12: drawn[1],
        n13: drawn[2],
        n23: drawn[3],
        window_ps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::detector::detect;
    use crate::cascade::{CascadeModel, LINE_XX_GROUND, LINE_X_BRIGHT};
    use crate::correlator::count_events;

    const ALL_INDIRECT: [&str; 10] = [
        "xxx_tt2_h1",
        "xxx_tt2_v1",
        "xxx_tt2_h2",
        "xxx_tt2_v2",
        "xxx_tt0_h",
        "xxx_tt0_v",
        "xxx_tt1_h",
        "xxx_tt1_v",
        "xxx_tt3_h",
        "xxx_tt3_v",
    ];

    fn three_arms(compiled_eta: [f64; 3]) -> [DetectorChannel; 3] {
        let mut arms = [
            DetectorChannel::ideal(0, &ALL_INDIRECT),
            DetectorChannel::ideal(1, &[LINE_XX_GROUND]),
            DetectorChannel::ideal(2, &[LINE_X_BRIGHT]),
        ];
        for (arm, eta) in arms.iter_mut().zip(compiled_eta) {
            arm.efficiency = eta;
        }
        arms
    }

    #[test]
    fn perfect_capture_on_the_ground_route_is_all_triples() {
        let compiled = CascadeModel {
            branch_direct: 0.0,
            odd_routing_probability: Some(0.0),
            ..CascadeModel::default()
        }
        .compile()
        .unwrap();
        let probs = cycle_outcome_probabilities(&compiled, &three_arms([1.0; 3])).unwrap();
        assert!((probs.p123 - 1.0).abs() < 1e-12, "p123 {}", probs.p123);
        assert!(probs.p_none.abs() < 1e-12);
    }

    #[test]
    fn full_blockade_leaves_only_first_arm_singles() {
        let compiled = CascadeModel {
            branch_direct: 0.0,
            odd_routing_probability: Some(1.0),
            ..CascadeModel::default()
        }
        .compile()
        .unwrap();
        let probs = cycle_outcome_probabilities(&compiled, &three_arms([1.0; 3])).unwrap();
        assert!((probs.p1 - 1.0).abs() < 1e-12, "p1 {}", probs.p1);
        assert!(probs.p123.abs() < 1e-12);
    }

    #[test]
    fn polarizer_on_one_arm_moves_half_the_triples_to_pairs() {
        let compiled = CascadeModel {
            branch_direct: 0.0,
            odd_routing_probability: Some(0.0),
            ..CascadeModel::default()
        }
        .compile()
        .unwrap();
        let mut arms = three_arms([1.0; 3]);
        arms[1].polarization_filter = Some(Polarization::H);
        let probs = cycle_outcome_probabilities(&compiled, &arms).unwrap();
        assert!((probs.p123 - 0.5).abs() < 1e-12);
        assert!(
            (probs.p13 - 0.5).abs() < 1e-12,
            "the V-polarized half lacks the middle click"
        );
    }

    #[test]
    fn efficiencies_factorize_on_the_triple_category() {
        // With parity routing and the quartet filter, a triple needs a
        // bright cascade through an even manifold line caught by arm 0.
        let compiled = CascadeModel::default().compile().unwrap();
        let mut arms = three_arms([0.3, 0.2, 0.1]);
        arms[0].line_filter = Some(
            ["xxx_tt2_h1", "xxx_tt2_v1", "xxx_tt2_h2", "xxx_tt2_v2"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        );
        let probs = cycle_outcome_probabilities(&compiled, &arms).unwrap();
        // Bright share 1/2, indirect share 5/6, quartet share within a
        // bright state's lines 2.0 / 3.5.
        let p_quartet = 0.5 * (5.0 / 6.0) * (2.0 / 3.5);
        let expected = p_quartet * 0.3 * 0.2 * 0.1;
        assert!(
            (probs.p123 - expected).abs() < 1e-12,
            "p123 {} vs {expected}",
            probs.p123
        );
    }

    #[test]
    fn closed_form_matches_event_level_simulation() {
        let compiled = CascadeModel::default().compile().unwrap();
        let mut arms = three_arms([0.35, 0.3, 0.25]);
        arms[0].line_filter = Some(
            ["xxx_tt2_h1", "xxx_tt2_v1", "xxx_tt2_h2", "xxx_tt2_v2"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        );
        let probs = cycle_outcome_probabilities(&compiled, &arms).unwrap();

        // The window must cover a whole cascade but stay well clear of
        // the next cycle: an anchor tag arriving late in its cycle must
        // not reach the following cycle's early photons.
        let cycles = 60_000u64;
        let output = compiled.simulate(cycles, 41);
        let tags = detect(&compiled, &output, &arms, 42).unwrap();
        let counts = count_events(&tags, [0, 1, 2], 8_000, compiled.period_ps()).unwrap();

        let n = cycles as f64;
        for (name, got, p) in [
            ("n123", counts.n123, probs.p123),
            ("n12", counts.n12, probs.p12),
            ("n13", counts.n13, probs.p13),
            ("n23", counts.n23, probs.p23),
        ] {
            let mean = n * p;
            let sigma = (n * p * (1.0 - p)).sqrt().max(1.0);
            assert!(
                ((got as f64) - mean).abs() < 5.0 * sigma,
                "{name}: {got} vs {mean:.1} (sigma {sigma:.1})"
            );
        }
    }

    #[test]
    fn sampler_reproduces_category_means() {
        let probs = CycleOutcomeProbabilities {
            p123: 0.05,
            p12: 0.1,
            p13: 0.08,
            p23: 0.12,
            p1: 0.2,
            p2: 0.0,
            p3: 0.05,
            p_none: 0.4,
        };
        let cycles = 1_000_000u64;
        let counts = sample_event_counts(&probs, cycles, 13_000, 7).unwrap();
        let again = sample_event_counts(&probs, cycles, 13_000, 7).unwrap();
        assert_eq!(counts, again, "sampling is deterministic in the seed");
        let n = cycles as f64;
        for (got, p) in [
            (counts.n123, probs.p123),
            (counts.n12, probs.p12),
            (counts.n13, probs.p13),
            (counts.n23, probs.p23),
        ] {
            let sigma = (n * p * (1.0 - p)).sqrt();
            assert!(
                ((got as f64) - n * p).abs() < 5.0 * sigma,
                "{got} vs {}",
                n * p
            );
        }
        assert!((counts.total_events as f64 - 0.6 * n).abs() < 5.0 * (n * 0.24).sqrt());
    }

    #[test]
    fn sampler_handles_huge_cycle_counts() {
        let probs = CycleOutcomeProbabilities {
            p123: 5e-10,
            p12: 1e-6,
            p13: 8e-7,
            p23: 1.2e-6,
            p1: 1e-3,
            p2: 8e-4,
            p3: 5e-4,
            p_none: 1.0 - 5e-10 - 1e-6 - 8e-7 - 1.2e-6 - 1e-3 - 8e-4 - 5e-4,
        };
        let cycles = 2e13 as u64;
        let counts = sample_event_counts(&probs, cycles, 13_000, 3).unwrap();
        let mean = 5e-10 * cycles as f64;
        assert!(
            ((counts.n123 as f64) - mean).abs() < 5.0 * mean.sqrt(),
            "n123 {} vs {mean}",
            counts.n123
        );
    }

    #[test]
    fn dark_counts_invalidate_the_closed_form() {
        let compiled = CascadeModel::default().compile().unwrap();
        let mut arms = three_arms([1.0; 3]);
        arms[2].dark_count_rate_hz = 100.0;
        assert!(cycle_outcome_probabilities(&compiled, &arms).is_err());
    }
}

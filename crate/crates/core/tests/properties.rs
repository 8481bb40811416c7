//! Randomized invariants of the correlation machinery. These complement
//! the unit tests next to the implementation: rather than fixing one
//! expected answer, each property must hold for every generated input.

use proptest::prelude::*;

use triphoton::correlator::{g3, marginalize_g3};
use triphoton::{BinningSpec, MarginalAxis, TagStream, TimeTagRecord};

fn grid_stream(ch0_slots: &[u64], ch1_slots: &[u64]) -> TagStream {
    // Channel 0 sits on multiples of ten, channel 1 on the half-slots,
    // so every pair delay is congruent to 5 modulo 10 and never lands
    // on an edge of a width-10 bin grid.
    let mut records: Vec<TimeTagRecord> = ch0_slots
        .iter()
        .map(|&k| TimeTagRecord {
            channel: 0,
            time_ps: 10 * k,
        })
        .collect();
    records.extend(ch1_slots.iter().map(|&k| TimeTagRecord {
        channel: 1,
        time_ps: 5 + 10 * k,
    }));
    records.sort_unstable_by_key(|r| (r.time_ps, r.channel));
    TagStream::new(2, records).expect("grid records are sorted and in range")
}

proptest! {
    /// Swapping the two channels mirrors the histogram: a delay of tau
    /// from a to b is a delay of -tau from b to a. With all delays kept
    /// off the bin edges this is an exact integer identity.
    #[test]
    fn g2_time_reversal_mirrors_counts(
        ch0 in proptest::collection::vec(0u64..4000, 20..250),
        ch1 in proptest::collection::vec(0u64..4000, 20..250),
        half_bins in 1i64..30,
    ) {
        let tags = grid_stream(&ch0, &ch1);
        let spec = BinningSpec::symmetric(10 * half_bins, 10).unwrap();
        let fwd = triphoton::correlator::g2(&tags, 0, 1, &spec).unwrap();
        let rev = triphoton::correlator::g2(&tags, 1, 0, &spec).unwrap();
        let n = fwd.raw_counts.len();
        for k in 0..n {
            prop_assert_eq!(fwd.raw_counts[k], rev.raw_counts[n - 1 - k],
                "bin {} of {}", k, n);
        }
    }

    /// `bin_index` implements a half-open window: hits resolve to the
    /// bin whose half-open span contains the delay, everything else is
    /// rejected.
    #[test]
    fn bin_index_respects_half_open_window(
        width in 1i64..5000,
        bins in 1i64..64,
        shift in 0i64..64,
        tau in -400_000i64..400_000,
    ) {
        prop_assume!(shift < bins);
        let tau_min = -width * shift;
        let spec = BinningSpec::new(tau_min, tau_min + width * bins, width).unwrap();
        match spec.bin_index(tau) {
            Some(k) => {
                prop_assert!(tau >= spec.tau_min_ps && tau < spec.tau_max_ps);
                let start = tau_min + k as i64 * width;
                prop_assert!(tau >= start && tau < start + width,
                    "tau {} escaped bin {} starting at {}", tau, k, start);
            }
            None => {
                prop_assert!(tau < spec.tau_min_ps || tau >= spec.tau_max_ps);
            }
        }
    }

    /// Marginalizing a g3 histogram sums its rows (over tau2) or its
    /// columns (over tau1) exactly, and scales the accidental
    /// normalization by the number of bins that were folded in.
    #[test]
    fn g3_marginals_sum_rows_and_columns(
        t1 in proptest::collection::vec(0u64..30_000, 15..120),
        t2 in proptest::collection::vec(0u64..30_000, 15..120),
        t3 in proptest::collection::vec(0u64..30_000, 15..120),
        w1 in 1i64..600,
        w2 in 1i64..600,
        n1 in 2i64..10,
        n2 in 2i64..10,
    ) {
        let mut records: Vec<TimeTagRecord> = Vec::new();
        for (ch, times) in [(0u8, &t1), (1, &t2), (2, &t3)] {
            records.extend(times.iter().map(|&t| TimeTagRecord { channel: ch, time_ps: t }));
        }
        records.sort_unstable_by_key(|r| (r.time_ps, r.channel));
        let tags = TagStream::new(3, records).unwrap();
        prop_assume!(tags.total_time_s() > 0.0);

        let axis1 = BinningSpec::new(-w1 * (n1 / 2), w1 * (n1 - n1 / 2), w1).unwrap();
        let axis2 = BinningSpec::new(-w2 * (n2 / 2), w2 * (n2 - n2 / 2), w2).unwrap();

        let h = g3(&tags, (0, 1, 2), &axis1, &axis2).unwrap();
        let (rows, cols) = h.shape();

        let over_tau2 = marginalize_g3(&h, MarginalAxis::Tau2);
        prop_assert_eq!(over_tau2.raw_counts.len(), rows);
        for i in 0..rows {
            let want: u64 = (0..cols).map(|j| h.raw(i, j)).sum();
            prop_assert_eq!(over_tau2.raw_counts[i], want);
            prop_assert!((over_tau2.normalization[i] - h.normalization * cols as f64).abs()
                <= 1e-12 * over_tau2.normalization[i].abs());
        }

        let over_tau1 = marginalize_g3(&h, MarginalAxis::Tau1);
        prop_assert_eq!(over_tau1.raw_counts.len(), cols);
        for j in 0..cols {
            let want: u64 = (0..rows).map(|i| h.raw(i, j)).sum();
            prop_assert_eq!(over_tau1.raw_counts[j], want);
        }
    }
}

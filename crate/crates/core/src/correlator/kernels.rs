//! Coincidence counting kernels.
//!
//! Inputs are per-channel sorted time vectors. The streaming kernels walk
//! the reference channel in fixed-size chunks; each chunk re-derives its
//! partner-channel window boundaries by binary search and then advances
//! them monotonically, so the work decomposes into independent pieces
//! whose partial histograms are summed. Chunk boundaries depend only on
//! indices, and u64 addition is exact, so the result is bit-identical for
//! any worker count, including one.

use super::BinningSpec;
use rayon::prelude::*;

/// Reference-channel tags per parallel work item.
const CHUNK: usize = 1 << 14;

fn merge(mut acc: Vec<u64>, part: Vec<u64>) -> Vec<u64> {
    for (a, p) in acc.iter_mut().zip(part) {
        *a += p;
    }
    acc
}

/// All-pairs-in-window delay histogram of `b` relative to `a`.
pub(crate) fn pair_counts_streaming(a: &[i64], b: &[i64], spec: &BinningSpec) -> Vec<u64> {
    let n_bins = spec.bin_count();
    let zeros = || vec![0u64; n_bins];
    if a.is_empty() || b.is_empty() {
        return zeros();
    }
    a.par_chunks(CHUNK)
        .map(|chunk| {
            let mut hist = vec![0u64; n_bins];
            let mut lo = b.partition_point(|&t| t < chunk[0] + spec.tau_min_ps);
            let mut hi = b.partition_point(|&t| t < chunk[0] + spec.tau_max_ps);
            for &ta in chunk {
                while lo < b.len() && b[lo] - ta < spec.tau_min_ps {
                    lo += 1;
                }
                while hi < b.len() && b[hi] - ta < spec.tau_max_ps {
                    hi += 1;
                }
                for &tb in &b[lo..hi] {
                    let k = ((tb - ta - spec.tau_min_ps) / spec.bin_width_ps) as usize;
                    hist[k] += 1;
                }
            }
            hist
        })
        .reduce(zeros, merge)
}

/// Brute-force pair histogram: every pair is tested against the window.
pub(crate) fn pair_counts_naive(a: &[i64], b: &[i64], spec: &BinningSpec) -> Vec<u64> {
    let mut hist = vec![0u64; spec.bin_count()];
    for &ta in a {
        for &tb in b {
            if let Some(k) = spec.bin_index(tb - ta) {
                hist[k] += 1;
            }
        }
    }
    hist
}

/// All-triples-in-window histogram: for each reference tag `t1`, every
/// `(t2, t3)` combination with `t2 - t1` inside `axis1` and `t3 - t1`
/// inside `axis2` increments one cell of the row-major `(n1, n2)` grid.
pub(crate) fn triple_counts_streaming(
    c1: &[i64],
    c2: &[i64],
    c3: &[i64],
    axis1: &BinningSpec,
    axis2: &BinningSpec,
) -> Vec<u64> {
    let n1 = axis1.bin_count();
    let n2 = axis2.bin_count();
    let zeros = || vec![0u64; n1 * n2];
    if c1.is_empty() || c2.is_empty() || c3.is_empty() {
        return zeros();
    }
    c1.par_chunks(CHUNK)
        .map(|chunk| {
            let mut hist = vec![0u64; n1 * n2];
            let mut lo2 = c2.partition_point(|&t| t < chunk[0] + axis1.tau_min_ps);
            let mut hi2 = c2.partition_point(|&t| t < chunk[0] + axis1.tau_max_ps);
            let mut lo3 = c3.partition_point(|&t| t < chunk[0] + axis2.tau_min_ps);
            let mut hi3 = c3.partition_point(|&t| t < chunk[0] + axis2.tau_max_ps);
            for &t1 in chunk {
                while lo2 < c2.len() && c2[lo2] - t1 < axis1.tau_min_ps {
                    lo2 += 1;
                }
                while hi2 < c2.len() && c2[hi2] - t1 < axis1.tau_max_ps {
                    hi2 += 1;
                }
                while lo3 < c3.len() && c3[lo3] - t1 < axis2.tau_min_ps {
                    lo3 += 1;
                }
                while hi3 < c3.len() && c3[hi3] - t1 < axis2.tau_max_ps {
                    hi3 += 1;
                }
                for &t2 in &c2[lo2..hi2] {
                    let row = ((t2 - t1 - axis1.tau_min_ps) / axis1.bin_width_ps) as usize * n2;
                    for &t3 in &c3[lo3..hi3] {
                        let k = ((t3 - t1 - axis2.tau_min_ps) / axis2.bin_width_ps) as usize;
                        hist[row + k] += 1;
                    }
                }
            }
            hist
        })
        .reduce(zeros, merge)
}

/// Brute-force triple histogram. Pairs are scanned exhaustively; the
/// third channel is cut down by binary search to keep the oracle usable
/// on thousands of tags.
pub(crate) fn triple_counts_naive(
    c1: &[i64],
    c2: &[i64],
    c3: &[i64],
    axis1: &BinningSpec,
    axis2: &BinningSpec,
) -> Vec<u64> {
    let n2 = axis2.bin_count();
    let mut hist = vec![0u64; axis1.bin_count() * n2];
    for &t1 in c1 {
        for &t2 in c2 {
            let Some(k1) = axis1.bin_index(t2 - t1) else {
                continue;
            };
            let start = c3.partition_point(|&t| t < t1 + axis2.tau_min_ps);
            for &t3 in &c3[start..] {
                if t3 - t1 >= axis2.tau_max_ps {
                    break;
                }
                let k2 = ((t3 - t1 - axis2.tau_min_ps) / axis2.bin_width_ps) as usize;
                hist[k1 * n2 + k2] += 1;
            }
        }
    }
    hist
}

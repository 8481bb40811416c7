//! Deterministic sub-seed derivation.
//!
//! Every stochastic stage of the pipeline owns an independent RNG stream
//! seeded by hashing a stream label and an index into the master seed:
//!
//! ```text
//! sub_seed = splitmix64(master ^ SALT[stream] ^ splitmix64(index))
//! ```
//!
//! Because sub-seeds depend only on `(master, stream, index)` and never on
//! evaluation order, results are independent of worker count and chunk
//! layout, and a run is bit-identical for a fixed master seed.

/// Labels for the independent random streams of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// One stream per excitation cycle of the cascade simulation.
    Cycle,
    /// One stream per detector channel (thinning, jitter, dark counts).
    Detector,
    /// One stream per Rabi power point.
    RabiPoint,
    /// One stream per synthetic-data instance in validation suites.
    Synthetic,
}

fn stream_salt(stream: Stream) -> u64 {
    match stream {
        Stream::Cycle => 0x6c07_8965_2a58_71bb,
        Stream::Detector => 0x91bc_6a2d_4f0a_1c35,
        Stream::RabiPoint => 0x3d1e_92f7_08c4_5e6d,
        Stream::Synthetic => 0xb5fe_1d03_77c9_4a82,
    }
}

/// The splitmix64 mixing function (Steele, Lea, Flood 2014).
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives the seed for stream `stream` at position `index`.
pub fn sub_seed(master: u64, stream: Stream, index: u64) -> u64 {
    splitmix64(master ^ stream_salt(stream) ^ splitmix64(index))
}

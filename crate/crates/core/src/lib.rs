//! Simulation and analysis of the three-photon radiative cascade of a
//! semiconductor quantum dot triexciton.
//!
//! The crate has two halves that meet at the [`correlator::TagStream`]
//! type:
//!
//! * **Forward model** ([`levels`], [`cascade`]): fine-structure levels and
//!   transition tables, a kinetic Monte Carlo cascade simulator driven by
//!   pulsed excitation, and detector channels that turn emission events
//!   into time tags (efficiency, jitter, dark counts, dead time).
//! * **Analysis** ([`correlator`]): second- and third-order intensity
//!   correlations of time-tag streams with accidental-coincidence
//!   normalization, histogram marginals, per-event coincidence counting
//!   and absolute-efficiency estimation, plus the tag file formats.
//!
//! All randomness flows from one master seed through documented
//! sub-seeding ([`seeding`]), so every result is reproducible and
//! independent of thread count.

pub mod cascade;
pub mod error;
pub mod levels;
pub mod seeding;

pub mod correlator;

pub use cascade::{
    CascadeModel, CascadeStats, DetectorChannel, EmissionEvent, ExcitationConfig, RadiativeRates,
    SimulationOutput,
};
pub use correlator::{BinningSpec, Hist1D, Hist2D, Kernel, MarginalAxis, TagStream, TimeTagRecord};
pub use error::{Error, Result};
pub use levels::{
    ExcitonicState, FineStructureParams, Polarization, SpinProjection, TransitionLine,
};

//! Kinetic Monte Carlo simulation of the pulsed three-photon cascade.
//!
//! Each excitation cycle prepares a triexciton with probability given by
//! the pulse areas, thermalized between its bright and dark doublets.
//! The triexciton then decays along one of two routes:
//!
//! * **direct** (branching ratio `branch_direct`): the second-level pair
//!   recombines straight to the ground biexciton;
//! * **indirect**: a first-level pair recombines into a triplet-triplet
//!   excited biexciton state, chosen among the allowed lines with
//!   probability proportional to relative intensity.
//!
//! An excited biexciton with even total spin projection relaxes by an
//! electron-hole flip-flop to the ground biexciton; odd spin projection
//! is spin-blockaded from that channel and relaxes by phonon emission to
//! a metastable triplet biexciton instead. The ground biexciton emits
//! the two remaining cascade photons through the bright exciton; the
//! blockaded biexciton emits one photon and strands the dot in the dark
//! exciton, which decays without a photon. Every hop draws an
//! exponential waiting time from the competing-rates picture.
//!
//! Cycles are statistically independent: each one seeds its own RNG from
//! the master seed and the cycle number, so results are identical for
//! any thread count. Photon times land on an integer picosecond grid,
//! nudged forward by one grid step when rounding would make a cycle's
//! photons coincide, keeping emission order strict within a cycle.

pub mod counts;
pub mod detector;
pub mod rabi;

pub use counts::{cycle_outcome_probabilities, sample_event_counts, CycleOutcomeProbabilities};
pub use detector::{default_detector_channels, detect, DetectorChannel};
pub use rabi::{
    fit_rabi, prepare_population, pulse_area_from_power, rabi_intensity, simulate_rabi_sweep,
    RabiFit, RabiPoint,
};

use crate::error::{Error, Result};
use crate::levels::{
    build_triexciton_levels, direct_transition_table, indirect_transition_table, ComplexKind,
    DoubletMember, ExcitonicState, FineStructureParams, Polarization, SpinProjection,
    TransitionLine,
};
use crate::seeding::{sub_seed, Stream};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Line id of the ground biexciton recombination photon.
pub const LINE_XX_GROUND: &str = "xx0_x0";
/// Line id of the bright exciton recombination photon.
pub const LINE_X_BRIGHT: &str = "x0_vac";
/// Line id of the blockaded (triplet) biexciton recombination photon.
pub const LINE_XX_BLOCKADED: &str = "xxt3_xd";

/// Radiative decay rates of the complexes, in inverse nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadiativeRates {
    pub triexciton_per_ns: f64,
    pub biexciton_per_ns: f64,
    pub exciton_per_ns: f64,
    /// Rate of the spin-blockaded triplet biexciton.
    pub blockaded_biexciton_per_ns: f64,
}

impl Default for RadiativeRates {
    fn default() -> Self {
        RadiativeRates {
            triexciton_per_ns: 1.25,
            biexciton_per_ns: 0.77,
            exciton_per_ns: 1.0,
            blockaded_biexciton_per_ns: 0.77,
        }
    }
}

impl RadiativeRates {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("triexciton_per_ns", self.triexciton_per_ns),
            ("biexciton_per_ns", self.biexciton_per_ns),
            ("exciton_per_ns", self.exciton_per_ns),
            (
                "blockaded_biexciton_per_ns",
                self.blockaded_biexciton_per_ns,
            ),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::parameter(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Pulsed excitation parameters. The three pulses climb the ladder
/// vacuum -> exciton -> biexciton -> triexciton within one repetition
/// period; the cascade clock starts at the third pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExcitationConfig {
    pub repetition_rate_mhz: f64,
    /// Arrival time of each pulse within the cycle, in picoseconds.
    pub pulse_offsets_ps: [f64; 3],
    /// Pulse areas in radians; `pi` transfers the full population.
    pub pulse_areas_rad: [f64; 3],
    /// Pulse power realizing a `pi` area, in microwatts.
    pub pi_pulse_power_uw: f64,
    /// Detuning of the two-photon biexciton resonance below the exciton
    /// line (metadata recorded with runs; does not enter the dynamics).
    pub xx_two_photon_detuning_mev: f64,
    /// Detuning of the two-photon triexciton resonance (metadata).
    pub xxx_two_photon_detuning_mev: f64,
}

impl Default for ExcitationConfig {
    fn default() -> Self {
        ExcitationConfig {
            repetition_rate_mhz: 76.0,
            pulse_offsets_ps: [0.0, 30.0, 60.0],
            pulse_areas_rad: [std::f64::consts::PI; 3],
            pi_pulse_power_uw: 10.0,
            xx_two_photon_detuning_mev: 29.0,
            xxx_two_photon_detuning_mev: 34.0,
        }
    }
}

impl ExcitationConfig {
    /// Repetition period rounded to the picosecond grid.
    pub fn period_ps(&self) -> u64 {
        (1e6 / self.repetition_rate_mhz).round() as u64
    }

    pub fn validate(&self) -> Result<()> {
        if !self.repetition_rate_mhz.is_finite() || self.repetition_rate_mhz <= 0.0 {
            return Err(Error::parameter(format!(
                "repetition_rate_mhz must be positive, got {}",
                self.repetition_rate_mhz
            )));
        }
        let period = 1e6 / self.repetition_rate_mhz;
        for w in self.pulse_offsets_ps.windows(2) {
            if !w[0].is_finite() || !w[1].is_finite() || w[0] >= w[1] {
                return Err(Error::parameter(
                    "pulse offsets must be finite and strictly increasing".to_string(),
                ));
            }
        }
        if self.pulse_offsets_ps[0] < 0.0 || self.pulse_offsets_ps[2] >= period {
            return Err(Error::parameter(format!(
                "pulse offsets must lie within one period of {period:.1} ps"
            )));
        }
        for a in self.pulse_areas_rad {
            if !a.is_finite() || a < 0.0 {
                return Err(Error::parameter(format!(
                    "pulse areas must be finite and non-negative, got {a}"
                )));
            }
        }
        if !self.pi_pulse_power_uw.is_finite() || self.pi_pulse_power_uw <= 0.0 {
            return Err(Error::parameter(format!(
                "pi_pulse_power_uw must be positive, got {}",
                self.pi_pulse_power_uw
            )));
        }
        Ok(())
    }
}

/// Full parameter set of the cascade simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CascadeModel {
    pub fine_structure: FineStructureParams,
    pub rates: RadiativeRates,
    pub excitation: ExcitationConfig,
    /// Probability that a triexciton takes the direct recombination
    /// route. Applied uniformly to bright and dark initial states, so
    /// the indirect fraction over all prepared cascades is exactly
    /// `1 - branch_direct`.
    pub branch_direct: f64,
    /// Thermal occupation of the bright doublet at preparation.
    pub thermal_bright_fraction: f64,
    /// Phonon relaxation rate of odd-spin excited biexcitons.
    pub phonon_relax_rate_per_ns: f64,
    /// Electron-hole flip-flop rate of even-spin excited biexcitons.
    pub flipflop_rate_per_ns: f64,
    /// Non-radiative decay rate of the dark exciton.
    pub dark_exciton_decay_per_ns: f64,
    /// When set, overrides parity-based routing after indirect emission:
    /// the excited biexciton goes to the blockaded branch with this
    /// probability regardless of its spin.
    pub odd_routing_probability: Option<f64>,
}

impl Default for CascadeModel {
    fn default() -> Self {
        CascadeModel {
            fine_structure: FineStructureParams::default(),
            rates: RadiativeRates::default(),
            excitation: ExcitationConfig::default(),
            branch_direct: 1.0 / 6.0,
            thermal_bright_fraction: 0.5,
            phonon_relax_rate_per_ns: 33.3,
            flipflop_rate_per_ns: 10.0,
            dark_exciton_decay_per_ns: 0.01,
            odd_routing_probability: None,
        }
    }
}

impl CascadeModel {
    pub fn validate(&self) -> Result<()> {
        self.fine_structure.validate()?;
        self.rates.validate()?;
        self.excitation.validate()?;
        for (name, v) in [
            ("branch_direct", self.branch_direct),
            ("thermal_bright_fraction", self.thermal_bright_fraction),
        ] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::parameter(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        if let Some(p) = self.odd_routing_probability {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(Error::parameter(format!(
                    "odd_routing_probability must lie in [0, 1], got {p}"
                )));
            }
        }
        for (name, v) in [
            ("phonon_relax_rate_per_ns", self.phonon_relax_rate_per_ns),
            ("flipflop_rate_per_ns", self.flipflop_rate_per_ns),
            ("dark_exciton_decay_per_ns", self.dark_exciton_decay_per_ns),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::parameter(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Validates the model and precomputes the line tables and sampling
    /// weights.
    pub fn compile(&self) -> Result<CompiledCascade> {
        CompiledCascade::new(self.clone())
    }
}

/// One emitted photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmissionEvent {
    pub time_ps: u64,
    /// Excitation cycle that produced the photon.
    pub cycle: u64,
    /// Index into [`CompiledCascade::lines`].
    pub line_index: u16,
    pub polarization: Polarization,
}

/// Route and photon tallies accumulated while simulating.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CascadeStats {
    pub cycles: u64,
    pub prepared: u64,
    pub bright_initial: u64,
    pub dark_initial: u64,
    pub direct_route: u64,
    pub indirect_route: u64,
    pub even_relaxation: u64,
    pub odd_relaxation: u64,
    pub photons: u64,
    /// Photons per line, indexed like [`CompiledCascade::lines`].
    pub photons_by_line: Vec<u64>,
}

impl CascadeStats {
    fn new(line_count: usize) -> Self {
        CascadeStats {
            photons_by_line: vec![0; line_count],
            ..CascadeStats::default()
        }
    }

    fn merge(&mut self, other: &CascadeStats) {
        self.cycles += other.cycles;
        self.prepared += other.prepared;
        self.bright_initial += other.bright_initial;
        self.dark_initial += other.dark_initial;
        self.direct_route += other.direct_route;
        self.indirect_route += other.indirect_route;
        self.even_relaxation += other.even_relaxation;
        self.odd_relaxation += other.odd_relaxation;
        self.photons += other.photons;
        if self.photons_by_line.len() < other.photons_by_line.len() {
            self.photons_by_line.resize(other.photons_by_line.len(), 0);
        }
        for (a, b) in self.photons_by_line.iter_mut().zip(&other.photons_by_line) {
            *a += b;
        }
    }

    /// Fraction of prepared cascades that took the indirect route.
    pub fn indirect_fraction(&self) -> f64 {
        let routed = self.direct_route + self.indirect_route;
        if routed == 0 {
            return f64::NAN;
        }
        self.indirect_route as f64 / routed as f64
    }

    /// Per-line photon tallies keyed by line id.
    pub fn line_counts(&self, compiled: &CompiledCascade) -> BTreeMap<String, u64> {
        compiled
            .lines()
            .iter()
            .zip(&self.photons_by_line)
            .map(|(l, &n)| (l.line_id.clone(), n))
            .collect()
    }
}

/// Result of a simulation run.
#[derive(Debug, Clone)]
pub struct SimulationOutput {
    /// All photons, sorted by time (ties broken by cycle, then line).
    pub events: Vec<EmissionEvent>,
    pub stats: CascadeStats,
    pub cycles: u64,
    pub period_ps: u64,
}

impl SimulationOutput {
    /// Total acquisition span covered by the simulated cycles.
    pub fn span_ps(&self) -> u64 {
        self.cycles * self.period_ps
    }
}

/// Weighted choice table: line indices with cumulative weights.
#[derive(Debug, Clone)]
struct ChoiceTable {
    entries: Vec<(u16, f64)>,
    total: f64,
}

impl ChoiceTable {
    fn build(indices: &[u16], lines: &[TransitionLine]) -> ChoiceTable {
        let mut cum = 0.0;
        let entries = indices
            .iter()
            .map(|&i| {
                cum += lines[i as usize].relative_intensity;
                (i, cum)
            })
            .collect();
        ChoiceTable {
            entries,
            total: cum,
        }
    }

    fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Line indices with their normalized pick probabilities.
    fn shares(&self) -> Vec<(u16, f64)> {
        let mut prev = 0.0;
        self.entries
            .iter()
            .map(|&(idx, cum)| {
                let share = (cum - prev) / self.total;
                prev = cum;
                (idx, share)
            })
            .collect()
    }

    fn pick(&self, rng: &mut ChaCha8Rng) -> u16 {
        if self.entries.len() == 1 {
            return self.entries[0].0;
        }
        let u = rng.random::<f64>() * self.total;
        for &(idx, cum) in &self.entries {
            if u < cum {
                return idx;
            }
        }
        self.entries.last().expect("non-empty choice table").0
    }
}

/// Initial triexciton states in sampling order: bright symmetric, bright
/// antisymmetric, dark symmetric, dark antisymmetric.
const INITIAL_STATES: usize = 4;

/// A validated model with precomputed tables, ready to simulate.
#[derive(Debug, Clone)]
pub struct CompiledCascade {
    model: CascadeModel,
    lines: Vec<TransitionLine>,
    direct_choice: ChoiceTable,
    indirect_choice: [ChoiceTable; INITIAL_STATES],
    xx_line: u16,
    x_line: u16,
    xd_line: u16,
    period_ps: u64,
    start_offset_ps: u64,
    prepared_probability: f64,
    exp_xxx: Exp<f64>,
    exp_xx: Exp<f64>,
    exp_x: Exp<f64>,
    exp_blockaded: Exp<f64>,
    exp_flipflop: Exp<f64>,
    exp_phonon: Exp<f64>,
}

fn intrinsic_line(
    line_id: &str,
    initial_kind: ComplexKind,
    final_kind: ComplexKind,
    photon_energy_mev: f64,
) -> TransitionLine {
    let state = |kind| ExcitonicState {
        kind,
        spin: SpinProjection::new(0).expect("zero spin"),
        member: DoubletMember::NotSplit,
        energy_offset_uev: 0.0,
    };
    TransitionLine {
        line_id: line_id.to_string(),
        initial: state(initial_kind),
        final_state: state(final_kind),
        // Resolved per photon; entangled polarization correlations are
        // out of scope.
        polarization: Polarization::Unpolarized,
        photon_energy_mev,
        relative_intensity: 1.0,
    }
}

impl CompiledCascade {
    fn new(model: CascadeModel) -> Result<CompiledCascade> {
        model.validate()?;
        let fs = &model.fine_structure;
        let levels = build_triexciton_levels(fs)?;
        let mut lines = direct_transition_table(&levels, fs)?;
        let direct_count = lines.len();
        lines.extend(indirect_transition_table(&levels, fs)?);
        let indirect_count = lines.len() - direct_count;

        // Cascade-intrinsic photons below the triexciton lines. Energies
        // are placeholders on the same scale as the level tables.
        let xx_line = lines.len() as u16;
        lines.push(intrinsic_line(
            LINE_XX_GROUND,
            ComplexKind::GroundBiexciton,
            ComplexKind::Exciton,
            1293.2,
        ));
        let x_line = lines.len() as u16;
        lines.push(intrinsic_line(
            LINE_X_BRIGHT,
            ComplexKind::Exciton,
            ComplexKind::Vacuum,
            1295.5,
        ));
        let xd_line = lines.len() as u16;
        lines.push(intrinsic_line(
            LINE_XX_BLOCKADED,
            ComplexKind::ExcitedBiexcitonTT,
            ComplexKind::Exciton,
            1289.0,
        ));

        let direct_idx: Vec<u16> = (0..direct_count as u16).collect();
        let direct_choice = ChoiceTable::build(&direct_idx, &lines);

        let initial_matches = |line: &TransitionLine, slot: usize| -> bool {
            let spin = line.initial.spin.value().abs();
            let member = line.initial.member;
            match slot {
                0 => spin == 1 && member == DoubletMember::Symmetric,
                1 => spin == 1 && member == DoubletMember::Antisymmetric,
                2 => spin == 2 && member == DoubletMember::Symmetric,
                _ => spin == 2 && member == DoubletMember::Antisymmetric,
            }
        };
        let indirect_choice: [ChoiceTable; INITIAL_STATES] = std::array::from_fn(|slot| {
            let idx: Vec<u16> = (direct_count..direct_count + indirect_count)
                .map(|i| i as u16)
                .filter(|&i| initial_matches(&lines[i as usize], slot))
                .collect();
            ChoiceTable::build(&idx, &lines)
        });

        if model.branch_direct > 0.0 && direct_choice.is_empty() {
            return Err(Error::config(
                "branch_direct > 0 but every direct line has zero intensity".to_string(),
            ));
        }
        if model.branch_direct < 1.0 {
            let bright_reachable = model.thermal_bright_fraction > 0.0;
            let dark_reachable = model.thermal_bright_fraction < 1.0;
            for (slot, name) in [
                (0, "bright symmetric"),
                (1, "bright antisymmetric"),
                (2, "dark symmetric"),
                (3, "dark antisymmetric"),
            ] {
                let reachable = if slot < 2 {
                    bright_reachable
                } else {
                    dark_reachable
                };
                if reachable && indirect_choice[slot].is_empty() {
                    return Err(Error::config(format!(
                        "the {name} triexciton state has no indirect line with positive intensity"
                    )));
                }
            }
        }

        let period_ps = model.excitation.period_ps();
        let start_offset_ps = model.excitation.pulse_offsets_ps[2].round() as u64;
        let prepared_probability = prepare_population(&model.excitation.pulse_areas_rad);
        let rates = &model.rates;
        Ok(CompiledCascade {
            direct_choice,
            indirect_choice,
            xx_line,
            x_line,
            xd_line,
            period_ps,
            start_offset_ps,
            prepared_probability,
            exp_xxx: Exp::new(rates.triexciton_per_ns).expect("validated rate"),
            exp_xx: Exp::new(rates.biexciton_per_ns).expect("validated rate"),
            exp_x: Exp::new(rates.exciton_per_ns).expect("validated rate"),
            exp_blockaded: Exp::new(rates.blockaded_biexciton_per_ns).expect("validated rate"),
            exp_flipflop: Exp::new(model.flipflop_rate_per_ns).expect("validated rate"),
            exp_phonon: Exp::new(model.phonon_relax_rate_per_ns).expect("validated rate"),
            lines,
            model,
        })
    }

    pub fn model(&self) -> &CascadeModel {
        &self.model
    }

    /// Every line the simulator can emit: the direct pair, the indirect
    /// lines, then the three cascade-intrinsic lines.
    pub fn lines(&self) -> &[TransitionLine] {
        &self.lines
    }

    pub fn line_index(&self, line_id: &str) -> Option<u16> {
        self.lines
            .iter()
            .position(|l| l.line_id == line_id)
            .map(|i| i as u16)
    }

    pub fn period_ps(&self) -> u64 {
        self.period_ps
    }

    /// Probability that a cycle prepares the triexciton.
    pub fn prepared_probability(&self) -> f64 {
        self.prepared_probability
    }

    /// Simulates one excitation cycle, appending photons to `out`.
    ///
    /// The cycle seeds its own RNG from the master seed, so any subset
    /// of cycles can be simulated in any order or on any thread.
    pub fn simulate_cycle(
        &self,
        cycle: u64,
        master_seed: u64,
        out: &mut Vec<EmissionEvent>,
        stats: &mut CascadeStats,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(master_seed, Stream::Cycle, cycle));
        stats.cycles += 1;
        if self.prepared_probability < 1.0 && !rng.random_bool(self.prepared_probability) {
            return;
        }
        stats.prepared += 1;

        let start_ps = cycle * self.period_ps + self.start_offset_ps;
        let mut t_ns = 0.0f64;
        let mut last_ps: Option<u64> = None;
        let emit = |t_ns: f64,
                        line: u16,
                        pol: Polarization,
                        out: &mut Vec<EmissionEvent>,
                        stats: &mut CascadeStats,
                        last_ps: &mut Option<u64>| {
            let mut time_ps = start_ps + (t_ns * 1e3).round() as u64;
            if let Some(last) = *last_ps {
                time_ps = time_ps.max(last + 1);
            }
            *last_ps = Some(time_ps);
            stats.photons += 1;
            stats.photons_by_line[line as usize] += 1;
            out.push(EmissionEvent {
                time_ps,
                cycle,
                line_index: line,
                polarization: pol,
            });
        };
        let coin = |rng: &mut ChaCha8Rng| {
            if rng.random_bool(0.5) {
                Polarization::H
            } else {
                Polarization::V
            }
        };

        // Thermalized initial state.
        let bright = rng.random::<f64>() < self.model.thermal_bright_fraction;
        let member_shift = usize::from(!rng.random_bool(0.5));
        let initial_slot = if bright {
            stats.bright_initial += 1;
            member_shift
        } else {
            stats.dark_initial += 1;
            2 + member_shift
        };

        // Triexciton decay.
        t_ns += self.exp_xxx.sample(&mut rng);
        let direct = rng.random_bool(self.model.branch_direct);
        let blockaded = if direct {
            stats.direct_route += 1;
            let line = self.direct_choice.pick(&mut rng);
            let pol = self.lines[line as usize].polarization;
            emit(t_ns, line, pol, out, stats, &mut last_ps);
            false
        } else {
            stats.indirect_route += 1;
            let line = self.indirect_choice[initial_slot].pick(&mut rng);
            let pol = self.lines[line as usize].polarization;
            emit(t_ns, line, pol, out, stats, &mut last_ps);
            let odd = match self.model.odd_routing_probability {
                Some(p) => rng.random_bool(p),
                None => self.lines[line as usize].final_state.spin.value().abs() % 2 == 1,
            };
            if odd {
                stats.odd_relaxation += 1;
                t_ns += self.exp_phonon.sample(&mut rng);
            } else {
                stats.even_relaxation += 1;
                t_ns += self.exp_flipflop.sample(&mut rng);
            }
            odd
        };

        if blockaded {
            // Triplet biexciton photon, then the dark exciton decays
            // without one.
            t_ns += self.exp_blockaded.sample(&mut rng);
            let pol = coin(&mut rng);
            emit(t_ns, self.xd_line, pol, out, stats, &mut last_ps);
        } else {
            t_ns += self.exp_xx.sample(&mut rng);
            let pol = coin(&mut rng);
            emit(t_ns, self.xx_line, pol, out, stats, &mut last_ps);
            t_ns += self.exp_x.sample(&mut rng);
            let pol = coin(&mut rng);
            emit(t_ns, self.x_line, pol, out, stats, &mut last_ps);
        }
    }

    /// Simulates `cycles` excitation cycles in parallel.
    ///
    /// Output is identical for any rayon thread count: cycles are
    /// independently seeded, processed in fixed chunks, and the merged
    /// event list is sorted by a total key.
    pub fn simulate(&self, cycles: u64, master_seed: u64) -> SimulationOutput {
        const CHUNK: u64 = 4096;
        let ranges: Vec<(u64, u64)> = (0..cycles.div_ceil(CHUNK))
            .map(|i| (i * CHUNK, ((i + 1) * CHUNK).min(cycles)))
            .collect();
        let partials: Vec<(Vec<EmissionEvent>, CascadeStats)> = ranges
            .into_par_iter()
            .map(|(a, b)| {
                let mut events = Vec::with_capacity((b - a) as usize * 3);
                let mut stats = CascadeStats::new(self.lines.len());
                for cycle in a..b {
                    self.simulate_cycle(cycle, master_seed, &mut events, &mut stats);
                }
                (events, stats)
            })
            .collect();

        let mut events = Vec::with_capacity(partials.iter().map(|(e, _)| e.len()).sum());
        let mut stats = CascadeStats::new(self.lines.len());
        for (chunk_events, chunk_stats) in partials {
            events.extend(chunk_events);
            stats.merge(&chunk_stats);
        }
        // Long-lived states can spill photons past the next cycle's, so
        // the concatenation is not globally time-sorted yet.
        events.sort_unstable_by_key(|e| (e.time_ps, e.cycle, e.line_index));
        SimulationOutput {
            events,
            stats,
            cycles,
            period_ps: self.period_ps,
        }
    }
}

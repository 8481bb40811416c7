//! Triexciton and biexciton fine structure and optical transition tables.
//!
//! The triexciton ground configuration carries an unpaired electron-hole
//! pair in the second orbital levels. Its four spin states form two
//! doublets: a "bright" doublet (pair spin projections combining to
//! magnitude 1) split by the anisotropic exchange, and a "dark" doublet
//! (magnitude 2) with a much smaller splitting, centered a gap below the
//! bright doublet.
//!
//! Recombination of the second-level pair reaches the ground biexciton
//! directly (two cross-rectilinearly polarized lines). Recombination of a
//! first-level pair reaches the excited biexciton states in which both
//! remaining electrons and both remaining holes form spin triplets; those
//! ten transitions are encoded here arrow by arrow as a declarative
//! table, not derived from a many-body Hamiltonian. Grouped by final
//! manifold they yield three near-unpolarized groups from the bright
//! doublet (exact H/V intensity pairs) and two strongly rectilinearly
//! polarized lines from the dark doublet.
//!
//! Level placement and line energies are configurable; the defaults are
//! plausible placeholders, not fitted values.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Photon or transition polarization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
    /// Equal H and V weight (used for spectrum rendering only; every
    /// encoded table line is purely H or purely V).
    Unpolarized,
}

/// Spin projection in units of hbar, limited to the magnitudes occurring
/// in these complexes (0..=3).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub struct SpinProjection(i8);

impl SpinProjection {
    pub fn new(value: i8) -> Result<Self> {
        if value.abs() > 3 {
            return Err(Error::parameter(format!(
                "spin projection {value} out of range (|m| <= 3)"
            )));
        }
        Ok(SpinProjection(value))
    }

    pub fn value(&self) -> i8 {
        self.0
    }
}

impl TryFrom<i8> for SpinProjection {
    type Error = Error;
    fn try_from(v: i8) -> Result<Self> {
        SpinProjection::new(v)
    }
}

impl From<SpinProjection> for i8 {
    fn from(s: SpinProjection) -> i8 {
        s.0
    }
}

/// Which excitonic complex a state belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComplexKind {
    Triexciton,
    /// Excited biexciton with electron-triplet and hole-triplet pairs.
    ExcitedBiexcitonTT,
    GroundBiexciton,
    Exciton,
    Vacuum,
}

/// Member of an anisotropic-exchange doublet. The symmetric combination
/// is placed at the upper energy of its doublet by convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DoubletMember {
    Symmetric,
    Antisymmetric,
    /// Singlet level, not part of a doublet.
    NotSplit,
}

/// One fine-structure eigenstate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitonicState {
    pub kind: ComplexKind,
    /// Magnitude of the pair spin projections the doublet is built from.
    pub spin: SpinProjection,
    pub member: DoubletMember,
    /// Energy relative to the manifold reference in micro-eV. For the
    /// triexciton the reference is the dark-doublet center.
    pub energy_offset_uev: f64,
}

/// One optical transition line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionLine {
    pub line_id: String,
    pub initial: ExcitonicState,
    pub final_state: ExcitonicState,
    pub polarization: Polarization,
    pub photon_energy_mev: f64,
    pub relative_intensity: f64,
}

impl TransitionLine {
    /// True when the line initiates from a dark (spin-2) triexciton state.
    pub fn from_dark(&self) -> bool {
        self.initial.kind == ComplexKind::Triexciton && self.initial.spin.value().abs() == 2
    }
}

/// Names of the transition-energy entries required in
/// [`FineStructureParams::line_energies_mev`]. Each is the photon energy
/// of a transition from the bright-doublet center to the named final
/// manifold's center.
pub const LINE_ENERGY_KEYS: [&str; 5] = ["xx0", "tt2", "tt0", "tt1", "tt3"];

/// Names of the split excited-biexciton doublets requiring an entry in
/// [`FineStructureParams::tt_splittings_uev`].
pub const TT_SPLITTING_KEYS: [&str; 3] = ["tt2", "tt1", "tt3"];

/// All transition line identifiers, in table order.
pub const LINE_IDS: [&str; 12] = [
    "xxx_xx0_h",
    "xxx_xx0_v",
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

/// Fine-structure and line-table parameters.
///
/// Energies arrive in two units on purpose: splittings in micro-eV (the
/// scale of exchange interactions) and line positions in milli-eV (the
/// scale of interband transitions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FineStructureParams {
    /// Splitting of the bright triexciton doublet.
    pub bright_splitting_uev: f64,
    /// Splitting of the dark triexciton doublet.
    pub dark_splitting_uev: f64,
    /// Energy of the bright-doublet center above the dark-doublet center.
    pub bright_dark_gap_uev: f64,
    /// Lines closer than this are treated as one spectral feature when
    /// grouping by energy.
    pub degeneracy_tol_uev: f64,
    /// Photon energy (meV) from the bright-doublet center to each final
    /// manifold center; keys of [`LINE_ENERGY_KEYS`].
    pub line_energies_mev: BTreeMap<String, f64>,
    /// Doublet splittings (micro-eV) of the split excited-biexciton
    /// manifolds; keys of [`TT_SPLITTING_KEYS`].
    pub tt_splittings_uev: BTreeMap<String, f64>,
    /// Relative intensity per line id. A line set to zero is omitted from
    /// the table. Missing ids fall back to the built-in defaults.
    pub line_intensities: BTreeMap<String, f64>,
}

impl Default for FineStructureParams {
    fn default() -> Self {
        let line_energies_mev = BTreeMap::from(
            [
                ("xx0", 1298.0),
                ("tt2", 1273.0),
                ("tt0", 1272.7),
                ("tt1", 1272.4),
                ("tt3", 1272.35),
            ]
            .map(|(k, v)| (k.to_string(), v)),
        );
        let tt_splittings_uev = BTreeMap::from(
            [("tt2", 6.0), ("tt1", 6.0), ("tt3", 6.0)].map(|(k, v)| (k.to_string(), v)),
        );
        FineStructureParams {
            bright_splitting_uev: 6.0,
            dark_splitting_uev: 1.0,
            bright_dark_gap_uev: 250.0,
            degeneracy_tol_uev: 1.0,
            line_energies_mev,
            tt_splittings_uev,
            line_intensities: default_intensities(),
        }
    }
}

fn default_intensities() -> BTreeMap<String, f64> {
    BTreeMap::from(
        [
            ("xxx_xx0_h", 1.0),
            ("xxx_xx0_v", 1.0),
            ("xxx_tt2_h1", 1.0),
            ("xxx_tt2_v1", 1.0),
            ("xxx_tt2_h2", 1.0),
            ("xxx_tt2_v2", 1.0),
            ("xxx_tt0_h", 0.8),
            ("xxx_tt0_v", 0.8),
            ("xxx_tt1_h", 0.7),
            ("xxx_tt1_v", 0.7),
            ("xxx_tt3_h", 1.3),
            ("xxx_tt3_v", 1.3),
        ]
        .map(|(k, v)| (k.to_string(), v)),
    )
}

impl FineStructureParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("bright_splitting_uev", self.bright_splitting_uev),
            ("dark_splitting_uev", self.dark_splitting_uev),
            ("bright_dark_gap_uev", self.bright_dark_gap_uev),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::parameter(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if !self.degeneracy_tol_uev.is_finite() || self.degeneracy_tol_uev <= 0.0 {
            return Err(Error::parameter(format!(
                "degeneracy_tol_uev must be positive, got {}",
                self.degeneracy_tol_uev
            )));
        }
        for key in LINE_ENERGY_KEYS {
            match self.line_energies_mev.get(key) {
                Some(v) if v.is_finite() => {}
                Some(v) => {
                    return Err(Error::config(format!("line energy {key:?} is not finite: {v}")))
                }
                None => {
                    return Err(Error::config(format!(
                        "missing line energy for manifold {key:?}"
                    )))
                }
            }
        }
        for key in self.line_energies_mev.keys() {
            if !LINE_ENERGY_KEYS.contains(&key.as_str()) {
                return Err(Error::config(format!("unknown line energy key {key:?}")));
            }
        }
        for key in TT_SPLITTING_KEYS {
            match self.tt_splittings_uev.get(key) {
                Some(v) if v.is_finite() && *v >= 0.0 => {}
                Some(v) => {
                    return Err(Error::config(format!(
                        "splitting {key:?} must be finite and non-negative, got {v}"
                    )))
                }
                None => {
                    return Err(Error::config(format!(
                        "missing doublet splitting for manifold {key:?}"
                    )))
                }
            }
        }
        for key in self.tt_splittings_uev.keys() {
            if !TT_SPLITTING_KEYS.contains(&key.as_str()) {
                return Err(Error::config(format!("unknown splitting key {key:?}")));
            }
        }
        for (key, v) in &self.line_intensities {
            if !LINE_IDS.contains(&key.as_str()) {
                return Err(Error::config(format!("unknown line id {key:?} in intensities")));
            }
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::config(format!(
                    "intensity of {key:?} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn intensity(&self, line_id: &str) -> f64 {
        self.line_intensities
            .get(line_id)
            .copied()
            .unwrap_or_else(|| default_intensities()[line_id])
    }

    fn line_energy(&self, key: &str) -> f64 {
        self.line_energies_mev[key]
    }

    fn tt_splitting(&self, key: &str) -> f64 {
        self.tt_splittings_uev[key]
    }
}

const UEV_PER_MEV: f64 = 1e3;

/// Builds the four triexciton fine-structure states.
///
/// Returned in descending energy order: bright symmetric, bright
/// antisymmetric, dark symmetric, dark antisymmetric. Offsets are
/// relative to the dark-doublet center, so with bright splitting 30,
/// dark splitting 1 and gap 300 (micro-eV) the energies are
/// {+315, +285, +0.5, -0.5}.
pub fn build_triexciton_levels(params: &FineStructureParams) -> Result<Vec<ExcitonicState>> {
    params.validate()?;
    let bs = params.bright_splitting_uev;
    let ds = params.dark_splitting_uev;
    let gap = params.bright_dark_gap_uev;
    let state = |spin: i8, member: DoubletMember, offset: f64| ExcitonicState {
        kind: ComplexKind::Triexciton,
        spin: SpinProjection::new(spin).expect("spin within range"),
        member,
        energy_offset_uev: offset,
    };
    Ok(vec![
        state(1, DoubletMember::Symmetric, gap + bs / 2.0),
        state(1, DoubletMember::Antisymmetric, gap - bs / 2.0),
        state(2, DoubletMember::Symmetric, ds / 2.0),
        state(2, DoubletMember::Antisymmetric, -ds / 2.0),
    ])
}

fn bright_state(levels: &[ExcitonicState], member: DoubletMember) -> Result<ExcitonicState> {
    levels
        .iter()
        .find(|s| {
            s.kind == ComplexKind::Triexciton && s.spin.value().abs() == 1 && s.member == member
        })
        .cloned()
        .ok_or_else(|| Error::parameter("level set lacks a bright triexciton doublet".to_string()))
}

fn dark_state(levels: &[ExcitonicState], member: DoubletMember) -> Result<ExcitonicState> {
    levels
        .iter()
        .find(|s| {
            s.kind == ComplexKind::Triexciton && s.spin.value().abs() == 2 && s.member == member
        })
        .cloned()
        .ok_or_else(|| Error::parameter("level set lacks a dark triexciton doublet".to_string()))
}

/// Offset of a triexciton state relative to the bright-doublet center,
/// in micro-eV. Line energies are referenced to that center.
fn initial_offset_uev(state: &ExcitonicState, params: &FineStructureParams) -> f64 {
    state.energy_offset_uev - params.bright_dark_gap_uev
}

fn final_tt_state(spin: i8, member: DoubletMember, splitting_uev: f64) -> ExcitonicState {
    let offset = match member {
        DoubletMember::Symmetric => splitting_uev / 2.0,
        DoubletMember::Antisymmetric => -splitting_uev / 2.0,
        DoubletMember::NotSplit => 0.0,
    };
    ExcitonicState {
        kind: ComplexKind::ExcitedBiexcitonTT,
        spin: SpinProjection::new(spin).expect("spin within range"),
        member,
        energy_offset_uev: offset,
    }
}

fn make_line(
    line_id: &str,
    initial: ExcitonicState,
    final_state: ExcitonicState,
    polarization: Polarization,
    base_energy_mev: f64,
    params: &FineStructureParams,
) -> Option<TransitionLine> {
    let intensity = params.intensity(line_id);
    if intensity == 0.0 {
        return None;
    }
    let photon_energy_mev = base_energy_mev
        + (initial_offset_uev(&initial, params) - final_state.energy_offset_uev) / UEV_PER_MEV;
    Some(TransitionLine {
        line_id: line_id.to_string(),
        initial,
        final_state,
        polarization,
        photon_energy_mev,
        relative_intensity: intensity,
    })
}

/// The two direct lines: second-level pair recombination from the bright
/// doublet to the ground biexciton, one H and one V, their energy
/// difference equal to the bright splitting. Dark states have no direct
/// line.
pub fn direct_transition_table(
    levels: &[ExcitonicState],
    params: &FineStructureParams,
) -> Result<Vec<TransitionLine>> {
    params.validate()?;
    let xx0 = ExcitonicState {
        kind: ComplexKind::GroundBiexciton,
        spin: SpinProjection::new(0)?,
        member: DoubletMember::NotSplit,
        energy_offset_uev: 0.0,
    };
    let base = params.line_energy("xx0");
    let b_sym = bright_state(levels, DoubletMember::Symmetric)?;
    let b_anti = bright_state(levels, DoubletMember::Antisymmetric)?;
    Ok([
        make_line("xxx_xx0_h", b_sym, xx0.clone(), Polarization::H, base, params),
        make_line("xxx_xx0_v", b_anti, xx0, Polarization::V, base, params),
    ]
    .into_iter()
    .flatten()
    .collect())
}

/// The ten indirect lines: first-level pair recombination into the
/// triplet-triplet excited biexciton manifolds.
///
/// Bright-initiated arrows (eight) come in exact H/V intensity pairs and
/// fall into three final-manifold groups: the spin-(+/-2) doublet (four
/// arrows), the spin-0 level and the spin-(+/-1) doublet (two arrows
/// each). Dark-initiated arrows (two) go to the spin-(+/-3) doublet, one
/// purely H and one purely V.
pub fn indirect_transition_table(
    levels: &[ExcitonicState],
    params: &FineStructureParams,
) -> Result<Vec<TransitionLine>> {
    params.validate()?;
    let b_sym = bright_state(levels, DoubletMember::Symmetric)?;
    let b_anti = bright_state(levels, DoubletMember::Antisymmetric)?;
    let d_sym = dark_state(levels, DoubletMember::Symmetric)?;
    let d_anti = dark_state(levels, DoubletMember::Antisymmetric)?;

    let tt2 = |m| final_tt_state(2, m, params.tt_splitting("tt2"));
    let tt1 = |m| final_tt_state(1, m, params.tt_splitting("tt1"));
    let tt3 = |m| final_tt_state(3, m, params.tt_splitting("tt3"));
    let tt0 = final_tt_state(0, DoubletMember::NotSplit, 0.0);

    let e2 = params.line_energy("tt2");
    let e0 = params.line_energy("tt0");
    let e1 = params.line_energy("tt1");
    let e3 = params.line_energy("tt3");

    use DoubletMember::{Antisymmetric as A, Symmetric as S};
    use Polarization::{H, V};
    let arrows = [
        make_line("xxx_tt2_h1", b_sym.clone(), tt2(S), H, e2, params),
        make_line("xxx_tt2_v1", b_sym.clone(), tt2(A), V, e2, params),
        make_line("xxx_tt2_h2", b_anti.clone(), tt2(A), H, e2, params),
        make_line("xxx_tt2_v2", b_anti.clone(), tt2(S), V, e2, params),
        make_line("xxx_tt0_h", b_sym.clone(), tt0.clone(), H, e0, params),
        make_line("xxx_tt0_v", b_anti.clone(), tt0, V, e0, params),
        make_line("xxx_tt1_h", b_sym, tt1(S), H, e1, params),
        make_line("xxx_tt1_v", b_anti, tt1(A), V, e1, params),
        make_line("xxx_tt3_h", d_sym, tt3(S), H, e3, params),
        make_line("xxx_tt3_v", d_anti, tt3(A), V, e3, params),
    ];
    Ok(arrows.into_iter().flatten().collect())
}

/// Indirect lines organized structurally by initial doublet and final
/// manifold.
#[derive(Debug, Clone)]
pub struct IndirectGroups {
    /// Bright-initiated groups keyed by final spin magnitude (2, 0, 1).
    pub bright_groups: Vec<Vec<TransitionLine>>,
    /// Dark-initiated lines.
    pub dark_lines: Vec<TransitionLine>,
}

/// Groups indirect lines by final manifold. Bright-initiated groups hold
/// an equal number of H and V members whenever intensities keep their
/// default pairing; dark-initiated lines stay individual. Structural
/// groups coincide with energy clusters whenever intra-manifold
/// splittings stay below the clustering tolerance and manifold spacings
/// exceed it.
pub fn group_indirect_lines(lines: &[TransitionLine]) -> IndirectGroups {
    let mut bright_groups = Vec::new();
    for spin in [2, 0, 1] {
        let group: Vec<TransitionLine> = lines
            .iter()
            .filter(|l| !l.from_dark() && l.final_state.spin.value().abs() == spin)
            .cloned()
            .collect();
        if !group.is_empty() {
            bright_groups.push(group);
        }
    }
    let dark_lines = lines.iter().filter(|l| l.from_dark()).cloned().collect();
    IndirectGroups {
        bright_groups,
        dark_lines,
    }
}

/// Clusters lines into energy groups: sorted by photon energy, a gap
/// larger than `tol_uev` starts a new group. Returns indices into the
/// input slice.
pub fn group_lines_by_energy(lines: &[TransitionLine], tol_uev: f64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..lines.len()).collect();
    order.sort_by(|&a, &b| {
        lines[a]
            .photon_energy_mev
            .total_cmp(&lines[b].photon_energy_mev)
    });
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for idx in order {
        let energy = lines[idx].photon_energy_mev;
        match groups.last_mut() {
            Some(group)
                if (energy - lines[*group.last().unwrap()].photon_energy_mev) * UEV_PER_MEV
                    <= tol_uev =>
            {
                group.push(idx);
            }
            _ => groups.push(vec![idx]),
        }
    }
    groups
}

/// Renders the polarization-resolved emission spectrum on an energy grid.
///
/// Each line contributes a Lorentzian of full width at half maximum
/// `broadening_uev` integrating to its relative intensity (peak value
/// `2 I / (pi Gamma)`). A purely polarized line contributes only to its
/// own polarization; an unpolarized line contributes half to each.
pub fn render_spectrum(
    lines: &[TransitionLine],
    polarization: Polarization,
    broadening_uev: f64,
    grid_mev: &[f64],
) -> Result<Vec<f64>> {
    if polarization == Polarization::Unpolarized {
        return Err(Error::parameter(
            "render one polarization at a time (H or V)".to_string(),
        ));
    }
    if !broadening_uev.is_finite() || broadening_uev <= 0.0 {
        return Err(Error::parameter(format!(
            "broadening must be positive, got {broadening_uev}"
        )));
    }
    if grid_mev.is_empty() {
        return Err(Error::parameter("energy grid is empty"));
    }
    if grid_mev.iter().any(|e| !e.is_finite()) || grid_mev.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::parameter(
            "energy grid must be finite and strictly increasing".to_string(),
        ));
    }

    let half_width_mev = broadening_uev / UEV_PER_MEV / 2.0;
    let mut spectrum = vec![0.0; grid_mev.len()];
    for line in lines {
        let weight = match (line.polarization, polarization) {
            (Polarization::Unpolarized, _) => 0.5,
            (p, q) if p == q => 1.0,
            _ => continue,
        } * line.relative_intensity;
        for (s, &e) in spectrum.iter_mut().zip(grid_mev) {
            let de = e - line.photon_energy_mev;
            *s += weight * half_width_mev / (std::f64::consts::PI * (de * de + half_width_mev * half_width_mev));
        }
    }
    Ok(spectrum)
}

/// Convenience: uniform grid of `points` energies across `[lo, hi]` meV.
pub fn energy_grid(lo_mev: f64, hi_mev: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !lo_mev.is_finite() || !hi_mev.is_finite() || lo_mev >= hi_mev {
        return Err(Error::parameter(format!(
            "grid needs lo < hi and at least 2 points, got [{lo_mev}, {hi_mev}] x {points}"
        )));
    }
    let step = (hi_mev - lo_mev) / (points - 1) as f64;
    Ok((0..points).map(|i| lo_mev + step * i as f64).collect())
}

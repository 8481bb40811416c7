//! Run configuration. One TOML document drives every subcommand, so a
//! run is reproducible from its config and master seed alone. Unknown
//! keys are rejected rather than ignored: a typo in a rate name should
//! fail loudly, not silently fall back to a default.

use serde::{Deserialize, Serialize};
use std::path::Path;

use triphoton::cascade::{default_detector_channels, CascadeModel, DetectorChannel};
use triphoton::{BinningSpec, Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every random stream of a run derives from it.
    pub seed: u64,
    /// Excitation cycles to simulate.
    pub cycles: u64,
    pub cascade: CascadeModel,
    /// Detector arms, written as repeated `[[detector]]` tables.
    pub detector: Vec<DetectorChannel>,
    pub binning: BinningConfig,
    pub events: EventsConfig,
    pub spectrum: SpectrumConfig,
    pub rabi: RabiConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 7,
            cycles: 1_000_000,
            cascade: CascadeModel::default(),
            detector: default_detector_channels(),
            binning: BinningConfig::default(),
            events: EventsConfig::default(),
            spectrum: SpectrumConfig::default(),
            rabi: RabiConfig::default(),
        }
    }
}

/// Correlation histogram axes: symmetric window `[-half, +half)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BinningConfig {
    pub half_window_ps: i64,
    pub bin_width_ps: i64,
    /// Bin width for both axes of g3 grids. Coarser than the g2 width
    /// by default: a full two-dimensional grid at g2 resolution is a
    /// million cells, far more than triple statistics usually support.
    pub g3_bin_width_ps: i64,
}

impl Default for BinningConfig {
    fn default() -> Self {
        BinningConfig {
            half_window_ps: 200_000,
            bin_width_ps: 400,
            g3_bin_width_ps: 4_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventsConfig {
    /// Clustering window for multi-photon events: long against one
    /// cascade, short against the excitation period.
    pub window_ps: u64,
}

impl Default for EventsConfig {
    fn default() -> Self {
        EventsConfig { window_ps: 8_000 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub lo_mev: f64,
    pub hi_mev: f64,
    pub points: usize,
    /// Lorentzian full width at half maximum, micro-eV.
    pub broadening_uev: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            lo_mev: 1271.8,
            hi_mev: 1298.8,
            points: 5401,
            broadening_uev: 15.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RabiConfig {
    /// Peak detected intensity per cycle, in (0, 1].
    pub amplitude: f64,
    pub damping_per_sqrt_uw: f64,
    /// Cycles sampled per sweep point; zero means the exact model value.
    pub cycles_per_point: u64,
    pub power_min_uw: f64,
    pub power_max_uw: f64,
    pub power_points: usize,
}

impl Default for RabiConfig {
    fn default() -> Self {
        RabiConfig {
            amplitude: 0.8,
            damping_per_sqrt_uw: 0.05,
            cycles_per_point: 0,
            power_min_uw: 0.0,
            power_max_uw: 40.0,
            power_points: 61,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.cascade.validate()?;
        if self.detector.is_empty() {
            return Err(Error::config("at least one detector arm is required"));
        }
        for arm in &self.detector {
            arm.validate()?;
        }
        BinningSpec::symmetric(self.binning.half_window_ps, self.binning.bin_width_ps)?;
        BinningSpec::symmetric(self.binning.half_window_ps, self.binning.g3_bin_width_ps)?;
        if self.events.window_ps == 0 {
            return Err(Error::config("events.window_ps must be positive"));
        }
        if self.events.window_ps >= self.cascade.excitation.period_ps() {
            return Err(Error::config(format!(
                "events.window_ps = {} must be shorter than the {} ps excitation period",
                self.events.window_ps,
                self.cascade.excitation.period_ps()
            )));
        }
        let s = &self.spectrum;
        if !s.lo_mev.is_finite() || !s.hi_mev.is_finite() || s.lo_mev >= s.hi_mev || s.points < 2 {
            return Err(Error::config(format!(
                "spectrum grid needs lo < hi and at least 2 points, got [{}, {}] x {}",
                s.lo_mev, s.hi_mev, s.points
            )));
        }
        if !s.broadening_uev.is_finite() || s.broadening_uev <= 0.0 {
            return Err(Error::config(format!(
                "spectrum.broadening_uev must be positive, got {}",
                s.broadening_uev
            )));
        }
        let r = &self.rabi;
        if !(r.amplitude > 0.0 && r.amplitude <= 1.0) {
            return Err(Error::config(format!(
                "rabi.amplitude must lie in (0, 1], got {}",
                r.amplitude
            )));
        }
        if !(r.power_min_uw >= 0.0 && r.power_min_uw < r.power_max_uw) || r.power_points < 3 {
            return Err(Error::config(format!(
                "rabi power sweep needs 0 <= min < max and at least 3 points, got [{}, {}] x {}",
                r.power_min_uw, r.power_max_uw, r.power_points
            )));
        }
        if !r.damping_per_sqrt_uw.is_finite() || r.damping_per_sqrt_uw < 0.0 {
            return Err(Error::config(format!(
                "rabi.damping_per_sqrt_uw must be non-negative, got {}",
                r.damping_per_sqrt_uw
            )));
        }
        Ok(())
    }

    /// The configured sweep grid, `power_points` evenly spaced powers.
    pub fn rabi_powers(&self) -> Vec<f64> {
        let r = &self.rabi;
        let n = r.power_points;
        (0..n)
            .map(|i| {
                r.power_min_uw
                    + (r.power_max_uw - r.power_min_uw) * i as f64 / (n - 1) as f64
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_validates() {
        RunConfig::default().validate().expect("defaults must be usable");
    }

    #[test]
    fn toml_round_trip_preserves_config() {
        let config = RunConfig::default();
        let text = toml::to_string(&config).expect("serialize");
        let back: RunConfig = toml::from_str(&text).expect("parse");
        assert_eq!(back.seed, config.seed);
        assert_eq!(back.cascade, config.cascade);
        assert_eq!(back.detector, config.detector);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<RunConfig>("cyles = 5\n").unwrap_err();
        assert!(err.to_string().contains("cyles"), "got: {err}");
        let err = toml::from_str::<RunConfig>("[cascade]\nbranch_dierct = 0.2\n").unwrap_err();
        assert!(err.to_string().contains("branch_dierct"), "got: {err}");
    }

    #[test]
    fn partial_config_fills_defaults() {
        let config: RunConfig = toml::from_str(
            "seed = 42\n[cascade]\nbranch_direct = 0.25\n[binning]\nbin_width_ps = 1000\n",
        )
        .unwrap();
        assert_eq!(config.seed, 42);
        assert_eq!(config.cascade.branch_direct, 0.25);
        assert_eq!(config.binning.bin_width_ps, 1000);
        assert_eq!(config.binning.half_window_ps, 200_000);
        assert_eq!(config.cycles, 1_000_000);
    }

    #[test]
    fn sweep_grid_spans_the_configured_range() {
        let config = RunConfig::default();
        let powers = config.rabi_powers();
        assert_eq!(powers.len(), config.rabi.power_points);
        assert_eq!(powers[0], config.rabi.power_min_uw);
        assert_eq!(*powers.last().unwrap(), config.rabi.power_max_uw);
    }
}

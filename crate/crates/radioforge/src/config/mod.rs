//! Master configuration: one JSON document drives every random draw.
//!
//! The schema is strict: unknown keys anywhere in the document are a hard
//! error, so typos cannot silently fall back to defaults. Every field has
//! a default matching the shipped reference configuration, and a config
//! file only needs to state what it changes. A machine-readable schema
//! copy lives in `docs/config-schema.json`.

mod dist;
pub mod scenario;

pub use dist::ParameterDistribution;
pub use scenario::{
    sample_scenario, LinkChannel, LinkPlan, RxPlan, Sampler, ScenarioPlan, TxPlan,
};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Window;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MasterConfig {
    /// Root of every seed derivation in the dataset.
    #[serde(default)]
    pub master_seed: u64,
    /// Number of scenarios (frame indices). Each scenario produces one
    /// capture per active receiver.
    #[serde(default = "default_frame_count")]
    pub frame_count: u64,
    /// Receiver sample rate in Hz. Must exceed twice the observable band
    /// width.
    #[serde(default = "default_clock_rate")]
    pub master_clock_rate_hz: f64,
    /// Absolute edges [low, high] of the band emitters may occupy, in Hz.
    /// Captures are complex baseband about the band center.
    #[serde(default = "default_band")]
    pub observable_band_hz: [f64; 2],
    /// RF center frequency used for wavelength-dependent physics (path
    /// loss, Doppler, ray tracing). The observable band rides on it.
    #[serde(default = "default_rf_carrier")]
    pub rf_carrier_hz: f64,
    /// Reference temperature T0 for noise-figure conversion, kelvin.
    #[serde(default = "default_t0")]
    pub reference_temperature_k: f64,
    #[serde(default)]
    pub modulations: ModulationSelection,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub spectrogram: SpectrogramConfig,
    #[serde(default)]
    pub splits: SplitConfig,
    #[serde(default)]
    pub distributions: Distributions,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationSelection {
    /// Class names to draw from; `null` means the full registry.
    #[serde(default)]
    pub classes: Option<Vec<String>>,
    /// Per-class sampling weight overrides (name -> weight). Classes not
    /// listed keep their registry default weight.
    #[serde(default)]
    pub weight_overrides: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    /// Relative weight of statistical (Rayleigh/Rician) channels.
    #[serde(default = "default_statistical_weight")]
    pub statistical_weight: f64,
    /// Relative weight of ray-traced channels. Requires `scene_path`.
    #[serde(default)]
    pub raytrace_weight: f64,
    /// Among statistical channels, fraction drawn as Rician (rest Rayleigh).
    #[serde(default = "default_rician_fraction")]
    pub rician_fraction: f64,
    /// OSM building map for the ray tracer.
    #[serde(default)]
    pub scene_path: Option<PathBuf>,
    /// Per-bounce reflection coefficient for traced rays.
    #[serde(default = "default_reflection_coefficient")]
    pub reflection_coefficient: f64,
    /// Highest reflection order the tracer searches (0 = LOS only).
    #[serde(default = "default_reflection_order")]
    pub max_reflection_order: u32,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Marginal probability that a frame contains at least one pair of
    /// signals overlapping in both time and frequency.
    #[serde(default = "default_overlap_probability")]
    pub overlap_probability: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrogramConfig {
    #[serde(default = "default_fft_size")]
    pub fft_size: usize,
    #[serde(default = "default_hop")]
    pub hop: usize,
    #[serde(default = "default_window")]
    pub window: Window,
    /// Display range below the peak, dB, for PNG rendering.
    #[serde(default = "default_dynamic_range")]
    pub dynamic_range_db: f64,
}

impl Default for SpectrogramConfig {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default = "default_train")]
    pub train: u32,
    #[serde(default = "default_val")]
    pub val: u32,
    #[serde(default = "default_test")]
    pub test: u32,
}

impl Default for SplitConfig {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

/// Named distributions for every sampled quantity. Defaults give the
/// reference dataset mix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Distributions {
    #[serde(default = "default_count_1_4")]
    pub tx_count: ParameterDistribution,
    #[serde(default = "default_count_1_4")]
    pub rx_count: ParameterDistribution,
    #[serde(default = "default_count_1_4")]
    pub tx_antennas: ParameterDistribution,
    #[serde(default = "default_count_1_4")]
    pub rx_antennas: ParameterDistribution,
    #[serde(default = "default_segments")]
    pub segments_per_tx: ParameterDistribution,
    #[serde(default = "default_symbols")]
    pub symbols_per_segment: ParameterDistribution,
    #[serde(default = "default_symbol_rate")]
    pub symbol_rate_hz: ParameterDistribution,
    #[serde(default = "default_rolloff")]
    pub rolloff: ParameterDistribution,
    #[serde(default = "default_tx_power")]
    pub tx_power_dbm: ParameterDistribution,
    #[serde(default = "default_iq_amp")]
    pub iq_amplitude_db: ParameterDistribution,
    #[serde(default = "default_iq_phase")]
    pub iq_phase_deg: ParameterDistribution,
    #[serde(default = "default_dc_offset")]
    pub dc_offset_db: ParameterDistribution,
    #[serde(default = "default_phase_noise")]
    pub phase_noise_level_dbchz: ParameterDistribution,
    #[serde(default = "default_iip3")]
    pub iip3_dbm: ParameterDistribution,
    #[serde(default = "default_noise_figure")]
    pub noise_figure_db: ParameterDistribution,
    #[serde(default = "default_rician_k")]
    pub rician_k: ParameterDistribution,
    #[serde(default = "default_extra_paths")]
    pub extra_path_count: ParameterDistribution,
    #[serde(default = "default_path_delay")]
    pub path_delay_s: ParameterDistribution,
    #[serde(default = "default_path_decay")]
    pub path_decay_db: ParameterDistribution,
    #[serde(default = "default_speed")]
    pub relative_speed_mps: ParameterDistribution,
    #[serde(default = "default_distance")]
    pub distance_m: ParameterDistribution,
    #[serde(default = "default_path_loss_exponent")]
    pub path_loss_exponent: ParameterDistribution,
    #[serde(default = "default_antenna_height")]
    pub antenna_height_m: ParameterDistribution,
    #[serde(default = "default_idle_gap")]
    pub idle_gap_factor: ParameterDistribution,
    #[serde(default = "default_overlap_extent")]
    pub overlap_extent: ParameterDistribution,
}

impl Default for Distributions {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

fn default_frame_count() -> u64 {
    100
}
fn default_clock_rate() -> f64 {
    1.11e6
}
fn default_band() -> [f64; 2] {
    [0.0, 500_000.0]
}
fn default_rf_carrier() -> f64 {
    2.4e9
}
fn default_t0() -> f64 {
    290.0
}
fn default_statistical_weight() -> f64 {
    1.0
}
fn default_rician_fraction() -> f64 {
    0.5
}
fn default_reflection_coefficient() -> f64 {
    -0.7
}
fn default_reflection_order() -> u32 {
    2
}
fn default_overlap_probability() -> f64 {
    0.15
}
fn default_fft_size() -> usize {
    1024
}
fn default_hop() -> usize {
    256
}
fn default_window() -> Window {
    Window::Hamming
}
fn default_dynamic_range() -> f64 {
    80.0
}
fn default_train() -> u32 {
    8
}
fn default_val() -> u32 {
    1
}
fn default_test() -> u32 {
    1
}
fn default_count_1_4() -> ParameterDistribution {
    ParameterDistribution::uniform_discrete(1, 4)
}
fn default_segments() -> ParameterDistribution {
    ParameterDistribution::uniform_discrete(1, 3)
}
fn default_symbols() -> ParameterDistribution {
    ParameterDistribution::uniform_discrete(500, 2000)
}
fn default_symbol_rate() -> ParameterDistribution {
    ParameterDistribution::uniform(30e3, 50e3)
}
fn default_rolloff() -> ParameterDistribution {
    ParameterDistribution::uniform(0.15, 0.5)
}
fn default_tx_power() -> ParameterDistribution {
    ParameterDistribution::uniform(-10.0, 20.0)
}
fn default_iq_amp() -> ParameterDistribution {
    ParameterDistribution::uniform(0.0, 5.0)
}
fn default_iq_phase() -> ParameterDistribution {
    ParameterDistribution::uniform(0.0, 5.0)
}
fn default_dc_offset() -> ParameterDistribution {
    ParameterDistribution::uniform(-60.0, -40.0)
}
fn default_phase_noise() -> ParameterDistribution {
    ParameterDistribution::uniform(-150.0, -100.0)
}
fn default_iip3() -> ParameterDistribution {
    ParameterDistribution::uniform(20.0, 40.0)
}
fn default_noise_figure() -> ParameterDistribution {
    ParameterDistribution::uniform(10.0, 20.0)
}
fn default_rician_k() -> ParameterDistribution {
    ParameterDistribution::uniform(1.0, 9.0)
}
fn default_extra_paths() -> ParameterDistribution {
    ParameterDistribution::uniform_discrete(1, 3)
}
fn default_path_delay() -> ParameterDistribution {
    ParameterDistribution::log_uniform(50e-9, 5e-6)
}
fn default_path_decay() -> ParameterDistribution {
    ParameterDistribution::uniform(2.0, 8.0)
}
fn default_speed() -> ParameterDistribution {
    ParameterDistribution::uniform(1.5, 28.0)
}
fn default_distance() -> ParameterDistribution {
    ParameterDistribution::log_uniform(10.0, 1000.0)
}
fn default_path_loss_exponent() -> ParameterDistribution {
    ParameterDistribution::uniform(2.0, 3.5)
}
fn default_antenna_height() -> ParameterDistribution {
    ParameterDistribution::uniform(1.5, 30.0)
}
fn default_idle_gap() -> ParameterDistribution {
    ParameterDistribution::uniform(0.1, 1.0)
}
fn default_overlap_extent() -> ParameterDistribution {
    ParameterDistribution::uniform(0.0, 0.15)
}

impl Default for MasterConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config must deserialize")
    }
}

impl MasterConfig {
    /// Parses and validates a config file. Relative `scene_path` entries
    /// resolve against the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: MasterConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(scene) = cfg.channel.scene_path.take() {
            let resolved = if scene.is_relative() {
                path.parent().unwrap_or(Path::new(".")).join(scene)
            } else {
                scene
            };
            cfg.channel.scene_path = Some(resolved);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn band_width(&self) -> f64 {
        self.observable_band_hz[1] - self.observable_band_hz[0]
    }

    pub fn band_center(&self) -> f64 {
        0.5 * (self.observable_band_hz[0] + self.observable_band_hz[1])
    }

    /// Checks every cross-field rule the schema cannot express.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.frame_count == 0 {
            return fail("frame_count must be at least 1".into());
        }
        let [lo, hi] = self.observable_band_hz;
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return fail(format!("observable_band_hz [{lo}, {hi}] must be ordered and finite"));
        }
        if self.master_clock_rate_hz <= 2.0 * self.band_width() {
            return fail(format!(
                "master_clock_rate_hz {} must exceed twice the observable band width {}",
                self.master_clock_rate_hz,
                self.band_width()
            ));
        }
        if self.rf_carrier_hz <= 0.0 {
            return fail("rf_carrier_hz must be positive".into());
        }
        if self.reference_temperature_k <= 0.0 {
            return fail("reference_temperature_k must be positive".into());
        }
        let ch = &self.channel;
        if ch.statistical_weight < 0.0 || ch.raytrace_weight < 0.0 {
            return fail("channel family weights must be non-negative".into());
        }
        if ch.statistical_weight + ch.raytrace_weight <= 0.0 {
            return fail("channel family weights must not both be zero".into());
        }
        if !(0.0..=1.0).contains(&ch.rician_fraction) {
            return fail("channel.rician_fraction must lie in [0, 1]".into());
        }
        if ch.raytrace_weight > 0.0 {
            match &ch.scene_path {
                None => {
                    return fail("channel.raytrace_weight > 0 requires channel.scene_path".into());
                }
                Some(p) if !p.exists() => {
                    return fail(format!("channel.scene_path {} does not exist", p.display()));
                }
                _ => {}
            }
        }
        if ch.max_reflection_order > 2 {
            return fail("channel.max_reflection_order is limited to 2".into());
        }
        if !(-1.0..=0.0).contains(&ch.reflection_coefficient) {
            return fail("channel.reflection_coefficient must lie in [-1, 0]".into());
        }
        if !(0.0..=1.0).contains(&self.schedule.overlap_probability) {
            return fail("schedule.overlap_probability must lie in [0, 1]".into());
        }
        let sg = &self.spectrogram;
        if sg.fft_size < 8 || !sg.fft_size.is_power_of_two() {
            return fail("spectrogram.fft_size must be a power of two >= 8".into());
        }
        if sg.hop == 0 || sg.hop > sg.fft_size {
            return fail("spectrogram.hop must lie in [1, fft_size]".into());
        }
        if sg.dynamic_range_db <= 0.0 {
            return fail("spectrogram.dynamic_range_db must be positive".into());
        }
        if self.splits.train == 0 || self.splits.val == 0 || self.splits.test == 0 {
            return fail("split ratios must all be positive".into());
        }
        self.validate_distributions()?;
        self.validate_modulations()
    }

    fn validate_distributions(&self) -> Result<()> {
        let d = &self.distributions;
        let named: [(&str, &ParameterDistribution); 25] = [
            ("tx_count", &d.tx_count),
            ("rx_count", &d.rx_count),
            ("tx_antennas", &d.tx_antennas),
            ("rx_antennas", &d.rx_antennas),
            ("segments_per_tx", &d.segments_per_tx),
            ("symbols_per_segment", &d.symbols_per_segment),
            ("symbol_rate_hz", &d.symbol_rate_hz),
            ("rolloff", &d.rolloff),
            ("tx_power_dbm", &d.tx_power_dbm),
            ("iq_amplitude_db", &d.iq_amplitude_db),
            ("iq_phase_deg", &d.iq_phase_deg),
            ("dc_offset_db", &d.dc_offset_db),
            ("phase_noise_level_dbchz", &d.phase_noise_level_dbchz),
            ("iip3_dbm", &d.iip3_dbm),
            ("noise_figure_db", &d.noise_figure_db),
            ("rician_k", &d.rician_k),
            ("extra_path_count", &d.extra_path_count),
            ("path_delay_s", &d.path_delay_s),
            ("path_decay_db", &d.path_decay_db),
            ("relative_speed_mps", &d.relative_speed_mps),
            ("distance_m", &d.distance_m),
            ("path_loss_exponent", &d.path_loss_exponent),
            ("antenna_height_m", &d.antenna_height_m),
            ("idle_gap_factor", &d.idle_gap_factor),
            ("overlap_extent", &d.overlap_extent),
        ];
        for (name, dist) in named {
            dist.validate(name)?;
        }
        let positive_min: [(&str, &ParameterDistribution, f64); 7] = [
            ("tx_count", &d.tx_count, 1.0),
            ("rx_count", &d.rx_count, 1.0),
            ("tx_antennas", &d.tx_antennas, 1.0),
            ("rx_antennas", &d.rx_antennas, 1.0),
            ("segments_per_tx", &d.segments_per_tx, 1.0),
            ("symbols_per_segment", &d.symbols_per_segment, 16.0),
            ("symbol_rate_hz", &d.symbol_rate_hz, 1.0),
        ];
        for (name, dist, min) in positive_min {
            if dist.min_value() < min {
                return Err(Error::Config(format!("distribution `{name}` must not go below {min}")));
            }
        }
        if d.tx_antennas.max_value() > 4.0 {
            return Err(Error::Config(
                "tx_antennas above 4 are not supported (no orthogonal code defined)".into(),
            ));
        }
        if d.rx_antennas.max_value() > 8.0 {
            return Err(Error::Config("rx_antennas above 8 are not supported".into()));
        }
        if d.rician_k.min_value() < 0.0 {
            return Err(Error::Config("rician_k must be non-negative".into()));
        }
        if d.path_delay_s.min_value() < 0.0 {
            return Err(Error::Config("path_delay_s must be non-negative".into()));
        }
        if d.relative_speed_mps.min_value() < 0.0 {
            return Err(Error::Config("relative_speed_mps must be non-negative".into()));
        }
        if d.distance_m.min_value() <= 0.0 {
            return Err(Error::Config("distance_m must be positive".into()));
        }
        if d.idle_gap_factor.min_value() < 0.0 {
            return Err(Error::Config("idle_gap_factor must be non-negative".into()));
        }
        if d.overlap_extent.min_value() < 0.0 || d.overlap_extent.max_value() > 1.0 {
            return Err(Error::Config("overlap_extent must lie in [0, 1]".into()));
        }
        // The widest waveform must fit inside the observable band with room
        // to place a carrier.
        let max_bw = crate::modulate::max_occupied_bandwidth(
            d.symbol_rate_hz.max_value(),
            d.rolloff.max_value(),
        );
        if max_bw > 0.9 * self.band_width() {
            return Err(Error::Config(format!(
                "widest waveform ({max_bw:.0} Hz) does not fit the observable band ({:.0} Hz) with margin",
                self.band_width()
            )));
        }
        Ok(())
    }

    fn validate_modulations(&self) -> Result<()> {
        let known: std::collections::BTreeSet<&str> =
            crate::modulate::registry::all().iter().map(|e| e.name.as_str()).collect();
        if let Some(classes) = &self.modulations.classes {
            if classes.is_empty() {
                return Err(Error::Config("modulations.classes must not be empty when given".into()));
            }
            for c in classes {
                if !known.contains(c.as_str()) {
                    return Err(Error::Config(format!("unknown modulation class `{c}`")));
                }
            }
        }
        for (name, w) in &self.modulations.weight_overrides {
            if !known.contains(name.as_str()) {
                return Err(Error::Config(format!("weight override for unknown class `{name}`")));
            }
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::Config(format!("weight override for `{name}` must be >= 0")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let cfg = MasterConfig::default();
        cfg.validate().expect("default config must validate");
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: MasterConfig = serde_json::from_str(&text).unwrap();
        back.validate().unwrap();
        assert_eq!(back.master_clock_rate_hz, cfg.master_clock_rate_hz);
    }

    #[test]
    fn unknown_top_level_key_is_a_hard_error() {
        let r: std::result::Result<MasterConfig, _> =
            serde_json::from_str(r#"{"master_seed": 3, "frames": 10}"#);
        let msg = format!("{}", r.unwrap_err());
        assert!(msg.contains("frames"), "{msg}");
    }

    #[test]
    fn unknown_nested_key_is_a_hard_error() {
        let r: std::result::Result<MasterConfig, _> =
            serde_json::from_str(r#"{"distributions": {"tx_count": {"kind": "uniform-discrete", "low": 1, "high": 4}, "tx_cnt": {"kind": "constant", "value": 1}}}"#);
        assert!(r.is_err());
    }

    #[test]
    fn distribution_override_round_trips() {
        let text = r#"{"distributions": {"tx_count": {"kind": "uniform-discrete", "low": 1, "high": 4}}}"#;
        let cfg: MasterConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.distributions.tx_count, ParameterDistribution::uniform_discrete(1, 4));
        let back: MasterConfig =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back.distributions.tx_count, cfg.distributions.tx_count);
    }

    #[test]
    fn nyquist_rule_is_enforced() {
        let mut cfg = MasterConfig::default();
        cfg.master_clock_rate_hz = 0.9e6; // 2 * 500 kHz band needs > 1 MHz
        let err = cfg.validate().unwrap_err();
        assert!(format!("{err}").contains("twice"), "{err}");
    }

    #[test]
    fn raytrace_weight_requires_scene() {
        let mut cfg = MasterConfig::default();
        cfg.channel.raytrace_weight = 0.1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn antenna_cap_is_enforced() {
        let mut cfg = MasterConfig::default();
        cfg.distributions.tx_antennas = ParameterDistribution::uniform_discrete(1, 6);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn band_must_fit_widest_waveform() {
        let mut cfg = MasterConfig::default();
        cfg.observable_band_hz = [0.0, 100_000.0];
        cfg.master_clock_rate_hz = 250_000.0;
        let err = cfg.validate().unwrap_err();
        assert!(format!("{err}").contains("band"), "{err}");
    }
}

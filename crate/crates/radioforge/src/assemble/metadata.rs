//! Per-frame ground-truth annotation JSON.
//!
//! One document per receiver frame, named `<prefix>.json`, with an
//! `annotation` object holding the receiver (`rx`) setup and one `tx`
//! entry per contributing transmitter, plus the shared `filePrefix`.
//! `SNRs` carries one entry per transmitter in `tx` order: a plain number
//! for single-segment transmissions, a list with one number per segment
//! otherwise, each averaged over receive antennas in the power domain.
//! Segment timing is in `StartTimes`/`TimeDurations` and the occupied
//! band in `BandWidth` as `[low, high]` pairs relative to the carrier.
//!
//! A few keys go beyond the classic layout and are safe for readers to
//! ignore: `ClassName` (the exact registry class, since `ModulatorType`
//! plus `ModulatorOrder` does not distinguish inner constellations of
//! multicarrier classes), `ObservableBand` (lets a validator check band
//! limits without the generator config), `ChannelModel`, and
//! `TransmitPower`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{sigmf::write_atomic, ReceiverFrame};
use crate::channel::FadingDistribution;
use crate::config::{LinkChannel, MasterConfig, ScenarioPlan};
use crate::error::{Error, Result};
use crate::impair::NonlinearitySpec;
use crate::modulate::registry;

/// Phase-noise levels are quoted at this carrier offset, Hz.
pub const PHASE_NOISE_OFFSET_HZ: f64 = 1e4;

/// Complete annotation document for one receiver frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameAnnotation {
    pub annotation: AnnotationBody,
    #[serde(rename = "filePrefix")]
    pub file_prefix: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationBody {
    pub rx: RxAnnotation,
    pub tx: Vec<TxAnnotation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RxAnnotation {
    #[serde(rename = "MasterClockRate")]
    pub master_clock_rate: f64,
    #[serde(rename = "NumReceiveAntennas")]
    pub num_receive_antennas: usize,
    #[serde(rename = "TimeDuration")]
    pub time_duration: f64,
    #[serde(rename = "ObservableBand")]
    pub observable_band: [f64; 2],
    #[serde(rename = "IqImbalanceConfig")]
    pub iq_imbalance_config: IqImbalanceConfig,
    #[serde(rename = "MemoryLessNonlinearityConfig")]
    pub memory_less_nonlinearity_config: NonlinearityConfig,
    #[serde(rename = "ThermalNoiseConfig")]
    pub thermal_noise_config: ThermalNoiseConfig,
    #[serde(rename = "SiteConfig")]
    pub site_config: SiteConfig,
    /// One entry per transmitter, `tx` order: per-segment SNR in dB,
    /// averaged over receive antennas in the power domain.
    #[serde(rename = "SNRs")]
    pub snrs: Vec<SnrEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxAnnotation {
    #[serde(rename = "ModulatorType")]
    pub modulator_type: String,
    #[serde(rename = "ModulatorOrder")]
    pub modulator_order: u32,
    #[serde(rename = "ClassName")]
    pub class_name: String,
    #[serde(rename = "IsDigital")]
    pub is_digital: bool,
    #[serde(rename = "CarrierFrequency")]
    pub carrier_frequency: f64,
    #[serde(rename = "NumTransmitAntennas")]
    pub num_transmit_antennas: usize,
    #[serde(rename = "TransmitPower")]
    pub transmit_power_dbm: f64,
    #[serde(rename = "MemoryLessNonlinearityConfig")]
    pub memory_less_nonlinearity_config: NonlinearityConfig,
    #[serde(rename = "PhaseNoiseConfig")]
    pub phase_noise_config: PhaseNoiseConfig,
    #[serde(rename = "SiteConfig")]
    pub site_config: SiteConfig,
    #[serde(rename = "ChannelModel")]
    pub channel_model: String,
    #[serde(rename = "FadingDistribution", skip_serializing_if = "Option::is_none")]
    pub fading_distribution: Option<String>,
    #[serde(rename = "KFactor", skip_serializing_if = "Option::is_none")]
    pub k_factor: Option<f64>,
    #[serde(rename = "MaximumDopplerShift", skip_serializing_if = "Option::is_none")]
    pub maximum_doppler_shift: Option<f64>,
    #[serde(rename = "PathDelays", skip_serializing_if = "Option::is_none")]
    pub path_delays: Option<Vec<f64>>,
    #[serde(rename = "AveragePathGains", skip_serializing_if = "Option::is_none")]
    pub average_path_gains: Option<Vec<f64>>,
    #[serde(rename = "StartTimes")]
    pub start_times: Vec<f64>,
    #[serde(rename = "TimeDurations")]
    pub time_durations: Vec<f64>,
    /// Occupied band per segment, `[low, high]` relative to the carrier.
    #[serde(rename = "BandWidth")]
    pub band_width: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IqImbalanceConfig {
    #[serde(rename = "A")]
    pub amplitude_db: f64,
    #[serde(rename = "P")]
    pub phase_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalNoiseConfig {
    #[serde(rename = "NoiseTemperature")]
    pub noise_temperature_k: f64,
    #[serde(rename = "NoiseFigure")]
    pub noise_figure_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseNoiseConfig {
    #[serde(rename = "Level")]
    pub level_dbc_hz: f64,
    #[serde(rename = "FrequencyOffset")]
    pub frequency_offset_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteConfig {
    #[serde(rename = "Name")]
    pub name: String,
    #[serde(rename = "Antenna")]
    pub antenna: AntennaConfig,
    #[serde(rename = "Position")]
    pub position_m: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaConfig {
    #[serde(rename = "Height")]
    pub height_m: f64,
}

/// Scalar for single-segment transmissions, a list otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SnrEntry {
    Scalar(f64),
    PerSegment(Vec<f64>),
}

impl SnrEntry {
    pub fn values(&self) -> Vec<f64> {
        match self {
            SnrEntry::Scalar(v) => vec![*v],
            SnrEntry::PerSegment(v) => v.clone(),
        }
    }
}

/// Memoryless nonlinearity description keyed by its `Method` name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "Method", deny_unknown_fields)]
pub enum NonlinearityConfig {
    #[serde(rename = "Saleh model")]
    Saleh {
        #[serde(rename = "AlphaAM")]
        alpha_am: f64,
        #[serde(rename = "BetaAM")]
        beta_am: f64,
        #[serde(rename = "AlphaPM")]
        alpha_pm: f64,
        #[serde(rename = "BetaPM")]
        beta_pm: f64,
    },
    #[serde(rename = "Ghorbani model")]
    Ghorbani {
        #[serde(rename = "X")]
        x: [f64; 4],
        #[serde(rename = "Y")]
        y: [f64; 4],
    },
    #[serde(rename = "Rapp model")]
    Rapp {
        #[serde(rename = "Gain")]
        gain_db: f64,
        #[serde(rename = "Smoothness")]
        smoothness: f64,
        #[serde(rename = "Saturation")]
        saturation_v: f64,
    },
    #[serde(rename = "Cubic polynomial")]
    Cubic {
        #[serde(rename = "Gain")]
        gain_db: f64,
        #[serde(rename = "IIP3")]
        iip3_dbm: f64,
    },
    #[serde(rename = "Hyperbolic tangent")]
    Tanh {
        #[serde(rename = "Gain")]
        gain_db: f64,
        #[serde(rename = "Saturation")]
        saturation_v: f64,
    },
}

impl From<&NonlinearitySpec> for NonlinearityConfig {
    fn from(spec: &NonlinearitySpec) -> Self {
        match *spec {
            NonlinearitySpec::Saleh {
                alpha_am,
                beta_am,
                alpha_pm,
                beta_pm,
            } => NonlinearityConfig::Saleh {
                alpha_am,
                beta_am,
                alpha_pm,
                beta_pm,
            },
            NonlinearitySpec::Ghorbani { x, y } => NonlinearityConfig::Ghorbani { x, y },
            NonlinearitySpec::Rapp {
                gain_db,
                smoothness,
                saturation_v,
            } => NonlinearityConfig::Rapp {
                gain_db,
                smoothness,
                saturation_v,
            },
            NonlinearitySpec::Cubic { gain_db, iip3_dbm } => {
                NonlinearityConfig::Cubic { gain_db, iip3_dbm }
            }
            NonlinearitySpec::Tanh {
                gain_db,
                saturation_v,
            } => NonlinearityConfig::Tanh {
                gain_db,
                saturation_v,
            },
        }
    }
}

impl From<&NonlinearityConfig> for NonlinearitySpec {
    fn from(cfg: &NonlinearityConfig) -> Self {
        match *cfg {
            NonlinearityConfig::Saleh {
                alpha_am,
                beta_am,
                alpha_pm,
                beta_pm,
            } => NonlinearitySpec::Saleh {
                alpha_am,
                beta_am,
                alpha_pm,
                beta_pm,
            },
            NonlinearityConfig::Ghorbani { x, y } => NonlinearitySpec::Ghorbani { x, y },
            NonlinearityConfig::Rapp {
                gain_db,
                smoothness,
                saturation_v,
            } => NonlinearitySpec::Rapp {
                gain_db,
                smoothness,
                saturation_v,
            },
            NonlinearityConfig::Cubic { gain_db, iip3_dbm } => {
                NonlinearitySpec::Cubic { gain_db, iip3_dbm }
            }
            NonlinearityConfig::Tanh {
                gain_db,
                saturation_v,
            } => NonlinearitySpec::Tanh {
                gain_db,
                saturation_v,
            },
        }
    }
}

/// Average per-antenna SNRs in the power domain.
pub fn snr_mean_db(per_antenna_db: &[f64]) -> f64 {
    if per_antenna_db.is_empty() {
        return f64::NEG_INFINITY;
    }
    let mean = per_antenna_db
        .iter()
        .map(|s| 10f64.powf(s / 10.0))
        .sum::<f64>()
        / per_antenna_db.len() as f64;
    10.0 * mean.log10()
}

/// Build the annotation document for one receiver's capture of a frame.
pub fn annotation_for(
    cfg: &MasterConfig,
    plan: &ScenarioPlan,
    frame: &ReceiverFrame,
) -> Result<FrameAnnotation> {
    let rx = plan
        .rxs
        .iter()
        .find(|r| r.rx_id == frame.rx_id)
        .ok_or_else(|| Error::config(format!("plan has no rx {}", frame.rx_id)))?;

    let mut txs = Vec::with_capacity(plan.txs.len());
    let mut snrs = Vec::with_capacity(plan.txs.len());
    for tx in &plan.txs {
        let entry = registry::by_id(tx.class_id)
            .ok_or_else(|| Error::config(format!("unknown class id {}", tx.class_id)))?;
        let mut segs: Vec<&super::SignalTruth> = frame
            .truth
            .iter()
            .filter(|t| t.tx_id == tx.tx_id)
            .collect();
        segs.sort_by_key(|t| t.segment_index);
        if segs.is_empty() {
            return Err(Error::config(format!(
                "tx {} contributed no segments to rx {}",
                tx.tx_id, frame.rx_id
            )));
        }
        let carrier = segs[0].carrier_hz;

        let link = plan
            .links
            .iter()
            .find(|l| l.tx_id == tx.tx_id && l.rx_id == frame.rx_id)
            .ok_or_else(|| {
                Error::config(format!("no link for tx {} -> rx {}", tx.tx_id, frame.rx_id))
            })?;
        let (channel_model, fading_distribution, k_factor, doppler, delays, gains) =
            match &link.channel {
                LinkChannel::Statistical { fading, .. } => (
                    "statistical",
                    Some(
                        match fading.distribution {
                            FadingDistribution::Rayleigh => "Rayleigh",
                            FadingDistribution::Rician => "Rician",
                        }
                        .to_string(),
                    ),
                    matches!(fading.distribution, FadingDistribution::Rician)
                        .then_some(fading.k_factor),
                    Some(fading.max_doppler_hz),
                    Some(fading.path_delays_s.clone()),
                    Some(fading.avg_path_gains_db.clone()),
                ),
                LinkChannel::RayTraced => ("ray-traced", None, None, None, None, None),
                LinkChannel::Ideal => ("ideal", None, None, None, None, None),
            };

        txs.push(TxAnnotation {
            modulator_type: entry.modulator_type(),
            modulator_order: entry.order(),
            class_name: tx.class_name.clone(),
            is_digital: entry.is_digital(),
            carrier_frequency: carrier,
            num_transmit_antennas: tx.n_antennas,
            transmit_power_dbm: tx.power_dbm,
            memory_less_nonlinearity_config: (&tx.nonlinearity).into(),
            phase_noise_config: PhaseNoiseConfig {
                level_dbc_hz: tx.phase_noise.level_dbc_hz,
                frequency_offset_hz: PHASE_NOISE_OFFSET_HZ,
            },
            site_config: SiteConfig {
                name: format!("Tx_{:04}", tx.tx_id),
                antenna: AntennaConfig {
                    height_m: tx.position_m[2],
                },
                position_m: tx.position_m,
            },
            channel_model: channel_model.to_string(),
            fading_distribution,
            k_factor,
            maximum_doppler_shift: doppler,
            path_delays: delays,
            average_path_gains: gains,
            start_times: segs.iter().map(|t| t.start_s).collect(),
            time_durations: segs.iter().map(|t| t.duration_s).collect(),
            band_width: segs
                .iter()
                .map(|t| [-0.5 * t.bandwidth_hz, 0.5 * t.bandwidth_hz])
                .collect(),
        });

        let seg_snrs: Vec<f64> = segs.iter().map(|t| snr_mean_db(&t.snr_db)).collect();
        snrs.push(if seg_snrs.len() == 1 {
            SnrEntry::Scalar(seg_snrs[0])
        } else {
            SnrEntry::PerSegment(seg_snrs)
        });
    }

    Ok(FrameAnnotation {
        annotation: AnnotationBody {
            rx: RxAnnotation {
                master_clock_rate: cfg.master_clock_rate_hz,
                num_receive_antennas: rx.n_antennas,
                time_duration: frame.duration_s,
                observable_band: cfg.observable_band_hz,
                iq_imbalance_config: IqImbalanceConfig {
                    amplitude_db: rx.iq_imbalance.amplitude_db,
                    phase_deg: rx.iq_imbalance.phase_deg,
                },
                memory_less_nonlinearity_config: (&rx.nonlinearity).into(),
                thermal_noise_config: ThermalNoiseConfig {
                    noise_temperature_k: rx.noise_temperature_k,
                    noise_figure_db: rx.noise_figure_db,
                },
                site_config: SiteConfig {
                    name: format!("Rx_{:04}", rx.rx_id),
                    antenna: AntennaConfig {
                        height_m: rx.position_m[2],
                    },
                    position_m: rx.position_m,
                },
                snrs,
            },
            tx: txs,
        },
        file_prefix: frame.file_prefix(),
    })
}

/// Serialize and atomically write `<prefix>.json` into `anno_dir`.
pub fn write_annotation(anno_dir: &Path, ann: &FrameAnnotation) -> Result<PathBuf> {
    let path = anno_dir.join(format!("{}.json", ann.file_prefix));
    let json = serde_json::to_vec_pretty(ann)?;
    write_atomic(&path, &json)?;
    Ok(path)
}

pub fn read_annotation(path: &Path) -> Result<FrameAnnotation> {
    let bytes = std::fs::read(path)?;
    serde_json::from_slice(&bytes)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// One segment of one transmitter, flattened for spectrogram labeling and
/// statistics. Band edges are absolute within the observable band.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentView {
    pub tx_index: usize,
    pub segment_index: usize,
    pub class_name: String,
    pub carrier_hz: f64,
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
    pub start_s: f64,
    pub duration_s: f64,
    pub snr_db: f64,
}

impl FrameAnnotation {
    /// Flatten every transmitter's segments, tx-major.
    pub fn segments(&self) -> Vec<SegmentView> {
        let mut out = Vec::new();
        for (ti, tx) in self.annotation.tx.iter().enumerate() {
            let snrs = self
                .annotation
                .rx
                .snrs
                .get(ti)
                .map(SnrEntry::values)
                .unwrap_or_default();
            for (si, (&start, &dur)) in
                tx.start_times.iter().zip(&tx.time_durations).enumerate()
            {
                let band = tx.band_width.get(si).copied().unwrap_or([0.0, 0.0]);
                out.push(SegmentView {
                    tx_index: ti,
                    segment_index: si,
                    class_name: tx.class_name.clone(),
                    carrier_hz: tx.carrier_frequency,
                    band_lo_hz: tx.carrier_frequency + band[0],
                    band_hi_hz: tx.carrier_frequency + band[1],
                    start_s: start,
                    duration_s: dur,
                    snr_db: snrs.get(si).copied().unwrap_or(f64::NAN),
                });
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assemble::synthesize_frame;
    use crate::config::{LinkPlan, RxPlan, TxPlan};
    use crate::impair::{DcOffsetSpec, IqImbalanceSpec, PhaseNoiseSpec};
    use crate::schedule::{EmissionEvent, FramePlan};
    use crate::source::MessageSource;

    fn two_segment_plan() -> (MasterConfig, ScenarioPlan) {
        let cfg = MasterConfig::default();
        let rate = 40e3;
        let entry = registry::by_name("OFDM-16QAM").unwrap();
        let spec = entry.spec(rate, 0.3);
        let bw = spec.occupied_bandwidth_hz();
        let throughput = spec.symbol_throughput_hz();
        let mk_event = |seg: usize, start: f64| EmissionEvent {
            tx_id: 0,
            segment_index: seg,
            start_s: start,
            duration_s: 900.0 / throughput,
            carrier_hz: 120e3,
            bandwidth_hz: bw,
            n_symbols: 900,
            symbol_rate_hz: throughput,
        };
        let plan = ScenarioPlan {
            frame_index: 5,
            frame_seed: crate::rng::frame_seed(9, 5),
            channel_family: crate::channel::ChannelProvenance::Statistical,
            txs: vec![TxPlan {
                tx_id: 0,
                class_id: entry.id,
                class_name: entry.name.clone(),
                modulation: spec,
                message_source: MessageSource::Prbs {
                    register_length: None,
                },
                n_antennas: 1,
                n_segments: 2,
                power_dbm: 5.0,
                phase_noise: PhaseNoiseSpec {
                    level_dbc_hz: -120.0,
                },
                nonlinearity: NonlinearitySpec::Tanh {
                    gain_db: 0.0,
                    saturation_v: 2.0,
                },
                position_m: [0.0, 0.0, 12.0],
            }],
            rxs: vec![RxPlan {
                rx_id: 0,
                n_antennas: 2,
                iq_imbalance: IqImbalanceSpec {
                    amplitude_db: 1.0,
                    phase_deg: 2.0,
                },
                dc_offset: DcOffsetSpec { offset_db: -50.0 },
                nonlinearity: NonlinearitySpec::Rapp {
                    gain_db: 0.0,
                    smoothness: 2.0,
                    saturation_v: 1e3,
                },
                noise_figure_db: 12.0,
                noise_temperature_k: 4306.0,
                position_m: [0.0, 0.0, 8.0],
            }],
            links: vec![LinkPlan {
                tx_id: 0,
                rx_id: 0,
                channel: LinkChannel::Statistical {
                    path_loss: crate::channel::PathLossSpec::LogDistance {
                        exponent: 2.2,
                        reference_m: 1.0,
                        distance_m: 60.0,
                        carrier_hz: 2.4e9,
                    },
                    fading: crate::channel::FadingSpec {
                        distribution: FadingDistribution::Rician,
                        k_factor: 4.0,
                        path_delays_s: vec![0.0, 4e-7],
                        avg_path_gains_db: vec![0.0, -5.0],
                        max_doppler_hz: 30.0,
                        n_tx: 1,
                        n_rx: 2,
                    },
                },
            }],
            schedule: FramePlan {
                frame_duration_s: 0.12,
                events: vec![mk_event(0, 0.010), mk_event(1, 0.070)],
                overlaps: vec![],
            },
        };
        (cfg, plan)
    }

    #[test]
    fn annotation_has_classic_key_layout() {
        let (cfg, plan) = two_segment_plan();
        let frames = synthesize_frame(&cfg, None, &plan).unwrap();
        let ann = annotation_for(&cfg, &plan, &frames[0]).unwrap();
        let v = serde_json::to_value(&ann).unwrap();

        for ptr in [
            "/annotation/rx/MasterClockRate",
            "/annotation/rx/NumReceiveAntennas",
            "/annotation/rx/TimeDuration",
            "/annotation/rx/IqImbalanceConfig/A",
            "/annotation/rx/IqImbalanceConfig/P",
            "/annotation/rx/MemoryLessNonlinearityConfig/Method",
            "/annotation/rx/ThermalNoiseConfig/NoiseTemperature",
            "/annotation/rx/SiteConfig/Name",
            "/annotation/rx/SiteConfig/Antenna/Height",
            "/annotation/rx/SNRs",
            "/annotation/tx/0/ModulatorType",
            "/annotation/tx/0/ModulatorOrder",
            "/annotation/tx/0/CarrierFrequency",
            "/annotation/tx/0/NumTransmitAntennas",
            "/annotation/tx/0/MemoryLessNonlinearityConfig/Method",
            "/annotation/tx/0/PhaseNoiseConfig/Level",
            "/annotation/tx/0/SiteConfig/Antenna/Height",
            "/annotation/tx/0/FadingDistribution",
            "/annotation/tx/0/KFactor",
            "/annotation/tx/0/MaximumDopplerShift",
            "/annotation/tx/0/PathDelays",
            "/annotation/tx/0/AveragePathGains",
            "/annotation/tx/0/StartTimes",
            "/annotation/tx/0/TimeDurations",
            "/annotation/tx/0/BandWidth",
            "/annotation/tx/0/IsDigital",
            "/filePrefix",
        ] {
            assert!(v.pointer(ptr).is_some(), "missing {ptr}");
        }
        assert_eq!(
            v.pointer("/annotation/tx/0/ModulatorType").unwrap(),
            "OFDM"
        );
        assert_eq!(
            v.pointer("/annotation/tx/0/FadingDistribution").unwrap(),
            "Rician"
        );
        assert_eq!(v.pointer("/filePrefix").unwrap(), "Frame_000005_Rx_0000");
        // Two segments: SNRs entry is a list, timing lists have two items.
        assert!(v.pointer("/annotation/rx/SNRs/0/1").is_some());
        assert_eq!(
            v.pointer("/annotation/tx/0/StartTimes/1").unwrap(),
            &serde_json::json!(0.070)
        );
        let band = v.pointer("/annotation/tx/0/BandWidth/0/0").unwrap();
        assert!(band.as_f64().unwrap() < 0.0, "band low edge is negative");
    }

    #[test]
    fn annotation_roundtrips_via_file() {
        let (cfg, plan) = two_segment_plan();
        let frames = synthesize_frame(&cfg, None, &plan).unwrap();
        let ann = annotation_for(&cfg, &plan, &frames[0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = write_annotation(dir.path(), &ann).unwrap();
        assert_eq!(
            path.file_name().unwrap().to_str().unwrap(),
            "Frame_000005_Rx_0000.json"
        );
        let back = read_annotation(&path).unwrap();
        assert_eq!(back, ann);
        let segs = back.segments();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].class_name, "OFDM-16QAM");
        assert!(segs[0].band_lo_hz < segs[0].carrier_hz);
        assert!(segs[0].snr_db.is_finite());
    }

    #[test]
    fn snr_average_is_power_domain() {
        let avg = snr_mean_db(&[10.0, 20.0]);
        let expect = 10.0 * ((10f64.powf(1.0) + 10f64.powf(2.0)) / 2.0).log10();
        assert!((avg - expect).abs() < 1e-12);
        assert!((expect - 17.403).abs() < 1e-3);
    }

    #[test]
    fn nonlinearity_methods_roundtrip() {
        let specs = [
            NonlinearitySpec::Saleh {
                alpha_am: 2.1587,
                beta_am: 1.1517,
                alpha_pm: 4.0033,
                beta_pm: 9.1040,
            },
            NonlinearitySpec::Ghorbani {
                x: [8.1081, 1.5413, 6.5202, -0.0718],
                y: [4.6645, 2.0965, 10.88, -0.003],
            },
            NonlinearitySpec::Rapp {
                gain_db: 0.0,
                smoothness: 1.8,
                saturation_v: 1.4,
            },
            NonlinearitySpec::Cubic {
                gain_db: 0.0,
                iip3_dbm: 21.0,
            },
            NonlinearitySpec::Tanh {
                gain_db: 0.0,
                saturation_v: 1.1,
            },
        ];
        let methods = [
            "Saleh model",
            "Ghorbani model",
            "Rapp model",
            "Cubic polynomial",
            "Hyperbolic tangent",
        ];
        for (spec, method) in specs.iter().zip(methods) {
            let cfg: NonlinearityConfig = spec.into();
            let v = serde_json::to_value(&cfg).unwrap();
            assert_eq!(v.get("Method").unwrap(), method);
            let back: NonlinearitySpec = (&cfg).into();
            assert_eq!(&back, spec);
        }
    }
}

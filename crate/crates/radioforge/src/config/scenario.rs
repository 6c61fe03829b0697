//! Per-frame scenario sampling: every random knob for one frame, drawn
//! deterministically from (master seed, frame index).
//!
//! The draw order is fixed and documented here because it is part of the
//! dataset's reproducibility contract: channel family coin, transmitter
//! and receiver counts, then per-transmitter draws (class, antennas,
//! segments, symbol rate, rolloff, power, front-end impairments), per-
//! receiver draws (antennas, noise figure, position), per-link channel
//! draws in transmitter-major order, and finally the frame schedule on its
//! own derived stream. Re-running any frame index reproduces its plan
//! byte for byte regardless of worker count.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::MasterConfig;
use crate::channel::raytrace::{parse_osm, OsmScene};
use crate::channel::{ChannelProvenance, FadingDistribution, FadingSpec, PathLossSpec};
use crate::error::{Error, Result};
use crate::impair::{
    noise_temperature_from_figure_db, DcOffsetSpec, IqImbalanceSpec, NonlinearitySpec,
    PhaseNoiseSpec,
};
use crate::modulate::{registry, ModulationSpec};
use crate::rng::{derive_stream, frame_seed};
use crate::schedule::{self, FramePlan, TxScheduleRequest};
use crate::source::{MessageSource, Tone};

/// Everything one transmitter needs: waveform, power amplifier chain,
/// geometry. Oscillator and amplifier impairments sit on the transmit
/// side; quadrature and bias errors belong to the receiver front end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxPlan {
    pub tx_id: usize,
    /// Registry class id (stable label space for annotations).
    pub class_id: u32,
    pub class_name: String,
    pub modulation: ModulationSpec,
    pub message_source: MessageSource,
    pub n_antennas: usize,
    pub n_segments: usize,
    /// Average transmit power fed to the nonlinearity, dBm (1 ohm
    /// convention: watts = mean |x|^2).
    pub power_dbm: f64,
    pub phase_noise: PhaseNoiseSpec,
    pub nonlinearity: NonlinearitySpec,
    /// Map position, meters. Statistical frames keep x and y at zero and
    /// draw only the antenna height; ray-traced frames place the site
    /// inside the scene.
    pub position_m: [f64; 3],
}

/// One receiver: capture geometry, front-end imperfections, noise budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RxPlan {
    pub rx_id: usize,
    pub n_antennas: usize,
    pub iq_imbalance: IqImbalanceSpec,
    pub dc_offset: DcOffsetSpec,
    /// Low-noise-amplifier compression.
    pub nonlinearity: NonlinearitySpec,
    pub noise_figure_db: f64,
    /// Equivalent input noise temperature implied by the noise figure.
    pub noise_temperature_k: f64,
    pub position_m: [f64; 3],
}

/// Channel description for one transmitter-receiver pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum LinkChannel {
    Statistical {
        path_loss: PathLossSpec,
        fading: FadingSpec,
    },
    /// Geometry lives in the tx/rx plans; rays are traced at synthesis
    /// time against the configured scene.
    RayTraced,
    /// Unit gain, zero delay, no fading. Never drawn by the sampler; used
    /// for loopback calibration and power-accounting checks.
    Ideal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkPlan {
    pub tx_id: usize,
    pub rx_id: usize,
    pub channel: LinkChannel,
}

/// Complete randomized description of one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPlan {
    pub frame_index: u64,
    pub frame_seed: u64,
    pub channel_family: ChannelProvenance,
    pub txs: Vec<TxPlan>,
    pub rxs: Vec<RxPlan>,
    /// Exactly one entry per (tx, rx) pair, transmitter-major.
    pub links: Vec<LinkPlan>,
    pub schedule: FramePlan,
}

/// Frame sampler with the immutable pieces resolved once: the class table
/// with effective weights, the parsed ray-tracing scene, and the
/// multi-transmitter probability for the scheduler's overlap coin.
pub struct Sampler {
    cfg: MasterConfig,
    classes: Vec<(&'static registry::RegistryEntry, f64)>,
    scene: Option<OsmScene>,
    p_multi_tx: f64,
}

impl Sampler {
    pub fn new(cfg: MasterConfig) -> Result<Self> {
        cfg.validate()?;
        let mut classes = Vec::new();
        for entry in registry::all() {
            if let Some(allowed) = &cfg.modulations.classes {
                if !allowed.iter().any(|c| c == &entry.name) {
                    continue;
                }
            }
            let weight = cfg
                .modulations
                .weight_overrides
                .get(&entry.name)
                .copied()
                .unwrap_or(entry.default_weight);
            if weight > 0.0 {
                classes.push((entry, weight));
            }
        }
        if classes.is_empty() {
            return Err(Error::config("no modulation class has positive weight"));
        }
        let scene = match (&cfg.channel.scene_path, cfg.channel.raytrace_weight > 0.0) {
            (Some(path), true) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::config(format!("cannot read scene {}: {e}", path.display()))
                })?;
                Some(parse_osm(&text)?)
            }
            _ => None,
        };
        let p_multi_tx = cfg.distributions.tx_count.prob_at_least(2.0);
        Ok(Sampler {
            cfg,
            classes,
            scene,
            p_multi_tx,
        })
    }

    pub fn config(&self) -> &MasterConfig {
        &self.cfg
    }

    pub fn scene(&self) -> Option<&OsmScene> {
        self.scene.as_ref()
    }

    fn draw_class<R: Rng>(&self, rng: &mut R) -> &'static registry::RegistryEntry {
        let total: f64 = self.classes.iter().map(|(_, w)| w).sum();
        let mut u = rng.gen_range(0.0..total);
        for (entry, w) in &self.classes {
            if u < *w {
                return entry;
            }
            u -= w;
        }
        self.classes.last().unwrap().0
    }

    /// Uniform position inside the scene bounding box (inset 5% so image
    /// sources behind the outermost walls stay representable), at the
    /// drawn antenna height.
    fn draw_position<R: Rng>(&self, rng: &mut R) -> [f64; 3] {
        let d = &self.cfg.distributions;
        let scene = self.scene.as_ref().expect("positions need a scene");
        let (min, max) = (scene.min_xy, scene.max_xy);
        let inset = [(max[0] - min[0]) * 0.05, (max[1] - min[1]) * 0.05];
        [
            rng.gen_range(min[0] + inset[0]..max[0] - inset[0]),
            rng.gen_range(min[1] + inset[1]..max[1] - inset[1]),
            d.antenna_height_m.sample(rng),
        ]
    }

    /// Digital classes carry pseudo-random bits. Analog classes carry a
    /// synthetic multitone message: 3 to 6 tones spread over the message
    /// band with random amplitudes and phases.
    fn draw_message_source<R: Rng>(
        &self,
        modulation: &ModulationSpec,
        rng: &mut R,
    ) -> MessageSource {
        if modulation.is_digital() {
            return MessageSource::Prbs {
                register_length: None,
            };
        }
        let bm = match modulation {
            ModulationSpec::Analog {
                message_bandwidth_hz,
                ..
            } => *message_bandwidth_hz,
            _ => unreachable!("non-digital specs are analog"),
        };
        let n_tones = rng.gen_range(3..=6usize);
        let tones = (0..n_tones)
            .map(|_| Tone {
                freq_hz: rng.gen_range(0.05 * bm..0.95 * bm),
                amplitude: rng.gen_range(0.3..1.0),
            })
            .collect();
        MessageSource::Multitone { tones }
    }

    fn draw_nonlinearity<R: Rng>(&self, rng: &mut R) -> NonlinearitySpec {
        let d = &self.cfg.distributions;
        // Classic published coefficient sets for the envelope models,
        // jittered a few percent so no two radios are identical.
        let jitter = |rng: &mut R| 1.0 + rng.gen_range(-0.05..0.05);
        match rng.gen_range(0..5u32) {
            0 => NonlinearitySpec::Saleh {
                alpha_am: 2.1587 * jitter(rng),
                beta_am: 1.1517 * jitter(rng),
                alpha_pm: 4.0033 * jitter(rng),
                beta_pm: 9.1040 * jitter(rng),
            },
            1 => NonlinearitySpec::Ghorbani {
                x: [
                    8.1081 * jitter(rng),
                    1.5413 * jitter(rng),
                    6.5202 * jitter(rng),
                    -0.0718 * jitter(rng),
                ],
                y: [
                    4.6645 * jitter(rng),
                    2.0965 * jitter(rng),
                    10.88 * jitter(rng),
                    -0.003 * jitter(rng),
                ],
            },
            2 => NonlinearitySpec::Rapp {
                gain_db: 0.0,
                smoothness: rng.gen_range(1.0..3.0),
                saturation_v: rng.gen_range(1.0..2.0),
            },
            3 => NonlinearitySpec::Cubic {
                gain_db: 0.0,
                iip3_dbm: d.iip3_dbm.sample(rng),
            },
            _ => NonlinearitySpec::Tanh {
                gain_db: 0.0,
                saturation_v: rng.gen_range(1.0..2.0),
            },
        }
    }

    fn draw_statistical_link<R: Rng>(
        &self,
        n_tx_ant: usize,
        n_rx_ant: usize,
        rng: &mut R,
    ) -> Result<LinkChannel> {
        let d = &self.cfg.distributions;
        let distance_m = d.distance_m.sample(rng);
        let path_loss = PathLossSpec::LogDistance {
            distance_m,
            carrier_hz: self.cfg.rf_carrier_hz,
            exponent: d.path_loss_exponent.sample(rng),
            reference_m: 1.0,
        };
        let rician = rng.gen_bool(self.cfg.channel.rician_fraction);
        let (distribution, k_factor) = if rician {
            (FadingDistribution::Rician, d.rician_k.sample(rng))
        } else {
            (FadingDistribution::Rayleigh, 0.0)
        };
        let n_extra = d.extra_path_count.sample_int(rng).max(0) as usize;
        let mut extra: Vec<f64> = (0..n_extra).map(|_| d.path_delay_s.sample(rng)).collect();
        extra.sort_by(|a, b| a.partial_cmp(b).unwrap());
        extra.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let mut path_delays_s = vec![0.0];
        path_delays_s.extend(extra);
        let decay_db = d.path_decay_db.sample(rng);
        let avg_path_gains_db: Vec<f64> = (0..path_delays_s.len())
            .map(|k| -decay_db * k as f64)
            .collect();
        let max_doppler_hz = crate::channel::doppler_from_speed(
            d.relative_speed_mps.sample(rng),
            self.cfg.rf_carrier_hz,
        );
        let fading = FadingSpec {
            distribution,
            k_factor,
            path_delays_s,
            avg_path_gains_db,
            max_doppler_hz,
            n_tx: n_tx_ant,
            n_rx: n_rx_ant,
        };
        fading.validate()?;
        Ok(LinkChannel::Statistical { path_loss, fading })
    }

    /// Draws the complete plan for one frame. Pure in (master seed,
    /// frame index): identical calls return identical plans.
    ///
    /// A draw whose emitters cannot be packed into the observable band
    /// (for example two maximum-rate wideband classes forced concurrent)
    /// is discarded and the whole frame is redrawn on a fresh stream, a
    /// bounded number of times.
    pub fn sample(&self, frame_index: u64) -> Result<ScenarioPlan> {
        const SCENARIO_ATTEMPTS: u32 = 40;
        let mut last = None;
        for attempt in 0..SCENARIO_ATTEMPTS {
            match self.sample_attempt(frame_index, attempt) {
                Ok(plan) => return Ok(plan),
                Err(e) => last = Some(e),
            }
        }
        Err(last.unwrap())
    }

    fn sample_attempt(&self, frame_index: u64, attempt: u32) -> Result<ScenarioPlan> {
        if frame_index >= self.cfg.frame_count {
            return Err(Error::config(format!(
                "frame index {frame_index} outside configured count {}",
                self.cfg.frame_count
            )));
        }
        let d = &self.cfg.distributions;
        let seed = frame_seed(self.cfg.master_seed, frame_index);
        let scenario_label = match attempt {
            0 => "scenario".to_string(),
            n => format!("scenario.{n}"),
        };
        let mut rng = derive_stream(seed, &scenario_label);

        let ch = &self.cfg.channel;
        let p_ray = ch.raytrace_weight / (ch.raytrace_weight + ch.statistical_weight);
        let channel_family = if p_ray > 0.0 && rng.gen_bool(p_ray) {
            ChannelProvenance::RayTraced
        } else {
            ChannelProvenance::Statistical
        };
        let traced = channel_family == ChannelProvenance::RayTraced;

        let n_tx = d.tx_count.sample_int(&mut rng).max(1) as usize;
        let n_rx = d.rx_count.sample_int(&mut rng).max(1) as usize;

        let mut txs = Vec::with_capacity(n_tx);
        for tx_id in 0..n_tx {
            let entry = self.draw_class(&mut rng);
            let symbol_rate_hz = d.symbol_rate_hz.sample(&mut rng);
            let rolloff = d.rolloff.sample(&mut rng);
            let modulation = entry.spec(symbol_rate_hz, rolloff);
            let message_source = self.draw_message_source(&modulation, &mut rng);
            let position_m = if traced {
                self.draw_position(&mut rng)
            } else {
                [0.0, 0.0, d.antenna_height_m.sample(&mut rng)]
            };
            txs.push(TxPlan {
                tx_id,
                class_id: entry.id,
                class_name: entry.name.clone(),
                modulation,
                message_source,
                n_antennas: d.tx_antennas.sample_int(&mut rng).max(1) as usize,
                n_segments: d.segments_per_tx.sample_int(&mut rng).max(1) as usize,
                power_dbm: d.tx_power_dbm.sample(&mut rng),
                phase_noise: PhaseNoiseSpec {
                    level_dbc_hz: d.phase_noise_level_dbchz.sample(&mut rng),
                },
                nonlinearity: self.draw_nonlinearity(&mut rng),
                position_m,
            });
        }

        let mut rxs = Vec::with_capacity(n_rx);
        for rx_id in 0..n_rx {
            let noise_figure_db = d.noise_figure_db.sample(&mut rng);
            let position_m = if traced {
                self.draw_position(&mut rng)
            } else {
                [0.0, 0.0, d.antenna_height_m.sample(&mut rng)]
            };
            rxs.push(RxPlan {
                rx_id,
                n_antennas: d.rx_antennas.sample_int(&mut rng).max(1) as usize,
                iq_imbalance: IqImbalanceSpec {
                    amplitude_db: d.iq_amplitude_db.sample(&mut rng),
                    phase_deg: d.iq_phase_deg.sample(&mut rng),
                },
                dc_offset: DcOffsetSpec {
                    offset_db: d.dc_offset_db.sample(&mut rng),
                },
                nonlinearity: self.draw_nonlinearity(&mut rng),
                noise_figure_db,
                noise_temperature_k: noise_temperature_from_figure_db(
                    noise_figure_db,
                    self.cfg.reference_temperature_k,
                ),
                position_m,
            });
        }

        let mut links = Vec::with_capacity(n_tx * n_rx);
        for tx in &txs {
            for rx in &rxs {
                let channel = if traced {
                    LinkChannel::RayTraced
                } else {
                    self.draw_statistical_link(tx.n_antennas, rx.n_antennas, &mut rng)?
                };
                links.push(LinkPlan {
                    tx_id: tx.tx_id,
                    rx_id: rx.rx_id,
                    channel,
                });
            }
        }

        let requests: Vec<TxScheduleRequest> = txs
            .iter()
            .map(|tx| TxScheduleRequest {
                tx_id: tx.tx_id,
                n_segments: tx.n_segments,
                symbol_rate_hz: tx.modulation.symbol_throughput_hz(),
                bandwidth_hz: tx.modulation.occupied_bandwidth_hz(),
            })
            .collect();
        let sched_cfg = self.schedule_config();
        let sched_label = match attempt {
            0 => "schedule".to_string(),
            n => format!("schedule.{n}"),
        };
        let mut sched_rng = derive_stream(seed, &sched_label);
        let schedule = schedule::plan_frame(
            &requests,
            (
                self.cfg.observable_band_hz[0],
                self.cfg.observable_band_hz[1],
            ),
            &sched_cfg,
            self.p_multi_tx.max(f64::MIN_POSITIVE),
            &mut sched_rng,
        )?;

        Ok(ScenarioPlan {
            frame_index,
            frame_seed: seed,
            channel_family,
            txs,
            rxs,
            links,
            schedule,
        })
    }

    /// Scheduler knobs implied by the configured distributions: the
    /// scheduler draws uniformly over each envelope, which matches the
    /// reference distributions exactly.
    pub fn schedule_config(&self) -> schedule::ScheduleConfig {
        let d = &self.cfg.distributions;
        schedule::ScheduleConfig {
            symbols_range: (
                d.symbols_per_segment.min_value().round() as u64,
                d.symbols_per_segment.max_value().round() as u64,
            ),
            idle_gap_range: (d.idle_gap_factor.min_value(), d.idle_gap_factor.max_value()),
            overlap_probability: self.cfg.schedule.overlap_probability,
            max_overlap_fraction: d.overlap_extent.max_value(),
            ..schedule::ScheduleConfig::default()
        }
    }
}

/// One-shot convenience around [`Sampler`]; callers producing many frames
/// should build the sampler once instead.
pub fn sample_scenario(cfg: &MasterConfig, frame_index: u64) -> Result<ScenarioPlan> {
    Sampler::new(cfg.clone())?.sample(frame_index)
}

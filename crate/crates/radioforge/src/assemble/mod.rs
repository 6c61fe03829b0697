//! Frame assembly: run one sampled scenario end to end and capture it.
//!
//! For every transmitter the chain is message -> modulate (with space-time
//! coding across antennas) -> scale to the drawn transmit power -> power
//! amplifier -> shared-oscillator phase noise -> resample to the master
//! clock -> complex upconversion to the scheduled carrier -> placement on
//! the frame timeline. Each link then pushes the full-length transmit
//! signal through its channel realization once; per-segment signal powers
//! are measured on the link output (segments of one transmitter never
//! overlap in time, so a segment's sample window isolates it). Receivers
//! superpose all incident links, add thermal noise sized by their noise
//! temperature, and apply front-end imperfections in signal order:
//! low-noise-amplifier compression, mixer IQ imbalance, baseband DC
//! offset.
//!
//! Everything observable derives from the scenario's frame seed through
//! labeled random streams (one per payload segment, oscillator, link and
//! receiver), so a frame is byte-identical no matter which worker build
//! it or in what order.

pub mod batch;
pub mod metadata;
pub mod sigmf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{
    self, apply_channel, generate_tap_process, ChannelRealization, OsmScene, TraceOptions,
};
use crate::config::{LinkChannel, MasterConfig, Sampler, ScenarioPlan, TxPlan};
use crate::error::{Error, Result};
use crate::impair::{
    apply_dc_offset, apply_iq_imbalance, apply_nonlinearity, apply_phase_noise,
    apply_thermal_noise, measure_truth_snr, ThermalNoiseSpec,
};
use crate::math::{db_to_power, mean_power, resample_sinc};
use crate::modulate::{modulate_antennas, ostbc, ModulationSpec, Payload};
use crate::rng::derive_stream;
use crate::schedule::EmissionEvent;
use crate::source::{generate_bits, MessageSource};

/// Half-width of the windowed-sinc resampler that moves waveforms from
/// their native modulator rate to the receiver master clock.
const RESAMPLE_HALF_TAPS: usize = 32;

/// Reference range for samples per frame; a frame outside it indicates a
/// configuration error rather than a valid capture.
pub const MIN_FRAME_SAMPLES: usize = 2_000;
pub const MAX_FRAME_SAMPLES: usize = 4_000_000;

/// Truth SNR values are clamped to this magnitude so outage links (zero
/// received power) and noiseless calibration receivers still serialize to
/// plain JSON numbers.
pub const SNR_CLAMP_DB: f64 = 300.0;

/// Ground truth for one emitted segment as one receiver saw it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalTruth {
    pub tx_id: usize,
    pub segment_index: usize,
    /// Registry class id of the transmitter's modulation.
    pub class_id: u32,
    pub class_name: String,
    /// Scheduled carrier within the observable band, Hz.
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub start_s: f64,
    pub duration_s: f64,
    pub n_symbols: u64,
    /// Measured signal-to-noise ratio per receive antenna, dB: link output
    /// power over the segment window against thermal noise in the
    /// occupied bandwidth.
    pub snr_db: Vec<f64>,
}

/// One receiver's capture of a frame: wideband IQ per antenna at the
/// master clock rate plus the ground truth for every incident segment.
#[derive(Debug, Clone)]
pub struct ReceiverFrame {
    pub frame_index: u64,
    pub rx_id: usize,
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    /// Complex baseband about the observable band center, one stream per
    /// receive antenna, all the same length.
    pub samples: Vec<Vec<Complex64>>,
    /// Transmitter-major, then segment order; one entry per segment of
    /// every contributing transmitter.
    pub truth: Vec<SignalTruth>,
}

impl ReceiverFrame {
    /// Archive name shared by the IQ recording and its annotation.
    pub fn file_prefix(&self) -> String {
        format!("Frame_{:06}_Rx_{:04}", self.frame_index, self.rx_id)
    }

    pub fn n_samples(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn n_antennas(&self) -> usize {
        self.samples.len()
    }
}

/// A fully synthesized frame: the sampled plan (the complete parameter
/// provenance) plus one capture per receiver.
#[derive(Debug, Clone)]
pub struct FrameSet {
    pub plan: ScenarioPlan,
    pub frames: Vec<ReceiverFrame>,
}

/// Sampler plus synthesis: the one-stop object for generating frames.
pub struct FramePipeline {
    sampler: Sampler,
}

impl FramePipeline {
    pub fn new(cfg: MasterConfig) -> Result<Self> {
        Ok(FramePipeline {
            sampler: Sampler::new(cfg)?,
        })
    }

    pub fn config(&self) -> &MasterConfig {
        self.sampler.config()
    }

    /// Sample the scenario for `frame_index` and synthesize every
    /// receiver's capture.
    pub fn generate(&self, frame_index: u64) -> Result<FrameSet> {
        let plan = self.sampler.sample(frame_index)?;
        let frames = synthesize_frame(self.sampler.config(), self.sampler.scene(), &plan)?;
        Ok(FrameSet { plan, frames })
    }

    /// Sample only the plan (cheap; no waveform synthesis).
    pub fn plan(&self, frame_index: u64) -> Result<ScenarioPlan> {
        self.sampler.sample(frame_index)
    }
}

/// Synthesize one frame for every receiver in the plan.
///
/// `scene` is required when any link is ray traced. Stage failures carry
/// the transmitter, link or receiver they occurred in.
pub fn synthesize_frame(
    cfg: &MasterConfig,
    scene: Option<&OsmScene>,
    plan: &ScenarioPlan,
) -> Result<Vec<ReceiverFrame>> {
    let fs = cfg.master_clock_rate_hz;
    let n_frame = (plan.schedule.frame_duration_s * fs).round() as usize;
    if !(MIN_FRAME_SAMPLES..=MAX_FRAME_SAMPLES).contains(&n_frame) {
        return Err(Error::signal(format!(
            "frame {} spans {n_frame} samples, outside the supported \
             [{MIN_FRAME_SAMPLES}, {MAX_FRAME_SAMPLES}] range",
            plan.frame_index
        )));
    }

    // Transmit signals on the frame timeline, per tx then per antenna.
    let mut tx_signals: Vec<Vec<Vec<Complex64>>> = Vec::with_capacity(plan.txs.len());
    for tx in &plan.txs {
        let signal = build_tx_signal(cfg, plan, tx, n_frame).map_err(|e| {
            Error::signal(format!("tx {} ({}): {e}", tx.tx_id, tx.class_name))
        })?;
        tx_signals.push(signal);
    }

    let events_by_tx: Vec<Vec<&EmissionEvent>> = plan
        .txs
        .iter()
        .map(|tx| {
            let mut evs: Vec<&EmissionEvent> = plan
                .schedule
                .events
                .iter()
                .filter(|e| e.tx_id == tx.tx_id)
                .collect();
            evs.sort_by_key(|e| e.segment_index);
            evs
        })
        .collect();

    let mut frames = Vec::with_capacity(plan.rxs.len());
    for rx in &plan.rxs {
        let mut streams = vec![vec![Complex64::default(); n_frame]; rx.n_antennas];
        let mut truth: Vec<SignalTruth> = Vec::new();
        let noise = ThermalNoiseSpec {
            temperature_k: rx.noise_temperature_k,
        };

        for (t, tx) in plan.txs.iter().enumerate() {
            let link = plan
                .links
                .iter()
                .find(|l| l.tx_id == tx.tx_id && l.rx_id == rx.rx_id)
                .ok_or_else(|| {
                    Error::config(format!("no link for tx {} -> rx {}", tx.tx_id, rx.rx_id))
                })?;
            let h = realize_link(cfg, scene, plan, tx, rx.rx_id, rx.n_antennas, &link.channel)
                .map_err(|e| {
                    Error::signal(format!("link tx {} -> rx {}: {e}", tx.tx_id, rx.rx_id))
                })?;
            let incident = apply_channel(&tx_signals[t], &h).map_err(|e| {
                Error::signal(format!("link tx {} -> rx {}: {e}", tx.tx_id, rx.rx_id))
            })?;

            for ev in &events_by_tx[t] {
                let lo = (ev.start_s * fs).round() as usize;
                let hi = ((ev.start_s + ev.duration_s) * fs).round() as usize;
                let hi = hi.min(n_frame);
                let snr_db: Vec<f64> = incident
                    .iter()
                    .map(|ant| {
                        let p = mean_power(&ant[lo.min(hi)..hi]);
                        clamp_snr(measure_truth_snr(p, &noise, ev.bandwidth_hz))
                    })
                    .collect();
                truth.push(SignalTruth {
                    tx_id: tx.tx_id,
                    segment_index: ev.segment_index,
                    class_id: tx.class_id,
                    class_name: tx.class_name.clone(),
                    carrier_hz: ev.carrier_hz,
                    bandwidth_hz: ev.bandwidth_hz,
                    start_s: ev.start_s,
                    duration_s: ev.duration_s,
                    n_symbols: ev.n_symbols,
                    snr_db,
                });
            }

            for (acc, add) in streams.iter_mut().zip(&incident) {
                for (a, &b) in acc.iter_mut().zip(add) {
                    *a += b;
                }
            }
        }

        // Receiver front end: antenna-referred thermal noise, then the
        // low-noise amplifier, mixer imbalance and baseband DC offset.
        let mut rng = derive_stream(plan.frame_seed, &format!("rx.{}", rx.rx_id));
        for s in streams.iter_mut() {
            apply_thermal_noise(s, &noise, fs, &mut rng);
        }
        for s in streams.iter_mut() {
            apply_nonlinearity(s, &rx.nonlinearity);
            apply_iq_imbalance(s, &rx.iq_imbalance);
            apply_dc_offset(s, &rx.dc_offset, &mut rng);
        }

        frames.push(ReceiverFrame {
            frame_index: plan.frame_index,
            rx_id: rx.rx_id,
            sample_rate_hz: fs,
            duration_s: plan.schedule.frame_duration_s,
            samples: streams,
            truth,
        });
    }
    Ok(frames)
}

fn clamp_snr(snr_db: f64) -> f64 {
    if snr_db.is_nan() {
        return -SNR_CLAMP_DB;
    }
    snr_db.clamp(-SNR_CLAMP_DB, SNR_CLAMP_DB)
}

/// Build one transmitter's frame-length signal per antenna at the master
/// clock rate: every scheduled segment synthesized, amplified, translated
/// to its carrier and placed at its start time, then the transmitter's
/// oscillator phase noise applied across the whole frame (one shared
/// oscillator, so every antenna sees the same phase realization).
fn build_tx_signal(
    cfg: &MasterConfig,
    plan: &ScenarioPlan,
    tx: &TxPlan,
    n_frame: usize,
) -> Result<Vec<Vec<Complex64>>> {
    let fs = cfg.master_clock_rate_hz;
    let band_center = cfg.band_center();
    let native_fs = tx.modulation.sample_rate_hz();
    let edges = tx.modulation.band_edges_hz();
    // Asymmetric baseband spectra (single and vestigial sideband) are
    // re-centered so the scheduled carrier lands mid-band.
    let band_mid = 0.5 * (edges[0] + edges[1]);
    let watts = db_to_power(tx.power_dbm - 30.0);

    let mut streams = vec![vec![Complex64::default(); n_frame]; tx.n_antennas];
    for ev in plan.schedule.events.iter().filter(|e| e.tx_id == tx.tx_id) {
        if !ev.carrier_hz.is_finite() {
            return Err(Error::signal(format!(
                "segment {} has no allocated carrier",
                ev.segment_index
            )));
        }
        let mut rng = derive_stream(
            plan.frame_seed,
            &format!("payload.{}.{}", tx.tx_id, ev.segment_index),
        );
        let n_slots = ev.n_symbols as usize;
        let antennas = if tx.modulation.is_digital() {
            // Space-time coded classes shrink the payload so the coded
            // stream fits the scheduled symbol slots.
            let k = match tx.modulation {
                ModulationSpec::Linear { .. } => {
                    ostbc::max_symbols_for_slots(n_slots, tx.n_antennas)
                }
                _ => n_slots,
            };
            let n_bits = k * tx.modulation.bits_per_symbol() as usize;
            let register_length = match &tx.message_source {
                MessageSource::Prbs { register_length } => *register_length,
                other => {
                    return Err(Error::config(format!(
                        "digital class needs a bit source, got {other:?}"
                    )))
                }
            };
            let bits = generate_bits(register_length, n_bits, &mut rng)?;
            modulate_antennas(&tx.modulation, Payload::Bits(&bits), tx.n_antennas)?
        } else {
            let n_msg = (ev.duration_s * native_fs).round() as usize;
            let msg = tx.message_source.message(n_msg, native_fs, &mut rng)?;
            modulate_antennas(&tx.modulation, Payload::Message(&msg), tx.n_antennas)?
        };

        let f_mix = (ev.carrier_hz - band_center) - band_mid;
        let n0 = (ev.start_s * fs).round() as usize;
        for (ant, wave) in antennas.into_iter().enumerate() {
            let mut seg = wave.samples;
            let amp = watts.sqrt();
            for v in seg.iter_mut() {
                *v *= amp;
            }
            apply_nonlinearity(&mut seg, &tx.nonlinearity);
            let at_clock = resample_sinc(&seg, native_fs, fs, RESAMPLE_HALF_TAPS);
            mix_and_place(&at_clock, f_mix, fs, n0, &mut streams[ant]);
        }
    }

    // One oscillator per transmitter: clone the derived stream so every
    // antenna rotates through the identical phase realization.
    let rng = derive_stream(plan.frame_seed, &format!("phase-noise.{}", tx.tx_id));
    for s in streams.iter_mut() {
        let mut r = rng.clone();
        apply_phase_noise(s, &tx.phase_noise, fs, &mut r)?;
    }
    Ok(streams)
}

/// Add `seg` into `out` starting at sample `n0`, rotated to `f_mix` Hz.
/// The mixer phase is referenced to the frame origin so a transmitter's
/// carrier stays phase-continuous across its segments.
fn mix_and_place(seg: &[Complex64], f_mix: f64, fs: f64, n0: usize, out: &mut [Complex64]) {
    let step = Complex64::from_polar(1.0, std::f64::consts::TAU * f_mix / fs);
    let mut phasor = Complex64::from_polar(1.0, std::f64::consts::TAU * f_mix * n0 as f64 / fs);
    for (j, &v) in seg.iter().enumerate() {
        let n = n0 + j;
        if n >= out.len() {
            break;
        }
        out[n] += v * phasor;
        phasor *= step;
        // Keep the recurrence on the unit circle over long segments.
        if j % 16384 == 16383 {
            phasor = phasor.unscale(phasor.norm());
        }
    }
}

/// Draw or trace the channel realization for one link.
fn realize_link(
    cfg: &MasterConfig,
    scene: Option<&OsmScene>,
    plan: &ScenarioPlan,
    tx: &TxPlan,
    rx_id: usize,
    n_rx_antennas: usize,
    link: &LinkChannel,
) -> Result<ChannelRealization> {
    let fs = cfg.master_clock_rate_hz;
    let n_frame = (plan.schedule.frame_duration_s * fs).round() as usize;
    match link {
        LinkChannel::Ideal => ChannelRealization::from_taps(
            vec![
                channel::TapProcess::Static(Complex64::new(1.0, 0.0));
                tx.n_antennas * n_rx_antennas
            ],
            vec![0.0],
            tx.n_antennas,
            n_rx_antennas,
            0.0,
            fs,
            usize::MAX,
            channel::ChannelProvenance::Statistical,
        ),
        LinkChannel::Statistical { path_loss, fading } => {
            let mut rng = derive_stream(
                plan.frame_seed,
                &format!("channel.{}.{}", tx.tx_id, rx_id),
            );
            let pl_db = channel::path_loss_db(path_loss);
            generate_tap_process(fading, pl_db, n_frame, fs, &mut rng)
        }
        LinkChannel::RayTraced => {
            let scene = scene.ok_or_else(|| {
                Error::config("ray-traced link requires a scene; none is loaded")
            })?;
            let rx_pos = plan
                .rxs
                .iter()
                .find(|r| r.rx_id == rx_id)
                .map(|r| r.position_m)
                .ok_or_else(|| Error::config(format!("unknown rx {rx_id}")))?;
            let opts = TraceOptions {
                max_reflections: cfg.channel.max_reflection_order as usize,
                reflection_coeff: cfg.channel.reflection_coefficient,
            };
            let rays =
                channel::trace_paths(scene, tx.position_m, rx_pos, cfg.rf_carrier_hz, &opts)?;
            channel::rays_to_channel(&rays, fs, tx.n_antennas, n_rx_antennas)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{LinkPlan, RxPlan};
    use crate::impair::{DcOffsetSpec, IqImbalanceSpec, NonlinearitySpec, PhaseNoiseSpec};
    use crate::math::{fft_forward, fftshift, fftshift_freqs};
    use crate::modulate::{demodulate_bits, registry};
    use crate::schedule::FramePlan;
    use crate::source::Tone;

    /// Impairment settings so mild the chain is effectively transparent.
    fn neutral_nonlinearity() -> NonlinearitySpec {
        NonlinearitySpec::Rapp {
            gain_db: 0.0,
            smoothness: 2.0,
            saturation_v: 1e9,
        }
    }

    fn neutral_tx(class_name: &str, rate_hz: f64, n_antennas: usize, tx_id: usize) -> TxPlan {
        let entry = registry::by_name(class_name).unwrap();
        TxPlan {
            tx_id,
            class_id: entry.id,
            class_name: entry.name.to_string(),
            modulation: entry.spec(rate_hz, 0.35),
            message_source: if entry.is_digital() {
                MessageSource::Prbs {
                    register_length: None,
                }
            } else {
                MessageSource::Multitone {
                    tones: vec![Tone {
                        freq_hz: 3e3,
                        amplitude: 1.0,
                    }],
                }
            },
            n_antennas,
            n_segments: 1,
            power_dbm: 10.0,
            phase_noise: PhaseNoiseSpec {
                level_dbc_hz: -300.0,
            },
            nonlinearity: neutral_nonlinearity(),
            position_m: [0.0, 0.0, 10.0],
        }
    }

    fn neutral_rx(rx_id: usize, n_antennas: usize, temperature_k: f64) -> RxPlan {
        RxPlan {
            rx_id,
            n_antennas,
            iq_imbalance: IqImbalanceSpec {
                amplitude_db: 0.0,
                phase_deg: 0.0,
            },
            dc_offset: DcOffsetSpec { offset_db: -300.0 },
            nonlinearity: neutral_nonlinearity(),
            noise_figure_db: 0.0,
            noise_temperature_k: temperature_k,
            position_m: [50.0, 0.0, 8.0],
        }
    }

    fn event(
        tx_id: usize,
        segment_index: usize,
        start_s: f64,
        n_symbols: u64,
        rate_hz: f64,
        carrier_hz: f64,
        bandwidth_hz: f64,
    ) -> EmissionEvent {
        EmissionEvent {
            tx_id,
            segment_index,
            start_s,
            duration_s: n_symbols as f64 / rate_hz,
            carrier_hz,
            bandwidth_hz,
            n_symbols,
            symbol_rate_hz: rate_hz,
        }
    }

    fn single_tx_plan(class_name: &str, noise_k: f64) -> ScenarioPlan {
        let rate = 40e3;
        let tx = neutral_tx(class_name, rate, 1, 0);
        let bw = tx.modulation.occupied_bandwidth_hz();
        ScenarioPlan {
            frame_index: 7,
            frame_seed: crate::rng::frame_seed(0xC0FFEE, 7),
            channel_family: channel::ChannelProvenance::Statistical,
            txs: vec![tx],
            rxs: vec![neutral_rx(0, 1, noise_k)],
            links: vec![LinkPlan {
                tx_id: 0,
                rx_id: 0,
                channel: LinkChannel::Ideal,
            }],
            schedule: FramePlan {
                frame_duration_s: 0.04,
                events: vec![event(0, 0, 0.005, 1000, rate, 250e3, bw)],
                overlaps: vec![],
            },
        }
    }

    fn test_config() -> MasterConfig {
        MasterConfig::default()
    }

    #[test]
    fn loopback_frame_recovers_bits() {
        let cfg = test_config();
        let plan = single_tx_plan("16QAM", 0.0);
        let frames = synthesize_frame(&cfg, None, &plan).unwrap();
        assert_eq!(frames.len(), 1);
        let frame = &frames[0];
        assert_eq!(frame.n_samples(), (0.04 * cfg.master_clock_rate_hz).round() as usize);

        // Downconvert the captured segment back to baseband at the native
        // modulator rate and demodulate.
        let tx = &plan.txs[0];
        let ev = &plan.schedule.events[0];
        let fs = cfg.master_clock_rate_hz;
        let f_mix = ev.carrier_hz - cfg.band_center();
        let mut base: Vec<Complex64> = frame.samples[0]
            .iter()
            .enumerate()
            .map(|(n, &v)| {
                v * Complex64::from_polar(1.0, -std::f64::consts::TAU * f_mix * n as f64 / fs)
            })
            .collect();
        let native_fs = tx.modulation.sample_rate_hz();
        base = resample_sinc(&base, fs, native_fs, RESAMPLE_HALF_TAPS);
        let n0 = (ev.start_s * native_fs).round() as usize;
        let n_need = tx.modulation.waveform_len(1000);
        let seg = &base[n0..n0 + n_need];

        let got = demodulate_bits(&tx.modulation, seg, 1000).unwrap();
        let mut rng = derive_stream(plan.frame_seed, "payload.0.0");
        let want = generate_bits(None, 1000 * 4, &mut rng).unwrap();
        assert_eq!(got, want, "frame loopback must be bit exact");
    }

    #[test]
    fn truth_matches_schedule_and_noise_differs_across_receivers() {
        let cfg = test_config();
        let mut plan = single_tx_plan("4PSK", 600.0);
        plan.rxs.push(neutral_rx(1, 1, 600.0));
        plan.links.push(LinkPlan {
            tx_id: 0,
            rx_id: 1,
            channel: LinkChannel::Ideal,
        });
        let frames = synthesize_frame(&cfg, None, &plan).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[0].file_prefix(), "Frame_000007_Rx_0000");
        assert_eq!(frames[1].file_prefix(), "Frame_000007_Rx_0001");
        assert_ne!(
            frames[0].samples[0], frames[1].samples[0],
            "receivers draw independent noise"
        );
        for frame in &frames {
            assert_eq!(frame.truth.len(), 1);
            let t = &frame.truth[0];
            let ev = &plan.schedule.events[0];
            assert_eq!(t.carrier_hz, ev.carrier_hz);
            assert_eq!(t.bandwidth_hz, ev.bandwidth_hz);
            assert_eq!(t.start_s, ev.start_s);
            assert_eq!(t.duration_s, ev.duration_s);
            assert_eq!(t.n_symbols, ev.n_symbols);
            assert_eq!(t.snr_db.len(), 1);
            assert!(t.snr_db[0] > 20.0, "strong link, got {}", t.snr_db[0]);
        }
        // Identical tx content: subtracting the frames leaves only noise,
        // far weaker than the signal itself.
        let diff_power: f64 = frames[0]
            .samples[0]
            .iter()
            .zip(&frames[1].samples[0])
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / frames[0].n_samples() as f64;
        let sig_power = mean_power(&frames[0].samples[0]);
        assert!(diff_power < 0.1 * sig_power);
    }

    #[test]
    fn tone_lands_at_scheduled_carrier() {
        let cfg = test_config();
        // Amplitude modulation keeps a strong residual carrier, so the
        // spectral peak sits exactly at the scheduled carrier.
        let plan = single_tx_plan("AM-DSB", 0.0);
        let frames = synthesize_frame(&cfg, None, &plan).unwrap();
        let frame = &frames[0];
        let fs = cfg.master_clock_rate_hz;
        let ev = &plan.schedule.events[0];
        let lo = (ev.start_s * fs).round() as usize;
        let n_fft = 16384;
        let mut window: Vec<Complex64> = frame.samples[0][lo..lo + n_fft].to_vec();
        fft_forward(&mut window);
        let spec = fftshift(&window);
        let freqs = fftshift_freqs(n_fft, fs);
        let peak = spec
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
            .map(|(i, _)| freqs[i])
            .unwrap();
        let expected = ev.carrier_hz - cfg.band_center();
        let bin = fs / n_fft as f64;
        assert!(
            (peak - expected).abs() <= bin,
            "peak {peak} Hz, expected {expected} Hz within {bin} Hz"
        );
    }

    #[test]
    fn superposition_conserves_power() {
        let cfg = test_config();
        let rate = 40e3;
        let tx0 = neutral_tx("8PSK", rate, 1, 0);
        let tx1 = neutral_tx("2FSK", rate, 1, 1);
        let bw0 = tx0.modulation.occupied_bandwidth_hz();
        let bw1 = tx1.modulation.occupied_bandwidth_hz();
        let ev0 = event(0, 0, 0.004, 1200, rate, 150e3, bw0);
        let ev1 = event(1, 0, 0.010, 1200, rate, 350e3, bw1);
        let schedule = FramePlan {
            frame_duration_s: 0.05,
            events: vec![ev0.clone(), ev1.clone()],
            overlaps: vec![],
        };
        let seed = crate::rng::frame_seed(0xC0FFEE, 11);
        let build = |txs: Vec<TxPlan>, events: Vec<EmissionEvent>| ScenarioPlan {
            frame_index: 11,
            frame_seed: seed,
            channel_family: channel::ChannelProvenance::Statistical,
            links: txs
                .iter()
                .map(|t| LinkPlan {
                    tx_id: t.tx_id,
                    rx_id: 0,
                    channel: LinkChannel::Ideal,
                })
                .collect(),
            txs,
            rxs: vec![neutral_rx(0, 1, 0.0)],
            schedule: FramePlan {
                frame_duration_s: 0.05,
                events,
                overlaps: vec![],
            },
        };
        let only0 = synthesize_frame(&cfg, None, &build(vec![tx0.clone()], vec![ev0.clone()]))
            .unwrap();
        let only1 = synthesize_frame(&cfg, None, &build(vec![tx1.clone()], vec![ev1.clone()]))
            .unwrap();
        let both = synthesize_frame(
            &cfg,
            None,
            &build(vec![tx0, tx1], schedule.events.clone()),
        )
        .unwrap();

        let energy = |f: &ReceiverFrame| {
            f.samples[0].iter().map(|v| v.norm_sqr()).sum::<f64>()
        };
        let sum = energy(&only0[0]) + energy(&only1[0]);
        let combined = energy(&both[0]);
        assert!(
            (combined - sum).abs() < 0.01 * sum,
            "combined {combined}, parts {sum}"
        );
    }

    #[test]
    fn synthesis_is_deterministic() {
        let cfg = test_config();
        let plan = single_tx_plan("GMSK", 400.0);
        let a = synthesize_frame(&cfg, None, &plan).unwrap();
        let b = synthesize_frame(&cfg, None, &plan).unwrap();
        let bits = |f: &ReceiverFrame| -> Vec<u64> {
            f.samples[0]
                .iter()
                .flat_map(|v| [v.re.to_bits(), v.im.to_bits()])
                .collect()
        };
        assert_eq!(bits(&a[0]), bits(&b[0]), "same plan, same bytes");
        assert_eq!(a[0].truth, b[0].truth);
    }

    #[test]
    fn space_time_coded_transmission_fills_every_antenna() {
        let cfg = test_config();
        let rate = 40e3;
        let tx = neutral_tx("4PSK", rate, 2, 0);
        let bw = tx.modulation.occupied_bandwidth_hz();
        let plan = ScenarioPlan {
            frame_index: 3,
            frame_seed: crate::rng::frame_seed(1, 3),
            channel_family: channel::ChannelProvenance::Statistical,
            txs: vec![tx],
            rxs: vec![neutral_rx(0, 2, 0.0)],
            links: vec![LinkPlan {
                tx_id: 0,
                rx_id: 0,
                channel: LinkChannel::Ideal,
            }],
            schedule: FramePlan {
                frame_duration_s: 0.04,
                events: vec![event(0, 0, 0.004, 1000, rate, 200e3, bw)],
                overlaps: vec![],
            },
        };
        let frames = synthesize_frame(&cfg, None, &plan).unwrap();
        assert_eq!(frames[0].n_antennas(), 2);
        assert!(mean_power(&frames[0].samples[0]) > 0.0);
        assert!(mean_power(&frames[0].samples[1]) > 0.0);
        assert_eq!(frames[0].truth[0].snr_db.len(), 2);
    }

    #[test]
    fn frames_outside_sample_budget_are_rejected() {
        let cfg = test_config();
        let mut plan = single_tx_plan("OOK", 0.0);
        plan.schedule.frame_duration_s = 1e-4;
        assert!(synthesize_frame(&cfg, None, &plan).is_err());
        plan.schedule.frame_duration_s = 10.0;
        assert!(synthesize_frame(&cfg, None, &plan).is_err());
    }
}

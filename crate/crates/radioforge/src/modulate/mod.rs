//! Baseband waveform synthesis for every supported modulation class.
//!
//! A [`ModulationSpec`] fully determines a waveform given payload bits (or
//! an analog message), and every waveform leaves here with exactly unit
//! average power; transmit power, channels and noise are applied later in
//! the pipeline, so power bookkeeping stays in one place.
//!
//! Band edges are closed-form per family (constants calibrated against
//! measured -20 dB spectral extents; see `band_edge_formulas_track_spectrum`
//! in the tests). The scheduler, the ground-truth metadata and the
//! bounding-box export all use the same formulas, which keeps guard bands
//! and annotations consistent without synthesizing waveforms twice.

pub mod constellation;
pub mod demod;
pub mod ostbc;
pub mod registry;
pub mod rrc;

mod analog;
mod cpm;
mod linear;
mod multicarrier;
mod otfs;

pub use analog::AnalogKind;
pub use demod::{demodulate_bits, demodulate_labels, soft_symbols};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use constellation::Constellation;

/// Samples per symbol for single-carrier waveforms.
pub const SINGLE_CARRIER_SPS: u32 = 8;
/// RRC span in symbols.
pub const RRC_SPAN_SYMBOLS: u32 = 16;
/// Modulation index shared by the whole CPM family (MSK-compatible).
pub const CPM_MOD_INDEX: f64 = 0.5;
/// Gaussian pulse BT products.
pub const GMSK_BT: f64 = 0.3;
pub const GFSK_BT: f64 = 0.5;
/// Multicarrier geometry: 16-point FFT, 6 loaded subcarriers, CP of 6
/// (the CP doubles as the raised-cosine taper interval, and six samples
/// keep the edge transitions smooth enough to hold the skirts in).
pub const MC_FFT_SIZE: usize = 16;
pub const MC_USED_SUBCARRIERS: usize = 6;
pub const MC_CP_LEN: usize = 6;
/// OTFS grid: 6 delay bins (subcarriers) by 8 Doppler bins.
pub const OTFS_DELAY_BINS: usize = 6;
pub const OTFS_DOPPLER_BINS: usize = 8;
pub const OTFS_CP_LEN: usize = 4;

/// CPM band-edge model, calibrated against the measured -20 dB extent
/// across orders 2..8 at modulation index 1/2: the half-width is
/// `(spread * (M-1) * h + skirt) * Rs / 2`. Rectangular frequency pulses
/// switch hard every symbol and leak well past the outermost deviation
/// tone, hence the larger spread; Gaussian pulses are smooth and stay
/// close to the deviation span.
const CPM_SPREAD_RECT: f64 = 1.72;
const CPM_SKIRT_RECT: f64 = 0.52;
const CPM_SPREAD_GAUSS: f64 = 1.12;
const CPM_SKIRT_GAUSS: f64 = 0.70;
/// Multicarrier band edges sit this many bins beyond the outermost loaded
/// subcarrier's center, covering the tapered-block skirts.
const MC_EXCESS_BINS: f64 = 1.5;

/// Analog message bandwidth as a fraction of the drawn symbol rate.
pub const ANALOG_MESSAGE_BW_FRACTION: f64 = 0.4;
/// FM peak deviation as a multiple of the message bandwidth.
const FM_DEVIATION_RATIO: f64 = 2.0;
/// PM peak phase in radians.
const PM_PEAK_PHASE: f64 = std::f64::consts::FRAC_PI_2;
/// AM modulation depth.
const AM_DEPTH: f64 = 0.7;
/// VSB vestige fraction of the message bandwidth.
const VSB_VESTIGE_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinearFamily {
    Ook,
    Ask,
    Psk,
    Qam,
    /// MIL-STD-188-110 style QAM placeholder; same geometry as QAM, kept
    /// as a separate experimental label.
    MilQam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CpmFamily {
    Fsk,
    Gfsk,
    Cpfsk,
    Msk,
    Gmsk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum McKind {
    Ofdm,
    Scfdma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerFamily {
    Ask,
    Psk,
    Qam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InnerSpec {
    pub family: InnerFamily,
    pub order: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "waveform", rename_all = "kebab-case")]
pub enum ModulationSpec {
    Linear {
        family: LinearFamily,
        order: u32,
        symbol_rate_hz: f64,
        rolloff: f64,
        sps: u32,
        span_symbols: u32,
    },
    Cpm {
        family: CpmFamily,
        order: u32,
        symbol_rate_hz: f64,
        mod_index: f64,
        /// Gaussian BT product; `None` selects the rectangular pulse.
        bt: Option<f64>,
        sps: u32,
    },
    Analog {
        kind: AnalogKind,
        message_bandwidth_hz: f64,
        sample_rate_hz: f64,
    },
    Multicarrier {
        kind: McKind,
        inner: InnerSpec,
        fft_size: usize,
        used_subcarriers: usize,
        cp_len: usize,
        subcarrier_spacing_hz: f64,
    },
    Otfs {
        inner: InnerSpec,
        delay_bins: usize,
        doppler_bins: usize,
        cp_len: usize,
        subcarrier_spacing_hz: f64,
    },
}

/// Payload for [`modulate`]: bits for digital specs, a real message for
/// analog specs.
pub enum Payload<'a> {
    Bits(&'a [u8]),
    Message(&'a [f64]),
}

#[derive(Debug, Clone)]
pub struct BasebandWaveform {
    pub samples: Vec<Complex64>,
    pub sample_rate_hz: f64,
    /// Occupied band relative to the (future) carrier, [low, high] Hz.
    pub band_edges_hz: [f64; 2],
    /// Constellation symbols for digital specs, notional symbols (duration
    /// times symbol rate) for analog.
    pub n_symbols: usize,
}

impl BasebandWaveform {
    pub fn occupied_bandwidth_hz(&self) -> f64 {
        self.band_edges_hz[1] - self.band_edges_hz[0]
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }
}

pub(crate) fn constellation_for(family: LinearFamily, order: u32) -> Constellation {
    match family {
        LinearFamily::Ook => Constellation::ask(2),
        LinearFamily::Ask => Constellation::ask(order),
        LinearFamily::Psk => Constellation::psk(order),
        LinearFamily::Qam | LinearFamily::MilQam => Constellation::qam(order),
    }
}

pub(crate) fn inner_constellation(inner: InnerSpec) -> Constellation {
    match inner.family {
        InnerFamily::Ask => Constellation::ask(inner.order),
        InnerFamily::Psk => Constellation::psk(inner.order),
        InnerFamily::Qam => Constellation::qam(inner.order),
    }
}

impl ModulationSpec {
    pub fn is_digital(&self) -> bool {
        !matches!(self, ModulationSpec::Analog { .. })
    }

    /// Bits per constellation symbol; zero for analog.
    pub fn bits_per_symbol(&self) -> u32 {
        match self {
            ModulationSpec::Linear { order, .. } => order.trailing_zeros(),
            ModulationSpec::Cpm { order, .. } => order.trailing_zeros(),
            ModulationSpec::Analog { .. } => 0,
            ModulationSpec::Multicarrier { inner, .. } => inner.order.trailing_zeros(),
            ModulationSpec::Otfs { inner, .. } => inner.order.trailing_zeros(),
        }
    }

    /// Native sample rate of the synthesized waveform.
    pub fn sample_rate_hz(&self) -> f64 {
        match self {
            ModulationSpec::Linear { symbol_rate_hz, sps, .. } => symbol_rate_hz * *sps as f64,
            ModulationSpec::Cpm { symbol_rate_hz, sps, .. } => symbol_rate_hz * *sps as f64,
            ModulationSpec::Analog { sample_rate_hz, .. } => *sample_rate_hz,
            ModulationSpec::Multicarrier { fft_size, subcarrier_spacing_hz, .. } => {
                *fft_size as f64 * subcarrier_spacing_hz
            }
            ModulationSpec::Otfs { delay_bins, subcarrier_spacing_hz, .. } => {
                *delay_bins as f64 * subcarrier_spacing_hz
            }
        }
    }

    /// Scheduled symbols per second of emitted waveform, block and cyclic
    /// prefix overheads included. The scheduler converts symbol counts to
    /// segment durations at this rate. Analog classes have no symbols;
    /// they schedule message time at the message bandwidth so segment
    /// lengths stay comparable to digital ones.
    pub fn symbol_throughput_hz(&self) -> f64 {
        match self {
            ModulationSpec::Linear { symbol_rate_hz, .. }
            | ModulationSpec::Cpm { symbol_rate_hz, .. } => *symbol_rate_hz,
            ModulationSpec::Analog { message_bandwidth_hz, .. } => *message_bandwidth_hz,
            ModulationSpec::Multicarrier {
                fft_size,
                used_subcarriers,
                cp_len,
                ..
            } => *used_subcarriers as f64 * self.sample_rate_hz() / (fft_size + cp_len) as f64,
            ModulationSpec::Otfs {
                delay_bins,
                doppler_bins,
                cp_len,
                ..
            } => {
                let per_frame = (delay_bins * doppler_bins) as f64;
                let samples_per_frame = (doppler_bins * (delay_bins + cp_len)) as f64;
                per_frame * self.sample_rate_hz() / samples_per_frame
            }
        }
    }

    /// Exact output length of [`modulate`] for `n_symbols` symbols.
    pub fn waveform_len(&self, n_symbols: usize) -> usize {
        match self {
            ModulationSpec::Linear { sps, span_symbols, .. } => {
                n_symbols * *sps as usize + (*span_symbols * *sps) as usize
            }
            ModulationSpec::Cpm { sps, bt, .. } => {
                let l = if bt.is_some() { cpm::GAUSSIAN_PULSE_SYMBOLS } else { 1 };
                (n_symbols + l - 1) * *sps as usize
            }
            ModulationSpec::Analog { sample_rate_hz, .. } => {
                // Analog "symbols" are notional: duration * notional rate.
                // The caller supplies the message at the waveform rate.
                let _ = sample_rate_hz;
                n_symbols
            }
            ModulationSpec::Multicarrier { fft_size, used_subcarriers, cp_len, .. } => {
                n_symbols.div_ceil(*used_subcarriers) * (fft_size + cp_len)
            }
            ModulationSpec::Otfs { delay_bins, doppler_bins, cp_len, .. } => {
                let per_frame = delay_bins * doppler_bins;
                n_symbols.div_ceil(per_frame) * doppler_bins * (delay_bins + cp_len)
            }
        }
    }

    /// Closed-form occupied band relative to the carrier, [low, high] Hz.
    pub fn band_edges_hz(&self) -> [f64; 2] {
        match self {
            ModulationSpec::Linear { symbol_rate_hz, rolloff, .. } => {
                let half = 0.5 * (1.0 + rolloff) * symbol_rate_hz;
                [-half, half]
            }
            ModulationSpec::Cpm { order, symbol_rate_hz, mod_index, bt, .. } => {
                let (spread, skirt) = if bt.is_some() {
                    (CPM_SPREAD_GAUSS, CPM_SKIRT_GAUSS)
                } else {
                    (CPM_SPREAD_RECT, CPM_SKIRT_RECT)
                };
                let half =
                    0.5 * (spread * (*order as f64 - 1.0) * mod_index + skirt) * symbol_rate_hz;
                [-half, half]
            }
            ModulationSpec::Analog { kind, message_bandwidth_hz, .. } => {
                let bm = *message_bandwidth_hz;
                match kind {
                    AnalogKind::AmDsb => [-bm, bm],
                    AnalogKind::AmSsb => [0.0, bm],
                    AnalogKind::AmVsb => [-VSB_VESTIGE_FRACTION * bm, bm],
                    AnalogKind::Fm => {
                        let half = FM_DEVIATION_RATIO * bm + bm;
                        [-half, half]
                    }
                    AnalogKind::Pm => {
                        let half = (PM_PEAK_PHASE + 1.0) * bm;
                        [-half, half]
                    }
                }
            }
            ModulationSpec::Multicarrier { used_subcarriers, subcarrier_spacing_hz, .. } => {
                // Loaded bins sit at +/-1..+/-u/2; the excess covers CP
                // windowing sidelobes.
                let half = (*used_subcarriers as f64 / 2.0 + MC_EXCESS_BINS) * subcarrier_spacing_hz;
                [-half, half]
            }
            ModulationSpec::Otfs { delay_bins, subcarrier_spacing_hz, .. } => {
                // Every delay bin is loaded, so the signal fills its native
                // Nyquist band.
                let half = *delay_bins as f64 / 2.0 * subcarrier_spacing_hz;
                [-half, half]
            }
        }
    }

    pub fn occupied_bandwidth_hz(&self) -> f64 {
        let [lo, hi] = self.band_edges_hz();
        hi - lo
    }
}

/// Widest occupied bandwidth any registry class can produce for the given
/// symbol-rate and rolloff ceilings. Config validation uses this to check
/// the observable band is wide enough.
pub fn max_occupied_bandwidth(max_symbol_rate_hz: f64, max_rolloff: f64) -> f64 {
    let candidates = [
        ModulationSpec::Linear {
            family: LinearFamily::Qam,
            order: 16,
            symbol_rate_hz: max_symbol_rate_hz,
            rolloff: max_rolloff,
            sps: SINGLE_CARRIER_SPS,
            span_symbols: RRC_SPAN_SYMBOLS,
        },
        ModulationSpec::Cpm {
            family: CpmFamily::Fsk,
            order: 8,
            symbol_rate_hz: max_symbol_rate_hz,
            mod_index: CPM_MOD_INDEX,
            bt: None,
            sps: SINGLE_CARRIER_SPS,
        },
        ModulationSpec::Analog {
            kind: AnalogKind::Fm,
            message_bandwidth_hz: ANALOG_MESSAGE_BW_FRACTION * max_symbol_rate_hz,
            sample_rate_hz: SINGLE_CARRIER_SPS as f64 * max_symbol_rate_hz,
        },
        ModulationSpec::Multicarrier {
            kind: McKind::Ofdm,
            inner: InnerSpec { family: InnerFamily::Psk, order: 4 },
            fft_size: MC_FFT_SIZE,
            used_subcarriers: MC_USED_SUBCARRIERS,
            cp_len: MC_CP_LEN,
            subcarrier_spacing_hz: max_symbol_rate_hz / MC_USED_SUBCARRIERS as f64,
        },
        ModulationSpec::Otfs {
            inner: InnerSpec { family: InnerFamily::Psk, order: 4 },
            delay_bins: OTFS_DELAY_BINS,
            doppler_bins: OTFS_DOPPLER_BINS,
            cp_len: OTFS_CP_LEN,
            subcarrier_spacing_hz: 1.5 * max_symbol_rate_hz / OTFS_DELAY_BINS as f64,
        },
    ];
    candidates
        .iter()
        .map(|s| s.occupied_bandwidth_hz())
        .fold(0.0, f64::max)
}

/// Synthesizes the baseband waveform for `spec`.
///
/// Digital specs take [`Payload::Bits`] (zero-padded to a whole symbol);
/// analog specs take [`Payload::Message`] at the spec's sample rate. The
/// returned waveform has exactly unit average power.
pub fn modulate(spec: &ModulationSpec, payload: Payload<'_>) -> Result<BasebandWaveform> {
    let (mut samples, n_symbols) = match (spec, payload) {
        (ModulationSpec::Linear { family, order, sps, rolloff, span_symbols, .. }, Payload::Bits(bits)) => {
            let table = constellation_for(*family, *order);
            let labels = constellation::bits_to_labels(bits, table.bits_per_symbol);
            let symbols: Vec<Complex64> = labels.iter().map(|&l| table.points[l]).collect();
            let n = symbols.len();
            (linear::shape(&symbols, *sps, *rolloff, *span_symbols), n)
        }
        (ModulationSpec::Cpm { order, mod_index, bt, sps, .. }, Payload::Bits(bits)) => {
            let labels = constellation::bits_to_labels(bits, order.trailing_zeros());
            let n = labels.len();
            (cpm::modulate(*order, *mod_index, *bt, &labels, *sps)?, n)
        }
        (ModulationSpec::Analog { kind, message_bandwidth_hz, sample_rate_hz }, Payload::Message(msg)) => {
            if msg.is_empty() {
                return Err(Error::signal("analog modulation needs a non-empty message"));
            }
            let params = analog::Params {
                kind: *kind,
                sample_rate_hz: *sample_rate_hz,
                am_depth: AM_DEPTH,
                fm_deviation_hz: FM_DEVIATION_RATIO * message_bandwidth_hz,
                pm_peak_phase: PM_PEAK_PHASE,
                vsb_vestige_hz: VSB_VESTIGE_FRACTION * message_bandwidth_hz,
            };
            let n = msg.len();
            (analog::modulate(&params, msg), n)
        }
        (
            ModulationSpec::Multicarrier { kind, inner, fft_size, used_subcarriers, cp_len, .. },
            Payload::Bits(bits),
        ) => {
            let table = inner_constellation(*inner);
            let labels = constellation::bits_to_labels(bits, table.bits_per_symbol);
            let symbols: Vec<Complex64> = labels.iter().map(|&l| table.points[l]).collect();
            let n = symbols.len();
            (
                multicarrier::modulate(*kind, &symbols, *fft_size, *used_subcarriers, *cp_len),
                n,
            )
        }
        (ModulationSpec::Otfs { inner, delay_bins, doppler_bins, cp_len, .. }, Payload::Bits(bits)) => {
            let table = inner_constellation(*inner);
            let labels = constellation::bits_to_labels(bits, table.bits_per_symbol);
            let symbols: Vec<Complex64> = labels.iter().map(|&l| table.points[l]).collect();
            let n = symbols.len();
            (otfs::modulate(&symbols, *delay_bins, *doppler_bins, *cp_len), n)
        }
        (s, Payload::Bits(_)) => {
            return Err(Error::signal(format!("spec {s:?} needs an analog message, not bits")));
        }
        (s, Payload::Message(_)) => {
            return Err(Error::signal(format!("spec {s:?} needs bits, not an analog message")));
        }
    };
    let p = crate::math::mean_power(&samples);
    if p > 1e-30 {
        let scale = 1.0 / p.sqrt();
        for v in &mut samples {
            *v *= scale;
        }
    }
    Ok(BasebandWaveform {
        samples,
        sample_rate_hz: spec.sample_rate_hz(),
        band_edges_hz: spec.band_edges_hz(),
        n_symbols,
    })
}

/// Synthesizes per-antenna waveforms for a transmitter with `n_antennas`
/// elements, normalized to unit total power across antennas.
///
/// Linear classes with 2 to 4 antennas use the orthogonal space-time
/// block codes (Alamouti for two, the rate-3/4 designs above); the codes
/// expand time, so the per-antenna streams hold `encoded_len` symbol
/// slots. Constant-envelope, analog, and block waveforms replicate one
/// waveform at 1/sqrt(n) per element: splitting such signals across coded
/// streams would destroy the properties that define them.
pub fn modulate_antennas(
    spec: &ModulationSpec,
    payload: Payload<'_>,
    n_antennas: usize,
) -> Result<Vec<BasebandWaveform>> {
    if n_antennas == 0 {
        return Err(Error::signal("a transmitter needs at least one antenna"));
    }
    if n_antennas == 1 {
        return Ok(vec![modulate(spec, payload)?]);
    }
    if n_antennas > 4 {
        return Err(Error::signal(format!(
            "no orthogonal code is defined for {n_antennas} antennas"
        )));
    }
    if let (
        ModulationSpec::Linear { family, order, sps, rolloff, span_symbols, .. },
        Payload::Bits(bits),
    ) = (spec, &payload)
    {
        let table = constellation_for(*family, *order);
        let labels = constellation::bits_to_labels(bits, table.bits_per_symbol);
        let symbols: Vec<Complex64> = labels.iter().map(|&l| table.points[l]).collect();
        let streams = ostbc::encode(&symbols, n_antennas);
        let shaped: Vec<(Vec<Complex64>, usize)> = streams
            .into_iter()
            .map(|s| {
                let n = s.len();
                (linear::shape(&s, *sps, *rolloff, *span_symbols), n)
            })
            .collect();
        // One common gain across antennas: per-antenna normalization would
        // break the code matrix (rate-3/4 streams carry silent slots and
        // so have lower mean power than the others).
        let total: f64 = shaped.iter().map(|(s, _)| crate::math::mean_power(s)).sum();
        let g = if total > 1e-30 { 1.0 / total.sqrt() } else { 1.0 };
        return Ok(shaped
            .into_iter()
            .map(|(mut samples, n_slots)| {
                for v in &mut samples {
                    *v *= g;
                }
                BasebandWaveform {
                    samples,
                    sample_rate_hz: spec.sample_rate_hz(),
                    band_edges_hz: spec.band_edges_hz(),
                    n_symbols: n_slots,
                }
            })
            .collect());
    }
    let base = modulate(spec, payload)?;
    let scale = 1.0 / (n_antennas as f64).sqrt();
    let mut out = Vec::with_capacity(n_antennas);
    for _ in 0..n_antennas {
        let mut w = base.clone();
        for v in &mut w.samples {
            *v *= scale;
        }
        out.push(w);
    }
    Ok(out)
}

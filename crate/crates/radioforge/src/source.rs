//! Information sources: pseudo-random bits for digital classes and
//! real-valued messages (audio files or multitone stand-ins) for the
//! analog ones.
//!
//! Bit generation runs a maximal-length LFSR seeded from the caller's
//! stream (or draws bits directly from the stream when no register length
//! is configured). Analog messages always come back zero-mean with peak
//! magnitude at most one, resampled to the modulator's message rate.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard maximal-length feedback tap positions (1-indexed, the first
/// entry being the register length) for every supported register length.
/// `lfsr_taps` converts a length to its mask; the unit tests prove each
/// polynomial primitive by matrix exponentiation over GF(2).
const LFSR_TAPS: [&[u32]; 30] = [
    &[3, 2],
    &[4, 3],
    &[5, 3],
    &[6, 5],
    &[7, 6],
    &[8, 6, 5, 4],
    &[9, 5],
    &[10, 7],
    &[11, 9],
    &[12, 6, 4, 1],
    &[13, 4, 3, 1],
    &[14, 5, 3, 1],
    &[15, 14],
    &[16, 15, 13, 4],
    &[17, 14],
    &[18, 11],
    &[19, 6, 2, 1],
    &[20, 17],
    &[21, 19],
    &[22, 21],
    &[23, 18],
    &[24, 23, 22, 17],
    &[25, 22],
    &[26, 6, 2, 1],
    &[27, 5, 2, 1],
    &[28, 25],
    &[29, 27],
    &[30, 6, 4, 1],
    &[31, 28],
    &[32, 22, 2, 1],
];

/// Supported LFSR register lengths.
pub const LFSR_MIN_LEN: u32 = 3;
pub const LFSR_MAX_LEN: u32 = 32;

fn lfsr_tap_mask(register_length: u32) -> u32 {
    let taps = LFSR_TAPS[(register_length - LFSR_MIN_LEN) as usize];
    debug_assert_eq!(taps[0], register_length);
    // Entry [n, e1, e2, ...] names the polynomial x^n + x^e1 + ... + 1.
    // The new top bit is the parity of the state masked by the non-leading
    // coefficients, including the constant term at bit 0.
    taps[1..].iter().fold(1u32, |m, &p| m | 1 << p)
}

/// Fibonacci-style linear feedback shift register. Emits the low state
/// bit, then shifts right with the feedback parity entering at the top.
#[derive(Debug, Clone)]
pub struct Lfsr {
    state: u32,
    len: u32,
    mask: u32,
}

impl Lfsr {
    /// Builds the register from a nonzero initial state (only the low
    /// `register_length` bits are kept, and must not all be zero).
    pub fn new(register_length: u32, initial_state: u32) -> Result<Self> {
        if !(LFSR_MIN_LEN..=LFSR_MAX_LEN).contains(&register_length) {
            return Err(Error::config(format!(
                "LFSR register length {register_length} outside [{LFSR_MIN_LEN}, {LFSR_MAX_LEN}]"
            )));
        }
        let keep = if register_length == 32 { u32::MAX } else { (1u32 << register_length) - 1 };
        let state = initial_state & keep;
        if state == 0 {
            return Err(Error::signal("LFSR initial state must be nonzero"));
        }
        Ok(Lfsr { state, len: register_length, mask: lfsr_tap_mask(register_length) })
    }

    pub fn step(&mut self) -> u8 {
        let out = (self.state & 1) as u8;
        let feedback = (self.state & self.mask).count_ones() & 1;
        self.state = (self.state >> 1) | (feedback << (self.len - 1));
        out
    }
}

/// Generates `n` bits: the maximal-length LFSR output from a stream-drawn
/// nonzero initial state when a register length is set, or uniform stream
/// draws otherwise.
pub fn generate_bits<R: Rng>(register_length: Option<u32>, n: usize, rng: &mut R) -> Result<Vec<u8>> {
    match register_length {
        None => Ok((0..n).map(|_| rng.gen_range(0..2u8)).collect()),
        Some(len) => {
            if !(LFSR_MIN_LEN..=LFSR_MAX_LEN).contains(&len) {
                return Err(Error::config(format!(
                    "LFSR register length {len} outside [{LFSR_MIN_LEN}, {LFSR_MAX_LEN}]"
                )));
            }
            let top = if len == 32 { u64::from(u32::MAX) + 1 } else { 1u64 << len };
            let seed = rng.gen_range(1..top) as u32;
            let mut reg = Lfsr::new(len, seed)?;
            Ok((0..n).map(|_| reg.step()).collect())
        }
    }
}

/// Loads the first channel of a PCM WAV file (8/16/24-bit integer),
/// normalized to [-1, 1] by the full-scale value and DC-removed. Returns
/// the samples and the file's sample rate.
pub fn load_audio(path: &Path) -> Result<(Vec<f64>, f64)> {
    let mut reader = hound::WavReader::open(path)
        .map_err(|e| Error::Parse(format!("WAV {}: {e}", path.display())))?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int
        || !matches!(spec.bits_per_sample, 8 | 16 | 24)
    {
        return Err(Error::Parse(format!(
            "WAV {}: unsupported codec ({} {:?}); expected 8/16/24-bit integer PCM",
            path.display(),
            spec.bits_per_sample,
            spec.sample_format
        )));
    }
    let channels = spec.channels as usize;
    let full_scale = f64::from(1u32 << (spec.bits_per_sample - 1));
    let mut samples = Vec::new();
    for (i, s) in reader.samples::<i32>().enumerate() {
        let v = s.map_err(|e| Error::Parse(format!("WAV {}: {e}", path.display())))?;
        if i % channels == 0 {
            samples.push(f64::from(v) / full_scale);
        }
    }
    if samples.is_empty() {
        return Err(Error::Parse(format!("WAV {}: no samples", path.display())));
    }
    remove_dc(&mut samples);
    Ok((samples, f64::from(spec.sample_rate)))
}

/// One sinusoidal component of a multitone message.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    pub freq_hz: f64,
    pub amplitude: f64,
}

/// Sum of sinusoids at the configured frequencies/amplitudes, zero-mean
/// and peak-limited to at most 1 (scaled down only when it overshoots, so
/// a single unit-amplitude tone keeps its peak of exactly 1).
pub fn generate_multitone(tones: &[Tone], duration_s: f64, fs: f64) -> Result<Vec<f64>> {
    if tones.is_empty() {
        return Err(Error::signal("multitone source needs at least one tone"));
    }
    if duration_s <= 0.0 || fs <= 0.0 {
        return Err(Error::signal("multitone duration and sample rate must be positive"));
    }
    for t in tones {
        if t.freq_hz <= 0.0 || t.freq_hz >= fs / 2.0 {
            return Err(Error::signal(format!(
                "tone at {} Hz outside (0, {}) Hz",
                t.freq_hz,
                fs / 2.0
            )));
        }
    }
    let n = (duration_s * fs).round().max(1.0) as usize;
    let mut out: Vec<f64> = (0..n)
        .map(|i| {
            let time = i as f64 / fs;
            tones
                .iter()
                .map(|t| t.amplitude * (2.0 * std::f64::consts::PI * t.freq_hz * time).sin())
                .sum()
        })
        .collect();
    remove_dc(&mut out);
    limit_peak(&mut out);
    Ok(out)
}

fn remove_dc(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len().max(1) as f64;
    for v in x.iter_mut() {
        *v -= mean;
    }
}

fn limit_peak(x: &mut [f64]) {
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 1.0 {
        for v in x.iter_mut() {
            *v /= peak;
        }
    }
}

/// Where a transmitter's information content comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MessageSource {
    /// Pseudo-random bits; `register_length` picks a maximal-length LFSR,
    /// omitting it draws bits directly from the frame's stream.
    Prbs {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        register_length: Option<u32>,
    },
    /// PCM WAV file; the first channel is used.
    AudioFile { path: PathBuf },
    /// Synthetic stand-in when no audio corpus is available.
    Multitone { tones: Vec<Tone> },
}

impl MessageSource {
    pub fn validate(&self) -> Result<()> {
        match self {
            MessageSource::Prbs { register_length: Some(len) }
                if !(LFSR_MIN_LEN..=LFSR_MAX_LEN).contains(len) =>
            {
                Err(Error::config(format!(
                    "prbs register length {len} outside [{LFSR_MIN_LEN}, {LFSR_MAX_LEN}]"
                )))
            }
            MessageSource::Prbs { .. } => Ok(()),
            MessageSource::AudioFile { path } => {
                if path.is_file() {
                    Ok(())
                } else {
                    Err(Error::config(format!("audio file {} not readable", path.display())))
                }
            }
            MessageSource::Multitone { tones } => {
                if tones.is_empty() {
                    Err(Error::config("multitone source has an empty tone list"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Renders an analog message of exactly `n` samples at `fs`: audio is
    /// resampled to `fs` and tiled/cropped to length (crop offset drawn
    /// from the stream), multitone is synthesized directly. Always
    /// zero-mean with peak at most 1.
    pub fn message<R: Rng>(&self, n: usize, fs: f64, rng: &mut R) -> Result<Vec<f64>> {
        let mut out = match self {
            MessageSource::Prbs { .. } => {
                return Err(Error::signal("prbs source carries bits, not an analog message"));
            }
            MessageSource::AudioFile { path } => {
                let (audio, fs_in) = load_audio(path)?;
                let buf: Vec<Complex64> =
                    audio.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                let resampled = crate::math::resample_sinc(&buf, fs_in, fs, 32);
                let resampled: Vec<f64> = resampled.iter().map(|v| v.re).collect();
                if resampled.is_empty() {
                    return Err(Error::Parse(format!("audio {} resampled to nothing", path.display())));
                }
                let offset = if resampled.len() > n { rng.gen_range(0..=resampled.len() - n) } else { 0 };
                (0..n).map(|i| resampled[(offset + i) % resampled.len()]).collect()
            }
            MessageSource::Multitone { tones } => {
                let mut msg = generate_multitone(tones, n as f64 / fs, fs)?;
                msg.resize(n, 0.0);
                msg
            }
        };
        remove_dc(&mut out);
        limit_peak(&mut out);
        Ok(out)
    }
}

//! Propagation channels between transmitter and receiver antennas.
//!
//! The statistical path lives here: distance-based path loss, Rayleigh and
//! Rician multipath fading with Jakes Doppler time-variation, and MIMO
//! mixing with independent tap processes per antenna pair. Site-specific
//! ray-traced channels over building geometry live in [`raytrace`]; both
//! produce the same [`ChannelRealization`] so the application stage does
//! not care where a channel came from.
//!
//! Fading taps are synthesized as a sum of sinusoids spread over the
//! Doppler disc. Each oscillator carries an independent complex Gaussian
//! amplitude, which makes every time sample of the tap exactly complex
//! Gaussian (so Rayleigh envelopes are exact, not asymptotic) while the
//! uniformly spread oscillator frequencies give the Jakes autocorrelation
//! J0(2 pi f_d tau) to quadrature accuracy.

pub mod raytrace;

pub use raytrace::{parse_osm, rays_to_channel, trace_paths, OsmScene, TraceOptions};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::fractional_delay_kernel;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

/// Oscillators per sum-of-sinusoids tap process. 64 keeps the quadrature
/// error of the Jakes autocorrelation negligible out to several Doppler
/// periods.
pub const JAKES_OSCILLATORS: usize = 64;

/// Line-of-sight arrival angle for the Rician specular component; its
/// Doppler is f_d cos of this angle.
pub const RICIAN_LOS_ANGLE_RAD: f64 = std::f64::consts::FRAC_PI_4;

/// Tap processes are sampled at this multiple of the maximum Doppler shift
/// and linearly interpolated up to the waveform rate.
const TAP_RATE_OVERSAMPLE: f64 = 64.0;

/// Sinc kernel length for fractional path delays.
const DELAY_KERNEL_TAPS: usize = 63;

/// Distance-based large-scale loss model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PathLossSpec {
    /// Free-space (Friis) loss at the given link distance and carrier.
    FreeSpace { distance_m: f64, carrier_hz: f64 },
    /// Log-distance model anchored at free-space loss for `reference_m`:
    /// PL(d) = FSPL(d0) + 10 n log10(d / d0).
    LogDistance {
        distance_m: f64,
        carrier_hz: f64,
        exponent: f64,
        reference_m: f64,
    },
}

impl PathLossSpec {
    pub fn validate(&self) -> Result<()> {
        let (d, f) = match *self {
            PathLossSpec::FreeSpace {
                distance_m,
                carrier_hz,
            } => (distance_m, carrier_hz),
            PathLossSpec::LogDistance {
                distance_m,
                carrier_hz,
                exponent,
                reference_m,
            } => {
                if !(reference_m > 0.0) || !(exponent > 0.0) {
                    return Err(Error::config(
                        "log-distance path loss needs positive exponent and reference distance",
                    ));
                }
                (distance_m, carrier_hz)
            }
        };
        if !(d > 0.0) {
            return Err(Error::config(format!("path loss distance must be positive, got {d}")));
        }
        if !(f > 0.0) {
            return Err(Error::config("path loss carrier frequency must be positive"));
        }
        Ok(())
    }
}

/// Large-scale loss in dB for the spec's model.
pub fn path_loss_db(spec: &PathLossSpec) -> f64 {
    let fspl = |d: f64, f: f64| 4.0 * std::f64::consts::PI * d * f / SPEED_OF_LIGHT_M_S;
    match *spec {
        PathLossSpec::FreeSpace {
            distance_m,
            carrier_hz,
        } => 20.0 * fspl(distance_m, carrier_hz).log10(),
        PathLossSpec::LogDistance {
            distance_m,
            carrier_hz,
            exponent,
            reference_m,
        } => {
            20.0 * fspl(reference_m, carrier_hz).log10()
                + 10.0 * exponent * (distance_m / reference_m).log10()
        }
    }
}

/// Doppler shift of a scatterer moving at `speed_m_s` relative to a carrier.
pub fn doppler_from_speed(speed_m_s: f64, carrier_hz: f64) -> f64 {
    speed_m_s * carrier_hz / SPEED_OF_LIGHT_M_S
}

/// Small-scale fading distribution for the first (strongest) path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FadingDistribution {
    Rayleigh,
    Rician,
}

/// Small-scale multipath fading description for one Tx-Rx link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FadingSpec {
    pub distribution: FadingDistribution,
    /// Rician K-factor (linear power ratio of the specular component to the
    /// diffuse power on the first path). Ignored for Rayleigh.
    #[serde(default)]
    pub k_factor: f64,
    /// Path delays in seconds, ascending, first entry 0.
    pub path_delays_s: Vec<f64>,
    /// Average per-path powers in dB. Normalized internally so the powers
    /// sum to the configured path-loss budget.
    pub avg_path_gains_db: Vec<f64>,
    /// Maximum Doppler shift in Hz; 0 freezes the channel for the frame.
    pub max_doppler_hz: f64,
    pub n_tx: usize,
    pub n_rx: usize,
}

impl FadingSpec {
    pub fn validate(&self) -> Result<()> {
        if self.path_delays_s.is_empty() {
            return Err(Error::config("fading spec needs at least one path"));
        }
        if self.path_delays_s.len() != self.avg_path_gains_db.len() {
            return Err(Error::config(format!(
                "fading spec has {} delays but {} gains",
                self.path_delays_s.len(),
                self.avg_path_gains_db.len()
            )));
        }
        if self.path_delays_s[0] != 0.0 {
            return Err(Error::config("first path delay must be 0"));
        }
        if self.path_delays_s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("path delays must be strictly ascending"));
        }
        if self.path_delays_s.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::config("path delays must be finite and non-negative"));
        }
        if self.max_doppler_hz < 0.0 {
            return Err(Error::config("maximum Doppler must be non-negative"));
        }
        if matches!(self.distribution, FadingDistribution::Rician) && !(self.k_factor > 0.0) {
            return Err(Error::config("rician fading needs a positive K-factor"));
        }
        if self.n_tx == 0 || self.n_rx == 0 {
            return Err(Error::config("antenna counts must be at least 1"));
        }
        Ok(())
    }
}

/// Where a channel realization came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelProvenance {
    Statistical,
    RayTraced,
}

/// One tap's complex gain over time.
#[derive(Debug, Clone)]
pub enum TapProcess {
    /// Time-invariant gain (ray-traced taps, frozen channels).
    Static(Complex64),
    /// Diffuse sum-of-sinusoids process plus an optional specular line.
    SumOfSinusoids {
        /// Complex Gaussian oscillator amplitudes, one per Doppler angle.
        amplitudes: Vec<Complex64>,
        /// Oscillator Doppler frequencies in Hz.
        freqs_hz: Vec<f64>,
        /// Specular (line-of-sight) phasor; zero when purely diffuse.
        los: Complex64,
        /// Doppler of the specular component in Hz.
        los_freq_hz: f64,
    },
}

impl TapProcess {
    /// Gain series at `fs`, starting `t0_s` seconds into the realization.
    pub fn evaluate(&self, t0_s: f64, n: usize, fs: f64) -> Vec<Complex64> {
        match self {
            TapProcess::Static(g) => vec![*g; n],
            TapProcess::SumOfSinusoids {
                amplitudes,
                freqs_hz,
                los,
                los_freq_hz,
            } => {
                let mut out = vec![Complex64::default(); n];
                let mut accumulate = |amp: Complex64, f_hz: f64| {
                    if amp == Complex64::default() {
                        return;
                    }
                    let mut phasor = amp * Complex64::from_polar(1.0, std::f64::consts::TAU * f_hz * t0_s);
                    let step = Complex64::from_polar(1.0, std::f64::consts::TAU * f_hz / fs);
                    for v in out.iter_mut() {
                        *v += phasor;
                        phasor *= step;
                    }
                };
                for (&a, &f) in amplitudes.iter().zip(freqs_hz) {
                    accumulate(a, f);
                }
                accumulate(*los, *los_freq_hz);
                out
            }
        }
    }

    /// Time-averaged |gain|^2 of this realization.
    pub fn mean_power(&self) -> f64 {
        match self {
            TapProcess::Static(g) => g.norm_sqr(),
            TapProcess::SumOfSinusoids {
                amplitudes, los, ..
            } => amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() + los.norm_sqr(),
        }
    }

    /// Highest oscillator frequency present, Hz.
    pub fn max_freq_hz(&self) -> f64 {
        match self {
            TapProcess::Static(_) => 0.0,
            TapProcess::SumOfSinusoids {
                freqs_hz,
                los_freq_hz,
                ..
            } => freqs_hz
                .iter()
                .chain(std::iter::once(los_freq_hz))
                .fold(0.0, |m, f| m.max(f.abs())),
        }
    }
}

/// A concrete channel draw: per (rx, tx, path) tap processes plus the
/// bookkeeping needed to apply and describe them.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub n_tx: usize,
    pub n_rx: usize,
    pub path_delays_s: Vec<f64>,
    /// Scalar loss already folded into the tap gains, dB.
    pub applied_path_loss_db: f64,
    pub max_doppler_hz: f64,
    pub sample_rate_hz: f64,
    /// Number of waveform samples the realization is valid for.
    pub n_samples: usize,
    pub provenance: ChannelProvenance,
    /// True when ray tracing found no propagation path at all.
    pub outage: bool,
    /// Row-major [(rx * n_tx + tx) * n_paths + path].
    taps: Vec<TapProcess>,
}

impl ChannelRealization {
    /// Assemble a realization from explicit taps (row-major rx, tx, path).
    pub fn from_taps(
        taps: Vec<TapProcess>,
        path_delays_s: Vec<f64>,
        n_tx: usize,
        n_rx: usize,
        path_loss_db: f64,
        sample_rate_hz: f64,
        n_samples: usize,
        provenance: ChannelProvenance,
    ) -> Result<Self> {
        if taps.len() != n_tx * n_rx * path_delays_s.len() {
            return Err(Error::config(format!(
                "expected {} taps for {n_rx}x{n_tx} antennas and {} paths, got {}",
                n_tx * n_rx * path_delays_s.len(),
                path_delays_s.len(),
                taps.len()
            )));
        }
        let max_doppler_hz = taps.iter().map(|t| t.max_freq_hz()).fold(0.0, f64::max);
        Ok(ChannelRealization {
            n_tx,
            n_rx,
            path_delays_s,
            applied_path_loss_db: path_loss_db,
            max_doppler_hz,
            sample_rate_hz,
            n_samples,
            provenance,
            outage: false,
            taps,
        })
    }

    /// SISO channel with a single static tap at zero delay. Valid for any
    /// waveform length or rate.
    pub fn static_single_tap(gain: Complex64) -> Self {
        ChannelRealization {
            n_tx: 1,
            n_rx: 1,
            path_delays_s: vec![0.0],
            applied_path_loss_db: 0.0,
            max_doppler_hz: 0.0,
            sample_rate_hz: 0.0,
            n_samples: usize::MAX,
            provenance: ChannelProvenance::Statistical,
            outage: false,
            taps: vec![TapProcess::Static(gain)],
        }
    }

    pub fn n_paths(&self) -> usize {
        self.path_delays_s.len()
    }

    pub fn tap(&self, rx: usize, tx: usize, path: usize) -> &TapProcess {
        &self.taps[(rx * self.n_tx + tx) * self.n_paths() + path]
    }

    /// Mean received power gain per rx antenna for a unit-power input on
    /// each tx antenna, averaged over the realization.
    pub fn mean_power_gain(&self) -> f64 {
        if self.n_rx == 0 || self.taps.is_empty() {
            return 0.0;
        }
        self.taps.iter().map(|t| t.mean_power()).sum::<f64>() / self.n_rx as f64
    }
}

/// Draw one fading realization for a link.
///
/// Tap processes are independent across antenna pairs and paths. Average
/// path powers are normalized to sum to 10^(-path_loss_db / 10) for each
/// antenna pair, so the path-loss budget is carried by the taps themselves.
/// Rician links put their specular component on the first path with power
/// ratio K against that path's diffuse power.
pub fn generate_tap_process<R: Rng>(
    spec: &FadingSpec,
    path_loss_db: f64,
    n_samples: usize,
    sample_rate_hz: f64,
    rng: &mut R,
) -> Result<ChannelRealization> {
    spec.validate()?;
    if !(sample_rate_hz > 0.0) {
        return Err(Error::config("sample rate must be positive"));
    }
    if spec.max_doppler_hz >= sample_rate_hz / 2.0 {
        return Err(Error::config(format!(
            "maximum Doppler {} Hz must stay below half the sample rate {}",
            spec.max_doppler_hz, sample_rate_hz
        )));
    }

    let n_paths = spec.path_delays_s.len();
    let raw: Vec<f64> = spec
        .avg_path_gains_db
        .iter()
        .map(|g| crate::math::db_to_power(*g))
        .collect();
    let total: f64 = raw.iter().sum();
    let budget = crate::math::db_to_power(-path_loss_db);
    let path_powers: Vec<f64> = raw.iter().map(|p| p / total * budget).collect();

    let mut taps = Vec::with_capacity(spec.n_rx * spec.n_tx * n_paths);
    for _rx in 0..spec.n_rx {
        for _tx in 0..spec.n_tx {
            for (path, &power) in path_powers.iter().enumerate() {
                let rician_first =
                    path == 0 && matches!(spec.distribution, FadingDistribution::Rician);
                let (los_power, diffuse_power) = if rician_first {
                    let k = spec.k_factor;
                    (power * k / (k + 1.0), power / (k + 1.0))
                } else {
                    (0.0, power)
                };

                // Rotate the uniform Doppler-angle grid by a random offset
                // per tap so distinct taps never share oscillator
                // frequencies; shared lines would leave a time-invariant
                // cross-correlation between antenna pairs.
                let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let n_osc = JAKES_OSCILLATORS;
                let per_osc = (diffuse_power / n_osc as f64 / 2.0).sqrt();
                let mut amplitudes = Vec::with_capacity(n_osc);
                let mut freqs_hz = Vec::with_capacity(n_osc);
                for k in 0..n_osc {
                    let angle = (std::f64::consts::TAU * k as f64 + theta) / n_osc as f64;
                    freqs_hz.push(spec.max_doppler_hz * angle.cos());
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    amplitudes.push(Complex64::new(per_osc * re, per_osc * im));
                }
                let los = if los_power > 0.0 {
                    Complex64::from_polar(
                        los_power.sqrt(),
                        rng.gen_range(0.0..std::f64::consts::TAU),
                    )
                } else {
                    Complex64::default()
                };
                taps.push(TapProcess::SumOfSinusoids {
                    amplitudes,
                    freqs_hz,
                    los,
                    los_freq_hz: spec.max_doppler_hz * RICIAN_LOS_ANGLE_RAD.cos(),
                });
            }
        }
    }

    let mut h = ChannelRealization::from_taps(
        taps,
        spec.path_delays_s.clone(),
        spec.n_tx,
        spec.n_rx,
        path_loss_db,
        sample_rate_hz,
        n_samples,
        ChannelProvenance::Statistical,
    )?;
    h.max_doppler_hz = spec.max_doppler_hz;
    Ok(h)
}

/// Delay a waveform by a (possibly fractional) number of samples, zero
/// padding at the head. Integer delays shift exactly; fractional parts use
/// a windowed-sinc interpolator.
fn delay_waveform(x: &[Complex64], delay_samples: f64, out_len: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); out_len];
    let d_int = delay_samples.floor() as i64;
    let frac = delay_samples - d_int as f64;
    if frac.abs() < 1e-9 {
        for (n, v) in out.iter_mut().enumerate() {
            let src = n as i64 - d_int;
            if src >= 0 && (src as usize) < x.len() {
                *v = x[src as usize];
            }
        }
        return out;
    }
    let kernel = fractional_delay_kernel(frac, DELAY_KERNEL_TAPS);
    let center = (DELAY_KERNEL_TAPS / 2) as i64;
    for (n, v) in out.iter_mut().enumerate() {
        let mut acc = Complex64::default();
        for (i, &w) in kernel.iter().enumerate() {
            let src = n as i64 - d_int + center - i as i64;
            if src >= 0 && (src as usize) < x.len() {
                acc += x[src as usize] * w;
            }
        }
        *v = acc;
    }
    out
}

/// Evaluate a tap's gain series at the waveform rate, sampling the process
/// at a reduced rate (64 x Doppler) and linearly interpolating.
fn tap_gain_series(tap: &TapProcess, n: usize, fs: f64) -> TapSeries {
    match tap {
        TapProcess::Static(g) => TapSeries::Constant(*g),
        TapProcess::SumOfSinusoids { .. } => {
            let f_max = tap.max_freq_hz();
            if f_max <= 0.0 {
                return TapSeries::Constant(tap.evaluate(0.0, 1, fs)[0]);
            }
            let fs_tap = (TAP_RATE_OVERSAMPLE * f_max).min(fs);
            if fs_tap >= fs {
                return TapSeries::Dense(tap.evaluate(0.0, n, fs));
            }
            let n_tap = ((n as f64 / fs) * fs_tap).ceil() as usize + 2;
            TapSeries::Interpolated {
                coarse: tap.evaluate(0.0, n_tap, fs_tap),
                step: fs_tap / fs,
            }
        }
    }
}

enum TapSeries {
    Constant(Complex64),
    Dense(Vec<Complex64>),
    Interpolated { coarse: Vec<Complex64>, step: f64 },
}

impl TapSeries {
    #[inline]
    fn at(&self, n: usize) -> Complex64 {
        match self {
            TapSeries::Constant(g) => *g,
            TapSeries::Dense(v) => v[n],
            TapSeries::Interpolated { coarse, step } => {
                let u = n as f64 * step;
                let i = (u as usize).min(coarse.len() - 2);
                let frac = u - i as f64;
                coarse[i] * (1.0 - frac) + coarse[i + 1] * frac
            }
        }
    }
}

/// Push per-tx-antenna waveforms through a channel realization, producing
/// one waveform per rx antenna: the sum over tx antennas and paths of the
/// fractionally delayed input weighted by the time-varying tap gain.
pub fn apply_channel(
    x: &[Vec<Complex64>],
    h: &ChannelRealization,
) -> Result<Vec<Vec<Complex64>>> {
    if x.len() != h.n_tx {
        return Err(Error::signal(format!(
            "channel expects {} tx waveforms, got {}",
            h.n_tx,
            x.len()
        )));
    }
    let len = x.first().map_or(0, |v| v.len());
    if x.iter().any(|v| v.len() != len) {
        return Err(Error::signal("tx waveforms must share one length"));
    }
    if len > h.n_samples {
        return Err(Error::signal(format!(
            "channel realization covers {} samples, waveform has {len}",
            h.n_samples
        )));
    }
    let fs = h.sample_rate_hz;

    let mut out = vec![vec![Complex64::default(); len]; h.n_rx];
    for (tx, x_tx) in x.iter().enumerate() {
        for (path, &delay_s) in h.path_delays_s.iter().enumerate() {
            let delay_samples = if fs > 0.0 { delay_s * fs } else { 0.0 };
            // The delayed waveform is shared by every rx antenna.
            let delayed = if delay_samples == 0.0 {
                None
            } else {
                Some(delay_waveform(x_tx, delay_samples, len))
            };
            let src = delayed.as_deref().unwrap_or(x_tx);
            for (rx, acc) in out.iter_mut().enumerate() {
                let series = tap_gain_series(h.tap(rx, tx, path), len, fs);
                match &series {
                    TapSeries::Constant(g) => {
                        for (a, &s) in acc.iter_mut().zip(src) {
                            *a += s * *g;
                        }
                    }
                    _ => {
                        for (n, (a, &s)) in acc.iter_mut().zip(src).enumerate() {
                            *a += s * series.at(n);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Moment-based Rician K estimator from envelope samples:
/// K = A^2 / (2 sigma^2) with A^2 = sqrt(2 m2^2 - m4).
pub fn estimate_rician_k(envelope: &[f64]) -> f64 {
    let n = envelope.len() as f64;
    let m2 = envelope.iter().map(|r| r * r).sum::<f64>() / n;
    let m4 = envelope.iter().map(|r| r.powi(4)).sum::<f64>() / n;
    let los_sq = (2.0 * m2 * m2 - m4).max(0.0).sqrt();
    let diffuse = m2 - los_sq;
    if diffuse <= 0.0 {
        return f64::INFINITY;
    }
    los_sq / diffuse
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    fn single_path_spec(distribution: FadingDistribution, k: f64, doppler: f64) -> FadingSpec {
        FadingSpec {
            distribution,
            k_factor: k,
            path_delays_s: vec![0.0],
            avg_path_gains_db: vec![0.0],
            max_doppler_hz: doppler,
            n_tx: 1,
            n_rx: 1,
        }
    }

    #[test]
    fn free_space_loss_matches_friis_values() {
        let spec = PathLossSpec::FreeSpace {
            distance_m: 1000.0,
            carrier_hz: 1.0e9,
        };
        let pl = path_loss_db(&spec);
        assert!((pl - 92.45).abs() < 0.005, "1 km at 1 GHz: {pl} dB");

        let double = PathLossSpec::FreeSpace {
            distance_m: 2000.0,
            carrier_hz: 1.0e9,
        };
        let delta = path_loss_db(&double) - pl;
        assert!((delta - 20.0 * 2f64.log10()).abs() < 1e-9, "doubling adds {delta} dB");
    }

    #[test]
    fn log_distance_anchors_at_reference() {
        let fs = PathLossSpec::FreeSpace {
            distance_m: 10.0,
            carrier_hz: 2.4e9,
        };
        let ld = PathLossSpec::LogDistance {
            distance_m: 10.0,
            carrier_hz: 2.4e9,
            exponent: 3.2,
            reference_m: 10.0,
        };
        assert!((path_loss_db(&ld) - path_loss_db(&fs)).abs() < 1e-12);

        // Beyond the anchor the slope is 10 n per decade.
        let far = PathLossSpec::LogDistance {
            distance_m: 100.0,
            carrier_hz: 2.4e9,
            exponent: 3.2,
            reference_m: 10.0,
        };
        assert!((path_loss_db(&far) - path_loss_db(&ld) - 32.0).abs() < 1e-9);
    }

    #[test]
    fn doppler_scales_with_speed_and_carrier() {
        let f = doppler_from_speed(28.0, 1.0e9);
        assert!((f - 93.4).abs() < 0.05, "28 m/s at 1 GHz: {f} Hz");
        assert_eq!(doppler_from_speed(0.0, 1.0e9), 0.0);
        assert!(
            (doppler_from_speed(10.0, 2.0e9) - 2.0 * doppler_from_speed(10.0, 1.0e9)).abs()
                < 1e-12
        );
    }

    #[test]
    fn fading_spec_validation_rejects_bad_shapes() {
        let mut spec = single_path_spec(FadingDistribution::Rayleigh, 0.0, 50.0);
        spec.path_delays_s = vec![0.0, 2.0e-6, 1.0e-6];
        spec.avg_path_gains_db = vec![0.0, -3.0, -6.0];
        assert!(spec.validate().is_err(), "unsorted delays");

        let mut spec = single_path_spec(FadingDistribution::Rayleigh, 0.0, 50.0);
        spec.path_delays_s = vec![1.0e-6];
        assert!(spec.validate().is_err(), "first delay nonzero");

        let spec = single_path_spec(FadingDistribution::Rician, 0.0, 50.0);
        assert!(spec.validate().is_err(), "rician needs K");

        let spec = single_path_spec(FadingDistribution::Rayleigh, 0.0, 6.0e5);
        let mut rng = derive_stream(1, "doppler");
        assert!(
            generate_tap_process(&spec, 0.0, 16, 1.0e6, &mut rng).is_err(),
            "doppler beyond nyquist"
        );
    }

    /// Kolmogorov-Smirnov distance against the Rayleigh CDF with mean
    /// square `p`.
    fn ks_distance_rayleigh(envelope: &mut [f64], p: f64) -> f64 {
        envelope.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = envelope.len() as f64;
        let mut d: f64 = 0.0;
        for (i, r) in envelope.iter().enumerate() {
            let cdf = 1.0 - (-r * r / p).exp();
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            d = d.max((cdf - lo).abs()).max((hi - cdf).abs());
        }
        d
    }

    #[test]
    fn rayleigh_envelope_passes_kolmogorov_smirnov() {
        // One envelope draw per independent realization, each at a random
        // time, so the 10^6 samples are independent and the iid KS
        // threshold applies. Every time sample of a tap is exactly complex
        // Gaussian by construction.
        let spec = single_path_spec(FadingDistribution::Rayleigh, 0.0, 100.0);
        let mut rng = derive_stream(2, "rayleigh-ks");
        let n = 1_000_000;
        let mut env: Vec<f64> = (0..n)
            .map(|_| {
                let h = generate_tap_process(&spec, 0.0, 1, 1.0e6, &mut rng).unwrap();
                let t0 = rng.gen_range(0.0..0.1);
                h.tap(0, 0, 0).evaluate(t0, 1, 1.0e6)[0].norm()
            })
            .collect();
        let d = ks_distance_rayleigh(&mut env, 1.0);
        let critical = 1.628 / (n as f64).sqrt();
        assert!(
            d < critical,
            "KS distance {d:.2e} exceeds alpha=0.01 critical value {critical:.2e}"
        );
    }

    #[test]
    fn tap_autocorrelation_tracks_bessel_j0() {
        let f_d = 100.0;
        let fs = 6400.0;
        let spec = single_path_spec(FadingDistribution::Rayleigh, 0.0, f_d);
        let mut rng = derive_stream(3, "autocorr");

        let n = 4096;
        let max_lag = 128; // f_d * tau = 2 at lag 128
        let realizations = 256;
        let mut acc = vec![Complex64::default(); max_lag + 1];
        let mut norm = 0.0;
        for _ in 0..realizations {
            let h = generate_tap_process(&spec, 0.0, n, fs, &mut rng).unwrap();
            let g = h.tap(0, 0, 0).evaluate(0.0, n, fs);
            for (lag, slot) in acc.iter_mut().enumerate() {
                let mut sum = Complex64::default();
                for t in 0..n - lag {
                    sum += g[t + lag] * g[t].conj();
                }
                *slot += sum / (n - lag) as f64;
            }
            norm += g.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
        }
        norm /= realizations as f64;

        for (lag, slot) in acc.iter().enumerate() {
            let measured = *slot / realizations as f64 / norm;
            let expected = bessel_j0(std::f64::consts::TAU * f_d * lag as f64 / fs);
            assert!(
                (measured.re - expected).abs() < 0.05 && measured.im.abs() < 0.05,
                "lag {lag}: autocorr {measured} vs J0 {expected}"
            );
        }
    }

    /// Bessel J0 via its defining integral (33-point periodic trapezoid is
    /// plenty for |z| < 15).
    fn bessel_j0(z: f64) -> f64 {
        let n = 256;
        (0..n)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / n as f64;
                (z * a.cos()).cos()
            })
            .sum::<f64>()
            / n as f64
    }

    #[test]
    fn huge_k_factor_degenerates_to_constant_line_of_sight() {
        let spec = single_path_spec(FadingDistribution::Rician, 1.0e6, 50.0);
        let mut rng = derive_stream(4, "rician-limit");
        let h = generate_tap_process(&spec, 0.0, 4096, 1.0e4, &mut rng).unwrap();
        let g = h.tap(0, 0, 0).evaluate(0.0, 4096, 1.0e4);
        let env: Vec<f64> = g.iter().map(|v| v.norm()).collect();
        let mean = env.iter().sum::<f64>() / env.len() as f64;
        let var = env.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / env.len() as f64;
        assert!(
            var.sqrt() / mean < 2.0e-3,
            "envelope cv {} should collapse for K=1e6",
            var.sqrt() / mean
        );
    }

    #[test]
    fn rician_k_recoverable_by_moment_estimator() {
        for &k in &[1.0, 4.0, 9.0] {
            let spec = single_path_spec(FadingDistribution::Rician, k, 100.0);
            let mut rng = derive_stream(5, "rician-k");
            let n = 200_000;
            let env: Vec<f64> = (0..n)
                .map(|_| {
                    let h = generate_tap_process(&spec, 0.0, 1, 1.0e6, &mut rng).unwrap();
                    let t0 = rng.gen_range(0.0..0.1);
                    h.tap(0, 0, 0).evaluate(t0, 1, 1.0e6)[0].norm()
                })
                .collect();
            let k_hat = estimate_rician_k(&env);
            assert!(
                (k_hat - k).abs() / k < 0.1,
                "K estimate {k_hat} vs configured {k}"
            );
        }
    }

    #[test]
    fn identity_channel_returns_input_exactly() {
        let x: Vec<Complex64> = (0..500)
            .map(|i| Complex64::new((i as f64 * 0.1).sin(), (i as f64 * 0.2).cos()))
            .collect();
        let h = ChannelRealization::static_single_tap(Complex64::new(1.0, 0.0));
        let y = apply_channel(std::slice::from_ref(&x), &h).unwrap();
        assert_eq!(y.len(), 1);
        assert_eq!(y[0], x);
    }

    #[test]
    fn two_static_taps_interfere_per_phasor_sum() {
        let fs = 1.0e6;
        let f_tone = 0.03125 * fs;
        let n = 4096;
        let x: Vec<Complex64> = (0..n)
            .map(|i| Complex64::from_polar(1.0, std::f64::consts::TAU * f_tone * i as f64 / fs))
            .collect();

        for delay_samples in [8.0, 3.5] {
            let h = ChannelRealization::from_taps(
                vec![
                    TapProcess::Static(Complex64::new(1.0, 0.0)),
                    TapProcess::Static(Complex64::new(1.0, 0.0)),
                ],
                vec![0.0, delay_samples / fs],
                1,
                1,
                0.0,
                fs,
                usize::MAX,
                ChannelProvenance::Statistical,
            )
            .unwrap();
            let y = apply_channel(std::slice::from_ref(&x), &h).unwrap();
            // Steady-state region away from the delay transient.
            let body = &y[0][64..n - 64];
            let power = body.iter().map(|v| v.norm_sqr()).sum::<f64>() / body.len() as f64;
            let predicted = (Complex64::new(1.0, 0.0)
                + Complex64::from_polar(1.0, -std::f64::consts::TAU * f_tone * delay_samples / fs))
            .norm_sqr();
            assert!(
                (power - predicted).abs() / predicted < 0.01,
                "delay {delay_samples}: power {power} vs two-ray prediction {predicted}"
            );
        }
    }

    #[test]
    fn path_loss_budget_is_carried_by_the_taps() {
        let mut spec = single_path_spec(FadingDistribution::Rayleigh, 0.0, 50.0);
        spec.path_delays_s = vec![0.0, 1.0e-6, 3.0e-6];
        spec.avg_path_gains_db = vec![0.0, -3.0, -6.0];
        let mut rng = derive_stream(6, "budget");
        let pl_db = 20.0;
        let trials = 400;
        let mut total = 0.0;
        for _ in 0..trials {
            let h = generate_tap_process(&spec, pl_db, 64, 1.0e6, &mut rng).unwrap();
            total += h.mean_power_gain();
        }
        let mean = total / trials as f64;
        let expected = crate::math::db_to_power(-pl_db);
        assert!(
            (mean - expected).abs() / expected < 0.05,
            "mean tap power {mean:.3e} vs path loss budget {expected:.3e}"
        );

        // A static 20 dB channel attenuates power by exactly 100x.
        let x: Vec<Complex64> = (0..256).map(|i| Complex64::new((i as f64).cos(), 0.3)).collect();
        let h = ChannelRealization::static_single_tap(Complex64::new(0.1, 0.0));
        let y = apply_channel(std::slice::from_ref(&x), &h).unwrap();
        let ratio = crate::math::mean_power(&y[0]) / crate::math::mean_power(&x);
        assert!((ratio - 0.01).abs() < 1e-12);
    }

    #[test]
    fn antenna_pairs_fade_independently() {
        let mut spec = single_path_spec(FadingDistribution::Rayleigh, 0.0, 100.0);
        spec.n_tx = 2;
        spec.n_rx = 2;
        let mut rng = derive_stream(7, "mimo");
        let fs = 6400.0;
        // Cross-correlation estimates on Doppler-limited processes need a
        // long horizon: 1e6 samples at 64x oversampling spans 1.5e4 Doppler
        // periods, putting the estimator noise floor near 0.015.
        let n = 1_000_000;
        let h = generate_tap_process(&spec, 0.0, n, fs, &mut rng).unwrap();
        let series: Vec<Vec<Complex64>> = (0..2)
            .flat_map(|rx| (0..2).map(move |tx| (rx, tx)))
            .map(|(rx, tx)| h.tap(rx, tx, 0).evaluate(0.0, n, fs))
            .collect();
        for a in 0..4 {
            for b in a + 1..4 {
                let cross = series[a]
                    .iter()
                    .zip(&series[b])
                    .map(|(x, y)| x * y.conj())
                    .sum::<Complex64>()
                    / n as f64;
                let pa = series[a].iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
                let pb = series[b].iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
                let rho = cross.norm() / (pa * pb).sqrt();
                assert!(rho < 0.05, "pairs {a},{b}: cross-correlation {rho}");
            }
        }
    }

    #[test]
    fn mismatched_waveform_counts_are_rejected() {
        let x = vec![vec![Complex64::default(); 16]];
        let mut spec = single_path_spec(FadingDistribution::Rayleigh, 0.0, 10.0);
        spec.n_tx = 2;
        let mut rng = derive_stream(8, "mismatch");
        let h = generate_tap_process(&spec, 0.0, 16, 1.0e6, &mut rng).unwrap();
        assert!(apply_channel(&x, &h).is_err());

        let h1 = generate_tap_process(&single_path_spec(FadingDistribution::Rayleigh, 0.0, 10.0), 0.0, 8, 1.0e6, &mut rng)
            .unwrap();
        assert!(apply_channel(&x, &h1).is_err(), "waveform longer than realization");
    }
}

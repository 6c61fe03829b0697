//! Analog front-end impairments applied to baseband waveforms.
//!
//! Five impairment families model the hardware between the ideal modulator
//! and the receiver's ADC: IQ gain/phase imbalance, additive DC offset,
//! oscillator phase noise, memoryless power-amplifier nonlinearity, and
//! receiver thermal noise. Each `apply_*` operation mutates the waveform in
//! place and is deterministic given its spec (and RNG stream, where one is
//! used). Every spec's documented "disabled" value is an exact identity:
//! 0 dB / 0 deg imbalance, minus-infinity DC offset or phase-noise level,
//! and zero noise temperature all leave the samples bit-identical.
//!
//! Power conventions: waveforms are complex baseband with power measured as
//! mean |x|^2 in watts into 1 ohm. Noise levels follow the physical model
//! sigma^2 = k_B * T * fs for a complex sample stream at rate fs, so the
//! density k_B * T spread over the full sampled bandwidth gives the total
//! noise power added per receive antenna.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::mean_power;

/// Boltzmann constant in joules per kelvin (exact SI value).
pub const BOLTZMANN_J_PER_K: f64 = 1.380649e-23;

/// Reference temperature for noise-figure conversions, kelvin.
pub const REFERENCE_TEMPERATURE_K: f64 = 290.0;

/// Offset frequency at which phase-noise levels are specified, hertz.
pub const PHASE_NOISE_REF_OFFSET_HZ: f64 = 1.0e4;

/// IQ modulator gain/phase mismatch between the I and Q branches.
///
/// The imbalance acts as y = alpha * x + beta * conj(x) where
/// alpha = (g e^{j phi} + 1) / 2 and beta = (g e^{j phi} - 1) / 2 with
/// g = 10^{amplitude_db / 20} and phi = phase_deg in radians. A perfect
/// modulator (0 dB, 0 deg) gives alpha = 1, beta = 0 exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IqImbalanceSpec {
    /// Gain mismatch between branches in dB.
    pub amplitude_db: f64,
    /// Phase skew between branches in degrees.
    pub phase_deg: f64,
}

impl IqImbalanceSpec {
    /// Direct and image branch gains (alpha, beta).
    pub fn branch_gains(&self) -> (Complex64, Complex64) {
        let g = 10f64.powf(self.amplitude_db / 20.0);
        let phi = self.phase_deg.to_radians();
        let e = Complex64::from_polar(g, phi);
        let one = Complex64::new(1.0, 0.0);
        ((e + one) / 2.0, (e - one) / 2.0)
    }

    /// Image rejection ratio 10 log10(|alpha|^2 / |beta|^2) in dB.
    ///
    /// Infinite for a perfectly balanced modulator.
    pub fn image_rejection_db(&self) -> f64 {
        let (alpha, beta) = self.branch_gains();
        10.0 * (alpha.norm_sqr() / beta.norm_sqr()).log10()
    }
}

/// Mix a conjugate image into the waveform per the imbalance spec.
pub fn apply_iq_imbalance(x: &mut [Complex64], spec: &IqImbalanceSpec) {
    let (alpha, beta) = spec.branch_gains();
    for v in x.iter_mut() {
        *v = alpha * *v + beta * v.conj();
    }
}

/// Constant complex offset added to the waveform.
///
/// The offset power is `offset_db` relative to the waveform's mean power,
/// with a phase drawn uniformly in [0, 2 pi). A level of minus infinity
/// disables the impairment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcOffsetSpec {
    /// Offset power relative to mean waveform power, dB.
    pub offset_db: f64,
}

/// Add a constant complex offset with the spec's relative power.
pub fn apply_dc_offset<R: Rng>(x: &mut [Complex64], spec: &DcOffsetSpec, rng: &mut R) {
    if x.is_empty() {
        return;
    }
    let magnitude_sq = 10f64.powf(spec.offset_db / 10.0) * mean_power(x);
    if magnitude_sq <= 0.0 {
        return;
    }
    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
    let c = Complex64::from_polar(magnitude_sq.sqrt(), theta);
    for v in x.iter_mut() {
        *v += c;
    }
}

/// Free-running oscillator phase noise.
///
/// The phase follows a random walk, giving a single-sideband spectrum that
/// falls 20 dB per decade. `level_dbc_hz` anchors that spectrum at the
/// 10 kHz offset: the per-sample increment variance is
/// sigma_w^2 = 10^{level/10} * 4 pi^2 * (10^4)^2 / fs, which makes the
/// two-sided PSD of e^{j phi} equal the anchor level at 10 kHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseNoiseSpec {
    /// Single-sideband level at the 10 kHz offset, dBc/Hz.
    pub level_dbc_hz: f64,
}

/// Rotate each sample by an accumulating random-walk phase.
///
/// Magnitudes are preserved exactly. Errors if the sample rate cannot
/// observe the 10 kHz anchor offset (fs / 2 must exceed it).
pub fn apply_phase_noise<R: Rng>(
    x: &mut [Complex64],
    spec: &PhaseNoiseSpec,
    sample_rate_hz: f64,
    rng: &mut R,
) -> Result<()> {
    if PHASE_NOISE_REF_OFFSET_HZ >= sample_rate_hz / 2.0 {
        return Err(Error::signal(format!(
            "phase noise anchor at {PHASE_NOISE_REF_OFFSET_HZ} Hz needs sample rate above \
             {} Hz, got {sample_rate_hz}",
            2.0 * PHASE_NOISE_REF_OFFSET_HZ
        )));
    }
    let level_lin = 10f64.powf(spec.level_dbc_hz / 10.0);
    let increment_var = level_lin
        * 4.0
        * std::f64::consts::PI.powi(2)
        * PHASE_NOISE_REF_OFFSET_HZ.powi(2)
        / sample_rate_hz;
    if increment_var <= 0.0 {
        return Ok(());
    }
    let sigma = increment_var.sqrt();
    let mut phase = 0.0;
    for v in x.iter_mut() {
        let w: f64 = rng.sample(StandardNormal);
        phase += sigma * w;
        *v *= Complex64::from_polar(1.0, phase);
    }
    Ok(())
}

/// Memoryless power-amplifier model.
///
/// All models act on the envelope only: the output is
/// x * f(r)/r * e^{j Phi(r)} with r = |x|, so every model commutes with a
/// constant phase rotation of its input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase", deny_unknown_fields)]
pub enum NonlinearitySpec {
    /// Saleh TWT model: AM/AM a_a r / (1 + b_a r^2), AM/PM a_p r^2 / (1 + b_p r^2).
    Saleh {
        alpha_am: f64,
        beta_am: f64,
        alpha_pm: f64,
        beta_pm: f64,
    },
    /// Ghorbani solid-state model: x1 r^{x2} / (1 + x3 r^{x2}) + x4 r for
    /// AM/AM, the same shape with the y coefficients (in radians) for AM/PM.
    Ghorbani { x: [f64; 4], y: [f64; 4] },
    /// Rapp model: smooth limiter g r / (1 + (g r / a_sat)^{2p})^{1/(2p)},
    /// no phase distortion. Larger smoothness approaches a hard clipper.
    Rapp {
        gain_db: f64,
        smoothness: f64,
        saturation_v: f64,
    },
    /// Odd-order polynomial g x - (4/3)(g^3 / iip3^2) x |x|^2, hard-limited
    /// beyond the envelope where its slope reaches zero so the AM/AM curve
    /// stays monotone. The intercept is set from the input-referred third
    /// order intercept point in dBm (1 ohm, so iip3^2 = (4/3) g^2 P_ip3).
    Cubic { gain_db: f64, iip3_dbm: f64 },
    /// Hyperbolic-tangent limiter a_sat tanh(g r / a_sat), no phase distortion.
    Tanh { gain_db: f64, saturation_v: f64 },
}

impl NonlinearitySpec {
    /// AM/AM output envelope and AM/PM phase shift (radians) at envelope r.
    pub fn envelope_response(&self, r: f64) -> (f64, f64) {
        match *self {
            NonlinearitySpec::Saleh {
                alpha_am,
                beta_am,
                alpha_pm,
                beta_pm,
            } => {
                let amp = alpha_am * r / (1.0 + beta_am * r * r);
                let phase = alpha_pm * r * r / (1.0 + beta_pm * r * r);
                (amp, phase)
            }
            NonlinearitySpec::Ghorbani { x, y } => {
                let shape = |c: [f64; 4]| {
                    let rp = r.powf(c[1]);
                    c[0] * rp / (1.0 + c[2] * rp) + c[3] * r
                };
                (shape(x), shape(y))
            }
            NonlinearitySpec::Rapp {
                gain_db,
                smoothness,
                saturation_v,
            } => {
                let g = 10f64.powf(gain_db / 20.0);
                let driven = g * r;
                let amp = driven / (1.0 + (driven / saturation_v).powf(2.0 * smoothness)).powf(1.0 / (2.0 * smoothness));
                (amp, 0.0)
            }
            NonlinearitySpec::Cubic { gain_db, iip3_dbm } => {
                let g = 10f64.powf(gain_db / 20.0);
                let ip3_watts = 10f64.powf((iip3_dbm - 30.0) / 10.0);
                // (4/3) g^3 / iip3_lin^2 with iip3_lin^2 = (4/3) g^2 P_ip3.
                let c3 = g / ip3_watts;
                let r_peak = (g / (3.0 * c3)).sqrt();
                let amp = if r <= r_peak {
                    g * r - c3 * r.powi(3)
                } else {
                    g * r_peak - c3 * r_peak.powi(3)
                };
                (amp, 0.0)
            }
            NonlinearitySpec::Tanh {
                gain_db,
                saturation_v,
            } => {
                let g = 10f64.powf(gain_db / 20.0);
                (saturation_v * (g * r / saturation_v).tanh(), 0.0)
            }
        }
    }
}

/// Pass the waveform through a memoryless AM/AM + AM/PM amplifier model.
pub fn apply_nonlinearity(x: &mut [Complex64], spec: &NonlinearitySpec) {
    for v in x.iter_mut() {
        let r = v.norm();
        if r <= 0.0 {
            continue;
        }
        let (amp, phase) = spec.envelope_response(r);
        *v *= Complex64::from_polar(amp / r, phase);
    }
}

/// Receiver thermal noise at a physical noise temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalNoiseSpec {
    /// Effective noise temperature in kelvin. Zero disables the impairment.
    pub temperature_k: f64,
}

/// Effective noise temperature of a stage with the given noise figure,
/// referenced to `reference_k` (usually [`REFERENCE_TEMPERATURE_K`]).
pub fn noise_temperature_from_figure_db(noise_figure_db: f64, reference_k: f64) -> f64 {
    reference_k * (10f64.powf(noise_figure_db / 10.0) - 1.0)
}

/// Add circularly symmetric white Gaussian noise with per-sample variance
/// k_B * T * fs.
pub fn apply_thermal_noise<R: Rng>(
    x: &mut [Complex64],
    spec: &ThermalNoiseSpec,
    sample_rate_hz: f64,
    rng: &mut R,
) {
    let variance = BOLTZMANN_J_PER_K * spec.temperature_k * sample_rate_hz;
    if variance <= 0.0 {
        return;
    }
    let s = (variance / 2.0).sqrt();
    for v in x.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *v += Complex64::new(s * re, s * im);
    }
}

/// Signal-to-noise ratio in dB of a signal with the given power against
/// thermal noise integrated over the signal's occupied bandwidth:
/// 10 log10(P / (k_B T B)). Returns negative infinity for zero signal
/// power and positive infinity for a noiseless receiver.
pub fn measure_truth_snr(
    signal_power_w: f64,
    noise: &ThermalNoiseSpec,
    bandwidth_hz: f64,
) -> f64 {
    if signal_power_w <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let noise_power = BOLTZMANN_J_PER_K * noise.temperature_k * bandwidth_hz;
    if noise_power <= 0.0 {
        return f64::INFINITY;
    }
    10.0 * (signal_power_w / noise_power).log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{welch_psd, Window};
    use crate::rng::derive_stream;
    use rand::Rng;

    fn test_waveform(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = derive_stream(seed, "impair-test-waveform");
        (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    fn tone(n: usize, cycles: i64) -> Vec<Complex64> {
        (0..n)
            .map(|i| {
                Complex64::from_polar(
                    1.0,
                    std::f64::consts::TAU * cycles as f64 * i as f64 / n as f64,
                )
            })
            .collect()
    }

    /// DFT at an exact integer bin; tones above land on single bins with no
    /// leakage, so bin powers are exact oracles.
    fn dft_bin(x: &[Complex64], cycles: i64) -> Complex64 {
        let n = x.len() as f64;
        x.iter()
            .enumerate()
            .map(|(i, &v)| {
                v * Complex64::from_polar(1.0, -std::f64::consts::TAU * cycles as f64 * i as f64 / n)
            })
            .sum::<Complex64>()
            / n
    }

    #[test]
    fn disabled_specs_are_exact_identity() {
        let x = test_waveform(256, 11);

        let mut y = x.clone();
        apply_iq_imbalance(
            &mut y,
            &IqImbalanceSpec {
                amplitude_db: 0.0,
                phase_deg: 0.0,
            },
        );
        assert_eq!(x, y, "balanced IQ modulator must be bit-exact identity");

        let mut y = x.clone();
        let mut rng = derive_stream(1, "dc");
        apply_dc_offset(
            &mut y,
            &DcOffsetSpec {
                offset_db: f64::NEG_INFINITY,
            },
            &mut rng,
        );
        assert_eq!(x, y);

        let mut y = x.clone();
        let mut rng = derive_stream(1, "pn");
        apply_phase_noise(
            &mut y,
            &PhaseNoiseSpec {
                level_dbc_hz: f64::NEG_INFINITY,
            },
            1.0e6,
            &mut rng,
        )
        .unwrap();
        assert_eq!(x, y);

        let mut y = x.clone();
        let mut rng = derive_stream(1, "thermal");
        apply_thermal_noise(&mut y, &ThermalNoiseSpec { temperature_k: 0.0 }, 1.0e6, &mut rng);
        assert_eq!(x, y);
    }

    #[test]
    fn random_impairments_are_deterministic_per_stream() {
        let x = test_waveform(512, 12);
        let run = |label: &str| {
            let mut y = x.clone();
            let mut rng = derive_stream(77, label);
            apply_dc_offset(&mut y, &DcOffsetSpec { offset_db: -25.0 }, &mut rng);
            apply_phase_noise(&mut y, &PhaseNoiseSpec { level_dbc_hz: -90.0 }, 1.0e6, &mut rng)
                .unwrap();
            apply_thermal_noise(
                &mut y,
                &ThermalNoiseSpec {
                    temperature_k: 290.0,
                },
                1.0e6,
                &mut rng,
            );
            y
        };
        assert_eq!(run("a"), run("a"));
        assert_ne!(run("a"), run("b"));
    }

    #[test]
    fn iq_imbalance_image_ratio_matches_branch_gains() {
        let spec = IqImbalanceSpec {
            amplitude_db: 3.10,
            phase_deg: 3.61,
        };
        let n = 4096;
        let cycles = 37;
        let mut y = tone(n, cycles);
        apply_iq_imbalance(&mut y, &spec);

        let direct = dft_bin(&y, cycles);
        let image = dft_bin(&y, -cycles);
        let measured_db = 10.0 * (direct.norm_sqr() / image.norm_sqr()).log10();
        let expected_db = spec.image_rejection_db();
        assert!(
            (measured_db - expected_db).abs() < 1e-9,
            "image rejection {measured_db} dB vs formula {expected_db} dB"
        );

        // The branch gains themselves follow the closed form.
        let (alpha, beta) = spec.branch_gains();
        let g = 10f64.powf(3.10 / 20.0);
        let phi = 3.61f64.to_radians();
        assert!((alpha - (Complex64::from_polar(g, phi) + 1.0) / 2.0).norm() < 1e-15);
        assert!((beta - (Complex64::from_polar(g, phi) - 1.0) / 2.0).norm() < 1e-15);
    }

    #[test]
    fn dc_offset_power_is_relative_to_waveform_power() {
        let x = test_waveform(4096, 13);
        let mut y = x.clone();
        let mut rng = derive_stream(5, "dc-power");
        apply_dc_offset(&mut y, &DcOffsetSpec { offset_db: -20.0 }, &mut rng);

        // The added constant is identical on every sample.
        let c0 = y[0] - x[0];
        for (a, b) in x.iter().zip(&y) {
            assert!(((b - a) - c0).norm() < 1e-15);
        }
        let ratio = c0.norm_sqr() / mean_power(&x);
        assert!(
            (ratio - 0.01).abs() < 1e-12,
            "offset power ratio {ratio} vs 0.01"
        );
    }

    #[test]
    fn phase_noise_preserves_sample_magnitudes() {
        let x = test_waveform(2048, 14);
        let mut y = x.clone();
        let mut rng = derive_stream(6, "pn-mag");
        apply_phase_noise(&mut y, &PhaseNoiseSpec { level_dbc_hz: -80.0 }, 1.0e6, &mut rng)
            .unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
        assert_ne!(x, y);
    }

    #[test]
    fn phase_noise_rejects_sample_rates_below_anchor() {
        let mut y = test_waveform(64, 15);
        let mut rng = derive_stream(7, "pn-err");
        let err = apply_phase_noise(
            &mut y,
            &PhaseNoiseSpec {
                level_dbc_hz: -100.0,
            },
            1.5e4,
            &mut rng,
        );
        assert!(err.is_err());
    }

    #[test]
    fn phase_noise_psd_hits_anchor_level_at_10khz() {
        let fs = 1.0e6;
        let level = -120.0;
        let n = 1 << 20;
        let mut y = vec![Complex64::new(1.0, 0.0); n];
        let mut rng = derive_stream(8, "pn-psd");
        apply_phase_noise(&mut y, &PhaseNoiseSpec { level_dbc_hz: level }, fs, &mut rng).unwrap();

        // Blackman keeps carrier leakage at the 10 kHz offset far below the
        // -120 dBc/Hz target.
        let (freqs, density) = welch_psd(&y, fs, 8192, Window::Blackman);
        let band: Vec<f64> = freqs
            .iter()
            .zip(&density)
            .filter(|(f, _)| (f.abs() - PHASE_NOISE_REF_OFFSET_HZ).abs() < 1.0e3)
            .map(|(_, d)| *d)
            .collect();
        assert!(band.len() > 8);
        let mean_density = band.iter().sum::<f64>() / band.len() as f64;
        let measured_dbc = 10.0 * mean_density.log10();
        assert!(
            (measured_dbc - level).abs() < 3.0,
            "phase noise at 10 kHz: {measured_dbc} dBc/Hz vs {level}"
        );
    }

    #[test]
    fn saleh_model_matches_hand_computed_point() {
        // AM/AM 2r/(1+r^2) puts r=1 exactly at 1.0; AM/PM pi r^2/(1+r^2)
        // adds pi/2 there, so (1,0) maps to (0,1).
        let spec = NonlinearitySpec::Saleh {
            alpha_am: 2.0,
            beta_am: 1.0,
            alpha_pm: std::f64::consts::PI,
            beta_pm: 1.0,
        };
        let mut y = vec![Complex64::new(1.0, 0.0)];
        apply_nonlinearity(&mut y, &spec);
        assert!((y[0] - Complex64::new(0.0, 1.0)).norm() < 1e-12, "got {}", y[0]);
    }

    #[test]
    fn ghorbani_model_matches_hand_computed_point() {
        // AM/AM r^2/(1+r^2) at r=1 is 0.5; AM/PM pi r^2/(1+r^2) adds pi/2.
        let spec = NonlinearitySpec::Ghorbani {
            x: [1.0, 2.0, 1.0, 0.0],
            y: [std::f64::consts::PI, 2.0, 1.0, 0.0],
        };
        let mut y = vec![Complex64::new(1.0, 0.0)];
        apply_nonlinearity(&mut y, &spec);
        assert!((y[0] - Complex64::new(0.0, 0.5)).norm() < 1e-12, "got {}", y[0]);

        // With the shaping terms off, the x4/y4 tails reduce to a pure
        // linear gain.
        let linear = NonlinearitySpec::Ghorbani {
            x: [0.0, 2.0, 0.0, 2.0],
            y: [0.0, 2.0, 0.0, 0.0],
        };
        let mut y = vec![Complex64::new(0.3, -0.4)];
        apply_nonlinearity(&mut y, &linear);
        assert!((y[0] - Complex64::new(0.6, -0.8)).norm() < 1e-12);
    }

    #[test]
    fn rapp_with_large_smoothness_is_a_hard_clipper() {
        let spec = NonlinearitySpec::Rapp {
            gain_db: 0.0,
            smoothness: 100.0,
            saturation_v: 1.0,
        };
        let cases = [(0.5, 0.5), (1.0, 1.0), (2.0, 1.0), (10.0, 1.0)];
        for (r, clipped) in cases {
            let (amp, phase) = spec.envelope_response(r);
            assert_eq!(phase, 0.0);
            assert!(
                (amp - clipped).abs() / clipped < 0.01,
                "rapp p=100 at r={r}: {amp} vs clipper {clipped}"
            );
        }
    }

    #[test]
    fn tanh_model_saturates_to_output_limit() {
        let spec = NonlinearitySpec::Tanh {
            gain_db: 20.0,
            saturation_v: 0.5,
        };
        let (amp, _) = spec.envelope_response(10.0);
        assert!((amp - 0.5).abs() < 1e-12);
        // Small-signal region is linear with the configured gain.
        let (amp, _) = spec.envelope_response(1.0e-4);
        assert!((amp - 1.0e-3).abs() / 1.0e-3 < 1e-5);
    }

    #[test]
    fn cubic_two_tone_intercept_matches_configured_iip3() {
        let iip3_dbm = 20.0;
        let spec = NonlinearitySpec::Cubic {
            gain_db: 10.0,
            iip3_dbm,
        };
        let n = 4096;
        let (k1, k2) = (50i64, 57i64);
        let a = 0.03;
        let mut y: Vec<Complex64> = (0..n)
            .map(|i| {
                let t = i as f64 / n as f64;
                Complex64::from_polar(a, std::f64::consts::TAU * k1 as f64 * t)
                    + Complex64::from_polar(a, std::f64::consts::TAU * k2 as f64 * t)
            })
            .collect();
        apply_nonlinearity(&mut y, &spec);

        let fund = dft_bin(&y, k1).norm_sqr();
        let im3 = dft_bin(&y, 2 * k1 - k2).norm_sqr();
        let input_dbm = 10.0 * (a * a).log10() + 30.0;
        let measured_iip3 = input_dbm + 5.0 * (fund / im3).log10();
        assert!(
            (measured_iip3 - iip3_dbm).abs() < 0.5,
            "two-tone intercept {measured_iip3} dBm vs configured {iip3_dbm}"
        );
    }

    #[test]
    fn cubic_clips_where_its_slope_reaches_zero() {
        let spec = NonlinearitySpec::Cubic {
            gain_db: 0.0,
            iip3_dbm: 30.0,
        };
        // g = 1, P_ip3 = 1 W, so c3 = 1 and the peak sits at r = 1/sqrt(3).
        let r_peak = 1.0 / 3f64.sqrt();
        let peak = spec.envelope_response(r_peak).0;
        for r in [r_peak * 1.01, 1.0, 5.0, 100.0] {
            let (amp, _) = spec.envelope_response(r);
            assert!(
                (amp - peak).abs() < 1e-12,
                "beyond the peak the envelope must hold at {peak}, got {amp} at r={r}"
            );
        }
        // Monotone below the peak.
        let mut last = 0.0;
        for i in 1..=100 {
            let r = r_peak * i as f64 / 100.0;
            let (amp, _) = spec.envelope_response(r);
            assert!(amp >= last);
            last = amp;
        }
    }

    #[test]
    fn nonlinearities_commute_with_phase_rotation() {
        let models = [
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
                gain_db: 3.0,
                smoothness: 2.0,
                saturation_v: 1.0,
            },
            NonlinearitySpec::Cubic {
                gain_db: 10.0,
                iip3_dbm: 20.0,
            },
            NonlinearitySpec::Tanh {
                gain_db: 6.0,
                saturation_v: 0.8,
            },
        ];
        let mut rng = derive_stream(9, "pa-rotation");
        for spec in &models {
            for _ in 0..50 {
                let x = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                let rot = Complex64::from_polar(1.0, theta);

                let mut a = vec![x * rot];
                apply_nonlinearity(&mut a, spec);
                let mut b = vec![x];
                apply_nonlinearity(&mut b, spec);
                assert!(
                    (a[0] - b[0] * rot).norm() < 1e-12,
                    "{spec:?} must commute with phase rotation"
                );
            }
        }
    }

    #[test]
    fn thermal_noise_variance_matches_temperature() {
        let fs = 1.0e6;
        let spec = ThermalNoiseSpec {
            temperature_k: 290.0,
        };
        let n = 1_000_000;
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        let mut rng = derive_stream(10, "thermal-var");
        apply_thermal_noise(&mut y, &spec, fs, &mut rng);

        let expected = BOLTZMANN_J_PER_K * 290.0 * fs;
        let measured = mean_power(&y);
        assert!(
            (measured - expected).abs() / expected < 0.01,
            "noise variance {measured} vs k_B T fs = {expected}"
        );
        // Circular symmetry: real and imaginary parts carry equal halves.
        let re_var = y.iter().map(|v| v.re * v.re).sum::<f64>() / n as f64;
        assert!((re_var - expected / 2.0).abs() / expected < 0.01);
    }

    #[test]
    fn truth_snr_integrates_noise_density_over_bandwidth() {
        let noise = ThermalNoiseSpec {
            temperature_k: 290.0,
        };
        let b = 1.0e5;
        let p0 = BOLTZMANN_J_PER_K * 290.0 * b;
        assert!(measure_truth_snr(p0, &noise, b).abs() < 1e-9);
        assert!((measure_truth_snr(10.0 * p0, &noise, b) - 10.0).abs() < 1e-9);
        assert_eq!(
            measure_truth_snr(0.0, &noise, b),
            f64::NEG_INFINITY,
            "zero signal power reports the negative-infinity sentinel"
        );
        assert_eq!(
            measure_truth_snr(1.0, &ThermalNoiseSpec { temperature_k: 0.0 }, b),
            f64::INFINITY
        );
    }

    #[test]
    fn noise_figure_converts_to_excess_temperature() {
        let t = noise_temperature_from_figure_db(10.0, REFERENCE_TEMPERATURE_K);
        assert!((t - 2610.0).abs() < 1e-9);
        assert!(noise_temperature_from_figure_db(0.0, REFERENCE_TEMPERATURE_K).abs() < 1e-12);
        // 3.0103 dB is a factor of two, one reference temperature of excess.
        let t3 = noise_temperature_from_figure_db(10.0 * 2f64.log10(), REFERENCE_TEMPERATURE_K);
        assert!((t3 - 290.0).abs() < 1e-9);
    }

    #[test]
    fn specs_round_trip_through_serde() {
        let nl = NonlinearitySpec::Rapp {
            gain_db: 1.0,
            smoothness: 2.0,
            saturation_v: 0.9,
        };
        let json = serde_json::to_string(&nl).unwrap();
        assert!(json.contains("\"model\":\"rapp\""));
        assert_eq!(serde_json::from_str::<NonlinearitySpec>(&json).unwrap(), nl);

        let iq: IqImbalanceSpec =
            serde_json::from_str("{\"amplitude_db\":3.1,\"phase_deg\":3.61}").unwrap();
        assert_eq!(iq.amplitude_db, 3.1);
        assert!(serde_json::from_str::<DcOffsetSpec>("{\"bogus\":1}").is_err());
    }
}

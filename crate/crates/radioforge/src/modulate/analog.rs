//! Analog modulation of a real message onto a complex baseband carrier:
//! AM (double-sideband, single-sideband, vestigial-sideband), FM and PM.
//!
//! The message is normalized to unit peak before modulating so depth,
//! deviation and peak phase are meaningful regardless of message scale.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::math::{analytic_signal, fft_forward, fft_inverse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnalogKind {
    AmDsb,
    AmSsb,
    AmVsb,
    Fm,
    Pm,
}

#[derive(Debug, Clone, Copy)]
pub struct Params {
    pub kind: AnalogKind,
    pub sample_rate_hz: f64,
    pub am_depth: f64,
    pub fm_deviation_hz: f64,
    pub pm_peak_phase: f64,
    pub vsb_vestige_hz: f64,
}

/// Modulates `message` onto a complex baseband waveform of the same length.
/// Output power is arbitrary; the caller normalizes.
pub fn modulate(params: &Params, message: &[f64]) -> Vec<Complex64> {
    let peak = message.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let scale = if peak > 0.0 { 1.0 / peak } else { 1.0 };
    let m: Vec<f64> = message.iter().map(|&v| v * scale).collect();
    match params.kind {
        AnalogKind::AmDsb => m
            .iter()
            .map(|&v| Complex64::new(1.0 + params.am_depth * v, 0.0))
            .collect(),
        AnalogKind::AmSsb => {
            // Upper sideband, suppressed carrier: the analytic signal of
            // the message keeps only positive frequencies.
            analytic_signal(&m)
        }
        AnalogKind::AmVsb => vsb(&m, params),
        AnalogKind::Fm => {
            let k = 2.0 * PI * params.fm_deviation_hz / params.sample_rate_hz;
            let mut phi = 0.0f64;
            m.iter()
                .map(|&v| {
                    phi += k * v;
                    Complex64::from_polar(1.0, phi)
                })
                .collect()
        }
        AnalogKind::Pm => m
            .iter()
            .map(|&v| Complex64::from_polar(1.0, params.pm_peak_phase * v))
            .collect(),
    }
}

/// Vestigial sideband: keep the full upper sideband and a raised-cosine
/// vestige of the lower sideband out to `vsb_vestige_hz`.
fn vsb(message: &[f64], params: &Params) -> Vec<Complex64> {
    let n = message.len();
    let mut x: Vec<Complex64> = message.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_forward(&mut x);
    let fs = params.sample_rate_hz;
    let fv = params.vsb_vestige_hz.max(fs / n as f64);
    for (k, v) in x.iter_mut().enumerate() {
        let f = if k <= n / 2 {
            k as f64 * fs / n as f64
        } else {
            (k as f64 - n as f64) * fs / n as f64
        };
        let h = if f >= fv {
            1.0
        } else if f <= -fv {
            0.0
        } else {
            // Complementary ramp through 1/2 at DC keeps the in-band sum
            // of the two sidebands flat.
            0.5 * (1.0 + (PI * f / (2.0 * fv)).sin())
        };
        *v *= h;
    }
    fft_inverse(&mut x);
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{mean_power, welch_psd, Window};

    fn two_tone(fs: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                (2.0 * PI * 2e3 * t).sin() + 0.5 * (2.0 * PI * 11e3 * t).cos()
            })
            .collect()
    }

    fn band_power(freqs: &[f64], psd: &[f64], lo: f64, hi: f64) -> f64 {
        freqs
            .iter()
            .zip(psd)
            .filter(|(f, _)| **f >= lo && **f < hi)
            .map(|(_, p)| *p)
            .sum()
    }

    fn params(kind: AnalogKind) -> Params {
        let bm = 16e3;
        Params {
            kind,
            sample_rate_hz: 256e3,
            am_depth: 0.7,
            fm_deviation_hz: 2.0 * bm,
            pm_peak_phase: PI / 2.0,
            vsb_vestige_hz: 0.25 * bm,
        }
    }

    #[test]
    fn dsb_spectrum_is_symmetric_with_carrier() {
        let p = params(AnalogKind::AmDsb);
        let msg = two_tone(p.sample_rate_hz, 1 << 15);
        let x = modulate(&p, &msg);
        let (freqs, psd) = welch_psd(&x, p.sample_rate_hz, 4096, Window::Hamming);
        let upper = band_power(&freqs, &psd, 1e3, 20e3);
        let lower = band_power(&freqs, &psd, -20e3, -1e3);
        assert!((upper / lower - 1.0).abs() < 0.05, "sidebands {upper} vs {lower}");
        // Residual carrier at DC dominates any single sideband bin.
        let dc = band_power(&freqs, &psd, -100.0, 100.0);
        assert!(dc > upper, "carrier {dc} vs sideband {upper}");
    }

    #[test]
    fn ssb_suppresses_lower_sideband_and_carrier() {
        let p = params(AnalogKind::AmSsb);
        let msg = two_tone(p.sample_rate_hz, 1 << 15);
        let x = modulate(&p, &msg);
        let (freqs, psd) = welch_psd(&x, p.sample_rate_hz, 4096, Window::Hamming);
        let upper = band_power(&freqs, &psd, 1e3, 20e3);
        let lower = band_power(&freqs, &psd, -20e3, -1e3);
        assert!(lower < 1e-6 * upper, "lower sideband leak {lower} vs {upper}");
    }

    #[test]
    fn vsb_keeps_quarter_band_vestige() {
        let p = params(AnalogKind::AmVsb);
        let msg = two_tone(p.sample_rate_hz, 1 << 15);
        let x = modulate(&p, &msg);
        let (freqs, psd) = welch_psd(&x, p.sample_rate_hz, 4096, Window::Hamming);
        // The 2 kHz tone sits inside the 4 kHz vestige: its lower image
        // survives at reduced amplitude. The 11 kHz tone keeps only its
        // upper image; beyond the vestige the lower sideband is gone.
        let upper = band_power(&freqs, &psd, 1e3, 20e3);
        let beyond_vestige = band_power(&freqs, &psd, -20e3, -6e3);
        assert!(beyond_vestige < 1e-4 * upper, "vestige leak {beyond_vestige}");
        let vestige = band_power(&freqs, &psd, -3e3, -1e3);
        assert!(vestige > 1e-3 * upper, "vestige missing: {vestige} vs {upper}");
    }

    #[test]
    fn fm_and_pm_have_constant_envelope() {
        for kind in [AnalogKind::Fm, AnalogKind::Pm] {
            let p = params(kind);
            let msg = two_tone(p.sample_rate_hz, 1 << 14);
            let x = modulate(&p, &msg);
            for v in &x {
                assert!((v.norm() - 1.0).abs() < 1e-12);
            }
            assert!((mean_power(&x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fm_instantaneous_frequency_tracks_message() {
        let p = params(AnalogKind::Fm);
        let fs = p.sample_rate_hz;
        // Slow single tone so the discrete derivative is accurate.
        let msg: Vec<f64> = (0..1 << 14).map(|i| (2.0 * PI * 500.0 * i as f64 / fs).sin()).collect();
        let x = modulate(&p, &msg);
        let mut max_f = 0.0f64;
        for w in x.windows(2) {
            let df = (w[1] * w[0].conj()).arg() / (2.0 * PI) * fs;
            max_f = max_f.max(df);
        }
        // Peak deviation should be close to the configured 32 kHz.
        assert!((max_f - p.fm_deviation_hz).abs() < 0.02 * p.fm_deviation_hz, "peak {max_f}");
    }
}

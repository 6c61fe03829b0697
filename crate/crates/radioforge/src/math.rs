//! Shared DSP helpers: dB conversions, windows, FFT wrappers, Welch PSD,
//! analytic signal, and windowed-sinc resampling.

use num_complex::Complex64;
use rustfft::{num_complex::Complex as FftComplex, FftPlanner};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const BOLTZMANN: f64 = 1.380_649e-23;

pub fn db_to_power(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn power_to_db(p: f64) -> f64 {
    10.0 * p.log10()
}

pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Normalized sinc: sin(pi x) / (pi x).
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Mean of |x|^2 over the slice. Zero for an empty slice.
pub fn mean_power(x: &[Complex64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Hamming,
    Hann,
    Blackman,
}

impl Window {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        let m = (n.max(2) - 1) as f64;
        (0..n)
            .map(|i| {
                let x = 2.0 * std::f64::consts::PI * i as f64 / m;
                match self {
                    Window::Hamming => 0.54 - 0.46 * x.cos(),
                    Window::Hann => 0.5 - 0.5 * x.cos(),
                    Window::Blackman => 0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos(),
                }
            })
            .collect()
    }
}

/// In-place forward FFT.
pub fn fft_forward(buf: &mut [Complex64]) {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(buf.len());
    // Complex64 and rustfft's complex type share layout.
    let view: &mut [FftComplex<f64>] =
        unsafe { std::slice::from_raw_parts_mut(buf.as_mut_ptr() as *mut FftComplex<f64>, buf.len()) };
    fft.process(view);
}

/// In-place inverse FFT with 1/N normalization, so ifft(fft(x)) == x.
pub fn fft_inverse(buf: &mut [Complex64]) {
    let n = buf.len();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_inverse(n);
    let view: &mut [FftComplex<f64>] =
        unsafe { std::slice::from_raw_parts_mut(buf.as_mut_ptr() as *mut FftComplex<f64>, n) };
    fft.process(view);
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Swap halves so bin 0 (DC) moves to the middle. For odd n the extra bin
/// stays on the positive-frequency side, matching the usual convention.
pub fn fftshift<T: Copy>(x: &[T]) -> Vec<T> {
    let n = x.len();
    let half = n.div_ceil(2);
    let mut out = Vec::with_capacity(n);
    out.extend_from_slice(&x[half..]);
    out.extend_from_slice(&x[..half]);
    out
}

/// Frequency axis matching `fftshift`ed spectra: n bins spanning
/// [-fs/2, fs/2), bin spacing fs/n.
pub fn fftshift_freqs(n: usize, fs: f64) -> Vec<f64> {
    let nf = n as f64;
    (0..n).map(|i| (i as f64 - (n / 2) as f64) * fs / nf).collect()
}

/// Welch PSD estimate with 50% overlap.
///
/// Returns (frequencies, density). The density is one-sided in neither
/// sense: it is the two-sided PSD of the complex sequence in power per Hz,
/// fftshifted, so summing density * (fs/nfft) recovers total power.
pub fn welch_psd(x: &[Complex64], fs: f64, nfft: usize, window: Window) -> (Vec<f64>, Vec<f64>) {
    assert!(nfft >= 8 && x.len() >= nfft, "welch: need at least one full segment");
    let w = window.coefficients(nfft);
    let wpow: f64 = w.iter().map(|v| v * v).sum();
    let hop = nfft / 2;
    let mut acc = vec![0.0f64; nfft];
    let mut count = 0usize;
    let mut start = 0usize;
    let mut buf = vec![Complex64::default(); nfft];
    while start + nfft <= x.len() {
        for i in 0..nfft {
            buf[i] = x[start + i] * w[i];
        }
        fft_forward(&mut buf);
        for (a, v) in acc.iter_mut().zip(buf.iter()) {
            *a += v.norm_sqr();
        }
        count += 1;
        start += hop;
    }
    let scale = 1.0 / (count as f64 * fs * wpow);
    let psd: Vec<f64> = acc.iter().map(|a| a * scale).collect();
    (fftshift_freqs(nfft, fs), fftshift(&psd))
}

/// Analytic signal of a real sequence via the FFT method: negative
/// frequencies zeroed, positive doubled, DC and Nyquist kept.
pub fn analytic_signal(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_forward(&mut buf);
    let half = n / 2;
    for (i, v) in buf.iter_mut().enumerate() {
        if i == 0 || (n % 2 == 0 && i == half) {
            // keep
        } else if i < half || (n % 2 == 1 && i == half) {
            *v *= 2.0;
        } else {
            *v = Complex64::default();
        }
    }
    fft_inverse(&mut buf);
    buf
}

/// Arbitrary-ratio resampler: windowed-sinc interpolation with `half_taps`
/// input samples on each side of the interpolation point (Blackman window).
///
/// Output length is ceil(len * fs_out / fs_in); output sample n is the
/// band-limited interpolation of the input at time n / fs_out. When
/// downsampling, the sinc is widened by the ratio so the result stays
/// band-limited to the output Nyquist.
pub fn resample_sinc(x: &[Complex64], fs_in: f64, fs_out: f64, half_taps: usize) -> Vec<Complex64> {
    assert!(fs_in > 0.0 && fs_out > 0.0);
    if x.is_empty() {
        return Vec::new();
    }
    if (fs_in - fs_out).abs() < 1e-9 * fs_in {
        return x.to_vec();
    }
    let ratio = fs_out / fs_in;
    // Cutoff relative to the input rate. <1 when decimating.
    let cutoff = ratio.min(1.0);
    let span = half_taps as f64 / cutoff;
    let n_out = (x.len() as f64 * ratio).ceil() as usize;
    let mut out = Vec::with_capacity(n_out);
    let two_pi = 2.0 * std::f64::consts::PI;
    for n in 0..n_out {
        let u = n as f64 / ratio;
        let k0 = (u - span).ceil().max(0.0) as usize;
        let k1 = ((u + span).floor() as usize).min(x.len() - 1);
        let mut acc = Complex64::default();
        let mut wsum = 0.0;
        for k in k0..=k1 {
            let d = u - k as f64;
            // Blackman window over [-span, span].
            let t = (d / span).clamp(-1.0, 1.0);
            let win = 0.42 + 0.5 * (std::f64::consts::PI * t).cos() + 0.08 * (two_pi * t).cos();
            let w = cutoff * sinc(cutoff * d) * win;
            acc += x[k] * w;
            wsum += w;
        }
        // Normalizing by the kernel sum flattens the passband ripple that a
        // truncated sinc would otherwise leave on slowly varying content.
        if wsum.abs() > 1e-9 && ratio > 1.0 {
            acc /= wsum;
        }
        out.push(acc);
    }
    out
}

/// Interpolation kernel for one fractional delay, `taps` long (odd), with a
/// Blackman window. `kernel[i]` weights `x[n - delay_int + center - i]`; see
/// the channel code for usage. Sums to ~1 for in-range delays.
pub fn fractional_delay_kernel(frac: f64, taps: usize) -> Vec<f64> {
    assert!(taps % 2 == 1, "kernel length must be odd");
    let center = (taps / 2) as f64;
    let two_pi = 2.0 * std::f64::consts::PI;
    (0..taps)
        .map(|i| {
            let d = i as f64 - center - frac;
            let t = (i as f64 - center - frac) / (center + 1.0);
            let t = t.clamp(-1.0, 1.0);
            let win = 0.42 + 0.5 * (std::f64::consts::PI * t).cos() + 0.08 * (two_pi * t).cos();
            sinc(d) * win
        })
        .collect()
}

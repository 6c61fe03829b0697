//! OFDM and SC-FDMA synthesis with cyclic prefixes.
//!
//! Subcarrier mapping is localized around (but excluding) DC: with `u`
//! used subcarriers the loaded FFT bins are `+1..=+u/2` then `-u/2..=-1`.
//! SC-FDMA is OFDM with an extra DFT spreading stage over each block,
//! which restores a single-carrier-like envelope (lower peak-to-average
//! power ratio than plain OFDM).
//!
//! Blocks are joined with raised-cosine edge tapers (windowed overlap-add
//! across the cyclic prefix region) rather than butted rectangles: with a
//! handful of subcarriers on a small FFT, plain rectangular pulses leak
//! sinc skirts across the entire digital band, while the taper confines
//! the spectrum to the loaded bins. The demodulator's FFT window is never
//! touched by the taper, so round trips remain exact.

use num_complex::Complex64;

use super::McKind;
use crate::math::{fft_forward, fft_inverse};

/// Overlap-add assembler for cyclic-prefixed blocks with raised-cosine
/// edge tapers. Each block is written as `prefix | body | cyclic suffix`;
/// the suffix (the first `cp` body samples again) ramps down across the
/// next block's prefix, which ramps up, and the two ramps sum to one.
/// Only the prefix and suffix are shaped: the `body` region that carries
/// the FFT contents stays bit-exact.
pub(super) struct TaperedBlocks {
    out: Vec<Complex64>,
    stride: usize,
    cp: usize,
    ramp: Vec<f64>,
    next: usize,
}

impl TaperedBlocks {
    pub(super) fn new(n_blocks: usize, body_len: usize, cp: usize) -> Self {
        let stride = body_len + cp;
        let ramp: Vec<f64> = (0..cp)
            .map(|i| 0.5 * (1.0 - (std::f64::consts::PI * (i as f64 + 0.5) / cp as f64).cos()))
            .collect();
        TaperedBlocks {
            out: vec![Complex64::new(0.0, 0.0); n_blocks * stride + cp],
            stride,
            cp,
            ramp,
            next: 0,
        }
    }

    pub(super) fn push(&mut self, body: &[Complex64]) {
        let n = body.len();
        debug_assert_eq!(n + self.cp, self.stride);
        for i in 0..self.stride + self.cp {
            let v = if i < self.cp {
                body[n - self.cp + i]
            } else if i < self.cp + n {
                body[i - self.cp]
            } else {
                body[i - self.cp - n]
            };
            let g = if i < self.cp {
                self.ramp[i]
            } else if i >= self.stride {
                self.ramp[self.stride + self.cp - 1 - i]
            } else {
                1.0
            };
            self.out[self.next + i] += v * g;
        }
        self.next += self.stride;
    }

    /// Drops the final suffix so the waveform length is exactly
    /// `n_blocks * (body_len + cp)`.
    pub(super) fn finish(mut self) -> Vec<Complex64> {
        self.out.truncate(self.next);
        self.out
    }
}

/// FFT bin carrying block element `j`.
pub fn bin_for(j: usize, used: usize, fft_size: usize) -> usize {
    let half = used / 2;
    if j < half {
        j + 1
    } else {
        fft_size - used + j
    }
}

/// Synthesizes the multicarrier waveform. Symbols are chunked into blocks
/// of `used_subcarriers` (the final block zero-padded), each block becomes
/// one FFT body plus cyclic prefix.
pub fn modulate(
    kind: McKind,
    symbols: &[Complex64],
    fft_size: usize,
    used_subcarriers: usize,
    cp_len: usize,
) -> Vec<Complex64> {
    let n_blocks = symbols.len().div_ceil(used_subcarriers);
    let mut out = TaperedBlocks::new(n_blocks, fft_size, cp_len);
    let mut block = vec![Complex64::new(0.0, 0.0); used_subcarriers];
    for b in 0..n_blocks {
        for (j, v) in block.iter_mut().enumerate() {
            let idx = b * used_subcarriers + j;
            *v = symbols.get(idx).copied().unwrap_or_default();
        }
        if kind == McKind::Scfdma {
            fft_forward(&mut block);
            let g = 1.0 / (used_subcarriers as f64).sqrt();
            for v in &mut block {
                *v *= g;
            }
        }
        let mut body = vec![Complex64::new(0.0, 0.0); fft_size];
        for (j, &v) in block.iter().enumerate() {
            body[bin_for(j, used_subcarriers, fft_size)] = v;
        }
        fft_inverse(&mut body);
        out.push(&body);
    }
    out.finish()
}

/// Removes cyclic prefixes and inverts the FFT (and DFT spreading for
/// SC-FDMA), returning the first `n_symbols` block elements. Exact on a
/// clean waveform up to one complex gain.
pub fn demodulate(
    kind: McKind,
    samples: &[Complex64],
    fft_size: usize,
    used_subcarriers: usize,
    cp_len: usize,
    n_symbols: usize,
) -> Vec<Complex64> {
    let block_len = fft_size + cp_len;
    let n_blocks = samples.len() / block_len;
    let mut out = Vec::with_capacity(n_blocks * used_subcarriers);
    for b in 0..n_blocks {
        let mut body: Vec<Complex64> =
            samples[b * block_len + cp_len..b * block_len + block_len].to_vec();
        // The forward FFT exactly undoes the synthesis IFFT (which carried
        // the 1/N factor), so the bins hold the block elements directly.
        fft_forward(&mut body);
        let mut block: Vec<Complex64> = (0..used_subcarriers)
            .map(|j| body[bin_for(j, used_subcarriers, fft_size)])
            .collect();
        if kind == McKind::Scfdma {
            fft_inverse(&mut block);
            let g = (used_subcarriers as f64).sqrt();
            for v in &mut block {
                *v *= g;
            }
        }
        out.extend_from_slice(&block);
    }
    out.truncate(n_symbols);
    out
}

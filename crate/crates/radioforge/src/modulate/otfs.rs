//! OTFS: symbols live on a delay-Doppler grid, move to the time-frequency
//! grid through the inverse symplectic finite Fourier transform, then ride
//! a conventional CP-OFDM modulator.
//!
//! Grid shape is `delay_bins (M) x doppler_bins (N)`; each OTFS frame
//! carries `M * N` constellation symbols in `N` OFDM symbols of `M + cp`
//! samples.

use num_complex::Complex64;

use super::multicarrier::TaperedBlocks;
use crate::math::{fft_forward, fft_inverse};

/// Synthesizes the OTFS waveform. Symbols fill delay-Doppler grids frame
/// by frame (delay-major), the final frame zero-padded.
pub fn modulate(
    symbols: &[Complex64],
    delay_bins: usize,
    doppler_bins: usize,
    cp_len: usize,
) -> Vec<Complex64> {
    let (m, n) = (delay_bins, doppler_bins);
    let per_frame = m * n;
    let n_frames = symbols.len().div_ceil(per_frame);
    let mut out = TaperedBlocks::new(n_frames * n, m, cp_len);
    for f in 0..n_frames {
        // Delay-major grid: grid[l][k], l = delay row, k = Doppler column.
        let mut grid = vec![vec![Complex64::new(0.0, 0.0); n]; m];
        for k in 0..n {
            for (l, row) in grid.iter_mut().enumerate() {
                let idx = f * per_frame + k * m + l;
                row[k] = symbols.get(idx).copied().unwrap_or_default();
            }
        }
        // ISFFT: DFT along the delay axis, inverse DFT along Doppler.
        let mut tf = vec![vec![Complex64::new(0.0, 0.0); n]; m];
        for k in 0..n {
            let mut col: Vec<Complex64> = (0..m).map(|l| grid[l][k]).collect();
            fft_forward(&mut col);
            for (row, v) in tf.iter_mut().zip(col) {
                row[k] = v;
            }
        }
        for row in tf.iter_mut() {
            fft_inverse(row);
        }
        // Heisenberg transform: per time symbol, an M-point IFFT plus
        // cyclic prefix, edge-tapered like every other block.
        for k in 0..n {
            let mut body: Vec<Complex64> = (0..m).map(|l| tf[l][k]).collect();
            fft_inverse(&mut body);
            out.push(&body);
        }
    }
    out.finish()
}

/// Inverts [`modulate`]: strips prefixes, runs the Wigner transform and the
/// SFFT, and returns the first `n_symbols` grid entries. Exact on a clean
/// waveform up to one complex gain.
pub fn demodulate(
    samples: &[Complex64],
    delay_bins: usize,
    doppler_bins: usize,
    cp_len: usize,
    n_symbols: usize,
) -> Vec<Complex64> {
    let (m, n) = (delay_bins, doppler_bins);
    let block_len = m + cp_len;
    let n_frames = samples.len() / (n * block_len);
    let mut out = Vec::with_capacity(n_frames * m * n);
    for f in 0..n_frames {
        // Each inverse stage here pairs with a forward stage in synthesis
        // (and vice versa); the library's 1/N-on-inverse convention makes
        // every pair cancel exactly, so no manual rescaling appears.
        let mut tf = vec![vec![Complex64::new(0.0, 0.0); n]; m];
        for k in 0..n {
            let start = (f * n + k) * block_len + cp_len;
            let mut body: Vec<Complex64> = samples[start..start + m].to_vec();
            fft_forward(&mut body);
            for (row, v) in tf.iter_mut().zip(body) {
                row[k] = v;
            }
        }
        // SFFT: DFT along Doppler, inverse DFT along delay.
        for row in tf.iter_mut() {
            fft_forward(row);
        }
        let mut grid = vec![vec![Complex64::new(0.0, 0.0); n]; m];
        for k in 0..n {
            let mut col: Vec<Complex64> = (0..m).map(|l| tf[l][k]).collect();
            fft_inverse(&mut col);
            for (l, v) in col.into_iter().enumerate() {
                grid[l][k] = v;
            }
        }
        for k in 0..n {
            for row in grid.iter() {
                out.push(row[k]);
            }
        }
    }
    out.truncate(n_symbols);
    out
}

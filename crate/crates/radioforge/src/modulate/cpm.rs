//! Continuous-phase modulation: FSK, CPFSK, MSK and their Gaussian-pulse
//! variants GFSK and GMSK.
//!
//! All classes share the phase accumulator
//! `phi[n] = phi[n-1] + 2*pi*h*f[n]` where `f` is the superposition of
//! per-symbol frequency pulses scaled by odd levels `{+-1, +-3, ...}`.
//! The frequency pulse integrates to 1/2, so each symbol advances the
//! phase by `pi*h*level` once its pulse has fully passed.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use super::constellation::gray;

/// Gaussian frequency pulses span this many symbols.
pub const GAUSSIAN_PULSE_SYMBOLS: usize = 3;

/// Sampled frequency pulse, normalized so its samples sum to 1/2.
/// `bt: None` gives the one-symbol rectangular pulse; `Some(bt)` gives a
/// truncated Gaussian spanning [`GAUSSIAN_PULSE_SYMBOLS`] symbols.
pub fn frequency_pulse(bt: Option<f64>, sps: u32) -> Vec<f64> {
    let sps_f = sps as f64;
    match bt {
        None => vec![0.5 / sps_f; sps as usize],
        Some(bt) => {
            let l = GAUSSIAN_PULSE_SYMBOLS;
            let n = l * sps as usize;
            let c = 2.0 * PI * bt / (2.0f64.ln()).sqrt();
            let mut g: Vec<f64> = (0..n)
                .map(|i| {
                    // Sample instants in symbol units, centered on the pulse.
                    let t = (i as f64 + 0.5) / sps_f - l as f64 / 2.0;
                    q_function(c * (t - 0.5)) - q_function(c * (t + 0.5))
                })
                .collect();
            let sum: f64 = g.iter().sum();
            for v in &mut g {
                *v *= 0.5 / sum;
            }
            g
        }
    }
}

/// Gray-coded level table: index by symbol label to get the signed level.
/// Adjacent levels differ in exactly one label bit.
pub fn level_table(order: u32) -> Vec<f64> {
    let m = order as usize;
    let mut levels = vec![0.0; m];
    for pos in 0..m {
        levels[gray(pos)] = (2 * pos) as f64 - (m - 1) as f64;
    }
    levels
}

/// Synthesizes the unit-envelope CPM waveform for the given symbol labels.
/// Output length is `(labels.len() + L - 1) * sps` where `L` is the pulse
/// span in symbols.
pub fn modulate(order: u32, mod_index: f64, bt: Option<f64>, labels: &[usize], sps: u32) -> Result<Vec<Complex64>> {
    if !order.is_power_of_two() || order < 2 {
        return Err(Error::signal(format!("CPM order {order} must be a power of two >= 2")));
    }
    let g = frequency_pulse(bt, sps);
    let pulse_symbols = g.len() / sps as usize;
    let levels = level_table(order);
    let n_out = (labels.len() + pulse_symbols - 1) * sps as usize;
    let mut freq = vec![0.0f64; n_out];
    for (k, &lab) in labels.iter().enumerate() {
        let a = levels[lab];
        let base = k * sps as usize;
        for (i, &gv) in g.iter().enumerate() {
            freq[base + i] += a * gv;
        }
    }
    let mut phi = 0.0f64;
    Ok(freq
        .iter()
        .map(|&f| {
            phi += 2.0 * PI * mod_index * f;
            Complex64::from_polar(1.0, phi)
        })
        .collect())
}

/// Gaussian tail probability Q(x) via the Abramowitz-Stegun rational
/// approximation of erfc (absolute error below 2e-7, ample for pulse
/// synthesis).
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    let t = 1.0 / (1.0 + 0.327_591_1 * x);
    let poly = t
        * (0.254_829_592
            + t * (-0.284_496_736 + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    poly * (-x * x).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn erfc_matches_reference_values() {
        for (x, want) in [(0.0, 1.0), (1.0, 0.157_299_207), (2.0, 0.004_677_735)] {
            assert!((erfc(x) - want).abs() < 2e-7, "erfc({x})");
            assert!((erfc(-x) - (2.0 - want)).abs() < 2e-7, "erfc(-{x})");
        }
    }

    #[test]
    fn frequency_pulses_integrate_to_half() {
        for bt in [None, Some(0.3), Some(0.5)] {
            let g = frequency_pulse(bt, 8);
            let sum: f64 = g.iter().sum();
            assert!((sum - 0.5).abs() < 1e-12, "{bt:?}");
            // Symmetric pulse.
            for i in 0..g.len() / 2 {
                assert!((g[i] - g[g.len() - 1 - i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn envelope_is_exactly_constant() {
        let mut rng = crate::rng::derive_stream(7, "cpm-envelope");
        let labels: Vec<usize> = (0..500).map(|_| rng.gen_range(0..4)).collect();
        for bt in [None, Some(0.3)] {
            let x = modulate(4, 0.5, bt, &labels, 8).unwrap();
            for v in &x {
                assert!((v.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rect_pulse_phase_advances_by_half_pi_times_level() {
        let mut rng = crate::rng::derive_stream(9, "cpm-phase");
        let labels: Vec<usize> = (0..200).map(|_| rng.gen_range(0..2)).collect();
        let sps = 8usize;
        let x = modulate(2, 0.5, None, &labels, sps as u32).unwrap();
        let levels = level_table(2);
        let mut expected = 0.0f64;
        for (k, &lab) in labels.iter().enumerate() {
            expected += PI * 0.5 * levels[lab];
            let got = x[(k + 1) * sps - 1].arg();
            let diff = (got - expected).rem_euclid(2.0 * PI);
            let diff = diff.min(2.0 * PI - diff);
            assert!(diff < 1e-9, "symbol {k}: phase {got} vs {expected}");
        }
    }

    #[test]
    fn gray_level_table_has_single_bit_neighbors() {
        for order in [2u32, 4, 8] {
            let levels = level_table(order);
            // Recover label order by level.
            let mut by_level: Vec<(i64, usize)> = levels
                .iter()
                .enumerate()
                .map(|(lab, &lv)| (lv as i64, lab))
                .collect();
            by_level.sort();
            for w in by_level.windows(2) {
                let x = w[0].1 ^ w[1].1;
                assert_eq!(x.count_ones(), 1, "order {order}: labels {w:?}");
            }
        }
    }
}

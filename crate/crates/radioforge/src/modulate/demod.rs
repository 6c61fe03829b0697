//! Reference demodulators used as oracles: on a clean loopback every
//! digital class must come back bit-exact.
//!
//! Linear classes use a matched filter plus decision-directed gain
//! tracking and explicit inter-symbol-interference cancellation (the
//! truncated pulse cascade is known exactly, so residual ISI can be
//! subtracted rather than tolerated). CPM classes run a full Viterbi
//! maximum-likelihood sequence detector on the phase trellis.
//! Multicarrier and OTFS classes invert their transforms exactly.

use num_complex::Complex64;

use super::constellation::{self, Constellation};
use super::{cpm, multicarrier, otfs, rrc};
use super::{constellation_for, inner_constellation, ModulationSpec};
use crate::error::{Error, Result};

/// Demodulates a clean baseband waveform back to bits. The bit count is
/// `n_symbols * bits_per_symbol`, matching what [`super::modulate`]
/// consumed (including any pad bits).
pub fn demodulate_bits(
    spec: &ModulationSpec,
    samples: &[Complex64],
    n_symbols: usize,
) -> Result<Vec<u8>> {
    let labels = demodulate_labels(spec, samples, n_symbols)?;
    let bps = spec.bits_per_symbol();
    Ok(constellation::labels_to_bits(&labels, bps))
}

/// Demodulates to symbol labels.
pub fn demodulate_labels(
    spec: &ModulationSpec,
    samples: &[Complex64],
    n_symbols: usize,
) -> Result<Vec<usize>> {
    match spec {
        ModulationSpec::Linear { family, order, sps, rolloff, span_symbols, .. } => {
            let table = constellation_for(*family, *order);
            let z = matched_filter_symbols(samples, *sps, *rolloff, *span_symbols, n_symbols);
            Ok(slice_with_isi_cancellation(&z, &table, *sps, *rolloff, *span_symbols).0)
        }
        ModulationSpec::Cpm { order, mod_index, bt, sps, .. } => {
            viterbi_cpm(samples, *order, *mod_index, *bt, *sps, n_symbols)
        }
        ModulationSpec::Multicarrier { kind, inner, fft_size, used_subcarriers, cp_len, .. } => {
            let table = inner_constellation(*inner);
            let z = multicarrier::demodulate(
                *kind,
                samples,
                *fft_size,
                *used_subcarriers,
                *cp_len,
                n_symbols,
            );
            Ok(slice_decision_directed(&z, &table))
        }
        ModulationSpec::Otfs { inner, delay_bins, doppler_bins, cp_len, .. } => {
            let table = inner_constellation(*inner);
            let z = otfs::demodulate(samples, *delay_bins, *doppler_bins, *cp_len, n_symbols);
            Ok(slice_decision_directed(&z, &table))
        }
        ModulationSpec::Analog { .. } => {
            Err(Error::signal("analog classes carry no symbol labels"))
        }
    }
}

/// Soft symbol estimates (after gain correction) for linear, multicarrier
/// and OTFS classes; handy for constellation plots.
pub fn soft_symbols(
    spec: &ModulationSpec,
    samples: &[Complex64],
    n_symbols: usize,
) -> Result<Vec<Complex64>> {
    match spec {
        ModulationSpec::Linear { family, order, sps, rolloff, span_symbols, .. } => {
            let table = constellation_for(*family, *order);
            let z = matched_filter_symbols(samples, *sps, *rolloff, *span_symbols, n_symbols);
            Ok(slice_with_isi_cancellation(&z, &table, *sps, *rolloff, *span_symbols).1)
        }
        ModulationSpec::Multicarrier { kind, inner, fft_size, used_subcarriers, cp_len, .. } => {
            let table = inner_constellation(*inner);
            let z = multicarrier::demodulate(
                *kind,
                samples,
                *fft_size,
                *used_subcarriers,
                *cp_len,
                n_symbols,
            );
            let labels = slice_decision_directed(&z, &table);
            let gain = refit_gain(&z, &labels, &table);
            Ok(z.iter().map(|v| v / gain).collect())
        }
        ModulationSpec::Otfs { inner, delay_bins, doppler_bins, cp_len, .. } => {
            let table = inner_constellation(*inner);
            let z = otfs::demodulate(samples, *delay_bins, *doppler_bins, *cp_len, n_symbols);
            let labels = slice_decision_directed(&z, &table);
            let gain = refit_gain(&z, &labels, &table);
            Ok(z.iter().map(|v| v / gain).collect())
        }
        _ => Err(Error::signal("soft symbols exist only for linear-symbol classes")),
    }
}

/// Matched-filters and samples at the symbol instants. The cascade of two
/// unit-energy root-raised-cosine filters peaks `span * sps` samples after
/// each symbol's first contribution.
fn matched_filter_symbols(
    samples: &[Complex64],
    sps: u32,
    rolloff: f64,
    span_symbols: u32,
    n_symbols: usize,
) -> Vec<Complex64> {
    let taps = rrc::taps(sps, span_symbols, rolloff);
    let sps = sps as usize;
    let delay = (span_symbols as usize) * sps;
    let mut y = vec![Complex64::new(0.0, 0.0); samples.len() + taps.len() - 1];
    for (k, s) in samples.iter().enumerate() {
        for (i, &h) in taps.iter().enumerate() {
            y[k + i] += s * h;
        }
    }
    (0..n_symbols)
        .map(|k| y.get(delay + k * sps).copied().unwrap_or_default())
        .collect()
}

fn refit_gain(z: &[Complex64], labels: &[usize], table: &Constellation) -> Complex64 {
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = 0.0f64;
    for (v, &l) in z.iter().zip(labels) {
        let s = table.points[l];
        num += v * s.conj();
        den += s.norm_sqr();
    }
    if den > 0.0 {
        num / den
    } else {
        Complex64::new(1.0, 0.0)
    }
}

/// Slices with gain acquisition followed by decision-directed tracking.
///
/// The moment estimate `sqrt(mean |z|^2)` is biased by the random symbol
/// draw (a few percent on short bursts), which is more than the decision
/// half-distance of dense QAM, and a decision-directed loop seeded with
/// many wrong outer-ring decisions drifts rather than converges. Scanning
/// candidate magnitudes around the moment estimate for the smallest total
/// slicing residual always lands inside the capture basin (about +-1% for
/// 4096-QAM), after which the refit converges in one or two passes.
fn slice_decision_directed(z: &[Complex64], table: &Constellation) -> Vec<usize> {
    let residual = |a: f64| -> f64 {
        z.iter()
            .map(|v| {
                let y = v / a;
                (y - table.points[table.slice(y)]).norm_sqr()
            })
            .sum()
    };
    let p: f64 = z.iter().map(|v| v.norm_sqr()).sum::<f64>() / z.len().max(1) as f64;
    let a0 = p.sqrt().max(1e-30);
    let mut best = (f64::INFINITY, a0);
    for step in -15..=15i32 {
        let a = a0 * (1.0 + 0.02 * f64::from(step));
        let r = residual(a);
        if r < best.0 {
            best = (r, a);
        }
    }
    let a1 = best.1;
    for step in -10..=10i32 {
        let a = a1 * (1.0 + 0.002 * f64::from(step));
        let r = residual(a);
        if r < best.0 {
            best = (r, a);
        }
    }
    let mut gain = Complex64::new(best.1, 0.0);
    let mut labels: Vec<usize> = Vec::new();
    for _ in 0..20 {
        let next: Vec<usize> = z.iter().map(|v| table.slice(v / gain)).collect();
        let stable = next == labels;
        labels = next;
        gain = refit_gain(z, &labels, table);
        if stable {
            break;
        }
    }
    labels
}

/// Decision-directed slicing with explicit ISI cancellation for the
/// truncated RRC cascade. `c[m]` below are the known residual cascade taps
/// at nonzero symbol offsets; each pass subtracts their contribution from
/// the current decisions and re-slices until stable. Returns the final
/// labels together with the corrected, gain-normalized soft symbols, which
/// land on the constellation points to rounding error once the decisions
/// are right.
fn slice_with_isi_cancellation(
    z: &[Complex64],
    table: &Constellation,
    sps: u32,
    rolloff: f64,
    span_symbols: u32,
) -> (Vec<usize>, Vec<Complex64>) {
    let taps = rrc::taps(sps, span_symbols, rolloff);
    let sps_us = sps as usize;
    // Cascade autocorrelation p = h (*) h, center at taps.len() - 1.
    let mut p = vec![0.0f64; 2 * taps.len() - 1];
    for (i, &a) in taps.iter().enumerate() {
        for (j, &b) in taps.iter().enumerate() {
            p[i + j] += a * b;
        }
    }
    let center = taps.len() - 1;
    let p0 = p[center];
    let span = span_symbols as i64;
    let isi: Vec<(i64, f64)> = (-span..=span)
        .filter(|&m| m != 0)
        .map(|m| (m, p[(center as i64 + m * sps_us as i64) as usize] / p0))
        .collect();

    let mut labels = slice_decision_directed(z, table);
    let mut soft: Vec<Complex64> = Vec::new();
    for _ in 0..20 {
        // Interference each symbol sees from its neighbors' decisions.
        let interference: Vec<Complex64> = (0..z.len())
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for &(m, c) in &isi {
                    let j = k as i64 - m;
                    if j >= 0 && (j as usize) < labels.len() {
                        acc += c * table.points[labels[j as usize]];
                    }
                }
                acc
            })
            .collect();
        // Fit the gain against the full reconstruction (decision plus
        // interference), not the decision alone: with correct labels this
        // makes the fit, and therefore the corrected symbols, exact rather
        // than biased by the empirical symbol autocorrelation.
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0f64;
        for ((v, &l), q) in z.iter().zip(&labels).zip(&interference) {
            let model = table.points[l] + q;
            num += v * model.conj();
            den += model.norm_sqr();
        }
        let gain = if den > 0.0 { num / den } else { Complex64::new(1.0, 0.0) };
        soft = z.iter().zip(&interference).map(|(v, q)| v / gain - q).collect();
        let next: Vec<usize> = soft.iter().map(|&v| table.slice(v)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    (labels, soft)
}

/// Viterbi maximum-likelihood sequence detection over the CPM phase
/// trellis. With modulation index 1/2 the accumulated phase of completed
/// pulses lives on four states; partial pulses add `M^(L-1)` history
/// states. Exact on clean waveforms because the branch set reproduces the
/// synthesis phase trajectories sample for sample.
fn viterbi_cpm(
    samples: &[Complex64],
    order: u32,
    mod_index: f64,
    bt: Option<f64>,
    sps: u32,
    n_symbols: usize,
) -> Result<Vec<usize>> {
    if (mod_index - 0.5).abs() > 1e-12 {
        return Err(Error::signal("the CPM detector assumes modulation index 1/2"));
    }
    let m = order as usize;
    let sps_us = sps as usize;
    let g = cpm::frequency_pulse(bt, sps);
    let l_sym = g.len() / sps_us;
    // Inclusive cumulative pulse integral, clamped to 1/2 past the end.
    let cum: Vec<f64> = g
        .iter()
        .scan(0.0, |acc, &v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    let cum_at = |n: i64| -> f64 {
        if n < 0 {
            0.0
        } else if (n as usize) < cum.len() {
            cum[n as usize]
        } else {
            0.5
        }
    };
    // Levels by position: 2p - (M - 1); label = gray(p).
    let level = |p: usize| (2 * p) as f64 - (m - 1) as f64;

    let n_hist = m.pow(l_sym as u32 - 1);
    let n_states = 4 * n_hist;
    let n_combo = n_hist * m; // history plus new symbol
    // Branch waveforms (phase-state-free): combo index = hist * M + new.
    let tau = 2.0 * std::f64::consts::PI * mod_index;
    let mut branch = vec![Complex64::new(0.0, 0.0); n_combo * sps_us];
    for hist in 0..n_hist {
        for new_p in 0..m {
            let combo = hist * m + new_p;
            for i in 0..sps_us {
                // Pulse ages: the new symbol is age 0, history symbol
                // hist_digit(0) is age 1, etc.
                let mut phi = level(new_p) * cum_at(i as i64);
                let mut h = hist;
                for age in 1..l_sym {
                    let p = h % m;
                    h /= m;
                    phi += level(p) * cum_at((age * sps_us + i) as i64);
                }
                branch[combo * sps_us + i] = Complex64::from_polar(1.0, tau * phi);
            }
        }
    }

    let neg_inf = f64::NEG_INFINITY;
    let mut metric = vec![neg_inf; n_states];
    // Synthesis starts at zero phase with no pulses in flight, so only
    // state (theta 0, empty history) is live initially. During the first
    // L - 1 intervals the history slots refer to symbols that never
    // existed; those intervals rebuild branch phases with only the pulses
    // actually in flight, and phase-state completions stay suppressed
    // until the first symbol really completes. Everything downstream of
    // start-up reads the precomputed branch table.
    let mut backptr = vec![0u32; n_symbols * n_states];
    // History digits are age-ordered: digit 0 is the symbol at age 1
    // (most recent), digit L - 2 the oldest pulse still in flight.
    let hist_digits = |hist: usize| -> Vec<usize> {
        let mut h = hist;
        (1..l_sym)
            .map(|_| {
                let p = h % m;
                h /= m;
                p
            })
            .collect()
    };
    metric[0] = 0.0;
    let mut scratch = vec![neg_inf; n_states];
    let rot = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, -1.0),
    ];
    for k in 0..n_symbols {
        let seg = &samples[k * sps_us..(k + 1) * sps_us];
        // Correlations per combo.
        let mut corr = vec![Complex64::new(0.0, 0.0); n_combo];
        if k + 1 >= l_sym {
            for (combo, c) in corr.iter_mut().enumerate() {
                let b = &branch[combo * sps_us..(combo + 1) * sps_us];
                *c = seg.iter().zip(b).map(|(r, bb)| r * bb.conj()).sum();
            }
        } else {
            // Start-up: ages beyond k have no pulse; rebuild exactly.
            for hist in 0..n_hist {
                let digits = hist_digits(hist);
                for new_p in 0..m {
                    let mut c = Complex64::new(0.0, 0.0);
                    for (i, r) in seg.iter().enumerate() {
                        let mut phi = level(new_p) * cum_at(i as i64);
                        for (age, &p) in digits.iter().enumerate() {
                            if age + 1 <= k {
                                phi += level(p) * cum_at(((age + 1) * sps_us + i) as i64);
                            }
                        }
                        c += r * Complex64::from_polar(1.0, -tau * phi);
                    }
                    corr[hist * m + new_p] = c;
                }
            }
        }
        scratch.iter_mut().for_each(|v| *v = neg_inf);
        for state in 0..n_states {
            if metric[state] == neg_inf {
                continue;
            }
            let theta = state / n_hist;
            let hist = state % n_hist;
            let digits = hist_digits(hist);
            for new_p in 0..m {
                let combo = hist * m + new_p;
                let gain = (rot[theta].conj() * corr[combo]).re;
                let cand = metric[state] + gain;
                // The completing pulse is the oldest history slot (or the
                // new symbol itself when L = 1). During start-up the slot
                // may predate the first symbol; treat it as level zero.
                let (completing, next_hist) = if l_sym == 1 {
                    (Some(new_p), 0usize)
                } else {
                    let oldest = digits[l_sym - 2];
                    let completing = if k >= l_sym - 1 { Some(oldest) } else { None };
                    // New history: the new symbol takes age 1, everything
                    // else ages by one, the oldest slot drops.
                    let mut rebuilt = new_p;
                    let mut mul = m;
                    for &p in digits.iter().take(l_sym - 2) {
                        rebuilt += p * mul;
                        mul *= m;
                    }
                    (completing, rebuilt)
                };
                let d_theta = match completing {
                    // Levels are odd; modulo-4 arithmetic in quarter turns.
                    Some(p) => {
                        let lv = 2 * p as i64 - (m as i64 - 1);
                        lv.rem_euclid(4) as usize
                    }
                    None => 0,
                };
                let next_state = ((theta + d_theta) % 4) * n_hist + next_hist;
                if cand > scratch[next_state] {
                    scratch[next_state] = cand;
                    backptr[k * n_states + next_state] = (state * m + new_p) as u32;
                }
            }
        }
        std::mem::swap(&mut metric, &mut scratch);
    }

    // Tail: L-1 intervals where the remaining pulses complete with no new
    // symbol. Deterministic per state; add their correlation to the metric.
    if l_sym > 1 {
        let tail_len = (l_sym - 1) * sps_us;
        let tail = &samples[n_symbols * sps_us..n_symbols * sps_us + tail_len];
        for state in 0..n_states {
            if metric[state] == neg_inf {
                continue;
            }
            let theta = state / n_hist;
            let digits = hist_digits(state % n_hist);
            let mut c = 0.0;
            for u in 0..l_sym - 1 {
                for i in 0..sps_us {
                    let mut phi = 0.0;
                    for (age, &p) in digits.iter().enumerate() {
                        // At tail interval u, the pulse of history age a
                        // has aged to a + 1 + u.
                        phi += level(p) * cum_at(((age + 1 + u) * sps_us + i) as i64);
                    }
                    let b = Complex64::from_polar(1.0, tau * phi) * rot[theta];
                    c += (tail[u * sps_us + i] * b.conj()).re;
                }
            }
            metric[state] += c;
        }
    }

    let best = metric
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(s, _)| s)
        .unwrap();
    let mut positions = vec![0usize; n_symbols];
    let mut state = best;
    for k in (0..n_symbols).rev() {
        let bp = backptr[k * n_states + state] as usize;
        positions[k] = bp % m;
        state = bp / m;
    }
    Ok(positions.iter().map(|&p| constellation::gray(p)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modulate::{modulate, registry, Payload};
    use rand::Rng;

    fn loopback(entry: &registry::RegistryEntry, n_bits: usize, seed: u64) -> (Vec<u8>, Vec<u8>) {
        let spec = entry.spec(40e3, 0.35);
        let bps = spec.bits_per_symbol() as usize;
        let mut rng = crate::rng::derive_stream(seed, "demod-loopback");
        let bits: Vec<u8> = (0..n_bits).map(|_| rng.gen_range(0..2u8)).collect();
        let wave = modulate(&spec, Payload::Bits(&bits)).unwrap();
        let n_symbols = n_bits.div_ceil(bps);
        let got = demodulate_bits(&spec, &wave.samples, n_symbols).unwrap();
        (bits, got[..n_bits].to_vec())
    }

    #[test]
    fn linear_classes_loop_back_bit_exact() {
        for name in ["OOK", "16ASK", "64PSK", "16QAM", "512QAM", "4096QAM", "MIL188-64QAM"] {
            let entry = registry::by_name(name).unwrap();
            let (tx, rx) = loopback(entry, 3000, 17);
            assert_eq!(tx, rx, "{name}");
        }
    }

    #[test]
    fn cpm_classes_loop_back_bit_exact() {
        for name in ["2FSK", "8FSK", "4GFSK", "2CPFSK", "MSK", "GMSK"] {
            let entry = registry::by_name(name).unwrap();
            let (tx, rx) = loopback(entry, 1200, 19);
            assert_eq!(tx, rx, "{name}");
        }
    }

    #[test]
    fn multicarrier_classes_loop_back_bit_exact() {
        for name in ["OFDM-4PSK", "SCFDMA-16QAM", "OTFS-64QAM", "OFDM-4096QAM"] {
            let entry = registry::by_name(name).unwrap();
            let (tx, rx) = loopback(entry, 2400, 21);
            assert_eq!(tx, rx, "{name}");
        }
    }

    #[test]
    fn soft_symbols_sit_on_constellation_points() {
        let entry = registry::by_name("16QAM").unwrap();
        let spec = entry.spec(40e3, 0.3);
        let mut rng = crate::rng::derive_stream(33, "demod-soft");
        let bits: Vec<u8> = (0..1600).map(|_| rng.gen_range(0..2u8)).collect();
        let wave = modulate(&spec, Payload::Bits(&bits)).unwrap();
        let soft = soft_symbols(&spec, &wave.samples, 400).unwrap();
        let table = crate::modulate::constellation::Constellation::qam(16);
        for v in &soft {
            let l = table.slice(*v);
            assert!((v - table.points[l]).norm() < 1e-6);
        }
    }
}

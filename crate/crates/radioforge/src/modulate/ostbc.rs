//! Orthogonal space-time block codes for multi-antenna transmitters.
//!
//! Two antennas use the rate-1 Alamouti code; three and four antennas use
//! the rate-3/4 complex orthogonal designs. Every code satisfies
//! `G^H G = (sum |s_i|^2) I`, so a matched-filter combiner recovers the
//! symbols exactly under any flat channel.

use num_complex::Complex64;

/// One cell of a code matrix: `coeff * s[sym]`, conjugated when `conj`.
#[derive(Debug, Clone, Copy)]
struct Entry {
    coeff: f64,
    sym: usize,
    conj: bool,
}

struct Code {
    n_tx: usize,
    /// Symbols consumed per block.
    block_syms: usize,
    /// Time slots emitted per block.
    block_times: usize,
    /// `cells[t][a]`.
    cells: Vec<Vec<Option<Entry>>>,
}

fn e(coeff: f64, sym: usize, conj: bool) -> Option<Entry> {
    Some(Entry { coeff, sym, conj })
}

fn code(n_tx: usize) -> Code {
    match n_tx {
        2 => Code {
            n_tx,
            block_syms: 2,
            block_times: 2,
            cells: vec![
                vec![e(1.0, 0, false), e(1.0, 1, false)],
                vec![e(-1.0, 1, true), e(1.0, 0, true)],
            ],
        },
        3 => Code {
            n_tx,
            block_syms: 3,
            block_times: 4,
            cells: vec![
                vec![e(1.0, 0, false), e(1.0, 1, false), e(1.0, 2, false)],
                vec![e(-1.0, 1, true), e(1.0, 0, true), None],
                vec![e(-1.0, 2, true), None, e(1.0, 0, true)],
                vec![None, e(-1.0, 2, true), e(1.0, 1, true)],
            ],
        },
        4 => Code {
            n_tx,
            block_syms: 3,
            block_times: 4,
            cells: vec![
                vec![e(1.0, 0, false), e(1.0, 1, false), e(1.0, 2, false), None],
                vec![e(-1.0, 1, true), e(1.0, 0, true), None, e(1.0, 2, false)],
                vec![e(-1.0, 2, true), None, e(1.0, 0, true), e(-1.0, 1, false)],
                vec![None, e(-1.0, 2, true), e(1.0, 1, true), e(1.0, 0, false)],
            ],
        },
        _ => panic!("OSTBC codes exist for 2-4 antennas, not {n_tx}"),
    }
}

/// Symbols each antenna transmits for `n` input symbols with `n_tx`
/// antennas (time expansion of the rate-3/4 codes included).
pub fn encoded_len(n: usize, n_tx: usize) -> usize {
    if n_tx <= 1 {
        return n;
    }
    let c = code(n_tx);
    n.div_ceil(c.block_syms) * c.block_times
}

/// Largest symbol count whose encoding fits in `n_slots` per-antenna
/// symbol slots: the inverse of [`encoded_len`] for scheduling, where the
/// time budget is fixed and the payload must shrink to fit.
pub fn max_symbols_for_slots(n_slots: usize, n_tx: usize) -> usize {
    if n_tx <= 1 {
        return n_slots;
    }
    let c = code(n_tx);
    (n_slots / c.block_times) * c.block_syms
}

/// Encodes a symbol stream into `n_tx` per-antenna streams. The final
/// block is zero-padded. `n_tx = 1` returns the stream unchanged.
pub fn encode(symbols: &[Complex64], n_tx: usize) -> Vec<Vec<Complex64>> {
    if n_tx <= 1 {
        return vec![symbols.to_vec()];
    }
    let c = code(n_tx);
    let n_blocks = symbols.len().div_ceil(c.block_syms);
    let mut out = vec![vec![Complex64::new(0.0, 0.0); n_blocks * c.block_times]; c.n_tx];
    for b in 0..n_blocks {
        let s: Vec<Complex64> = (0..c.block_syms)
            .map(|i| symbols.get(b * c.block_syms + i).copied().unwrap_or_default())
            .collect();
        for (t, row) in c.cells.iter().enumerate() {
            for (a, cell) in row.iter().enumerate() {
                if let Some(entry) = cell {
                    let v = if entry.conj { s[entry.sym].conj() } else { s[entry.sym] };
                    out[a][b * c.block_times + t] = entry.coeff * v;
                }
            }
        }
    }
    out
}

/// Matched-filter decoder for symbol-spaced receive streams `y[rx][t]`
/// under known flat channel gains `h[rx][tx]`. Exact for any channel by
/// code orthogonality. Returns `n_symbols` symbol estimates.
pub fn decode(
    y: &[Vec<Complex64>],
    h: &[Vec<Complex64>],
    n_tx: usize,
    n_symbols: usize,
) -> Vec<Complex64> {
    if n_tx <= 1 {
        // Maximum-ratio combining across receive antennas.
        let norm: f64 = h.iter().map(|row| row[0].norm_sqr()).sum();
        let mut out = vec![Complex64::new(0.0, 0.0); n_symbols];
        for (r, stream) in y.iter().enumerate() {
            for (t, v) in stream.iter().take(n_symbols).enumerate() {
                out[t] += h[r][0].conj() * v / norm;
            }
        }
        return out;
    }
    let c = code(n_tx);
    let n_blocks = y[0].len() / c.block_times;
    let mut out = Vec::with_capacity(n_blocks * c.block_syms);
    for b in 0..n_blocks {
        for k in 0..c.block_syms {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut norm = 0.0f64;
            for (t, row) in c.cells.iter().enumerate() {
                for (a, cell) in row.iter().enumerate() {
                    let Some(entry) = cell else { continue };
                    if entry.sym != k {
                        continue;
                    }
                    for (r, stream) in y.iter().enumerate() {
                        let yv = stream[b * c.block_times + t];
                        let hv = h[r][a];
                        if entry.conj {
                            acc += entry.coeff * hv * yv.conj();
                        } else {
                            acc += entry.coeff * hv.conj() * yv;
                        }
                        norm += hv.norm_sqr();
                    }
                }
            }
            out.push(acc / norm);
        }
    }
    out.truncate(n_symbols);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn random_symbols(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = crate::rng::derive_stream(seed, "ostbc-test");
        let normal = Normal::new(0.0, 1.0).unwrap();
        (0..n)
            .map(|_| Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
            .collect()
    }

    /// G^H G must equal (sum |s_i|^2) I for a random symbol block.
    #[test]
    fn code_matrices_are_orthogonal() {
        for n_tx in [2usize, 3, 4] {
            let c = code(n_tx);
            let s = random_symbols(c.block_syms, n_tx as u64);
            let g = encode(&s, n_tx);
            let energy: f64 = s.iter().map(|v| v.norm_sqr()).sum();
            for a in 0..n_tx {
                for b in 0..n_tx {
                    let dot: Complex64 = (0..c.block_times)
                        .map(|t| g[a][t].conj() * g[b][t])
                        .sum();
                    let want = if a == b { energy } else { 0.0 };
                    assert!(
                        (dot - want).norm() < 1e-12,
                        "n_tx {n_tx}: column ({a},{b}) dot {dot}"
                    );
                }
            }
        }
    }

    #[test]
    fn decode_inverts_encode_under_random_flat_channels() {
        let mut rng = crate::rng::derive_stream(42, "ostbc-chan");
        let normal = Normal::new(0.0, 1.0).unwrap();
        for n_tx in [1usize, 2, 3, 4] {
            for n_rx in [1usize, 2] {
                let s = random_symbols(30, (n_tx * 10 + n_rx) as u64);
                let g = encode(&s, n_tx);
                let h: Vec<Vec<Complex64>> = (0..n_rx)
                    .map(|_| {
                        (0..n_tx)
                            .map(|_| Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
                            .collect()
                    })
                    .collect();
                let y: Vec<Vec<Complex64>> = (0..n_rx)
                    .map(|r| {
                        (0..g[0].len())
                            .map(|t| (0..n_tx).map(|a| h[r][a] * g[a][t]).sum())
                            .collect()
                    })
                    .collect();
                let est = decode(&y, &h, n_tx, s.len());
                for (i, (a, b)) in est.iter().zip(&s).enumerate() {
                    assert!((a - b).norm() < 1e-10, "n_tx {n_tx} n_rx {n_rx} sym {i}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn encoded_len_matches_encode_output() {
        for n_tx in [1usize, 2, 3, 4] {
            for n in [1usize, 2, 3, 7, 30, 31] {
                let s = random_symbols(n, 77);
                let g = encode(&s, n_tx);
                assert_eq!(g.len(), n_tx.max(1));
                assert_eq!(g[0].len(), encoded_len(n, n_tx), "n {n} n_tx {n_tx}");
            }
        }
    }

    #[test]
    fn slot_fitting_is_tight() {
        for n_tx in [1usize, 2, 3, 4] {
            for n_slots in [1usize, 2, 3, 4, 5, 500, 501, 502, 503, 2000] {
                let k = max_symbols_for_slots(n_slots, n_tx);
                assert!(encoded_len(k, n_tx) <= n_slots || k == 0, "n_tx {n_tx} slots {n_slots}");
                // One more symbol would not fit.
                assert!(encoded_len(k + 1, n_tx) > n_slots, "n_tx {n_tx} slots {n_slots}");
            }
        }
    }

    #[test]
    fn bad_antenna_count_panics() {
        let result = std::panic::catch_unwind(|| code(5));
        assert!(result.is_err());
    }
}

//! Root-raised-cosine pulse shaping.
//!
//! Closed-form impulse response in symbol-time units:
//!
//!   h(t) = [sin(pi t (1-b)) + 4 b t cos(pi t (1+b))] / [pi t (1 - (4 b t)^2)]
//!
//! with removable singularities at t = 0 and |t| = 1/(4b). The returned
//! taps are normalized to unit energy, so a matched cascade (tx + rx
//! filter) has a unit-gain Nyquist response.

/// Filter taps: `span_symbols * sps + 1` values, symmetric, unit energy.
pub fn taps(sps: u32, span_symbols: u32, beta: f64) -> Vec<f64> {
    assert!(sps >= 2, "need at least two samples per symbol");
    assert!(span_symbols >= 2 && span_symbols % 2 == 0, "span must be even");
    assert!((0.0..=1.0).contains(&beta), "rolloff must lie in [0, 1]");
    let n = (span_symbols * sps + 1) as usize;
    let half = (n - 1) as f64 / 2.0;
    let mut h = Vec::with_capacity(n);
    for i in 0..n {
        let t = (i as f64 - half) / sps as f64;
        h.push(value_at(t, beta));
    }
    let energy: f64 = h.iter().map(|v| v * v).sum();
    let scale = 1.0 / energy.sqrt();
    for v in &mut h {
        *v *= scale;
    }
    h
}

fn value_at(t: f64, beta: f64) -> f64 {
    let pi = std::f64::consts::PI;
    if t.abs() < 1e-10 {
        return 1.0 - beta + 4.0 * beta / pi;
    }
    if beta > 0.0 && (t.abs() - 1.0 / (4.0 * beta)).abs() < 1e-10 {
        let a = (1.0 + 2.0 / pi) * (pi / (4.0 * beta)).sin();
        let b = (1.0 - 2.0 / pi) * (pi / (4.0 * beta)).cos();
        return beta / std::f64::consts::SQRT_2 * (a + b);
    }
    let num = (pi * t * (1.0 - beta)).sin() + 4.0 * beta * t * (pi * t * (1.0 + beta)).cos();
    let den = pi * t * (1.0 - (4.0 * beta * t) * (4.0 * beta * t));
    num / den
}

//! Constellation tables with Gray (or quasi-Gray) bit labels.
//!
//! `points[label]` is the complex point transmitted for bit pattern
//! `label`, so modulation is a table lookup and slicing is a nearest-point
//! search over the same table. Every table is normalized to exactly unit
//! mean power under equiprobable symbols.
//!
//! Geometries: PSK on the unit circle; square QAM for even powers of two;
//! cross QAM (corner-clipped square) for odd powers above 8; 8-QAM as the
//! 4x2 rectangle; M-ASK as bipolar amplitude levels; 2-ASK as the on-off
//! pair. Square QAM, rectangular QAM, ASK and PSK are strictly Gray-coded;
//! cross QAM uses a quasi-Gray order (corner clipping makes a perfect Gray
//! map impossible).

use num_complex::Complex64;

/// Binary-reflected Gray code.
pub fn gray(n: usize) -> usize {
    n ^ (n >> 1)
}

/// Rectangular-grid geometry that allows O(1) nearest-point slicing by
/// rounding each axis independently. `half_step` is half the distance
/// between adjacent points after unit-power normalization.
#[derive(Debug, Clone, Copy)]
struct RectGrid {
    cols: u32,
    rows: u32,
    row_bits: u32,
    half_step: f64,
}

#[derive(Debug, Clone)]
pub struct Constellation {
    /// Point for each bit label; length is the modulation order.
    pub points: Vec<Complex64>,
    pub bits_per_symbol: u32,
    grid: Option<RectGrid>,
}

impl Constellation {
    fn from_points(points: Vec<Complex64>) -> Self {
        assert!(points.len().is_power_of_two(), "order must be a power of two");
        let bits_per_symbol = points.len().trailing_zeros();
        let mut c = Constellation { points, bits_per_symbol, grid: None };
        c.normalize();
        c
    }

    fn normalize(&mut self) {
        let p: f64 =
            self.points.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.points.len() as f64;
        let scale = 1.0 / p.sqrt();
        for s in &mut self.points {
            *s *= scale;
        }
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    /// Index of the nearest constellation point (its bit label).
    pub fn slice(&self, y: Complex64) -> usize {
        if let Some(g) = self.grid {
            let i = ((y.re / g.half_step + (g.cols as f64 - 1.0)) / 2.0)
                .round()
                .clamp(0.0, g.cols as f64 - 1.0) as usize;
            let j = ((y.im / g.half_step + (g.rows as f64 - 1.0)) / 2.0)
                .round()
                .clamp(0.0, g.rows as f64 - 1.0) as usize;
            return (gray(i) << g.row_bits) | gray(j);
        }
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (y - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// M-ary phase shift keying, Gray labeled around the circle.
    pub fn psk(order: u32) -> Self {
        assert!(order >= 2 && order.is_power_of_two());
        let mut points = vec![Complex64::default(); order as usize];
        for k in 0..order {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / order as f64;
            points[gray(k as usize)] = Complex64::from_polar(1.0, angle);
        }
        Constellation::from_points(points)
    }

    /// Bipolar M-ASK (M >= 4) or the unipolar on-off pair for M = 2.
    pub fn ask(order: u32) -> Self {
        assert!(order >= 2 && order.is_power_of_two());
        if order == 2 {
            // On-off keying: average power 1 with equiprobable bits.
            return Constellation {
                points: vec![Complex64::new(0.0, 0.0), Complex64::new(std::f64::consts::SQRT_2, 0.0)],
                bits_per_symbol: 1,
                grid: None,
            };
        }
        let mut points = vec![Complex64::default(); order as usize];
        for k in 0..order {
            let level = 2.0 * k as f64 - (order as f64 - 1.0);
            points[gray(k as usize)] = Complex64::new(level, 0.0);
        }
        Constellation::from_points(points)
    }

    /// Quadrature amplitude modulation for orders 8 through 4096.
    ///
    /// Even powers of two give the square grid with an independent Gray
    /// code per axis. 8-QAM is the 4x2 rectangle. Remaining odd powers of
    /// two give the cross constellation: a 3*2^(k-1) square with
    /// 2^(k-2)-sized corners removed.
    pub fn qam(order: u32) -> Self {
        assert!(order >= 8 && order <= 4096 && order.is_power_of_two());
        let bits = order.trailing_zeros();
        if bits % 2 == 0 {
            return Self::rect_qam(1 << (bits / 2), 1 << (bits / 2));
        }
        if order == 8 {
            return Self::rect_qam(4, 2);
        }
        Self::cross_qam(order)
    }

    /// Rectangular grid, Gray code split across the I and Q axes.
    fn rect_qam(cols: u32, rows: u32) -> Self {
        let order = cols * rows;
        let row_bits = rows.trailing_zeros();
        let mut points = vec![Complex64::default(); order as usize];
        for i in 0..cols {
            for j in 0..rows {
                let x = 2.0 * i as f64 - (cols as f64 - 1.0);
                let y = 2.0 * j as f64 - (rows as f64 - 1.0);
                let label = (gray(i as usize) << row_bits) | gray(j as usize);
                points[label] = Complex64::new(x, y);
            }
        }
        let mut c = Constellation::from_points(points);
        // Raw grid coordinates are odd integers, so the per-axis second
        // moments are (n^2 - 1) / 3 and normalization shrinks a raw unit
        // to exactly this factor.
        let raw_power =
            ((cols as f64).powi(2) - 1.0 + (rows as f64).powi(2) - 1.0) / 3.0;
        c.grid = Some(RectGrid { cols, rows, row_bits, half_step: 1.0 / raw_power.sqrt() });
        c
    }

    fn cross_qam(order: u32) -> Self {
        // order = 2^(2k+1), k >= 2: outer side 3 * 2^(k-1), corner 2^(k-2).
        let k = (order.trailing_zeros() - 1) / 2;
        let side = 3 * (1 << (k - 1)) as i64;
        let corner = (1 << (k - 2)) as i64;
        let mut coords = Vec::with_capacity(order as usize);
        for i in 0..side {
            for j in 0..side {
                let in_corner = (i < corner || i >= side - corner) && (j < corner || j >= side - corner);
                if !in_corner {
                    coords.push((i, j));
                }
            }
        }
        assert_eq!(coords.len(), order as usize, "cross construction for {order}");
        // Quasi-Gray: Gray-code the enumeration index. Column-major order
        // keeps most adjacent labels on adjacent grid points.
        let mut points = vec![Complex64::default(); order as usize];
        for (idx, (i, j)) in coords.iter().enumerate() {
            let x = 2.0 * *i as f64 - (side as f64 - 1.0);
            let y = 2.0 * *j as f64 - (side as f64 - 1.0);
            points[gray(idx)] = Complex64::new(x, y);
        }
        Constellation::from_points(points)
    }
}

/// Packs a bit slice (values 0/1, MSB first per symbol) into symbol labels.
/// The tail is zero-padded to a whole symbol.
pub fn bits_to_labels(bits: &[u8], bits_per_symbol: u32) -> Vec<usize> {
    let bps = bits_per_symbol as usize;
    let n_sym = bits.len().div_ceil(bps);
    let mut out = Vec::with_capacity(n_sym);
    for s in 0..n_sym {
        let mut label = 0usize;
        for b in 0..bps {
            let bit = bits.get(s * bps + b).copied().unwrap_or(0);
            debug_assert!(bit <= 1);
            label = (label << 1) | bit as usize;
        }
        out.push(label);
    }
    out
}

/// Inverse of [`bits_to_labels`].
pub fn labels_to_bits(labels: &[usize], bits_per_symbol: u32) -> Vec<u8> {
    let bps = bits_per_symbol as usize;
    let mut out = Vec::with_capacity(labels.len() * bps);
    for &label in labels {
        for b in (0..bps).rev() {
            out.push(((label >> b) & 1) as u8);
        }
    }
    out
}

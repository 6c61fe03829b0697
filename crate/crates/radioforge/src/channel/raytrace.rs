//! Site-specific multipath over building geometry via the image method.
//!
//! Buildings come from OpenStreetMap extracts: ways tagged `building`
//! become 2.5D prisms (vertical facades extruded from the footprint, flat
//! ground at z = 0). Propagation paths between a transmitter and receiver
//! are the unobstructed line of sight plus first- and second-order facade
//! reflections found by mirroring the transmitter across candidate facade
//! planes. Each ray carries a Friis amplitude lambda / (4 pi L), one
//! reflection-coefficient factor per bounce, and the carrier phase
//! -2 pi L / lambda, so a ray set converts directly into a static
//! [`ChannelRealization`]. A coverage map samples the traced power over a
//! grid of receiver positions.
//!
//! Geometry is deliberately 2.5D: facades are vertical planes, rooftop
//! reflections and diffraction are out of scope, and lat/lon project to
//! local ENU meters with an equirectangular tangent plane (fine for scenes
//! a couple of kilometers across).

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ChannelProvenance, ChannelRealization, TapProcess, SPEED_OF_LIGHT_M_S};
use crate::error::{Error, Result};

/// Default building height when OSM provides no height information, m.
pub const DEFAULT_BUILDING_HEIGHT_M: f64 = 10.0;

/// Meters of height per building level for `building:levels` tags.
pub const METERS_PER_LEVEL: f64 = 3.0;

/// Mean Earth radius used by the tangent-plane projection, m.
const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Tolerance for occlusion tests near segment endpoints (reflection points
/// sit exactly on their facade).
const GEOM_EPS: f64 = 1.0e-9;

/// One extruded building.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Building {
    /// Footprint vertices in ENU meters, closed implicitly (no repeated
    /// last vertex).
    pub footprint: Vec<[f64; 2]>,
    pub height_m: f64,
}

/// Building geometry in a local east-north frame with ground at z = 0.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OsmScene {
    pub buildings: Vec<Building>,
    pub min_xy: [f64; 2],
    pub max_xy: [f64; 2],
}

impl OsmScene {
    /// Build a scene directly from footprints (synthetic test scenes).
    pub fn from_buildings(buildings: Vec<Building>) -> Self {
        let mut min_xy = [f64::INFINITY; 2];
        let mut max_xy = [f64::NEG_INFINITY; 2];
        for b in &buildings {
            for v in &b.footprint {
                for k in 0..2 {
                    min_xy[k] = min_xy[k].min(v[k]);
                    max_xy[k] = max_xy[k].max(v[k]);
                }
            }
        }
        if buildings.is_empty() {
            min_xy = [0.0; 2];
            max_xy = [0.0; 2];
        }
        OsmScene {
            buildings,
            min_xy,
            max_xy,
        }
    }

    /// All vertical facades in the scene.
    fn facades(&self) -> Vec<Facade> {
        let mut out = Vec::new();
        for b in &self.buildings {
            let n = b.footprint.len();
            for i in 0..n {
                let a = b.footprint[i];
                let c = b.footprint[(i + 1) % n];
                if (a[0] - c[0]).abs() < GEOM_EPS && (a[1] - c[1]).abs() < GEOM_EPS {
                    continue;
                }
                out.push(Facade {
                    a,
                    b: c,
                    height: b.height_m,
                });
            }
        }
        out
    }
}

/// One vertical wall rectangle: the segment a-b extruded from 0 to height.
#[derive(Debug, Clone, Copy)]
struct Facade {
    a: [f64; 2],
    b: [f64; 2],
    height: f64,
}

impl Facade {
    /// Unit normal of the facade's vertical plane (2D).
    fn normal(&self) -> [f64; 2] {
        let dx = self.b[0] - self.a[0];
        let dy = self.b[1] - self.a[1];
        let len = (dx * dx + dy * dy).sqrt();
        [-dy / len, dx / len]
    }

    /// Signed distance of a point from the facade plane.
    fn signed_distance(&self, p: [f64; 3]) -> f64 {
        let n = self.normal();
        (p[0] - self.a[0]) * n[0] + (p[1] - self.a[1]) * n[1]
    }

    /// Mirror a point across the facade's vertical plane (z unchanged).
    fn mirror(&self, p: [f64; 3]) -> [f64; 3] {
        let n = self.normal();
        let d = self.signed_distance(p);
        [p[0] - 2.0 * d * n[0], p[1] - 2.0 * d * n[1], p[2]]
    }

    /// Intersection of segment p->q with the facade plane, if the crossing
    /// parameter lies strictly inside (0, 1). Returns (point, t).
    fn plane_crossing(&self, p: [f64; 3], q: [f64; 3]) -> Option<([f64; 3], f64)> {
        let dp = self.signed_distance(p);
        let dq = self.signed_distance(q);
        let denom = dp - dq;
        if denom.abs() < GEOM_EPS {
            return None;
        }
        let t = dp / denom;
        if !(t > GEOM_EPS && t < 1.0 - GEOM_EPS) {
            return None;
        }
        Some((lerp3(p, q, t), t))
    }

    /// True when the 3D point (assumed on the plane) lies on the wall
    /// rectangle.
    fn contains(&self, p: [f64; 3]) -> bool {
        let dx = self.b[0] - self.a[0];
        let dy = self.b[1] - self.a[1];
        let len_sq = dx * dx + dy * dy;
        let s = ((p[0] - self.a[0]) * dx + (p[1] - self.a[1]) * dy) / len_sq;
        s >= 0.0 && s <= 1.0 && p[2] > 0.0 && p[2] < self.height
    }
}

fn lerp3(p: [f64; 3], q: [f64; 3], t: f64) -> [f64; 3] {
    [
        p[0] + t * (q[0] - p[0]),
        p[1] + t * (q[1] - p[1]),
        p[2] + t * (q[2] - p[2]),
    ]
}

fn dist3(p: [f64; 3], q: [f64; 3]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
}

/// One propagation path.
#[derive(Debug, Clone)]
pub struct Ray {
    /// Path vertices from transmitter to receiver, ENU meters.
    pub vertices: Vec<[f64; 3]>,
    /// Number of facade reflections along the path.
    pub bounces: usize,
    pub length_m: f64,
    /// Complex amplitude: Friis factor, reflection coefficients, and the
    /// carrier phase of the path length.
    pub gain: Complex64,
    pub delay_s: f64,
    /// Departure direction at the transmitter (azimuth, elevation), rad.
    pub aod_rad: (f64, f64),
    /// Propagation direction at the receiver (azimuth, elevation), rad.
    pub aoa_rad: (f64, f64),
}

/// Tracing controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceOptions {
    /// Maximum facade reflections per path (0, 1, or 2).
    pub max_reflections: usize,
    /// Amplitude reflection coefficient applied per bounce.
    pub reflection_coeff: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            max_reflections: 2,
            reflection_coeff: -0.7,
        }
    }
}

/// Parse an OpenStreetMap XML extract into building prisms.
///
/// Ways tagged `building` close into footprints; heights come from the
/// `height` tag, else `building:levels` times 3 m, else a 10 m default.
/// Unclosed building ways are skipped with a warning. Coordinates project
/// onto a local tangent plane centered on the mean of the referenced nodes.
pub fn parse_osm(xml: &str) -> Result<OsmScene> {
    let doc = roxmltree::Document::parse(xml)
        .map_err(|e| Error::config(format!("malformed OSM XML: {e}")))?;
    let root = doc.root_element();

    let mut nodes = std::collections::HashMap::new();
    for node in root.children().filter(|n| n.has_tag_name("node")) {
        let (Some(id), Some(lat), Some(lon)) = (
            node.attribute("id"),
            node.attribute("lat").and_then(|v| v.parse::<f64>().ok()),
            node.attribute("lon").and_then(|v| v.parse::<f64>().ok()),
        ) else {
            continue;
        };
        nodes.insert(id.to_string(), (lat, lon));
    }

    struct RawWay {
        refs: Vec<String>,
        height: f64,
    }
    let mut ways = Vec::new();
    for way in root.children().filter(|n| n.has_tag_name("way")) {
        let mut is_building = false;
        let mut height = None;
        let mut levels = None;
        for tag in way.children().filter(|n| n.has_tag_name("tag")) {
            match (tag.attribute("k"), tag.attribute("v")) {
                (Some("building"), Some(v)) if v != "no" => is_building = true,
                (Some("height"), Some(v)) => {
                    height = v
                        .trim()
                        .trim_end_matches(|c: char| c.is_alphabetic() || c.is_whitespace())
                        .parse::<f64>()
                        .ok();
                }
                (Some("building:levels"), Some(v)) => levels = v.trim().parse::<f64>().ok(),
                _ => {}
            }
        }
        if !is_building {
            continue;
        }
        let refs: Vec<String> = way
            .children()
            .filter(|n| n.has_tag_name("nd"))
            .filter_map(|n| n.attribute("ref").map(str::to_string))
            .collect();
        if refs.len() < 4 || refs.first() != refs.last() {
            log::warn!("skipping unclosed building way with {} node refs", refs.len());
            continue;
        }
        let height_m = height
            .or(levels.map(|l| l * METERS_PER_LEVEL))
            .unwrap_or(DEFAULT_BUILDING_HEIGHT_M);
        if height_m <= 0.0 {
            log::warn!("skipping building with non-positive height {height_m}");
            continue;
        }
        ways.push(RawWay {
            refs,
            height: height_m,
        });
    }

    // Project about the centroid of every node referenced by a building.
    let used: Vec<(f64, f64)> = ways
        .iter()
        .flat_map(|w| w.refs.iter())
        .filter_map(|r| nodes.get(r).copied())
        .collect();
    if used.is_empty() {
        return Ok(OsmScene::from_buildings(Vec::new()));
    }
    let lat0 = used.iter().map(|p| p.0).sum::<f64>() / used.len() as f64;
    let lon0 = used.iter().map(|p| p.1).sum::<f64>() / used.len() as f64;
    let project = |lat: f64, lon: f64| -> [f64; 2] {
        [
            (lon - lon0).to_radians() * lat0.to_radians().cos() * EARTH_RADIUS_M,
            (lat - lat0).to_radians() * EARTH_RADIUS_M,
        ]
    };

    let mut buildings = Vec::new();
    for way in ways {
        // Drop the closing duplicate vertex.
        let footprint: Vec<[f64; 2]> = way.refs[..way.refs.len() - 1]
            .iter()
            .filter_map(|r| nodes.get(r).map(|&(lat, lon)| project(lat, lon)))
            .collect();
        if footprint.len() < 3 {
            log::warn!("skipping building way with unresolved node refs");
            continue;
        }
        buildings.push(Building {
            footprint,
            height_m: way.height,
        });
    }
    Ok(OsmScene::from_buildings(buildings))
}

/// True when segment p->q is blocked by any facade. Crossings within
/// `skip_near` of either endpoint are ignored so reflection points do not
/// occlude their own segments.
fn segment_blocked(facades: &[Facade], p: [f64; 3], q: [f64; 3]) -> bool {
    for f in facades {
        if let Some((point, _t)) = f.plane_crossing(p, q) {
            if f.contains(point) {
                return true;
            }
        }
    }
    false
}

fn direction_angles(from: [f64; 3], to: [f64; 3]) -> (f64, f64) {
    let dx = to[0] - from[0];
    let dy = to[1] - from[1];
    let dz = to[2] - from[2];
    (dy.atan2(dx), dz.atan2((dx * dx + dy * dy).sqrt()))
}

fn build_ray(
    vertices: Vec<[f64; 3]>,
    carrier_hz: f64,
    reflection_coeff: f64,
) -> Ray {
    let length: f64 = vertices.windows(2).map(|w| dist3(w[0], w[1])).sum();
    let bounces = vertices.len() - 2;
    let lambda = SPEED_OF_LIGHT_M_S / carrier_hz;
    let amplitude = lambda / (4.0 * std::f64::consts::PI * length)
        * reflection_coeff.powi(bounces as i32);
    let phase = -std::f64::consts::TAU * length / lambda;
    let n = vertices.len();
    Ray {
        aod_rad: direction_angles(vertices[0], vertices[1]),
        aoa_rad: direction_angles(vertices[n - 2], vertices[n - 1]),
        bounces,
        length_m: length,
        gain: Complex64::from_polar(amplitude.abs(), phase)
            * if amplitude < 0.0 { -1.0 } else { 1.0 },
        delay_s: length / SPEED_OF_LIGHT_M_S,
        vertices,
    }
}

/// Find propagation paths from `tx` to `rx`: line of sight plus facade
/// reflections up to `opts.max_reflections` (at most 2), each validated
/// for reflection-point containment and occlusion. An empty result means
/// total blockage.
pub fn trace_paths(
    scene: &OsmScene,
    tx: [f64; 3],
    rx: [f64; 3],
    carrier_hz: f64,
    opts: &TraceOptions,
) -> Result<Vec<Ray>> {
    if opts.max_reflections > 2 {
        return Err(Error::config(
            "image-method tracing supports at most 2 reflections",
        ));
    }
    if !(carrier_hz > 0.0) {
        return Err(Error::config("carrier frequency must be positive"));
    }
    if tx[2] <= 0.0 || rx[2] <= 0.0 {
        return Err(Error::config("tx and rx must sit above the ground plane"));
    }
    if dist3(tx, rx) < GEOM_EPS {
        return Err(Error::config("tx and rx positions coincide"));
    }

    let facades = scene.facades();
    let mut rays = Vec::new();

    if !segment_blocked(&facades, tx, rx) {
        rays.push(build_ray(vec![tx, rx], carrier_hz, opts.reflection_coeff));
    }

    if opts.max_reflections >= 1 {
        for f in &facades {
            let Some(p) = reflect_once(&facades, f, tx, rx) else {
                continue;
            };
            rays.push(build_ray(vec![tx, p, rx], carrier_hz, opts.reflection_coeff));
        }
    }

    if opts.max_reflections >= 2 {
        for (i, f1) in facades.iter().enumerate() {
            for (j, f2) in facades.iter().enumerate() {
                if i == j {
                    continue;
                }
                let Some((p1, p2)) = reflect_twice(&facades, f1, f2, tx, rx) else {
                    continue;
                };
                rays.push(build_ray(
                    vec![tx, p1, p2, rx],
                    carrier_hz,
                    opts.reflection_coeff,
                ));
            }
        }
    }
    Ok(rays)
}

/// Single-bounce reflection point off `f`, if geometrically valid.
fn reflect_once(facades: &[Facade], f: &Facade, tx: [f64; 3], rx: [f64; 3]) -> Option<[f64; 3]> {
    let d_tx = f.signed_distance(tx);
    let d_rx = f.signed_distance(rx);
    if d_tx.abs() < GEOM_EPS || d_rx.abs() < GEOM_EPS || d_tx.signum() != d_rx.signum() {
        return None;
    }
    let image = f.mirror(tx);
    let (p, _t) = f.plane_crossing(image, rx)?;
    if !f.contains(p) {
        return None;
    }
    if segment_blocked(facades, tx, p) || segment_blocked(facades, p, rx) {
        return None;
    }
    Some(p)
}

/// Double-bounce reflection points off `f1` then `f2`, if valid.
fn reflect_twice(
    facades: &[Facade],
    f1: &Facade,
    f2: &Facade,
    tx: [f64; 3],
    rx: [f64; 3],
) -> Option<([f64; 3], [f64; 3])> {
    let i1 = f1.mirror(tx);
    let i2 = f2.mirror(i1);
    let (p2, _) = f2.plane_crossing(i2, rx)?;
    if !f2.contains(p2) {
        return None;
    }
    let (p1, _) = f1.plane_crossing(i1, p2)?;
    if !f1.contains(p1) {
        return None;
    }
    // Both legs of each reflection must approach from the front face.
    if f1.signed_distance(tx).signum() != f1.signed_distance(p2).signum() {
        return None;
    }
    if f2.signed_distance(p1).signum() != f2.signed_distance(rx).signum() {
        return None;
    }
    if dist3(p1, p2) < GEOM_EPS {
        return None;
    }
    if segment_blocked(facades, tx, p1)
        || segment_blocked(facades, p1, p2)
        || segment_blocked(facades, p2, rx)
    {
        return None;
    }
    Some((p1, p2))
}

/// Turn a traced ray set into a static multipath channel.
///
/// Each ray becomes one tap at its propagation delay. Antenna arrays are
/// modeled as horizontal half-wavelength uniform linear arrays: element m
/// adds the phase pi * m * sin(azimuth) * cos(elevation) of the ray's
/// departure (tx side) or arrival (rx side) direction. An empty ray set
/// yields an all-zero outage realization flagged as such.
pub fn rays_to_channel(
    rays: &[Ray],
    sample_rate_hz: f64,
    n_tx: usize,
    n_rx: usize,
) -> Result<ChannelRealization> {
    if n_tx == 0 || n_rx == 0 {
        return Err(Error::config("antenna counts must be at least 1"));
    }
    if rays.is_empty() {
        let mut h = ChannelRealization::from_taps(
            vec![TapProcess::Static(Complex64::default()); n_tx * n_rx],
            vec![0.0],
            n_tx,
            n_rx,
            0.0,
            sample_rate_hz,
            usize::MAX,
            ChannelProvenance::RayTraced,
        )?;
        h.outage = true;
        return Ok(h);
    }

    let mut order: Vec<usize> = (0..rays.len()).collect();
    order.sort_by(|&a, &b| rays[a].delay_s.partial_cmp(&rays[b].delay_s).unwrap());
    let first_delay = rays[order[0]].delay_s;
    let delays: Vec<f64> = order.iter().map(|&i| rays[i].delay_s - first_delay).collect();

    let steer = |m: usize, (az, el): (f64, f64)| {
        Complex64::from_polar(1.0, std::f64::consts::PI * m as f64 * az.sin() * el.cos())
    };
    let mut taps = Vec::with_capacity(n_tx * n_rx * rays.len());
    for rx in 0..n_rx {
        for tx in 0..n_tx {
            for &i in &order {
                let ray = &rays[i];
                taps.push(TapProcess::Static(
                    ray.gain * steer(tx, ray.aod_rad) * steer(rx, ray.aoa_rad),
                ));
            }
        }
    }
    let total_power: f64 = rays.iter().map(|r| r.gain.norm_sqr()).sum();
    ChannelRealization::from_taps(
        taps,
        delays,
        n_tx,
        n_rx,
        -10.0 * total_power.log10(),
        sample_rate_hz,
        usize::MAX,
        ChannelProvenance::RayTraced,
    )
}

/// Received-power map over a grid of receiver positions.
#[derive(Debug, Clone)]
pub struct CoverageGrid {
    /// ENU position of cell (0, 0)'s center.
    pub origin_xy: [f64; 2],
    pub spacing_m: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major (iy * nx + ix) received power in dBm for a 1 W
    /// transmitter. Negative infinity marks outage (no path); NaN marks the
    /// excluded cell containing the transmitter.
    pub power_dbm: Vec<f64>,
}

impl CoverageGrid {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.power_dbm[iy * self.nx + ix]
    }

    /// Center of cell (ix, iy) in ENU meters.
    pub fn cell_center(&self, ix: usize, iy: usize) -> [f64; 2] {
        [
            self.origin_xy[0] + ix as f64 * self.spacing_m,
            self.origin_xy[1] + iy as f64 * self.spacing_m,
        ]
    }

    /// 8-bit grayscale rendering spanning the top 60 dB below the peak;
    /// outage and excluded cells are black. Row 0 of the image is the
    /// northernmost (largest y) row.
    pub fn write_png(&self, path: &std::path::Path) -> Result<()> {
        let peak = self
            .power_dbm
            .iter()
            .copied()
            .filter(|p| p.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        let mut img = image::GrayImage::new(self.nx as u32, self.ny as u32);
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let p = self.at(ix, iy);
                let value = if p.is_finite() && peak.is_finite() {
                    let rel = ((p - (peak - 60.0)) / 60.0).clamp(0.0, 1.0);
                    (rel * 255.0).round() as u8
                } else {
                    0
                };
                img.put_pixel(ix as u32, (self.ny - 1 - iy) as u32, image::Luma([value]));
            }
        }
        img.save(path)
            .map_err(|e| Error::signal(format!("writing coverage PNG: {e}")))
    }

    /// CSV rows of x_m, y_m, power_dbm (outage as -inf, excluded as nan).
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut out = String::from("x_m,y_m,power_dbm\n");
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let c = self.cell_center(ix, iy);
                out.push_str(&format!("{},{},{}\n", c[0], c[1], self.at(ix, iy)));
            }
        }
        std::fs::write(path, out).map_err(|e| Error::signal(format!("writing coverage CSV: {e}")))
    }
}

/// Trace received power from `tx` to every grid cell across the scene
/// bounds (padded by one spacing) at the given receiver height. Cells are
/// computed in parallel.
pub fn compute_coverage(
    scene: &OsmScene,
    tx: [f64; 3],
    spacing_m: f64,
    rx_height_m: f64,
    carrier_hz: f64,
    opts: &TraceOptions,
) -> Result<CoverageGrid> {
    if !(spacing_m > 0.0) {
        return Err(Error::config("coverage grid spacing must be positive"));
    }
    let lo = [
        scene.min_xy[0].min(tx[0]) - spacing_m,
        scene.min_xy[1].min(tx[1]) - spacing_m,
    ];
    let hi = [
        scene.max_xy[0].max(tx[0]) + spacing_m,
        scene.max_xy[1].max(tx[1]) + spacing_m,
    ];
    let nx = ((hi[0] - lo[0]) / spacing_m).ceil() as usize + 1;
    let ny = ((hi[1] - lo[1]) / spacing_m).ceil() as usize + 1;

    let power_dbm: Vec<f64> = (0..nx * ny)
        .into_par_iter()
        .map(|idx| {
            let ix = idx % nx;
            let iy = idx / nx;
            let rx = [
                lo[0] + ix as f64 * spacing_m,
                lo[1] + iy as f64 * spacing_m,
                rx_height_m,
            ];
            let d = ((rx[0] - tx[0]).powi(2) + (rx[1] - tx[1]).powi(2)).sqrt();
            if d < spacing_m / 2.0 {
                // The cell containing the transmitter is singular.
                return f64::NAN;
            }
            match trace_paths(scene, tx, rx, carrier_hz, opts) {
                Ok(rays) if !rays.is_empty() => {
                    let p: f64 = rays.iter().map(|r| r.gain.norm_sqr()).sum();
                    10.0 * p.log10() + 30.0
                }
                _ => f64::NEG_INFINITY,
            }
        })
        .collect();

    Ok(CoverageGrid {
        origin_xy: lo,
        spacing_m,
        nx,
        ny,
        power_dbm,
    })
}

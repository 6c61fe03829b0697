//! Time and frequency placement of emitter segments within a frame.
//!
//! Each transmitter emits 1 to 3 bursts (segments) of 500 to 2000 symbols,
//! separated by randomized idle gaps, so frames mix continuous and bursty
//! traffic. All segments of one transmitter share a single carrier.
//! Spectral overlap between concurrent transmitters is controlled: with a
//! configured per-frame probability, one pair of transmitters is aligned in
//! time and placed with intersecting bands (the intersection a uniform
//! fraction of the narrower signal's bandwidth); every other concurrent
//! pair stays disjoint with a guard band.
//!
//! The overlap coin is corrected for the share of frames that can overlap
//! at all: a caller whose frames have two or more transmitters only
//! `p_multi_tx` of the time passes that probability in, and the coin fires
//! with probability overlap_probability / p_multi_tx on eligible frames,
//! keeping the unconditional frame-overlap rate at the configured value.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One scheduled burst of one transmitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionEvent {
    pub tx_id: usize,
    pub segment_index: usize,
    pub start_s: f64,
    pub duration_s: f64,
    /// Shared by all segments of the transmitter; NaN until frequency
    /// allocation has run.
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub n_symbols: u64,
    pub symbol_rate_hz: f64,
}

impl EmissionEvent {
    pub fn end_s(&self) -> f64 {
        self.start_s + self.duration_s
    }

    pub fn band_lo_hz(&self) -> f64 {
        self.carrier_hz - self.bandwidth_hz / 2.0
    }

    pub fn band_hi_hz(&self) -> f64 {
        self.carrier_hz + self.bandwidth_hz / 2.0
    }

    /// Seconds of time intersection with another event (0 when disjoint).
    pub fn time_overlap_s(&self, other: &EmissionEvent) -> f64 {
        (self.end_s().min(other.end_s()) - self.start_s.max(other.start_s)).max(0.0)
    }

    /// Hertz of band intersection with another event (0 when disjoint).
    pub fn band_overlap_hz(&self, other: &EmissionEvent) -> f64 {
        (self.band_hi_hz().min(other.band_hi_hz()) - self.band_lo_hz().max(other.band_lo_hz()))
            .max(0.0)
    }
}

/// A deliberately overlapped transmitter pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapPair {
    pub tx_a: usize,
    pub tx_b: usize,
    pub overlap_hz: f64,
    /// Overlap width over the narrower transmitter's bandwidth.
    pub fraction_of_narrower: f64,
}

/// Complete placement for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramePlan {
    pub frame_duration_s: f64,
    pub events: Vec<EmissionEvent>,
    pub overlaps: Vec<OverlapPair>,
}

/// What one transmitter asks of the scheduler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxScheduleRequest {
    pub tx_id: usize,
    /// Number of bursts, 1 to 3.
    pub n_segments: usize,
    pub symbol_rate_hz: f64,
    /// Occupied bandwidth of the modulated signal.
    pub bandwidth_hz: f64,
}

/// Scheduler controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Inclusive symbol-count range per segment.
    pub symbols_range: (u64, u64),
    /// Idle gaps (and the initial offset) are uniform draws from this range
    /// times the transmitter's mean segment duration.
    pub idle_gap_range: (f64, f64),
    /// Guard band between disjoint concurrent signals, as a fraction of the
    /// narrower signal's bandwidth.
    pub guard_fraction: f64,
    /// Unconditional probability that a frame contains an overlapping pair.
    pub overlap_probability: f64,
    /// Overlap extent is uniform on [0, this] of the narrower bandwidth.
    pub max_overlap_fraction: f64,
    /// Hard cap on events per frame.
    pub max_instances: usize,
    /// Full-frame retries before an infeasible packing becomes an error.
    pub max_attempts: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            symbols_range: (500, 2000),
            idle_gap_range: (0.1, 1.0),
            guard_fraction: 0.10,
            overlap_probability: 0.15,
            max_overlap_fraction: 0.15,
            max_instances: 12,
            max_attempts: 20,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.symbols_range.0 == 0 || self.symbols_range.0 > self.symbols_range.1 {
            return Err(Error::config("symbols_range must be a non-empty positive range"));
        }
        if !(self.idle_gap_range.0 >= 0.0 && self.idle_gap_range.0 <= self.idle_gap_range.1) {
            return Err(Error::config("idle_gap_range must be ordered and non-negative"));
        }
        if !(0.0..=1.0).contains(&self.overlap_probability) {
            return Err(Error::config("overlap_probability must be in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.max_overlap_fraction) {
            return Err(Error::config("max_overlap_fraction must be in [0, 1)"));
        }
        if self.guard_fraction < 0.0 {
            return Err(Error::config("guard_fraction must be non-negative"));
        }
        if self.max_instances == 0 || self.max_attempts == 0 {
            return Err(Error::config("max_instances and max_attempts must be positive"));
        }
        Ok(())
    }
}

fn validate_requests(requests: &[TxScheduleRequest], cfg: &ScheduleConfig) -> Result<()> {
    if requests.is_empty() {
        return Err(Error::config("schedule needs at least one transmitter"));
    }
    let total: usize = requests.iter().map(|r| r.n_segments).sum();
    if total > cfg.max_instances {
        return Err(Error::config(format!(
            "{total} requested segments exceed the {} instance cap",
            cfg.max_instances
        )));
    }
    for r in requests {
        if r.n_segments == 0 || r.n_segments > 3 {
            return Err(Error::config(format!(
                "tx {} requests {} segments; expected 1 to 3",
                r.tx_id, r.n_segments
            )));
        }
        if !(r.symbol_rate_hz > 0.0) || !(r.bandwidth_hz > 0.0) {
            return Err(Error::config(format!(
                "tx {} needs positive symbol rate and bandwidth",
                r.tx_id
            )));
        }
    }
    let mut ids: Vec<usize> = requests.iter().map(|r| r.tx_id).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != requests.len() {
        return Err(Error::config("transmitter ids must be unique"));
    }
    Ok(())
}

/// Draw segment symbol counts, durations, and start times for every
/// transmitter. Carriers are left NaN for [`allocate_frequency`]. Returns
/// the events (grouped by transmitter, segments in order) and the frame
/// duration covering the latest event plus a trailing idle margin.
pub fn allocate_time<R: Rng>(
    requests: &[TxScheduleRequest],
    cfg: &ScheduleConfig,
    rng: &mut R,
) -> Result<(Vec<EmissionEvent>, f64)> {
    cfg.validate()?;
    validate_requests(requests, cfg)?;

    let mut events = Vec::new();
    for req in requests {
        let counts: Vec<u64> = (0..req.n_segments)
            .map(|_| rng.gen_range(cfg.symbols_range.0..=cfg.symbols_range.1))
            .collect();
        let durations: Vec<f64> = counts
            .iter()
            .map(|&c| c as f64 / req.symbol_rate_hz)
            .collect();
        let mean_duration = durations.iter().sum::<f64>() / durations.len() as f64;
        let gap =
            |rng: &mut R| rng.gen_range(cfg.idle_gap_range.0..=cfg.idle_gap_range.1) * mean_duration;

        let mut t = gap(rng);
        for (segment_index, (&n_symbols, &duration_s)) in
            counts.iter().zip(&durations).enumerate()
        {
            events.push(EmissionEvent {
                tx_id: req.tx_id,
                segment_index,
                start_s: t,
                duration_s,
                carrier_hz: f64::NAN,
                bandwidth_hz: req.bandwidth_hz,
                n_symbols,
                symbol_rate_hz: req.symbol_rate_hz,
            });
            t += duration_s;
            if segment_index + 1 < req.n_segments {
                t += gap(rng);
            }
        }
    }

    let latest = events.iter().map(EmissionEvent::end_s).fold(0.0, f64::max);
    let mean_all = events.iter().map(|e| e.duration_s).sum::<f64>() / events.len() as f64;
    let margin = rng.gen_range(cfg.idle_gap_range.0..=cfg.idle_gap_range.1) * mean_all;
    Ok((events, latest + margin))
}

/// True when any segment of tx a intersects any segment of tx b in time.
fn txs_concurrent(events: &[EmissionEvent], a: usize, b: usize) -> bool {
    events
        .iter()
        .filter(|e| e.tx_id == a)
        .any(|ea| {
            events
                .iter()
                .filter(|e| e.tx_id == b)
                .any(|eb| ea.time_overlap_s(eb) > 0.0)
        })
}

/// Subtract `cut` from each interval in `intervals`, keeping order.
fn subtract_interval(intervals: &mut Vec<(f64, f64)>, cut: (f64, f64)) {
    let mut out = Vec::with_capacity(intervals.len() + 1);
    for &(lo, hi) in intervals.iter() {
        if cut.1 <= lo || cut.0 >= hi {
            out.push((lo, hi));
        } else {
            if cut.0 > lo {
                out.push((lo, cut.0));
            }
            if cut.1 < hi {
                out.push((cut.1, hi));
            }
        }
    }
    *intervals = out;
}

/// Draw a point uniformly over a union of disjoint intervals; None when the
/// union has no measure.
fn draw_from_intervals<R: Rng>(intervals: &[(f64, f64)], rng: &mut R) -> Option<f64> {
    let total: f64 = intervals.iter().map(|(lo, hi)| hi - lo).sum();
    if total <= 0.0 {
        return None;
    }
    let mut u = rng.gen_range(0.0..total);
    for &(lo, hi) in intervals {
        let w = hi - lo;
        if u < w {
            return Some(lo + u);
        }
        u -= w;
    }
    Some(intervals.last().map(|&(_, hi)| hi).unwrap())
}

/// Assign one carrier per transmitter inside the observable band.
///
/// `forced_pair` names two transmitters whose bands must intersect by
/// `extent` times the narrower bandwidth; every other time-concurrent pair
/// is separated by at least the guard. Fails (for the caller to retry) when
/// a transmitter has no feasible carrier.
pub fn allocate_frequency<R: Rng>(
    events: &mut [EmissionEvent],
    band_hz: (f64, f64),
    cfg: &ScheduleConfig,
    forced_pair: Option<(usize, usize, f64)>,
    rng: &mut R,
) -> Result<Vec<OverlapPair>> {
    let mut tx_ids: Vec<usize> = events.iter().map(|e| e.tx_id).collect();
    tx_ids.sort_unstable();
    tx_ids.dedup();
    let bandwidths: std::collections::HashMap<usize, f64> = tx_ids
        .iter()
        .map(|&tx| {
            let bw = events
                .iter()
                .find(|e| e.tx_id == tx)
                .map(|e| e.bandwidth_hz)
                .unwrap();
            (tx, bw)
        })
        .collect();
    let bw_of = |tx: usize| bandwidths[&tx];

    // Place the forced pair first so its geometry is never squeezed out,
    // then the rest in a random order.
    let mut order = tx_ids.clone();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    if let Some((a, b, _)) = forced_pair {
        order.retain(|&t| t != a && t != b);
        order.insert(0, b);
        order.insert(0, a);
    }

    let mut carriers: std::collections::HashMap<usize, f64> = std::collections::HashMap::new();
    for &tx in &order {
        let bw = bw_of(tx);
        let carrier = if let Some((a, _, extent)) = forced_pair.filter(|&(_, b, _)| b == tx) {
            // Partner of the forced pair: butt the band against tx a's with
            // the drawn intersection, above or below at random.
            let ca = *carriers.get(&a).ok_or_else(|| {
                Error::config("forced overlap partner placed before its anchor")
            })?;
            let bw_a = bw_of(a);
            let overlap = extent * bw.min(bw_a);
            let above = ca + bw_a / 2.0 - overlap + bw / 2.0;
            let below = ca - bw_a / 2.0 + overlap - bw / 2.0;
            let mut candidates = [above, below];
            if rng.gen_bool(0.5) {
                candidates.swap(0, 1);
            }
            let fits = |c: f64| {
                c - bw / 2.0 >= band_hz.0
                    && c + bw / 2.0 <= band_hz.1
                    && tx_ids.iter().all(|&other| {
                        other == tx
                            || other == a
                            || !carriers.contains_key(&other)
                            || !txs_concurrent(events, tx, other)
                            || {
                                let co = carriers[&other];
                                let bo = bw_of(other);
                                let guard = cfg.guard_fraction * bw.min(bo);
                                (c - co).abs() >= (bw + bo) / 2.0 + guard
                            }
                    })
            };
            match candidates.into_iter().find(|&c| fits(c)) {
                Some(c) => c,
                None => {
                    return Err(Error::signal(
                        "no feasible carrier for the forced overlap partner",
                    ))
                }
            }
        } else {
            let mut feasible = vec![(band_hz.0 + bw / 2.0, band_hz.1 - bw / 2.0)];
            if feasible[0].0 > feasible[0].1 {
                return Err(Error::signal(format!(
                    "tx {tx} bandwidth {bw} Hz exceeds the observable band"
                )));
            }
            for &other in &tx_ids {
                if other == tx || !carriers.contains_key(&other) {
                    continue;
                }
                if !txs_concurrent(events, tx, other) {
                    continue;
                }
                let co = carriers[&other];
                let bo = bw_of(other);
                let guard = cfg.guard_fraction * bw.min(bo);
                let half = (bw + bo) / 2.0 + guard;
                subtract_interval(&mut feasible, (co - half, co + half));
            }
            match draw_from_intervals(&feasible, rng) {
                Some(c) => c,
                None => {
                    return Err(Error::signal(format!(
                        "no feasible carrier for tx {tx} after guard exclusions"
                    )))
                }
            }
        };
        carriers.insert(tx, carrier);
    }

    for e in events.iter_mut() {
        e.carrier_hz = carriers[&e.tx_id];
    }

    let mut overlaps = Vec::new();
    if let Some((a, b, extent)) = forced_pair {
        let bw_min = bw_of(a).min(bw_of(b));
        overlaps.push(OverlapPair {
            tx_a: a,
            tx_b: b,
            overlap_hz: extent * bw_min,
            fraction_of_narrower: extent,
        });
    }
    Ok(overlaps)
}

/// Schedule a full frame: time placement, the overlap coin, and frequency
/// placement, retried as a whole on infeasible packings.
///
/// `p_multi_tx` is the caller's probability that a frame has two or more
/// transmitters; the overlap coin is scaled by it so the unconditional
/// overlap rate matches `cfg.overlap_probability`.
pub fn plan_frame<R: Rng>(
    requests: &[TxScheduleRequest],
    band_hz: (f64, f64),
    cfg: &ScheduleConfig,
    p_multi_tx: f64,
    rng: &mut R,
) -> Result<FramePlan> {
    cfg.validate()?;
    if !(p_multi_tx > 0.0 && p_multi_tx <= 1.0) {
        return Err(Error::config("p_multi_tx must be in (0, 1]"));
    }
    let mut last_err = None;
    for _ in 0..cfg.max_attempts {
        let (mut events, mut frame_duration) = allocate_time(requests, cfg, rng)?;

        let coin = (cfg.overlap_probability / p_multi_tx).min(1.0);
        let forced = if requests.len() >= 2 && rng.gen_bool(coin) {
            // Pick two distinct transmitters and align their first
            // segments in time so the spectral overlap is observable.
            let i = rng.gen_range(0..requests.len());
            let mut j = rng.gen_range(0..requests.len() - 1);
            if j >= i {
                j += 1;
            }
            let (a, b) = (requests[i].tx_id, requests[j].tx_id);
            force_time_overlap(&mut events, a, b, rng);
            let latest = events.iter().map(EmissionEvent::end_s).fold(0.0, f64::max);
            frame_duration = frame_duration.max(latest + 1e-9);
            let extent = rng.gen_range(0.0..cfg.max_overlap_fraction);
            Some((a, b, extent))
        } else {
            None
        };

        match allocate_frequency(&mut events, band_hz, cfg, forced, rng) {
            Ok(overlaps) => {
                return Ok(FramePlan {
                    frame_duration_s: frame_duration,
                    events,
                    overlaps,
                })
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::signal("frame scheduling failed")))
}

/// Shift tx b's whole schedule so its first segment intersects tx a's
/// first segment in time.
fn force_time_overlap<R: Rng>(events: &mut [EmissionEvent], a: usize, b: usize, rng: &mut R) {
    let ea = events
        .iter()
        .find(|e| e.tx_id == a && e.segment_index == 0)
        .cloned()
        .unwrap();
    let eb = events
        .iter()
        .find(|e| e.tx_id == b && e.segment_index == 0)
        .cloned()
        .unwrap();
    if ea.time_overlap_s(&eb) > 0.0 {
        return;
    }
    // Any start in (ea.start - eb.duration, ea.end) intersects; stay
    // non-negative and strictly inside by a hair.
    let lo = (ea.start_s - eb.duration_s + 1e-6 * eb.duration_s).max(0.0);
    let hi = ea.end_s() - 1e-6 * eb.duration_s;
    let new_start = rng.gen_range(lo..hi);
    let shift = new_start - eb.start_s;
    for e in events.iter_mut().filter(|e| e.tx_id == b) {
        e.start_s += shift;
    }
}

/// Check every plan invariant; an empty list means the plan is sound. Each
/// violation is prefixed with a stable machine-readable code.
pub fn validate_plan(plan: &FramePlan, band_hz: (f64, f64), cfg: &ScheduleConfig) -> Vec<String> {
    let mut violations = Vec::new();
    if plan.events.len() > cfg.max_instances {
        violations.push(format!(
            "instance-cap: {} events exceed the {} instance cap",
            plan.events.len(),
            cfg.max_instances
        ));
    }
    for (i, e) in plan.events.iter().enumerate() {
        if e.start_s < 0.0 {
            violations.push(format!("negative-start: event {i} starts at {}", e.start_s));
        }
        if e.end_s() > plan.frame_duration_s + 1e-12 {
            violations.push(format!(
                "frame-spill: event {i} ends at {} beyond frame duration {}",
                e.end_s(),
                plan.frame_duration_s
            ));
        }
        if !e.carrier_hz.is_finite() {
            violations.push(format!("carrier-unset: event {i} has no carrier"));
        } else if e.band_lo_hz() < band_hz.0 - 1e-9 || e.band_hi_hz() > band_hz.1 + 1e-9 {
            violations.push(format!(
                "band-spill: event {i} occupies [{}, {}] Hz outside [{}, {}]",
                e.band_lo_hz(),
                e.band_hi_hz(),
                band_hz.0,
                band_hz.1
            ));
        }
        if e.duration_s <= 0.0 {
            violations.push(format!("empty-event: event {i} has duration {}", e.duration_s));
        }
    }

    let mut tx_ids: Vec<usize> = plan.events.iter().map(|e| e.tx_id).collect();
    tx_ids.sort_unstable();
    tx_ids.dedup();
    for &tx in &tx_ids {
        let mut segs: Vec<&EmissionEvent> =
            plan.events.iter().filter(|e| e.tx_id == tx).collect();
        segs.sort_by(|x, y| x.start_s.partial_cmp(&y.start_s).unwrap());
        for w in segs.windows(2) {
            if w[1].start_s <= w[0].end_s() {
                violations.push(format!(
                    "same-tx-overlap: tx {tx} segments {} and {} are not separated by an idle gap",
                    w[0].segment_index, w[1].segment_index
                ));
            }
        }
        let carriers: Vec<f64> = segs.iter().map(|e| e.carrier_hz).collect();
        if carriers.windows(2).any(|w| w[0] != w[1] && !(w[0].is_nan() && w[1].is_nan())) {
            violations.push(format!("carrier-split: tx {tx} segments use different carriers"));
        }
    }

    // Concurrent transmitters must be band-disjoint with the guard unless
    // they are a declared overlap pair.
    for (ai, &a) in tx_ids.iter().enumerate() {
        for &b in &tx_ids[ai + 1..] {
            if !txs_concurrent(&plan.events, a, b) {
                continue;
            }
            let ea = plan.events.iter().find(|e| e.tx_id == a).unwrap();
            let eb = plan.events.iter().find(|e| e.tx_id == b).unwrap();
            let declared = plan
                .overlaps
                .iter()
                .find(|p| (p.tx_a, p.tx_b) == (a, b) || (p.tx_a, p.tx_b) == (b, a));
            let actual = ea.band_overlap_hz(eb);
            if let Some(pair) = declared {
                let narrower = ea.bandwidth_hz.min(eb.bandwidth_hz);
                if pair.fraction_of_narrower > cfg.max_overlap_fraction + 1e-12 {
                    violations.push(format!(
                        "overlap-extent: pair ({a}, {b}) fraction {} exceeds {}",
                        pair.fraction_of_narrower, cfg.max_overlap_fraction
                    ));
                }
                if (actual - pair.overlap_hz).abs() > 1e-6 * narrower.max(1.0) {
                    violations.push(format!(
                        "overlap-mismatch: pair ({a}, {b}) declares {} Hz but bands intersect by {actual} Hz",
                        pair.overlap_hz
                    ));
                }
            } else {
                let guard = cfg.guard_fraction * ea.bandwidth_hz.min(eb.bandwidth_hz);
                let gap = (ea.carrier_hz - eb.carrier_hz).abs()
                    - (ea.bandwidth_hz + eb.bandwidth_hz) / 2.0;
                if gap < guard - 1e-9 {
                    violations.push(format!(
                        "guard-violation: concurrent txs {a} and {b} are separated by {gap} Hz, guard is {guard} Hz"
                    ));
                }
            }
        }
    }
    violations
}

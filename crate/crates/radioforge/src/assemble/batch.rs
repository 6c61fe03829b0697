//! Batch generation, the dataset manifest, statistics and validation.
//!
//! Frames are independent given the master seed, so the batch runner is
//! embarrassingly parallel: a bounded worker pool maps over the frame
//! index range, each worker synthesizing and archiving its frames with no
//! shared mutable state. Output bytes depend only on (config, master
//! seed, frame index), never on worker count or completion order. Frame
//! files are write-once keyed by index: a frame whose archives all exist
//! already is skipped, which makes interrupted runs resumable by simply
//! rerunning them. A frame that fails is retried once before the batch
//! reports the failure with its index.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metadata::{self, FrameAnnotation};
use super::sigmf;
use super::{FramePipeline, MAX_FRAME_SAMPLES, MIN_FRAME_SAMPLES};
use crate::config::MasterConfig;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// IQ recordings live under `<out>/sequence_data/iq/`.
pub fn iq_dir(out: &Path) -> PathBuf {
    out.join("sequence_data").join("iq")
}

/// Annotation JSON lives under `<out>/anno/`.
pub fn anno_dir(out: &Path) -> PathBuf {
    out.join("anno")
}

/// One recorded frame (a scenario seen by one receiver).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub frame_index: u64,
    pub rx_id: usize,
    pub file_prefix: String,
    pub n_antennas: usize,
    pub n_samples: usize,
    /// Signal instances (segments) in this frame.
    pub n_signals: usize,
}

/// Index of a generated dataset. The total recorded-frame count is the
/// sum of receiver counts across scenarios, since every receiver in a
/// scenario yields its own archived frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub master_seed: u64,
    /// Scenario indices generated, ascending.
    pub frame_indices: Vec<u64>,
    /// One entry per recorded frame, ordered by (frame index, rx id).
    pub entries: Vec<ManifestEntry>,
    pub total_recorded_frames: usize,
}

impl DatasetManifest {
    pub fn save(&self, out: &Path) -> Result<PathBuf> {
        let path = out.join(MANIFEST_FILE);
        sigmf::write_atomic(&path, &serde_json::to_vec_pretty(self)?)?;
        Ok(path)
    }

    pub fn load(out: &Path) -> Result<Self> {
        let path = out.join(MANIFEST_FILE);
        let bytes = fs::read(&path)?;
        serde_json::from_slice(&bytes)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}

/// Generate and archive every frame in `frames`, returning the manifest
/// (also saved to `<out>/manifest.json`).
pub fn run_batch(
    cfg: &MasterConfig,
    frames: std::ops::Range<u64>,
    workers: usize,
    out: &Path,
) -> Result<DatasetManifest> {
    if workers == 0 {
        return Err(Error::config("worker count must be at least 1"));
    }
    let pipeline = FramePipeline::new(cfg.clone())?;
    let iq = iq_dir(out);
    let anno = anno_dir(out);
    fs::create_dir_all(&iq)?;
    fs::create_dir_all(&anno)?;

    let indices: Vec<u64> = frames.collect();
    let total = indices.len();
    let done = AtomicUsize::new(0);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config(format!("worker pool: {e}")))?;
    let per_frame: Vec<Vec<ManifestEntry>> = pool.install(|| {
        indices
            .par_iter()
            .map(|&idx| {
                let result = generate_one(&pipeline, idx, &iq, &anno).or_else(|e| {
                    log::warn!("frame {idx} failed ({e}), retrying once");
                    generate_one(&pipeline, idx, &iq, &anno)
                });
                let k = done.fetch_add(1, Ordering::Relaxed) + 1;
                match &result {
                    Ok(entries) => log::info!(
                        "frame {idx}: {} receiver file(s) ({k}/{total})",
                        entries.len()
                    ),
                    Err(e) => log::error!("frame {idx}: {e} ({k}/{total})"),
                }
                result.map_err(|e| Error::signal(format!("frame {idx}: {e}")))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let manifest = DatasetManifest {
        master_seed: cfg.master_seed,
        frame_indices: indices,
        entries: per_frame.into_iter().flatten().collect(),
        total_recorded_frames: 0,
    };
    let manifest = DatasetManifest {
        total_recorded_frames: manifest.entries.len(),
        ..manifest
    };
    manifest.save(out)?;
    Ok(manifest)
}

/// Synthesize and archive one scenario unless its files already exist.
fn generate_one(
    pipeline: &FramePipeline,
    idx: u64,
    iq: &Path,
    anno: &Path,
) -> Result<Vec<ManifestEntry>> {
    let cfg = pipeline.config();
    let plan = pipeline.plan(idx)?;

    let existing: Vec<Option<ManifestEntry>> = plan
        .rxs
        .iter()
        .map(|rx| {
            let prefix = format!("Frame_{:06}_Rx_{:04}", idx, rx.rx_id);
            existing_entry(iq, anno, &prefix, idx, rx.rx_id, rx.n_antennas)
        })
        .collect();
    if existing.iter().all(Option::is_some) {
        return Ok(existing.into_iter().flatten().collect());
    }

    let set = pipeline.generate(idx)?;
    let mut entries = Vec::with_capacity(set.frames.len());
    for frame in &set.frames {
        sigmf::write_frame(iq, frame, cfg.rf_carrier_hz, cfg.band_center())?;
        let ann = metadata::annotation_for(cfg, &set.plan, frame)?;
        metadata::write_annotation(anno, &ann)?;
        entries.push(ManifestEntry {
            frame_index: idx,
            rx_id: frame.rx_id,
            file_prefix: frame.file_prefix(),
            n_antennas: frame.n_antennas(),
            n_samples: frame.n_samples(),
            n_signals: frame.truth.len(),
        });
    }
    Ok(entries)
}

/// Rebuild a manifest entry from existing archives, or None if any piece
/// of the frame (annotation, meta, every data file) is missing.
fn existing_entry(
    iq: &Path,
    anno: &Path,
    prefix: &str,
    frame_index: u64,
    rx_id: usize,
    n_antennas: usize,
) -> Option<ManifestEntry> {
    let anno_path = anno.join(format!("{prefix}.json"));
    if !anno_path.exists() || !iq.join(sigmf::meta_file_name(prefix)).exists() {
        return None;
    }
    for name in sigmf::data_file_names(prefix, n_antennas) {
        if !iq.join(name).exists() {
            return None;
        }
    }
    let ann = metadata::read_annotation(&anno_path).ok()?;
    let n_samples =
        (ann.annotation.rx.time_duration * ann.annotation.rx.master_clock_rate).round() as usize;
    Some(ManifestEntry {
        frame_index,
        rx_id,
        file_prefix: prefix.to_string(),
        n_antennas,
        n_samples,
        n_signals: ann.segments().len(),
    })
}

/// Fixed-range histogram; values beyond the range land in the edge bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        Histogram {
            lo,
            hi,
            counts: vec![0; bins.max(1)],
        }
    }

    pub fn add(&mut self, v: f64) {
        let bins = self.counts.len();
        let t = ((v - self.lo) / (self.hi - self.lo) * bins as f64).floor();
        let i = (t.max(0.0) as usize).min(bins - 1);
        self.counts[i] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Aggregate report over a generated dataset: the recorded-frame total,
/// the class histogram, per-frame instance and category counts, and
/// duration, bandwidth and SNR distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub total_recorded_frames: usize,
    pub total_signal_instances: usize,
    pub class_counts: BTreeMap<String, u64>,
    /// Index k counts frames holding exactly k signal instances.
    pub instances_per_frame: Vec<u64>,
    /// Index k counts frames holding exactly k distinct classes.
    pub categories_per_frame: Vec<u64>,
    pub duration_ms: Histogram,
    pub bandwidth_khz: Histogram,
    pub snr_db: Histogram,
}

/// Read every annotation named by the manifest and aggregate.
pub fn dataset_stats(manifest: &DatasetManifest, out: &Path) -> Result<StatsReport> {
    if manifest.entries.is_empty() {
        return Err(Error::config("manifest is empty; nothing to report"));
    }
    let anno = anno_dir(out);
    let mut report = StatsReport {
        total_recorded_frames: manifest.entries.len(),
        total_signal_instances: 0,
        class_counts: BTreeMap::new(),
        instances_per_frame: Vec::new(),
        categories_per_frame: Vec::new(),
        duration_ms: Histogram::new(0.0, 100.0, 20),
        bandwidth_khz: Histogram::new(0.0, 400.0, 20),
        snr_db: Histogram::new(-40.0, 100.0, 28),
    };
    for entry in &manifest.entries {
        let ann = metadata::read_annotation(&anno.join(format!("{}.json", entry.file_prefix)))?;
        let segs = ann.segments();
        let classes: BTreeSet<&str> = segs.iter().map(|s| s.class_name.as_str()).collect();
        bump(&mut report.instances_per_frame, segs.len());
        bump(&mut report.categories_per_frame, classes.len());
        report.total_signal_instances += segs.len();
        for seg in &segs {
            *report.class_counts.entry(seg.class_name.clone()).or_insert(0) += 1;
            report.duration_ms.add(seg.duration_s * 1e3);
            report
                .bandwidth_khz
                .add((seg.band_hi_hz - seg.band_lo_hz) / 1e3);
            report.snr_db.add(seg.snr_db);
        }
    }
    Ok(report)
}

fn bump(hist: &mut Vec<u64>, k: usize) {
    if hist.len() <= k {
        hist.resize(k + 1, 0);
    }
    hist[k] += 1;
}

/// Check every archive the manifest names against the format rules.
/// Returns violation descriptions; an empty list means a clean dataset.
pub fn validate_dataset(out: &Path) -> Result<Vec<String>> {
    let manifest = DatasetManifest::load(out)?;
    let iq = iq_dir(out);
    let anno = anno_dir(out);
    let mut violations = Vec::new();
    let mut seen = BTreeSet::new();

    if manifest.total_recorded_frames != manifest.entries.len() {
        violations.push(format!(
            "manifest-total: states {} recorded frames but lists {}",
            manifest.total_recorded_frames,
            manifest.entries.len()
        ));
    }

    for entry in &manifest.entries {
        let prefix = &entry.file_prefix;
        if !seen.insert(prefix.clone()) {
            violations.push(format!("duplicate-prefix: {prefix}"));
            continue;
        }
        let expect = format!("Frame_{:06}_Rx_{:04}", entry.frame_index, entry.rx_id);
        if *prefix != expect {
            violations.push(format!("prefix-mismatch: {prefix} should be {expect}"));
        }

        let ann = match metadata::read_annotation(&anno.join(format!("{prefix}.json"))) {
            Ok(a) => a,
            Err(e) => {
                violations.push(format!("anno-unreadable: {prefix}: {e}"));
                continue;
            }
        };
        if ann.file_prefix != *prefix {
            violations.push(format!(
                "anno-prefix: {prefix} contains filePrefix {}",
                ann.file_prefix
            ));
        }
        let rx = &ann.annotation.rx;
        let n_samples = (rx.time_duration * rx.master_clock_rate).round() as usize;
        if n_samples != entry.n_samples {
            violations.push(format!(
                "duration-mismatch: {prefix}: annotation implies {n_samples} samples, \
                 manifest says {}",
                entry.n_samples
            ));
        }
        if !(MIN_FRAME_SAMPLES..=MAX_FRAME_SAMPLES).contains(&n_samples) {
            violations.push(format!("sample-budget: {prefix}: {n_samples} samples"));
        }
        if rx.num_receive_antennas != entry.n_antennas {
            violations.push(format!(
                "antenna-mismatch: {prefix}: annotation {} vs manifest {}",
                rx.num_receive_antennas, entry.n_antennas
            ));
        }
        if rx.snrs.len() != ann.annotation.tx.len() {
            violations.push(format!(
                "snr-shape: {prefix}: {} SNR entries for {} transmitters",
                rx.snrs.len(),
                ann.annotation.tx.len()
            ));
        }
        validate_tx_entries(&ann, prefix, &mut violations);

        match sigmf::read_frame(&iq, prefix) {
            Ok((streams, meta)) => {
                if meta.global.num_channels != entry.n_antennas {
                    violations.push(format!(
                        "meta-channels: {prefix}: {} vs manifest {}",
                        meta.global.num_channels, entry.n_antennas
                    ));
                }
                if meta.global.sample_rate != rx.master_clock_rate {
                    violations.push(format!("meta-rate: {prefix}"));
                }
                for (k, s) in streams.iter().enumerate() {
                    if s.len() != entry.n_samples {
                        violations.push(format!(
                            "data-size: {prefix} antenna {k}: {} samples, expected {}",
                            s.len(),
                            entry.n_samples
                        ));
                    }
                }
            }
            Err(e) => violations.push(format!("iq-unreadable: {prefix}: {e}")),
        }
    }
    Ok(violations)
}

fn validate_tx_entries(ann: &FrameAnnotation, prefix: &str, violations: &mut Vec<String>) {
    let rx = &ann.annotation.rx;
    let [band_lo, band_hi] = rx.observable_band;
    for (ti, tx) in ann.annotation.tx.iter().enumerate() {
        let n = tx.start_times.len();
        if tx.time_durations.len() != n || tx.band_width.len() != n || n == 0 {
            violations.push(format!(
                "segment-shape: {prefix} tx {ti}: {} starts, {} durations, {} bands",
                n,
                tx.time_durations.len(),
                tx.band_width.len()
            ));
            continue;
        }
        if let Some(snr) = rx.snrs.get(ti) {
            if snr.values().len() != n {
                violations.push(format!(
                    "snr-shape: {prefix} tx {ti}: {} SNR values for {n} segments",
                    snr.values().len()
                ));
            }
        }
        for (si, (&start, &dur)) in tx.start_times.iter().zip(&tx.time_durations).enumerate() {
            if start < 0.0 || start + dur > rx.time_duration + 1e-9 {
                violations.push(format!("time-spill: {prefix} tx {ti} segment {si}"));
            }
            let [lo, hi] = tx.band_width[si];
            let abs_lo = tx.carrier_frequency + lo;
            let abs_hi = tx.carrier_frequency + hi;
            if abs_lo < band_lo - 1e-6 || abs_hi > band_hi + 1e-6 {
                violations.push(format!("band-spill: {prefix} tx {ti} segment {si}"));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Small fast config: two frames' worth of everything, statistical
    /// channels only.
    fn small_config(seed: u64) -> MasterConfig {
        let mut cfg = MasterConfig::default();
        cfg.master_seed = seed;
        cfg.frame_count = 3;
        cfg
    }

    fn tree_bytes(root: &Path) -> BTreeMap<String, Vec<u8>> {
        fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
            for e in fs::read_dir(dir).unwrap().filter_map(|e| e.ok()) {
                let p = e.path();
                if p.is_dir() {
                    walk(&p, root, out);
                } else {
                    let rel = p.strip_prefix(root).unwrap().to_string_lossy().to_string();
                    out.insert(rel, fs::read(&p).unwrap());
                }
            }
        }
        let mut out = BTreeMap::new();
        walk(root, root, &mut out);
        out
    }

    #[test]
    fn batches_are_worker_count_invariant_and_valid() {
        let cfg = small_config(0xDEAD);
        let dir1 = tempfile::tempdir().unwrap();
        let dir8 = tempfile::tempdir().unwrap();
        let m1 = run_batch(&cfg, 0..3, 1, dir1.path()).unwrap();
        let m8 = run_batch(&cfg, 0..3, 3, dir8.path()).unwrap();

        assert_eq!(m1, m8);
        assert_eq!(m1.frame_indices, vec![0, 1, 2]);
        assert_eq!(m1.total_recorded_frames, m1.entries.len());
        let rx_sum: usize = m1
            .frame_indices
            .iter()
            .map(|&i| {
                m1.entries
                    .iter()
                    .filter(|e| e.frame_index == i)
                    .count()
            })
            .sum();
        assert_eq!(m1.total_recorded_frames, rx_sum);

        let t1 = tree_bytes(dir1.path());
        let t8 = tree_bytes(dir8.path());
        assert_eq!(
            t1.keys().collect::<Vec<_>>(),
            t8.keys().collect::<Vec<_>>()
        );
        for (name, bytes) in &t1 {
            assert_eq!(bytes, &t8[name], "{name} differs between worker counts");
        }

        let violations = validate_dataset(dir1.path()).unwrap();
        assert!(violations.is_empty(), "{violations:?}");

        let stats = dataset_stats(&m1, dir1.path()).unwrap();
        assert_eq!(stats.total_recorded_frames, m1.entries.len());
        let class_total: u64 = stats.class_counts.values().sum();
        assert_eq!(class_total, stats.total_signal_instances as u64);
        assert_eq!(stats.duration_ms.total(), stats.total_signal_instances as u64);
        assert_eq!(stats.snr_db.total(), stats.total_signal_instances as u64);
        let weighted: usize = stats
            .instances_per_frame
            .iter()
            .enumerate()
            .map(|(k, &c)| k * c as usize)
            .sum();
        assert_eq!(weighted, stats.total_signal_instances);
        assert!(stats.instances_per_frame.len() <= 13, "instance cap");
    }

    #[test]
    fn interrupted_runs_resume_without_rewriting() {
        let cfg = small_config(0xBEEF);
        let dir = tempfile::tempdir().unwrap();
        let m = run_batch(&cfg, 0..2, 2, dir.path()).unwrap();

        // Delete one frame's archives; keep the other and stamp it.
        let victim = &m.entries[0].file_prefix;
        for name in sigmf::data_file_names(victim, m.entries[0].n_antennas) {
            fs::remove_file(iq_dir(dir.path()).join(name)).unwrap();
        }
        let survivor = m
            .entries
            .iter()
            .find(|e| e.frame_index != m.entries[0].frame_index)
            .expect("two scenarios");
        let survivor_path = anno_dir(dir.path()).join(format!("{}.json", survivor.file_prefix));
        let stamp = fs::metadata(&survivor_path).unwrap().modified().unwrap();

        let m2 = run_batch(&cfg, 0..2, 1, dir.path()).unwrap();
        assert_eq!(m, m2, "resume rebuilds the identical manifest");
        let violations = validate_dataset(dir.path()).unwrap();
        assert!(violations.is_empty(), "{violations:?}");
        let stamp2 = fs::metadata(&survivor_path).unwrap().modified().unwrap();
        assert_eq!(stamp, stamp2, "surviving frame was not rewritten");
    }

    #[test]
    fn validator_catches_corruption() {
        let cfg = small_config(0xFEED);
        let dir = tempfile::tempdir().unwrap();
        let m = run_batch(&cfg, 0..1, 1, dir.path()).unwrap();
        let entry = &m.entries[0];
        let data = iq_dir(dir.path()).join(&sigmf::data_file_names(
            &entry.file_prefix,
            entry.n_antennas,
        )[0]);
        let bytes = fs::read(&data).unwrap();
        fs::write(&data, &bytes[..bytes.len() - 8]).unwrap();
        let violations = validate_dataset(dir.path()).unwrap();
        assert!(
            violations.iter().any(|v| v.starts_with("data-size")),
            "{violations:?}"
        );
    }
}

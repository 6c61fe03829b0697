//! IQ archiving as SigMF-style file pairs.
//!
//! Each receiver frame becomes `<prefix>.sigmf-data` holding interleaved
//! complex samples as 32-bit little-endian floats (real then imaginary),
//! plus one `<prefix>.sigmf-meta` JSON describing the capture. Frames
//! recorded with more than one antenna store each antenna stream in its
//! own data file suffixed `_ant0`, `_ant1`, ... channel-major, sharing a
//! single meta file. All writes go through a temp file and an atomic
//! rename, so a crashed run never leaves a truncated archive behind.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ReceiverFrame;
use crate::error::{Error, Result};

/// Data file names for a prefix: bare for one antenna, `_antK` suffixed
/// channel-major for more.
pub fn data_file_names(prefix: &str, n_antennas: usize) -> Vec<String> {
    if n_antennas <= 1 {
        vec![format!("{prefix}.sigmf-data")]
    } else {
        (0..n_antennas)
            .map(|k| format!("{prefix}_ant{k}.sigmf-data"))
            .collect()
    }
}

pub fn meta_file_name(prefix: &str) -> String {
    format!("{prefix}.sigmf-meta")
}

/// Capture description stored alongside the IQ bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmfMeta {
    pub global: SigmfGlobal,
    pub captures: Vec<SigmfCapture>,
    pub annotations: Vec<SigmfAnnotation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmfGlobal {
    #[serde(rename = "core:datatype")]
    pub datatype: String,
    #[serde(rename = "core:sample_rate")]
    pub sample_rate: f64,
    #[serde(rename = "core:version")]
    pub version: String,
    #[serde(rename = "core:num_channels")]
    pub num_channels: usize,
    #[serde(rename = "core:recorder")]
    pub recorder: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmfCapture {
    #[serde(rename = "core:sample_start")]
    pub sample_start: usize,
    /// Absolute RF frequency the band center maps to, Hz.
    #[serde(rename = "core:frequency")]
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmfAnnotation {
    #[serde(rename = "core:sample_start")]
    pub sample_start: usize,
    #[serde(rename = "core:sample_count")]
    pub sample_count: usize,
    #[serde(rename = "core:freq_lower_edge")]
    pub freq_lower_edge: f64,
    #[serde(rename = "core:freq_upper_edge")]
    pub freq_upper_edge: f64,
    #[serde(rename = "core:label")]
    pub label: String,
}

/// Write `bytes` to `path` through a sibling temp file and atomic rename.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = tmp_path(path);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Archive one receiver frame: one data file per antenna plus the shared
/// meta file. `rf_center_hz` is the absolute frequency the observable
/// band center represents; `band_center_hz` is that center within the
/// observable band, so truth entries can be annotated at absolute RF.
pub fn write_frame(
    iq_dir: &Path,
    frame: &ReceiverFrame,
    rf_center_hz: f64,
    band_center_hz: f64,
) -> Result<()> {
    let prefix = frame.file_prefix();
    let fs_hz = frame.sample_rate_hz;
    for (name, stream) in data_file_names(&prefix, frame.n_antennas())
        .iter()
        .zip(&frame.samples)
    {
        let mut bytes = Vec::with_capacity(stream.len() * 8);
        for v in stream {
            bytes.extend_from_slice(&(v.re as f32).to_le_bytes());
            bytes.extend_from_slice(&(v.im as f32).to_le_bytes());
        }
        write_atomic(&iq_dir.join(name), &bytes)?;
    }

    let meta = SigmfMeta {
        global: SigmfGlobal {
            datatype: "cf32_le".to_string(),
            sample_rate: fs_hz,
            version: "1.0.0".to_string(),
            num_channels: frame.n_antennas(),
            recorder: format!("radioforge {}", env!("CARGO_PKG_VERSION")),
        },
        captures: vec![SigmfCapture {
            sample_start: 0,
            frequency: rf_center_hz,
        }],
        annotations: frame
            .truth
            .iter()
            .map(|t| SigmfAnnotation {
                sample_start: (t.start_s * fs_hz).round() as usize,
                sample_count: (t.duration_s * fs_hz).round() as usize,
                freq_lower_edge: rf_center_hz
                    + (t.carrier_hz - 0.5 * t.bandwidth_hz - band_center_hz),
                freq_upper_edge: rf_center_hz
                    + (t.carrier_hz + 0.5 * t.bandwidth_hz - band_center_hz),
                label: t.class_name.clone(),
            })
            .collect(),
    };
    let json = serde_json::to_vec_pretty(&meta)?;
    write_atomic(&iq_dir.join(meta_file_name(&prefix)), &json)
}

/// Read an archived frame back: per-antenna complex streams plus the
/// parsed meta document.
pub fn read_frame(iq_dir: &Path, prefix: &str) -> Result<(Vec<Vec<Complex64>>, SigmfMeta)> {
    let meta_path = iq_dir.join(meta_file_name(prefix));
    let meta: SigmfMeta = serde_json::from_slice(&fs::read(&meta_path)?)?;
    if meta.global.datatype != "cf32_le" {
        return Err(Error::Parse(format!(
            "{}: unsupported datatype {}",
            meta_path.display(),
            meta.global.datatype
        )));
    }
    let mut streams = Vec::with_capacity(meta.global.num_channels);
    for name in data_file_names(prefix, meta.global.num_channels) {
        let bytes = fs::read(iq_dir.join(&name))?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Parse(format!(
                "{name}: length {} is not a whole number of complex samples",
                bytes.len()
            )));
        }
        let mut stream = Vec::with_capacity(bytes.len() / 8);
        for chunk in bytes.chunks_exact(8) {
            let re = f32::from_le_bytes(chunk[0..4].try_into().unwrap());
            let im = f32::from_le_bytes(chunk[4..8].try_into().unwrap());
            stream.push(Complex64::new(re as f64, im as f64));
        }
        streams.push(stream);
    }
    Ok((streams, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assemble::SignalTruth;

    fn test_frame(n_antennas: usize) -> ReceiverFrame {
        let fs = 1e5;
        let samples: Vec<Vec<Complex64>> = (0..n_antennas)
            .map(|a| {
                (0..1000)
                    .map(|i| Complex64::new(i as f64 * 1e-3, -(a as f64) - i as f64 * 2e-3))
                    .collect()
            })
            .collect();
        ReceiverFrame {
            frame_index: 42,
            rx_id: 1,
            sample_rate_hz: fs,
            duration_s: 0.01,
            samples,
            truth: vec![SignalTruth {
                tx_id: 0,
                segment_index: 0,
                class_id: 17,
                class_name: "16QAM".to_string(),
                carrier_hz: 220e3,
                bandwidth_hz: 54e3,
                start_s: 0.002,
                duration_s: 0.005,
                n_symbols: 200,
                snr_db: vec![12.5],
            }],
        }
    }

    #[test]
    fn roundtrip_preserves_f32_samples_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let frame = test_frame(1);
        write_frame(dir.path(), &frame, 2.4e9, 250e3).unwrap();
        let (streams, meta) = read_frame(dir.path(), &frame.file_prefix()).unwrap();
        assert_eq!(streams.len(), 1);
        assert_eq!(streams[0].len(), 1000);
        for (got, want) in streams[0].iter().zip(&frame.samples[0]) {
            assert_eq!(got.re, want.re as f32 as f64);
            assert_eq!(got.im, want.im as f32 as f64);
        }
        assert_eq!(meta.global.num_channels, 1);
        assert_eq!(meta.annotations.len(), 1);
        let ann = &meta.annotations[0];
        assert_eq!(ann.sample_start, 200);
        assert_eq!(ann.sample_count, 500);
        assert!((ann.freq_lower_edge - (2.4e9 + (220e3 - 27e3 - 250e3))).abs() < 1e-6);
        assert_eq!(ann.label, "16QAM");
    }

    #[test]
    fn multi_antenna_frames_split_per_channel() {
        let dir = tempfile::tempdir().unwrap();
        let frame = test_frame(3);
        write_frame(dir.path(), &frame, 2.4e9, 250e3).unwrap();
        let names = data_file_names(&frame.file_prefix(), 3);
        assert_eq!(names[0], "Frame_000042_Rx_0001_ant0.sigmf-data");
        for name in &names {
            assert!(dir.path().join(name).exists(), "{name} missing");
        }
        assert!(dir.path().join("Frame_000042_Rx_0001.sigmf-meta").exists());
        let (streams, _) = read_frame(dir.path(), &frame.file_prefix()).unwrap();
        assert_eq!(streams.len(), 3);
        assert_ne!(streams[0], streams[1]);
    }

    #[test]
    fn writes_leave_no_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        write_frame(dir.path(), &test_frame(2), 2.4e9, 250e3).unwrap();
        let leftovers: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.path().extension().is_some_and(|x| x == "tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }
}

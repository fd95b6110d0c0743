//! On-disk frame format: little-endian `f32` samples plus a JSON sidecar.
//! Ground truth is a JSON file whose phase trajectories live in
//! little-endian `f64` files next to it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::sim::{GroundTruth, IqFrame};

#[derive(Debug, Serialize, Deserialize)]
struct FrameSidecar {
    frame: IqFrame,
    samples_file: String,
    n_samples: usize,
    ground_truth_file: Option<String>,
    config: serde_json::Value,
}

#[derive(Debug, Serialize, Deserialize)]
struct TruthSidecar {
    symbols: Vec<u8>,
    f_beat: f64,
    delay_symbols: usize,
    samples_per_symbol: usize,
    laser_phase_file: String,
    drift_phase_file: String,
    n_samples: usize,
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn write_f32(path: &Path, x: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(x.len() * 4);
    for v in x {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

fn write_f64(path: &Path, x: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(x.len() * 8);
    for v in x {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

fn read_le<const N: usize>(path: &Path, expected: usize, conv: fn([u8; N]) -> f64) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() != expected * N {
        return Err(SimError::Format(format!(
            "{} holds {} bytes, expected {}",
            path.display(),
            bytes.len(),
            expected * N
        )));
    }
    Ok(bytes.chunks_exact(N).map(|c| conv(c.try_into().expect("exact chunk"))).collect())
}

/// Writes `<stem>.f32` and `<stem>.json` into `dir`; returns the sidecar
/// path.
pub fn write_frame(
    dir: &Path,
    stem: &str,
    frame: &IqFrame,
    config: serde_json::Value,
    ground_truth_file: Option<&Path>,
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let data = dir.join(format!("{stem}.f32"));
    write_f32(&data, &frame.samples)?;
    let sidecar = FrameSidecar {
        frame: frame.clone(),
        samples_file: file_name(&data),
        n_samples: frame.samples.len(),
        ground_truth_file: ground_truth_file.map(file_name),
        config,
    };
    let json = dir.join(format!("{stem}.json"));
    fs::write(&json, serde_json::to_vec_pretty(&sidecar).map_err(|e| SimError::Format(e.to_string()))?)?;
    Ok(json)
}

/// Reads a frame back from its sidecar. Samples round-trip at `f32`
/// precision.
pub fn read_frame(sidecar: &Path) -> Result<IqFrame> {
    let text = fs::read_to_string(sidecar)?;
    let meta: FrameSidecar = serde_json::from_str(&text).map_err(|e| SimError::Format(e.to_string()))?;
    let dir = sidecar.parent().unwrap_or(Path::new("."));
    let mut frame = meta.frame;
    frame.samples = read_le::<4>(&dir.join(&meta.samples_file), meta.n_samples, |b| f32::from_le_bytes(b) as f64)?;
    if frame.samples.iter().any(|v| !v.is_finite()) {
        return Err(SimError::Format("non-finite sample".into()));
    }
    Ok(frame)
}

pub fn write_ground_truth(dir: &Path, stem: &str, truth: &GroundTruth) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let laser = dir.join(format!("{stem}_laser_phase.f64"));
    let drift = dir.join(format!("{stem}_drift_phase.f64"));
    write_f64(&laser, &truth.laser_phase)?;
    write_f64(&drift, &truth.drift_phase)?;
    let side = TruthSidecar {
        symbols: truth.symbols.clone(),
        f_beat: truth.f_beat,
        delay_symbols: truth.delay_symbols,
        samples_per_symbol: truth.samples_per_symbol,
        laser_phase_file: file_name(&laser),
        drift_phase_file: file_name(&drift),
        n_samples: truth.laser_phase.len(),
    };
    let json = dir.join(format!("{stem}.json"));
    fs::write(&json, serde_json::to_vec(&side).map_err(|e| SimError::Format(e.to_string()))?)?;
    Ok(json)
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruth> {
    let text = fs::read_to_string(path)?;
    let side: TruthSidecar = serde_json::from_str(&text).map_err(|e| SimError::Format(e.to_string()))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    if side.symbols.iter().any(|&s| s > 3) {
        return Err(SimError::Format("symbol index outside 0..=3".into()));
    }
    Ok(GroundTruth {
        symbols: side.symbols,
        laser_phase: read_le::<8>(&dir.join(&side.laser_phase_file), side.n_samples, f64::from_le_bytes)?,
        drift_phase: read_le::<8>(&dir.join(&side.drift_phase_file), side.n_samples, f64::from_le_bytes)?,
        f_beat: side.f_beat,
        delay_symbols: side.delay_symbols,
        samples_per_symbol: side.samples_per_symbol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate_block, SimConfig};

    #[test]
    fn frame_and_truth_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SimConfig { n_symbols: 2000, ..Default::default() };
        let pair = simulate_block(&cfg, 0).unwrap();
        let truth_path = write_ground_truth(dir.path(), "truth", &pair.truth).unwrap();
        let cfg_json = serde_json::to_value(&cfg).unwrap();
        let side = write_frame(dir.path(), "quantum", &pair.quantum, cfg_json, Some(&truth_path)).unwrap();
        let back = read_frame(&side).unwrap();
        assert_eq!(back.samples.len(), pair.quantum.samples.len());
        for (a, b) in back.samples.iter().zip(&pair.quantum.samples) {
            assert_eq!(*a, *b as f32 as f64);
        }
        assert_eq!(back.adc_step, pair.quantum.adc_step);
        assert_eq!(read_ground_truth(&truth_path).unwrap(), pair.truth);
    }

    #[test]
    fn truncated_samples_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SimConfig { n_symbols: 100, ..Default::default() };
        let pair = simulate_block(&cfg, 0).unwrap();
        let side = write_frame(dir.path(), "p", &pair.pilot, serde_json::Value::Null, None).unwrap();
        let data = dir.path().join("p.f32");
        let bytes = fs::read(&data).unwrap();
        fs::write(&data, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(read_frame(&side), Err(SimError::Format(_))));
    }
}

//! File formats: the CSB1 binary CSI stream, the FTW1 window container,
//! CSV exports, JSON helpers, and atomic writes.
//!
//! CSB1 (little-endian):
//! ```text
//! magic "CSB1", u32 K, u32 A, f64 sample_rate_hz, f64 wavelength_m, f64 spacing_hz
//! per frame: f64 timestamp_s, K·A × (f32 re, f32 im) subcarrier-major
//! ```
//!
//! FTW1 (little-endian):
//! ```text
//! magic "FTW1", u32 T, u32 K, u32 C, u32 count
//! per window: C × (f32 mean, f32 sigma), then T·K·C × f32 normalized data
//! ```

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;

use crate::csi::{CsiFrame, CsiStream, LinkId, RadioConfig};
use crate::error::{Error, Result};
use crate::features::InputTensor;
use crate::net::EpochMetrics;
use crate::tensor::Tensor3;

/// Writes via a temp file in the same directory, then renames into place.
pub fn atomic_write(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp{}",
        path.extension().and_then(|e| e.to_str()).unwrap_or(""),
        std::process::id()
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    atomic_write(path, &serde_json::to_vec_pretty(value)?)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

const CSB1_MAGIC: &[u8; 4] = b"CSB1";
const FTW1_MAGIC: &[u8; 4] = b"FTW1";

pub fn write_csb1(stream: &CsiStream, path: impl AsRef<Path>) -> Result<()> {
    let cfg = &stream.config;
    let mut buf = Vec::new();
    buf.extend_from_slice(CSB1_MAGIC);
    buf.extend_from_slice(&(cfg.n_subcarriers as u32).to_le_bytes());
    buf.extend_from_slice(&(cfg.n_rx_antennas as u32).to_le_bytes());
    buf.extend_from_slice(&cfg.sample_rate_hz.to_le_bytes());
    buf.extend_from_slice(&cfg.carrier_wavelength_m.to_le_bytes());
    buf.extend_from_slice(&cfg.subcarrier_spacing_hz.to_le_bytes());
    for f in &stream.frames {
        buf.extend_from_slice(&f.timestamp_s.to_le_bytes());
        for k in 0..cfg.n_subcarriers {
            for a in 0..cfg.n_rx_antennas {
                let z = f.h[(k, a)];
                buf.extend_from_slice(&(z.re as f32).to_le_bytes());
                buf.extend_from_slice(&(z.im as f32).to_le_bytes());
            }
        }
    }
    atomic_write(path, &buf)
}

/// Reads a CSB1 stream. Fields absent from the header (antenna spacing,
/// noise floor) take defaults: spacing λ/2, floor −90 dB, link id 0.
pub fn read_csb1(path: impl AsRef<Path>) -> Result<CsiStream> {
    let bytes = std::fs::read(path)?;
    let bad = |detail: String| Error::Format {
        format: "CSB1".into(),
        detail,
    };
    if bytes.len() < 4 + 8 + 24 || &bytes[0..4] != CSB1_MAGIC {
        return Err(bad("missing CSB1 header".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let k = u32_at(4);
    let a = u32_at(8);
    let sample_rate = f64_at(12);
    let wavelength = f64_at(20);
    let spacing = f64_at(28);
    let config = RadioConfig {
        carrier_wavelength_m: wavelength,
        subcarrier_spacing_hz: spacing,
        n_subcarriers: k,
        n_rx_antennas: a,
        antenna_spacing_m: wavelength / 2.0,
        sample_rate_hz: sample_rate,
        noise_floor_db: -90.0,
    };
    config.validate()?;
    let frame_bytes = 8 + k * a * 8;
    let payload = &bytes[36..];
    if payload.len() % frame_bytes != 0 {
        return Err(bad(format!(
            "payload of {} bytes is not a whole number of {frame_bytes}-byte frames",
            payload.len()
        )));
    }
    let mut frames = Vec::with_capacity(payload.len() / frame_bytes);
    for chunk in payload.chunks_exact(frame_bytes) {
        let timestamp = f64::from_le_bytes(chunk[0..8].try_into().unwrap());
        let mut h = Array2::from_elem((k, a), Complex64::default());
        for i in 0..k * a {
            let off = 8 + i * 8;
            let re = f32::from_le_bytes(chunk[off..off + 4].try_into().unwrap()) as f64;
            let im = f32::from_le_bytes(chunk[off + 4..off + 8].try_into().unwrap()) as f64;
            h[(i / a, i % a)] = Complex64::new(re, im);
        }
        frames.push(CsiFrame {
            h,
            timestamp_s: timestamp,
            link_id: LinkId(0),
        });
    }
    CsiStream::new(config, frames)
}

/// CSV export with columns t,k,a,re,im.
pub fn export_csi_csv(stream: &CsiStream, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("t,k,a,re,im\n");
    for f in &stream.frames {
        for k in 0..f.n_subcarriers() {
            for a in 0..f.n_antennas() {
                let z = f.h[(k, a)];
                out.push_str(&format!("{},{},{},{},{}\n", f.timestamp_s, k, a, z.re, z.im));
            }
        }
    }
    atomic_write(path, out.as_bytes())
}

pub fn write_ftw1(windows: &[InputTensor], path: impl AsRef<Path>) -> Result<()> {
    if windows.is_empty() {
        return Err(Error::Input("no windows to write".into()));
    }
    let (t, k, c) = windows[0].data.shape();
    let mut buf = Vec::new();
    buf.extend_from_slice(FTW1_MAGIC);
    for dim in [t, k, c, windows.len()] {
        buf.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for w in windows {
        if w.data.shape() != (t, k, c) {
            return Err(Error::Shape {
                expected: format!("{t}x{k}x{c}"),
                got: format!("{:?}", w.data.shape()),
            });
        }
        for &(mean, sigma) in &w.stats {
            buf.extend_from_slice(&(mean as f32).to_le_bytes());
            buf.extend_from_slice(&(sigma as f32).to_le_bytes());
        }
        for &v in &w.data.data {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    atomic_write(path, &buf)
}

pub fn read_ftw1(path: impl AsRef<Path>) -> Result<Vec<InputTensor>> {
    let bytes = std::fs::read(path)?;
    let bad = |detail: String| Error::Format {
        format: "FTW1".into(),
        detail,
    };
    if bytes.len() < 20 || &bytes[0..4] != FTW1_MAGIC {
        return Err(bad("missing FTW1 header".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let (t, k, c, count) = (u32_at(4), u32_at(8), u32_at(12), u32_at(16));
    let window_bytes = c * 8 + t * k * c * 4;
    if bytes.len() != 20 + count * window_bytes {
        return Err(bad("payload size mismatch".into()));
    }
    let f32_at =
        |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as f64;
    let mut out = Vec::with_capacity(count);
    let mut pos = 20;
    for _ in 0..count {
        let mut stats = Vec::with_capacity(c);
        for _ in 0..c {
            stats.push((f32_at(pos), f32_at(pos + 4)));
            pos += 8;
        }
        let mut data = Vec::with_capacity(t * k * c);
        for _ in 0..t * k * c {
            data.push(f32_at(pos));
            pos += 4;
        }
        out.push(InputTensor {
            data: Tensor3::from_vec(t, k, c, data),
            stats,
        });
    }
    Ok(out)
}

/// Training metrics CSV: epoch,train_loss,train_joint_px,val_loss,val_joint_px.
pub fn write_metrics_csv(metrics: &[EpochMetrics], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("epoch,train_loss,train_joint_px,val_loss,val_joint_px\n");
    for m in metrics {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            m.epoch,
            m.train_loss,
            m.train_joint_err_px,
            m.val_loss.map_or(String::new(), |v| v.to_string()),
            m.val_joint_err_px.map_or(String::new(), |v| v.to_string()),
        ));
    }
    atomic_write(path, out.as_bytes())
}

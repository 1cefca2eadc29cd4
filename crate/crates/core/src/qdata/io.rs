//! Feature files.
//!
//! ```text
//! "QFT1"  u32 F  u32 T  u32 flags (bit0: label track present)
//! T × F × 4 f32            (t, f, component), components r, i, j, k
//! [T × u32 labels]         when bit0 is set
//! ```
//!
//! All fields little-endian.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, FormatError, Result};
use crate::qdata::{EnergyMatrix, QuaternionSequence};

pub const FEATURES_MAGIC: &[u8; 4] = b"QFT1";
const FLAG_LABELS: u32 = 1;

pub fn encode_features(seq: &QuaternionSequence) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + seq.data().len() * 4);
    out.extend_from_slice(FEATURES_MAGIC);
    out.extend_from_slice(&(seq.features() as u32).to_le_bytes());
    out.extend_from_slice(&(seq.frames() as u32).to_le_bytes());
    let flags = if seq.labels.is_some() { FLAG_LABELS } else { 0 };
    out.extend_from_slice(&flags.to_le_bytes());
    for v in seq.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(labels) = &seq.labels {
        for l in labels {
            out.extend_from_slice(&l.to_le_bytes());
        }
    }
    out
}

fn word(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

pub fn decode_features(bytes: &[u8]) -> Result<QuaternionSequence> {
    if bytes.len() < 16 {
        if bytes.len() >= 4 && &bytes[..4] != FEATURES_MAGIC {
            return Err(bad_magic(&bytes[..4]).into());
        }
        return Err(FormatError::Truncated { expected: 16, found: bytes.len() }.into());
    }
    if &bytes[..4] != FEATURES_MAGIC {
        return Err(bad_magic(&bytes[..4]).into());
    }
    let (nf, nt, flags) = (word(bytes, 4) as usize, word(bytes, 8) as usize, word(bytes, 12));
    if flags & !FLAG_LABELS != 0 {
        return Err(FormatError::MalformedHeader(format!("unknown flag bits {flags:#x}")).into());
    }
    let payload = nf * nt * 4 * 4;
    let labels = if flags & FLAG_LABELS != 0 { nt * 4 } else { 0 };
    let expected = 16 + payload + labels;
    if bytes.len() < expected {
        return Err(FormatError::Truncated { expected, found: bytes.len() }.into());
    }
    if bytes.len() > expected {
        return Err(FormatError::MalformedHeader(format!(
            "{} bytes after the declared payload",
            bytes.len() - expected
        ))
        .into());
    }
    let data = bytes[16..16 + payload]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let labels = (labels > 0).then(|| {
        bytes[16 + payload..]
            .chunks_exact(4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .collect()
    });
    QuaternionSequence::new(nf, nt, data, labels)
}

fn bad_magic(magic: &[u8]) -> FormatError {
    if &magic[..3] == b"QFT" {
        FormatError::VersionMismatch {
            found: String::from_utf8_lossy(magic).into_owned(),
            expected: "QFT1".into(),
        }
    } else {
        FormatError::MalformedHeader("not a feature file".into())
    }
}

pub fn write_features(path: &Path, seq: &QuaternionSequence) -> Result<()> {
    std::fs::write(path, encode_features(seq))?;
    Ok(())
}

pub fn read_features(path: &Path) -> Result<QuaternionSequence> {
    decode_features(&std::fs::read(path)?)
}

#[derive(Deserialize)]
struct EnergyRow {
    t: usize,
    f: usize,
    e: f64,
}

/// Reads an energy matrix from CSV with header `t,f,e`. Every `(f, t)` cell
/// of the bounding grid must appear exactly once.
pub fn read_energy_csv(path: &Path, frame_shift: f64) -> Result<EnergyMatrix> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["t", "f", "e"] {
        return Err(FormatError::MalformedHeader(format!(
            "expected header t,f,e, found {}",
            headers.iter().collect::<Vec<_>>().join(",")
        ))
        .into());
    }
    let mut cells = BTreeMap::new();
    for row in reader.deserialize() {
        let row: EnergyRow = row?;
        if cells.insert((row.f, row.t), row.e).is_some() {
            return Err(Error::Config(format!("duplicate energy cell t={} f={}", row.t, row.f)));
        }
    }
    let nf = cells.keys().map(|&(f, _)| f + 1).max().unwrap_or(0);
    let nt = cells.keys().map(|&(_, t)| t + 1).max().unwrap_or(0);
    if cells.len() != nf * nt {
        return Err(Error::Config(format!(
            "energy grid {nf}x{nt} has {} of {} cells",
            cells.len(),
            nf * nt
        )));
    }
    // BTreeMap order is (f, t), which is the matrix's row-major order
    EnergyMatrix::new(nf, nt, cells.into_values().collect(), frame_shift)
}

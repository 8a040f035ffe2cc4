//! 50%-overlap windowing and window files.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{ByteReader, ByteWriter};

use super::SignalRecord;

pub const WINDOW: usize = 256;
pub const HOP: usize = 128;

pub const FXW_MAGIC: [u8; 4] = *b"FXW1";
pub const FXW_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct WindowBatch {
    pub id: String,
    pub windows: Vec<Vec<f64>>,
    /// Start of the first window in the source record.
    pub offset: usize,
    /// Samples discarded in total (front and back).
    pub leftover: usize,
}

impl WindowBatch {
    pub fn starts(&self) -> Vec<usize> {
        (0..self.windows.len()).map(|i| self.offset + i * HOP).collect()
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

/// `(N_w, leftover)` for a record of `len` samples.
pub fn window_count(len: usize) -> Result<(usize, usize)> {
    if len < WINDOW {
        return Err(Error::RecordTooShort { len, needed: WINDOW });
    }
    let n = (len - WINDOW) / HOP + 1;
    Ok((n, len - (WINDOW + (n - 1) * HOP)))
}

/// Split a record into overlapping windows. With a seed the first-window
/// offset is uniform in `[0, leftover]`; without one it is `leftover / 2`.
pub fn make_windows(record: &SignalRecord, seed: Option<u64>) -> Result<WindowBatch> {
    let (n, leftover) = window_count(record.samples.len())?;
    let offset = match seed {
        Some(s) => ChaCha8Rng::seed_from_u64(s).random_range(0..=leftover),
        None => leftover / 2,
    };
    let windows = (0..n)
        .map(|i| record.samples[offset + i * HOP..offset + i * HOP + WINDOW].to_vec())
        .collect();
    Ok(WindowBatch { id: record.id.clone(), windows, offset, leftover })
}

/// Binary window file: magic, version, window count, window length, offset,
/// id, then little-endian f32 samples.
pub fn encode_windows(batch: &WindowBatch) -> Result<Vec<u8>> {
    let mut w = ByteWriter::new();
    w.bytes(&FXW_MAGIC);
    w.u16(FXW_VERSION);
    w.u32(batch.windows.len() as u32);
    let len = batch.windows.first().map_or(0, Vec::len);
    if batch.windows.iter().any(|x| x.len() != len) {
        return Err(Error::Shape("windows of unequal length".into()));
    }
    w.u32(len as u32);
    w.u32(batch.offset as u32);
    w.u32(batch.leftover as u32);
    w.short_str(&batch.id)?;
    for x in &batch.windows {
        x.iter().for_each(|&v| w.f32(v as f32));
    }
    Ok(w.buf)
}

pub fn decode_windows(bytes: &[u8]) -> Result<WindowBatch> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(4)?;
    if magic != FXW_MAGIC {
        return Err(Error::BadMagic { expected: FXW_MAGIC, found: magic.try_into().expect("4 bytes") });
    }
    let version = r.u16()?;
    if version != FXW_VERSION {
        return Err(Error::VersionMismatch { found: version, supported: FXW_VERSION });
    }
    let (n, len) = (r.u32()? as usize, r.u32()? as usize);
    let offset = r.u32()? as usize;
    let leftover = r.u32()? as usize;
    let id = r.short_str()?;
    let windows = (0..n)
        .map(|_| (0..len).map(|_| r.f32().map(f64::from)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(WindowBatch { id, windows, offset, leftover })
}

pub fn write_windows(path: &Path, batch: &WindowBatch) -> Result<()> {
    std::fs::write(path, encode_windows(batch)?)?;
    Ok(())
}

pub fn read_windows(path: &Path) -> Result<WindowBatch> {
    let bytes = std::fs::read(path).map_err(|source| Error::MissingFile { path: path.to_path_buf(), source })?;
    decode_windows(&bytes)
}

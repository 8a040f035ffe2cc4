//! Recording manifests (JSON lines) and stratified splitting.
//!
//! Each manifest line is an object
//! `{"id": .., "label": .., "fs": .., "path": .., "dtype": "i16"|"f32", "scale": ..}`
//! where `path` is relative to the manifest, `label` may be null and the
//! sample value is `raw * scale`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Exec};

use super::{Label, SignalRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleType {
    #[default]
    I16,
    F32,
}

impl SampleType {
    pub fn width(self) -> usize {
        match self {
            SampleType::I16 => 2,
            SampleType::F32 => 4,
        }
    }
}

fn unit_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    #[serde(default)]
    pub label: Option<String>,
    pub fs: f64,
    pub path: PathBuf,
    #[serde(default)]
    pub dtype: SampleType,
    #[serde(default = "unit_scale")]
    pub scale: f64,
}

impl ManifestEntry {
    pub fn label(&self) -> Result<Option<Label>> {
        self.label.as_deref().map(str::parse).transpose()
    }
}

/// Parse manifest text. Blank lines are skipped; line numbers are 1-based.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let e: ManifestEntry = serde_json::from_str(line)
            .map_err(|err| Error::ManifestHeader { line: i + 1, message: err.to_string() })?;
        if !(e.fs > 0.0 && e.fs.is_finite()) || !e.scale.is_finite() {
            return Err(Error::ManifestHeader { line: i + 1, message: format!("bad fs {} or scale {}", e.fs, e.scale) });
        }
        e.label()?;
        entries.push(e);
    }
    if entries.is_empty() {
        return Err(Error::EmptyManifest);
    }
    Ok(entries)
}

fn decode_samples(bytes: &[u8], dtype: SampleType, scale: f64) -> Result<Vec<f64>> {
    let w = dtype.width();
    if bytes.len() % w != 0 {
        return Err(Error::Truncated { needed: bytes.len().div_ceil(w) * w, available: bytes.len() });
    }
    Ok(bytes
        .chunks_exact(w)
        .map(|c| match dtype {
            SampleType::I16 => i16::from_le_bytes([c[0], c[1]]) as f64 * scale,
            SampleType::F32 => f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64 * scale,
        })
        .collect())
}

pub fn load_entry(base: &Path, e: &ManifestEntry) -> Result<SignalRecord> {
    let path = base.join(&e.path);
    let bytes = std::fs::read(&path).map_err(|source| Error::MissingFile { path, source })?;
    Ok(SignalRecord::new(e.id.clone(), decode_samples(&bytes, e.dtype, e.scale)?, e.fs, e.label()?))
}

/// Read every recording listed in a manifest, in manifest order.
pub fn load_dataset(manifest: &Path, exec: Exec) -> Result<Vec<SignalRecord>> {
    let text =
        std::fs::read_to_string(manifest).map_err(|source| Error::MissingFile { path: manifest.to_path_buf(), source })?;
    let entries = parse_manifest(&text)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    par::map(exec, &entries, |e| load_entry(base, e)).into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded stratified split. Per-class test quotas follow the global
/// proportions, rounded by largest remainder so they sum to `test_count`.
pub fn stratified_split(labels: &[Option<Label>], test_count: usize, seed: u64) -> Result<Split> {
    if test_count > labels.len() {
        return Err(Error::InvalidArgument(format!("test set of {test_count} from {} records", labels.len())));
    }
    let mut strata: BTreeMap<Option<Label>, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        strata.entry(*l).or_default().push(i);
    }
    let total = labels.len().max(1);
    let mut quotas: Vec<(usize, usize)> = strata
        .values()
        .map(|v| {
            let exact = test_count * v.len();
            (exact / total, exact % total)
        })
        .collect();
    let assigned: usize = quotas.iter().map(|q| q.0).sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| quotas[b].1.cmp(&quotas[a].1).then(a.cmp(&b)));
    for &k in order.iter().take(test_count - assigned) {
        quotas[k].0 += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = Vec::with_capacity(test_count);
    for (members, (quota, _)) in strata.values().zip(quotas) {
        let mut m = members.clone();
        m.shuffle(&mut rng);
        test.extend_from_slice(&m[..quota]);
    }
    test.sort_unstable();
    let mut in_test = vec![false; labels.len()];
    test.iter().for_each(|&i| in_test[i] = true);
    let train = (0..labels.len()).filter(|&i| !in_test[i]).collect();
    Ok(Split { train, test })
}

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::topo1::{read_sample, write_atomic};
use super::{DatasetError, SampleRecord};
use crate::model::DesignDomain;
use crate::sampler::{SplitLabel, SplitPlan};
use crate::simp::SimpConfig;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u16 = 1;
pub const SAMPLE_EXTENSION: &str = "topo";

pub fn sample_file_name(sample_id: u64) -> String {
    format!("sample_{sample_id:06}.{SAMPLE_EXTENSION}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub sample_id: u64,
    /// File name relative to the dataset directory.
    pub file: String,
    pub split: Option<SplitLabel>,
    pub scenario_id: usize,
    pub vf_target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailedSample {
    pub sample_id: u64,
    pub error: String,
}

/// Affine normalization statistics of one channel over the train split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelStats {
    pub name: String,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: u16,
    pub generator: String,
    pub domain: DesignDomain,
    pub simp: SimpConfig,
    pub catalog_hash: String,
    pub global_seed: u64,
    pub sample_count: usize,
    /// Sorted by `sample_id`.
    pub samples: Vec<ManifestEntry>,
    #[serde(default)]
    pub failures: Vec<FailedSample>,
    #[serde(default)]
    pub split_plan: Option<SplitPlan>,
    /// Present once splits are assigned.
    #[serde(default)]
    pub normalization: Option<Vec<ChannelStats>>,
}

impl DatasetManifest {
    pub fn path(dir: &Path) -> PathBuf {
        dir.join(MANIFEST_FILE)
    }

    pub fn load(dir: &Path) -> Result<Self, DatasetError> {
        let text = fs::read(Self::path(dir))?;
        let m: Self = serde_json::from_slice(&text)?;
        if m.format_version != MANIFEST_VERSION {
            return Err(DatasetError::VersionMismatch {
                expected: MANIFEST_VERSION,
                found: m.format_version,
            });
        }
        Ok(m)
    }

    /// Writes `manifest.json` atomically.
    pub fn save(&self, dir: &Path) -> Result<(), DatasetError> {
        let mut text = serde_json::to_vec_pretty(self)?;
        text.push(b'\n');
        write_atomic(&Self::path(dir), &text)
    }

    pub fn entry(&self, sample_id: u64) -> Option<&ManifestEntry> {
        self.samples
            .binary_search_by_key(&sample_id, |e| e.sample_id)
            .ok()
            .map(|i| &self.samples[i])
    }

    pub fn ids_with(&self, split: SplitLabel) -> Vec<u64> {
        self.samples
            .iter()
            .filter(|e| e.split == Some(split))
            .map(|e| e.sample_id)
            .collect()
    }

    /// Checks ids are unique and sorted, counts agree with the listing and the
    /// sample files on disk, and every listed file reads back with matching
    /// metadata. Split labels live in the manifest; a file only disagrees if
    /// it carries a different label. Returns the number of samples read.
    pub fn verify(&self, dir: &Path) -> Result<usize, DatasetError> {
        let bad = |m: String| Err(DatasetError::ManifestMismatch(m));
        if self.sample_count != self.samples.len() {
            return bad(format!(
                "sample_count {} but {} entries",
                self.sample_count,
                self.samples.len()
            ));
        }
        if self.samples.windows(2).any(|w| w[0].sample_id >= w[1].sample_id) {
            return bad("sample ids are not unique and ascending".into());
        }
        let listed: BTreeSet<&str> = self.samples.iter().map(|e| e.file.as_str()).collect();
        let mut on_disk = 0;
        for entry in fs::read_dir(dir)? {
            let name = entry?.file_name();
            let name = name.to_string_lossy();
            if name.ends_with(&format!(".{SAMPLE_EXTENSION}")) {
                on_disk += 1;
                if !listed.contains(name.as_ref()) {
                    return bad(format!("{name} is not listed in the manifest"));
                }
            }
        }
        if on_disk != self.samples.len() {
            return bad(format!("{} entries but {on_disk} sample files", self.samples.len()));
        }
        for e in &self.samples {
            let rec = read_sample(&dir.join(&e.file))?;
            let m = &rec.meta;
            if m.sample_id != e.sample_id
                || m.spec.scenario.id != e.scenario_id
                || m.spec.vf_target != e.vf_target
                || m.split.is_some_and(|s| Some(s) != e.split)
            {
                return bad(format!("{} disagrees with its manifest entry", e.file));
            }
            if rec.shape() != (self.domain.nely, self.domain.nelx) {
                return bad(format!("{} has shape {:?}", e.file, rec.shape()));
            }
        }
        Ok(self.samples.len())
    }
}

/// Per-channel mean, standard deviation and range, accumulated in the order
/// given. Channels are matched by name; the first record fixes the list.
pub fn channel_stats<'a>(records: impl IntoIterator<Item = &'a SampleRecord>) -> Vec<ChannelStats> {
    struct Acc {
        name: String,
        n: f64,
        mean: f64,
        m2: f64,
        min: f64,
        max: f64,
    }
    let mut accs: Vec<Acc> = Vec::new();
    for (k, rec) in records.into_iter().enumerate() {
        if k == 0 {
            accs = rec
                .channels
                .iter()
                .map(|c| Acc {
                    name: c.name.clone(),
                    n: 0.0,
                    mean: 0.0,
                    m2: 0.0,
                    min: f64::INFINITY,
                    max: f64::NEG_INFINITY,
                })
                .collect();
        }
        for acc in &mut accs {
            let Some(ch) = rec.channel(&acc.name) else {
                continue;
            };
            for &v in ch.values.iter() {
                // Welford update
                let v = v as f64;
                acc.n += 1.0;
                let d = v - acc.mean;
                acc.mean += d / acc.n;
                acc.m2 += d * (v - acc.mean);
                acc.min = acc.min.min(v);
                acc.max = acc.max.max(v);
            }
        }
    }
    accs.into_iter()
        .map(|a| ChannelStats {
            name: a.name,
            mean: a.mean,
            std: if a.n > 0.0 { (a.m2 / a.n).max(0.0).sqrt() } else { 0.0 },
            min: a.min,
            max: a.max,
        })
        .collect()
}

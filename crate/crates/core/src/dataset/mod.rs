//! Channel encoding of samples, the TOPO1 container, dataset manifests and
//! image export.

mod manifest;
mod pgm;
mod record;
pub mod topo1;

use std::io;

use thiserror::Error;

pub use manifest::{
    channel_stats, sample_file_name, ChannelStats, DatasetManifest, FailedSample, ManifestEntry,
    MANIFEST_FILE, MANIFEST_VERSION, SAMPLE_EXTENSION,
};
pub use pgm::{to_pgm, write_pgm};
pub use record::{
    encode_sample, select_field_combo, Channel, FieldCombo, SampleMeta, SampleRecord,
    SimpSummary, CHANNELS, INPUT_CHANNELS,
};
pub use topo1::{read_sample, write_sample, FORMAT_VERSION, MAGIC};

use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("not a TOPO1 file (bad magic)")]
    BadMagic,
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u16, found: u16 },
    #[error("file is truncated")]
    TruncatedFile,
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("{what}: expected shape {expected:?}, found {found:?}")]
    ShapeMismatch {
        what: String,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("unknown field combo {0} (valid: 0-8)")]
    UnknownCombo(u8),
    #[error("record has no channel `{0}`")]
    MissingChannel(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("malformed file: {0}")]
    Malformed(String),
    #[error("manifest does not match dataset: {0}")]
    ManifestMismatch(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("metadata: {0}")]
    Metadata(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

//! TOPO1 sample container.
//!
//! ```text
//! magic      5 bytes   "TOPO1"
//! version    u16       FORMAT_VERSION
//! nely       u16
//! nelx       u16
//! channels   u16       count C
//! C times:   u8 name length, ASCII name, nely*nelx f32 (row-major)
//! target     nely*nelx f32 (row-major)
//! meta_len   u32
//! meta       meta_len bytes of compact JSON
//! crc32      u32       CRC-32 (IEEE) of every preceding byte
//! ```
//!
//! All integers and floats are little-endian. Row 0 is the top of the domain.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Channel, DatasetError, SampleMeta, SampleRecord};
use crate::model::Grid;

pub const MAGIC: &[u8; 5] = b"TOPO1";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 5 + 2 * 4;

/// Serializes a record. The record is validated first.
pub fn encode(record: &SampleRecord) -> Result<Vec<u8>, DatasetError> {
    record.validate()?;
    let (rows, cols) = record.shape();
    let dim = |v: usize, what: &str| {
        u16::try_from(v).map_err(|_| DatasetError::InvalidRecord(format!("{what} {v} exceeds u16")))
    };
    let meta = serde_json::to_vec(&record.meta)?;
    let meta_len = u32::try_from(meta.len())
        .map_err(|_| DatasetError::InvalidRecord("metadata exceeds 4 GiB".into()))?;
    let cells = rows * cols;
    let mut out = Vec::with_capacity(
        HEADER_LEN + (record.channels.len() + 1) * (cells * 4 + 16) + meta.len() + 8,
    );
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&dim(rows, "nely")?.to_le_bytes());
    out.extend_from_slice(&dim(cols, "nelx")?.to_le_bytes());
    out.extend_from_slice(&dim(record.channels.len(), "channel count")?.to_le_bytes());
    for ch in &record.channels {
        out.push(ch.name.len() as u8);
        out.extend_from_slice(ch.name.as_bytes());
        for v in ch.values.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for v in record.target.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&meta_len.to_le_bytes());
    out.extend_from_slice(&meta);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DatasetError> {
        let end = self.pos.checked_add(n).ok_or(DatasetError::TruncatedFile)?;
        let s = self.bytes.get(self.pos..end).ok_or(DatasetError::TruncatedFile)?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, DatasetError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, DatasetError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, DatasetError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn grid(&mut self, rows: usize, cols: usize) -> Result<Grid<f32>, DatasetError> {
        let raw = self.take(rows * cols * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Ok(Grid::from_vec(rows, cols, data).expect("length matches shape"))
    }
}

/// Parses and verifies a TOPO1 byte buffer.
pub fn decode(bytes: &[u8]) -> Result<SampleRecord, DatasetError> {
    let head = &bytes[..bytes.len().min(MAGIC.len())];
    if head != &MAGIC[..head.len()] {
        return Err(DatasetError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(DatasetError::TruncatedFile);
    }
    let mut cur = Cursor { bytes, pos: MAGIC.len() };
    let version = cur.u16()?;
    if version != FORMAT_VERSION {
        return Err(DatasetError::VersionMismatch {
            expected: FORMAT_VERSION,
            found: version,
        });
    }
    let rows = cur.u16()? as usize;
    let cols = cur.u16()? as usize;
    let count = cur.u16()? as usize;

    // walk the layout before trusting any content
    let mut names = Vec::with_capacity(count);
    let mut grids = Vec::with_capacity(count);
    for _ in 0..count {
        let len = cur.u8()? as usize;
        names.push(cur.take(len)?);
        grids.push(cur.pos);
        cur.take(rows * cols * 4)?;
    }
    let target_at = cur.pos;
    cur.take(rows * cols * 4)?;
    let meta_len = cur.u32()? as usize;
    let meta = cur.take(meta_len)?;
    let body_end = cur.pos;
    let stored = cur.u32()?;
    if cur.pos != bytes.len() {
        return Err(DatasetError::Malformed(format!(
            "{} trailing bytes after checksum",
            bytes.len() - cur.pos
        )));
    }
    let computed = crc32fast::hash(&bytes[..body_end]);
    if stored != computed {
        return Err(DatasetError::ChecksumMismatch { stored, computed });
    }

    let mut channels = Vec::with_capacity(count);
    for (name, at) in names.into_iter().zip(grids) {
        let name = std::str::from_utf8(name)
            .ok()
            .filter(|s| s.is_ascii())
            .ok_or_else(|| DatasetError::Malformed("channel name is not ASCII".into()))?;
        let values = Cursor { bytes, pos: at }.grid(rows, cols)?;
        channels.push(Channel {
            name: name.to_string(),
            values,
        });
    }
    let target = Cursor { bytes, pos: target_at }.grid(rows, cols)?;
    let meta: SampleMeta = serde_json::from_slice(meta)?;
    let record = SampleRecord {
        channels,
        target,
        meta,
    };
    record.validate()?;
    Ok(record)
}

/// Writes a record to `path` through a temporary file and rename, so readers
/// never see a partial file.
pub fn write_sample(record: &SampleRecord, path: &Path) -> Result<(), DatasetError> {
    let bytes = encode(record)?;
    write_atomic(path, &bytes)
}

pub fn read_sample(path: &Path) -> Result<SampleRecord, DatasetError> {
    decode(&fs::read(path)?)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    {
        let mut f = fs::File::create(tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}

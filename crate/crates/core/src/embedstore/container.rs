//! Binary matrix container.
//!
//! Layout (little-endian):
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic (`ADCE` or `ADCP`)      |
//! | 4      | 4    | version, u32 (= 1)            |
//! | 8      | 8    | rows N, u64                   |
//! | 16     | 4    | cols d, u32                   |
//! | 20     | 4    | dtype code, u32 (1 = f32)     |
//! | 24     | 4·N·d| row-major f32 values          |
//!
//! Row ids live in a sidecar text file `<path>.ids`, one id per line.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::EmbedError;

pub const EMBEDDING_MAGIC: [u8; 4] = *b"ADCE";
pub const PROB_MAGIC: [u8; 4] = *b"ADCP";
pub const CONTAINER_VERSION: u32 = 1;
pub const DTYPE_F32: u32 = 1;
pub const HEADER_LEN: u64 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContainerHeader {
    pub magic: [u8; 4],
    pub version: u32,
    pub rows: u64,
    pub cols: u32,
    pub dtype: u32,
}

impl ContainerHeader {
    pub fn payload_len(&self) -> Option<u64> {
        self.rows.checked_mul(self.cols as u64)?.checked_mul(4)
    }

    fn to_bytes(self) -> [u8; HEADER_LEN as usize] {
        let mut b = [0u8; HEADER_LEN as usize];
        b[0..4].copy_from_slice(&self.magic);
        b[4..8].copy_from_slice(&self.version.to_le_bytes());
        b[8..16].copy_from_slice(&self.rows.to_le_bytes());
        b[16..20].copy_from_slice(&self.cols.to_le_bytes());
        b[20..24].copy_from_slice(&self.dtype.to_le_bytes());
        b
    }

    fn from_bytes(b: &[u8; HEADER_LEN as usize]) -> Self {
        ContainerHeader {
            magic: b[0..4].try_into().unwrap(),
            version: u32::from_le_bytes(b[4..8].try_into().unwrap()),
            rows: u64::from_le_bytes(b[8..16].try_into().unwrap()),
            cols: u32::from_le_bytes(b[16..20].try_into().unwrap()),
            dtype: u32::from_le_bytes(b[20..24].try_into().unwrap()),
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".ids");
    PathBuf::from(s)
}

/// Reads and checks only the header: magic, version, dtype and file length.
pub fn read_header(path: &Path, magic: [u8; 4]) -> Result<ContainerHeader, EmbedError> {
    let mut file = fs::File::open(path)?;
    let file_len = file.metadata()?.len();
    if file_len < HEADER_LEN {
        return Err(EmbedError::Truncated { expected: HEADER_LEN, actual: file_len });
    }
    let mut hb = [0u8; HEADER_LEN as usize];
    file.read_exact(&mut hb)?;
    let header = ContainerHeader::from_bytes(&hb);
    if header.magic != magic {
        return Err(EmbedError::BadMagic { expected: magic, found: header.magic });
    }
    if header.version != CONTAINER_VERSION {
        return Err(EmbedError::Version(header.version));
    }
    if header.dtype != DTYPE_F32 {
        return Err(EmbedError::Dtype(header.dtype));
    }
    let expected = header
        .payload_len()
        .and_then(|p| p.checked_add(HEADER_LEN))
        .ok_or(EmbedError::Truncated { expected: u64::MAX, actual: file_len })?;
    if file_len < expected {
        return Err(EmbedError::Truncated { expected, actual: file_len });
    }
    if file_len > expected {
        return Err(EmbedError::TrailingBytes { expected, actual: file_len });
    }
    Ok(header)
}

/// Reads a container with the given magic. Values are checked for finiteness.
pub fn read_container(path: &Path, magic: [u8; 4]) -> Result<(ContainerHeader, Vec<f32>), EmbedError> {
    let header = read_header(path, magic)?;
    let mut file = fs::File::open(path)?;
    let mut bytes = Vec::with_capacity((header.payload_len().unwrap() + HEADER_LEN) as usize);
    file.read_to_end(&mut bytes)?;
    let cols = header.cols as usize;
    let data: Vec<f32> = bytes[HEADER_LEN as usize..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(EmbedError::NonFinite { row: pos / cols.max(1), col: pos % cols.max(1) });
    }
    Ok((header, data))
}

pub fn write_container(path: &Path, magic: [u8; 4], rows: usize, cols: usize, data: &[f32]) -> Result<(), EmbedError> {
    assert_eq!(data.len(), rows * cols, "data length must equal rows * cols");
    let header = ContainerHeader {
        magic,
        version: CONTAINER_VERSION,
        rows: rows as u64,
        cols: u32::try_from(cols).map_err(|_| EmbedError::TooWide(cols))?,
        dtype: DTYPE_F32,
    };
    let mut buf = Vec::with_capacity(HEADER_LEN as usize + data.len() * 4);
    buf.extend_from_slice(&header.to_bytes());
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    crate::lineio::write_atomic(path, &buf)?;
    Ok(())
}

pub fn write_ids(path: &Path, ids: &[String]) -> Result<(), EmbedError> {
    let mut buf = BufWriter::new(Vec::new());
    for id in ids {
        writeln!(buf, "{id}")?;
    }
    let bytes = buf.into_inner().map_err(|e| e.into_error())?;
    crate::lineio::write_atomic(&sidecar_path(path), &bytes)?;
    Ok(())
}

pub fn read_ids(path: &Path) -> Result<Vec<String>, EmbedError> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            EmbedError::MissingSidecar(side.clone())
        } else {
            EmbedError::Io(e)
        }
    })?;
    Ok(text.lines().map(str::to_string).collect())
}

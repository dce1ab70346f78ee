//! `AVT1` tensor container.
//!
//! Layout (little-endian):
//! - magic: `b"AVT1"`
//! - version: u32 (= 1)
//! - width, height, frames: u32
//! - frame_ms: f32
//! - values: `width * height * frames` f32, frame-major

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::AlignmentTensor;

pub const MAGIC: [u8; 4] = *b"AVT1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;

/// Header fields of an `AVT1` container.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvtHeader {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub frame_ms: f32,
}

pub fn encode(tensor: &AlignmentTensor) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * tensor.values().len());
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    for d in [tensor.width(), tensor.height(), tensor.frames()] {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    buf.extend_from_slice(&tensor.frame_ms().to_le_bytes());
    for v in tensor.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode_header(bytes: &[u8]) -> Result<AvtHeader> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "header needs {HEADER_LEN} bytes, got {}",
            bytes.len()
        )));
    }
    if bytes[..4] != MAGIC {
        return Err(Error::Format(format!("bad magic {:02x?}", &bytes[..4])));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    Ok(AvtHeader {
        width: word(8) as usize,
        height: word(12) as usize,
        frames: word(16) as usize,
        frame_ms: f32::from_le_bytes(bytes[20..24].try_into().unwrap()),
    })
}

pub fn decode(bytes: &[u8]) -> Result<AlignmentTensor> {
    let header = decode_header(bytes)?;
    let count = header
        .width
        .checked_mul(header.height)
        .and_then(|n| n.checked_mul(header.frames))
        .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != count * 4 {
        return Err(Error::Format(format!(
            "payload holds {} bytes, expected {} for {}x{}x{}",
            payload.len(),
            count * 4,
            header.width,
            header.height,
            header.frames
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    AlignmentTensor::new(header.width, header.height, header.frames, header.frame_ms, values)
        .map_err(|e| Error::Format(e.to_string()))
}

pub fn read(path: impl AsRef<Path>) -> Result<AlignmentTensor> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Reads only the header, without loading the payload.
pub fn read_header(path: impl AsRef<Path>) -> Result<AvtHeader> {
    let path = path.as_ref();
    let mut buf = [0u8; HEADER_LEN];
    File::open(path)
        .and_then(|mut f| f.read_exact(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    decode_header(&buf)
}

pub fn write(path: impl AsRef<Path>, tensor: &AlignmentTensor) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    w.write_all(&encode(tensor))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> AlignmentTensor {
        AlignmentTensor::from_fn(3, 2, 2, 10.0, |x, y, t| (x + 3 * y + 6 * t) as f32 * 0.5).unwrap()
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&sample());
        assert_eq!(&bytes[..4], &[0x41, 0x56, 0x54, 0x31]);
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &3u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &2u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &2u32.to_le_bytes());
        assert_eq!(&bytes[20..24], &10f32.to_le_bytes());
        assert_eq!(bytes.len(), HEADER_LEN + 12 * 4);
        // element (1, 0, 1) sits at offset 1*6 + 0*3 + 1 = 7
        assert_eq!(&bytes[24 + 7 * 4..24 + 8 * 4], &3.5f32.to_le_bytes());
    }

    #[test]
    fn rejects_bad_magic_version_and_length() {
        let good = encode(&sample());
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(Error::Format(_))));

        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(decode(&bad), Err(Error::Format(_))));

        assert!(matches!(decode(&good[..good.len() - 1]), Err(Error::Format(_))));
        assert!(matches!(decode(&good[..10]), Err(Error::Format(_))));

        let mut long = good.clone();
        long.extend_from_slice(&[0, 0, 0, 0]);
        assert!(matches!(decode(&long), Err(Error::Format(_))));
    }

    #[test]
    fn rejects_negative_payload() {
        let mut bytes = encode(&sample());
        bytes[24..28].copy_from_slice(&(-1.0f32).to_le_bytes());
        assert!(matches!(decode(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.avt");
        write(&path, &sample()).unwrap();
        assert_eq!(read(&path).unwrap(), sample());
        assert_eq!(read_header(&path).unwrap().frames, 2);
    }
}

//! Byte-level parsers for the IDX (MNIST) and CIFAR-10 binary formats.

use alloc::format;
use alloc::vec::Vec;

use crate::datagen::Images;
use crate::error::DataError;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
pub const CIFAR_RECORD_LEN: usize = 1 + 3 * 1024;

fn format_err(offset: usize, reason: impl Into<alloc::string::String>) -> DataError {
    DataError::Format {
        offset,
        reason: reason.into(),
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32, DataError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| {
            format_err(
                bytes.len(),
                format!("header truncated, needed 4 bytes at offset {offset}"),
            )
        })
}

fn payload(bytes: &[u8], start: usize, len: usize) -> Result<&[u8], DataError> {
    bytes.get(start..start + len).ok_or_else(|| {
        format_err(
            bytes.len(),
            format!("payload truncated: expected {len} bytes from offset {start}"),
        )
    })
}

/// Parses an IDX image file (`u8`, 3 dimensions) into single-channel images.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Images, DataError> {
    let magic = read_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(format_err(
            0,
            format!("bad image magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"),
        ));
    }
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    if rows == 0 || cols == 0 {
        return Err(format_err(8, "zero image dimension"));
    }
    let data = payload(bytes, 16, count * rows * cols)?;
    if bytes.len() != 16 + data.len() {
        return Err(format_err(16 + data.len(), "trailing bytes after payload"));
    }
    Images::from_pixels(rows, cols, 1, data.to_vec())
}

/// Parses an IDX label file (`u8`, 1 dimension).
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, DataError> {
    let magic = read_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(format_err(
            0,
            format!("bad label magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"),
        ));
    }
    let count = read_u32(bytes, 4)? as usize;
    let data = payload(bytes, 8, count)?;
    if bytes.len() != 8 + count {
        return Err(format_err(8 + count, "trailing bytes after payload"));
    }
    Ok(data.to_vec())
}

/// Parses concatenated CIFAR-10 records: one label byte, then the red,
/// green and blue 32x32 planes. Output images are interleaved HWC.
pub fn parse_cifar(bytes: &[u8]) -> Result<(Images, Vec<u8>), DataError> {
    if bytes.is_empty() || bytes.len() % CIFAR_RECORD_LEN != 0 {
        let whole = bytes.len() / CIFAR_RECORD_LEN * CIFAR_RECORD_LEN;
        return Err(format_err(
            whole,
            format!(
                "{} bytes is not a multiple of the {CIFAR_RECORD_LEN}-byte record",
                bytes.len()
            ),
        ));
    }
    let n = bytes.len() / CIFAR_RECORD_LEN;
    let mut labels = Vec::with_capacity(n);
    let mut pixels = Vec::with_capacity(n * 3072);
    for rec in bytes.chunks_exact(CIFAR_RECORD_LEN) {
        labels.push(rec[0]);
        let planes = &rec[1..];
        for p in 0..1024 {
            pixels.extend_from_slice(&[planes[p], planes[1024 + p], planes[2048 + p]]);
        }
    }
    Ok((Images::from_pixels(32, 32, 3, pixels)?, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn idx_images(magic: u32, count: u32, pixels: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        for v in [magic, count, 28, 28] {
            out.extend_from_slice(&v.to_be_bytes());
        }
        out.extend_from_slice(pixels);
        out
    }

    #[test]
    fn idx_roundtrip_and_scaling() {
        let mut px = vec![0u8; 2 * 784];
        px[0] = 255;
        let images = parse_idx_images(&idx_images(IDX_IMAGES_MAGIC, 2, &px)).unwrap();
        assert_eq!(images.len(), 2);
        assert_eq!(images.shape(), [28, 28, 1]);
        assert_eq!(images.value(0, 0, 0, 0), 1.0);
    }

    #[test]
    fn idx_bad_magic_and_truncation_name_offsets() {
        let px = vec![0u8; 784];
        let err = parse_idx_images(&idx_images(0x0000_0802, 1, &px)).unwrap_err();
        assert!(matches!(err, DataError::Format { offset: 0, .. }));
        let err = parse_idx_images(&idx_images(IDX_IMAGES_MAGIC, 2, &px)).unwrap_err();
        assert!(matches!(err, DataError::Format { offset: 800, .. }));
        assert!(parse_idx_images(&[0, 0, 8]).is_err());
    }

    #[test]
    fn idx_labels() {
        let mut bytes = IDX_LABELS_MAGIC.to_be_bytes().to_vec();
        bytes.extend_from_slice(&3u32.to_be_bytes());
        bytes.extend_from_slice(&[0, 1, 7]);
        assert_eq!(parse_idx_labels(&bytes).unwrap(), vec![0, 1, 7]);
        bytes.pop();
        assert!(parse_idx_labels(&bytes).is_err());
    }

    #[test]
    fn cifar_planes_become_pixels() {
        let mut rec = vec![0u8; 2 * CIFAR_RECORD_LEN];
        rec[0] = 3;
        rec[1..1025].fill(255);
        rec[CIFAR_RECORD_LEN] = 9;
        let (images, labels) = parse_cifar(&rec).unwrap();
        assert_eq!(labels, vec![3, 9]);
        assert_eq!(images.shape(), [32, 32, 3]);
        for y in [0, 17, 31] {
            assert_eq!(images.value(0, y, 5, 0), 1.0);
            assert_eq!(images.value(0, y, 5, 1), 0.0);
            assert_eq!(images.value(0, y, 5, 2), 0.0);
        }
        assert!(images.get(1).iter().all(|&b| b == 0));
    }

    #[test]
    fn cifar_truncated() {
        assert!(matches!(
            parse_cifar(&[0u8; 3072]),
            Err(DataError::Format { offset: 0, .. })
        ));
    }
}

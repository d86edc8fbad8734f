//! Big-endian IDX containers as used by MNIST and Fashion-MNIST.
//!
//! Layout: 4-byte magic `0x0000_08NN` (`0x08` = unsigned byte payload,
//! `NN` = number of dimensions), one big-endian `u32` per dimension, then
//! the raw bytes in row-major order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    /// `count × rows × cols` raw bytes.
    pub data: Vec<u8>,
}

impl IdxImages {
    pub fn len(&self) -> usize {
        if self.rows * self.cols == 0 {
            0
        } else {
            self.data.len() / (self.rows * self.cols)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.data[i * n..(i + 1) * n]
    }
}

/// Decoded image/label pair with pixels scaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub rows: usize,
    pub cols: usize,
    pub images: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

fn err(path: &Path, offset: usize, message: impl Into<String>) -> Error {
    Error::Idx {
        path: path.to_path_buf(),
        offset: offset as u64,
        message: message.into(),
    }
}

fn read_u32(bytes: &[u8], offset: usize, path: &Path, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| err(path, bytes.len(), format!("truncated header: missing {what}")))
}

fn check_magic(bytes: &[u8], expected: u32, path: &Path) -> Result<()> {
    let magic = read_u32(bytes, 0, path, "magic number")?;
    if magic != expected {
        return Err(err(
            path,
            0,
            format!("bad magic number {magic:#010x}, expected {expected:#010x}"),
        ));
    }
    Ok(())
}

fn check_payload(bytes: &[u8], header: usize, expected: usize, path: &Path) -> Result<()> {
    let available = bytes.len() - header;
    if available < expected {
        return Err(err(
            path,
            bytes.len(),
            format!("truncated payload: header declares {expected} bytes, found {available}"),
        ));
    }
    if available > expected {
        return Err(err(
            path,
            header + expected,
            format!("{} trailing bytes after declared payload", available - expected),
        ));
    }
    Ok(())
}

pub fn parse_images(bytes: &[u8], path: &Path) -> Result<IdxImages> {
    check_magic(bytes, IMAGES_MAGIC, path)?;
    let count = read_u32(bytes, 4, path, "image count")? as usize;
    let rows = read_u32(bytes, 8, path, "row count")? as usize;
    let cols = read_u32(bytes, 12, path, "column count")? as usize;
    check_payload(bytes, 16, count * rows * cols, path)?;
    Ok(IdxImages {
        rows,
        cols,
        data: bytes[16..].to_vec(),
    })
}

pub fn parse_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    check_magic(bytes, LABELS_MAGIC, path)?;
    let count = read_u32(bytes, 4, path, "label count")? as usize;
    check_payload(bytes, 8, count, path)?;
    Ok(bytes[8..].to_vec())
}

pub fn encode_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.data.len());
    out.extend(IMAGES_MAGIC.to_be_bytes());
    out.extend((images.len() as u32).to_be_bytes());
    out.extend((images.rows as u32).to_be_bytes());
    out.extend((images.cols as u32).to_be_bytes());
    out.extend(&images.data);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend(LABELS_MAGIC.to_be_bytes());
    out.extend((labels.len() as u32).to_be_bytes());
    out.extend(labels);
    out
}

/// Reads an image file and its label file, scaling pixels by `1/255`.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<RawDataset> {
    let image_bytes = fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let label_bytes = fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    let images = parse_images(&image_bytes, images_path)?;
    let labels = parse_labels(&label_bytes, labels_path)?;
    if images.len() != labels.len() {
        return Err(err(
            labels_path,
            4,
            format!("label count {} does not match image count {}", labels.len(), images.len()),
        ));
    }
    let pixels = (0..images.len())
        .map(|i| images.image(i).iter().map(|&b| f64::from(b) / 255.0).collect())
        .collect();
    Ok(RawDataset {
        rows: images.rows,
        cols: images.cols,
        images: pixels,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("mem.idx")
    }

    #[test]
    fn round_trips_encoded_images() {
        let imgs = IdxImages {
            rows: 2,
            cols: 3,
            data: (0..12).collect(),
        };
        let parsed = parse_images(&encode_images(&imgs), p()).unwrap();
        assert_eq!(parsed, imgs);
        assert_eq!(parsed.len(), 2);
    }

    #[test]
    fn label_magic_passed_as_images_names_expected_magic() {
        let bytes = encode_labels(&[1, 2, 3]);
        let e = parse_images(&bytes, p()).unwrap_err().to_string();
        assert!(e.contains("0x00000803"), "{e}");
        assert!(e.contains("at byte 0"), "{e}");
    }

    #[test]
    fn truncated_payload_reports_offset() {
        let mut bytes = encode_images(&IdxImages {
            rows: 2,
            cols: 2,
            data: vec![7; 8],
        });
        bytes.truncate(bytes.len() - 3);
        match parse_images(&bytes, p()) {
            Err(Error::Idx { offset, message, .. }) => {
                assert_eq!(offset, 21);
                assert!(message.contains("truncated"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_header_is_rejected() {
        let bytes = [0, 0, 8, 3, 0, 0];
        assert!(matches!(parse_images(&bytes, p()), Err(Error::Idx { .. })));
    }
}

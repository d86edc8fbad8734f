//! 8-bit grayscale image output (binary PGM, PNG) and montages.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ImageFormat {
    #[default]
    Pgm,
    Png,
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Pgm => "pgm",
            ImageFormat::Png => "png",
        }
    }
}

/// `round(p·255)` with halves rounded up; input clamped to `[0, 1]`.
pub fn to_byte(p: f64) -> u8 {
    (p.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub bytes: Vec<u8>,
}

impl GrayImage {
    pub fn from_pixels(pixels: &[f64], height: usize, width: usize) -> Result<Self> {
        if pixels.len() != height * width {
            return Err(Error::Shape {
                context: "exported image",
                expected: height * width,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bytes: pixels.iter().map(|&p| to_byte(p)).collect(),
        })
    }

    pub fn to_pixels(&self) -> Vec<f64> {
        self.bytes.iter().map(|&b| f64::from(b) / 255.0).collect()
    }

    pub fn encode_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(&self.bytes);
        out
    }

    pub fn save(&self, path: &Path, format: ImageFormat) -> Result<()> {
        match format {
            ImageFormat::Pgm => fs::write(path, self.encode_pgm()).map_err(|e| Error::io(path, e)),
            ImageFormat::Png => self.save_png(path),
        }
    }

    fn save_png(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut enc = png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let to_io = |e: png::EncodingError| Error::io(path, std::io::Error::other(e));
        let mut writer = enc.write_header().map_err(to_io)?;
        writer.write_image_data(&self.bytes).map_err(to_io)?;
        writer.finish().map_err(to_io)
    }
}

/// Parses a binary (P5) PGM with maxval 255.
pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, msg.to_string()));
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(bad("only binary 8-bit PGM (P5, maxval 255) is supported"));
    }
    let width: usize = fields[1].parse().map_err(|_| bad("bad PGM width"))?;
    let height: usize = fields[2].parse().map_err(|_| bad("bad PGM height"))?;
    let data = bytes.get(pos..pos + width * height).ok_or_else(|| bad("truncated PGM data"))?;
    Ok(GrayImage {
        width,
        height,
        bytes: data.to_vec(),
    })
}

/// Tiles images into a grid with `ceil(√n)` columns and no gutter.
pub fn montage(images: &[Vec<f64>], height: usize, width: usize) -> Result<GrayImage> {
    if images.is_empty() {
        return Err(Error::Config("montage of zero images".into()));
    }
    let cols = (images.len() as f64).sqrt().ceil() as usize;
    let rows = images.len().div_ceil(cols);
    let (mw, mh) = (cols * width, rows * height);
    let mut bytes = vec![0u8; mw * mh];
    for (k, img) in images.iter().enumerate() {
        let tile = GrayImage::from_pixels(img, height, width)?;
        let (ty, tx) = (k / cols, k % cols);
        for y in 0..height {
            let dst = (ty * height + y) * mw + tx * width;
            bytes[dst..dst + width].copy_from_slice(&tile.bytes[y * width..(y + 1) * width]);
        }
    }
    Ok(GrayImage {
        width: mw,
        height: mh,
        bytes,
    })
}

/// Writes `prefix_0000.ext`, … into `dir`, plus `prefix_montage.ext` when
/// `with_montage` is set. Returns the written paths.
pub fn export_images(
    images: &[Vec<f64>],
    height: usize,
    width: usize,
    dir: &Path,
    prefix: &str,
    format: ImageFormat,
    with_montage: bool,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(images.len() + 1);
    for (i, img) in images.iter().enumerate() {
        let path = dir.join(format!("{prefix}_{i:04}.{}", format.extension()));
        GrayImage::from_pixels(img, height, width)?.save(&path, format)?;
        written.push(path);
    }
    if with_montage && !images.is_empty() {
        let path = dir.join(format!("{prefix}_montage.{}", format.extension()));
        montage(images, height, width)?.save(&path, format)?;
        written.push(path);
    }
    Ok(written)
}

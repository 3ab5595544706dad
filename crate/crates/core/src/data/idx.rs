//! Reader and writer for the IDX tensor format used by MNIST-style corpora.
//!
//! Layout: a big-endian `u32` magic (`0x00000803` for rank-3 unsigned byte
//! tensors, `0x00000801` for rank-1), one big-endian `u32` per dimension,
//! then the raw bytes in row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Images flattened to rows of `rows × cols` byte intensities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDataset {
    image_rows: usize,
    image_cols: usize,
    pixels: Vec<u8>,
    labels: Vec<u8>,
}

impl RawDataset {
    pub fn new(image_rows: usize, image_cols: usize, pixels: Vec<u8>, labels: Vec<u8>) -> Result<Self> {
        let width = image_rows * image_cols;
        if width == 0 || pixels.len() != width * labels.len() {
            return Err(Error::invalid(format!(
                "{} pixels do not form {} images of {image_rows}x{image_cols}",
                pixels.len(),
                labels.len()
            )));
        }
        Ok(Self {
            image_rows,
            image_cols,
            pixels,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Flattened image length, 784 for 28×28.
    pub fn dim(&self) -> usize {
        self.image_rows * self.image_cols
    }

    pub fn image_shape(&self) -> (usize, usize) {
        (self.image_rows, self.image_cols)
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let w = self.dim();
        &self.pixels[i * w..(i + 1) * w]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Keep the first `n` examples.
    pub fn truncate(&mut self, n: usize) {
        if n < self.len() {
            self.labels.truncate(n);
            self.pixels.truncate(n * self.dim());
        }
    }

    /// The first `n` images as an `n × dim` matrix of intensities.
    pub fn feature_matrix(&self, n: usize) -> DMatrix<f64> {
        let n = n.min(self.len());
        let w = self.dim();
        DMatrix::from_fn(n, w, |i, j| self.pixels[i * w + j] as f64)
    }

    pub fn feature_row(&self, i: usize) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.image(i).iter().map(|&p| p as f64))
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    offset: usize,
    name: &'a str,
}

impl Cursor<'_> {
    fn read_u32(&mut self) -> Result<u32> {
        let end = self.offset + 4;
        if end > self.bytes.len() {
            return Err(Error::format(
                format!("{} offset {}", self.name, self.offset),
                format!(
                    "header truncated: expected 4 bytes, found {}",
                    self.bytes.len() - self.offset
                ),
            ));
        }
        let v = u32::from_be_bytes(self.bytes[self.offset..end].try_into().unwrap());
        self.offset = end;
        Ok(v)
    }

    fn expect_magic(&mut self, magic: u32) -> Result<()> {
        let at = self.offset;
        let found = self.read_u32()?;
        if found != magic {
            return Err(Error::format(
                format!("{} offset {at}", self.name),
                format!("bad magic {found:#010x}, expected {magic:#010x}"),
            ));
        }
        Ok(())
    }

    fn payload(&self, count: usize) -> Result<&[u8]> {
        let available = self.bytes.len() - self.offset;
        if available != count {
            return Err(Error::format(
                format!("{} offset {}", self.name, self.offset),
                format!("payload has {available} bytes, expected {count}"),
            ));
        }
        Ok(&self.bytes[self.offset..])
    }
}

/// Parse an image tensor. Returns `(count, rows, cols, pixels)`.
pub fn parse_images(bytes: &[u8], name: &str) -> Result<(usize, usize, usize, Vec<u8>)> {
    let mut c = Cursor { bytes, offset: 0, name };
    c.expect_magic(IMAGE_MAGIC)?;
    let n = c.read_u32()? as usize;
    let rows = c.read_u32()? as usize;
    let cols = c.read_u32()? as usize;
    let pixels = c.payload(n * rows * cols)?.to_vec();
    Ok((n, rows, cols, pixels))
}

pub fn parse_labels(bytes: &[u8], name: &str) -> Result<Vec<u8>> {
    let mut c = Cursor { bytes, offset: 0, name };
    c.expect_magic(LABEL_MAGIC)?;
    let n = c.read_u32()? as usize;
    Ok(c.payload(n)?.to_vec())
}

pub fn load_idx(images: &Path, labels: &Path) -> Result<RawDataset> {
    let image_bytes = fs::read(images)?;
    let label_bytes = fs::read(labels)?;
    let (n, rows, cols, pixels) = parse_images(&image_bytes, &images.display().to_string())?;
    let labels_vec = parse_labels(&label_bytes, &labels.display().to_string())?;
    if labels_vec.len() != n {
        return Err(Error::format(
            format!("{} offset 4", labels.display()),
            format!("{} labels for {n} images", labels_vec.len()),
        ));
    }
    RawDataset::new(rows, cols, pixels, labels_vec)
}

pub fn encode_images(data: &RawDataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + data.pixels.len());
    for v in [
        IMAGE_MAGIC,
        data.len() as u32,
        data.image_rows as u32,
        data.image_cols as u32,
    ] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&data.pixels);
    out
}

pub fn encode_labels(data: &RawDataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + data.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(data.len() as u32).to_be_bytes());
    out.extend_from_slice(&data.labels);
    out
}

pub fn write_idx(data: &RawDataset, images: &Path, labels: &Path) -> Result<()> {
    fs::File::create(images)?.write_all(&encode_images(data))?;
    fs::File::create(labels)?.write_all(&encode_labels(data))?;
    Ok(())
}

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FGRID_MAGIC: &[u8; 8] = b"FGRID\0v1";
const HEADER_LEN: usize = 8 + 4 + 4 + 1 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageKind {
    /// Faraday rotation angles, rad.
    Angle,
    /// Detected photon counts.
    Photons,
}

impl ImageKind {
    fn code(self) -> u8 {
        match self {
            ImageKind::Angle => 0,
            ImageKind::Photons => 1,
        }
    }
}

/// Pixel grid of rotation angles or photon counts. `data` is indexed `[row, col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleImage {
    pub kind: ImageKind,
    /// Pixel side length, um.
    pub pixel_size: f64,
    pub data: Array2<f64>,
}

impl AngleImage {
    pub fn new(kind: ImageKind, pixel_size: f64, data: Array2<f64>) -> Result<Self> {
        if !(pixel_size > 0.0 && pixel_size.is_finite()) {
            return Err(Error::domain("AngleImage", format!("pixel size {pixel_size} must be > 0")));
        }
        if let Some(v) = data.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::domain("AngleImage", format!("pixel value {v} is not finite and non-negative")));
        }
        Ok(AngleImage { kind, pixel_size, data })
    }

    pub fn width(&self) -> usize {
        self.data.ncols()
    }

    pub fn height(&self) -> usize {
        self.data.nrows()
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().cloned().fold(0.0, f64::max)
    }

    pub fn to_fgrid_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(FGRID_MAGIC);
        out.extend_from_slice(&(self.width() as u32).to_le_bytes());
        out.extend_from_slice(&(self.height() as u32).to_le_bytes());
        out.push(self.kind.code());
        out.extend_from_slice(&self.pixel_size.to_le_bytes());
        for v in self.data.iter() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_fgrid_bytes(bytes: &[u8]) -> Result<Self> {
        let fail = |offset: usize, msg: String| Error::Format { offset: offset as u64, msg };
        if bytes.len() < 8 || &bytes[..8] != FGRID_MAGIC {
            let at = bytes.iter().zip(FGRID_MAGIC).position(|(a, b)| a != b).unwrap_or(bytes.len().min(8));
            return Err(fail(at, "bad magic, expected \"FGRID\\0v1\"".into()));
        }
        if bytes.len() < HEADER_LEN {
            return Err(fail(bytes.len(), format!("truncated header ({} of {HEADER_LEN} bytes)", bytes.len())));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let width = u32_at(8) as usize;
        let height = u32_at(12) as usize;
        let kind = match bytes[16] {
            0 => ImageKind::Angle,
            1 => ImageKind::Photons,
            k => return Err(fail(16, format!("unknown image kind {k}"))),
        };
        let pixel_size = f64::from_le_bytes(bytes[17..25].try_into().expect("8 bytes"));
        if !(pixel_size > 0.0 && pixel_size.is_finite()) {
            return Err(fail(17, format!("pixel size {pixel_size} must be > 0")));
        }
        if width == 0 || height == 0 {
            return Err(fail(8, format!("empty image {width}x{height}")));
        }
        let expected = HEADER_LEN + 4 * width * height;
        if bytes.len() < expected {
            return Err(fail(bytes.len(), format!("truncated data: expected {expected} bytes for {width}x{height}")));
        }
        if bytes.len() > expected {
            return Err(fail(expected, format!("{} trailing bytes", bytes.len() - expected)));
        }
        let mut values = Vec::with_capacity(width * height);
        for k in 0..width * height {
            let o = HEADER_LEN + 4 * k;
            let v = f32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as f64;
            if !(v.is_finite() && v >= 0.0) {
                return Err(fail(o, format!("pixel value {v} is not finite and non-negative")));
            }
            values.push(v);
        }
        let data = Array2::from_shape_vec((height, width), values).expect("shape matches length");
        Ok(AngleImage { kind, pixel_size, data })
    }

    pub fn write_fgrid(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_fgrid_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read_fgrid(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_fgrid_bytes(&bytes)
    }

    /// Long-format CSV: `row,col,value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["row", "col", "value"])?;
        for ((r, c), v) in self.data.indexed_iter() {
            w.write_record([r.to_string(), c.to_string(), v.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> AngleImage {
        let data = Array2::from_shape_fn((3, 4), |(r, c)| (r * 4 + c) as f64 * 0.25);
        AngleImage::new(ImageKind::Photons, 3.5, data).unwrap()
    }

    #[test]
    fn fgrid_round_trip_and_layout() {
        let img = sample();
        let bytes = img.to_fgrid_bytes();
        assert_eq!(&bytes[..8], b"FGRID\x00v1");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 3);
        assert_eq!(bytes[16], 1);
        assert_eq!(f64::from_le_bytes(bytes[17..25].try_into().unwrap()), 3.5);
        // row-major: second value is row 0, col 1
        assert_eq!(f32::from_le_bytes(bytes[29..33].try_into().unwrap()), 0.25);
        assert_eq!(bytes.len(), 25 + 48);
        assert_eq!(AngleImage::from_fgrid_bytes(&bytes).unwrap(), img);
    }

    #[test]
    fn format_errors_carry_offsets() {
        let bytes = sample().to_fgrid_bytes();
        let offset = |b: &[u8]| match AngleImage::from_fgrid_bytes(b) {
            Err(Error::Format { offset, .. }) => offset,
            other => panic!("{other:?}"),
        };
        let mut bad = bytes.clone();
        bad[5] = b'X';
        assert_eq!(offset(&bad), 5);
        assert_eq!(offset(&bytes[..20]), 20);
        let mut kind = bytes.clone();
        kind[16] = 7;
        assert_eq!(offset(&kind), 16);
        assert_eq!(offset(&bytes[..bytes.len() - 2]), (bytes.len() - 2) as u64);
        let mut neg = bytes.clone();
        neg[25..29].copy_from_slice(&(-1.0f32).to_le_bytes());
        assert_eq!(offset(&neg), 25);
        let mut long = bytes.clone();
        long.push(0);
        assert_eq!(offset(&long), bytes.len() as u64);
    }

    #[test]
    fn rejects_negative_values() {
        let data = Array2::from_elem((2, 2), -0.1);
        assert!(AngleImage::new(ImageKind::Angle, 1.0, data).is_err());
    }

    #[test]
    fn csv_has_header_and_all_pixels() {
        let mut buf = Vec::new();
        sample().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("row,col,value\n"));
        assert_eq!(text.lines().count(), 13);
    }
}

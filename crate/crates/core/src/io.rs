//! Plain-text CSV grids and binary PGM (P5) images.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Writes a grid as row-major, comma-separated text, one row per line.
pub fn write_csv<T: Scalar>(path: impl AsRef<Path>, grid: &Array2<T>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for row in grid.rows() {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{v}").expect("writing to a String cannot fail");
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a square grid written by [`write_csv`].
pub fn read_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<Array2<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut values = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut count = 0;
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::parse(path, format!("line {}: bad number {:?}", lineno + 1, field))
            })?;
            values.push(T::lit(v));
            count += 1;
        }
        match cols {
            None => cols = Some(count),
            Some(c) if c != count => {
                return Err(Error::parse(
                    path,
                    format!("line {}: expected {c} columns, found {count}", lineno + 1),
                ))
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::parse(path, "empty grid"))?;
    Array2::from_shape_vec((rows, cols), values).map_err(|e| Error::parse(path, e.to_string()))
}

/// 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    /// Row-major pixels, `width * height` bytes.
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn from_array(grid: &Array2<u8>) -> Self {
        let (height, width) = grid.dim();
        Self {
            width,
            height,
            pixels: grid.iter().copied().collect(),
        }
    }

    pub fn to_array(&self) -> Array2<u8> {
        Array2::from_shape_vec((self.height, self.width), self.pixels.clone())
            .expect("pixel buffer matches dimensions")
    }
}

/// Encodes a binary PGM with maxval 255.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn write_pgm(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes).map_err(|m| Error::parse(path, m))
}

/// Parses a binary P5 PGM (maxval ≤ 255, `#` comments allowed in the header).
pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated PGM header".into());
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    if tokens[0] != "P5" {
        return Err(format!("not a binary PGM (magic {:?})", tokens[0]));
    }
    let parse = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|_| format!("bad {what} {s:?} in PGM header"))
    };
    let width = parse(&tokens[1], "width")?;
    let height = parse(&tokens[2], "height")?;
    let maxval = parse(&tokens[3], "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported maxval {maxval}"));
    }
    let len = width * height;
    if bytes.len() < pos + len {
        return Err(format!(
            "raster truncated: expected {len} bytes, found {}",
            bytes.len().saturating_sub(pos)
        ));
    }
    Ok(GrayImage {
        width,
        height,
        pixels: bytes[pos..pos + len].to_vec(),
    })
}

/// Maps a nonnegative grid linearly onto 0..=255, with the maximum at 255.
pub fn intensity_image<T: Scalar>(grid: &Array2<T>) -> GrayImage {
    let max = grid.iter().fold(T::zero(), |m, &v| m.max(v));
    let px = grid.mapv(|v| {
        if max > T::zero() {
            let g = (v / max * T::lit(255.0) + T::lit(0.5)).floor();
            g.max(T::zero()).min(T::lit(255.0)).to_f64_lossy() as u8
        } else {
            0
        }
    });
    GrayImage::from_array(&px)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_with_comment_parses() {
        let mut bytes = b"P5\n# made by hand\n3 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 1, 2, 3, 4, 255]);
        let img = decode_pgm(&bytes).unwrap();
        assert_eq!((img.width, img.height), (3, 2));
        assert_eq!(img.pixels, vec![0, 1, 2, 3, 4, 255]);
        assert_eq!(decode_pgm(&encode_pgm(&img)).unwrap(), img);
    }

    #[test]
    fn pgm_errors() {
        assert!(decode_pgm(b"P2\n1 1\n255\n\x00").is_err());
        assert!(decode_pgm(b"P5\n4 4\n255\n\x00\x00").is_err());
        assert!(decode_pgm(b"P5\n4").is_err());
    }

    #[test]
    fn csv_round_trip_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        let g = Array2::from_shape_fn((3, 3), |(r, c)| (r as f64 + 0.1) / (c as f64 + 3.0));
        write_csv(&p, &g).unwrap();
        let back: Array2<f64> = read_csv(&p).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn csv_ragged_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        fs::write(&p, "1,2\n3\n").unwrap();
        assert!(matches!(read_csv::<f64>(&p), Err(Error::Parse { .. })));
    }
}

//! File formats: PFM for float rasters, PNG for images and masks, ASCII PLY
//! for scored point clouds.

use std::fs;
use std::io::{BufRead, Cursor, Write};
use std::path::Path;

use image::{ImageFormat, Luma, Rgb};

use crate::error::{Error, Result};
use crate::masks::ScoredPoint;
use crate::raster::{Grid, Mask, RgbImage};

/// Encodes a single-channel PFM: little-endian f32, scale `-1.0`, rows
/// stored bottom to top.
pub fn encode_pfm(grid: &Grid<f64>) -> Vec<u8> {
    let (w, h) = grid.dims();
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 4);
    for y in (0..h).rev() {
        for x in 0..w {
            out.extend_from_slice(&(*grid.get(x, y) as f32).to_le_bytes());
        }
    }
    out
}

/// Decodes a single-channel PFM of either endianness.
pub fn decode_pfm(bytes: &[u8]) -> Result<Grid<f64>> {
    let mut cursor = Cursor::new(bytes);
    let mut next_token = |what: &str| -> Result<String> {
        loop {
            let mut line = String::new();
            let n = cursor
                .read_line(&mut line)
                .map_err(|e| Error::data(format!("PFM header: {e}")))?;
            if n == 0 {
                return Err(Error::data(format!("PFM header: missing {what}")));
            }
            let trimmed = line.trim();
            if !trimmed.is_empty() {
                return Ok(trimmed.to_string());
            }
        }
    };
    let magic = next_token("magic")?;
    match magic.as_str() {
        "Pf" => {}
        "PF" => return Err(Error::data("PFM header: 3-channel PF files are not supported")),
        other => return Err(Error::data(format!("PFM header: bad magic {other:?}"))),
    }
    let dims = next_token("dimensions")?;
    let mut parts = dims.split_whitespace();
    let parse_dim = |s: Option<&str>| -> Result<usize> {
        s.and_then(|s| s.parse().ok())
            .filter(|&d: &usize| d > 0)
            .ok_or_else(|| Error::data(format!("PFM header: bad dimensions {dims:?}")))
    };
    let w = parse_dim(parts.next())?;
    let h = parse_dim(parts.next())?;
    let scale: f64 = next_token("scale")?
        .parse()
        .map_err(|_| Error::data("PFM header: bad scale"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::data("PFM header: scale must be nonzero"));
    }
    let little = scale < 0.0;
    let offset = cursor.position() as usize;
    let payload = &bytes[offset..];
    if payload.len() != w * h * 4 {
        return Err(Error::data(format!(
            "PFM payload has {} bytes, expected {} for {w}x{h}",
            payload.len(),
            w * h * 4
        )));
    }
    let mut grid = Grid::new(w, h, 0.0);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (x, row) = (i % w, i / w);
        grid.set(x, h - 1 - row, v as f64);
    }
    Ok(grid)
}

pub fn read_pfm(path: &Path) -> Result<Grid<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pfm(&bytes).map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

pub fn write_pfm(path: &Path, grid: &Grid<f64>) -> Result<()> {
    fs::write(path, encode_pfm(grid)).map_err(|e| Error::io(path, e))
}

pub fn encode_png_rgb(img: &RgbImage) -> Result<Vec<u8>> {
    let (w, h) = img.dims();
    let buf = image::ImageBuffer::<Rgb<u8>, _>::from_raw(w as u32, h as u32, img.data().as_flattened().to_vec())
        .ok_or_else(|| Error::data("image buffer size mismatch"))?;
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::data(format!("PNG encode: {e}")))?;
    Ok(out.into_inner())
}

pub fn decode_png_rgb(bytes: &[u8]) -> Result<RgbImage> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::data(format!("PNG decode: {e}")))?
        .into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let pixels = img.into_raw().chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    Grid::from_vec(w, h, pixels)
}

/// Masks are stored as 8-bit grayscale, 255 for object.
pub fn encode_png_mask(mask: &Mask) -> Result<Vec<u8>> {
    encode_png_gray(&mask.to_gray())
}

pub fn encode_png_gray(gray: &Grid<u8>) -> Result<Vec<u8>> {
    let (w, h) = gray.dims();
    let buf = image::ImageBuffer::<Luma<u8>, _>::from_raw(w as u32, h as u32, gray.data().to_vec())
        .ok_or_else(|| Error::data("mask buffer size mismatch"))?;
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::data(format!("PNG encode: {e}")))?;
    Ok(out.into_inner())
}

/// Decodes a mask PNG; values >= 128 are object.
pub fn decode_png_mask(bytes: &[u8]) -> Result<Mask> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::data(format!("PNG decode: {e}")))?
        .into_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Grid::from_vec(w, h, img.into_raw().into_iter().map(|v| v >= 128).collect())
}

pub fn read_png_rgb(path: &Path) -> Result<RgbImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_png_rgb(&bytes).map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

pub fn write_png_rgb(path: &Path, img: &RgbImage) -> Result<()> {
    fs::write(path, encode_png_rgb(img)?).map_err(|e| Error::io(path, e))
}

pub fn read_png_mask(path: &Path) -> Result<Mask> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_png_mask(&bytes).map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

pub fn write_png_mask(path: &Path, mask: &Mask) -> Result<()> {
    fs::write(path, encode_png_mask(mask)?).map_err(|e| Error::io(path, e))
}

/// ASCII PLY with `x y z score source_view` per vertex.
pub fn encode_ply(points: &[ScoredPoint]) -> Vec<u8> {
    let mut out = Vec::new();
    let _ = write!(
        out,
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nproperty float score\nproperty int source_view\nend_header\n",
        points.len()
    );
    for p in points {
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            p.position.x as f32, p.position.y as f32, p.position.z as f32, p.score as f32, p.source_view.0
        );
    }
    out
}

pub fn write_ply(path: &Path, points: &[ScoredPoint]) -> Result<()> {
    fs::write(path, encode_ply(points)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ViewId;
    use nalgebra::Point3;

    #[test]
    fn pfm_header_and_layout() {
        let g = Grid::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let bytes = encode_pfm(&g);
        assert!(bytes.starts_with(b"Pf\n2 2\n-1.0\n"));
        // First stored row is the bottom image row.
        let payload = &bytes[12..];
        assert_eq!(&payload[..4], &3.0f32.to_le_bytes());
        assert_eq!(decode_pfm(&bytes).unwrap(), g);
    }

    #[test]
    fn pfm_big_endian_read() {
        let mut bytes = b"Pf\n1 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&2.5f32.to_be_bytes());
        assert_eq!(*decode_pfm(&bytes).unwrap().get(0, 0), 2.5);
    }

    #[test]
    fn pfm_rejects_bad_headers() {
        assert!(decode_pfm(b"P6\n1 1\n-1.0\n\0\0\0\0").is_err());
        assert!(decode_pfm(b"PF\n1 1\n-1.0\n").is_err());
        assert!(decode_pfm(b"Pf\n1 x\n-1.0\n\0\0\0\0").is_err());
        assert!(decode_pfm(b"Pf\n2 1\n-1.0\n\0\0\0\0").is_err());
        assert!(decode_pfm(b"Pf\n1 1\n0\n\0\0\0\0").is_err());
    }

    #[test]
    fn png_round_trips() {
        let img = Grid::from_fn(5, 3, |x, y| [x as u8 * 40, y as u8 * 70, 9]);
        assert_eq!(decode_png_rgb(&encode_png_rgb(&img).unwrap()).unwrap(), img);
        let mask = Grid::from_fn(5, 3, |x, y| (x + y) % 2 == 0);
        assert_eq!(decode_png_mask(&encode_png_mask(&mask).unwrap()).unwrap(), mask);
        assert!(decode_png_rgb(b"not a png").is_err());
    }

    #[test]
    fn ply_lists_vertices() {
        let pts = vec![ScoredPoint {
            position: Point3::new(1.0, -0.5, 2.0),
            score: 0.75,
            source_view: ViewId(3),
            source_pixel: (4, 5),
        }];
        let text = String::from_utf8(encode_ply(&pts)).unwrap();
        assert!(text.contains("element vertex 1\n"));
        assert!(text.contains("property int source_view\nend_header\n"));
        assert!(text.ends_with("1 -0.5 2 0.75 3\n"));
    }
}

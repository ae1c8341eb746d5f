//! Grayscale image buffer used by the rendering and metric code, with PNG
//! and PGM persistence. Pixel values are f64, nominally in [0, 1].

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> GrayImage {
        GrayImage {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> GrayImage {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        GrayImage {
            width,
            height,
            data,
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<GrayImage> {
        if data.len() != width * height {
            return Err(Error::Shape {
                expected: format!("{}x{} = {}", width, height, width * height),
                got: format!("{}", data.len()),
            });
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Sets a pixel if the coordinates are inside the image.
    pub fn set_clipped(&mut self, x: i64, y: i64, v: f64) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.set(x as usize, y as usize, v);
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len().max(1) as f64
    }

    /// 2x2 block-average downsampling (truncates odd edges).
    pub fn downsample_2x(&self) -> GrayImage {
        let w = self.width / 2;
        let h = self.height / 2;
        GrayImage::from_fn(w, h, |x, y| {
            0.25 * (self.get(2 * x, 2 * y)
                + self.get(2 * x + 1, 2 * y)
                + self.get(2 * x, 2 * y + 1)
                + self.get(2 * x + 1, 2 * y + 1))
        })
    }

    fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let buf = ::image::GrayImage::from_raw(self.width as u32, self.height as u32, self.to_u8())
            .expect("buffer size matches dimensions");
        buf.save_with_format(path.as_ref(), ::image::ImageFormat::Png)
            .map_err(|e| Error::Format {
                format: "png".into(),
                detail: e.to_string(),
            })
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let buf = ::image::GrayImage::from_raw(self.width as u32, self.height as u32, self.to_u8())
            .expect("buffer size matches dimensions");
        let mut out = std::io::Cursor::new(Vec::new());
        buf.write_to(&mut out, ::image::ImageFormat::Png)
            .map_err(|e| Error::Format {
                format: "png".into(),
                detail: e.to_string(),
            })?;
        Ok(out.into_inner())
    }

    pub fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
        let img = ::image::load_from_memory_with_format(bytes, ::image::ImageFormat::Png)
            .map_err(|e| Error::Format {
                format: "png".into(),
                detail: e.to_string(),
            })?;
        Ok(Self::from_dynamic(img))
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<GrayImage> {
        let img = ::image::open(path.as_ref()).map_err(|e| Error::Format {
            format: "png".into(),
            detail: e.to_string(),
        })?;
        Ok(Self::from_dynamic(img))
    }

    /// Color inputs are reduced with luminance weights 0.299/0.587/0.114.
    fn from_dynamic(img: ::image::DynamicImage) -> GrayImage {
        let rgb = img.to_rgb8();
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        GrayImage::from_fn(w, h, |x, y| {
            let p = rgb.get_pixel(x as u32, y as u32);
            (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0
        })
    }

    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.to_u8());
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
        let bytes = std::fs::read(path)?;
        let bad = |detail: &str| Error::Format {
            format: "pgm".into(),
            detail: detail.into(),
        };
        // Header: "P5" w h maxval, whitespace separated, then raw payload.
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 && pos < bytes.len() {
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
            fields.push(
                std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ascii header"))?,
            );
        }
        if fields.len() < 4 || fields[0] != "P5" {
            return Err(bad("expected binary P5 header"));
        }
        let w: usize = fields[1].parse().map_err(|_| bad("bad width"))?;
        let h: usize = fields[2].parse().map_err(|_| bad("bad height"))?;
        let maxval: f64 = fields[3].parse().map_err(|_| bad("bad maxval"))?;
        pos += 1; // single whitespace after maxval
        if bytes.len() < pos + w * h {
            return Err(bad("truncated payload"));
        }
        let data = bytes[pos..pos + w * h]
            .iter()
            .map(|&b| b as f64 / maxval)
            .collect();
        GrayImage::from_vec(w, h, data)
    }

    /// Loads PNG or PGM based on the file extension.
    pub fn load(path: impl AsRef<Path>) -> Result<GrayImage> {
        let path = path.as_ref();
        match path.extension().and_then(|e| e.to_str()) {
            Some("pgm") => Self::load_pgm(path),
            _ => Self::load_png(path),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_roundtrip() {
        let img = GrayImage::from_fn(17, 9, |x, y| ((x * 13 + y * 7) % 32) as f64 / 31.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        img.save_png(&path).unwrap();
        let back = GrayImage::load_png(&path).unwrap();
        assert_eq!(back.width(), 17);
        assert_eq!(back.height(), 9);
        for (a, b) in img.pixels().iter().zip(back.pixels()) {
            assert!((a - b).abs() < 1.0 / 255.0 + 1e-9);
        }
    }

    #[test]
    fn pgm_roundtrip() {
        let img = GrayImage::from_fn(8, 5, |x, y| (x as f64 * y as f64) / 28.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        img.save_pgm(&path).unwrap();
        let back = GrayImage::load_pgm(&path).unwrap();
        for (a, b) in img.pixels().iter().zip(back.pixels()) {
            assert!((a - b).abs() < 1.0 / 255.0 + 1e-9);
        }
    }

    #[test]
    fn downsample_averages_blocks() {
        let img = GrayImage::from_fn(4, 4, |x, _| x as f64);
        let small = img.downsample_2x();
        assert_eq!(small.width(), 2);
        assert!((small.get(0, 0) - 0.5).abs() < 1e-12);
        assert!((small.get(1, 0) - 2.5).abs() < 1e-12);
    }
}

use std::io::Cursor;
use std::path::Path;

use super::ModelError;

/// Single-channel image with intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    /// Values are clamped to `[0, 1]`; NaN becomes 0.
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<GrayImage, ModelError> {
        if width * height != pixels.len() {
            return Err(ModelError::PixelCount {
                width,
                height,
                len: pixels.len(),
            });
        }
        let pixels = pixels
            .into_iter()
            .map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
            .collect();
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> GrayImage {
        GrayImage {
            width,
            height,
            pixels: vec![value.clamp(0.0, 1.0); width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> GrayImage {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let v = f(x, y);
                pixels.push(if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) });
            }
        }
        GrayImage {
            width,
            height,
            pixels,
        }
    }

    pub fn from_luma8(width: usize, height: usize, bytes: &[u8]) -> Result<GrayImage, ModelError> {
        Self::new(
            width,
            height,
            bytes.iter().map(|&b| f64::from(b) / 255.0).collect(),
        )
    }

    /// Converts interleaved RGB with luma weights 0.299 / 0.587 / 0.114.
    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<GrayImage, ModelError> {
        if bytes.len() != width * height * 3 {
            return Err(ModelError::PixelCount {
                width,
                height,
                len: bytes.len() / 3,
            });
        }
        let pixels = bytes
            .chunks_exact(3)
            .map(|c| {
                (0.299 * f64::from(c[0]) + 0.587 * f64::from(c[1]) + 0.114 * f64::from(c[2]))
                    / 255.0
            })
            .collect();
        Self::new(width, height, pixels)
    }

    /// Decodes an encoded PNG or JPEG. Gray inputs are used as-is; anything
    /// with color goes through the RGB luma conversion.
    pub fn decode(bytes: &[u8]) -> Result<GrayImage, ModelError> {
        let img = image::ImageReader::new(Cursor::new(bytes))
            .with_guessed_format()
            .map_err(|e| ModelError::Decode(e.to_string()))?
            .decode()
            .map_err(|e| ModelError::Decode(e.to_string()))?;
        Ok(Self::from_dynamic(&img))
    }

    pub fn open(path: &Path) -> Result<GrayImage, ModelError> {
        let bytes = std::fs::read(path)
            .map_err(|e| ModelError::Decode(format!("{}: {e}", path.display())))?;
        Self::decode(&bytes)
    }

    fn from_dynamic(img: &image::DynamicImage) -> GrayImage {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let result = if img.color().has_color() {
            let rgb = img.to_rgb8();
            Self::from_rgb8(w, h, rgb.as_raw())
        } else {
            let luma = img.to_luma8();
            Self::from_luma8(w, h, luma.as_raw())
        };
        result.expect("decoded buffer matches its dimensions")
    }

    /// Bilinear resize to `width x height` (pixel-center aligned).
    pub fn resized(&self, width: usize, height: usize) -> GrayImage {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        GrayImage::from_fn(width, height, |x, y| {
            let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            self.bilinear_clamped(fx, fy)
        })
    }

    fn bilinear_clamped(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// 8-bit grayscale PNG encoding.
    pub fn to_png(&self) -> Vec<u8> {
        let buf =
            image::GrayImage::from_raw(self.width as u32, self.height as u32, self.to_luma8())
                .expect("buffer size matches dimensions");
        let mut out = Vec::new();
        buf.write_to(&mut Cursor::new(&mut out), image::ImageFormat::Png)
            .expect("in-memory PNG encoding");
        out
    }

    pub fn to_luma8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&v| (v * 255.0).round() as u8)
            .collect()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.pixels[y * self.width + x] = value.clamp(0.0, 1.0);
    }
}

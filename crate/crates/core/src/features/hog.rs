//! Histogram of oriented gradients.
//!
//! Default layout for a 112x112 face: 8x8-pixel cells (14x14 grid), 8
//! unsigned orientation bins, 2x2-cell blocks at stride 1 (13x13 blocks),
//! L2-Hys block normalization. 13 * 13 * 2 * 2 * 8 = 5408 values.

use std::f64::consts::PI;

use crate::model::GrayImage;

use super::FeatureError;

/// Length of the default descriptor.
pub const HOG_LEN: usize = 5408;

/// Normalization guard for all-zero blocks.
pub const HOG_EPSILON: f64 = 1e-12;

/// L2-Hys clipping level.
pub const HOG_CLIP: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HogParams {
    pub cell_size: usize,
    pub orientations: usize,
    /// Block side, in cells.
    pub block_size: usize,
    /// Block stride, in cells.
    pub block_stride: usize,
}

impl Default for HogParams {
    fn default() -> Self {
        HogParams {
            cell_size: 8,
            orientations: 8,
            block_size: 2,
            block_stride: 1,
        }
    }
}

impl HogParams {
    /// `(cells_x, cells_y, blocks_x, blocks_y)` for an image, or
    /// `BadDimensions` when the image does not tile into whole blocks.
    pub fn layout(
        &self,
        width: usize,
        height: usize,
    ) -> Result<(usize, usize, usize, usize), FeatureError> {
        let bad = || FeatureError::BadDimensions {
            width,
            height,
            cell_size: self.cell_size,
        };
        if self.cell_size == 0
            || self.block_size == 0
            || self.block_stride == 0
            || self.orientations == 0
        {
            return Err(bad());
        }
        if !width.is_multiple_of(self.cell_size) || !height.is_multiple_of(self.cell_size) {
            return Err(bad());
        }
        let (cx, cy) = (width / self.cell_size, height / self.cell_size);
        if cx < self.block_size || cy < self.block_size {
            return Err(bad());
        }
        let bx = (cx - self.block_size) / self.block_stride + 1;
        let by = (cy - self.block_size) / self.block_stride + 1;
        Ok((cx, cy, bx, by))
    }

    pub fn block_len(&self) -> usize {
        self.block_size * self.block_size * self.orientations
    }

    pub fn descriptor_len(&self, width: usize, height: usize) -> Result<usize, FeatureError> {
        let (_, _, bx, by) = self.layout(width, height)?;
        Ok(bx * by * self.block_len())
    }
}

/// A normalized HOG descriptor, blocks in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct HogVector {
    values: Vec<f64>,
    block_len: usize,
}

impl HogVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.block_len)
    }
}

/// HOG with the default parameters.
pub fn compute_hog(img: &GrayImage) -> Result<HogVector, FeatureError> {
    compute_hog_with(img, &HogParams::default())
}

pub fn compute_hog_with(img: &GrayImage, params: &HogParams) -> Result<HogVector, FeatureError> {
    let (w, h) = (img.width(), img.height());
    let (cells_x, cells_y, blocks_x, blocks_y) = params.layout(w, h)?;
    let bins = params.orientations;
    let bin_width = PI / bins as f64;

    let mut cells = vec![0.0; cells_x * cells_y * bins];
    let px = img.pixels();
    for y in 0..h {
        for x in 0..w {
            // Centered differences; the one-pixel border has zero gradient.
            let gx = if x == 0 || x + 1 == w {
                0.0
            } else {
                px[y * w + x + 1] - px[y * w + x - 1]
            };
            let gy = if y == 0 || y + 1 == h {
                0.0
            } else {
                px[(y + 1) * w + x] - px[(y - 1) * w + x]
            };
            let magnitude = gx.hypot(gy);
            if magnitude == 0.0 {
                continue;
            }
            let mut angle = gy.atan2(gx);
            if angle < 0.0 {
                angle += PI;
            }
            if angle >= PI {
                angle -= PI;
            }
            // Bin b is centered on b * bin_width; split the vote linearly
            // between the two nearest centers, wrapping at 180 degrees.
            let pos = angle / bin_width;
            let lo = pos.floor();
            let frac = pos - lo;
            let lo = (lo as usize) % bins;
            let hi = (lo + 1) % bins;
            let cell = ((y / params.cell_size) * cells_x + x / params.cell_size) * bins;
            cells[cell + lo] += magnitude * (1.0 - frac);
            cells[cell + hi] += magnitude * frac;
        }
    }

    let block_len = params.block_len();
    let mut values = Vec::with_capacity(blocks_x * blocks_y * block_len);
    let mut block = Vec::with_capacity(block_len);
    for by in 0..blocks_y {
        for bx in 0..blocks_x {
            block.clear();
            for cy in 0..params.block_size {
                for cx in 0..params.block_size {
                    let row = by * params.block_stride + cy;
                    let col = bx * params.block_stride + cx;
                    let start = (row * cells_x + col) * bins;
                    block.extend_from_slice(&cells[start..start + bins]);
                }
            }
            l2_hys(&mut block);
            values.extend_from_slice(&block);
        }
    }
    Ok(HogVector { values, block_len })
}

fn l2_hys(block: &mut [f64]) {
    l2_normalize(block);
    for v in block.iter_mut() {
        *v = v.min(HOG_CLIP);
    }
    l2_normalize(block);
}

fn l2_normalize(block: &mut [f64]) {
    let norm = (block.iter().map(|v| v * v).sum::<f64>() + HOG_EPSILON * HOG_EPSILON).sqrt();
    for v in block.iter_mut() {
        *v /= norm;
    }
}

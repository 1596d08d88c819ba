//! Pixel containers and the image primitives the perturbation generators
//! are built from.
//!
//! Everything here is a pure function of its inputs. Geometric operations
//! use inverse mapping with bilinear interpolation; samples whose source
//! falls outside the image take a configurable [`Fill`] value.

mod color;
mod geometry;
mod morphology;

pub use color::{hsv_to_rgb, hue_rotate, rgb_to_hsv};
pub use geometry::{rotate_patch, rotation_matrix, warp, DisplacementField};
pub use morphology::{
    binarize, connected_components, count_holes, crossing_number, foreground_mask, junction_pixels,
    neighbor_count, skeletonize,
};

use crate::error::{Error, Result};

/// Row-major 8-bit image with one (grayscale) or three (RGB) channels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::DimensionMismatch(format!(
                "raster must be at least 1x1, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::ChannelMismatch {
                expected: "1 or 3",
                found: channels,
            });
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height}x{channels} raster needs {expected} samples, got {}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// A raster with every pixel set to `fill`.
    pub fn filled(width: usize, height: usize, channels: usize, fill: Fill) -> Result<Self> {
        let px = fill.pixel(channels);
        let data = px.iter().copied().cycle().take(width * height * channels).collect();
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len_pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn is_rgb(&self) -> bool {
        self.channels == 3
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * self.channels
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = self.index(x, y);
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [u8] {
        let i = self.index(x, y);
        let c = self.channels;
        &mut self.data[i..i + c]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, value: &[u8]) {
        self.pixel_mut(x, y).copy_from_slice(value);
    }

    /// Single-channel intensity: the sample itself for grayscale, Rec. 601
    /// luma for RGB.
    pub fn intensity(&self, x: usize, y: usize) -> u8 {
        let p = self.pixel(x, y);
        match p {
            [v] => *v,
            [r, g, b] => {
                let l = 0.299 * f64::from(*r) + 0.587 * f64::from(*g) + 0.114 * f64::from(*b);
                l.round().clamp(0.0, 255.0) as u8
            }
            _ => unreachable!("channels validated at construction"),
        }
    }

    /// Grayscale copy (identity for single-channel input).
    pub fn to_gray(&self) -> Raster {
        if self.channels == 1 {
            return self.clone();
        }
        let mut data = Vec::with_capacity(self.len_pixels());
        for y in 0..self.height {
            for x in 0..self.width {
                data.push(self.intensity(x, y));
            }
        }
        Raster {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    pub fn same_dims(&self, mask: &Mask) -> bool {
        self.width == mask.width() && self.height == mask.height()
    }

    pub(crate) fn check_mask(&self, mask: &Mask) -> Result<()> {
        if !self.same_dims(mask) {
            return Err(Error::DimensionMismatch(format!(
                "mask {}x{} does not match raster {}x{}",
                mask.width(),
                mask.height(),
                self.width,
                self.height
            )));
        }
        Ok(())
    }

    /// Euclidean length of the image diagonal in pixels.
    pub fn diagonal(&self) -> f64 {
        (self.width as f64).hypot(self.height as f64)
    }
}

/// One boolean per pixel, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} mask needs {} bits, got {}",
                width * height,
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    /// Build a mask from a predicate on integer pixel coordinates.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Out-of-range coordinates read as unset.
    #[inline]
    pub fn get_signed(&self, x: isize, y: isize) -> bool {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return false;
        }
        self.bits[y as usize * self.width + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    /// Coordinates of set pixels in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(i, _)| (i % w, i / w))
    }

    pub fn intersects(&self, other: &Mask) -> bool {
        self.bits.iter().zip(&other.bits).any(|(a, b)| *a && *b)
    }

    /// Mean position of the set pixels, `None` when the mask is empty.
    pub fn centroid(&self) -> Option<Point> {
        let mut n = 0usize;
        let (mut sx, mut sy) = (0.0, 0.0);
        for (x, y) in self.iter_set() {
            n += 1;
            sx += x as f64;
            sy += y as f64;
        }
        (n > 0).then(|| Point::new(sx / n as f64, sy / n as f64))
    }
}

/// Continuous pixel coordinates; integer values sit on pixel centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Background value used for out-of-bounds samples and erased pixels.
///
/// Grayscale rasters use the first component only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Fill(pub [u8; 3]);

impl Fill {
    pub const fn gray(v: u8) -> Self {
        Fill([v, v, v])
    }

    pub const fn rgb(r: u8, g: u8, b: u8) -> Self {
        Fill([r, g, b])
    }

    pub fn pixel(&self, channels: usize) -> &[u8] {
        &self.0[..channels.min(3)]
    }

    /// Per-channel mean over every pixel of `images` (rounded).
    pub fn mean_of<'a>(images: impl IntoIterator<Item = &'a Raster>) -> Option<Self> {
        let mut sums = [0u64; 3];
        let mut n = 0u64;
        for img in images {
            for px in img.data().chunks_exact(img.channels()) {
                for c in 0..3 {
                    sums[c] += u64::from(px[c.min(px.len() - 1)]);
                }
                n += 1;
            }
        }
        if n == 0 {
            return None;
        }
        let m = |s: u64| ((s as f64) / n as f64).round() as u8;
        Some(Fill([m(sums[0]), m(sums[1]), m(sums[2])]))
    }
}

//! Inverse-mapped geometric resampling.

use super::{Fill, Mask, Point, Raster};
use crate::error::{Error, Result};

/// Per-pixel displacement `(u, v)`. The output pixel at `(x, y)` samples the
/// input at `(x + u, y + v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    width: usize,
    height: usize,
    uv: Vec<(f64, f64)>,
}

impl DisplacementField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            uv: vec![(0.0, 0.0); width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> (f64, f64)) -> Self {
        let mut uv = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                uv.push(f(x, y));
            }
        }
        Self { width, height, uv }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (f64, f64) {
        self.uv[y * self.width + x]
    }

    pub fn is_zero(&self) -> bool {
        self.uv.iter().all(|&(u, v)| u == 0.0 && v == 0.0)
    }
}

/// Coordinates within this distance of an integer are treated as exact, so
/// that near-identity transforms (a full turn, say) do not leak
/// floating-point noise into the samples.
const SNAP: f64 = 1e-9;

#[inline]
fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < SNAP {
        r
    } else {
        v
    }
}

/// Bilinear sample at a continuous source position; positions outside the
/// pixel-center hull take `fill`.
fn sample_into(img: &Raster, sx: f64, sy: f64, fill: Fill, out: &mut [u8]) {
    let (sx, sy) = (snap(sx), snap(sy));
    let (w, h) = (img.width(), img.height());
    if !(sx >= 0.0 && sy >= 0.0 && sx <= (w - 1) as f64 && sy <= (h - 1) as f64) {
        out.copy_from_slice(fill.pixel(img.channels()));
        return;
    }
    let x0 = sx.floor() as usize;
    let y0 = sy.floor() as usize;
    let fx = sx - x0 as f64;
    let fy = sy - y0 as f64;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let (p00, p10, p01, p11) = (
        img.pixel(x0, y0),
        img.pixel(x1, y0),
        img.pixel(x0, y1),
        img.pixel(x1, y1),
    );
    for c in 0..img.channels() {
        let v = (1.0 - fx) * (1.0 - fy) * f64::from(p00[c])
            + fx * (1.0 - fy) * f64::from(p10[c])
            + (1.0 - fx) * fy * f64::from(p01[c])
            + fx * fy * f64::from(p11[c]);
        out[c] = v.round().clamp(0.0, 255.0) as u8;
    }
}

/// Resample `img` through a displacement field.
pub fn warp(img: &Raster, field: &DisplacementField, fill: Fill) -> Result<Raster> {
    if field.width() != img.width() || field.height() != img.height() {
        return Err(Error::DimensionMismatch(format!(
            "displacement field {}x{} does not match raster {}x{}",
            field.width(),
            field.height(),
            img.width(),
            img.height()
        )));
    }
    let mut out = img.clone();
    let mut px = [0u8; 3];
    let c = img.channels();
    for y in 0..img.height() {
        for x in 0..img.width() {
            let (u, v) = field.get(x, y);
            if u == 0.0 && v == 0.0 {
                continue;
            }
            sample_into(img, x as f64 + u, y as f64 + v, fill, &mut px[..c]);
            out.set_pixel(x, y, &px[..c]);
        }
    }
    Ok(out)
}

/// `R(θ) = [[cos θ, sin θ], [−sin θ, cos θ]]` for θ in degrees.
pub fn rotation_matrix(theta_deg: f64) -> [[f64; 2]; 2] {
    let (s, c) = theta_deg.to_radians().sin_cos();
    [[c, s], [-s, c]]
}

/// Rotate the content of `region` about `center` by `theta_deg`.
///
/// Each output pixel `p` samples the input at `center + R(θ)(p − center)`.
/// Pixels whose source lands inside `region` form the rotated footprint and
/// take the resampled value; region pixels left uncovered by the footprint
/// take `fill`. All other pixels are copied unchanged.
pub fn rotate_patch(
    img: &Raster,
    region: &Mask,
    center: Point,
    theta_deg: f64,
    fill: Fill,
) -> Result<Raster> {
    img.check_mask(region)?;
    let (w, h) = (img.width() as f64, img.height() as f64);
    if !(center.x.is_finite() && center.y.is_finite())
        || center.x < 0.0
        || center.y < 0.0
        || center.x > w - 1.0
        || center.y > h - 1.0
    {
        return Err(Error::InvalidParameter(format!(
            "rotation center ({}, {}) outside {}x{} image",
            center.x,
            center.y,
            img.width(),
            img.height()
        )));
    }
    if !theta_deg.is_finite() {
        return Err(Error::InvalidParameter(format!("rotation angle {theta_deg}")));
    }
    if theta_deg == 0.0 {
        return Ok(img.clone());
    }
    let r = rotation_matrix(theta_deg);
    let c = img.channels();
    let mut out = img.clone();
    let mut px = [0u8; 3];
    for y in 0..img.height() {
        for x in 0..img.width() {
            let dx = x as f64 - center.x;
            let dy = y as f64 - center.y;
            let sx = snap(center.x + r[0][0] * dx + r[0][1] * dy);
            let sy = snap(center.y + r[1][0] * dx + r[1][1] * dy);
            let in_footprint = region.get_signed(sx.round() as isize, sy.round() as isize);
            if in_footprint {
                sample_into(img, sx, sy, fill, &mut px[..c]);
                out.set_pixel(x, y, &px[..c]);
            } else if region.get(x, y) {
                out.set_pixel(x, y, fill.pixel(c));
            }
        }
    }
    Ok(out)
}

//! Mirror-symmetry detection and opposite rotation of the symmetric parts.

use crate::error::{Error, Result};
use crate::raster::{foreground_mask, rotate_patch, Fill, Mask, Point, Raster};

/// A mirror axis through `center` and the foreground split on either side.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryAxis {
    pub center: Point,
    /// Axis direction in degrees, in [0, 180), measured from the +x axis
    /// towards +y (image rows grow downwards).
    pub orientation_deg: f64,
    /// Pearson correlation between the image and its mirror image.
    pub score: f64,
    pub part_a: Mask,
    pub part_b: Mask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryOptions {
    pub threshold: u8,
    /// Orientation grid step in degrees.
    pub step_deg: f64,
}

impl Default for SymmetryOptions {
    fn default() -> Self {
        Self {
            threshold: 128,
            step_deg: 1.0,
        }
    }
}

fn intensities(img: &Raster) -> Vec<f64> {
    let mut v = Vec::with_capacity(img.len_pixels());
    for y in 0..img.height() {
        for x in 0..img.width() {
            v.push(f64::from(img.intensity(x, y)));
        }
    }
    v
}

fn correlation(values: &[f64], w: usize, h: usize, center: Point, orientation_deg: f64) -> f64 {
    let (dy, dx) = orientation_deg.to_radians().sin_cos();
    let (mut n, mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            let qx = x as f64 - center.x;
            let qy = y as f64 - center.y;
            let dot = qx * dx + qy * dy;
            let rx = (center.x + 2.0 * dot * dx - qx).round();
            let ry = (center.y + 2.0 * dot * dy - qy).round();
            if rx < 0.0 || ry < 0.0 || rx >= w as f64 || ry >= h as f64 {
                continue;
            }
            let a = values[y * w + x];
            let b = values[ry as usize * w + rx as usize];
            n += 1.0;
            sa += a;
            sb += b;
            saa += a * a;
            sbb += b * b;
            sab += a * b;
        }
    }
    if n == 0.0 {
        return 0.0;
    }
    let va = saa / n - (sa / n).powi(2);
    let vb = sbb / n - (sb / n).powi(2);
    let eps = 1e-12;
    match (va <= eps, vb <= eps) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => ((sab / n - sa * sb / (n * n)) / (va * vb).sqrt()).clamp(-1.0, 1.0),
    }
}

/// Correlation between `img` and its reflection across the line through
/// `center` at `orientation_deg`, over pixels whose mirror lies inside the
/// image (nearest-pixel sampling). A constant image scores 1.
pub fn reflective_correlation(img: &Raster, center: Point, orientation_deg: f64) -> f64 {
    correlation(&intensities(img), img.width(), img.height(), center, orientation_deg)
}

/// Search mirror axes through the foreground centroid over an orientation
/// grid `0, step, 2·step, … < 180` and return the best-correlated one.
/// Ties resolve to the first grid value.
pub fn detect_symmetry(img: &Raster, opts: &SymmetryOptions) -> Result<SymmetryAxis> {
    if !(opts.step_deg > 0.0 && opts.step_deg <= 180.0) {
        return Err(Error::InvalidParameter(format!(
            "orientation step {} outside (0, 180]",
            opts.step_deg
        )));
    }
    let fg = foreground_mask(img, opts.threshold);
    let center = fg
        .centroid()
        .ok_or(Error::EmptyInput("no foreground for symmetry detection"))?;
    let values = intensities(img);
    let (w, h) = (img.width(), img.height());

    let steps = (180.0 / opts.step_deg).ceil() as usize;
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 0..steps {
        let phi = k as f64 * opts.step_deg;
        if phi >= 180.0 {
            break;
        }
        let s = correlation(&values, w, h, center, phi);
        if s > best.1 {
            best = (phi, s);
        }
    }
    let (orientation_deg, score) = best;

    let (dy, dx) = orientation_deg.to_radians().sin_cos();
    let side = |x: usize, y: usize| (x as f64 - center.x) * dy - (y as f64 - center.y) * dx;
    let part_a = Mask::from_fn(w, h, |x, y| fg.get(x, y) && side(x, y) >= 0.0);
    let part_b = Mask::from_fn(w, h, |x, y| fg.get(x, y) && side(x, y) < 0.0);
    Ok(SymmetryAxis {
        center,
        orientation_deg,
        score,
        part_a,
        part_b,
    })
}

/// Rotate `part_a` by `+θ` and `part_b` by `−θ`, each about its own
/// centroid. Vacated pixels take `fill`.
pub fn rotate_symmetric_pair(img: &Raster, axis: &SymmetryAxis, theta_deg: f64, fill: Fill) -> Result<Raster> {
    if theta_deg == 0.0 {
        return Ok(img.clone());
    }
    let ca = axis
        .part_a
        .centroid()
        .ok_or(Error::EmptyInput("symmetry part A is empty"))?;
    let cb = axis
        .part_b
        .centroid()
        .ok_or(Error::EmptyInput("symmetry part B is empty"))?;
    let out = rotate_patch(img, &axis.part_a, ca, theta_deg, fill)?;
    rotate_patch(&out, &axis.part_b, cb, -theta_deg, fill)
}

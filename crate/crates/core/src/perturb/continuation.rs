use std::str::FromStr;

use crate::error::{Error, Result};
use crate::raster::{warp, DisplacementField, Fill, Raster};

/// Affine displacement coefficients `(a0..a5)`:
/// `u = a0 + a1·x + a2·y`, `v = a3 + a4·x + a5·y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineParams(pub [f64; 6]);

impl AffineParams {
    pub const fn zero() -> Self {
        AffineParams([0.0; 6])
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|a| *a == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.iter().all(|a| a.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "affine coefficients must be finite: {:?}",
                self.0
            )))
        }
    }

    #[inline]
    pub fn displacement(&self, x: f64, y: f64) -> (f64, f64) {
        let a = &self.0;
        (a[0] + a[1] * x + a[2] * y, a[3] + a[4] * x + a[5] * y)
    }

    pub fn scaled(&self, s: f64) -> Self {
        AffineParams(self.0.map(|a| a * s))
    }
}

impl FromStr for AffineParams {
    type Err = Error;

    /// Six numbers separated by commas or semicolons.
    fn from_str(s: &str) -> Result<Self> {
        let vals: Vec<f64> = s
            .split([',', ';'])
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidParameter(format!("affine vector `{s}`: {e}")))?;
        let arr: [f64; 6] = vals.try_into().map_err(|v: Vec<f64>| {
            Error::InvalidParameter(format!("affine vector needs 6 entries, got {}", v.len()))
        })?;
        let da = AffineParams(arr);
        da.validate()?;
        Ok(da)
    }
}

/// Which vertical half of the image is transformed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Half {
    Left,
    #[default]
    Right,
}

impl Half {
    /// Column range `[start, end)` of this half.
    pub fn columns(self, width: usize) -> std::ops::Range<usize> {
        match self {
            Half::Left => 0..width / 2,
            Half::Right => width / 2..width,
        }
    }
}

impl FromStr for Half {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "left" => Ok(Half::Left),
            "right" => Ok(Half::Right),
            other => Err(Error::InvalidParameter(format!("unknown half `{other}`"))),
        }
    }
}

/// Affine field over `half` (absolute pixel coordinates), zero elsewhere.
pub fn displacement_field(da: &AffineParams, width: usize, height: usize, half: Half) -> DisplacementField {
    let cols = half.columns(width);
    DisplacementField::from_fn(width, height, |x, y| {
        if cols.contains(&x) {
            da.displacement(x as f64, y as f64)
        } else {
            (0.0, 0.0)
        }
    })
}

/// Warp one half of the image by the affine displacement `da`; the other
/// half is left bit-identical.
pub fn piecewise_affine(img: &Raster, da: &AffineParams, half: Half, fill: Fill) -> Result<Raster> {
    da.validate()?;
    if da.is_zero() {
        return Ok(img.clone());
    }
    let field = displacement_field(da, img.width(), img.height(), half);
    warp(img, &field, fill)
}

/// Mean displacement magnitude over the transformed half, divided by the
/// image diagonal. Zero iff `da` is zero (for a non-degenerate half).
pub fn affine_distance(da: &AffineParams, width: usize, height: usize, half: Half) -> f64 {
    let cols = half.columns(width);
    let n = cols.len() * height;
    if n == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for y in 0..height {
        for x in cols.clone() {
            let (u, v) = da.displacement(x as f64, y as f64);
            sum += u.hypot(v);
        }
    }
    sum / n as f64 / (width as f64).hypot(height as f64)
}

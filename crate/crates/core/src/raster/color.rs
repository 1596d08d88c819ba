use super::{Mask, Raster};
use crate::error::{Error, Result};

/// RGB (0..=255) to hue in degrees [0, 360), saturation and value in [0, 1].
pub fn rgb_to_hsv(rgb: [u8; 3]) -> (f64, f64, f64) {
    let [r, g, b] = rgb.map(|c| f64::from(c) / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    (h.rem_euclid(360.0), s, max)
}

pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h = h.rem_euclid(360.0);
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r1, g1, b1) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r1, g1, b1].map(|ch| ((ch + m) * 255.0).round().clamp(0.0, 255.0) as u8)
}

/// Rotate the hue of every masked pixel by `angle_deg` around the color
/// wheel. Unmasked pixels are copied bit for bit.
pub fn hue_rotate(img: &Raster, mask: &Mask, angle_deg: f64) -> Result<Raster> {
    if img.channels() != 3 {
        return Err(Error::ChannelMismatch {
            expected: "3",
            found: img.channels(),
        });
    }
    img.check_mask(mask)?;
    if !(0.0..360.0).contains(&angle_deg) {
        return Err(Error::InvalidParameter(format!(
            "hue angle {angle_deg} outside [0, 360)"
        )));
    }
    if angle_deg == 0.0 {
        return Ok(img.clone());
    }
    let mut out = img.clone();
    for (x, y) in mask.iter_set() {
        let p = img.pixel(x, y);
        let (h, s, v) = rgb_to_hsv([p[0], p[1], p[2]]);
        out.set_pixel(x, y, &hsv_to_rgb(h + angle_deg, s, v));
    }
    Ok(out)
}

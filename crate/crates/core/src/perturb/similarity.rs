use super::SegmentedImage;
use crate::error::Result;
use crate::raster::{hue_rotate, Raster};

/// Shift the hue of the target-class object by `angle_deg` on the color
/// wheel; 180° gives the opposite color. Everything outside the target mask
/// is untouched.
pub fn recolor(seg: &SegmentedImage, angle_deg: f64) -> Result<Raster> {
    hue_rotate(seg.raster(), seg.target_mask(), angle_deg)
}

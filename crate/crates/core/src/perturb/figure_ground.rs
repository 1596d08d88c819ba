use super::SegmentedImage;
use crate::error::{Error, Result};
use crate::raster::{Fill, Raster};

const FALLBACK_FILL: Fill = Fill::gray(128);

/// Mean color of the pixels not covered by any class mask, or mid-gray
/// when the masks cover the whole image.
pub fn neutral_fill(seg: &SegmentedImage) -> Fill {
    let img = seg.raster();
    let mut sums = [0u64; 3];
    let mut n = 0u64;
    for y in 0..img.height() {
        for x in 0..img.width() {
            if seg.class_masks().iter().any(|(_, m)| m.get(x, y)) {
                continue;
            }
            let p = img.pixel(x, y);
            for (c, s) in sums.iter_mut().enumerate() {
                *s += u64::from(p[c.min(p.len() - 1)]);
            }
            n += 1;
        }
    }
    if n == 0 {
        return FALLBACK_FILL;
    }
    let m = |s: u64| (s as f64 / n as f64).round() as u8;
    Fill::rgb(m(sums[0]), m(sums[1]), m(sums[2]))
}

/// Keep the target class plus the `keep_n − 1` largest other classes;
/// every other class region is painted with [`neutral_fill`].
///
/// Equal areas keep the class listed first.
pub fn reduce_classes(seg: &SegmentedImage, keep_n: usize) -> Result<Raster> {
    let total = seg.class_count();
    if keep_n == 0 || keep_n > total {
        return Err(Error::InvalidParameter(format!(
            "keep_n {keep_n} outside 1..={total}"
        )));
    }
    if keep_n == total {
        return Ok(seg.raster().clone());
    }
    let mut others: Vec<(usize, usize)> = seg
        .class_masks()
        .iter()
        .enumerate()
        .filter(|(_, (id, _))| *id != seg.target_class())
        .map(|(i, (_, m))| (i, m.count()))
        .collect();
    // stable sort keeps list order among equal areas
    others.sort_by_key(|&(_, area)| std::cmp::Reverse(area));
    let fill = neutral_fill(seg);
    let mut out = seg.raster().clone();
    let channels = out.channels();
    for &(i, _) in &others[keep_n - 1..] {
        for (x, y) in seg.class_masks()[i].1.iter_set() {
            out.set_pixel(x, y, fill.pixel(channels));
        }
    }
    Ok(out)
}

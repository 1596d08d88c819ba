use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::raster::{foreground_mask, Fill, Mask, Raster};

/// Achieved occlusion must land within this many percentage points of the
/// request.
pub const OCCLUSION_TOLERANCE_PP: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct OcclusionOptions {
    /// Pixels at or above this intensity count as foreground. The default
    /// counts every inked pixel, faint stroke edges included.
    pub threshold: u8,
    /// Patch side lengths are drawn uniformly from `min_patch..=max_patch`.
    pub min_patch: usize,
    pub max_patch: usize,
    pub fill: Fill,
}

impl Default for OcclusionOptions {
    fn default() -> Self {
        Self {
            threshold: 1,
            min_patch: 2,
            max_patch: 4,
            fill: Fill::default(),
        }
    }
}

/// Hide `pct` percent of the foreground under background-colored patches.
///
/// Patches are centered on randomly chosen, still-visible foreground
/// pixels. A patch that would overshoot the target pixel count is shrunk,
/// down to a single pixel, so the target count is hit exactly.
pub fn occlude(img: &Raster, pct: f64, seed: u64, opts: &OcclusionOptions) -> Result<Raster> {
    if !(0.0..=100.0).contains(&pct) {
        return Err(Error::InvalidParameter(format!(
            "occlusion percentage {pct} outside [0, 100]"
        )));
    }
    if opts.min_patch == 0 || opts.min_patch > opts.max_patch {
        return Err(Error::InvalidParameter(format!(
            "patch size range {}..={} is empty",
            opts.min_patch, opts.max_patch
        )));
    }
    if pct == 0.0 {
        return Ok(img.clone());
    }
    let fg = foreground_mask(img, opts.threshold);
    let total = fg.count();
    if total == 0 {
        return Err(Error::EmptyInput("image has no foreground to occlude"));
    }
    let target = ((pct / 100.0) * total as f64).round() as usize;

    let (w, h) = (img.width(), img.height());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = img.clone();
    let mut hidden = Mask::new(w, h);
    let mut visible: Vec<(usize, usize)> = fg.iter_set().collect();
    let mut count = 0usize;
    let mut attempts = 0usize;
    let max_attempts = 10 * total;

    while count < target {
        if attempts >= max_attempts || visible.is_empty() {
            break;
        }
        attempts += 1;
        let idx = rng.gen_range(0..visible.len());
        let (cx, cy) = visible[idx];
        if hidden.get(cx, cy) {
            visible.swap_remove(idx);
            continue;
        }
        let mut pw = rng.gen_range(opts.min_patch..=opts.max_patch);
        let mut ph = rng.gen_range(opts.min_patch..=opts.max_patch);
        loop {
            let x0 = cx.saturating_sub((pw - 1) / 2);
            let y0 = cy.saturating_sub((ph - 1) / 2);
            let x1 = (x0 + pw).min(w);
            let y1 = (y0 + ph).min(h);
            let newly = (y0..y1)
                .flat_map(|y| (x0..x1).map(move |x| (x, y)))
                .filter(|&(x, y)| fg.get(x, y) && !hidden.get(x, y))
                .count();
            if count + newly <= target {
                for y in y0..y1 {
                    for x in x0..x1 {
                        out.set_pixel(x, y, opts.fill.pixel(img.channels()));
                        if fg.get(x, y) && !hidden.get(x, y) {
                            hidden.set(x, y, true);
                        }
                    }
                }
                count += newly;
                break;
            }
            // shrink the longer side first; a 1x1 patch always fits
            if pw >= ph && pw > 1 {
                pw -= 1;
            } else {
                ph -= 1;
            }
        }
    }

    let achieved = 100.0 * count as f64 / total as f64;
    if count < target || (achieved - pct).abs() > OCCLUSION_TOLERANCE_PP {
        return Err(Error::Convergence {
            requested: pct,
            achieved,
        });
    }
    Ok(out)
}

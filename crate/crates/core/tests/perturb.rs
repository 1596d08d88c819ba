use std::collections::VecDeque;
use std::path::Path;

use gestalt_core::dataset::load_idx;
use gestalt_core::perturb::{
    affine_distance, detect_symmetry, dot_centers, occlude, piecewise_affine, AffineParams, Half,
    OcclusionOptions, SymmetryOptions,
};
use gestalt_core::raster::{binarize, junction_pixels, skeletonize, Fill, Mask, Raster};
use proptest::prelude::*;

const N8: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];
const N4: [(isize, isize); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];

/// Number of connected regions of pixels where `inside` holds.
fn regions(w: usize, h: usize, inside: impl Fn(usize, usize) -> bool, nbrs: &[(isize, isize)]) -> usize {
    let mut seen = vec![false; w * h];
    let mut n = 0;
    for start in 0..w * h {
        if seen[start] || !inside(start % w, start / w) {
            continue;
        }
        n += 1;
        seen[start] = true;
        let mut q = VecDeque::from([start]);
        while let Some(i) = q.pop_front() {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for (dx, dy) in nbrs {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !seen[j] && inside(nx as usize, ny as usize) {
                    seen[j] = true;
                    q.push_back(j);
                }
            }
        }
    }
    n
}

/// Background regions of a mask padded by one pixel, so everything touching
/// the border merges into one outer region.
fn holes(m: &Mask) -> usize {
    let (w, h) = (m.width() + 2, m.height() + 2);
    regions(w, h, |x, y| x == 0 || y == 0 || x == w - 1 || y == h - 1 || !m.get(x - 1, y - 1), &N4) - 1
}

fn fg_regions(m: &Mask) -> usize {
    regions(m.width(), m.height(), |x, y| m.get(x, y), &N8)
}

fn mnist() -> Vec<Raster> {
    let d = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/mnist");
    load_idx(&d.join("t10k-images-idx3-ubyte.gz"), &d.join("t10k-labels-idx1-ubyte.gz"))
        .unwrap()
        .into_items()
        .into_iter()
        .map(|i| i.image)
        .collect()
}

#[test]
fn skeleton_invariants_on_every_test_digit() {
    for (k, img) in mnist().iter().enumerate() {
        let m = binarize(img, 128).unwrap();
        let s = skeletonize(&m).unwrap();
        assert!(s.iter_set().all(|(x, y)| m.get(x, y)), "digit {k}: skeleton leaves the shape");
        assert_eq!(fg_regions(&s), fg_regions(&m), "digit {k}: components");
        assert_eq!(holes(&s), holes(&m), "digit {k}: holes");
        for y in 0..27 {
            for x in 0..27 {
                let block = s.get(x, y) && s.get(x + 1, y) && s.get(x, y + 1) && s.get(x + 1, y + 1);
                assert!(!block, "digit {k}: 2x2 block at ({x},{y})");
            }
        }
    }
}

#[test]
fn thick_plus_has_a_central_junction() {
    let plus = Mask::from_fn(31, 31, |x, y| ((14..=16).contains(&x) && (3..=27).contains(&y)) || ((14..=16).contains(&y) && (3..=27).contains(&x)));
    let s = skeletonize(&plus).unwrap();
    let j = junction_pixels(&s);
    assert!(!j.is_empty());
    for (x, y) in &j {
        assert!(x.abs_diff(15) <= 1 && y.abs_diff(15) <= 1, "junction at ({x},{y})");
    }
    // removing the junction neighborhood leaves the four arms
    let arms = Mask::from_fn(31, 31, |x, y| s.get(x, y) && !(x.abs_diff(15) <= 1 && y.abs_diff(15) <= 1));
    assert_eq!(fg_regions(&arms), 4);
}

#[test]
fn thick_t_has_three_arms() {
    let t = Mask::from_fn(31, 31, |x, y| ((4..=6).contains(&y) && (3..=27).contains(&x)) || ((14..=16).contains(&x) && (4..=27).contains(&y)));
    let s = skeletonize(&t).unwrap();
    let j = junction_pixels(&s);
    assert!(!j.is_empty());
    let cut = Mask::from_fn(31, 31, |x, y| s.get(x, y) && !j.iter().any(|(a, b)| a.abs_diff(x) <= 1 && b.abs_diff(y) <= 1));
    assert_eq!(fg_regions(&cut), 3);
}

/// Rasterized 1-px arc: for every angle step, the nearest pixel.
fn arc_mask(w: usize, h: usize, cx: f64, cy: f64, r: f64, from: f64, to: f64) -> Mask {
    let mut m = Mask::new(w, h);
    let steps = (r * (to - from) * 8.0) as usize + 1;
    for k in 0..=steps {
        let t = from + (to - from) * k as f64 / steps as f64;
        m.set((cx + r * t.cos()).round() as usize, (cy + r * t.sin()).round() as usize, true);
    }
    // thin to 8-connectivity
    skeletonize(&m).unwrap()
}

#[test]
fn quarter_circle_spacing_along_the_curve() {
    let (cx, cy, r) = (3.0, 3.0, 10.0);
    let skel = arc_mask(20, 20, cx, cy, r, 0.0, std::f64::consts::FRAC_PI_2);
    let centers = dot_centers(&skel, 5.0);
    assert_eq!(centers.len(), 4, "{centers:?}");
    let mut arcs: Vec<f64> = centers.iter().map(|p| r * (p.y - cy).atan2(p.x - cx)).collect();
    arcs.sort_by(f64::total_cmp);
    for pair in arcs.windows(2) {
        let gap = pair[1] - pair[0];
        assert!((gap - 5.0).abs() <= 0.5, "gap {gap} in {arcs:?}");
    }
}

/// Two strokes mirrored across the line through `c` at `deg`.
fn mirrored_strokes(deg: f64) -> Raster {
    let (w, h) = (61usize, 61usize);
    let c = (30.0, 30.0);
    let (s, co) = deg.to_radians().sin_cos();
    // a bent stroke on one side, in axis-aligned coordinates (along, across)
    let mut pts = Vec::new();
    for k in 0..=60 {
        let t = k as f64 / 60.0;
        pts.push((-14.0 + 20.0 * t, 4.0 + 6.0 * t));
    }
    for k in 0..=30 {
        let t = k as f64 / 30.0;
        pts.push((6.0 + 6.0 * t, 10.0 - 7.0 * t));
    }
    let mut img = Raster::filled(w, h, 1, Fill::gray(0)).unwrap();
    for (a, b) in pts {
        for sign in [1.0, -1.0] {
            let x = c.0 + a * co - sign * b * s;
            let y = c.1 + a * s + sign * b * co;
            for (dx, dy) in [(0, 0), (1, 0), (0, 1), (-1, 0), (0, -1)] {
                let px = (x.round() as isize + dx) as usize;
                let py = (y.round() as isize + dy) as usize;
                img.set_pixel(px, py, &[255]);
            }
        }
    }
    img
}

#[test]
fn oblique_mirror_axis_found() {
    for deg in [0.0, 30.0, 75.0, 120.0] {
        let axis = detect_symmetry(&mirrored_strokes(deg), &SymmetryOptions::default()).unwrap();
        let diff = (axis.orientation_deg - deg).abs();
        assert!(diff.min(180.0 - diff) <= 2.0, "built {deg}, found {}", axis.orientation_deg);
        assert!(axis.score > 0.8, "{}", axis.score);
        let (a, b) = (axis.part_a.count() as f64, axis.part_b.count() as f64);
        assert!((a - b).abs() / (a + b) < 0.1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn affine_distance_matches_direct_sum(
        a in proptest::array::uniform6(-2.0f64..2.0),
        w in 2usize..40,
        h in 1usize..40,
        left in any::<bool>(),
    ) {
        let half = if left { Half::Left } else { Half::Right };
        let (lo, hi) = if left { (0, w / 2) } else { (w / 2, w) };
        let mut sum = 0.0;
        let mut n = 0usize;
        for y in 0..h {
            for x in lo..hi {
                let u = a[0] + a[1] * x as f64 + a[2] * y as f64;
                let v = a[3] + a[4] * x as f64 + a[5] * y as f64;
                sum += (u * u + v * v).sqrt();
                n += 1;
            }
        }
        let want = if n == 0 { 0.0 } else { sum / n as f64 / ((w * w + h * h) as f64).sqrt() };
        let got = affine_distance(&AffineParams(a), w, h, half);
        prop_assert!((got - want).abs() <= 1e-12 * want.max(1.0));
    }

    #[test]
    fn integer_translation_is_a_shift(tx in -5i32..=5, ty in -5i32..=5, seed in any::<u64>()) {
        let (w, h) = (16usize, 12usize);
        let data: Vec<u8> = (0..w * h).map(|i| (seed.rotate_left(i as u32 % 64) as u8) | 1).collect();
        let img = Raster::new(w, h, 1, data).unwrap();
        let da = AffineParams([tx as f64, 0.0, 0.0, ty as f64, 0.0, 0.0]);
        let out = piecewise_affine(&img, &da, Half::Right, Fill::gray(0)).unwrap();
        for y in 0..h {
            for x in 0..w {
                let want = if x < w / 2 {
                    img.pixel(x, y)[0]
                } else {
                    let (sx, sy) = (x as i32 + tx, y as i32 + ty);
                    if sx < 0 || sy < 0 || sx >= w as i32 || sy >= h as i32 { 0 } else { img.pixel(sx as usize, sy as usize)[0] }
                };
                prop_assert_eq!(out.pixel(x, y)[0], want, "({}, {})", x, y);
            }
        }
    }

    #[test]
    fn occlusion_hits_its_target(
        cx in 8usize..24, cy in 8usize..24, rx in 4usize..8, ry in 4usize..8,
        pct in 0.0f64..=100.0, seed in any::<u64>(),
    ) {
        let img = Raster::new(32, 32, 1, (0..1024).map(|i| {
            let (x, y) = ((i % 32) as f64 - cx as f64, (i / 32) as f64 - cy as f64);
            if (x / rx as f64).powi(2) + (y / ry as f64).powi(2) <= 1.0 { 200 } else { 0 }
        }).collect()).unwrap();
        let total = img.data().iter().filter(|v| **v > 0).count();
        prop_assume!(total >= 50);
        let opts = OcclusionOptions::default();
        let out = occlude(&img, pct, seed, &opts).unwrap();
        let hidden = img.data().iter().zip(out.data()).filter(|(a, b)| **a > 0 && **b == 0).count();
        let achieved = 100.0 * hidden as f64 / total as f64;
        prop_assert!((achieved - pct).abs() <= 1.0, "{} vs {}", achieved, pct);
        // nothing outside the shape changes except to the fill
        prop_assert!(img.data().iter().zip(out.data()).all(|(a, b)| a == b || *b == 0));
        prop_assert_eq!(occlude(&img, pct, seed, &opts).unwrap(), out);
    }
}

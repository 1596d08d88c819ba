//! Binary morphology: thresholding, thinning and skeleton topology helpers.

use std::collections::VecDeque;

use super::{Mask, Raster};
use crate::error::{Error, Result};

/// Offsets of the 8-neighborhood in thinning order P2..P9:
/// N, NE, E, SE, S, SW, W, NW.
const RING: [(isize, isize); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

/// Mask of pixels whose value is at least `threshold`.
pub fn binarize(img: &Raster, threshold: u8) -> Result<Mask> {
    if img.channels() != 1 {
        return Err(Error::ChannelMismatch {
            expected: "1",
            found: img.channels(),
        });
    }
    let bits = img.data().iter().map(|v| *v >= threshold).collect();
    Mask::from_bits(img.width(), img.height(), bits)
}

/// Like [`binarize`] but accepts RGB input by thresholding its luma.
pub fn foreground_mask(img: &Raster, threshold: u8) -> Mask {
    Mask::from_fn(img.width(), img.height(), |x, y| {
        img.intensity(x, y) >= threshold
    })
}

fn ring(mask: &Mask, x: usize, y: usize) -> [bool; 8] {
    let mut out = [false; 8];
    for (slot, (dx, dy)) in out.iter_mut().zip(RING) {
        *slot = mask.get_signed(x as isize + dx, y as isize + dy);
    }
    out
}

/// Number of set pixels among the 8 neighbors.
pub fn neighbor_count(mask: &Mask, x: usize, y: usize) -> usize {
    ring(mask, x, y).iter().filter(|b| **b).count()
}

/// Number of unset→set transitions walking once around the 8-neighborhood.
pub fn crossing_number(mask: &Mask, x: usize, y: usize) -> usize {
    transitions(&ring(mask, x, y))
}

fn transitions(n: &[bool; 8]) -> usize {
    (0..8).filter(|&i| !n[i] && n[(i + 1) % 8]).count()
}

/// Yokoi connectivity number for 8-connected foreground.
///
/// A pixel whose value is 1 can be removed without changing the topology
/// of the image (components and holes).
fn connectivity_number(n: &[bool; 8]) -> usize {
    // Yokoi's formula indexes the ring from E counterclockwise; RING starts
    // at N clockwise, so remap: E, NE, N, NW, W, SW, S, SE.
    let order = [2usize, 1, 0, 7, 6, 5, 4, 3];
    let c = |k: usize| !n[order[k % 8]] as i32;
    let mut sum = 0i32;
    for k in [0usize, 2, 4, 6] {
        sum += c(k) - c(k) * c(k + 1) * c(k + 2);
    }
    sum as usize
}

fn removable(mask: &Mask, x: usize, y: usize) -> bool {
    let n = ring(mask, x, y);
    n.iter().filter(|b| **b).count() >= 2 && connectivity_number(&n) == 1
}

/// Thin a binary mask down to a one-pixel-wide, 8-connected skeleton.
///
/// Candidates are selected with the two Zhang-Suen subiterations. Each
/// candidate is then removed only if it is still a simple, non-end pixel
/// at the time of removal, so components never split or vanish. A final
/// sweep removes remaining simple pixels (staircase corners, leftover 2x2
/// blocks), and blocks left at diagonal crossings are rerouted.
pub fn skeletonize(mask: &Mask) -> Result<Mask> {
    if mask.is_empty() {
        return Err(Error::EmptyInput("cannot skeletonize an empty mask"));
    }
    let mut m = mask.clone();
    loop {
        let mut changed = false;
        for step in 0..2 {
            let candidates: Vec<(usize, usize)> = m
                .iter_set()
                .filter(|&(x, y)| {
                    let n = ring(&m, x, y);
                    let b = n.iter().filter(|v| **v).count();
                    if !(2..=6).contains(&b) || transitions(&n) != 1 {
                        return false;
                    }
                    let [p2, _, p4, _, p6, _, p8, _] = n;
                    if step == 0 {
                        !(p2 && p4 && p6) && !(p4 && p6 && p8)
                    } else {
                        !(p2 && p4 && p8) && !(p2 && p6 && p8)
                    }
                })
                .collect();
            for (x, y) in candidates {
                if removable(&m, x, y) {
                    m.set(x, y, false);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    sweep_simple(&mut m);
    // two diagonal strokes crossing between pixel centers leave a 2x2 block
    // in which every pixel carries an arm; reroute one arm through the mask
    while let Some(block) = first_block(&m) {
        if !reroute_block(&mut m, mask, block) {
            break;
        }
        sweep_simple(&mut m);
    }
    Ok(m)
}

fn sweep_simple(m: &mut Mask) {
    loop {
        let mut changed = false;
        for y in 0..m.height() {
            for x in 0..m.width() {
                if m.get(x, y) && removable(m, x, y) {
                    m.set(x, y, false);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
}

fn is_block(m: &Mask, x: usize, y: usize) -> bool {
    x + 1 < m.width() && y + 1 < m.height() && m.get(x, y) && m.get(x + 1, y) && m.get(x, y + 1) && m.get(x + 1, y + 1)
}

fn first_block(m: &Mask) -> Option<(usize, usize)> {
    (0..m.height().saturating_sub(1))
        .flat_map(|y| (0..m.width() - 1).map(move |x| (x, y)))
        .find(|&(x, y)| is_block(m, x, y))
}

fn block_near(m: &Mask, x: usize, y: usize) -> bool {
    (x.saturating_sub(1)..=x).any(|bx| (y.saturating_sub(1)..=y).any(|by| is_block(m, bx, by)))
}

/// Delete one pixel `p` of the block at `(bx, by)` and set one pixel `q` of
/// `shape` next to it, keeping components and holes and creating no block.
fn reroute_block(m: &mut Mask, shape: &Mask, (bx, by): (usize, usize)) -> bool {
    let components = connected_components(m).1;
    let holes = count_holes(m);
    for (px, py) in [(bx, by), (bx + 1, by), (bx, by + 1), (bx + 1, by + 1)] {
        for (dx, dy) in RING {
            let (qx, qy) = (px as isize + dx, py as isize + dy);
            if !shape.get_signed(qx, qy) || m.get_signed(qx, qy) {
                continue;
            }
            let (qx, qy) = (qx as usize, qy as usize);
            m.set(px, py, false);
            m.set(qx, qy, true);
            let ok = !block_near(m, qx, qy)
                && !block_near(m, bx + 1, by + 1)
                && connected_components(m).1 == components
                && count_holes(m) == holes;
            if ok {
                return true;
            }
            m.set(qx, qy, false);
            m.set(px, py, true);
        }
    }
    false
}

/// Background regions (4-connected) not touching the image border.
pub fn count_holes(mask: &Mask) -> usize {
    let (w, h) = (mask.width(), mask.height());
    let mut seen = vec![false; w * h];
    let mut holes = 0;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if mask.bits()[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut touches_border = false;
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                touches_border = true;
            }
            for (dx, dy) in [(0isize, -1isize), (1, 0), (0, 1), (-1, 0)] {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !mask.bits()[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        if !touches_border {
            holes += 1;
        }
    }
    holes
}

/// Skeleton pixels where three or more branches meet (crossing number ≥ 3).
pub fn junction_pixels(skeleton: &Mask) -> Vec<(usize, usize)> {
    skeleton
        .iter_set()
        .filter(|&(x, y)| crossing_number(skeleton, x, y) >= 3)
        .collect()
}

/// 8-connected component labels (0 = background, 1..=n) and the count n.
pub fn connected_components(mask: &Mask) -> (Vec<u32>, usize) {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = vec![0u32; w * h];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.bits()[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for (dx, dy) in RING {
                let (nx, ny) = (x + dx, y + dy);
                if mask.get_signed(nx, ny) {
                    let j = ny as usize * w + nx as usize;
                    if labels[j] == 0 {
                        labels[j] = next;
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    (labels, next as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(rows: &[&str]) -> Mask {
        let h = rows.len();
        let w = rows[0].len();
        Mask::from_fn(w, h, |x, y| rows[y].as_bytes()[x] == b'1')
    }

    #[test]
    fn binarize_thresholds_inclusive() {
        let img = Raster::new(3, 1, 1, vec![0, 100, 200]).unwrap();
        let m = binarize(&img, 100).unwrap();
        assert_eq!(m.bits(), &[false, true, true]);

        let zero = Raster::new(3, 3, 1, vec![0; 9]).unwrap();
        assert!(binarize(&zero, 1).unwrap().is_empty());
        let full = Raster::new(3, 3, 1, vec![255; 9]).unwrap();
        assert_eq!(binarize(&full, 128).unwrap().count(), 9);
    }

    #[test]
    fn binarize_rejects_rgb() {
        let img = Raster::new(2, 1, 3, vec![0; 6]).unwrap();
        assert!(matches!(
            binarize(&img, 1),
            Err(Error::ChannelMismatch { found: 3, .. })
        ));
    }

    #[test]
    fn connectivity_number_cases() {
        // middle of a horizontal line: W and E set
        let mut n = [false; 8];
        n[2] = true;
        n[6] = true;
        assert_eq!(connectivity_number(&n), 2);
        // corner: N and E
        let mut n = [false; 8];
        n[0] = true;
        n[2] = true;
        assert_eq!(connectivity_number(&n), 1);
        // interior
        assert_eq!(connectivity_number(&[true; 8]), 0);
        // isolated
        assert_eq!(connectivity_number(&[false; 8]), 0);
    }

    #[test]
    fn empty_mask_is_an_error() {
        assert!(matches!(
            skeletonize(&Mask::new(4, 4)),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn thin_lines_are_unchanged() {
        let horiz = Mask::from_fn(12, 5, |x, y| y == 2 && (1..11).contains(&x));
        assert_eq!(skeletonize(&horiz).unwrap(), horiz);
        let diag = Mask::from_fn(10, 10, |x, y| x == y && (1..9).contains(&x));
        assert_eq!(skeletonize(&diag).unwrap(), diag);
        let single = Mask::from_fn(3, 3, |x, y| x == 1 && y == 1);
        assert_eq!(skeletonize(&single).unwrap(), single);
    }

    #[test]
    fn two_by_two_block_keeps_a_connected_remnant() {
        let block = Mask::from_fn(4, 4, |x, y| (1..3).contains(&x) && (1..3).contains(&y));
        let s = skeletonize(&block).unwrap();
        assert!(s.count() >= 1);
        assert_eq!(connected_components(&s).1, 1);
    }

    #[test]
    fn ring_shape_keeps_its_hole() {
        let ring = parse(&[
            "0000000", "0111110", "0111110", "0110110", "0111110", "0111110", "0000000",
        ]);
        let s = skeletonize(&ring).unwrap();
        assert!(!s.get(3, 3));
        // 4-connected flood of the background from the border must not reach
        // the enclosed hole
        let mut seen = [false; 49];
        let mut stack = vec![(0usize, 0usize)];
        while let Some((x, y)) = stack.pop() {
            if seen[y * 7 + x] || s.get(x, y) {
                continue;
            }
            seen[y * 7 + x] = true;
            if x > 0 { stack.push((x - 1, y)); }
            if y > 0 { stack.push((x, y - 1)); }
            if x < 6 { stack.push((x + 1, y)); }
            if y < 6 { stack.push((x, y + 1)); }
        }
        assert!(!seen[3 * 7 + 3]);
    }

    #[test]
    fn diagonal_crossing_leaves_no_block() {
        // crossing point falls between pixel centers
        for n in [12usize, 16, 21] {
            let x = Mask::from_fn(n, n, |x, y| x.abs_diff(y) <= 1 || (x + y).abs_diff(n - 1) <= 1);
            let s = skeletonize(&x).unwrap();
            assert!(s.iter_set().all(|(a, b)| x.get(a, b)));
            assert_eq!(connected_components(&s).1, 1);
            assert_eq!(count_holes(&s), 0);
            assert!(first_block(&s).is_none(), "n = {n}");
        }
    }

    #[test]
    fn holes_counted() {
        assert_eq!(count_holes(&parse(&["111", "101", "111"])), 1);
        assert_eq!(count_holes(&parse(&["11111", "10101", "11111"])), 2);
        assert_eq!(count_holes(&parse(&["110", "101", "011"])), 1);
        assert_eq!(count_holes(&parse(&["101", "101", "111"])), 0);
    }

    #[test]
    fn crossing_number_on_cross() {
        let cross = Mask::from_fn(7, 7, |x, y| (x == 3 && (1..6).contains(&y)) || (y == 3 && (1..6).contains(&x)));
        assert_eq!(crossing_number(&cross, 3, 3), 4);
        assert_eq!(crossing_number(&cross, 3, 2), 2);
        assert_eq!(junction_pixels(&cross), vec![(3, 3)]);
    }

    #[test]
    fn component_count() {
        let m = parse(&["1100", "0001", "0010", "1000"]);
        assert_eq!(connected_components(&m).1, 3);
    }
}

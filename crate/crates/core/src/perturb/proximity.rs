//! Dotification: a shape's skeleton re-drawn as evenly spaced discs.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::raster::{binarize, neighbor_count, skeletonize, Fill, Mask, Point, Raster};

/// Half-width of the moving average applied to skeleton pixel chains
/// before measuring arc length. Raw 8-connected chains overestimate the
/// length of curves by several percent.
const SMOOTHING_HALF_WIDTH: usize = 3;

const NEIGHBORS: [(isize, isize); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

#[derive(Debug, Clone, PartialEq)]
pub struct DotOptions {
    pub threshold: u8,
    /// Disc diameter in pixels.
    pub diameter: f64,
    pub ink: u8,
    pub background: Fill,
}

impl Default for DotOptions {
    fn default() -> Self {
        Self {
            threshold: 128,
            diameter: 2.0,
            ink: 255,
            background: Fill::default(),
        }
    }
}

/// Replace the shape in `img` by discs placed every `spacing` pixels of arc
/// length along each skeleton segment.
///
/// Segments run between end and junction pixels (or around a closed loop).
/// Both ends of every segment get a disc; the segment is divided into
/// `round(length / spacing)` equal intervals (at least one), so the gap
/// between consecutive discs tracks `spacing` as closely as the segment
/// length allows.
pub fn dotify(img: &Raster, spacing: f64, opts: &DotOptions) -> Result<Raster> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "dot spacing must be positive, got {spacing}"
        )));
    }
    if !(opts.diameter > 0.0 && opts.diameter.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "dot diameter must be positive, got {}",
            opts.diameter
        )));
    }
    let mask = binarize(img, opts.threshold)?;
    if mask.is_empty() {
        return Err(Error::EmptyInput("no foreground to skeletonize"));
    }
    let skeleton = skeletonize(&mask)?;
    let centers = dot_centers(&skeleton, spacing);
    if centers.is_empty() {
        return Err(Error::EmptyInput("empty skeleton"));
    }
    let mut out = Raster::filled(img.width(), img.height(), 1, opts.background)?;
    let r = opts.diameter / 2.0;
    for c in &centers {
        draw_disc(&mut out, *c, r, opts.ink);
    }
    Ok(out)
}

fn draw_disc(img: &mut Raster, c: Point, r: f64, ink: u8) {
    let x0 = (c.x - r).floor().max(0.0) as usize;
    let y0 = (c.y - r).floor().max(0.0) as usize;
    let x1 = ((c.x + r).ceil() as usize).min(img.width() - 1);
    let y1 = ((c.y + r).ceil() as usize).min(img.height() - 1);
    let r2 = r * r + 1e-9;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (dx, dy) = (x as f64 - c.x, y as f64 - c.y);
            if dx * dx + dy * dy <= r2 {
                img.set_pixel(x, y, &[ink]);
            }
        }
    }
    // a disc narrower than the pixel grid still marks its nearest pixel
    let (nx, ny) = (c.x.round(), c.y.round());
    if nx >= 0.0 && ny >= 0.0 && (nx as usize) < img.width() && (ny as usize) < img.height() {
        img.set_pixel(nx as usize, ny as usize, &[ink]);
    }
}

/// Disc centers for every skeleton segment.
pub fn dot_centers(skeleton: &Mask, spacing: f64) -> Vec<Point> {
    skeleton_segments(skeleton)
        .iter()
        .flat_map(|seg| {
            let pts: Vec<Point> = seg.iter().map(|&(x, y)| Point::new(x as f64, y as f64)).collect();
            resample_polyline(&smooth(&pts, SMOOTHING_HALF_WIDTH), spacing)
        })
        .collect()
}

/// Split a thin skeleton into pixel chains.
///
/// Nodes are pixels whose neighbor count is not 2 (ends, junctions,
/// isolated pixels). Each chain runs from a node through degree-2 pixels to
/// the next node. Loops without any node are returned closed (first pixel
/// repeated at the end).
pub fn skeleton_segments(skeleton: &Mask) -> Vec<Vec<(usize, usize)>> {
    let w = skeleton.width();
    let idx = |p: (usize, usize)| p.1 * w + p.0;
    let neighbors = |p: (usize, usize)| -> Vec<(usize, usize)> {
        NEIGHBORS
            .iter()
            .filter_map(|(dx, dy)| {
                let (nx, ny) = (p.0 as isize + dx, p.1 as isize + dy);
                skeleton
                    .get_signed(nx, ny)
                    .then_some((nx as usize, ny as usize))
            })
            .collect()
    };
    let is_node = |p: (usize, usize)| neighbor_count(skeleton, p.0, p.1) != 2;
    let edge = |a: (usize, usize), b: (usize, usize)| {
        let (i, j) = (idx(a), idx(b));
        (i.min(j), i.max(j))
    };

    let mut used: HashSet<(usize, usize)> = HashSet::new();
    let mut on_path = vec![false; skeleton.bits().len()];
    let mut segments = Vec::new();

    let walk = |start: (usize, usize),
                    first: (usize, usize),
                    used: &mut HashSet<(usize, usize)>,
                    on_path: &mut Vec<bool>,
                    stop_at: Option<(usize, usize)>|
     -> Vec<(usize, usize)> {
        let mut path = vec![start, first];
        used.insert(edge(start, first));
        on_path[idx(start)] = true;
        on_path[idx(first)] = true;
        let (mut prev, mut cur) = (start, first);
        while !is_node(cur) && Some(cur) != stop_at {
            let next = neighbors(cur).into_iter().find(|n| *n != prev);
            let Some(next) = next else { break };
            if !used.insert(edge(cur, next)) {
                break;
            }
            on_path[idx(next)] = true;
            path.push(next);
            prev = cur;
            cur = next;
        }
        path
    };

    for p in skeleton.iter_set() {
        if !is_node(p) {
            continue;
        }
        let ns = neighbors(p);
        if ns.is_empty() {
            on_path[idx(p)] = true;
            segments.push(vec![p]);
            continue;
        }
        for n in ns {
            if used.contains(&edge(p, n)) {
                continue;
            }
            segments.push(walk(p, n, &mut used, &mut on_path, None));
        }
    }
    // closed loops contain no node
    for p in skeleton.iter_set() {
        if on_path[idx(p)] {
            continue;
        }
        let first = neighbors(p)[0];
        segments.push(walk(p, first, &mut used, &mut on_path, Some(p)));
    }
    segments
}

/// Symmetric moving average. Endpoints are first pulled onto the stroke
/// direction, then the chain is extended past each end by point reflection
/// through the endpoint, so endpoints stay put, straight evenly spaced
/// chains are unchanged, and pixels near the ends get a full window.
fn smooth(points: &[Point], half: usize) -> Vec<Point> {
    let n = points.len();
    if n < 3 {
        return points.to_vec();
    }
    let mut points = points.to_vec();
    points[0] = project_end(&points, half);
    points.reverse();
    points[0] = project_end(&points, half);
    points.reverse();
    let k = half.min(n - 1) as isize;
    let last = (n - 1) as isize;
    let at = |j: isize| -> Point {
        if j < 0 {
            let (e, q) = (points[0], points[(-j) as usize]);
            Point::new(2.0 * e.x - q.x, 2.0 * e.y - q.y)
        } else if j > last {
            let (e, q) = (points[n - 1], points[(2 * last - j) as usize]);
            Point::new(2.0 * e.x - q.x, 2.0 * e.y - q.y)
        } else {
            points[j as usize]
        }
    };
    let m = (2 * k + 1) as f64;
    (0..n as isize)
        .map(|i| {
            let (sx, sy) = (i - k..=i + k).map(at).fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
            Point::new(sx / m, sy / m)
        })
        .collect()
}

/// First point of `chain` projected onto the principal line through its
/// first `half + 1` points. Thinning often ends a thick stroke with a
/// corner pixel off to one side; this pulls it back onto the stroke.
fn project_end(chain: &[Point], half: usize) -> Point {
    let run = &chain[..(half + 1).min(chain.len())];
    let m = run.len() as f64;
    let (mx, my) = (run.iter().map(|p| p.x).sum::<f64>() / m, run.iter().map(|p| p.y).sum::<f64>() / m);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in run {
        let (dx, dy) = (p.x - mx, p.y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (uy, ux) = angle.sin_cos();
    let t = (chain[0].x - mx) * ux + (chain[0].y - my) * uy;
    Point::new(mx + t * ux, my + t * uy)
}

/// Points at equal arc-length intervals along a polyline, both ends
/// included. The interval count is `round(length / spacing)`, minimum one.
pub fn resample_polyline(points: &[Point], spacing: f64) -> Vec<Point> {
    match points.len() {
        0 => return Vec::new(),
        1 => return vec![points[0]],
        _ => {}
    }
    let mut cum = Vec::with_capacity(points.len());
    cum.push(0.0);
    for pair in points.windows(2) {
        let last = *cum.last().unwrap();
        cum.push(last + pair[0].distance(pair[1]));
    }
    let length = *cum.last().unwrap();
    if length == 0.0 {
        return vec![points[0]];
    }
    let intervals = ((length / spacing).round() as usize).max(1);
    let step = length / intervals as f64;
    let mut out = Vec::with_capacity(intervals + 1);
    let mut seg = 0usize;
    for k in 0..=intervals {
        if k == intervals {
            out.push(*points.last().unwrap());
            break;
        }
        let s = k as f64 * step;
        while seg + 1 < cum.len() - 1 && cum[seg + 1] < s {
            seg += 1;
        }
        let span = cum[seg + 1] - cum[seg];
        let t = if span > 0.0 { (s - cum[seg]) / span } else { 0.0 };
        let (a, b) = (points[seg], points[seg + 1]);
        out.push(Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)));
    }
    out
}

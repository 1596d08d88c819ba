use rayon::prelude::*;

use super::{evaluate, evaluate_images, phi, Classifier, ValidationSet};
use crate::error::{Error, Result};
use crate::perturb::{affine_distance, apply, GestaltParam, PerturbOptions, Principle};
use crate::raster::Raster;

/// Default Φ threshold for [`g_knee`].
pub const DEFAULT_TAU: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub enum PointOutcome {
    Measured {
        accuracy: f64,
        mean_true_prob: f64,
        phi: f64,
    },
    /// A generator could not produce the set (e.g. no detectable symmetry).
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub param: GestaltParam,
    /// Position on the parameter axis: the scalar value, or the normalized
    /// affine distance for continuation.
    pub x: f64,
    pub outcome: PointOutcome,
}

impl SweepPoint {
    pub fn phi(&self) -> Option<f64> {
        match self.outcome {
            PointOutcome::Measured { phi, .. } => Some(phi),
            PointOutcome::Failed { .. } => None,
        }
    }

    pub fn accuracy(&self) -> Option<f64> {
        match self.outcome {
            PointOutcome::Measured { accuracy, .. } => Some(accuracy),
            PointOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub principle: Principle,
    pub h_base: f64,
    pub base_true_prob: f64,
    /// In grid order.
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// Build from precomputed accuracies; `phi` is derived from `h_base`.
    pub fn from_accuracies(principle: Principle, h_base: f64, series: &[(GestaltParam, f64, Option<f64>)]) -> Self {
        let points = series
            .iter()
            .map(|(g, x, h)| SweepPoint {
                param: *g,
                x: *x,
                outcome: match h {
                    Some(h) => PointOutcome::Measured {
                        accuracy: *h,
                        mean_true_prob: f64::NAN,
                        phi: phi(h_base, *h),
                    },
                    None => PointOutcome::Failed {
                        reason: "not measured".into(),
                    },
                },
            })
            .collect();
        Self {
            principle,
            h_base,
            base_true_prob: f64::NAN,
            points,
        }
    }

    pub fn g_star_argmax(&self) -> Result<GestaltParam> {
        g_star_argmax(self)
    }

    pub fn g_knee(&self, tau: f64) -> Option<GestaltParam> {
        g_knee(self, tau)
    }
}

/// Deterministic per-item seed derived from the sweep seed.
pub fn item_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generate the perturbed version of every item. The first failing item (by
/// index) determines the error.
pub fn perturb_set(set: &ValidationSet, param: &GestaltParam, seed: u64, opts: &PerturbOptions) -> Result<Vec<Raster>> {
    let out: Vec<Result<Raster>> = set
        .items()
        .par_iter()
        .enumerate()
        .map(|(i, item)| {
            apply(param, &item.image, item.segmentation.as_ref(), item_seed(seed, i), opts)
                .map_err(|e| Error::Dataset(format!("item {i} ({}): {e}", item.source)))
        })
        .collect();
    out.into_iter().collect()
}

fn axis_position(param: &GestaltParam, set: &ValidationSet, opts: &PerturbOptions) -> f64 {
    match param {
        GestaltParam::Continuation(da) => {
            let img = &set.items()[0].image;
            affine_distance(da, img.width(), img.height(), opts.half)
        }
        other => other.scalar().expect("scalar principle"),
    }
}

fn check_requirements(set: &ValidationSet, principle: Principle) -> Result<()> {
    if principle == Principle::Similarity && !set.is_rgb() {
        return Err(Error::ChannelMismatch {
            expected: "3 (similarity recolors hue)",
            found: 1,
        });
    }
    if principle.needs_segmentation() {
        if let Some((i, _)) = set.items().iter().enumerate().find(|(_, it)| it.segmentation.is_none()) {
            return Err(Error::Dataset(format!(
                "{principle} needs segmentation masks; item {i} has none"
            )));
        }
    }
    Ok(())
}

/// Measure `h_base`, then one perturbed set per grid value.
///
/// Generator failures mark the point failed; classifier failures abort.
pub fn run_sweep<C: Classifier + ?Sized>(
    classifier: &C,
    set: &ValidationSet,
    principle: Principle,
    grid: &[GestaltParam],
    seed: u64,
    opts: &PerturbOptions,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::EmptyInput("sweep grid is empty"));
    }
    for g in grid {
        if g.principle() != principle {
            return Err(Error::InvalidParameter(format!(
                "grid value {g} belongs to {}, not {principle}",
                g.principle()
            )));
        }
        g.validate()?;
    }
    check_requirements(set, principle)?;

    let base = evaluate(classifier, set)?;
    let mut points = Vec::with_capacity(grid.len());
    for g in grid {
        let x = axis_position(g, set, opts);
        let outcome = match perturb_set(set, g, seed, opts) {
            Err(e) => PointOutcome::Failed { reason: e.to_string() },
            Ok(images) => {
                let eval = evaluate_images(classifier, set, |i| Ok(images[i].clone()))?;
                PointOutcome::Measured {
                    accuracy: eval.accuracy,
                    mean_true_prob: eval.mean_true_prob,
                    phi: phi(base.accuracy, eval.accuracy),
                }
            }
        };
        points.push(SweepPoint { param: *g, x, outcome });
    }
    Ok(SweepResult {
        principle,
        h_base: base.accuracy,
        base_true_prob: base.mean_true_prob,
        points,
    })
}

/// Grid value with the largest Φ; ties go to the smallest parameter value,
/// then to the earliest grid entry.
pub fn g_star_argmax(result: &SweepResult) -> Result<GestaltParam> {
    let mut best: Option<(&SweepPoint, f64)> = None;
    for p in &result.points {
        let Some(phi) = p.phi() else { continue };
        best = match best {
            Some((b, bphi)) if bphi > phi || (bphi == phi && b.x <= p.x) => Some((b, bphi)),
            _ => Some((p, phi)),
        };
    }
    best.map(|(p, _)| p.param).ok_or(Error::NoSuccessfulPoints)
}

/// Largest parameter whose Φ stays ≤ `tau` before the first exceedance,
/// walking the measured points in ascending parameter order.
pub fn g_knee(result: &SweepResult, tau: f64) -> Option<GestaltParam> {
    let mut measured: Vec<(&SweepPoint, f64)> = result
        .points
        .iter()
        .filter_map(|p| p.phi().map(|phi| (p, phi)))
        .collect();
    measured.sort_by(|a, b| a.0.x.total_cmp(&b.0.x));
    let mut knee = None;
    for (p, phi) in measured {
        if phi > tau {
            break;
        }
        knee = Some(p.param);
    }
    knee
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{ConfidenceVector, Item};
    use crate::perturb::AffineParams;
    use crate::raster::Fill;

    fn closure_series(phis: &[f64], gs: &[f64]) -> SweepResult {
        let series: Vec<_> = gs
            .iter()
            .zip(phis)
            .map(|(g, p)| (GestaltParam::Closure(*g), *g, Some(1.0 - p)))
            .collect();
        SweepResult::from_accuracies(Principle::Closure, 1.0, &series)
    }

    #[test]
    fn argmax_examples() {
        let r = closure_series(&[0.0, 0.05, 0.19, 0.45], &[0.0, 10.0, 30.0, 40.0]);
        assert_eq!(r.g_star_argmax().unwrap(), GestaltParam::Closure(40.0));
        let flat = closure_series(&[0.1; 4], &[0.0, 10.0, 20.0, 30.0]);
        assert_eq!(flat.g_star_argmax().unwrap(), GestaltParam::Closure(0.0));
        let one = closure_series(&[0.3], &[50.0]);
        assert_eq!(one.g_star_argmax().unwrap(), GestaltParam::Closure(50.0));
    }

    #[test]
    fn argmax_tie_prefers_smaller_g_regardless_of_order() {
        let r = closure_series(&[0.2, 0.2, 0.1], &[30.0, 10.0, 0.0]);
        assert_eq!(r.g_star_argmax().unwrap(), GestaltParam::Closure(10.0));
    }

    #[test]
    fn all_failed_is_an_error() {
        let r = SweepResult::from_accuracies(Principle::Closure, 1.0, &[(GestaltParam::Closure(10.0), 10.0, None)]);
        assert!(matches!(r.g_star_argmax(), Err(Error::NoSuccessfulPoints)));
        assert_eq!(r.g_knee(0.2), None);
    }

    #[test]
    fn knee_examples() {
        let gs = [0.0, 10.0, 20.0, 30.0, 40.0];
        let r = closure_series(&[0.0, 0.05, 0.12, 0.19, 0.45], &gs);
        assert_eq!(r.g_knee(DEFAULT_TAU), Some(GestaltParam::Closure(30.0)));
        assert_eq!(r.g_knee(0.9), Some(GestaltParam::Closure(40.0)));
        let high = closure_series(&[0.3, 0.4], &[0.0, 10.0]);
        assert_eq!(high.g_knee(0.2), None);
        // a later dip below tau does not extend the knee
        let dip = closure_series(&[0.0, 0.3, 0.1], &[0.0, 10.0, 20.0]);
        assert_eq!(dip.g_knee(0.2), Some(GestaltParam::Closure(0.0)));
    }

    #[test]
    fn seeds_differ_per_item() {
        assert_ne!(item_seed(7, 0), item_seed(7, 1));
        assert_ne!(item_seed(7, 0), item_seed(8, 0));
        assert_eq!(item_seed(7, 3), item_seed(7, 3));
    }

    /// Predicts class 1 when more than `k` pixels are lit.
    struct InkCount(usize);

    impl Classifier for InkCount {
        fn class_count(&self) -> usize {
            2
        }

        fn classify(&self, img: &Raster) -> Result<ConfidenceVector> {
            let lit = img.data().iter().filter(|v| **v >= 128).count();
            ConfidenceVector::new(if lit > self.0 { vec![0.0, 1.0] } else { vec![1.0, 0.0] })
        }
    }

    fn blocks() -> ValidationSet {
        let items = (0..6)
            .map(|i| {
                let img = Raster::new(
                    12,
                    12,
                    1,
                    (0..144)
                        .map(|p| if (2..10).contains(&(p % 12)) && (2..10).contains(&(p / 12)) { 255 } else { 0 })
                        .collect(),
                )
                .unwrap();
                Item::new(img, 1, format!("block#{i}"))
            })
            .collect();
        ValidationSet::new(items, 2).unwrap()
    }

    #[test]
    fn closure_sweep_degrades_and_is_deterministic() {
        let set = blocks();
        let grid: Vec<_> = [0.0, 25.0, 50.0, 75.0].map(GestaltParam::Closure).to_vec();
        let clf = InkCount(40);
        let a = run_sweep(&clf, &set, Principle::Closure, &grid, 1, &PerturbOptions::default()).unwrap();
        let b = run_sweep(&clf, &set, Principle::Closure, &grid, 1, &PerturbOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.h_base, 1.0);
        assert_eq!(a.points[0].phi(), Some(0.0));
        assert_eq!(a.points[3].accuracy(), Some(0.0));
        assert_eq!(a.points[2].accuracy(), Some(0.0));
        assert_eq!(a.g_star_argmax().unwrap(), GestaltParam::Closure(50.0));
    }

    #[test]
    fn generator_failure_marks_point() {
        let set = blocks();
        // a blank image has no foreground to occlude
        let blank = ValidationSet::new(
            vec![Item::new(Raster::filled(12, 12, 1, Fill::gray(0)).unwrap(), 0, "blank")],
            2,
        )
        .unwrap();
        let grid = [GestaltParam::Closure(0.0), GestaltParam::Closure(30.0)];
        let r = run_sweep(&InkCount(40), &blank, Principle::Closure, &grid, 1, &PerturbOptions::default()).unwrap();
        assert_eq!(r.points[0].phi(), Some(0.0));
        assert!(matches!(r.points[1].outcome, PointOutcome::Failed { .. }));
        assert!(run_sweep(&InkCount(40), &set, Principle::Proximity, &grid, 1, &PerturbOptions::default()).is_err());
    }

    #[test]
    fn requirements_checked() {
        let set = blocks();
        let grid = [GestaltParam::Similarity(90.0)];
        assert!(run_sweep(&InkCount(1), &set, Principle::Similarity, &grid, 1, &PerturbOptions::default()).is_err());
        assert!(run_sweep(&InkCount(1), &set, Principle::Closure, &[], 1, &PerturbOptions::default()).is_err());
    }

    #[test]
    fn continuation_axis_is_affine_distance() {
        let set = blocks();
        let da = AffineParams([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let grid = [GestaltParam::Continuation(AffineParams::zero()), GestaltParam::Continuation(da)];
        let r = run_sweep(&InkCount(40), &set, Principle::Continuation, &grid, 1, &PerturbOptions::default()).unwrap();
        assert_eq!(r.points[0].x, 0.0);
        assert!((r.points[1].x - 1.0 / 288f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.points[0].phi(), Some(0.0));
    }
}

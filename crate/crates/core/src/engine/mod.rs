//! Classifier contract, accuracy, accuracy drop and sweeps.

mod centroid;
mod sweep;

pub use centroid::{classify_centroid, fit_centroid, CentroidModel};
pub use sweep::{
    g_knee, g_star_argmax, item_seed, perturb_set, run_sweep, PointOutcome, SweepPoint, SweepResult,
    DEFAULT_TAU,
};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::perturb::SegmentedImage;
use crate::raster::Raster;

/// Per-class scores for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceVector {
    scores: Vec<f64>,
}

impl ConfidenceVector {
    /// At least two finite, non-negative scores.
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "confidence vector needs ≥ 2 classes, got {}",
                scores.len()
            )));
        }
        if let Some(bad) = scores.iter().find(|s| !s.is_finite() || **s < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "confidence score {bad} is not a finite non-negative number"
            )));
        }
        Ok(Self { scores })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Index of the highest score; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, s) in self.scores.iter().enumerate().skip(1) {
            if *s > self.scores[best] {
                best = i;
            }
        }
        best
    }

    pub fn sum(&self) -> f64 {
        self.scores.iter().sum()
    }
}

/// Anything that maps an image to per-class scores.
///
/// Implementations must be deterministic and callable from several threads;
/// wrap non-reentrant backends in a lock.
pub trait Classifier: Sync {
    fn class_count(&self) -> usize;

    fn classify(&self, img: &Raster) -> Result<ConfidenceVector>;
}

impl<C: Classifier + ?Sized> Classifier for &C {
    fn class_count(&self) -> usize {
        (**self).class_count()
    }

    fn classify(&self, img: &Raster) -> Result<ConfidenceVector> {
        (**self).classify(img)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub image: Raster,
    pub label: usize,
    pub segmentation: Option<SegmentedImage>,
    /// Where the item came from, e.g. `t10k-images-idx3-ubyte#17`.
    pub source: String,
}

impl Item {
    pub fn new(image: Raster, label: usize, source: impl Into<String>) -> Self {
        Self {
            image,
            label,
            segmentation: None,
            source: source.into(),
        }
    }
}

/// Labelled images `V = {I_k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationSet {
    items: Vec<Item>,
    class_count: usize,
}

impl ValidationSet {
    pub fn new(items: Vec<Item>, class_count: usize) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::EmptyInput("validation set has no items"));
        }
        if let Some((i, item)) = items.iter().enumerate().find(|(_, it)| it.label >= class_count) {
            return Err(Error::Dataset(format!(
                "item {i} has label {} but class_count is {class_count}",
                item.label
            )));
        }
        Ok(Self { items, class_count })
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn into_items(self) -> Vec<Item> {
        self.items
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_rgb(&self) -> bool {
        self.items.iter().all(|i| i.image.is_rgb())
    }

    /// Split into the first `n` items and the rest (either may be `None`
    /// when empty).
    pub fn split_at(self, n: usize) -> (Option<ValidationSet>, Option<ValidationSet>) {
        let c = self.class_count;
        let mut head = self.items;
        let tail = head.split_off(n.min(head.len()));
        (
            ValidationSet::new(head, c).ok(),
            ValidationSet::new(tail, c).ok(),
        )
    }
}

/// Accuracy and mean true-class probability over a set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Fraction of items whose argmax equals the label.
    pub accuracy: f64,
    /// Mean score assigned to the true label.
    pub mean_true_prob: f64,
}

/// Classify every item (in parallel) and aggregate in item order.
pub fn evaluate<C: Classifier + ?Sized>(classifier: &C, set: &ValidationSet) -> Result<Evaluation> {
    evaluate_images(classifier, set, |i| Ok(set.items()[i].image.clone()))
}

/// Like [`evaluate`] but each image is produced on demand by `image(i)`.
pub(crate) fn evaluate_images<C, F>(classifier: &C, set: &ValidationSet, image: F) -> Result<Evaluation>
where
    C: Classifier + ?Sized,
    F: Fn(usize) -> Result<Raster> + Sync,
{
    let expected = set.class_count();
    if classifier.class_count() != expected {
        return Err(Error::InvalidParameter(format!(
            "classifier reports {} classes, validation set has {expected}",
            classifier.class_count()
        )));
    }
    let per_item: Vec<Result<(bool, f64)>> = (0..set.len())
        .into_par_iter()
        .map(|i| {
            let img = image(i)?;
            let label = set.items()[i].label;
            let cv = classifier.classify(&img).map_err(|e| Error::Classifier {
                index: i,
                reason: e.to_string(),
            })?;
            if cv.len() != expected {
                return Err(Error::Classifier {
                    index: i,
                    reason: format!("returned {} scores, expected {expected}", cv.len()),
                });
            }
            Ok((cv.argmax() == label, cv.scores()[label]))
        })
        .collect();
    let mut correct = 0usize;
    let mut prob = 0.0;
    for r in per_item {
        let (ok, p) = r?;
        correct += usize::from(ok);
        prob += p;
    }
    let n = set.len() as f64;
    Ok(Evaluation {
        accuracy: correct as f64 / n,
        mean_true_prob: prob / n,
    })
}

/// Top-1 accuracy `h(f(V))`.
pub fn accuracy<C: Classifier + ?Sized>(classifier: &C, set: &ValidationSet) -> Result<f64> {
    Ok(evaluate(classifier, set)?.accuracy)
}

/// Accuracy drop `Φ = h_base − h_g`; negative when the perturbation helps.
pub fn phi(h_base: f64, h_g: f64) -> f64 {
    h_base - h_g
}

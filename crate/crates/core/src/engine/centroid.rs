use super::{Classifier, ConfidenceVector, ValidationSet};
use crate::error::{Error, Result};
use crate::raster::Raster;

/// Nearest-mean classifier over normalized pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidModel {
    centroids: Vec<Vec<f64>>,
    temperature: f64,
    width: usize,
    height: usize,
    channels: usize,
}

impl CentroidModel {
    /// Build from explicit centroids (pixel values already scaled to [0, 1]).
    pub fn from_centroids(
        centroids: Vec<Vec<f64>>,
        width: usize,
        height: usize,
        channels: usize,
        temperature: f64,
    ) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        if centroids.len() < 2 {
            return Err(Error::InvalidParameter("centroid model needs ≥ 2 classes".into()));
        }
        let dim = width * height * channels;
        if let Some((i, c)) = centroids.iter().enumerate().find(|(_, c)| c.len() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "centroid {i} has {} entries, expected {dim}",
                c.len()
            )));
        }
        Ok(Self {
            centroids,
            temperature,
            width,
            height,
            channels,
        })
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    /// Euclidean distance from `img` to every centroid.
    pub fn distances(&self, img: &Raster) -> Result<Vec<f64>> {
        if (img.width(), img.height(), img.channels()) != self.dims() {
            return Err(Error::DimensionMismatch(format!(
                "image is {}x{}x{}, model expects {}x{}x{}",
                img.width(),
                img.height(),
                img.channels(),
                self.width,
                self.height,
                self.channels
            )));
        }
        Ok(self
            .centroids
            .iter()
            .map(|c| {
                c.iter()
                    .zip(img.data())
                    .map(|(m, v)| {
                        let d = f64::from(*v) / 255.0 - m;
                        d * d
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .collect())
    }
}

impl Classifier for CentroidModel {
    fn class_count(&self) -> usize {
        self.centroids.len()
    }

    fn classify(&self, img: &Raster) -> Result<ConfidenceVector> {
        classify_centroid(self, img)
    }
}

/// Per-class mean of the training images, pixels scaled to [0, 1].
pub fn fit_centroid(train: &ValidationSet, temperature: f64) -> Result<CentroidModel> {
    let first = &train.items()[0].image;
    let (w, h, c) = (first.width(), first.height(), first.channels());
    let dim = w * h * c;
    let k = train.class_count();
    let mut sums = vec![vec![0.0f64; dim]; k];
    let mut counts = vec![0usize; k];
    for (i, item) in train.items().iter().enumerate() {
        let img = &item.image;
        if (img.width(), img.height(), img.channels()) != (w, h, c) {
            return Err(Error::DimensionMismatch(format!(
                "training item {i} ({}) is {}x{}x{}, expected {w}x{h}x{c}",
                item.source,
                img.width(),
                img.height(),
                img.channels()
            )));
        }
        counts[item.label] += 1;
        for (s, v) in sums[item.label].iter_mut().zip(img.data()) {
            *s += f64::from(*v) / 255.0;
        }
    }
    if let Some(missing) = counts.iter().position(|n| *n == 0) {
        return Err(Error::Dataset(format!(
            "no training items for class {missing}"
        )));
    }
    for (s, n) in sums.iter_mut().zip(&counts) {
        let n = *n as f64;
        s.iter_mut().for_each(|v| *v /= n);
    }
    CentroidModel::from_centroids(sums, w, h, c, temperature)
}

/// `softmax(−d_i / T)` over the distances to the class centroids.
pub fn classify_centroid(model: &CentroidModel, img: &Raster) -> Result<ConfidenceVector> {
    let d = model.distances(img)?;
    let logits: Vec<f64> = d.iter().map(|d| -d / model.temperature).collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exp.iter().sum();
    ConfidenceVector::new(exp.into_iter().map(|e| e / z).collect())
}

//! Validation-set generators, one per Gestalt principle.
//!
//! | principle     | parameter                      | generator                |
//! |---------------|--------------------------------|--------------------------|
//! | closure       | occlusion percentage           | [`occlude`]              |
//! | proximity     | dot spacing along the skeleton | [`dotify`]               |
//! | continuation  | affine coefficients Δa         | [`piecewise_affine`]     |
//! | similarity    | hue angle on the color wheel   | [`recolor`]              |
//! | figure/ground | number of segmented classes    | [`reduce_classes`]       |
//! | symmetry      | opposite rotation angle        | [`rotate_symmetric_pair`]|
//!
//! Every generator except [`dotify`] returns a bit-identical copy of its
//! input at the identity parameter.

mod closure;
mod continuation;
mod figure_ground;
mod proximity;
mod similarity;
mod symmetry;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use closure::{occlude, OcclusionOptions};
pub use continuation::{affine_distance, displacement_field, piecewise_affine, AffineParams, Half};
pub use figure_ground::{neutral_fill, reduce_classes};
pub use proximity::{dot_centers, dotify, resample_polyline, skeleton_segments, DotOptions};
pub use similarity::recolor;
pub use symmetry::{
    detect_symmetry, reflective_correlation, rotate_symmetric_pair, SymmetryAxis, SymmetryOptions,
};

use crate::error::{Error, Result};
use crate::raster::{Fill, Mask, Raster};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Principle {
    Closure,
    Proximity,
    Continuation,
    Similarity,
    FigureGround,
    Symmetry,
}

impl Principle {
    pub const ALL: [Principle; 6] = [
        Principle::Closure,
        Principle::Proximity,
        Principle::Continuation,
        Principle::Similarity,
        Principle::FigureGround,
        Principle::Symmetry,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Principle::Closure => "closure",
            Principle::Proximity => "proximity",
            Principle::Continuation => "continuation",
            Principle::Similarity => "similarity",
            Principle::FigureGround => "figure-ground",
            Principle::Symmetry => "symmetry",
        }
    }

    /// What the Gestalt parameter measures for this principle.
    pub fn parameter_name(self) -> &'static str {
        match self {
            Principle::Closure => "occlusion percentage",
            Principle::Proximity => "point distance",
            Principle::Continuation => "piecewise transformation vector",
            Principle::Similarity => "radial angle of color wheel",
            Principle::FigureGround => "number of segmented classes",
            Principle::Symmetry => "rotation angle",
        }
    }

    /// Unit of the sweep's x-axis value.
    pub fn unit(self) -> &'static str {
        match self {
            Principle::Closure => "%",
            Principle::Proximity => "px",
            Principle::Continuation => "affine distance",
            Principle::Similarity => "deg",
            Principle::FigureGround => "classes",
            Principle::Symmetry => "deg",
        }
    }

    pub fn needs_segmentation(self) -> bool {
        matches!(self, Principle::Similarity | Principle::FigureGround)
    }
}

impl fmt::Display for Principle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Principle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "closure" => Ok(Principle::Closure),
            "proximity" => Ok(Principle::Proximity),
            "continuation" => Ok(Principle::Continuation),
            "similarity" => Ok(Principle::Similarity),
            "figure-ground" | "figureground" | "figure-and-ground" => Ok(Principle::FigureGround),
            "symmetry" => Ok(Principle::Symmetry),
            other => Err(Error::InvalidParameter(format!("unknown principle `{other}`"))),
        }
    }
}

/// A principle together with the value of its Gestalt parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GestaltParam {
    /// Percentage of foreground pixels hidden, in [0, 100].
    Closure(f64),
    /// Dot spacing along the skeleton in pixels, > 0.
    Proximity(f64),
    /// Affine displacement coefficients applied to one image half.
    Continuation(AffineParams),
    /// Hue rotation in degrees, in [0, 360).
    Similarity(f64),
    /// Number of segmented classes kept, ≥ 1.
    FigureGround(usize),
    /// Opposite rotation applied to a symmetric pair, in [0, 360] degrees.
    Symmetry(f64),
}

impl GestaltParam {
    /// Build a parameter for a scalar-valued principle.
    pub fn from_scalar(principle: Principle, value: f64) -> Result<Self> {
        let p = match principle {
            Principle::Closure => GestaltParam::Closure(value),
            Principle::Proximity => GestaltParam::Proximity(value),
            Principle::Similarity => GestaltParam::Similarity(value),
            Principle::Symmetry => GestaltParam::Symmetry(value),
            Principle::FigureGround => {
                if value.fract() != 0.0 || value < 0.0 || !value.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "figure-ground class count must be a whole number, got {value}"
                    )));
                }
                GestaltParam::FigureGround(value as usize)
            }
            Principle::Continuation => {
                return Err(Error::InvalidParameter(
                    "continuation takes a 6-vector, not a scalar".into(),
                ))
            }
        };
        p.validate()?;
        Ok(p)
    }

    pub fn principle(&self) -> Principle {
        match self {
            GestaltParam::Closure(_) => Principle::Closure,
            GestaltParam::Proximity(_) => Principle::Proximity,
            GestaltParam::Continuation(_) => Principle::Continuation,
            GestaltParam::Similarity(_) => Principle::Similarity,
            GestaltParam::FigureGround(_) => Principle::FigureGround,
            GestaltParam::Symmetry(_) => Principle::Symmetry,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            GestaltParam::Closure(v) if !(0.0..=100.0).contains(&v) => {
                bad(format!("occlusion percentage {v} outside [0, 100]"))
            }
            GestaltParam::Proximity(v) if !(v > 0.0 && v.is_finite()) => {
                bad(format!("dot spacing must be positive, got {v}"))
            }
            GestaltParam::Similarity(v) if !(0.0..360.0).contains(&v) => {
                bad(format!("hue angle {v} outside [0, 360)"))
            }
            GestaltParam::FigureGround(0) => bad("figure-ground class count must be ≥ 1".into()),
            GestaltParam::Symmetry(v) if !(0.0..=360.0).contains(&v) => {
                bad(format!("rotation angle {v} outside [0, 360]"))
            }
            GestaltParam::Continuation(da) => da.validate(),
            _ => Ok(()),
        }
    }

    /// Scalar value of the parameter; `None` for the continuation vector.
    pub fn scalar(&self) -> Option<f64> {
        match *self {
            GestaltParam::Closure(v)
            | GestaltParam::Proximity(v)
            | GestaltParam::Similarity(v)
            | GestaltParam::Symmetry(v) => Some(v),
            GestaltParam::FigureGround(n) => Some(n as f64),
            GestaltParam::Continuation(_) => None,
        }
    }
}

impl fmt::Display for GestaltParam {
    /// Continuation vectors print as `a0;a1;a2;a3;a4;a5`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GestaltParam::Continuation(da) => {
                let parts: Vec<String> = da.0.iter().map(|v| v.to_string()).collect();
                f.write_str(&parts.join(";"))
            }
            other => write!(f, "{}", other.scalar().expect("scalar principle")),
        }
    }
}

/// A raster annotated with disjoint per-class masks and the class the
/// classifier is expected to report.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedImage {
    raster: Raster,
    class_masks: Vec<(usize, Mask)>,
    target_class: usize,
}

impl SegmentedImage {
    pub fn new(raster: Raster, class_masks: Vec<(usize, Mask)>, target_class: usize) -> Result<Self> {
        for (i, (id, mask)) in class_masks.iter().enumerate() {
            raster.check_mask(mask)?;
            for (other_id, other) in &class_masks[..i] {
                if other_id == id {
                    return Err(Error::InvalidParameter(format!("class {id} has two masks")));
                }
                if other.intersects(mask) {
                    return Err(Error::InvalidParameter(format!(
                        "masks for classes {other_id} and {id} overlap"
                    )));
                }
            }
        }
        if !class_masks.iter().any(|(id, _)| *id == target_class) {
            return Err(Error::InvalidParameter(format!(
                "target class {target_class} has no mask"
            )));
        }
        Ok(Self {
            raster,
            class_masks,
            target_class,
        })
    }

    pub fn raster(&self) -> &Raster {
        &self.raster
    }

    pub fn class_masks(&self) -> &[(usize, Mask)] {
        &self.class_masks
    }

    pub fn target_class(&self) -> usize {
        self.target_class
    }

    pub fn target_mask(&self) -> &Mask {
        self.class_masks
            .iter()
            .find(|(id, _)| *id == self.target_class)
            .map(|(_, m)| m)
            .expect("target presence checked at construction")
    }

    pub fn class_count(&self) -> usize {
        self.class_masks.len()
    }

    /// Same annotations over a different raster of equal size.
    pub fn with_raster(&self, raster: Raster) -> Result<Self> {
        Self::new(raster, self.class_masks.clone(), self.target_class)
    }
}

/// Knobs shared by the generators when driven from a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbOptions {
    /// Foreground threshold on intensity (luma for RGB).
    pub threshold: u8,
    /// Foreground threshold for measuring occlusion.
    pub occlusion_threshold: u8,
    /// Background used for erased pixels and out-of-bounds samples.
    pub fill: Fill,
    pub min_patch: usize,
    pub max_patch: usize,
    pub dot_diameter: f64,
    pub half: Half,
    pub symmetry_step_deg: f64,
}

impl Default for PerturbOptions {
    fn default() -> Self {
        Self {
            threshold: 128,
            occlusion_threshold: 1,
            fill: Fill::default(),
            min_patch: 2,
            max_patch: 4,
            dot_diameter: 2.0,
            half: Half::Right,
            symmetry_step_deg: 1.0,
        }
    }
}

/// Apply one Gestalt perturbation to a single image.
///
/// `segmentation` is required for similarity and figure/ground. `seed`
/// only affects closure.
pub fn apply(
    param: &GestaltParam,
    image: &Raster,
    segmentation: Option<&SegmentedImage>,
    seed: u64,
    opts: &PerturbOptions,
) -> Result<Raster> {
    param.validate()?;
    let need_seg = || {
        segmentation.ok_or_else(|| {
            Error::InvalidParameter(format!(
                "{} requires segmentation masks",
                param.principle()
            ))
        })
    };
    match *param {
        GestaltParam::Closure(pct) => occlude(
            image,
            pct,
            seed,
            &OcclusionOptions {
                threshold: opts.occlusion_threshold,
                min_patch: opts.min_patch,
                max_patch: opts.max_patch,
                fill: opts.fill,
            },
        ),
        GestaltParam::Proximity(spacing) => dotify(
            image,
            spacing,
            &DotOptions {
                threshold: opts.threshold,
                diameter: opts.dot_diameter,
                ..DotOptions::default()
            },
        ),
        GestaltParam::Continuation(da) => piecewise_affine(image, &da, opts.half, opts.fill),
        GestaltParam::Similarity(angle) => {
            let seg = need_seg()?;
            recolor(&seg.with_raster(image.clone())?, angle)
        }
        GestaltParam::FigureGround(keep) => {
            let seg = need_seg()?;
            reduce_classes(&seg.with_raster(image.clone())?, keep)
        }
        GestaltParam::Symmetry(theta) => {
            if theta == 0.0 {
                return Ok(image.clone());
            }
            let axis = detect_symmetry(
                image,
                &SymmetryOptions {
                    threshold: opts.threshold,
                    step_deg: opts.symmetry_step_deg,
                },
            )?;
            rotate_symmetric_pair(image, &axis, theta, opts.fill)
        }
    }
}

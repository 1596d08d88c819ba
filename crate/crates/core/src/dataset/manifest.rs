//! Line-oriented dataset manifest.
//!
//! ```text
//! gestalt-manifest v1
//! {"class_count": 3, "color": "rgb"}
//! {"image": "img/0.ppm", "label": 2, "masks": {"2": "img/0_cat.pgm"}, "target_class": 2}
//! ```
//!
//! Paths are relative to the manifest's directory. Blank lines and lines
//! starting with `#` are ignored.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::pnm::{read_mask, read_pnm, write_pnm};
use crate::engine::{Item, ValidationSet};
use crate::error::{Error, Result};
use crate::perturb::{GestaltParam, SegmentedImage};

pub const MANIFEST_HEADER: &str = "gestalt-manifest v1";
pub const INDEX_FILE: &str = "index.manifest";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorMode {
    Grayscale,
    Rgb,
}

impl ColorMode {
    pub fn channels(self) -> usize {
        match self {
            ColorMode::Grayscale => 1,
            ColorMode::Rgb => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestMeta {
    pub class_count: usize,
    pub color: ColorMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image: String,
    pub label: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub masks: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_class: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub principle: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub meta: ManifestMeta,
    pub entries: Vec<ManifestEntry>,
}

fn manifest_err(path: &Path, line: usize, message: impl std::fmt::Display) -> Error {
    Error::Format {
        path: format!("{}:{line}", path.display()),
        message: message.to_string(),
    }
}

pub fn parse_manifest(text: &str, path: &Path) -> Result<DatasetManifest> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, MANIFEST_HEADER)) => {}
        Some((n, other)) => {
            return Err(manifest_err(path, n, format!("expected `{MANIFEST_HEADER}`, found `{other}`")))
        }
        None => return Err(manifest_err(path, 1, "empty manifest")),
    }
    let (n, meta_line) = lines.next().ok_or_else(|| manifest_err(path, 2, "missing metadata line"))?;
    let meta: ManifestMeta = serde_json::from_str(meta_line).map_err(|e| manifest_err(path, n, e))?;
    let entries = lines
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| manifest_err(path, n, e)))
        .collect::<Result<Vec<ManifestEntry>>>()?;
    Ok(DatasetManifest { meta, entries })
}

pub fn render_manifest(m: &DatasetManifest) -> String {
    let mut out = format!("{MANIFEST_HEADER}\n");
    let _ = writeln!(out, "{}", serde_json::to_string(&m.meta).expect("meta serializes"));
    for e in &m.entries {
        let _ = writeln!(out, "{}", serde_json::to_string(e).expect("entry serializes"));
    }
    out
}

/// Load a manifest and every raster and mask it references.
pub fn load_manifest(path: &Path) -> Result<ValidationSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let m = parse_manifest(&text, path)?;
    if m.entries.is_empty() {
        return Err(Error::EmptyInput("manifest lists no entries"));
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let resolve = |p: &str| -> PathBuf { base.join(p) };
    let channels = m.meta.color.channels();
    let mut items = Vec::with_capacity(m.entries.len());
    for (i, e) in m.entries.iter().enumerate() {
        let name = format!("entry {i} ({})", e.image);
        if e.label >= m.meta.class_count {
            return Err(Error::Dataset(format!(
                "{name}: label {} ≥ class_count {}",
                e.label, m.meta.class_count
            )));
        }
        let image = read_pnm(&resolve(&e.image))?;
        if image.channels() != channels {
            return Err(Error::Dataset(format!(
                "{name}: has {} channel(s) but manifest color is {:?}",
                image.channels(),
                m.meta.color
            )));
        }
        let segmentation = if e.masks.is_empty() {
            None
        } else {
            let mut masks = Vec::with_capacity(e.masks.len());
            for (id, mask_path) in &e.masks {
                let class: usize = id
                    .parse()
                    .map_err(|_| Error::Dataset(format!("{name}: mask key `{id}` is not a class id")))?;
                if class >= m.meta.class_count {
                    return Err(Error::Dataset(format!("{name}: unknown class id {class} in masks")));
                }
                let mask = read_mask(&resolve(mask_path))?;
                if !image.same_dims(&mask) {
                    return Err(Error::DimensionMismatch(format!(
                        "{name}: mask {mask_path} is {}x{}, image is {}x{}",
                        mask.width(),
                        mask.height(),
                        image.width(),
                        image.height()
                    )));
                }
                masks.push((class, mask));
            }
            let target = e.target_class.unwrap_or(e.label);
            Some(
                SegmentedImage::new(image.clone(), masks, target)
                    .map_err(|err| Error::Dataset(format!("{name}: {err}")))?,
            )
        };
        let source = e.source.clone().unwrap_or_else(|| e.image.clone());
        items.push(Item {
            image,
            label: e.label,
            segmentation,
            source,
        });
    }
    ValidationSet::new(items, m.meta.class_count)
}

/// Write each item's raster to `dir` as `NNNNNN.pgm`/`.ppm` plus an
/// `index.manifest` recording source, principle and parameter. Returns the
/// number of image files written.
pub fn save_perturbed(dir: &Path, items: &[Item], class_count: usize, param: Option<&GestaltParam>) -> Result<usize> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let color = if items.first().is_some_and(|i| i.image.is_rgb()) {
        ColorMode::Rgb
    } else {
        ColorMode::Grayscale
    };
    let mut entries = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        if item.image.channels() != color.channels() {
            return Err(Error::Dataset(format!(
                "item {i} ({}) has {} channel(s), expected {}",
                item.source,
                item.image.channels(),
                color.channels()
            )));
        }
        let ext = if item.image.is_rgb() { "ppm" } else { "pgm" };
        let name = format!("{i:06}.{ext}");
        write_pnm(&dir.join(&name), &item.image)?;
        entries.push(ManifestEntry {
            image: name,
            label: item.label,
            masks: BTreeMap::new(),
            target_class: None,
            source: Some(item.source.clone()),
            principle: param.map(|p| p.principle().to_string()),
            g: param.map(|p| p.to_string()),
        });
    }
    let manifest = DatasetManifest {
        meta: ManifestMeta { class_count, color },
        entries,
    };
    let index = dir.join(INDEX_FILE);
    std::fs::write(&index, render_manifest(&manifest)).map_err(|e| Error::io(&index, e))?;
    Ok(items.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_render() {
        let text = "gestalt-manifest v1\n{\"class_count\":3,\"color\":\"rgb\"}\n\n# note\n{\"image\":\"a.ppm\",\"label\":1,\"masks\":{\"1\":\"m.pgm\"}}\n";
        let m = parse_manifest(text, Path::new("x")).unwrap();
        assert_eq!(m.meta.color, ColorMode::Rgb);
        assert_eq!(m.entries.len(), 1);
        assert_eq!(m.entries[0].masks["1"], "m.pgm");
        let again = parse_manifest(&render_manifest(&m), Path::new("x")).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn header_and_line_errors() {
        assert!(parse_manifest("nope\n{}", Path::new("x")).is_err());
        let e = parse_manifest("gestalt-manifest v1\n{\"class_count\":2,\"color\":\"rgb\"}\n{bad", Path::new("m"))
            .unwrap_err();
        assert!(e.to_string().contains("m:3"), "{e}");
        assert!(parse_manifest("gestalt-manifest v1\n{\"class_count\":2,\"color\":\"cmyk\"}", Path::new("m")).is_err());
    }
}

use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use crate::engine::{Item, ValidationSet};
use crate::error::{Error, Result};
use crate::raster::Raster;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Read a file, transparently gunzipping it when it starts with the gzip
/// magic bytes.
pub fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn format_err(path: &str, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_string(),
        message: message.into(),
    }
}

fn be_u32(buf: &[u8], at: usize, path: &str) -> Result<u32> {
    buf.get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| format_err(path, format!("truncated header: {} bytes", buf.len())))
}

/// Decode an IDX image file (already decompressed).
pub fn parse_idx_images(buf: &[u8], path: &str) -> Result<Vec<Raster>> {
    let magic = be_u32(buf, 0, path)?;
    if magic != IMAGE_MAGIC {
        return Err(format_err(
            path,
            format!("bad image magic 0x{magic:08x} ({magic}), expected 0x{IMAGE_MAGIC:08x}"),
        ));
    }
    let count = be_u32(buf, 4, path)? as usize;
    let rows = be_u32(buf, 8, path)? as usize;
    let cols = be_u32(buf, 12, path)? as usize;
    if rows == 0 || cols == 0 {
        return Err(format_err(path, format!("degenerate image size {rows}x{cols}")));
    }
    let size = rows * cols;
    let need = count
        .checked_mul(size)
        .and_then(|n| n.checked_add(16))
        .ok_or_else(|| format_err(path, "header dimensions overflow"))?;
    if buf.len() < need {
        return Err(format_err(
            path,
            format!("truncated: header promises {need} bytes, file has {}", buf.len()),
        ));
    }
    buf[16..need]
        .chunks_exact(size)
        .map(|px| Raster::new(cols, rows, 1, px.to_vec()))
        .collect()
}

/// Decode an IDX label file (already decompressed).
pub fn parse_idx_labels(buf: &[u8], path: &str) -> Result<Vec<u8>> {
    let magic = be_u32(buf, 0, path)?;
    if magic != LABEL_MAGIC {
        return Err(format_err(
            path,
            format!("bad label magic 0x{magic:08x} ({magic}), expected 0x{LABEL_MAGIC:08x}"),
        ));
    }
    let count = be_u32(buf, 4, path)? as usize;
    if buf.len() < 8 + count {
        return Err(format_err(
            path,
            format!("truncated: header promises {} bytes, file has {}", 8 + count, buf.len()),
        ));
    }
    Ok(buf[8..8 + count].to_vec())
}

/// Load an IDX image/label pair (optionally gzipped) as a validation set.
///
/// `class_count` is one more than the largest label, but at least 2.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<ValidationSet> {
    let img_name = images_path.display().to_string();
    let lbl_name = labels_path.display().to_string();
    let images = parse_idx_images(&read_maybe_gz(images_path)?, &img_name)?;
    let labels = parse_idx_labels(&read_maybe_gz(labels_path)?, &lbl_name)?;
    if images.len() != labels.len() {
        return Err(Error::Dataset(format!(
            "{img_name} has {} images but {lbl_name} has {} labels",
            images.len(),
            labels.len()
        )));
    }
    let class_count = labels.iter().map(|l| usize::from(*l) + 1).max().unwrap_or(0).max(2);
    let stem = images_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| img_name.clone());
    let items = images
        .into_iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (img, l))| Item::new(img, usize::from(l), format!("{stem}#{i}")))
        .collect();
    ValidationSet::new(items, class_count)
}

/// Encode rasters as an IDX image file (grayscale, equal sizes).
pub fn encode_idx_images(images: &[Raster]) -> Result<Vec<u8>> {
    let (w, h) = images.first().map(|r| (r.width(), r.height())).unwrap_or((0, 0));
    let mut out = Vec::with_capacity(16 + images.len() * w * h);
    out.extend(IMAGE_MAGIC.to_be_bytes());
    out.extend((images.len() as u32).to_be_bytes());
    out.extend((h as u32).to_be_bytes());
    out.extend((w as u32).to_be_bytes());
    for (i, r) in images.iter().enumerate() {
        if r.channels() != 1 || (r.width(), r.height()) != (w, h) {
            return Err(Error::DimensionMismatch(format!(
                "image {i} is {}x{}x{}, expected {w}x{h}x1",
                r.width(),
                r.height(),
                r.channels()
            )));
        }
        out.extend_from_slice(r.data());
    }
    Ok(out)
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend(LABEL_MAGIC.to_be_bytes());
    out.extend((labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> (Vec<u8>, Vec<u8>) {
        let imgs: Vec<Raster> = (0..3u8)
            .map(|k| Raster::new(3, 2, 1, (0..6).map(|i| i * 10 + k).collect()).unwrap())
            .collect();
        (encode_idx_images(&imgs).unwrap(), encode_idx_labels(&[0, 2, 1]))
    }

    #[test]
    fn round_trip_bytes() {
        let (img, lbl) = tiny();
        let parsed = parse_idx_images(&img, "x").unwrap();
        assert_eq!(parsed.len(), 3);
        assert_eq!((parsed[1].width(), parsed[1].height()), (3, 2));
        assert_eq!(parsed[2].data(), &[2, 12, 22, 32, 42, 52]);
        assert_eq!(parse_idx_labels(&lbl, "y").unwrap(), vec![0, 2, 1]);
    }

    #[test]
    fn swapped_files_rejected() {
        let (img, lbl) = tiny();
        let e = parse_idx_images(&lbl, "labels").unwrap_err();
        assert!(e.to_string().contains("2049"), "{e}");
        assert!(parse_idx_labels(&img, "images").is_err());
    }

    #[test]
    fn every_magic_byte_checked() {
        let (img, lbl) = tiny();
        for i in 0..4 {
            let mut a = img.clone();
            a[i] ^= 0x40;
            assert!(parse_idx_images(&a, "x").is_err(), "image byte {i}");
            let mut b = lbl.clone();
            b[i] ^= 0x40;
            assert!(parse_idx_labels(&b, "y").is_err(), "label byte {i}");
        }
    }

    #[test]
    fn truncation_rejected() {
        let (img, lbl) = tiny();
        assert!(matches!(parse_idx_images(&img[..img.len() - 1], "x"), Err(Error::Format { .. })));
        assert!(parse_idx_images(&img[..10], "x").is_err());
        assert!(parse_idx_labels(&lbl[..9], "y").is_err());
    }
}

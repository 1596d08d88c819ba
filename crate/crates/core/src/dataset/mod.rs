//! Loading validation sets and writing perturbed ones.

mod idx;
mod manifest;
mod pnm;

pub use idx::{
    encode_idx_images, encode_idx_labels, load_idx, parse_idx_images, parse_idx_labels, read_maybe_gz,
    IMAGE_MAGIC, LABEL_MAGIC,
};
pub use manifest::{
    load_manifest, parse_manifest, render_manifest, save_perturbed, ColorMode, DatasetManifest, ManifestEntry,
    ManifestMeta, INDEX_FILE, MANIFEST_HEADER,
};
pub use pnm::{decode_pnm, encode_pnm, mask_to_raster, read_mask, read_pnm, write_pnm};

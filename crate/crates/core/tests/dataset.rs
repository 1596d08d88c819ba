use std::path::{Path, PathBuf};

use gestalt_core::dataset::{
    load_idx, load_manifest, mask_to_raster, read_maybe_gz, save_perturbed, write_pnm, INDEX_FILE,
};
use gestalt_core::engine::Item;
use gestalt_core::raster::{Mask, Raster};
use gestalt_core::Error;

fn mnist(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/mnist").join(name)
}

fn test_images() -> PathBuf {
    mnist("t10k-images-idx3-ubyte.gz")
}

fn test_labels() -> PathBuf {
    mnist("t10k-labels-idx1-ubyte.gz")
}

#[test]
fn mnist_test_archive() {
    let set = load_idx(&test_images(), &test_labels()).unwrap();
    assert_eq!(set.len(), 10_000);
    assert_eq!(set.class_count(), 10);
    assert!(set.items().iter().all(|i| i.image.width() == 28 && i.image.height() == 28 && i.image.channels() == 1));
    let first: Vec<usize> = set.items()[..10].iter().map(|i| i.label).collect();
    assert_eq!(first, [7, 2, 1, 0, 4, 1, 4, 9, 5, 9]);
    let mut hist = [0usize; 10];
    set.items().iter().for_each(|i| hist[i.label] += 1);
    assert_eq!(hist, [980, 1135, 1032, 1010, 982, 892, 958, 1028, 974, 1009]);
    assert_eq!(set.items()[17].source, "t10k-images-idx3-ubyte.gz#17");
}

#[test]
fn header_fields_match_raw_bytes() {
    let raw = read_maybe_gz(&test_images()).unwrap();
    assert_eq!(raw.len(), 16 + 10_000 * 784);
    assert_eq!(&raw[..4], &[0, 0, 8, 3]);
    let set = load_idx(&test_images(), &test_labels()).unwrap();
    assert_eq!(set.items()[9999].image.data(), &raw[16 + 9999 * 784..]);
    let lbl = read_maybe_gz(&test_labels()).unwrap();
    assert_eq!(lbl[8 + 4321] as usize, set.items()[4321].label);
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, bytes).unwrap();
    p
}

#[test]
fn corrupted_magic_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let img = read_maybe_gz(&test_images()).unwrap();
    let lbl = read_maybe_gz(&test_labels()).unwrap();
    let good_lbl = write(dir.path(), "lbl", &lbl);
    let good_img = write(dir.path(), "img", &img);
    for i in 0..4 {
        for flip in [0x01u8, 0x80, 0xff] {
            let mut bad = img.clone();
            bad[i] ^= flip;
            let p = write(dir.path(), "bad_img", &bad);
            assert!(
                matches!(load_idx(&p, &good_lbl), Err(Error::Format { .. })),
                "image byte {i} ^ {flip:#x}"
            );
            let mut bad = lbl.clone();
            bad[i] ^= flip;
            let p = write(dir.path(), "bad_lbl", &bad);
            assert!(
                matches!(load_idx(&good_img, &p), Err(Error::Format { .. })),
                "label byte {i} ^ {flip:#x}"
            );
        }
    }
}

#[test]
fn swapped_and_mismatched_files() {
    let err = load_idx(&test_labels(), &test_images()).unwrap_err().to_string();
    assert!(err.contains("2049"), "{err}");
    let dir = tempfile::tempdir().unwrap();
    let mut lbl = read_maybe_gz(&test_labels()).unwrap();
    lbl.truncate(8 + 500);
    lbl[4..8].copy_from_slice(&500u32.to_be_bytes());
    let p = write(dir.path(), "short", &lbl);
    assert!(matches!(load_idx(&test_images(), &p), Err(Error::Dataset(_))));
}

#[test]
fn truncated_archive() {
    let dir = tempfile::tempdir().unwrap();
    let img = read_maybe_gz(&test_images()).unwrap();
    let p = write(dir.path(), "cut", &img[..img.len() - 100]);
    assert!(matches!(load_idx(&p, &test_labels()), Err(Error::Format { .. })));
}

fn rgb(w: usize, h: usize, seed: u8) -> Raster {
    Raster::new(w, h, 3, (0..w * h * 3).map(|i| (i as u8).wrapping_mul(seed)).collect()).unwrap()
}

fn manifest(dir: &Path, entries: &[&str]) -> PathBuf {
    let mut text = String::from("gestalt-manifest v1\n{\"class_count\":3,\"color\":\"rgb\"}\n");
    for e in entries {
        text.push_str(e);
        text.push('\n');
    }
    write(dir, "set.manifest", text.as_bytes())
}

#[test]
fn manifest_with_masks() {
    let dir = tempfile::tempdir().unwrap();
    for k in 0..3u8 {
        write_pnm(&dir.path().join(format!("{k}.ppm")), &rgb(6, 4, k + 3)).unwrap();
    }
    let left = Mask::from_fn(6, 4, |x, _| x < 3);
    let right = Mask::from_fn(6, 4, |x, _| x >= 3);
    write_pnm(&dir.path().join("l.pgm"), &mask_to_raster(&left)).unwrap();
    write_pnm(&dir.path().join("r.pgm"), &mask_to_raster(&right)).unwrap();
    let m = manifest(
        dir.path(),
        &[
            r#"{"image":"0.ppm","label":0}"#,
            r#"{"image":"1.ppm","label":2,"masks":{"2":"l.pgm","1":"r.pgm"}}"#,
            r#"{"image":"2.ppm","label":1,"masks":{"2":"l.pgm","1":"r.pgm"},"target_class":1}"#,
        ],
    );
    let set = load_manifest(&m).unwrap();
    assert_eq!(set.len(), 3);
    assert_eq!(set.items()[0].image, rgb(6, 4, 3));
    assert!(set.items()[0].segmentation.is_none());
    let seg = set.items()[1].segmentation.as_ref().unwrap();
    assert_eq!(seg.target_class(), 2);
    assert_eq!(seg.target_mask(), &left);
    assert_eq!(set.items()[2].segmentation.as_ref().unwrap().target_mask(), &right);
}

#[test]
fn manifest_errors_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    write_pnm(&dir.path().join("big.ppm"), &rgb(224, 224, 1)).unwrap();
    write_pnm(&dir.path().join("small.pgm"), &mask_to_raster(&Mask::from_fn(100, 100, |x, _| x < 50))).unwrap();
    let m = manifest(dir.path(), &[r#"{"image":"big.ppm","label":1,"masks":{"1":"small.pgm"}}"#]);
    let err = load_manifest(&m).unwrap_err();
    assert!(matches!(err, Error::DimensionMismatch(_)), "{err}");
    assert!(err.to_string().contains("entry 0 (big.ppm)"), "{err}");

    let m = manifest(dir.path(), &[r#"{"image":"missing.ppm","label":1}"#]);
    let err = load_manifest(&m).unwrap_err().to_string();
    assert!(err.contains("missing.ppm"), "{err}");

    let m = manifest(dir.path(), &[r#"{"image":"big.ppm","label":1,"masks":{"7":"small.pgm"}}"#]);
    let err = load_manifest(&m).unwrap_err().to_string();
    assert!(err.contains("unknown class id 7"), "{err}");

    let m = manifest(dir.path(), &[]);
    assert!(matches!(load_manifest(&m), Err(Error::EmptyInput(_))));

    let m = manifest(dir.path(), &[r#"{"image":"big.ppm","label":3}"#]);
    assert!(load_manifest(&m).is_err());
}

#[test]
fn save_ten_items() {
    let set = load_idx(&test_images(), &test_labels()).unwrap();
    let items: Vec<Item> = set.items()[..10].to_vec();
    let dir = tempfile::tempdir().unwrap();
    let n = save_perturbed(dir.path(), &items, 10, None).unwrap();
    assert_eq!(n, 10);
    let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(files.len(), 11);
    let index = std::fs::read_to_string(dir.path().join(INDEX_FILE)).unwrap();
    assert!(index.contains("\"source\":\"t10k-images-idx3-ubyte.gz#3\""));

    let again = load_manifest(&dir.path().join(INDEX_FILE)).unwrap();
    for (a, b) in again.items().iter().zip(&items) {
        assert_eq!(a.image, b.image);
        assert_eq!(a.label, b.label);
        assert_eq!(a.source, b.source);
    }

    let dir2 = tempfile::tempdir().unwrap();
    save_perturbed(dir2.path(), again.items(), 10, None).unwrap();
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(
            std::fs::read(dir.path().join(&name)).unwrap(),
            std::fs::read(dir2.path().join(&name)).unwrap(),
            "{name:?}"
        );
    }
}

#[test]
fn save_empty_set() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(save_perturbed(dir.path(), &[], 10, None).unwrap(), 0);
    let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(files.len(), 1);
    assert!(matches!(load_manifest(&dir.path().join(INDEX_FILE)), Err(Error::EmptyInput(_))));
}

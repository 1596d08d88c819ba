//! Binary portable graymap (P5) and pixmap (P6), 8-bit only.

use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{Mask, Raster};

pub fn encode_pnm(img: &Raster) -> Vec<u8> {
    let magic = if img.is_rgb() { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

pub fn decode_pnm(buf: &[u8], path: &str) -> Result<Raster> {
    let err = |m: String| Error::Format {
        path: path.to_string(),
        message: m,
    };
    let mut pos = 0usize;
    let mut token = || -> Result<String> {
        loop {
            match buf.get(pos) {
                Some(b'#') => {
                    while buf.get(pos).is_some_and(|c| *c != b'\n') {
                        pos += 1;
                    }
                }
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(err("truncated header".into())),
            }
        }
        let start = pos;
        while buf.get(pos).is_some_and(|c| !c.is_ascii_whitespace()) {
            pos += 1;
        }
        Ok(String::from_utf8_lossy(&buf[start..pos]).into_owned())
    };
    let channels = match token()?.as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(err(format!("unsupported magic `{other}`, expected P5 or P6"))),
    };
    let mut num = |what: &str| -> Result<usize> {
        let t = token()?;
        t.parse().map_err(|_| err(format!("bad {what} `{t}`")))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval != 255 {
        return Err(err(format!("maxval {maxval} unsupported, only 255")));
    }
    // exactly one whitespace byte separates the header from the samples
    let start = pos + 1;
    let need = width * height * channels;
    let data = buf
        .get(start..start + need)
        .ok_or_else(|| err(format!("truncated: need {need} sample bytes")))?;
    Raster::new(width, height, channels, data.to_vec())
}

pub fn read_pnm(path: &Path) -> Result<Raster> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pnm(&buf, &path.display().to_string())
}

pub fn write_pnm(path: &Path, img: &Raster) -> Result<()> {
    std::fs::write(path, encode_pnm(img)).map_err(|e| Error::io(path, e))
}

/// A mask stored as a graymap: any nonzero luma is set.
pub fn read_mask(path: &Path) -> Result<Mask> {
    let img = read_pnm(path)?;
    Ok(Mask::from_fn(img.width(), img.height(), |x, y| img.intensity(x, y) > 0))
}

pub fn mask_to_raster(mask: &Mask) -> Raster {
    let data = mask.bits().iter().map(|b| if *b { 255 } else { 0 }).collect();
    Raster::new(mask.width(), mask.height(), 1, data).expect("mask dimensions are valid")
}

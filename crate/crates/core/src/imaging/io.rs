//! Grayscale image files.
//!
//! * PGM: binary `P5`, 8-bit. Values in `[0, scale]` map linearly to
//!   `0..=255` on export and are clamped there; import maps back.
//! * Raw: a 16-byte header (`IPLARAW1` magic, side as little-endian `u64`)
//!   followed by `side * side` little-endian `f64` values in row-major order.
//!   Raw files hold unclamped model values.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::ImagingError;

pub const RAW_MAGIC: &[u8; 8] = b"IPLARAW1";

/// A square image read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub side: usize,
    pub pixels: Vec<f64>,
}

pub fn encode_pgm(pixels: &[f64], side: usize, scale: f64) -> Result<Vec<u8>, ImagingError> {
    if pixels.len() != side * side {
        return Err(ImagingError::SizeMismatch {
            expected: side * side,
            got: pixels.len(),
        });
    }
    let mut out = format!("P5\n{side} {side}\n255\n").into_bytes();
    out.extend(pixels.iter().map(|&v| {
        let t = if v.is_nan() { 0.0 } else { (v / scale).clamp(0.0, 1.0) };
        (t * 255.0).round() as u8
    }));
    Ok(out)
}

pub fn write_pgm(path: &Path, pixels: &[f64], side: usize, scale: f64) -> Result<(), ImagingError> {
    let bytes = encode_pgm(pixels, side, scale)?;
    fs::write(path, bytes).map_err(|e| ImagingError::io(path, e))
}

/// Parses a binary PGM with `maxval <= 255`; values are returned on `[0, scale]`.
pub fn decode_pgm(bytes: &[u8], scale: f64) -> Result<Image, ImagingError> {
    let bad = |msg: &str| ImagingError::Format(format!("PGM: {msg}"));
    let mut pos = 0usize;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ASCII header"))?);
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    if fields[0] != "P5" {
        return Err(bad("only binary P5 files are supported"));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("malformed number in header"));
    let (width, height, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
    if width != height {
        return Err(bad("image must be square"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(bad("maxval must be in 1..=255"));
    }
    let n = width * height;
    let raster = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated raster"))?;
    Ok(Image {
        side: width,
        pixels: raster.iter().map(|&b| b as f64 / maxval as f64 * scale).collect(),
    })
}

pub fn read_pgm(path: &Path, scale: f64) -> Result<Image, ImagingError> {
    let bytes = fs::read(path).map_err(|e| ImagingError::io(path, e))?;
    decode_pgm(&bytes, scale)
}

pub fn encode_raw(pixels: &[f64], side: usize) -> Result<Vec<u8>, ImagingError> {
    if pixels.len() != side * side {
        return Err(ImagingError::SizeMismatch {
            expected: side * side,
            got: pixels.len(),
        });
    }
    let mut out = Vec::with_capacity(16 + 8 * pixels.len());
    out.write_all(RAW_MAGIC).expect("writing to a Vec cannot fail");
    out.extend_from_slice(&(side as u64).to_le_bytes());
    for v in pixels {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_raw(bytes: &[u8]) -> Result<Image, ImagingError> {
    let bad = |msg: &str| ImagingError::Format(format!("raw image: {msg}"));
    if bytes.len() < 16 || &bytes[..8] != RAW_MAGIC {
        return Err(bad("missing magic header"));
    }
    let side = u64::from_le_bytes(bytes[8..16].try_into().expect("8-byte slice")) as usize;
    let n = side.checked_mul(side).ok_or_else(|| bad("side too large"))?;
    let body = &bytes[16..];
    if body.len() != 8 * n {
        return Err(bad("payload length does not match side"));
    }
    let pixels = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(Image { side, pixels })
}

pub fn write_raw(path: &Path, pixels: &[f64], side: usize) -> Result<(), ImagingError> {
    let bytes = encode_raw(pixels, side)?;
    fs::write(path, bytes).map_err(|e| ImagingError::io(path, e))
}

pub fn read_raw(path: &Path) -> Result<Image, ImagingError> {
    let bytes = fs::read(path).map_err(|e| ImagingError::io(path, e))?;
    decode_raw(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pgm_header_and_clamping() {
        let bytes = encode_pgm(&[-3.0, 0.0, 127.5, 300.0], 2, 255.0).unwrap();
        assert_eq!(&bytes[..11], b"P5\n2 2\n255\n");
        assert_eq!(&bytes[11..], &[0, 0, 128, 255]);
    }

    #[test]
    fn pgm_with_comments_and_small_maxval() {
        let mut bytes = b"P5 # a comment\n2 # width\n2\n15\n".to_vec();
        bytes.extend([0u8, 15, 5, 10]);
        let img = decode_pgm(&bytes, 1.0).unwrap();
        assert_eq!(img.side, 2);
        assert_eq!(img.pixels, vec![0.0, 1.0, 1.0 / 3.0, 2.0 / 3.0]);
    }

    #[test]
    fn pgm_rejects_ascii_and_truncation() {
        assert!(decode_pgm(b"P2\n1 1\n255\n0", 1.0).is_err());
        assert!(decode_pgm(b"P5\n2 2\n255\n\x00", 1.0).is_err());
        assert!(decode_pgm(b"P5\n2 3\n255\n\x00\x00\x00\x00\x00\x00", 1.0).is_err());
    }

    #[test]
    fn raw_layout() {
        let bytes = encode_raw(&[1.5], 1).unwrap();
        assert_eq!(&bytes[..8], b"IPLARAW1");
        assert_eq!(&bytes[8..16], &[1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&bytes[16..], &1.5f64.to_le_bytes());
        assert!(decode_raw(&bytes[..20]).is_err());
    }

    #[test]
    fn file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let px: Vec<f64> = (0..9).map(|i| i as f64 * 0.1 - 0.2).collect();
        let raw = dir.path().join("x.raw");
        write_raw(&raw, &px, 3).unwrap();
        assert_eq!(
            read_raw(&raw).unwrap(),
            Image {
                side: 3,
                pixels: px.clone()
            }
        );
        let pgm = dir.path().join("x.pgm");
        write_pgm(&pgm, &px, 3, 1.0).unwrap();
        let back = read_pgm(&pgm, 1.0).unwrap();
        for (a, b) in back.pixels.iter().zip(&px) {
            assert!((a - b.clamp(0.0, 1.0)).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn raw_round_trip_is_exact(px in prop::collection::vec(any::<f64>(), 16)) {
            let back = decode_raw(&encode_raw(&px, 4).unwrap()).unwrap();
            prop_assert_eq!(back.side, 4);
            for (a, b) in back.pixels.iter().zip(&px) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn pgm_round_trip_within_quantization(px in prop::collection::vec(0.0f64..=1.0, 25)) {
            let back = decode_pgm(&encode_pgm(&px, 5, 1.0).unwrap(), 1.0).unwrap();
            for (a, b) in back.pixels.iter().zip(&px) {
                prop_assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
            }
        }
    }
}

//! Binary (P5) PGM label masks with 8-bit samples.

use std::fs;
use std::path::Path;

use super::{SemanticMask, DEFAULT_IGNORE};
use crate::error::{Error, Result};

/// Reads a P5 mask; raster value 255 becomes `ignore_value`.
pub fn read_pgm(path: impl AsRef<Path>, ignore_value: u32) -> Result<SemanticMask> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes, ignore_value)
}

pub fn decode_pgm(bytes: &[u8], ignore_value: u32) -> Result<SemanticMask> {
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos)?;
    if magic != b"P5" {
        return Err(Error::BadHeader("PGM magic is not P5".into()));
    }
    let width = parse_num(next_token(bytes, &mut pos)?)?;
    let height = parse_num(next_token(bytes, &mut pos)?)?;
    let maxval = parse_num(next_token(bytes, &mut pos)?)?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::BadHeader(format!("maxval {maxval} (must be 1..=255)")));
    }
    if width == 0 || height == 0 {
        return Err(Error::BadHeader(format!("empty raster {width}x{height}")));
    }
    // exactly one whitespace byte separates maxval from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::BadHeader("missing separator after maxval".into()));
    }
    pos += 1;
    let raster = &bytes[pos..];
    let needed = width * height;
    if raster.len() < needed {
        return Err(Error::TruncatedPayload {
            expected: needed,
            available: raster.len(),
        });
    }
    let labels = raster[..needed]
        .iter()
        .map(|&b| {
            if b == 255 {
                ignore_value
            } else {
                b as u32
            }
        })
        .collect();
    SemanticMask::with_ignore(height, width, labels, ignore_value)
}

/// Writes labels as a P5 raster; the ignore label is written as 255.
pub fn write_pgm(mask: &SemanticMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_pgm(mask)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn encode_pgm(mask: &SemanticMask) -> Result<Vec<u8>> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    for (i, &l) in mask.labels().iter().enumerate() {
        if mask.is_ignored(i) {
            out.push(DEFAULT_IGNORE as u8);
        } else if l < 255 {
            out.push(l as u8);
        } else {
            return Err(Error::InvalidValue(format!(
                "label {l} does not fit an 8-bit PGM"
            )));
        }
    }
    Ok(out)
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::BadHeader("unexpected end of PGM header".into()));
    }
    Ok(&bytes[start..*pos])
}

fn parse_num(tok: &[u8]) -> Result<usize> {
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::BadHeader(format!("bad number {:?}", String::from_utf8_lossy(tok))))
}

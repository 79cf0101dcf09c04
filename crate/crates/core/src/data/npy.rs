//! NPY v1.0 reader/writer.
//!
//! Layout: `\x93NUMPY`, version bytes `1 0`, a little-endian u16 header
//! length, then an ASCII python-dict header padded with spaces and a final
//! newline so that the whole preamble is a multiple of 64 bytes. The payload
//! is raw C-order values. Only `<f4`, `<f8`, `|u1` and `<i8` are handled.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const PREAMBLE: usize = 10;
const ALIGN: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum NpyData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U8(Vec<u8>),
    I64(Vec<i64>),
}

impl NpyData {
    pub fn len(&self) -> usize {
        match self {
            NpyData::F32(v) => v.len(),
            NpyData::F64(v) => v.len(),
            NpyData::U8(v) => v.len(),
            NpyData::I64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn descr(&self) -> &'static str {
        match self {
            NpyData::F32(_) => "<f4",
            NpyData::F64(_) => "<f8",
            NpyData::U8(_) => "|u1",
            NpyData::I64(_) => "<i8",
        }
    }

    fn item_size(&self) -> usize {
        match self {
            NpyData::F32(_) => 4,
            NpyData::F64(_) | NpyData::I64(_) => 8,
            NpyData::U8(_) => 1,
        }
    }
}

/// A decoded array: shape plus flat C-order payload.
#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: NpyData,
}

impl NpyArray {
    pub fn new(shape: Vec<usize>, data: NpyData) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Float payload as f32 (f64 narrowed); integer payloads are rejected.
    pub fn to_f32(&self) -> Result<Vec<f32>> {
        match &self.data {
            NpyData::F32(v) => Ok(v.clone()),
            NpyData::F64(v) => Ok(v.iter().map(|&x| x as f32).collect()),
            _ => Err(Error::BadShape {
                shape: self.shape.clone(),
                expected: "floating-point array",
            }),
        }
    }

    pub fn to_f64(&self) -> Result<Vec<f64>> {
        match &self.data {
            NpyData::F32(v) => Ok(v.iter().map(|&x| x as f64).collect()),
            NpyData::F64(v) => Ok(v.clone()),
            _ => Err(Error::BadShape {
                shape: self.shape.clone(),
                expected: "floating-point array",
            }),
        }
    }

    /// Encodes header and payload.
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = format_header(self.data.descr(), &self.shape);
        let mut out = Vec::with_capacity(header.len() + self.len() * self.data.item_size());
        out.extend_from_slice(&header);
        match &self.data {
            NpyData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            NpyData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            NpyData::U8(v) => out.extend_from_slice(v),
            NpyData::I64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], opts: ReadOptions) -> Result<Self> {
        if bytes.len() < PREAMBLE || &bytes[..6] != MAGIC {
            return Err(Error::BadMagic);
        }
        if bytes[6] != 1 || bytes[7] != 0 {
            return Err(Error::BadHeader(format!(
                "version {}.{} (only 1.0 supported)",
                bytes[6], bytes[7]
            )));
        }
        let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
        let start = PREAMBLE + header_len;
        if bytes.len() < start {
            return Err(Error::TruncatedPayload {
                expected: start,
                available: bytes.len(),
            });
        }
        let header = std::str::from_utf8(&bytes[PREAMBLE..start])
            .map_err(|_| Error::BadHeader("header is not ASCII".into()))?;
        let Header {
            descr,
            fortran_order,
            shape,
        } = parse_header(header)?;
        if fortran_order {
            return Err(Error::UnsupportedOrder);
        }
        let count: usize = shape.iter().product();
        let item = match descr.as_str() {
            "<f4" => 4,
            "<f8" | "<i8" => 8,
            "|u1" | "<u1" => 1,
            other => return Err(Error::UnsupportedDtype(other.to_string())),
        };
        let payload = &bytes[start..];
        if payload.len() != count * item {
            return Err(Error::TruncatedPayload {
                expected: count * item,
                available: payload.len(),
            });
        }
        let data = match descr.as_str() {
            "<f4" => NpyData::F32(
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            "<f8" => NpyData::F64(
                payload
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            "<i8" => NpyData::I64(
                payload
                    .chunks_exact(8)
                    .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            _ => NpyData::U8(payload.to_vec()),
        };
        if !opts.allow_non_finite {
            let bad = match &data {
                NpyData::F32(v) => v.iter().position(|x| !x.is_finite()),
                NpyData::F64(v) => v.iter().position(|x| !x.is_finite()),
                _ => None,
            };
            if let Some(i) = bad {
                return Err(Error::NonFiniteValue(i));
            }
        }
        Ok(Self { shape, data })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ReadOptions {
    /// Accept NaN/Inf in float payloads instead of failing.
    pub allow_non_finite: bool,
}

pub fn read_npy(path: impl AsRef<Path>) -> Result<NpyArray> {
    read_npy_with(path, ReadOptions::default())
}

pub fn read_npy_with(path: impl AsRef<Path>, opts: ReadOptions) -> Result<NpyArray> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    NpyArray::from_bytes(&bytes, opts)
}

pub fn write_npy(array: &NpyArray, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if array.is_empty() {
        return Err(Error::InvalidValue("refusing to write an empty array".into()));
    }
    fs::write(path, array.to_bytes()).map_err(|e| Error::io(path, e))
}

fn format_header(descr: &str, shape: &[usize]) -> Vec<u8> {
    let shape_str = match shape {
        [] => "()".to_string(),
        [n] => format!("({n},)"),
        _ => format!(
            "({})",
            shape
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    };
    let dict = format!("{{'descr': '{descr}', 'fortran_order': False, 'shape': {shape_str}, }}");
    // +1 for the trailing newline
    let unpadded = PREAMBLE + dict.len() + 1;
    let total = unpadded.div_ceil(ALIGN) * ALIGN;
    let header_len = total - PREAMBLE;

    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header_len as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out.resize(total - 1, b' ');
    out.push(b'\n');
    out
}

struct Header {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

fn parse_header(text: &str) -> Result<Header> {
    let body = text.trim();
    let body = body
        .strip_prefix('{')
        .and_then(|b| b.strip_suffix('}'))
        .ok_or_else(|| Error::BadHeader(format!("not a dict: {body:?}")))?;

    let mut descr = None;
    let mut fortran_order = None;
    let mut shape = None;
    let mut rest = body.trim_start();
    while !rest.is_empty() {
        let (key, after) = parse_quoted(rest)?;
        let after = after
            .trim_start()
            .strip_prefix(':')
            .ok_or_else(|| Error::BadHeader(format!("missing ':' after '{key}'")))?
            .trim_start();
        let after = match key.as_str() {
            "descr" => {
                let (v, a) = parse_quoted(after)?;
                descr = Some(v);
                a
            }
            "fortran_order" => {
                if let Some(a) = after.strip_prefix("False") {
                    fortran_order = Some(false);
                    a
                } else if let Some(a) = after.strip_prefix("True") {
                    fortran_order = Some(true);
                    a
                } else {
                    return Err(Error::BadHeader("fortran_order is not a bool".into()));
                }
            }
            "shape" => {
                let inner = after
                    .strip_prefix('(')
                    .ok_or_else(|| Error::BadHeader("shape is not a tuple".into()))?;
                let close = inner
                    .find(')')
                    .ok_or_else(|| Error::BadHeader("unterminated shape tuple".into()))?;
                let dims = inner[..close]
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.trim_end_matches('L')
                            .parse::<usize>()
                            .map_err(|_| Error::BadHeader(format!("bad dimension {s:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                shape = Some(dims);
                &inner[close + 1..]
            }
            other => return Err(Error::BadHeader(format!("unexpected key '{other}'"))),
        };
        let after = after.trim_start();
        rest = after.strip_prefix(',').unwrap_or(after).trim_start();
    }
    match (descr, fortran_order, shape) {
        (Some(descr), Some(fortran_order), Some(shape)) => Ok(Header {
            descr,
            fortran_order,
            shape,
        }),
        _ => Err(Error::BadHeader("missing descr, fortran_order or shape".into())),
    }
}

fn parse_quoted(s: &str) -> Result<(String, &str)> {
    let quote = s
        .chars()
        .next()
        .filter(|c| *c == '\'' || *c == '"')
        .ok_or_else(|| Error::BadHeader(format!("expected quoted string at {s:?}")))?;
    let body = &s[1..];
    let end = body
        .find(quote)
        .ok_or_else(|| Error::BadHeader("unterminated string".into()))?;
    Ok((body[..end].to_string(), &body[end + 1..]))
}

//! NPY v1.0 reader and writer for the two element types the tool exchanges:
//! `|u1` (masks) and `<f4` (images, grey fields, mixed inputs).
//!
//! Files are always C-ordered. The header is padded with spaces and a
//! trailing newline so the payload starts on a 64-byte boundary.

use std::fmt;

use ndarray::{ArrayD, IxDyn};
use thiserror::Error;

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NpyError {
    #[error("not an NPY file (bad magic)")]
    BadMagic,
    #[error("unsupported NPY version {0}.{1}")]
    Version(u8, u8),
    #[error("truncated NPY file")]
    Truncated,
    #[error("malformed NPY header: {0}")]
    Header(String),
    #[error("unsupported dtype '{0}' (expected '|u1' or '<f4')")]
    DType(String),
    #[error("fortran-ordered arrays are not supported")]
    FortranOrder,
    #[error("payload holds {actual} bytes but shape {shape:?} needs {expected}")]
    PayloadSize {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    U8,
    F32,
}

impl DType {
    pub fn descr(self) -> &'static str {
        match self {
            DType::U8 => "|u1",
            DType::F32 => "<f4",
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::U8 => 1,
            DType::F32 => 4,
        }
    }
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DType::U8 => "uint8",
            DType::F32 => "float32",
        })
    }
}

/// A dense row-major tensor as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    U8(ArrayD<u8>),
    F32(ArrayD<f32>),
}

impl Tensor {
    pub fn dtype(&self) -> DType {
        match self {
            Tensor::U8(_) => DType::U8,
            Tensor::F32(_) => DType::F32,
        }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            Tensor::U8(a) => a.shape(),
            Tensor::F32(a) => a.shape(),
        }
    }
}

fn header_text(dtype: DType, shape: &[usize]) -> String {
    let dims = match shape {
        [n] => format!("({n},)"),
        _ => format!(
            "({})",
            shape
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(", ")
        ),
    };
    let mut header = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {dims}, }}",
        dtype.descr()
    );
    // magic (6) + version (2) + length (2) + header + '\n'
    let unpadded = MAGIC.len() + 4 + header.len() + 1;
    let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
    header.extend(std::iter::repeat_n(' ', pad));
    header.push('\n');
    header
}

/// Serialises a tensor to NPY v1.0 bytes.
pub fn encode(tensor: &Tensor) -> Vec<u8> {
    let header = header_text(tensor.dtype(), tensor.shape());
    let count: usize = tensor.shape().iter().product();
    let mut out = Vec::with_capacity(10 + header.len() + count * tensor.dtype().size());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    match tensor {
        Tensor::U8(a) => out.extend(a.iter().copied()),
        Tensor::F32(a) => a.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
    }
    out
}

fn dict_value<'a>(header: &'a str, key: &str) -> Result<&'a str, NpyError> {
    let needle = format!("'{key}':");
    let start = header
        .find(&needle)
        .ok_or_else(|| NpyError::Header(format!("missing key '{key}'")))?
        + needle.len();
    let rest = header[start..].trim_start();
    let end = if rest.starts_with('(') {
        rest.find(')').map(|i| i + 1)
    } else if let Some(quote @ ('\'' | '"')) = rest.chars().next() {
        rest[1..].find(quote).map(|i| i + 2)
    } else {
        rest.find([',', '}'])
    }
    .ok_or_else(|| NpyError::Header(format!("unterminated value for '{key}'")))?;
    Ok(rest[..end].trim())
}

fn parse_shape(text: &str) -> Result<Vec<usize>, NpyError> {
    let inner = text
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| NpyError::Header(format!("shape is not a tuple: {text}")))?;
    inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.trim_end_matches('L')
                .parse()
                .map_err(|_| NpyError::Header(format!("bad shape entry '{s}'")))
        })
        .collect()
}

/// Parses NPY v1.0 / v2.0 bytes holding a `|u1` or `<f4` array.
pub fn decode(bytes: &[u8]) -> Result<Tensor, NpyError> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(NpyError::BadMagic);
    }
    let (header_len, header_start) = match (bytes[6], bytes[7]) {
        (1, 0) => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        (2, 0) | (3, 0) => {
            if bytes.len() < 12 {
                return Err(NpyError::Truncated);
            }
            (
                u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize,
                12,
            )
        }
        (major, minor) => return Err(NpyError::Version(major, minor)),
    };
    let payload_start = header_start + header_len;
    let header = bytes
        .get(header_start..payload_start)
        .ok_or(NpyError::Truncated)?;
    let header = std::str::from_utf8(header)
        .map_err(|_| NpyError::Header("header is not UTF-8".into()))?;

    let descr = dict_value(header, "descr")?.trim_matches(['\'', '"']);
    let dtype = match descr {
        "|u1" | "u1" | "<u1" | "|b1" => DType::U8,
        "<f4" | "f4" => DType::F32,
        other => return Err(NpyError::DType(other.to_string())),
    };
    match dict_value(header, "fortran_order")? {
        "False" => {}
        "True" => return Err(NpyError::FortranOrder),
        other => return Err(NpyError::Header(format!("bad fortran_order '{other}'"))),
    }
    let shape = parse_shape(dict_value(header, "shape")?)?;

    let count: usize = shape.iter().product();
    let payload = &bytes[payload_start..];
    let expected = count * dtype.size();
    if payload.len() != expected {
        return Err(NpyError::PayloadSize {
            shape,
            expected,
            actual: payload.len(),
        });
    }
    let dim = IxDyn(&shape);
    let tensor = match dtype {
        DType::U8 => Tensor::U8(ArrayD::from_shape_vec(dim, payload.to_vec()).expect("sized above")),
        DType::F32 => Tensor::F32(
            ArrayD::from_shape_vec(
                dim,
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
            )
            .expect("sized above"),
        ),
    };
    Ok(tensor)
}

//! Self-describing binary arrays: an 8-byte magic, a little-endian `u64`
//! header length, a JSON header and a raw little-endian row-major payload.

use std::fs;
use std::path::Path;

use num_complex::Complex32;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ComplexArray, C64};

pub const ARRAY_MAGIC: &[u8; 8] = b"STINRARR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
    C64,
    C128,
    Bool,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::Bool => 1,
            Dtype::F32 => 4,
            Dtype::F64 | Dtype::C64 => 8,
            Dtype::C128 => 16,
        }
    }
}

/// Storage precision for complex outputs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayHeader {
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    pub byte_order: String,
    pub layout: String,
    pub tag: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ArrayData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    C64(Vec<Complex32>),
    C128(Vec<C64>),
    Bool(Vec<bool>),
}

impl ArrayData {
    pub fn dtype(&self) -> Dtype {
        match self {
            ArrayData::F32(_) => Dtype::F32,
            ArrayData::F64(_) => Dtype::F64,
            ArrayData::C64(_) => Dtype::C64,
            ArrayData::C128(_) => Dtype::C128,
            ArrayData::Bool(_) => Dtype::Bool,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ArrayData::F32(v) => v.len(),
            ArrayData::F64(v) => v.len(),
            ArrayData::C64(v) => v.len(),
            ArrayData::C128(v) => v.len(),
            ArrayData::Bool(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// An array plus its semantic tag.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrayContainer {
    pub shape: Vec<usize>,
    pub tag: String,
    pub data: ArrayData,
}

impl ArrayContainer {
    pub fn new(shape: Vec<usize>, tag: impl Into<String>, data: ArrayData) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::shape("ArrayContainer", &shape, &[data.len()]));
        }
        Ok(Self {
            shape,
            tag: tag.into(),
            data,
        })
    }

    /// Complex array stored at the requested precision.
    pub fn complex(arr: &ComplexArray, tag: &str, precision: Precision) -> Self {
        let data = match precision {
            Precision::F64 => ArrayData::C128(arr.data().to_vec()),
            Precision::F32 => ArrayData::C64(
                arr.data()
                    .iter()
                    .map(|z| Complex32::new(z.re as f32, z.im as f32))
                    .collect(),
            ),
        };
        Self {
            shape: arr.shape().to_vec(),
            tag: tag.to_string(),
            data,
        }
    }

    pub fn header(&self) -> ArrayHeader {
        ArrayHeader {
            dtype: self.data.dtype(),
            shape: self.shape.clone(),
            byte_order: "little".into(),
            layout: "row-major".into(),
            tag: self.tag.clone(),
        }
    }

    /// Widens any complex or real dtype to a double-precision complex array.
    pub fn to_complex(&self) -> Result<ComplexArray> {
        let data: Vec<C64> = match &self.data {
            ArrayData::C128(v) => v.clone(),
            ArrayData::C64(v) => v.iter().map(|z| C64::new(z.re as f64, z.im as f64)).collect(),
            ArrayData::F64(v) => v.iter().map(|&x| C64::new(x, 0.0)).collect(),
            ArrayData::F32(v) => v.iter().map(|&x| C64::new(x as f64, 0.0)).collect(),
            ArrayData::Bool(_) => {
                return Err(Error::invalid(format!("array '{}' is boolean, not numeric", self.tag)))
            }
        };
        ComplexArray::new(self.shape.clone(), data)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header()).expect("header serializes");
        let mut out = Vec::with_capacity(16 + header.len() + self.data.len() * self.data.dtype().size());
        out.extend_from_slice(ARRAY_MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        match &self.data {
            ArrayData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            ArrayData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            ArrayData::C64(v) => v.iter().for_each(|z| {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }),
            ArrayData::C128(v) => v.iter().for_each(|z| {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }),
            ArrayData::Bool(v) => out.extend(v.iter().map(|&b| b as u8)),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |msg: String| Error::format(path, msg);
        if bytes.len() < 16 || &bytes[..8] != ARRAY_MAGIC {
            return Err(bad("missing array magic".into()));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = bytes
            .get(16..16 + hlen)
            .ok_or_else(|| bad("truncated header".into()))?;
        let header: ArrayHeader =
            serde_json::from_slice(body).map_err(|e| bad(format!("bad header: {e}")))?;
        if header.byte_order != "little" || header.layout != "row-major" {
            return Err(bad(format!(
                "unsupported byte order/layout {}/{}",
                header.byte_order, header.layout
            )));
        }
        let count: usize = header.shape.iter().product();
        let payload = &bytes[16 + hlen..];
        if payload.len() != count * header.dtype.size() {
            return Err(bad(format!(
                "payload is {} bytes, expected {}",
                payload.len(),
                count * header.dtype.size()
            )));
        }
        let f32s = || payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()));
        let f64s = || payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let data = match header.dtype {
            Dtype::F32 => ArrayData::F32(f32s().collect()),
            Dtype::F64 => ArrayData::F64(f64s().collect()),
            Dtype::C64 => {
                let v: Vec<f32> = f32s().collect();
                ArrayData::C64(v.chunks_exact(2).map(|p| Complex32::new(p[0], p[1])).collect())
            }
            Dtype::C128 => {
                let v: Vec<f64> = f64s().collect();
                ArrayData::C128(v.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect())
            }
            Dtype::Bool => ArrayData::Bool(
                payload
                    .iter()
                    .map(|&b| match b {
                        0 => Ok(false),
                        1 => Ok(true),
                        _ => Err(bad(format!("invalid bool byte {b}"))),
                    })
                    .collect::<Result<_>>()?,
            ),
        };
        Ok(Self {
            shape: header.shape,
            tag: header.tag,
            data,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::from_bytes(&bytes, path)
    }
}

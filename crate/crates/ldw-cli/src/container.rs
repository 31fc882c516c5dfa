//! Binary container for named tensors.
//!
//! Layout: magic `LDWT`, version byte (1), dtype byte (0 = f32, 1 = f64),
//! u32-LE tensor count, then per tensor a 1-byte name length, the name
//! bytes, C/H/W as u32-LE, and the raw little-endian values channel-major
//! row-major. Declared sizes must account for the whole file.

use anyhow::{bail, Context, Result};
use std::path::Path;

use ldw_core::FeatureMap;

pub const MAGIC: [u8; 4] = *b"LDWT";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dtype {
    F32,
    #[default]
    F64,
}

impl Dtype {
    fn code(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Dtype::F32),
            1 => Ok(Dtype::F64),
            other => bail!("unknown dtype code {other}"),
        }
    }

    fn value_size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub map: FeatureMap,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, map: FeatureMap) -> Self {
        Self {
            name: name.into(),
            map,
        }
    }
}

pub fn encode(tensors: &[NamedTensor], dtype: Dtype) -> Result<Vec<u8>> {
    if tensors.len() > u32::MAX as usize {
        bail!("too many tensors");
    }
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(dtype.code());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for tensor in tensors {
        let name = tensor.name.as_bytes();
        if name.is_empty() || name.len() > u8::MAX as usize {
            bail!("tensor name must be 1..=255 bytes, got {}", name.len());
        }
        out.push(name.len() as u8);
        out.extend_from_slice(name);
        let (c, h, w) = tensor.map.shape();
        for dim in [c, h, w] {
            let dim = u32::try_from(dim).context("dimension exceeds u32")?;
            out.extend_from_slice(&dim.to_le_bytes());
        }
        match dtype {
            Dtype::F32 => {
                for v in tensor.map.data() {
                    out.extend_from_slice(&(*v as f32).to_le_bytes());
                }
            }
            Dtype::F64 => {
                for v in tensor.map.data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Vec<NamedTensor>> {
    let mut cursor = Cursor { bytes, pos: 0 };
    let magic = cursor.take(4)?;
    if magic != MAGIC {
        bail!("bad magic {magic:?}, expected {MAGIC:?}");
    }
    let version = cursor.take(1)?[0];
    if version != VERSION {
        bail!("unsupported container version {version}");
    }
    let dtype = Dtype::from_code(cursor.take(1)?[0])?;
    let count = u32::from_le_bytes(cursor.take(4)?.try_into().unwrap()) as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = cursor.take(1)?[0] as usize;
        let name = std::str::from_utf8(cursor.take(name_len)?)
            .context("tensor name is not utf-8")?
            .to_string();
        let mut dims = [0usize; 3];
        for dim in &mut dims {
            *dim = u32::from_le_bytes(cursor.take(4)?.try_into().unwrap()) as usize;
        }
        let [c, h, w] = dims;
        let value_count = c
            .checked_mul(h)
            .and_then(|v| v.checked_mul(w))
            .context("tensor dimensions overflow")?;
        let raw = cursor.take(value_count * dtype.value_size())?;
        let data: Vec<f64> = match dtype {
            Dtype::F32 => raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
                .collect(),
            Dtype::F64 => raw
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect(),
        };
        let map = FeatureMap::new(c, h, w, data)
            .with_context(|| format!("tensor {name:?} is invalid"))?;
        tensors.push(NamedTensor { name, map });
    }
    if cursor.pos != bytes.len() {
        bail!(
            "{} trailing bytes after {count} declared tensors",
            bytes.len() - cursor.pos
        );
    }
    Ok(tensors)
}

pub fn write_file(path: &Path, tensors: &[NamedTensor], dtype: Dtype) -> Result<()> {
    let bytes = encode(tensors, dtype)?;
    std::fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_file(path: &Path) -> Result<Vec<NamedTensor>> {
    let bytes =
        std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    decode(&bytes).with_context(|| format!("malformed container {}", path.display()))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.pos + len > self.bytes.len() {
            bail!(
                "container truncated: need {len} bytes at offset {}, have {}",
                self.pos,
                self.bytes.len() - self.pos
            );
        }
        let slice = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(slice)
    }
}

//! Binary container: `b"TMCV"`, `u32` version, `u64` header length, a JSON
//! header, then the arrays it lists as little-endian payloads in order.
//!
//! The header carries a SHA-256 of the canonical JSON `meta` object so that
//! cached artifacts built under a different configuration are rejected.

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"TMCV";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum ArrayData {
    F64(Vec<f64>),
    F32(Vec<f32>),
    U32(Vec<u32>),
    U64(Vec<u64>),
    /// Interleaved `(re, im)` pairs on disk.
    C64(Vec<Complex64>),
}

impl ArrayData {
    fn dtype(&self) -> &'static str {
        match self {
            ArrayData::F64(_) => "f64",
            ArrayData::F32(_) => "f32",
            ArrayData::U32(_) => "u32",
            ArrayData::U64(_) => "u64",
            ArrayData::C64(_) => "c64",
        }
    }

    fn len(&self) -> usize {
        match self {
            ArrayData::F64(v) => v.len(),
            ArrayData::F32(v) => v.len(),
            ArrayData::U32(v) => v.len(),
            ArrayData::U64(v) => v.len(),
            ArrayData::C64(v) => v.len(),
        }
    }

    fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        match self {
            ArrayData::F64(v) => v.iter().try_for_each(|x| w.write_all(&x.to_le_bytes())),
            ArrayData::F32(v) => v.iter().try_for_each(|x| w.write_all(&x.to_le_bytes())),
            ArrayData::U32(v) => v.iter().try_for_each(|x| w.write_all(&x.to_le_bytes())),
            ArrayData::U64(v) => v.iter().try_for_each(|x| w.write_all(&x.to_le_bytes())),
            ArrayData::C64(v) => v.iter().try_for_each(|z| {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())
            }),
        }
    }

    fn read_from(dtype: &str, len: usize, r: &mut impl Read) -> Result<Self> {
        fn bytes(r: &mut impl Read, n: usize) -> Result<Vec<u8>> {
            let mut buf = vec![0u8; n];
            r.read_exact(&mut buf).map_err(|e| Error::Format(format!("truncated payload: {e}")))?;
            Ok(buf)
        }
        Ok(match dtype {
            "f64" => ArrayData::F64(bytes(r, 8 * len)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()),
            "f32" => ArrayData::F32(bytes(r, 4 * len)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()),
            "u32" => ArrayData::U32(bytes(r, 4 * len)?.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect()),
            "u64" => ArrayData::U64(bytes(r, 8 * len)?.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect()),
            "c64" => ArrayData::C64(
                bytes(r, 16 * len)?
                    .chunks_exact(16)
                    .map(|c| Complex64::new(f64::from_le_bytes(c[..8].try_into().unwrap()), f64::from_le_bytes(c[8..].try_into().unwrap())))
                    .collect(),
            ),
            other => return Err(Error::Format(format!("unknown array dtype `{other}`"))),
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ArraySpec {
    name: String,
    dtype: String,
    len: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Header {
    kind: String,
    config_hash: String,
    meta: serde_json::Value,
    arrays: Vec<ArraySpec>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    pub kind: String,
    pub meta: serde_json::Value,
    pub arrays: Vec<(String, ArrayData)>,
}

/// Hex SHA-256 of the compact JSON serialization (object keys sorted).
pub fn config_hash(meta: &serde_json::Value) -> String {
    let digest = Sha256::digest(serde_json::to_vec(meta).expect("JSON values serialize"));
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl Container {
    pub fn new(kind: &str, meta: serde_json::Value) -> Self {
        Self {
            kind: kind.to_string(),
            meta,
            arrays: Vec::new(),
        }
    }

    pub fn with(mut self, name: &str, data: ArrayData) -> Self {
        self.arrays.push((name.to_string(), data));
        self
    }

    pub fn array(&self, name: &str) -> Result<&ArrayData> {
        self.arrays
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, a)| a)
            .ok_or_else(|| Error::Format(format!("container `{}` has no array `{name}`", self.kind)))
    }

    pub fn take(&mut self, name: &str) -> Result<ArrayData> {
        let pos = self
            .arrays
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::Format(format!("container `{}` has no array `{name}`", self.kind)))?;
        Ok(self.arrays.remove(pos).1)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let header = Header {
            kind: self.kind.clone(),
            config_hash: config_hash(&self.meta),
            meta: self.meta.clone(),
            arrays: self
                .arrays
                .iter()
                .map(|(n, a)| ArraySpec {
                    name: n.clone(),
                    dtype: a.dtype().into(),
                    len: a.len(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header)?;
        // Write to a sibling and rename so readers never see partial files.
        let tmp = path.with_extension("partial");
        {
            let mut w = BufWriter::new(File::create(&tmp)?);
            w.write_all(MAGIC)?;
            w.write_all(&VERSION.to_le_bytes())?;
            w.write_all(&(json.len() as u64).to_le_bytes())?;
            w.write_all(&json)?;
            for (_, a) in &self.arrays {
                a.write_to(&mut w)?;
            }
            w.flush()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| Error::Format("file too short for magic".into()))?;
        if &magic != MAGIC {
            return Err(Error::Format(format!("bad magic in {}", path.display())));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4).map_err(|_| Error::Format("missing version".into()))?;
        let version = u32::from_le_bytes(b4);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported container version {version}")));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8).map_err(|_| Error::Format("missing header length".into()))?;
        let hlen = u64::from_le_bytes(b8) as usize;
        let mut hbuf = vec![0u8; hlen];
        r.read_exact(&mut hbuf).map_err(|_| Error::Format("truncated header".into()))?;
        let header: Header = serde_json::from_slice(&hbuf)?;
        if config_hash(&header.meta) != header.config_hash {
            return Err(Error::Format("header hash does not match its metadata".into()));
        }
        let mut arrays = Vec::with_capacity(header.arrays.len());
        for spec in &header.arrays {
            arrays.push((spec.name.clone(), ArrayData::read_from(&spec.dtype, spec.len, &mut r)?));
        }
        Ok(Self {
            kind: header.kind,
            meta: header.meta,
            arrays,
        })
    }

    /// Reads and checks that `kind` and the metadata hash match expectations.
    pub fn read_expecting(path: &Path, kind: &str, meta: &serde_json::Value) -> Result<Self> {
        let c = Self::read(path)?;
        if c.kind != kind {
            return Err(Error::Format(format!("expected a `{kind}` container, found `{}`", c.kind)));
        }
        if config_hash(&c.meta) != config_hash(meta) {
            return Err(Error::Format(format!("`{kind}` container was built with a different configuration")));
        }
        Ok(c)
    }
}

macro_rules! typed_take {
    ($name:ident, $variant:ident, $t:ty) => {
        pub fn $name(data: ArrayData) -> Result<Vec<$t>> {
            match data {
                ArrayData::$variant(v) => Ok(v),
                other => Err(Error::Format(format!("expected {} array, found {}", stringify!($t), other.dtype()))),
            }
        }
    };
}

typed_take!(into_f64, F64, f64);
typed_take!(into_f32, F32, f32);
typed_take!(into_u32, U32, u32);
typed_take!(into_u64, U64, u64);
typed_take!(into_c64, C64, Complex64);

//! Binary artifact container: an 8-byte magic, a little-endian `u64` header
//! length, a JSON header, then little-endian `f64` arrays in header order.

use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"AFMTLCK1";
pub const SHALLOW_MAGIC: &[u8; 8] = b"AFMTLSH1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArraySpec {
    pub name: String,
    pub shape: Vec<usize>,
}

impl ArraySpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Serialize, Deserialize)]
struct Header<M> {
    meta: M,
    arrays: Vec<ArraySpec>,
}

pub struct NamedArray {
    pub spec: ArraySpec,
    pub data: Vec<f64>,
}

pub fn write<M: Serialize, W: Write>(magic: &[u8; 8], meta: &M, arrays: &[NamedArray], mut out: W) -> Result<()> {
    for a in arrays {
        if a.spec.len() != a.data.len() {
            return Err(Error::Width {
                context: format!("array `{}`", a.spec.name),
                expected: a.spec.len(),
                found: a.data.len(),
            });
        }
    }
    let header = Header {
        meta,
        arrays: arrays.iter().map(|a| a.spec.clone()).collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut buf = Vec::with_capacity(16 + json.len() + arrays.iter().map(|a| a.data.len() * 8).sum::<usize>());
    buf.extend_from_slice(magic);
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for a in arrays {
        for v in &a.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf).map_err(|e| Error::Invalid(format!("writing container: {e}")))
}

pub fn read<M: DeserializeOwned, R: Read>(magic: &[u8; 8], mut input: R) -> Result<(M, Vec<NamedArray>)> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Invalid(format!("reading container: {e}")))?;
    let bad = |m: &str| Error::Invalid(format!("malformed container: {m}"));
    if bytes.len() < 16 || &bytes[..8] != magic {
        return Err(bad("wrong magic"));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = bytes.get(16..16usize.checked_add(hlen).ok_or_else(|| bad("header length"))?).ok_or_else(|| bad("truncated header"))?;
    let header: Header<M> = serde_json::from_slice(body)?;
    let mut pos = 16 + hlen;
    let mut arrays = Vec::with_capacity(header.arrays.len());
    for spec in header.arrays {
        let n = spec.len();
        let chunk = bytes
            .get(pos..pos + n * 8)
            .ok_or_else(|| bad(&format!("truncated array `{}`", spec.name)))?;
        let data = chunk
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        pos += n * 8;
        arrays.push(NamedArray { spec, data });
    }
    if pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok((header.meta, arrays))
}

pub fn save<M: Serialize>(path: &Path, magic: &[u8; 8], meta: &M, arrays: &[NamedArray]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write(magic, meta, arrays, std::io::BufWriter::new(file))
}

pub fn load<M: DeserializeOwned>(path: &Path, magic: &[u8; 8]) -> Result<(M, Vec<NamedArray>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read(magic, std::io::BufReader::new(file)).map_err(|e| match e {
        Error::Invalid(m) => Error::Invalid(format!("{}: {m}", path.display())),
        other => other,
    })
}

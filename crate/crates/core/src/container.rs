//! Binary container shared by weight files and cached datasets.
//!
//! Layout: `b"MSAP"`, format version (`u32` LE), header length (`u64` LE),
//! UTF-8 JSON header, then raw little-endian `f32` payload. The header is a
//! JSON object carrying a `tensors` manifest (`name`, `shape`, byte
//! `offset` into the payload), the total `payload_bytes`, and any
//! caller-specific keys.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"MSAP";
pub const FORMAT_VERSION: u32 = 1;
const PREAMBLE: usize = 4 + 4 + 8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
}

/// A named tensor to be written.
pub struct Record<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: &'a [f32],
}

/// Decoded container contents.
#[derive(Debug)]
pub struct Container {
    /// Header keys other than `tensors` and `payload_bytes`.
    pub header: Map<String, Value>,
    pub tensors: Vec<(ManifestEntry, Vec<f32>)>,
}

impl Container {
    pub fn take(&mut self, name: &str) -> Result<(Vec<usize>, Vec<f32>)> {
        let pos = self
            .tensors
            .iter()
            .position(|(e, _)| e.name == name)
            .ok_or_else(|| Error::MissingTensor(name.to_string()))?;
        let (entry, values) = self.tensors.remove(pos);
        Ok((entry.shape, values))
    }

    /// Checks the header's `kind` tag.
    pub fn require_kind(&self, kind: &str) -> Result<()> {
        match self.header.get("kind").and_then(Value::as_str) {
            Some(k) if k == kind => Ok(()),
            Some(k) => Err(Error::Header(format!("expected a {kind} file, found `{k}`"))),
            None => Err(Error::Header("missing `kind`".into())),
        }
    }

    pub fn header_field<D: serde::de::DeserializeOwned>(&self, key: &str) -> Result<D> {
        let v = self
            .header
            .get(key)
            .ok_or_else(|| Error::Header(format!("missing `{key}`")))?;
        Ok(serde_json::from_value(v.clone())?)
    }
}

pub fn encode(mut header: Map<String, Value>, records: &[Record<'_>]) -> Result<Vec<u8>> {
    let mut manifest = Vec::with_capacity(records.len());
    let mut offset = 0u64;
    for r in records {
        let n: usize = r.shape.iter().product();
        if n != r.values.len() {
            return Err(Error::ManifestShape {
                name: r.name.clone(),
                shape: r.shape.clone(),
                expected: n,
                actual: r.values.len(),
            });
        }
        manifest.push(ManifestEntry {
            name: r.name.clone(),
            shape: r.shape.clone(),
            offset,
        });
        offset += 4 * n as u64;
    }
    header.insert("tensors".into(), serde_json::to_value(&manifest)?);
    header.insert("payload_bytes".into(), Value::from(offset));
    let header_bytes = serde_json::to_vec(&header)?;

    let mut out = Vec::with_capacity(PREAMBLE + header_bytes.len() + offset as usize);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    for r in records {
        for v in r.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn need(bytes: &[u8], needed: u64) -> Result<()> {
    if (bytes.len() as u64) < needed {
        Err(Error::Truncated {
            needed,
            available: bytes.len() as u64,
        })
    } else {
        Ok(())
    }
}

pub fn decode(bytes: &[u8]) -> Result<Container> {
    need(bytes, 4)?;
    let found: [u8; 4] = bytes[..4].try_into().unwrap();
    if found != MAGIC {
        return Err(Error::BadMagic {
            expected: MAGIC,
            found,
        });
    }
    need(bytes, PREAMBLE as u64)?;
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let payload_start = PREAMBLE as u64 + header_len;
    need(bytes, payload_start)?;
    let mut header: Map<String, Value> = serde_json::from_slice(&bytes[PREAMBLE..payload_start as usize])
        .map_err(|e| Error::Header(e.to_string()))?;
    let manifest: Vec<ManifestEntry> = serde_json::from_value(
        header
            .remove("tensors")
            .ok_or_else(|| Error::Header("missing `tensors` manifest".into()))?,
    )
    .map_err(|e| Error::Header(e.to_string()))?;
    let payload_bytes = header
        .remove("payload_bytes")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Header("missing `payload_bytes`".into()))?;
    need(bytes, payload_start + payload_bytes)?;
    let payload = &bytes[payload_start as usize..(payload_start + payload_bytes) as usize];

    // Each tensor spans from its offset to the next one (or the payload end).
    let mut order: Vec<usize> = (0..manifest.len()).collect();
    order.sort_by_key(|&i| manifest[i].offset);
    let mut spans = vec![0u64; manifest.len()];
    for (pos, &i) in order.iter().enumerate() {
        let end = order.get(pos + 1).map_or(payload_bytes, |&j| manifest[j].offset);
        spans[i] = end.saturating_sub(manifest[i].offset);
    }
    let mut tensors = Vec::with_capacity(manifest.len());
    for (entry, span) in manifest.into_iter().zip(spans) {
        let expected: usize = entry.shape.iter().product();
        if entry.offset > payload_bytes || span % 4 != 0 || span / 4 != expected as u64 {
            return Err(Error::ManifestShape {
                name: entry.name.clone(),
                shape: entry.shape.clone(),
                expected,
                actual: (span / 4) as usize,
            });
        }
        let start = entry.offset as usize;
        let values = payload[start..start + 4 * expected]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push((entry, values));
    }
    Ok(Container { header, tensors })
}

pub fn write_file(path: &Path, header: Map<String, Value>, records: &[Record<'_>]) -> Result<()> {
    let bytes = encode(header, records)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    f.sync_all()?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<Container> {
    decode(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<u8> {
        let a = [1.0f32, -2.5, 3.25];
        let b = [f32::MIN_POSITIVE, 0.1];
        let mut header = Map::new();
        header.insert("kind".into(), Value::from("test"));
        encode(
            header,
            &[
                Record {
                    name: "a".into(),
                    shape: vec![3],
                    values: &a,
                },
                Record {
                    name: "b".into(),
                    shape: vec![1, 2],
                    values: &b,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn round_trip() {
        let mut c = decode(&sample()).unwrap();
        assert_eq!(c.header["kind"], "test");
        assert_eq!(c.take("b").unwrap(), (vec![1, 2], vec![f32::MIN_POSITIVE, 0.1]));
        assert_eq!(c.take("a").unwrap().1, vec![1.0, -2.5, 3.25]);
        assert!(matches!(c.take("a"), Err(Error::MissingTensor(_))));
    }

    #[test]
    fn corrupt_magic() {
        let mut bytes = sample();
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn future_version() {
        let mut bytes = sample();
        bytes[4..8].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(decode(&bytes), Err(Error::UnsupportedVersion { found: 7, .. })));
    }

    #[test]
    fn truncated_payload() {
        let bytes = sample();
        for cut in [2, 10, 20, bytes.len() - 1] {
            assert!(matches!(decode(&bytes[..cut]), Err(Error::Truncated { .. })), "cut at {cut}");
        }
    }

    #[test]
    fn manifest_shape_disagrees_with_payload() {
        let bytes = sample();
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let header = std::str::from_utf8(&bytes[16..16 + header_len]).unwrap();
        // same byte length, so the preamble stays valid
        let forged = header.replacen("\"shape\":[3]", "\"shape\":[4]", 1);
        assert_eq!(forged.len(), header.len());
        let mut out = bytes[..16].to_vec();
        out.extend_from_slice(forged.as_bytes());
        out.extend_from_slice(&bytes[16 + header_len..]);
        assert!(matches!(decode(&out), Err(Error::ManifestShape { .. })));
    }
}

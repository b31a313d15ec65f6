//! Binary container shared by every persisted artifact.
//!
//! Layout: 8-byte magic, manifest length as `u32` little-endian, the UTF-8
//! JSON manifest, then the payload as raw little-endian `f64` values.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CATNNV01";
pub const DATASET_MAGIC: &[u8; 8] = b"CATDSV01";
pub const PROBE_MAGIC: &[u8; 8] = b"CATPRV01";
pub const ATTRIBUTION_MAGIC: &[u8; 8] = b"CATAMV01";
pub const ACTIVATION_MAGIC: &[u8; 8] = b"CATACV01";

const HEADER_LEN: usize = 12;

pub fn encode<M: Serialize>(magic: &[u8; 8], manifest: &M, payload: &[f64]) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(manifest)?;
    let len = u32::try_from(json.len())
        .map_err(|_| Error::InvalidConfig("manifest larger than 4 GiB".into()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + json.len() + payload.len() * 8);
    out.extend_from_slice(magic);
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(&json);
    for x in payload {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(out)
}

/// Parses a container. `expected_payload` is computed from the manifest and
/// must match the remaining byte count exactly.
pub fn decode<M, F>(magic: &[u8; 8], bytes: &[u8], expected_payload: F) -> Result<(M, Vec<f64>)>
where
    M: DeserializeOwned,
    F: FnOnce(&M) -> usize,
{
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            reason: "truncated header".into(),
        });
    }
    if let Some(i) = (0..8).find(|&i| bytes[i] != magic[i]) {
        return Err(Error::Format {
            offset: i as u64,
            reason: format!(
                "magic mismatch: expected {:?}, found {:?}",
                String::from_utf8_lossy(magic),
                String::from_utf8_lossy(&bytes[..8])
            ),
        });
    }
    let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = HEADER_LEN + len;
    if bytes.len() < body {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            reason: format!("truncated manifest: need {len} bytes"),
        });
    }
    let manifest: M = serde_json::from_slice(&bytes[HEADER_LEN..body]).map_err(|e| Error::Format {
        offset: HEADER_LEN as u64,
        reason: format!("manifest: {e}"),
    })?;
    let n = expected_payload(&manifest);
    let have = bytes.len() - body;
    if have != n * 8 {
        return Err(Error::Format {
            offset: (body + have.min(n * 8)) as u64,
            reason: format!("payload holds {have} bytes, expected {}", n * 8),
        });
    }
    let payload = bytes[body..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((manifest, payload))
}

/// Writes through a temporary sibling and renames, so readers never observe a
/// partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    // Unique per process and call, so concurrent writers of one path never
    // share a temporary; the last rename wins.
    static NEXT: AtomicU64 = AtomicU64::new(0);
    let n = NEXT.fetch_add(1, Ordering::Relaxed);
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".tmp{}-{n}", std::process::id()));
    let tmp = path.with_file_name(name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn save<M: Serialize>(path: &Path, magic: &[u8; 8], manifest: &M, payload: &[f64]) -> Result<()> {
    write_atomic(path, &encode(magic, manifest, payload)?)
}

pub fn load<M, F>(path: &Path, magic: &[u8; 8], expected_payload: F) -> Result<(M, Vec<f64>)>
where
    M: DeserializeOwned,
    F: FnOnce(&M) -> usize,
{
    let bytes = fs::read(path)?;
    decode(magic, &bytes, expected_payload)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_rejections() {
        let bytes = encode(PROBE_MAGIC, &vec![1u32, 2], &[1.5, -2.0]).unwrap();
        let (m, p): (Vec<u32>, _) = decode(PROBE_MAGIC, &bytes, |_| 2).unwrap();
        assert_eq!(m, vec![1, 2]);
        assert_eq!(p, vec![1.5, -2.0]);

        let err = decode::<Vec<u32>, _>(DATASET_MAGIC, &bytes, |_| 2).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 3, .. }), "{err}");

        let short = &bytes[..bytes.len() - 3];
        assert!(matches!(
            decode::<Vec<u32>, _>(PROBE_MAGIC, short, |_| 2),
            Err(Error::Format { .. })
        ));
    }
}

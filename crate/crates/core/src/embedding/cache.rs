//! Persistent embedding cache.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "LFEMBED1"
//! name_len   u32, name bytes (UTF-8)
//! model_len  u32, model bytes (UTF-8)
//! dim        u64
//! count      u64      committed record count
//! records    count × (content_hash [32 bytes] + dim × f64)
//! ```
//!
//! New records are appended after the last committed record and `count` is
//! rewritten afterwards, so an interrupted write leaves the committed prefix
//! intact.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use super::{EmbeddingVector, ProviderIdentity};
use crate::corpus::ContentHash;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"LFEMBED1";

#[derive(Debug, Clone)]
pub struct EmbeddingCache {
    identity: ProviderIdentity,
    path: Option<PathBuf>,
    entries: Vec<(ContentHash, EmbeddingVector)>,
    index: HashMap<ContentHash, usize>,
    committed: usize,
}

impl EmbeddingCache {
    pub fn in_memory(identity: ProviderIdentity) -> Self {
        EmbeddingCache { identity, path: None, entries: Vec::new(), index: HashMap::new(), committed: 0 }
    }

    /// Opens `path`, creating it on first flush if absent. An existing file
    /// written by another provider is refused.
    pub fn open(path: impl AsRef<Path>, identity: ProviderIdentity) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            let mut cache = Self::in_memory(identity);
            cache.path = Some(path.to_path_buf());
            return Ok(cache);
        }
        let mut cache = Self::load(path)?;
        if cache.identity != identity {
            return Err(Error::ProviderMismatch { expected: identity.to_string(), found: cache.identity.to_string() });
        }
        cache.path = Some(path.to_path_buf());
        Ok(cache)
    }

    /// Reads a cache file regardless of provider.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let mut cache = Self::decode(&bytes)?;
        cache.path = Some(path.to_path_buf());
        Ok(cache)
    }

    pub fn identity(&self) -> &ProviderIdentity {
        &self.identity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, hash: &ContentHash) -> bool {
        self.index.contains_key(hash)
    }

    pub fn get(&self, hash: &ContentHash) -> Option<&EmbeddingVector> {
        self.index.get(hash).map(|&i| &self.entries[i].1)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&ContentHash, &EmbeddingVector)> {
        self.entries.iter().map(|(h, v)| (h, v))
    }

    /// Inserts a vector; an existing entry for the same hash is kept.
    pub fn insert(&mut self, hash: ContentHash, vector: EmbeddingVector) -> Result<()> {
        if vector.dim() != self.identity.dim {
            return Err(Error::DimensionMismatch { expected: self.identity.dim, found: vector.dim() });
        }
        if !self.index.contains_key(&hash) {
            self.index.insert(hash, self.entries.len());
            self.entries.push((hash, vector));
        }
        Ok(())
    }

    fn header(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        for s in [&self.identity.name, &self.identity.model] {
            out.extend_from_slice(&(s.len() as u32).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        }
        out.extend_from_slice(&(self.identity.dim as u64).to_le_bytes());
        out
    }

    fn encode_record(out: &mut Vec<u8>, hash: &ContentHash, v: &EmbeddingVector) {
        out.extend_from_slice(&hash.0);
        for x in v.values() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }

    /// Full serialized form.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.header();
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for (h, v) in &self.entries {
            Self::encode_record(&mut out, h, v);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::CorruptCache("bad magic".into()));
        }
        let name = r.string()?;
        let model = r.string()?;
        let dim = r.u64()? as usize;
        if dim == 0 {
            return Err(Error::CorruptCache("zero dimension".into()));
        }
        let count = r.u64()? as usize;
        let identity = ProviderIdentity { name, model, dim };
        let mut cache = Self::in_memory(identity);
        for _ in 0..count {
            let mut hash = [0u8; 32];
            hash.copy_from_slice(r.take(32)?);
            let mut values = Vec::with_capacity(dim);
            for _ in 0..dim {
                values.push(f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")));
            }
            let v = EmbeddingVector::new(values).map_err(|e| Error::CorruptCache(e.to_string()))?;
            cache.insert(ContentHash(hash), v)?;
        }
        cache.committed = cache.entries.len();
        Ok(cache)
    }

    /// Appends uncommitted records to the backing file, then commits the new
    /// count. No-op for in-memory caches.
    pub fn flush(&mut self) -> Result<()> {
        let Some(path) = self.path.clone() else {
            self.committed = self.entries.len();
            return Ok(());
        };
        if self.committed == self.entries.len() && path.exists() {
            return Ok(());
        }
        let io = |e| Error::io(&path, e);
        let header = self.header();
        let count_offset = header.len() as u64;
        let record_len = 32 + 8 * self.identity.dim as u64;
        let mut file = OpenOptions::new().read(true).write(true).create(true).truncate(false).open(&path).map_err(io)?;
        if file.metadata().map_err(io)?.len() < count_offset + 8 {
            file.set_len(0).map_err(io)?;
            let mut init = header;
            init.extend_from_slice(&0u64.to_le_bytes());
            file.write_all(&init).map_err(io)?;
            self.committed = 0;
        }
        let end = count_offset + 8 + self.committed as u64 * record_len;
        file.seek(SeekFrom::Start(end)).map_err(io)?;
        {
            let mut w = BufWriter::new(&mut file);
            let mut buf = Vec::new();
            for (h, v) in &self.entries[self.committed..] {
                buf.clear();
                Self::encode_record(&mut buf, h, v);
                w.write_all(&buf).map_err(io)?;
            }
            w.flush().map_err(io)?;
        }
        file.sync_data().map_err(io)?;
        let new_end = count_offset + 8 + self.entries.len() as u64 * record_len;
        file.set_len(new_end).map_err(io)?;
        file.seek(SeekFrom::Start(count_offset)).map_err(io)?;
        file.write_all(&(self.entries.len() as u64).to_le_bytes()).map_err(io)?;
        file.sync_data().map_err(io)?;
        self.committed = self.entries.len();
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::CorruptCache("truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let len = u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|e| Error::CorruptCache(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ident(dim: usize) -> ProviderIdentity {
        ProviderIdentity { name: "t".into(), model: "m".into(), dim }
    }

    fn hash(i: u8) -> ContentHash {
        ContentHash([i; 32])
    }

    #[test]
    fn file_roundtrip_with_appends() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.bin");
        let mut c = EmbeddingCache::open(&path, ident(3)).unwrap();
        c.insert(hash(1), EmbeddingVector::new(vec![0.1, -0.0, 1e-300]).unwrap()).unwrap();
        c.flush().unwrap();
        let mut c = EmbeddingCache::open(&path, ident(3)).unwrap();
        assert_eq!(c.len(), 1);
        c.insert(hash(2), EmbeddingVector::new(vec![f64::MAX, f64::MIN_POSITIVE, -2.5]).unwrap()).unwrap();
        c.flush().unwrap();
        let back = EmbeddingCache::load(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(std::fs::read(&path).unwrap(), c.encode());
        assert_eq!(back.get(&hash(1)).unwrap().values()[1].to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn uncommitted_tail_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.bin");
        let mut c = EmbeddingCache::open(&path, ident(2)).unwrap();
        c.insert(hash(1), EmbeddingVector::new(vec![1.0, 2.0]).unwrap()).unwrap();
        c.flush().unwrap();
        // A record written without the count update, as after a crash.
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.extend_from_slice(&[7u8; 20]);
        std::fs::write(&path, &bytes).unwrap();
        let mut c = EmbeddingCache::open(&path, ident(2)).unwrap();
        assert_eq!(c.len(), 1);
        c.insert(hash(2), EmbeddingVector::new(vec![3.0, 4.0]).unwrap()).unwrap();
        c.flush().unwrap();
        assert_eq!(EmbeddingCache::load(&path).unwrap().len(), 2);
        assert_eq!(std::fs::read(&path).unwrap(), c.encode());
    }

    #[test]
    fn other_provider_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.bin");
        let mut c = EmbeddingCache::open(&path, ident(2)).unwrap();
        c.insert(hash(1), EmbeddingVector::new(vec![1.0, 2.0]).unwrap()).unwrap();
        c.flush().unwrap();
        assert!(matches!(EmbeddingCache::open(&path, ident(3)), Err(Error::ProviderMismatch { .. })));
    }

    #[test]
    fn corrupt_inputs() {
        assert!(matches!(EmbeddingCache::decode(b"nope"), Err(Error::CorruptCache(_))));
        let mut c = EmbeddingCache::in_memory(ident(2));
        c.insert(hash(1), EmbeddingVector::new(vec![1.0, 2.0]).unwrap()).unwrap();
        let bytes = c.encode();
        assert!(EmbeddingCache::decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(matches!(c.insert(hash(2), EmbeddingVector::new(vec![1.0]).unwrap()), Err(Error::DimensionMismatch { .. })));
    }

    proptest! {
        #[test]
        fn encode_decode_is_bit_exact(
            dim in 1usize..12,
            rows in proptest::collection::vec(proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 12), 0..16),
        ) {
            let mut c = EmbeddingCache::in_memory(ProviderIdentity { name: "név".into(), model: "m/1".into(), dim });
            for (i, r) in rows.iter().enumerate() {
                c.insert(hash(i as u8), EmbeddingVector::new(r[..dim].to_vec()).unwrap()).unwrap();
            }
            let back = EmbeddingCache::decode(&c.encode()).unwrap();
            prop_assert_eq!(back.identity(), c.identity());
            prop_assert_eq!(back.len(), c.len());
            for ((h1, v1), (h2, v2)) in c.entries().zip(back.entries()) {
                prop_assert_eq!(h1, h2);
                let a: Vec<u64> = v1.values().iter().map(|x| x.to_bits()).collect();
                let b: Vec<u64> = v2.values().iter().map(|x| x.to_bits()).collect();
                prop_assert_eq!(a, b);
            }
        }
    }
}

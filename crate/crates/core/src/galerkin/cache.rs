//! On-disk store of Galerkin matrices.
//!
//! Each entry is a pair `<key>.json` (header) and `<key>.bin` (payload:
//! little-endian `f64` pairs `re, im`, column-major). The key is the
//! SHA-256 of the header's identifying fields; the header records the
//! SHA-256 of the payload so corruption can be detected.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{GalerkinOperator, PeterWeylBasis};
use crate::dual::{Cutoff, IrrepLabel, Label};
use crate::error::{Error, Result};
use crate::group::GroupSpec;
use crate::linalg::{c, CMat};

const FORMAT: u32 = 1;

#[derive(Debug, Clone, Serialize)]
struct KeyFields<'a> {
    format: u32,
    group: GroupSpec,
    domain: &'a [Label],
    symbol_fingerprint: &'a str,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheHeader {
    pub format: u32,
    pub key: String,
    pub group: GroupSpec,
    pub domain_cutoff: Option<Cutoff>,
    pub codomain_cutoff: Option<Cutoff>,
    pub domain: Vec<Label>,
    pub codomain: Vec<Label>,
    pub symbol_fingerprint: String,
    pub quadrature_level: usize,
    pub rows: usize,
    pub cols: usize,
    pub description: String,
    pub payload_sha256: String,
}

/// Result of re-hashing one entry.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyOutcome {
    pub key: String,
    pub ok: bool,
    pub reason: Option<String>,
}

#[derive(Debug, Clone)]
pub struct GalerkinCache {
    dir: PathBuf,
}

fn labels_of(b: &PeterWeylBasis) -> Vec<Label> {
    b.labels().iter().map(|x| x.label.clone()).collect()
}

fn encode(m: &CMat) -> Vec<u8> {
    let mut out = Vec::with_capacity(m.len() * 16);
    for z in m.iter() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

fn decode(bytes: &[u8], rows: usize, cols: usize) -> Option<CMat> {
    if bytes.len() != rows * cols * 16 {
        return None;
    }
    let vals = bytes.chunks_exact(16).map(|ch| {
        let re = f64::from_le_bytes(ch[..8].try_into().unwrap());
        let im = f64::from_le_bytes(ch[8..].try_into().unwrap());
        c(re, im)
    });
    Some(CMat::from_iterator(rows, cols, vals))
}

fn sha_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl GalerkinCache {
    /// Open (creating if needed) a cache directory.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(GalerkinCache { dir: dir.as_ref().to_path_buf() })
    }

    /// Open an existing directory without creating it.
    pub fn existing(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("cache directory {} does not exist", dir.display()),
            )));
        }
        Ok(GalerkinCache { dir: dir.to_path_buf() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Entries are keyed by domain and operator; the codomain is a function
    /// of both.
    pub fn key(group: GroupSpec, domain: &PeterWeylBasis, fingerprint: &str) -> String {
        let fields = KeyFields {
            format: FORMAT,
            group,
            domain: &labels_of(domain),
            symbol_fingerprint: fingerprint,
        };
        sha_hex(serde_json::to_string(&fields).expect("serializable key").as_bytes())
    }

    fn paths(&self, key: &str) -> (PathBuf, PathBuf) {
        (self.dir.join(format!("{key}.json")), self.dir.join(format!("{key}.bin")))
    }

    fn write_atomic(&self, path: &Path, bytes: &[u8]) -> Result<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }

    /// Store `op` under `key`. The payload is written before the header, so
    /// a header on disk always refers to a complete payload.
    pub fn store(&self, key: &str, op: &GalerkinOperator, fingerprint: &str) -> Result<()> {
        let payload = encode(&op.matrix);
        let header = CacheHeader {
            format: FORMAT,
            key: key.to_string(),
            group: op.domain.group,
            domain_cutoff: op.domain.cutoff,
            codomain_cutoff: op.codomain.cutoff,
            domain: labels_of(&op.domain),
            codomain: labels_of(&op.codomain),
            symbol_fingerprint: fingerprint.to_string(),
            quadrature_level: op.quadrature_level,
            rows: op.matrix.nrows(),
            cols: op.matrix.ncols(),
            description: op.description.clone(),
            payload_sha256: sha_hex(&payload),
        };
        let (json, bin) = self.paths(key);
        self.write_atomic(&bin, &payload)?;
        self.write_atomic(&json, serde_json::to_string_pretty(&header)?.as_bytes())?;
        log::debug!("cached {key} ({}x{})", header.rows, header.cols);
        Ok(())
    }

    fn read_header(&self, key: &str) -> Result<CacheHeader> {
        let (json, _) = self.paths(key);
        let text = fs::read_to_string(&json)?;
        serde_json::from_str(&text).map_err(|e| Error::Cache { name: key.to_string(), reason: format!("bad header: {e}") })
    }

    fn read_payload(&self, header: &CacheHeader) -> Result<CMat> {
        let (_, bin) = self.paths(&header.key);
        let bytes = fs::read(&bin).map_err(|e| Error::Cache { name: header.key.clone(), reason: format!("payload: {e}") })?;
        if sha_hex(&bytes) != header.payload_sha256 {
            return Err(Error::Cache { name: header.key.clone(), reason: "payload hash mismatch".into() });
        }
        decode(&bytes, header.rows, header.cols)
            .ok_or_else(|| Error::Cache { name: header.key.clone(), reason: "payload length does not match the header".into() })
    }

    /// The entry under `key`, if present and intact.
    pub fn load(&self, key: &str) -> Result<Option<GalerkinOperator>> {
        let (json, _) = self.paths(key);
        if !json.exists() {
            return Ok(None);
        }
        let header = self.read_header(key)?;
        let matrix = self.read_payload(&header)?;
        let basis = |labels: &[Label], cutoff: Option<Cutoff>| -> Result<PeterWeylBasis> {
            let ls = labels.iter().map(|l| IrrepLabel::new(header.group, l.clone())).collect::<Result<Vec<_>>>()?;
            let mut b = PeterWeylBasis::from_labels(header.group, ls)?;
            b.cutoff = cutoff;
            Ok(b)
        };
        let mut op = GalerkinOperator::new(basis(&header.domain, header.domain_cutoff)?, basis(&header.codomain, header.codomain_cutoff)?, matrix)?;
        op.quadrature_level = header.quadrature_level;
        op.description = header.description;
        Ok(Some(op))
    }

    fn keys(&self) -> Result<Vec<String>> {
        let mut keys: Vec<String> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                name.strip_suffix(".json").map(str::to_string)
            })
            .collect();
        keys.sort();
        Ok(keys)
    }

    /// Headers of all entries, sorted by key.
    pub fn list(&self) -> Result<Vec<CacheHeader>> {
        self.keys()?.iter().map(|k| self.read_header(k)).collect()
    }

    /// Delete every entry; returns how many were removed.
    pub fn purge(&self) -> Result<usize> {
        let mut removed = 0;
        for k in self.keys()? {
            let (json, bin) = self.paths(&k);
            fs::remove_file(json)?;
            if bin.exists() {
                fs::remove_file(bin)?;
            }
            removed += 1;
        }
        Ok(removed)
    }

    /// Re-hash every payload against its header.
    pub fn verify(&self) -> Result<Vec<VerifyOutcome>> {
        let mut out = Vec::new();
        for k in self.keys()? {
            let outcome = match self.read_header(&k).and_then(|h| self.read_payload(&h)) {
                Ok(_) => VerifyOutcome { key: k, ok: true, reason: None },
                Err(Error::Cache { reason, .. }) => VerifyOutcome { key: k, ok: false, reason: Some(reason) },
                Err(e) => VerifyOutcome { key: k, ok: false, reason: Some(e.to_string()) },
            };
            out.push(outcome);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::{assemble_truncated, index_codomain};
    use crate::symbol::MatrixSymbol;

    fn sample_op() -> GalerkinOperator {
        let g = GroupSpec::torus(1);
        let dom = PeterWeylBasis::from_cutoff(g, Cutoff::band(3)).unwrap();
        let s = MatrixSymbol::winding(1);
        let cod = index_codomain(&s, &dom).unwrap();
        assemble_truncated(&s, &dom, &cod, None).unwrap()
    }

    #[test]
    fn store_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = GalerkinCache::open(dir.path()).unwrap();
        let op = sample_op();
        let key = GalerkinCache::key(op.domain.group, &op.domain, "w1");
        assert!(cache.load(&key).unwrap().is_none());
        cache.store(&key, &op, "w1").unwrap();
        let back = cache.load(&key).unwrap().unwrap();
        assert_eq!(back.matrix, op.matrix);
        assert!(back.domain.same_labels(&op.domain));
        assert_eq!(cache.list().unwrap().len(), 1);
        assert!(cache.verify().unwrap().iter().all(|v| v.ok));
        assert_eq!(cache.purge().unwrap(), 1);
        assert!(cache.list().unwrap().is_empty());
    }

    #[test]
    fn corruption_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let cache = GalerkinCache::open(dir.path()).unwrap();
        let op = sample_op();
        let key = GalerkinCache::key(op.domain.group, &op.domain, "w1");
        cache.store(&key, &op, "w1").unwrap();
        let bin = dir.path().join(format!("{key}.bin"));
        let mut bytes = fs::read(&bin).unwrap();
        bytes[3] ^= 0x10;
        fs::write(&bin, bytes).unwrap();
        let v = cache.verify().unwrap();
        assert!(!v[0].ok);
        assert!(matches!(cache.load(&key), Err(Error::Cache { .. })));
    }

    #[test]
    fn keys_depend_on_fingerprint() {
        let op = sample_op();
        let a = GalerkinCache::key(op.domain.group, &op.domain, "a");
        let b = GalerkinCache::key(op.domain.group, &op.domain, "b");
        assert_ne!(a, b);
        assert_eq!(a.len(), 64);
    }
}

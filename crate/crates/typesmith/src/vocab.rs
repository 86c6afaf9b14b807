//! The bounded type vocabulary.
//!
//! Index 0 is the reserved `unknown` type; the rest are the most frequent
//! declared types over all non-trivial annotated slots, argument and return
//! pooled, most frequent first with lexicographic tie-breaks. Everything
//! beyond the cap encodes to `unknown`.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::extract::FunctionRecord;

pub const UNKNOWN_TYPE: &str = "unknown";
pub const UNKNOWN_INDEX: usize = 0;

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("no annotated non-trivial slots in the corpus")]
    EmptyCorpus,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path} is not a vocabulary checkpoint: {reason}")]
    Format { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeVocabulary {
    /// `types[0] == "unknown"`; the rest ordered by descending frequency.
    types: Vec<String>,
    /// Aligned with `types`; the unknown entry has frequency 0.
    freqs: Vec<u64>,
    index: HashMap<String, usize>,
}

impl TypeVocabulary {
    fn from_entries(entries: Vec<(String, u64)>) -> Self {
        let mut types = vec![UNKNOWN_TYPE.to_string()];
        let mut freqs = vec![0u64];
        for (t, f) in entries {
            types.push(t);
            freqs.push(f);
        }
        let index = types
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        TypeVocabulary { types, freqs, index }
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the unknown entry always exists
    }

    pub fn encode(&self, type_name: &str) -> usize {
        self.index.get(type_name).copied().unwrap_or(UNKNOWN_INDEX)
    }

    pub fn decode(&self, index: usize) -> &str {
        &self.types[index]
    }

    pub fn contains(&self, type_name: &str) -> bool {
        self.index.contains_key(type_name)
    }

    pub fn types(&self) -> &[String] {
        &self.types
    }

    /// Fraction of annotated non-trivial slot occurrences covered.
    pub fn coverage(&self, records: &[FunctionRecord]) -> f64 {
        let mut total = 0u64;
        let mut covered = 0u64;
        for (_, declared, _) in records.iter().flat_map(|r| r.typed_slots()) {
            if let Some(t) = declared {
                total += 1;
                if self.contains(&t) {
                    covered += 1;
                }
            }
        }
        if total == 0 {
            0.0
        } else {
            covered as f64 / total as f64
        }
    }

    /// Stable content hash; model checkpoints embed it.
    pub fn hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for (t, f) in self.types.iter().zip(&self.freqs) {
            h.update((t.len() as u32).to_le_bytes());
            h.update(t.as_bytes());
            h.update(f.to_le_bytes());
        }
        h.finalize().into()
    }

    const MAGIC: &'static [u8; 4] = b"TVOC";
    const VERSION: u32 = 1;

    pub fn save(&self, path: &Path) -> Result<(), VocabError> {
        let io_err = |source| VocabError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
        w.write_all(Self::MAGIC).map_err(io_err)?;
        w.write_u32::<LittleEndian>(Self::VERSION).map_err(io_err)?;
        w.write_u32::<LittleEndian>(self.types.len() as u32)
            .map_err(io_err)?;
        for (t, f) in self.types.iter().zip(&self.freqs) {
            w.write_u32::<LittleEndian>(t.len() as u32).map_err(io_err)?;
            w.write_all(t.as_bytes()).map_err(io_err)?;
            w.write_u64::<LittleEndian>(*f).map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }

    pub fn load(path: &Path) -> Result<Self, VocabError> {
        let io_err = |source| VocabError::Io {
            path: path.display().to_string(),
            source,
        };
        let fmt_err = |reason: &str| VocabError::Format {
            path: path.display().to_string(),
            reason: reason.to_string(),
        };
        let mut r = std::io::BufReader::new(std::fs::File::open(path).map_err(io_err)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io_err)?;
        if &magic != Self::MAGIC {
            return Err(fmt_err("bad magic"));
        }
        let version = r.read_u32::<LittleEndian>().map_err(io_err)?;
        if version != Self::VERSION {
            return Err(fmt_err("unsupported version"));
        }
        let count = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
        let mut types = Vec::with_capacity(count);
        let mut freqs = Vec::with_capacity(count);
        for _ in 0..count {
            let len = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf).map_err(io_err)?;
            types.push(String::from_utf8(buf).map_err(|_| fmt_err("non-utf8 type name"))?);
            freqs.push(r.read_u64::<LittleEndian>().map_err(io_err)?);
        }
        if types.first().map(|s| s.as_str()) != Some(UNKNOWN_TYPE) {
            return Err(fmt_err("missing unknown entry"));
        }
        let index = types
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(TypeVocabulary { types, freqs, index })
    }
}

/// Count declared types over non-trivial annotated slots and keep the `cap`
/// most frequent, ties broken lexicographically.
pub fn build_type_vocabulary(
    records: &[FunctionRecord],
    cap: usize,
) -> Result<TypeVocabulary, VocabError> {
    assert!(cap >= 1, "vocabulary cap must be at least 1");
    let mut counts: HashMap<String, u64> = HashMap::new();
    for (_, declared, _) in records.iter().flat_map(|r| r.typed_slots()) {
        if let Some(t) = declared {
            *counts.entry(t).or_insert(0) += 1;
        }
    }
    if counts.is_empty() {
        return Err(VocabError::EmptyCorpus);
    }
    let mut entries: Vec<(String, u64)> = counts.into_iter().collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    entries.truncate(cap);
    Ok(TypeVocabulary::from_entries(entries))
}

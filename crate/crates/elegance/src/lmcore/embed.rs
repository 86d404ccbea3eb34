//! Text embedding providers and the ELEM interchange format.
//!
//! An embedding provider turns a transcript into a per-token sequence
//! embedding (N x C) and a pooled utterance embedding (1 x C, the row mean
//! over non-PAD positions). Two providers exist: the frozen toy language
//! model, and a table imported from an ELEM file that some other system
//! exported. ELEM files store everything as little-endian f32, so a
//! round trip through export and import reproduces the file bit for bit.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{ReadBytesExt, WriteBytesExt, LE};
use ndarray::Array2;
use sha2::{Digest, Sha256};

use super::alphabet::{tokenize, ALPHABET_VERSION, PAD};
use super::model::{LmConfig, LmMode, LmModel};
use crate::engine::{ParamStore, Tape};
use crate::error::{Error, Result};
use crate::seeds::rng_for;
use crate::simkit::Manifest;

const ELEM_MAGIC: &[u8; 4] = b"ELEM";
const ELEM_VERSION: u16 = 1;

/// First 16 bytes of the SHA-256 of the transcript's UTF-8 bytes. ELEM files
/// key entries by this hash rather than by the raw text.
pub fn transcript_hash(text: &str) -> [u8; 16] {
    let digest = Sha256::digest(text.as_bytes());
    let mut hash = [0u8; 16];
    hash.copy_from_slice(&digest[..16]);
    hash
}

/// The frozen toy language model used as an embedding provider. Its weights
/// are a pure function of the seed and never train.
pub struct ToyLm {
    store: ParamStore,
    model: LmModel,
    seed: u64,
}

impl ToyLm {
    pub fn new(seed: u64) -> ToyLm {
        let cfg = LmConfig {
            mode: LmMode::Bidirectional,
            ..LmConfig::default()
        };
        let mut store = ParamStore::new();
        let mut rng = rng_for(seed, "lmcore.toy");
        let model = LmModel::register(cfg, &mut store, &mut rng, "toylm")
            .expect("default toy config is valid");
        store.set_trainable_prefix("toylm", false);
        ToyLm { store, model, seed }
    }

    pub fn dim(&self) -> usize {
        self.model.cfg().model_dim
    }

    pub fn tag(&self) -> String {
        format!("toy-lm:{ALPHABET_VERSION}:seed={}", self.seed)
    }

    /// Final-layer hidden states for the tokenized transcript, (N x C).
    pub fn sequence_embedding(&self, text: &str) -> Result<Array2<f64>> {
        let tokens = tokenize(text)?;
        let tape = Tape::new();
        let bind = self.store.bind(&tape);
        let states = self.model.forward(&tape, &bind, &tokens.ids, None)?;
        Ok(tape.value(states.last))
    }
}

fn mean_over_non_pad(seq: &Array2<f64>, ids: &[u32]) -> Result<Array2<f64>> {
    let (n, c) = seq.dim();
    if n != ids.len() {
        return Err(Error::contract(format!(
            "sequence embedding has {n} rows but {} token ids were given",
            ids.len()
        )));
    }
    let mut pooled = Array2::<f64>::zeros((1, c));
    let mut count = 0usize;
    for (row, &id) in ids.iter().enumerate() {
        if id != PAD {
            for j in 0..c {
                pooled[[0, j]] += seq[[row, j]];
            }
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::contract("every position is PAD, nothing to pool"));
    }
    pooled.mapv_inplace(|v| v / count as f64);
    Ok(pooled)
}

/// One transcript's embeddings: the full sequence and its pooled mean.
#[derive(Clone, Debug)]
pub struct EmbeddingEntry {
    /// (N x C) per-token embedding.
    pub seq: Array2<f64>,
    /// (1 x C) row mean of `seq`.
    pub pooled: Array2<f64>,
}

/// An embedding lookup table keyed by transcript hash, typically read from
/// an ELEM file.
#[derive(Debug)]
pub struct EmbeddingTable {
    tag: String,
    dim: usize,
    entries: BTreeMap<[u8; 16], EmbeddingEntry>,
}

impl EmbeddingTable {
    pub fn new(tag: impl Into<String>, dim: usize) -> EmbeddingTable {
        EmbeddingTable {
            tag: tag.into(),
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Insert a sequence embedding under the transcript's hash; the pooled
    /// vector is its row mean.
    pub fn insert(&mut self, text: &str, seq: Array2<f64>) -> Result<()> {
        let (n, c) = seq.dim();
        if c != self.dim {
            return Err(Error::contract(format!(
                "embedding has {c} columns, the table holds {}-dimensional vectors",
                self.dim
            )));
        }
        if n == 0 {
            return Err(Error::contract("sequence embedding has no rows"));
        }
        let mut pooled = Array2::<f64>::zeros((1, c));
        for row in seq.rows() {
            for (j, &v) in row.iter().enumerate() {
                pooled[[0, j]] += v;
            }
        }
        pooled.mapv_inplace(|v| v / n as f64);
        self.entries
            .insert(transcript_hash(text), EmbeddingEntry { seq, pooled });
        Ok(())
    }

    pub fn contains(&self, text: &str) -> bool {
        self.entries.contains_key(&transcript_hash(text))
    }

    /// Fetch the entry for a transcript; an absent transcript is an error,
    /// imported tables have no way to synthesize embeddings on the fly.
    pub fn lookup(&self, text: &str) -> Result<&EmbeddingEntry> {
        self.entries.get(&transcript_hash(text)).ok_or_else(|| {
            let preview: String = text.chars().take(32).collect();
            Error::domain(format!(
                "transcript {preview:?} is not in the imported embedding table ({} entries)",
                self.entries.len()
            ))
        })
    }

    /// Check the table's width against what a consumer expects.
    pub fn expect_dim(&self, want: usize) -> Result<()> {
        if self.dim != want {
            return Err(Error::config(format!(
                "embedding table is {}-dimensional but {want}-dimensional vectors are required",
                self.dim
            )));
        }
        Ok(())
    }
}

/// A source of transcript embeddings: either the frozen toy model computing
/// them on demand, or a table imported from an ELEM file.
pub enum EmbeddingProvider {
    Toy(ToyLm),
    Imported(EmbeddingTable),
}

impl EmbeddingProvider {
    pub fn toy(seed: u64) -> EmbeddingProvider {
        EmbeddingProvider::Toy(ToyLm::new(seed))
    }

    pub fn dim(&self) -> usize {
        match self {
            EmbeddingProvider::Toy(lm) => lm.dim(),
            EmbeddingProvider::Imported(table) => table.dim(),
        }
    }

    pub fn tag(&self) -> String {
        match self {
            EmbeddingProvider::Toy(lm) => lm.tag(),
            EmbeddingProvider::Imported(table) => table.tag().to_string(),
        }
    }

    /// Sequence and pooled embedding for one transcript.
    pub fn entry(&self, text: &str) -> Result<EmbeddingEntry> {
        match self {
            EmbeddingProvider::Toy(lm) => {
                let seq = lm.sequence_embedding(text)?;
                let ids = tokenize(text)?.ids;
                let pooled = mean_over_non_pad(&seq, &ids)?;
                Ok(EmbeddingEntry { seq, pooled })
            }
            EmbeddingProvider::Imported(table) => Ok(table.lookup(text)?.clone()),
        }
    }

    /// (N x C) per-token embedding.
    pub fn sequence_embedding(&self, text: &str) -> Result<Array2<f64>> {
        Ok(self.entry(text)?.seq)
    }

    /// (1 x C) pooled utterance embedding: the mean over non-PAD positions.
    pub fn utterance_embedding(&self, text: &str) -> Result<Array2<f64>> {
        Ok(self.entry(text)?.pooled)
    }
}

/// Collect every transcript a manifest points at, deduplicated, as
/// (text, first sample id that used it) pairs sorted by hash.
fn manifest_transcripts(manifest: &Manifest, root: &Path) -> Result<Vec<(String, String)>> {
    let mut seen: BTreeMap<[u8; 16], (String, String)> = BTreeMap::new();
    for record in &manifest.records {
        for (role, rel) in &record.files {
            if !role.starts_with("transcript") {
                continue;
            }
            let path = root.join(rel);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
            seen.entry(transcript_hash(&text))
                .or_insert((text, record.sample_id.clone()));
        }
    }
    Ok(seen.into_values().collect())
}

/// Embed every transcript a manifest references and write them to an ELEM
/// file at `path`. Returns the number of distinct transcripts written.
pub fn export_embeddings(
    manifest: &Manifest,
    root: &Path,
    provider: &EmbeddingProvider,
    path: &Path,
) -> Result<usize> {
    let transcripts = manifest_transcripts(manifest, root)?;
    if transcripts.is_empty() {
        return Err(Error::domain(
            "the manifest references no transcripts, nothing to export",
        ));
    }
    let mut table = EmbeddingTable::new(provider.tag(), provider.dim());
    for (text, _) in &transcripts {
        let entry = provider.entry(text)?;
        table
            .entries
            .insert(transcript_hash(text), entry);
    }
    write_elem(path, &table)?;
    Ok(table.len())
}

/// Verify that an embedding table covers every transcript in a manifest.
/// Returns the number of distinct transcripts checked.
pub fn check_coverage(table: &EmbeddingTable, manifest: &Manifest, root: &Path) -> Result<usize> {
    let transcripts = manifest_transcripts(manifest, root)?;
    let mut missing = Vec::new();
    for (text, sample_id) in &transcripts {
        if !table.contains(text) {
            missing.push(sample_id.clone());
        }
    }
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(Error::domain(format!(
            "embedding table misses {} of {} transcripts (first used by samples: {})",
            missing.len(),
            transcripts.len(),
            missing.join(", ")
        )));
    }
    Ok(transcripts.len())
}

/// Write a table to an ELEM file.
pub fn write_elem(path: &Path, table: &EmbeddingTable) -> Result<()> {
    if table.is_empty() {
        return Err(Error::contract("refusing to write an empty embedding table"));
    }
    let file =
        File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut w = BufWriter::new(file);
    let ctx = || format!("writing {}", path.display());
    let tag = table.tag.as_bytes();
    if tag.len() > u16::MAX as usize {
        return Err(Error::contract("provider tag is too long for the header"));
    }
    w.write_all(ELEM_MAGIC).map_err(|e| Error::io(ctx(), e))?;
    w.write_u16::<LE>(ELEM_VERSION).map_err(|e| Error::io(ctx(), e))?;
    w.write_u16::<LE>(tag.len() as u16).map_err(|e| Error::io(ctx(), e))?;
    w.write_all(tag).map_err(|e| Error::io(ctx(), e))?;
    w.write_u32::<LE>(table.dim as u32).map_err(|e| Error::io(ctx(), e))?;
    w.write_u32::<LE>(table.entries.len() as u32)
        .map_err(|e| Error::io(ctx(), e))?;
    for (hash, entry) in &table.entries {
        w.write_all(hash).map_err(|e| Error::io(ctx(), e))?;
        let (n, c) = entry.seq.dim();
        debug_assert_eq!(c, table.dim);
        w.write_u32::<LE>(n as u32).map_err(|e| Error::io(ctx(), e))?;
        for &v in entry.seq.iter() {
            w.write_f32::<LE>(v as f32).map_err(|e| Error::io(ctx(), e))?;
        }
        for &v in entry.pooled.iter() {
            w.write_f32::<LE>(v as f32).map_err(|e| Error::io(ctx(), e))?;
        }
    }
    w.flush().map_err(|e| Error::io(ctx(), e))?;
    Ok(())
}

/// Read a table from an ELEM file.
pub fn import_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let file =
        File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut r = BufReader::new(file);
    let ctx = || format!("reading {}", path.display());

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| Error::io(ctx(), e))?;
    if &magic != ELEM_MAGIC {
        return Err(Error::format(path, "bad magic, not an ELEM file"));
    }
    let version = r.read_u16::<LE>().map_err(|e| Error::io(ctx(), e))?;
    if version != ELEM_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported ELEM version {version}, expected {ELEM_VERSION}"),
        ));
    }
    let tag_len = r.read_u16::<LE>().map_err(|e| Error::io(ctx(), e))? as usize;
    let mut tag_bytes = vec![0u8; tag_len];
    r.read_exact(&mut tag_bytes).map_err(|e| Error::io(ctx(), e))?;
    let tag = String::from_utf8(tag_bytes)
        .map_err(|_| Error::format(path, "provider tag is not valid UTF-8"))?;
    let dim = r.read_u32::<LE>().map_err(|e| Error::io(ctx(), e))? as usize;
    let count = r.read_u32::<LE>().map_err(|e| Error::io(ctx(), e))? as usize;
    if dim == 0 || count == 0 {
        return Err(Error::format(path, "table declares zero dimensions or entries"));
    }

    let mut table = EmbeddingTable::new(tag, dim);
    for i in 0..count {
        let mut hash = [0u8; 16];
        r.read_exact(&mut hash)
            .map_err(|e| Error::io(format!("{} (entry {i})", ctx()), e))?;
        let n = r
            .read_u32::<LE>()
            .map_err(|e| Error::io(format!("{} (entry {i})", ctx()), e))? as usize;
        if n == 0 {
            return Err(Error::format(path, format!("entry {i} has zero rows")));
        }
        let mut seq = Array2::<f64>::zeros((n, dim));
        for v in seq.iter_mut() {
            *v = r
                .read_f32::<LE>()
                .map_err(|e| Error::io(format!("{} (entry {i})", ctx()), e))? as f64;
        }
        let mut pooled = Array2::<f64>::zeros((1, dim));
        for v in pooled.iter_mut() {
            *v = r
                .read_f32::<LE>()
                .map_err(|e| Error::io(format!("{} (entry {i})", ctx()), e))? as f64;
        }
        table.entries.insert(hash, EmbeddingEntry { seq, pooled });
    }
    let mut trailing = [0u8; 1];
    match r.read(&mut trailing) {
        Ok(0) => {}
        Ok(_) => return Err(Error::format(path, "trailing bytes after the last entry")),
        Err(e) => return Err(Error::io(ctx(), e)),
    }
    Ok(table)
}

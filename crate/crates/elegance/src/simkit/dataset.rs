//! Dataset builds: render a batch of seeded samples to disk (WAV audio, ELVS
//! visual streams, plain-text transcripts) with a JSON-lines manifest. The
//! same config always regenerates byte-identical files.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, IoContext, Result};
use crate::seeds::derive_seed;
use crate::signal::Waveform;

use super::mixture::{make_mixture_sample, make_switching_sample, SampleCfg, Scenario};
use super::speaker::Language;
use super::visual::write_elvs;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetCfg {
    /// Split name; prefixes sample ids and seeds ("train", "eval-core", ...).
    pub name: String,
    pub n_samples: usize,
    /// Build switching samples instead of single-region mixtures.
    pub switching: bool,
    pub sample: SampleCfg,
    pub seed: u64,
}

impl DatasetCfg {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return Err(Error::config(format!(
                "dataset name {:?} must be non-empty and filename-safe",
                self.name
            )));
        }
        if self.n_samples == 0 {
            return Err(Error::config("n_samples must be positive"));
        }
        self.sample.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub sample_id: String,
    /// Role -> path relative to the manifest's directory.
    pub files: BTreeMap<String, String>,
    pub scenario: Scenario,
    pub seed: u64,
    pub snr_db: Vec<f64>,
    pub impairment_ratio: Option<f64>,
    pub language_tags: Vec<Language>,
    pub switch_point_s: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    /// Write as JSON lines, one record per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        for r in &self.records {
            let line = serde_json::to_string(r)
                .map_err(|e| Error::format(path, format!("encoding record: {e}")))?;
            out.extend_from_slice(line.as_bytes());
            out.push(b'\n');
        }
        fs::write(path, out).io_ctx(format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Manifest> {
        let file = fs::File::open(path).io_ctx(format!("opening {}", path.display()))?;
        let mut records = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.io_ctx(format!("reading {}", path.display()))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: ManifestRecord = serde_json::from_str(&line)
                .map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?;
            records.push(record);
        }
        Ok(Manifest { records })
    }

    /// Check id uniqueness and that every referenced file exists under `root`.
    pub fn validate(&self, root: &Path) -> Result<()> {
        let mut seen = BTreeSet::new();
        for r in &self.records {
            if !seen.insert(&r.sample_id) {
                return Err(Error::contract(format!(
                    "duplicate sample_id {:?}",
                    r.sample_id
                )));
            }
            for (role, rel) in &r.files {
                let path = root.join(rel);
                if !path.is_file() {
                    return Err(Error::contract(format!(
                        "sample {:?} {role} file missing: {}",
                        r.sample_id,
                        path.display()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Hex SHA-256 of a file's bytes; identifies dataset and manifest versions.
pub fn file_checksum(path: &Path) -> Result<String> {
    let bytes = fs::read(path).io_ctx(format!("reading {}", path.display()))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn write_wav_rel(
    root: &Path,
    rel: &str,
    wave: &Waveform,
    files: &mut BTreeMap<String, String>,
    role: &str,
) -> Result<()> {
    wave.write_wav(&root.join(rel))?;
    files.insert(role.to_string(), rel.to_string());
    Ok(())
}

/// Render every sample of the split into `out_dir` and return the manifest,
/// which is also written to `out_dir/manifest.jsonl`. The resolved config is
/// echoed to `out_dir/dataset.json` so a build records its own provenance,
/// including the switching time scale.
pub fn build_dataset(cfg: &DatasetCfg, out_dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    for sub in ["audio", "visual", "text"] {
        fs::create_dir_all(out_dir.join(sub))
            .io_ctx(format!("creating {}", out_dir.join(sub).display()))?;
    }

    let mut manifest = Manifest::default();
    for i in 0..cfg.n_samples {
        let sample_seed = derive_seed(cfg.seed, &format!("sample.{}.{i}", cfg.name));
        let sample = if cfg.switching {
            make_switching_sample(&cfg.sample, sample_seed)?
        } else {
            make_mixture_sample(&cfg.sample, sample_seed)?
        };

        let id = format!("{}-{i:05}", cfg.name);
        let mut files = BTreeMap::new();
        write_wav_rel(
            out_dir,
            &format!("audio/{id}.mix.wav"),
            &sample.mixture,
            &mut files,
            "mixture",
        )?;
        for (j, t) in sample.targets.iter().enumerate() {
            write_wav_rel(
                out_dir,
                &format!("audio/{id}.t{j}.wav"),
                &t.audio,
                &mut files,
                &format!("target{j}"),
            )?;
            let vis_rel = format!("visual/{id}.v{j}.elvs");
            write_elvs(&t.visual, &out_dir.join(&vis_rel))?;
            files.insert(format!("visual{j}"), vis_rel);
            let txt_rel = format!("text/{id}.t{j}.txt");
            fs::write(out_dir.join(&txt_rel), t.transcript.as_bytes())
                .io_ctx(format!("writing {}", out_dir.join(&txt_rel).display()))?;
            files.insert(format!("transcript{j}"), txt_rel);
        }
        for (k, w) in sample.interferers.iter().enumerate() {
            write_wav_rel(
                out_dir,
                &format!("audio/{id}.i{k}.wav"),
                w,
                &mut files,
                &format!("interferer{k}"),
            )?;
        }

        manifest.records.push(ManifestRecord {
            sample_id: id,
            files,
            scenario: sample.scenario,
            seed: sample_seed,
            snr_db: sample.snr_db.clone(),
            impairment_ratio: sample.targets[0].impairment.map(|(_, r)| r),
            language_tags: sample.language_tags(),
            switch_point_s: sample.switch_point_s,
        });
    }

    manifest.save(&out_dir.join("manifest.jsonl"))?;
    let cfg_json = serde_json::to_string_pretty(cfg)
        .map_err(|e| Error::config(format!("encoding dataset config: {e}")))?;
    fs::write(out_dir.join("dataset.json"), cfg_json + "\n")
        .io_ctx(format!("writing {}", out_dir.join("dataset.json").display()))?;
    manifest.validate(out_dir)?;
    Ok(manifest)
}

//! Visual feature streams standing in for lip-crop embeddings, their
//! impairments, and the ELVS binary file format.
//!
//! Each frame carries five envelope channels derived from the audio (one
//! compressed energy envelope plus four low-band magnitudes, the lip-sync
//! information) and `d_v - 5` identity channels (a seeded constant embedding
//! per speaker).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};
use crate::seeds::rng_for;
use crate::signal::Waveform;

use super::speaker::SpeakerSpec;

/// Center frequencies of the four low-band magnitude channels.
pub const LOW_BAND_HZ: [f64; 4] = [200.0, 400.0, 800.0, 1600.0];
/// Envelope channels per frame: one energy envelope plus four band magnitudes.
pub const ENVELOPE_CHANNELS: usize = 5;

pub const DEFAULT_FPS: f64 = 25.0;
pub const DEFAULT_DV: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ImpairmentKind {
    Occluded,
    LowRes,
    Missing,
}

impl ImpairmentKind {
    pub const ALL: [ImpairmentKind; 3] = [
        ImpairmentKind::Occluded,
        ImpairmentKind::LowRes,
        ImpairmentKind::Missing,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ImpairmentKind::Occluded => "OCCLUDED",
            ImpairmentKind::LowRes => "LOW_RES",
            ImpairmentKind::Missing => "MISSING",
        }
    }

    fn mask_code(kind: Option<ImpairmentKind>) -> u8 {
        match kind {
            None => 0,
            Some(ImpairmentKind::Occluded) => 1,
            Some(ImpairmentKind::LowRes) => 2,
            Some(ImpairmentKind::Missing) => 3,
        }
    }

    fn from_mask_code(code: u8) -> Option<Option<ImpairmentKind>> {
        match code {
            0 => Some(None),
            1 => Some(Some(ImpairmentKind::Occluded)),
            2 => Some(Some(ImpairmentKind::LowRes)),
            3 => Some(Some(ImpairmentKind::Missing)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VisualStream {
    /// (F, d_v) feature matrix, one row per video frame.
    pub features: Array2<f64>,
    pub fps: f64,
    /// Per-frame impairment record; `None` marks a clean frame.
    pub mask: Vec<Option<ImpairmentKind>>,
}

impl VisualStream {
    pub fn n_frames(&self) -> usize {
        self.features.nrows()
    }

    pub fn d_v(&self) -> usize {
        self.features.ncols()
    }

    pub fn duration_s(&self) -> f64 {
        self.n_frames() as f64 / self.fps
    }

    pub fn is_clean(&self) -> bool {
        self.mask.iter().all(|m| m.is_none())
    }

    pub fn n_impaired(&self) -> usize {
        self.mask.iter().filter(|m| m.is_some()).count()
    }
}

/// Compress a nonnegative magnitude into a bounded log-domain value. Zero
/// input stays exactly zero, which keeps silent frames at the floor.
fn compress(x: f64) -> f64 {
    (1.0 + 10.0 * x).ln()
}

/// Derive the visual stream coupled to a source waveform. The seed fixes the
/// identity channels; pass the same seed for every sample in a corpus so a
/// speaker's embedding stays constant across samples.
pub fn derive_visual_stream(
    source: &Waveform,
    spec: &SpeakerSpec,
    fps: f64,
    d_v: usize,
    seed: u64,
) -> Result<VisualStream> {
    if d_v < 8 {
        return Err(Error::contract(format!(
            "d_v must be at least 8 ({ENVELOPE_CHANNELS} envelope channels plus identity), got {d_v}"
        )));
    }
    if !fps.is_finite() || fps <= 0.0 {
        return Err(Error::contract(format!("fps must be positive, got {fps}")));
    }
    let n_frames = (source.duration_s() * fps).round() as usize;
    if n_frames == 0 {
        return Err(Error::domain(format!(
            "source of {:.4} s yields no frames at {fps} fps",
            source.duration_s()
        )));
    }

    let mut embedding_rng = rng_for(seed, &format!("visual.embedding.{}", spec.speaker_id));
    let embedding: Vec<f64> = (0..d_v - ENVELOPE_CHANNELS)
        .map(|_| embedding_rng.gen_range(-1.0..1.0))
        .collect();

    let rate = source.sample_rate() as f64;
    let samples = source.samples();
    let mut features = Array2::zeros((n_frames, d_v));
    for f in 0..n_frames {
        let start = ((f as f64 * rate) / fps).floor() as usize;
        let end = (((f + 1) as f64 * rate) / fps).floor() as usize;
        let start = start.min(samples.len());
        let end = end.min(samples.len());
        let frame = &samples[start..end];

        let mut row = features.row_mut(f);
        if !frame.is_empty() {
            let energy = frame.iter().map(|x| x * x).sum::<f64>() / frame.len() as f64;
            row[0] = compress(energy);
            for (j, f_hz) in LOW_BAND_HZ.iter().enumerate() {
                let omega = 2.0 * std::f64::consts::PI * f_hz / rate;
                let mut c = 0.0;
                let mut s = 0.0;
                for (i, &x) in frame.iter().enumerate() {
                    let theta = omega * (start + i) as f64;
                    c += x * theta.cos();
                    s += x * theta.sin();
                }
                let amp = 2.0 * (c * c + s * s).sqrt() / frame.len() as f64;
                row[1 + j] = compress(amp);
            }
        }
        for (j, &e) in embedding.iter().enumerate() {
            row[ENVELOPE_CHANNELS + j] = e;
        }
    }

    Ok(VisualStream {
        features,
        fps,
        mask: vec![None; n_frames],
    })
}

/// Degrade a contiguous stretch of `round(ratio * F)` frames. `ratio` 0 is
/// the identity; the start frame, the occluded dimension block, and the
/// low-resolution noise are all drawn from streams derived from `seed`.
pub fn apply_visual_impairment(
    stream: &VisualStream,
    kind: ImpairmentKind,
    ratio: f64,
    seed: u64,
) -> Result<VisualStream> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::contract(format!(
            "impairment ratio must lie in [0, 1], got {ratio}"
        )));
    }
    let n_frames = stream.n_frames();
    let n_hit = (ratio * n_frames as f64).round() as usize;
    if n_hit == 0 {
        return Ok(stream.clone());
    }

    let start = rng_for(seed, "impair.start").gen_range(0..=n_frames - n_hit);
    let hit = start..start + n_hit;
    let d_v = stream.d_v();
    let mut out = stream.clone();

    match kind {
        ImpairmentKind::Missing => {
            for f in hit.clone() {
                out.features.row_mut(f).fill(0.0);
            }
        }
        ImpairmentKind::Occluded => {
            let mut rng = rng_for(seed, "impair.occluded");
            let block = d_v / 2;
            let dim_start = rng.gen_range(0..=d_v - block);
            let obstacle: Vec<f64> = (0..block).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for f in hit.clone() {
                for (j, &v) in obstacle.iter().enumerate() {
                    out.features[(f, dim_start + j)] = v;
                }
            }
        }
        ImpairmentKind::LowRes => {
            // Per-dimension noise scale from the clean stream's statistics.
            let mut sigma = vec![0.0; d_v];
            for d in 0..d_v {
                let col = stream.features.column(d);
                let mean = col.mean().unwrap();
                let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
                    / n_frames as f64;
                sigma[d] = 0.5 * var.sqrt();
            }
            let mut rng = rng_for(seed, "impair.lowres");
            let unit = Normal::new(0.0, 1.0).unwrap();
            for f in hit.clone() {
                for d in 0..d_v {
                    let lo = f.saturating_sub(1);
                    let hi = (f + 1).min(n_frames - 1);
                    let mut acc = 0.0;
                    for g in lo..=hi {
                        acc += stream.features[(g, d)];
                    }
                    let blurred = acc / (hi - lo + 1) as f64;
                    out.features[(f, d)] = blurred + sigma[d] * unit.sample(&mut rng);
                }
            }
        }
    }

    for f in hit {
        out.mask[f] = Some(kind);
    }
    Ok(out)
}

const ELVS_MAGIC: [u8; 4] = *b"ELVS";
const ELVS_VERSION: u16 = 1;

/// Write a stream in the ELVS format: a 16-byte header (magic "ELVS",
/// version u16, frame count u32, d_v u16, fps f32, little endian) followed by
/// the feature matrix as row-major f32 and one impairment-mask byte per frame.
pub fn write_elvs(stream: &VisualStream, path: &Path) -> Result<()> {
    let file = File::create(path).io_ctx(format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    let ctx = || format!("writing {}", path.display());
    if stream.d_v() > u16::MAX as usize {
        return Err(Error::contract(format!(
            "d_v {} does not fit the ELVS header",
            stream.d_v()
        )));
    }
    w.write_all(&ELVS_MAGIC).io_ctx(ctx())?;
    w.write_u16::<LittleEndian>(ELVS_VERSION).io_ctx(ctx())?;
    w.write_u32::<LittleEndian>(stream.n_frames() as u32).io_ctx(ctx())?;
    w.write_u16::<LittleEndian>(stream.d_v() as u16).io_ctx(ctx())?;
    w.write_f32::<LittleEndian>(stream.fps as f32).io_ctx(ctx())?;
    for &x in stream.features.iter() {
        w.write_f32::<LittleEndian>(x as f32).io_ctx(ctx())?;
    }
    for &m in &stream.mask {
        w.write_u8(ImpairmentKind::mask_code(m)).io_ctx(ctx())?;
    }
    w.flush().io_ctx(ctx())
}

pub fn read_elvs(path: &Path) -> Result<VisualStream> {
    let file = File::open(path).io_ctx(format!("opening {}", path.display()))?;
    let mut r = BufReader::new(file);
    let ctx = || format!("reading {}", path.display());

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).io_ctx(ctx())?;
    if magic != ELVS_MAGIC {
        return Err(Error::format(path, "bad magic, not an ELVS file"));
    }
    let version = r.read_u16::<LittleEndian>().io_ctx(ctx())?;
    if version != ELVS_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported ELVS version {version}, expected {ELVS_VERSION}"),
        ));
    }
    let n_frames = r.read_u32::<LittleEndian>().io_ctx(ctx())? as usize;
    let d_v = r.read_u16::<LittleEndian>().io_ctx(ctx())? as usize;
    let fps = r.read_f32::<LittleEndian>().io_ctx(ctx())? as f64;
    if n_frames == 0 || d_v == 0 {
        return Err(Error::format(path, "empty frame or feature dimensions"));
    }

    let mut features = Array2::zeros((n_frames, d_v));
    for f in 0..n_frames {
        for d in 0..d_v {
            features[(f, d)] = r.read_f32::<LittleEndian>().io_ctx(ctx())? as f64;
        }
    }
    let mut mask = Vec::with_capacity(n_frames);
    for _ in 0..n_frames {
        let code = r.read_u8().io_ctx(ctx())?;
        let kind = ImpairmentKind::from_mask_code(code)
            .ok_or_else(|| Error::format(path, format!("unknown impairment-mask code {code}")))?;
        mask.push(kind);
    }
    let mut trailing = [0u8; 1];
    match r.read(&mut trailing).io_ctx(ctx())? {
        0 => Ok(VisualStream { features, fps, mask }),
        _ => Err(Error::format(path, "trailing bytes after the mask section")),
    }
}

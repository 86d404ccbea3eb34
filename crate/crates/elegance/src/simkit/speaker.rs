//! Deterministic speaker pool: a pool seed plus a speaker id fully determine
//! the voice parameters, so datasets regenerate bit-identically.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seeds::rng_for;

/// Language tag. It affects nothing but the character distribution of the
/// transcripts sampled for a speaker.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Language {
    En,
    Es,
    Fr,
    It,
    Pt,
}

const EN_LETTERS: [char; 26] = [
    'a', 'b', 'c', 'd', 'e', 'f', 'g', 'h', 'i', 'j', 'k', 'l', 'm', 'n', 'o', 'p', 'q', 'r',
    's', 't', 'u', 'v', 'w', 'x', 'y', 'z',
];
const ES_LETTERS: [char; 33] = [
    'a', 'b', 'c', 'd', 'e', 'f', 'g', 'h', 'i', 'j', 'k', 'l', 'm', 'n', 'o', 'p', 'q', 'r',
    's', 't', 'u', 'v', 'w', 'x', 'y', 'z', 'á', 'é', 'í', 'ó', 'ú', 'ñ', 'ü',
];
const FR_LETTERS: [char; 39] = [
    'a', 'b', 'c', 'd', 'e', 'f', 'g', 'h', 'i', 'j', 'k', 'l', 'm', 'n', 'o', 'p', 'q', 'r',
    's', 't', 'u', 'v', 'w', 'x', 'y', 'z', 'à', 'â', 'ç', 'è', 'é', 'ê', 'ë', 'î', 'ï', 'ô',
    'ù', 'û', 'ü',
];
const IT_LETTERS: [char; 32] = [
    'a', 'b', 'c', 'd', 'e', 'f', 'g', 'h', 'i', 'j', 'k', 'l', 'm', 'n', 'o', 'p', 'q', 'r',
    's', 't', 'u', 'v', 'w', 'x', 'y', 'z', 'à', 'è', 'é', 'ì', 'ò', 'ù',
];
const PT_LETTERS: [char; 37] = [
    'a', 'b', 'c', 'd', 'e', 'f', 'g', 'h', 'i', 'j', 'k', 'l', 'm', 'n', 'o', 'p', 'q', 'r',
    's', 't', 'u', 'v', 'w', 'x', 'y', 'z', 'á', 'â', 'ã', 'ç', 'é', 'ê', 'í', 'ó', 'ô', 'õ',
    'ú',
];

impl Language {
    pub const ALL: [Language; 5] = [
        Language::En,
        Language::Es,
        Language::Fr,
        Language::It,
        Language::Pt,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Language::En => "EN",
            Language::Es => "ES",
            Language::Fr => "FR",
            Language::It => "IT",
            Language::Pt => "PT",
        }
    }

    /// Characters a transcript in this language draws from. The accented
    /// letters are what make the per-language distributions separable.
    pub fn letters(&self) -> &'static [char] {
        match self {
            Language::En => &EN_LETTERS,
            Language::Es => &ES_LETTERS,
            Language::Fr => &FR_LETTERS,
            Language::It => &IT_LETTERS,
            Language::Pt => &PT_LETTERS,
        }
    }
}

impl std::fmt::Display for Language {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeakerSpec {
    pub speaker_id: u32,
    /// Fundamental frequency of the voiced harmonic stack, in 80..300 Hz.
    pub base_pitch_hz: f64,
    /// Three offsets in [-1, 1] that color the per-character amplitude
    /// patterns, standing in for vocal-tract differences.
    pub formant_offsets: [f64; 3],
    pub language: Language,
}

/// Voice parameters for one pool member. Languages rotate through the pool
/// so every tag keeps several speakers even in a 16-speaker toy pool; pitch
/// and formant offsets come from a stream seeded by (pool_seed, speaker_id).
pub fn speaker_spec(pool_seed: u64, speaker_id: u32) -> SpeakerSpec {
    let mut rng = rng_for(pool_seed, &format!("speaker.{speaker_id}"));
    let base_pitch_hz = rng.gen_range(80.0..300.0);
    let formant_offsets = [
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    ];
    let language = Language::ALL[speaker_id as usize % Language::ALL.len()];
    SpeakerSpec {
        speaker_id,
        base_pitch_hz,
        formant_offsets,
        language,
    }
}

/// Pool member ids carrying the given language tag.
pub fn speakers_with_language(n_speakers: u32, language: Language) -> Vec<u32> {
    let lang_idx = Language::ALL.iter().position(|&l| l == language).unwrap() as u32;
    (0..n_speakers)
        .filter(|id| id % Language::ALL.len() as u32 == lang_idx)
        .collect()
}

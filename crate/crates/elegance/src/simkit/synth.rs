//! Text-to-waveform synthesis. Audio is a deterministic function of
//! (speaker, transcript, seed): each character becomes a 60..120 ms segment
//! (a harmonic stack with a character-dependent amplitude pattern, or a noise
//! burst for fricative-class characters), segments crossfade over 10 ms, and
//! the result is padded or trimmed to the requested duration. Because the
//! text fully determines the audio, linguistic guidance has real signal to
//! extract at toy scale.

use rand::Rng;

use crate::error::{Error, Result};
use crate::lmcore::alphabet;
use crate::seeds::rng_for;
use crate::signal::Waveform;

use super::speaker::{Language, SpeakerSpec};

/// Characters rendered as unvoiced noise bursts instead of harmonic stacks.
pub const FRICATIVES: [char; 7] = ['s', 'f', 'z', 'x', 'h', 'j', 'c'];

const N_HARMONICS: usize = 10;
const CROSSFADE_S: f64 = 0.010;
const MASTER_GAIN: f64 = 0.3;
const VIBRATO_HZ: f64 = 5.0;
const VIBRATO_DEPTH: f64 = 0.015;
/// Faint noise floor under voiced segments, for spectral realism.
const ASPIRATION_NOISE: f64 = 0.02;

/// Per-segment synthesis parameters: harmonic amplitudes plus a noise gain.
/// Crossfades interpolate these linearly, which keeps the carrier phase
/// continuous across segment boundaries.
#[derive(Clone, Copy)]
struct SegmentParams {
    voiced: [f64; N_HARMONICS],
    noise: f64,
}

const SILENCE: SegmentParams = SegmentParams {
    voiced: [0.0; N_HARMONICS],
    noise: 0.0,
};

fn lerp(a: &SegmentParams, b: &SegmentParams, w: f64) -> SegmentParams {
    let mut voiced = [0.0; N_HARMONICS];
    for k in 0..N_HARMONICS {
        voiced[k] = a.voiced[k] + (b.voiced[k] - a.voiced[k]) * w;
    }
    SegmentParams {
        voiced,
        noise: a.noise + (b.noise - a.noise) * w,
    }
}

/// Segment duration for the character at the given alphabet index: 60..120 ms.
fn char_duration_s(alphabet_index: usize) -> f64 {
    (60 + (alphabet_index * 7) % 61) as f64 / 1000.0
}

fn char_segment_params(spec: &SpeakerSpec, alphabet_index: usize, c: char) -> SegmentParams {
    if c == ' ' {
        return SILENCE;
    }
    if FRICATIVES.contains(&c) {
        let g = 0.5
            + 0.5
                * ((alphabet_index as f64 + 1.0) * 0.9
                    + spec.formant_offsets[alphabet_index % 3])
                .sin();
        let mut p = SILENCE;
        p.noise = 0.6 + 0.3 * g;
        return p;
    }
    let mut voiced = [0.0; N_HARMONICS];
    for k in 1..=N_HARMONICS {
        let g = 0.5
            + 0.5
                * ((alphabet_index as f64 + 1.0) * (k as f64 + 1.0) * 0.7
                    + 2.0 * spec.formant_offsets[k % 3])
                .sin();
        // The 1/k^1.2 rolloff keeps the fundamental strictly dominant: the
        // k = 1 amplitude is at least 0.6 while k >= 2 never exceeds 0.44.
        voiced[k - 1] = (0.6 + 0.4 * g) / (k as f64).powf(1.2);
    }
    SegmentParams {
        voiced,
        noise: ASPIRATION_NOISE,
    }
}

/// Total speech time the transcript occupies before padding or trimming.
pub fn speech_duration_s(transcript: &str) -> Result<f64> {
    let mut total = 0.0;
    for c in transcript.chars() {
        let idx = alphabet::char_index(c)
            .ok_or_else(|| Error::domain(format!("character {c:?} is outside the alphabet")))?;
        total += char_duration_s(idx);
    }
    Ok(total)
}

/// Render a transcript as a waveform of exactly `duration_s * sample_rate`
/// (rounded) samples, padding with silence or trimming as needed.
pub fn synth_utterance(
    spec: &SpeakerSpec,
    transcript: &str,
    duration_s: f64,
    sample_rate: u32,
    seed: u64,
) -> Result<Waveform> {
    if !duration_s.is_finite() || duration_s <= 0.0 {
        return Err(Error::contract(format!(
            "utterance duration must be positive, got {duration_s}"
        )));
    }
    let len = (duration_s * sample_rate as f64).round() as usize;
    synth_to_len(spec, transcript, len, sample_rate, seed)
}

/// Same as [`synth_utterance`] but with the length fixed in samples, so
/// callers that stitch regions together avoid rounding drift.
pub(crate) fn synth_to_len(
    spec: &SpeakerSpec,
    transcript: &str,
    len: usize,
    sample_rate: u32,
    seed: u64,
) -> Result<Waveform> {
    if transcript.is_empty() {
        return Err(Error::contract("transcript must be non-empty"));
    }
    if len == 0 {
        return Err(Error::contract("utterance length must be at least one sample"));
    }
    let rate = sample_rate as f64;

    // Segment table: start sample and parameters per character, plus a
    // trailing silence segment so the last character fades out into padding.
    let mut starts = Vec::new();
    let mut params = Vec::new();
    let mut t_acc = 0.0;
    for c in transcript.chars() {
        let idx = alphabet::char_index(c)
            .ok_or_else(|| Error::domain(format!("character {c:?} is outside the alphabet")))?;
        starts.push((t_acc * rate).round() as usize);
        params.push(char_segment_params(spec, idx, c));
        t_acc += char_duration_s(idx);
    }
    starts.push((t_acc * rate).round() as usize);
    params.push(SILENCE);

    let fade = ((CROSSFADE_S * rate).round() as usize).max(1);
    let mut noise_rng = rng_for(seed, "synth.noise");
    let omega_vibrato = 2.0 * std::f64::consts::PI * VIBRATO_HZ / rate;

    let mut samples = vec![0.0; len];
    let mut phase = 0.0;
    let mut seg = 0usize;
    for t in 0..len {
        let f_inst = spec.base_pitch_hz * (1.0 + VIBRATO_DEPTH * (omega_vibrato * t as f64).sin());
        phase += 2.0 * std::f64::consts::PI * f_inst / rate;
        // Wrapping shifts each harmonic's argument by a multiple of 2*pi,
        // so the waveform is unchanged and precision stays put.
        phase %= 2.0 * std::f64::consts::PI;

        while seg + 1 < starts.len() && t >= starts[seg + 1] {
            seg += 1;
        }
        let dt = t - starts[seg];
        let p = if dt < fade {
            let prev = if seg == 0 { &SILENCE } else { &params[seg - 1] };
            lerp(prev, &params[seg], (dt + 1) as f64 / fade as f64)
        } else {
            params[seg]
        };

        let mut v = 0.0;
        for k in 1..=N_HARMONICS {
            let a = p.voiced[k - 1];
            if a != 0.0 {
                v += a * (k as f64 * phase).sin();
            }
        }
        let n = noise_rng.gen_range(-1.0..1.0);
        samples[t] = MASTER_GAIN * (v + p.noise * n);
    }

    // Taper the final crossfade-length stretch so a transcript trimmed mid
    // speech does not end on a click. On trailing silence this is a no-op.
    if len > fade {
        for j in 0..fade {
            samples[len - fade + j] *= 1.0 - (j + 1) as f64 / fade as f64;
        }
    }

    let peak = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak > 0.99 {
        let s = 0.99 / peak;
        for x in &mut samples {
            *x *= s;
        }
    }
    Waveform::new(samples, sample_rate)
}

/// Sample a transcript in the given language with at least `min_speech_s`
/// of synthesized speech: words of 2..=7 letters drawn uniformly from the
/// language's letter set, separated by spaces.
pub fn sample_transcript(
    language: Language,
    min_speech_s: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> String {
    let letters = language.letters();
    let mut text = String::new();
    let mut speech_s = 0.0;
    while speech_s < min_speech_s {
        if !text.is_empty() {
            text.push(' ');
            speech_s += char_duration_s(alphabet::char_index(' ').unwrap());
        }
        let word_len = rng.gen_range(2..=7);
        for _ in 0..word_len {
            let c = letters[rng.gen_range(0..letters.len())];
            text.push(c);
            speech_s += char_duration_s(alphabet::char_index(c).unwrap());
        }
    }
    text
}

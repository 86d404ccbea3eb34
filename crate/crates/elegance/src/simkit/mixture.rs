//! Mixture scenario construction. Planning (speaker, transcript, SNR, and
//! impairment draws) is split from rendering so distributional checks can run
//! on thousands of plans without synthesizing audio.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::{derive_seed, rng_for};
use crate::signal::{mix_at_snr, Waveform};

use super::speaker::{speaker_spec, speakers_with_language, Language, SpeakerSpec};
use super::synth::{sample_transcript, synth_to_len, synth_utterance};
use super::visual::{
    apply_visual_impairment, derive_visual_stream, ImpairmentKind, VisualStream, DEFAULT_DV,
    DEFAULT_FPS,
};

pub const SNR_RANGE_DB: (f64, f64) = (-10.0, 10.0);
/// Unscaled switching-scenario timing: minimum duration and switch window.
pub const SWITCH_MIN_DURATION_S: f64 = 16.0;
pub const SWITCH_WINDOW_S: (f64, f64) = (6.0, 8.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Scenario {
    Core,
    Impaired,
    Monolingual,
    Switching,
    ThreeSpk,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::Core => "CORE",
            Scenario::Impaired => "IMPAIRED",
            Scenario::Monolingual => "MONOLINGUAL",
            Scenario::Switching => "SWITCHING",
            Scenario::ThreeSpk => "THREE_SPK",
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything a single sample draw depends on besides its seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleCfg {
    pub sample_rate: u32,
    pub duration_s: f64,
    pub fps: f64,
    pub d_v: usize,
    pub n_interferers: usize,
    /// Force every speaker in the sample to one language.
    pub monolingual: Option<Language>,
    /// Draw an impairment (kind equiprobable, ratio uniform on [0, 1]) for
    /// the target's visual stream. The same policy serves train and test.
    pub impair: bool,
    /// Common factor scaling the switching scenario's 16 s duration and
    /// [6, 8] s switch window down to toy size.
    pub time_scale: f64,
    pub n_speakers: u32,
    pub pool_seed: u64,
}

impl Default for SampleCfg {
    fn default() -> Self {
        SampleCfg {
            sample_rate: 8000,
            duration_s: 2.0,
            fps: DEFAULT_FPS,
            d_v: DEFAULT_DV,
            n_interferers: 1,
            monolingual: None,
            impair: false,
            time_scale: 0.125,
            n_speakers: 16,
            pool_seed: 0xE1E6,
        }
    }
}

impl SampleCfg {
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.n_interferers) {
            return Err(Error::config(format!(
                "n_interferers must be 1 or 2, got {}",
                self.n_interferers
            )));
        }
        if !self.duration_s.is_finite() || self.duration_s <= 0.0 {
            return Err(Error::config(format!(
                "duration_s must be positive, got {}",
                self.duration_s
            )));
        }
        if !self.time_scale.is_finite() || self.time_scale <= 0.0 {
            return Err(Error::config(format!(
                "time_scale must be positive, got {}",
                self.time_scale
            )));
        }
        let needed = self.n_interferers as u32 + 2;
        if self.n_speakers < needed {
            return Err(Error::config(format!(
                "speaker pool of {} cannot cover {} distinct speakers",
                self.n_speakers, needed
            )));
        }
        if let Some(lang) = self.monolingual {
            let available = speakers_with_language(self.n_speakers, lang).len();
            if (available as u32) < needed {
                return Err(Error::config(format!(
                    "pool has only {available} {lang} speakers, need {needed}"
                )));
            }
        }
        Ok(())
    }
}

/// The random draws behind one sample, before any audio is rendered.
#[derive(Clone, Debug)]
pub struct SamplePlan {
    pub seed: u64,
    pub scenario: Scenario,
    pub target_speakers: Vec<SpeakerSpec>,
    pub interferer_speakers: Vec<SpeakerSpec>,
    /// Transcripts for the targets, then the interferers, in order.
    pub transcripts: Vec<String>,
    pub snr_db: Vec<f64>,
    pub impairment: Option<(ImpairmentKind, f64)>,
    pub switch_point_s: Option<f64>,
    pub duration_s: f64,
}

#[derive(Clone, Debug)]
pub struct TargetTrack {
    pub speaker: SpeakerSpec,
    /// Clean target audio over the full clip; zero outside the active region.
    pub audio: Waveform,
    pub transcript: String,
    pub visual: VisualStream,
    pub impairment: Option<(ImpairmentKind, f64)>,
    /// Active region in seconds; the whole clip except under SWITCHING.
    pub active_s: (f64, f64),
}

#[derive(Clone, Debug)]
pub struct MixtureSample {
    pub mixture: Waveform,
    pub targets: Vec<TargetTrack>,
    /// Interferers already scaled to their drawn SNR, so the mixture equals
    /// the plain sum of target and interferer tracks.
    pub interferers: Vec<Waveform>,
    pub interferer_speakers: Vec<SpeakerSpec>,
    pub snr_db: Vec<f64>,
    pub scenario: Scenario,
    pub seed: u64,
    pub switch_point_s: Option<f64>,
}

impl MixtureSample {
    /// Language tags of every speaker, targets first.
    pub fn language_tags(&self) -> Vec<Language> {
        self.targets
            .iter()
            .map(|t| t.speaker.language)
            .chain(self.interferer_speakers.iter().map(|s| s.language))
            .collect()
    }
}

/// Draw `n` distinct speakers for one sample, honoring a monolingual filter.
fn draw_speakers(cfg: &SampleCfg, seed: u64, n: usize) -> Vec<SpeakerSpec> {
    let mut ids = match cfg.monolingual {
        Some(lang) => speakers_with_language(cfg.n_speakers, lang),
        None => (0..cfg.n_speakers).collect(),
    };
    let mut rng = rng_for(seed, "sample.speakers");
    ids.shuffle(&mut rng);
    ids.truncate(n);
    ids.into_iter()
        .map(|id| speaker_spec(cfg.pool_seed, id))
        .collect()
}

fn draw_transcripts(speakers: &[SpeakerSpec], seed: u64, min_speech_s: f64) -> Vec<String> {
    speakers
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = rng_for(seed, &format!("sample.transcript.{i}"));
            sample_transcript(s.language, min_speech_s, &mut rng)
        })
        .collect()
}

pub fn plan_mixture_sample(cfg: &SampleCfg, seed: u64) -> Result<SamplePlan> {
    cfg.validate()?;
    let speakers = draw_speakers(cfg, seed, 1 + cfg.n_interferers);
    let transcripts = draw_transcripts(&speakers, seed, cfg.duration_s + 0.1);

    let mut snr_rng = rng_for(seed, "sample.snr");
    let snr_db: Vec<f64> = (0..cfg.n_interferers)
        .map(|_| snr_rng.gen_range(SNR_RANGE_DB.0..SNR_RANGE_DB.1))
        .collect();

    let impairment = if cfg.impair {
        let mut rng = rng_for(seed, "sample.impairment");
        let kind = ImpairmentKind::ALL[rng.gen_range(0..ImpairmentKind::ALL.len())];
        let ratio: f64 = rng.gen();
        Some((kind, ratio))
    } else {
        None
    };

    let scenario = if cfg.n_interferers == 2 {
        Scenario::ThreeSpk
    } else if impairment.is_some() {
        Scenario::Impaired
    } else if cfg.monolingual.is_some() {
        Scenario::Monolingual
    } else {
        Scenario::Core
    };

    Ok(SamplePlan {
        seed,
        scenario,
        target_speakers: vec![speakers[0].clone()],
        interferer_speakers: speakers[1..].to_vec(),
        transcripts,
        snr_db,
        impairment,
        switch_point_s: None,
        duration_s: cfg.duration_s,
    })
}

pub fn plan_switching_sample(cfg: &SampleCfg, seed: u64) -> Result<SamplePlan> {
    cfg.validate()?;
    if cfg.n_interferers != 1 {
        return Err(Error::config(
            "the switching scenario uses exactly one interferer",
        ));
    }
    let min_duration = SWITCH_MIN_DURATION_S * cfg.time_scale;
    if cfg.duration_s < min_duration - 1e-9 {
        return Err(Error::config(format!(
            "switching duration {} s is below the scaled minimum {min_duration} s",
            cfg.duration_s
        )));
    }

    let speakers = draw_speakers(cfg, seed, 3);
    let switch_point_s = rng_for(seed, "switch.point").gen_range(
        SWITCH_WINDOW_S.0 * cfg.time_scale..SWITCH_WINDOW_S.1 * cfg.time_scale,
    );

    // Targets fill their region; the interferer spans the whole clip.
    let region_margin = 0.1 * cfg.time_scale;
    let tr0 = {
        let mut rng = rng_for(seed, "sample.transcript.0");
        sample_transcript(speakers[0].language, switch_point_s + region_margin, &mut rng)
    };
    let tr1 = {
        let mut rng = rng_for(seed, "sample.transcript.1");
        sample_transcript(
            speakers[1].language,
            cfg.duration_s - switch_point_s + region_margin,
            &mut rng,
        )
    };
    let tr2 = {
        let mut rng = rng_for(seed, "sample.transcript.2");
        sample_transcript(speakers[2].language, cfg.duration_s + region_margin, &mut rng)
    };

    let snr_db = vec![rng_for(seed, "sample.snr").gen_range(SNR_RANGE_DB.0..SNR_RANGE_DB.1)];

    Ok(SamplePlan {
        seed,
        scenario: Scenario::Switching,
        target_speakers: speakers[..2].to_vec(),
        interferer_speakers: speakers[2..].to_vec(),
        transcripts: vec![tr0, tr1, tr2],
        snr_db,
        impairment: None,
        switch_point_s: Some(switch_point_s),
        duration_s: cfg.duration_s,
    })
}

/// Corpus-level seed for the identity channels, shared by every sample so a
/// speaker's embedding is stable across the dataset.
fn visual_seed(cfg: &SampleCfg) -> u64 {
    derive_seed(cfg.pool_seed, "visual")
}

pub fn make_mixture_sample(cfg: &SampleCfg, seed: u64) -> Result<MixtureSample> {
    let plan = plan_mixture_sample(cfg, seed)?;
    let target_spec = &plan.target_speakers[0];

    let target = synth_utterance(
        target_spec,
        &plan.transcripts[0],
        cfg.duration_s,
        cfg.sample_rate,
        derive_seed(seed, "synth.target.0"),
    )?;
    let interferer_waves: Vec<Waveform> = plan
        .interferer_speakers
        .iter()
        .zip(&plan.transcripts[1..])
        .enumerate()
        .map(|(k, (spec, tr))| {
            synth_utterance(
                spec,
                tr,
                cfg.duration_s,
                cfg.sample_rate,
                derive_seed(seed, &format!("synth.interferer.{k}")),
            )
        })
        .collect::<Result<_>>()?;

    let (mixture, gains) = mix_at_snr(&target, &interferer_waves, &plan.snr_db)?;
    let interferers: Vec<Waveform> = interferer_waves
        .iter()
        .zip(&gains)
        .map(|(w, &g)| w.scaled(g))
        .collect();

    let mut visual = derive_visual_stream(&target, target_spec, cfg.fps, cfg.d_v, visual_seed(cfg))?;
    if let Some((kind, ratio)) = plan.impairment {
        visual = apply_visual_impairment(&visual, kind, ratio, derive_seed(seed, "impair"))?;
    }

    Ok(MixtureSample {
        mixture,
        targets: vec![TargetTrack {
            speaker: target_spec.clone(),
            audio: target,
            transcript: plan.transcripts[0].clone(),
            visual,
            impairment: plan.impairment,
            active_s: (0.0, cfg.duration_s),
        }],
        interferers,
        interferer_speakers: plan.interferer_speakers,
        snr_db: plan.snr_db,
        scenario: plan.scenario,
        seed,
        switch_point_s: None,
    })
}

pub fn make_switching_sample(cfg: &SampleCfg, seed: u64) -> Result<MixtureSample> {
    let plan = plan_switching_sample(cfg, seed)?;
    let switch_point_s = plan.switch_point_s.unwrap();
    let rate = cfg.sample_rate as f64;
    let len = (cfg.duration_s * rate).round() as usize;
    let switch_sample = ((switch_point_s * rate).round() as usize).min(len - 1).max(1);

    // Each target is rendered at its region's exact sample length and placed
    // into a full-length buffer, zero elsewhere, so the stitched reference is
    // a plain elementwise sum.
    let clip0 = synth_to_len(
        &plan.target_speakers[0],
        &plan.transcripts[0],
        switch_sample,
        cfg.sample_rate,
        derive_seed(seed, "synth.target.0"),
    )?;
    let clip1 = synth_to_len(
        &plan.target_speakers[1],
        &plan.transcripts[1],
        len - switch_sample,
        cfg.sample_rate,
        derive_seed(seed, "synth.target.1"),
    )?;
    let mut t0 = clip0.into_samples();
    t0.resize(len, 0.0);
    let t0 = Waveform::new(t0, cfg.sample_rate)?;
    let mut t1 = vec![0.0; switch_sample];
    t1.extend_from_slice(clip1.samples());
    let t1 = Waveform::new(t1, cfg.sample_rate)?;

    let stitched = t0.add(&t1)?;

    let interferer_wave = synth_utterance(
        &plan.interferer_speakers[0],
        &plan.transcripts[2],
        cfg.duration_s,
        cfg.sample_rate,
        derive_seed(seed, "synth.interferer.0"),
    )?;
    let (mixture, gains) = mix_at_snr(&stitched, &[interferer_wave.clone()], &plan.snr_db)?;
    let interferers = vec![interferer_wave.scaled(gains[0])];

    let vseed = visual_seed(cfg);
    let visual0 = derive_visual_stream(&t0, &plan.target_speakers[0], cfg.fps, cfg.d_v, vseed)?;
    let visual1 = derive_visual_stream(&t1, &plan.target_speakers[1], cfg.fps, cfg.d_v, vseed)?;

    let switch_actual_s = switch_sample as f64 / rate;
    Ok(MixtureSample {
        mixture,
        targets: vec![
            TargetTrack {
                speaker: plan.target_speakers[0].clone(),
                audio: t0,
                transcript: plan.transcripts[0].clone(),
                visual: visual0,
                impairment: None,
                active_s: (0.0, switch_actual_s),
            },
            TargetTrack {
                speaker: plan.target_speakers[1].clone(),
                audio: t1,
                transcript: plan.transcripts[1].clone(),
                visual: visual1,
                impairment: None,
                active_s: (switch_actual_s, cfg.duration_s),
            },
        ],
        interferers,
        interferer_speakers: plan.interferer_speakers,
        snr_db: plan.snr_db,
        scenario: Scenario::Switching,
        seed,
        switch_point_s: Some(switch_point_s),
    })
}

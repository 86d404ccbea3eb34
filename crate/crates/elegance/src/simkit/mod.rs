//! Deterministic synthetic data: speech-like audio coupled to transcripts,
//! visual feature streams with impairments, and every mixture scenario the
//! evaluation suite covers.

pub mod dataset;
pub mod mixture;
pub mod speaker;
pub mod synth;
pub mod visual;

pub use dataset::{build_dataset, file_checksum, DatasetCfg, Manifest, ManifestRecord};
pub use mixture::{
    make_mixture_sample, make_switching_sample, plan_mixture_sample, plan_switching_sample,
    MixtureSample, SampleCfg, SamplePlan, Scenario, TargetTrack,
};
pub use speaker::{speaker_spec, Language, SpeakerSpec};
pub use synth::{sample_transcript, speech_duration_s, synth_utterance};
pub use visual::{
    apply_visual_impairment, derive_visual_stream, read_elvs, write_elvs, ImpairmentKind,
    VisualStream,
};

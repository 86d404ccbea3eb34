//! Waveform arithmetic, SNR-exact mixing, and the separation/intelligibility
//! metrics. Everything here is a pure function over `f64` samples.

mod mel;
mod metrics;
mod mix;
mod resample;
mod stoi;
mod wav;

pub use mel::{mel_band_centers, mel_spectrogram};
pub use metrics::{improvement, sdr, si_sdr, Db, Metric};
pub use mix::mix_at_snr;
pub use resample::resample;
pub use stoi::stoi;

use crate::error::{Error, Result};

/// Sample rates this project works with.
pub const SUPPORTED_RATES: [u32; 3] = [8000, 10000, 16000];

/// A mono waveform: dimensionless amplitude samples at a fixed rate.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::contract("waveform must contain at least one sample"));
        }
        if !SUPPORTED_RATES.contains(&sample_rate) {
            return Err(Error::contract(format!(
                "sample rate {sample_rate} not in supported set {SUPPORTED_RATES:?}"
            )));
        }
        if let Some(pos) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::contract(format!(
                "non-finite sample at index {pos}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// All-zero waveform of the given length.
    pub fn silence(len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Sum of squared samples.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Elementwise sum; lengths and rates must agree.
    pub fn add(&self, other: &Waveform) -> Result<Waveform> {
        self.check_compatible(other)?;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a + b)
            .collect();
        Waveform::new(samples, self.sample_rate)
    }

    pub fn scaled(&self, gain: f64) -> Waveform {
        Waveform {
            samples: self.samples.iter().map(|x| x * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Zero-pad at the end (or truncate) to exactly `len` samples.
    pub fn fit_length(&self, len: usize) -> Waveform {
        let mut samples = self.samples.clone();
        samples.resize(len, 0.0);
        Waveform {
            samples,
            sample_rate: self.sample_rate,
        }
    }

    pub(crate) fn check_compatible(&self, other: &Waveform) -> Result<()> {
        if self.sample_rate != other.sample_rate {
            return Err(Error::contract(format!(
                "sample rate mismatch: {} vs {}",
                self.sample_rate, other.sample_rate
            )));
        }
        if self.samples.len() != other.samples.len() {
            return Err(Error::contract(format!(
                "length mismatch: {} vs {}",
                self.samples.len(),
                other.samples.len()
            )));
        }
        Ok(())
    }
}

/// Names of the metrics reported per sample.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum MetricName {
    SiSdr,
    SiSdrI,
    SdrI,
    Stoi,
}

impl MetricName {
    pub fn as_str(&self) -> &'static str {
        match self {
            MetricName::SiSdr => "si_sdr",
            MetricName::SiSdrI => "si_sdr_i",
            MetricName::SdrI => "sdr_i",
            MetricName::Stoi => "stoi",
        }
    }
}

/// One named measurement. dB-valued metrics may carry the perfect flag; STOI
/// is unitless in [-1, 1] and never perfect-flagged.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct MetricValue {
    pub name: MetricName,
    /// dB for the SDR family (capped at 300 when perfect), unitless for STOI.
    pub value: f64,
    pub perfect: bool,
}

impl MetricValue {
    pub fn from_db(name: MetricName, db: Db) -> Self {
        Self {
            name,
            value: db.capped(),
            perfect: db.is_perfect(),
        }
    }

    pub fn stoi(value: f64) -> Self {
        debug_assert!((-1.0..=1.0).contains(&value));
        Self {
            name: MetricName::Stoi,
            value,
            perfect: false,
        }
    }
}

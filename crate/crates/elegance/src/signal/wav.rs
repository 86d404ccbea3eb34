//! WAV file I/O: mono, 16-bit PCM or 32-bit IEEE float.

use super::Waveform;
use crate::error::{Error, Result};
use std::path::Path;

impl Waveform {
    /// Write as mono 32-bit float WAV.
    pub fn write_wav(&self, path: &Path) -> Result<()> {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: self.sample_rate(),
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut writer = hound::WavWriter::create(path, spec)
            .map_err(|e| Error::format(path, format!("cannot create WAV: {e}")))?;
        for &s in self.samples() {
            writer
                .write_sample(s as f32)
                .map_err(|e| Error::format(path, format!("WAV write failed: {e}")))?;
        }
        writer
            .finalize()
            .map_err(|e| Error::format(path, format!("WAV finalize failed: {e}")))
    }

    /// Read a mono WAV holding 16-bit PCM or 32-bit float samples.
    pub fn read_wav(path: &Path) -> Result<Waveform> {
        let mut reader = hound::WavReader::open(path)
            .map_err(|e| Error::format(path, format!("cannot open WAV: {e}")))?;
        let spec = reader.spec();
        if spec.channels != 1 {
            return Err(Error::format(
                path,
                format!("expected mono audio, found {} channels", spec.channels),
            ));
        }
        let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
            (hound::SampleFormat::Float, 32) => reader
                .samples::<f32>()
                .map(|s| s.map(f64::from))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::format(path, format!("WAV decode failed: {e}")))?,
            (hound::SampleFormat::Int, 16) => reader
                .samples::<i16>()
                .map(|s| s.map(|v| f64::from(v) / 32768.0))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::format(path, format!("WAV decode failed: {e}")))?,
            (fmt, bits) => {
                return Err(Error::format(
                    path,
                    format!("unsupported WAV encoding: {bits}-bit {fmt:?}"),
                ))
            }
        };
        Waveform::new(samples, spec.sample_rate)
    }

    /// Read a WAV that must already be at `expected_rate`; a mismatch is an
    /// error rather than a silent resample.
    pub fn read_wav_at(path: &Path, expected_rate: u32) -> Result<Waveform> {
        let wave = Self::read_wav(path)?;
        if wave.sample_rate() != expected_rate {
            return Err(Error::format(
                path,
                format!(
                    "sample rate is {} Hz but {} Hz was required; resample explicitly",
                    wave.sample_rate(),
                    expected_rate
                ),
            ));
        }
        Ok(wave)
    }
}

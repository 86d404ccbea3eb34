//! Mel-scale power spectrograms for case-study figures.

use super::Waveform;
use crate::error::{Error, Result};
use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Center frequencies (Hz) of the `n_mels` triangular filters between 0 and
/// `sample_rate / 2`, mel-spaced. Exposed so tests and figure labels can
/// locate bands independently.
pub fn mel_band_centers(sample_rate: u32, n_mels: usize) -> Vec<f64> {
    let top = hz_to_mel(sample_rate as f64 / 2.0);
    (1..=n_mels)
        .map(|m| mel_to_hz(top * m as f64 / (n_mels + 1) as f64))
        .collect()
}

/// Linear-power mel spectrogram, shape (n_mels, 1 + (len - n_fft) / hop).
/// Frames are Hann-windowed; filters are triangles on the mel scale.
pub fn mel_spectrogram(
    wave: &Waveform,
    n_fft: usize,
    hop: usize,
    n_mels: usize,
) -> Result<Array2<f64>> {
    if n_fft == 0 || !n_fft.is_power_of_two() {
        return Err(Error::contract(format!("n_fft {n_fft} is not a power of two")));
    }
    if hop == 0 || hop > n_fft {
        return Err(Error::contract(format!("hop {hop} must be in 1..={n_fft}")));
    }
    if wave.len() < n_fft {
        return Err(Error::domain(format!(
            "waveform of {} samples is shorter than one {n_fft}-sample frame",
            wave.len()
        )));
    }

    let x = wave.samples();
    let n_frames = 1 + (x.len() - n_fft) / hop;
    let n_bins = n_fft / 2 + 1;
    let window: Vec<f64> = (0..n_fft)
        .map(|i| {
            let phase = 2.0 * std::f64::consts::PI * i as f64 / n_fft as f64;
            0.5 - 0.5 * phase.cos()
        })
        .collect();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n_fft);
    let mut power = Array2::zeros((n_bins, n_frames));
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    for t in 0..n_frames {
        for i in 0..n_fft {
            buf[i] = Complex::new(x[t * hop + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        for (b, c) in buf[..n_bins].iter().enumerate() {
            power[[b, t]] = c.norm_sqr();
        }
    }

    // triangular filters with mel-spaced corners
    let sr = wave.sample_rate() as f64;
    let top_mel = hz_to_mel(sr / 2.0);
    let corners: Vec<f64> = (0..n_mels + 2)
        .map(|m| mel_to_hz(top_mel * m as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz = |b: usize| b as f64 * sr / n_fft as f64;

    let mut out = Array2::zeros((n_mels, n_frames));
    for m in 0..n_mels {
        let (lo, mid, hi) = (corners[m], corners[m + 1], corners[m + 2]);
        for b in 0..n_bins {
            let f = bin_hz(b);
            let weight = if f <= lo || f >= hi {
                0.0
            } else if f <= mid {
                (f - lo) / (mid - lo)
            } else {
                (hi - f) / (hi - mid)
            };
            if weight > 0.0 {
                for t in 0..n_frames {
                    out[[m, t]] += weight * power[[b, t]];
                }
            }
        }
    }
    Ok(out)
}

//! Short-time objective intelligibility, following the published algorithm:
//! 10 kHz rate, silent-frame removal at a 40 dB dynamic range, 256-sample
//! frames with 50% overlap into a 512-point FFT, 15 one-third-octave bands
//! from 150 Hz, and averaged correlations over 30-frame segments.

use super::{resample, Waveform};
use crate::error::{Error, Result};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

const FS: u32 = 10000;
const N_FRAME: usize = 256;
const HOP: usize = 128;
const NFFT: usize = 512;
const N_BANDS: usize = 15;
const MIN_FREQ: f64 = 150.0;
const SEG_LEN: usize = 30;
const BETA: f64 = -15.0;
const DYN_RANGE: f64 = 40.0;
const EPS: f64 = f64::EPSILON;

/// Periodic-endpoint Hann window of length `N_FRAME` (the length-258 raised
/// cosine with both zero endpoints dropped).
fn window() -> Vec<f64> {
    (0..N_FRAME)
        .map(|i| {
            let phase = 2.0 * std::f64::consts::PI * (i + 1) as f64 / (N_FRAME + 1) as f64;
            0.5 - 0.5 * phase.cos()
        })
        .collect()
}

fn windowed_frames(x: &[f64], w: &[f64]) -> Vec<Vec<f64>> {
    if x.len() < N_FRAME {
        return Vec::new();
    }
    (0..=x.len() - N_FRAME)
        .step_by(HOP)
        .map(|start| {
            x[start..start + N_FRAME]
                .iter()
                .zip(w)
                .map(|(s, w)| s * w)
                .collect()
        })
        .collect()
}

/// Drop frames whose reference-signal energy sits more than DYN_RANGE dB
/// below the loudest frame, then overlap-add the survivors back into a pair
/// of shortened signals. The mask comes from the reference only.
fn remove_silent_frames(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let w = window();
    let xf = windowed_frames(x, &w);
    let yf = windowed_frames(y, &w);
    let energies: Vec<f64> = xf
        .iter()
        .map(|f| 20.0 * (f.iter().map(|v| v * v).sum::<f64>().sqrt() + EPS).log10())
        .collect();
    let max_e = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let keep: Vec<usize> = (0..xf.len())
        .filter(|&i| max_e - DYN_RANGE - energies[i] < 0.0)
        .collect();
    if keep.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let out_len = (keep.len() - 1) * HOP + N_FRAME;
    let mut xs = vec![0.0; out_len];
    let mut ys = vec![0.0; out_len];
    for (slot, &i) in keep.iter().enumerate() {
        for j in 0..N_FRAME {
            xs[slot * HOP + j] += xf[i][j];
            ys[slot * HOP + j] += yf[i][j];
        }
    }
    (xs, ys)
}

/// One-third-octave band matrix over the positive-frequency FFT bins. Band k
/// spans [150*2^((2k-1)/6), 150*2^((2k+1)/6)) Hz with edges snapped to the
/// nearest bin.
fn third_octave_bands() -> Vec<(usize, usize)> {
    let n_bins = NFFT / 2 + 1;
    let bin_hz = |i: usize| i as f64 * FS as f64 / NFFT as f64;
    let nearest_bin = |freq: f64| {
        (0..n_bins)
            .min_by(|&a, &b| {
                let da = (bin_hz(a) - freq).powi(2);
                let db = (bin_hz(b) - freq).powi(2);
                da.total_cmp(&db)
            })
            .unwrap()
    };
    (0..N_BANDS)
        .map(|k| {
            let low = MIN_FREQ * 2f64.powf((2.0 * k as f64 - 1.0) / 6.0);
            let high = MIN_FREQ * 2f64.powf((2.0 * k as f64 + 1.0) / 6.0);
            (nearest_bin(low), nearest_bin(high))
        })
        .collect()
}

/// Third-octave band envelopes: one row per band, one column per frame.
fn band_envelopes(x: &[f64]) -> Vec<Vec<f64>> {
    let w = window();
    let frames = windowed_frames(x, &w);
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(NFFT);
    let bands = third_octave_bands();
    let mut powers: Vec<Vec<f64>> = Vec::with_capacity(frames.len());
    let mut buf = vec![Complex::new(0.0, 0.0); NFFT];
    for frame in &frames {
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = Complex::new(if i < N_FRAME { frame[i] } else { 0.0 }, 0.0);
        }
        fft.process(&mut buf);
        powers.push(buf[..NFFT / 2 + 1].iter().map(|c| c.norm_sqr()).collect());
    }
    bands
        .iter()
        .map(|&(lo, hi)| {
            powers
                .iter()
                .map(|p| p[lo..hi].iter().sum::<f64>().sqrt())
                .collect()
        })
        .collect()
}

/// STOI of an estimate against its reference. Both must share length and
/// rate; anything not already at 10 kHz is resampled internally.
pub fn stoi(est: &Waveform, reference: &Waveform) -> Result<f64> {
    est.check_compatible(reference)?;
    let (x, y) = if reference.sample_rate() == FS {
        (reference.clone(), est.clone())
    } else {
        (resample(reference, FS)?, resample(est, FS)?)
    };
    let (xs, ys) = remove_silent_frames(x.samples(), y.samples());

    let min_samples = (SEG_LEN - 1) * HOP + N_FRAME;
    if xs.len() < min_samples {
        return Err(Error::domain(format!(
            "stoi needs at least {SEG_LEN} analysis frames ({min_samples} samples, \
             {:.0} ms at 10 kHz) of non-silent signal; got {} samples after \
             silent-frame removal",
            1000.0 * min_samples as f64 / FS as f64,
            xs.len()
        )));
    }

    let x_tob = band_envelopes(&xs);
    let y_tob = band_envelopes(&ys);
    let n_frames = x_tob[0].len();
    debug_assert!(n_frames >= SEG_LEN);

    let clip = 10f64.powf(-BETA / 20.0);
    let mut total = 0.0;
    let n_segments = n_frames - SEG_LEN + 1;
    for m in 0..n_segments {
        for band in 0..N_BANDS {
            let xb = &x_tob[band][m..m + SEG_LEN];
            let yb = &y_tob[band][m..m + SEG_LEN];
            let x_norm = xb.iter().map(|v| v * v).sum::<f64>().sqrt();
            let y_norm = yb.iter().map(|v| v * v).sum::<f64>().sqrt();
            let alpha = x_norm / (y_norm + EPS);
            let y_clipped: Vec<f64> = yb
                .iter()
                .zip(xb)
                .map(|(y, x)| (y * alpha).min(x * (1.0 + clip)))
                .collect();
            total += centered_correlation(xb, &y_clipped);
        }
    }
    Ok(total / (N_BANDS * n_segments) as f64)
}

fn centered_correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let ca: Vec<f64> = a.iter().map(|v| v - ma).collect();
    let cb: Vec<f64> = b.iter().map(|v| v - mb).collect();
    let na = ca.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = cb.iter().map(|v| v * v).sum::<f64>().sqrt();
    ca.iter()
        .zip(&cb)
        .map(|(x, y)| (x / (na + EPS)) * (y / (nb + EPS)))
        .sum()
}

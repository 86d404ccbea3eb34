//! Rational-ratio resampling with a Kaiser-windowed sinc filter.

use super::Waveform;
use crate::error::Result;

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Modified Bessel function of the first kind, order zero, by power series.
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-18 {
            break;
        }
    }
    sum
}

fn kaiser(i: i64, half_len: i64, beta: f64) -> f64 {
    let t = i as f64 / half_len as f64;
    bessel_i0(beta * (1.0 - t * t).max(0.0).sqrt()) / bessel_i0(beta)
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Resample to `to_rate` through the rational ratio L/M in lowest terms:
/// conceptually upsample by L, low-pass at the tighter of the two Nyquist
/// limits with a Kaiser-windowed sinc (beta 5.0, half length 10*max(L, M)
/// taps), and take every M-th sample. Output length is ceil(len*L/M).
pub fn resample(wave: &Waveform, to_rate: u32) -> Result<Waveform> {
    if wave.sample_rate() == to_rate {
        return Ok(wave.clone());
    }
    let g = gcd(wave.sample_rate(), to_rate);
    let l = (to_rate / g) as i64;
    let m = (wave.sample_rate() / g) as i64;
    let lm_max = l.max(m);
    let half_len = 10 * lm_max;
    let cutoff = 1.0 / lm_max as f64; // fraction of the upsampled Nyquist
    let beta = 5.0;

    // filter taps for offsets -half_len..=half_len in the upsampled grid
    let taps: Vec<f64> = (-half_len..=half_len)
        .map(|i| l as f64 * cutoff * sinc(cutoff * i as f64) * kaiser(i, half_len, beta))
        .collect();

    let x = wave.samples();
    let n_in = x.len() as i64;
    let n_out = (x.len() * l as usize).div_ceil(m as usize);
    let mut out = Vec::with_capacity(n_out);
    for j in 0..n_out as i64 {
        let pos = j * m; // center of the filter in the upsampled grid
        // nonzero upsampled samples sit at multiples of l
        let k_lo = (pos - half_len).div_euclid(l) + i64::from((pos - half_len).rem_euclid(l) != 0);
        let k_hi = (pos + half_len).div_euclid(l);
        let mut acc = 0.0;
        for k in k_lo.max(0)..=k_hi.min(n_in - 1) {
            acc += x[k as usize] * taps[(pos - k * l + half_len) as usize];
        }
        out.push(acc);
    }
    Waveform::new(out, to_rate)
}

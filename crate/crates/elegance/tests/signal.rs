//! Metric oracles: closed-form SI-SDR/SDR constructions, SNR round trips,
//! STOI behavior on speech-like synthetic signals, resampler tone checks,
//! and WAV round trips.

use elegance::signal::{
    improvement, mel_band_centers, mel_spectrogram, mix_at_snr, resample, sdr, si_sdr, stoi, Db,
    Metric, Waveform,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn zero_mean(mut v: Vec<f64>) -> Vec<f64> {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    for x in &mut v {
        *x -= m;
    }
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn energy(a: &[f64]) -> f64 {
    dot(a, a)
}

/// A zero-mean reference plus a noise component made exactly orthogonal to it
/// and scaled so that reference energy over noise energy hits `ratio`.
fn orthogonal_pair(len: usize, ratio: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let r = zero_mean(noise(len, seed));
    let mut n = zero_mean(noise(len, seed + 1));
    let proj = dot(&n, &r) / energy(&r);
    for (ni, ri) in n.iter_mut().zip(&r) {
        *ni -= proj * ri;
    }
    let scale = (energy(&r) / (ratio * energy(&n))).sqrt();
    for ni in &mut n {
        *ni *= scale;
    }
    (r, n)
}

/// Deterministic speech-like signal: a harmonic stack with drifting pitch and
/// a syllabic amplitude envelope. Built here independently of the library's
/// own synthesizer so STOI tests do not assume it.
fn speechy(len: usize, rate: u32, seed: u64) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f0 = rng.gen_range(100.0..220.0);
    let drift = rng.gen_range(-20.0f64..20.0);
    let syllable_hz = rng.gen_range(2.0..5.0);
    let mut samples = Vec::with_capacity(len);
    let mut phases = [0.0f64; 5];
    for i in 0..len {
        let t = i as f64 / rate as f64;
        let pitch = f0 + drift * t;
        let env = 0.55 + 0.45 * (2.0 * std::f64::consts::PI * syllable_hz * t).sin();
        let mut s = 0.0;
        for (k, phase) in phases.iter_mut().enumerate() {
            *phase += 2.0 * std::f64::consts::PI * pitch * (k + 1) as f64 / rate as f64;
            s += phase.sin() / (k + 1) as f64;
        }
        samples.push(0.3 * env * s);
    }
    Waveform::new(samples, rate).unwrap()
}

#[test]
fn si_sdr_hits_the_orthogonal_closed_form() {
    let (r, n) = orthogonal_pair(4000, 100.0, 11);
    let est: Vec<f64> = r.iter().zip(&n).map(|(a, b)| a + b).collect();
    let est = Waveform::new(est, 8000).unwrap();
    let reference = Waveform::new(r, 8000).unwrap();
    match si_sdr(&est, &reference).unwrap() {
        Db::Finite(v) => assert!((v - 20.0).abs() < 1e-6, "got {v}"),
        Db::Perfect => panic!("unexpected perfect"),
    }
}

#[test]
fn si_sdr_decomposition_is_exact() {
    // with est = ref + orthogonal noise, the value must be exactly the
    // energy ratio in dB
    for seed in 0..20 {
        let ratio = 10f64.powf(seed as f64 / 10.0 - 1.0);
        let (r, n) = orthogonal_pair(2500, ratio, 100 + seed);
        let est: Vec<f64> = r.iter().zip(&n).map(|(a, b)| a + b).collect();
        let est = Waveform::new(est, 8000).unwrap();
        let reference = Waveform::new(r.clone(), 8000).unwrap();
        let expect = 10.0 * (energy(&r) / energy(&n)).log10();
        match si_sdr(&est, &reference).unwrap() {
            Db::Finite(v) => assert!((v - expect).abs() < 1e-9, "{v} vs {expect}"),
            Db::Perfect => panic!("unexpected perfect"),
        }
    }
}

#[test]
fn si_sdr_perfect_cases() {
    let r = Waveform::new(noise(1000, 3), 8000).unwrap();
    assert_eq!(si_sdr(&r, &r).unwrap(), Db::Perfect);
    assert_eq!(si_sdr(&r.scaled(3.7), &r).unwrap(), Db::Perfect);
}

#[test]
fn si_sdr_is_scale_invariant_over_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..1000 {
        let len = 200;
        let r = Waveform::new(noise(len, 2000 + case), 8000).unwrap();
        let e = Waveform::new(noise(len, 3000 + case), 8000).unwrap();
        let a = rng.gen_range(0.01..100.0);
        let v1 = si_sdr(&e, &r).unwrap();
        let v2 = si_sdr(&e.scaled(a), &r).unwrap();
        match (v1, v2) {
            (Db::Finite(x), Db::Finite(y)) => {
                assert!((x - y).abs() < 1e-8, "case {case}: {x} vs {y}")
            }
            (a, b) => assert_eq!(a, b),
        }
    }
}

#[test]
fn si_sdr_rejects_degenerate_inputs() {
    let r = Waveform::new(noise(100, 5), 8000).unwrap();
    let flat = Waveform::new(vec![0.25; 100], 8000).unwrap();
    assert!(si_sdr(&r, &flat).is_err());
    assert!(si_sdr(&flat, &r).is_err());
    let short = Waveform::new(noise(99, 6), 8000).unwrap();
    assert!(si_sdr(&short, &r).is_err());
}

#[test]
fn sdr_closed_forms() {
    let r = Waveform::new(noise(1500, 7), 8000).unwrap();
    assert_eq!(sdr(&r, &r).unwrap(), Db::Perfect);

    // halving the signal leaves an error of half the reference
    match sdr(&r.scaled(0.5), &r).unwrap() {
        Db::Finite(v) => assert!((v - 20.0 * 2f64.log10()).abs() < 1e-4, "got {v}"),
        Db::Perfect => panic!("unexpected perfect"),
    }

    let (rr, n) = orthogonal_pair(1500, 10.0, 8);
    let est: Vec<f64> = rr.iter().zip(&n).map(|(a, b)| a + b).collect();
    match sdr(
        &Waveform::new(est, 8000).unwrap(),
        &Waveform::new(rr, 8000).unwrap(),
    )
    .unwrap()
    {
        Db::Finite(v) => assert!((v - 10.0).abs() < 1e-6, "got {v}"),
        Db::Perfect => panic!("unexpected perfect"),
    }
}

#[test]
fn improvement_identities() {
    let r = Waveform::new(noise(1200, 9), 8000).unwrap();
    let m = Waveform::new(noise(1200, 10), 8000).unwrap();
    // no processing: est == mix
    assert_eq!(
        improvement(Metric::SiSdr, &m, &m, &r).unwrap(),
        Db::Finite(0.0)
    );
    // perfect estimate against an imperfect mixture stays perfect
    assert_eq!(improvement(Metric::SiSdr, &r, &m, &r).unwrap(), Db::Perfect);
    // perfect against perfect: no room to improve
    assert_eq!(improvement(Metric::SiSdr, &r, &r, &r).unwrap(), Db::Finite(0.0));

    // cross-check against two independent calls
    let (rr, n) = orthogonal_pair(1200, 100.0, 12);
    let est: Vec<f64> = rr.iter().zip(&n).map(|(a, b)| a + b).collect();
    let est = Waveform::new(est, 8000).unwrap();
    let reference = Waveform::new(rr, 8000).unwrap();
    let (mix, _) = mix_at_snr(&reference, &[m.clone()], &[0.0]).unwrap();
    let direct = match (si_sdr(&est, &reference).unwrap(), si_sdr(&mix, &reference).unwrap()) {
        (Db::Finite(a), Db::Finite(b)) => a - b,
        _ => panic!("expected finite values"),
    };
    match improvement(Metric::SiSdr, &est, &mix, &reference).unwrap() {
        Db::Finite(v) => assert!((v - direct).abs() < 1e-12),
        Db::Perfect => panic!("unexpected perfect"),
    }
}

#[test]
fn mix_at_snr_gains_and_round_trip() {
    // equal energies: 0 dB gives unit gain, 10 dB gives 10^-0.5
    let t = Waveform::new(noise(800, 20), 8000).unwrap();
    let mut i1 = Waveform::new(noise(800, 21), 8000).unwrap();
    let scale = (t.energy() / i1.energy()).sqrt();
    i1 = i1.scaled(scale);
    let (_, gains) = mix_at_snr(&t, &[i1.clone()], &[0.0]).unwrap();
    assert!((gains[0] - 1.0).abs() < 1e-12);
    let (_, gains) = mix_at_snr(&t, &[i1], &[10.0]).unwrap();
    assert!((gains[0] - 10f64.powf(-0.5)).abs() < 1e-12);

    // requested vs measured SNR across 1000 seeded cases
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    for case in 0..1000 {
        let t = Waveform::new(noise(400, 10_000 + case), 8000).unwrap();
        let i = Waveform::new(noise(400, 20_000 + case), 8000).unwrap();
        let snr = rng.gen_range(-10.0..10.0);
        let (_, gains) = mix_at_snr(&t, &[i.clone()], &[snr]).unwrap();
        let measured =
            10.0 * (t.energy() / (i.scaled(gains[0]).energy())).log10();
        assert!((measured - snr).abs() < 1e-9, "case {case}: {measured} vs {snr}");
    }
}

#[test]
fn mix_at_snr_three_speaker_case() {
    let t = Waveform::new(noise(600, 30), 8000).unwrap();
    let i1 = Waveform::new(noise(600, 31), 8000).unwrap();
    let i2 = Waveform::new(noise(600, 32), 8000).unwrap();
    let (mix, gains) = mix_at_snr(&t, &[i1.clone(), i2.clone()], &[-10.0, 10.0]).unwrap();
    for (interferer, (gain, want)) in [i1, i2].iter().zip(gains.iter().zip([-10.0, 10.0])) {
        let measured = 10.0 * (t.energy() / interferer.scaled(*gain).energy()).log10();
        assert!((measured - want).abs() < 1e-9);
    }
    // additivity of the stored pieces
    for (k, m) in mix.samples().iter().enumerate() {
        let parts = t.samples()[k];
        let i1v = gains[0] * noise(600, 31)[k];
        let i2v = gains[1] * noise(600, 32)[k];
        assert!((m - (parts + i1v + i2v)).abs() < 1e-12);
    }
}

#[test]
fn mix_at_snr_rejects_zero_energy() {
    let t = Waveform::new(noise(100, 40), 8000).unwrap();
    let z = Waveform::silence(100, 8000).unwrap();
    assert!(mix_at_snr(&t, &[z.clone()], &[0.0]).is_err());
    assert!(mix_at_snr(&z, &[t], &[0.0]).is_err());
}

#[test]
fn stoi_of_a_signal_with_itself_is_one() {
    let x = speechy(10000, 10000, 50);
    let d = stoi(&x, &x).unwrap();
    assert!(d >= 0.999, "got {d}");
}

#[test]
fn stoi_resamples_from_8k_and_16k() {
    for rate in [8000u32, 16000] {
        let x = speechy(rate as usize, rate, 51);
        let d = stoi(&x, &x).unwrap();
        assert!(d >= 0.999, "rate {rate}: got {d}");
    }
}

#[test]
fn stoi_of_unrelated_noise_sits_near_zero() {
    let mut worst: f64 = 0.0;
    let mut sum = 0.0;
    for seed in 0..50 {
        let x = speechy(10000, 10000, 600 + seed);
        let peak = x.peak();
        let n: Vec<f64> = noise(10000, 9000 + seed).iter().map(|v| v * peak).collect();
        let n = Waveform::new(n, 10000).unwrap();
        let d = stoi(&n, &x).unwrap();
        worst = worst.max(d.abs());
        sum += d;
    }
    assert!(worst < 0.25, "worst |stoi| = {worst}");
    assert!((sum / 50.0).abs() < 0.1, "mean = {}", sum / 50.0);
}

#[test]
fn stoi_increases_with_snr() {
    let mut ok = 0;
    for seed in 0..100 {
        let x = speechy(12000, 10000, 700 + seed);
        let n = Waveform::new(noise(12000, 9900 + seed), 10000).unwrap();
        let mut last = -2.0;
        let mut monotone = true;
        for snr in [-10.0, 0.0, 10.0, 20.0] {
            let (mix, _) = mix_at_snr(&x, &[n.clone()], &[snr]).unwrap();
            let d = stoi(&mix, &x).unwrap();
            if d <= last {
                monotone = false;
            }
            last = d;
        }
        if monotone {
            ok += 1;
        }
    }
    assert!(ok >= 95, "monotone in only {ok}/100 seeds");
}

#[test]
fn stoi_rejects_too_short_input() {
    let x = speechy(2000, 10000, 52);
    let err = stoi(&x, &x).unwrap_err().to_string();
    assert!(err.contains("3968"), "error should name the minimum: {err}");
}

#[test]
fn resample_preserves_tone_frequency_and_amplitude() {
    // 1 kHz tone, 8 kHz -> 10 kHz: count zero crossings to recover frequency
    let len = 16000;
    let tone: Vec<f64> = (0..len)
        .map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 8000.0).sin())
        .collect();
    let wave = Waveform::new(tone, 8000).unwrap();
    let up = resample(&wave, 10000).unwrap();
    assert_eq!(up.len(), 20000);

    let interior = &up.samples()[500..up.len() - 500];
    let crossings = interior
        .windows(2)
        .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
        .count();
    let measured_hz = crossings as f64 * 10000.0 / (2.0 * interior.len() as f64);
    assert!((measured_hz - 1000.0).abs() < 5.0, "measured {measured_hz} Hz");
    // sampled peaks undershoot when the grid misses the crest, so recover
    // the amplitude from the RMS instead
    let rms = (interior.iter().map(|x| x * x).sum::<f64>() / interior.len() as f64).sqrt();
    let amplitude = rms * 2f64.sqrt();
    assert!((amplitude - 1.0).abs() < 0.02, "amplitude {amplitude}");
}

#[test]
fn resample_down_then_identity() {
    let x = speechy(16000, 16000, 53);
    let down = resample(&x, 10000).unwrap();
    assert_eq!(down.len(), 10000);
    assert_eq!(down.sample_rate(), 10000);
    let same = resample(&x, 16000).unwrap();
    assert_eq!(same.samples(), x.samples());
}

#[test]
fn mel_spectrogram_shapes_and_silence() {
    let silent = Waveform::silence(8000, 8000).unwrap();
    let m = mel_spectrogram(&silent, 256, 128, 40).unwrap();
    assert_eq!(m.dim(), (40, 61));
    assert!(m.iter().all(|&v| v == 0.0));

    let short = Waveform::silence(100, 8000).unwrap();
    assert!(mel_spectrogram(&short, 256, 128, 40).is_err());
    assert!(mel_spectrogram(&silent, 250, 128, 40).is_err());
    assert!(mel_spectrogram(&silent, 256, 300, 40).is_err());
}

#[test]
fn mel_spectrogram_localizes_a_pure_tone() {
    let tone: Vec<f64> = (0..8000)
        .map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 8000.0).sin())
        .collect();
    let wave = Waveform::new(tone, 8000).unwrap();
    let m = mel_spectrogram(&wave, 256, 128, 40).unwrap();
    let centers = mel_band_centers(8000, 40);

    let mut argmaxes = Vec::new();
    for t in 0..m.ncols() {
        let col = m.column(t);
        let best = (0..col.len()).max_by(|&a, &b| col[a].total_cmp(&col[b])).unwrap();
        argmaxes.push(best);
    }
    let first = argmaxes[0];
    assert!(argmaxes.iter().all(|&b| b == first), "argmax band drifts");
    // the winning band's center must be the closest one to 1 kHz or adjacent
    let nearest = (0..centers.len())
        .min_by(|&a, &b| (centers[a] - 1000.0).abs().total_cmp(&(centers[b] - 1000.0).abs()))
        .unwrap();
    assert!(
        (first as i64 - nearest as i64).abs() <= 1,
        "band {first} vs nearest-center {nearest}"
    );
}

#[test]
fn wav_round_trips_in_both_encodings() {
    let dir = tempfile::tempdir().unwrap();
    let x = speechy(4000, 8000, 54);

    let f32_path = dir.path().join("float.wav");
    x.write_wav(&f32_path).unwrap();
    let back = Waveform::read_wav(&f32_path).unwrap();
    assert_eq!(back.sample_rate(), 8000);
    assert_eq!(back.len(), x.len());
    for (a, b) in back.samples().iter().zip(x.samples()) {
        assert!((a - b).abs() < 1e-6); // f32 storage
    }

    // 16-bit PCM written by hound directly, read through the library
    let pcm_path = dir.path().join("pcm.wav");
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: 8000,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(&pcm_path, spec).unwrap();
    for &s in x.samples() {
        w.write_sample((s * 32767.0).round() as i16).unwrap();
    }
    w.finalize().unwrap();
    let back = Waveform::read_wav(&pcm_path).unwrap();
    for (a, b) in back.samples().iter().zip(x.samples()) {
        assert!((a - b).abs() < 1.0 / 32000.0);
    }

    assert!(Waveform::read_wav_at(&pcm_path, 16000).is_err());
    assert!(Waveform::read_wav_at(&pcm_path, 8000).is_ok());
}

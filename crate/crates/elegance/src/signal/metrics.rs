//! SI-SDR, projection-free SDR, and metric improvements.

use super::Waveform;
use crate::error::{Error, Result};

/// Decibel cap used when a reconstruction is numerically perfect, and the
/// symmetric floor for numerically hopeless ones. Keeps aggregates finite.
pub const DB_CAP: f64 = 300.0;

/// A dB value that may be the perfect-reconstruction sentinel.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Db {
    Finite(f64),
    Perfect,
}

impl Db {
    /// Collapse to a plain f64 for aggregation, mapping Perfect to the cap.
    pub fn capped(self) -> f64 {
        match self {
            Db::Finite(v) => v,
            Db::Perfect => DB_CAP,
        }
    }

    pub fn is_perfect(self) -> bool {
        matches!(self, Db::Perfect)
    }
}

/// Which dB metric to use for an improvement computation.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Metric {
    SiSdr,
    Sdr,
}

fn sum_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn ratio_db(num: f64, den: f64) -> Db {
    if den == 0.0 {
        return Db::Perfect;
    }
    let db = 10.0 * (num / den).log10();
    if db >= DB_CAP {
        Db::Perfect
    } else {
        Db::Finite(db.max(-DB_CAP))
    }
}

/// Scale-invariant source-to-distortion ratio in dB. Both signals are
/// mean-subtracted, the reference is rescaled to the projection of the
/// estimate onto it, and the ratio of projected power to residual power is
/// returned. Identical (or rescaled) signals yield the perfect sentinel.
pub fn si_sdr(est: &Waveform, reference: &Waveform) -> Result<Db> {
    est.check_compatible(reference)?;
    let n = est.len() as f64;
    let est_mean = est.samples().iter().sum::<f64>() / n;
    let ref_mean = reference.samples().iter().sum::<f64>() / n;
    let e: Vec<f64> = est.samples().iter().map(|x| x - est_mean).collect();
    let r: Vec<f64> = reference.samples().iter().map(|x| x - ref_mean).collect();

    let ref_energy = sum_sq(&r);
    if ref_energy == 0.0 {
        return Err(Error::domain(
            "si_sdr reference is identically zero after mean subtraction",
        ));
    }
    if sum_sq(&e) == 0.0 {
        return Err(Error::domain(
            "si_sdr estimate is identically zero after mean subtraction",
        ));
    }

    let alpha = e.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / ref_energy;
    let target_energy = alpha * alpha * ref_energy;
    let resid_energy: f64 = e
        .iter()
        .zip(&r)
        .map(|(a, b)| {
            let d = a - alpha * b;
            d * d
        })
        .sum();
    Ok(ratio_db(target_energy, resid_energy))
}

/// Projection-free SDR in dB: reference power over error power, with no
/// rescaling, so it is deliberately NOT scale-invariant.
pub fn sdr(est: &Waveform, reference: &Waveform) -> Result<Db> {
    est.check_compatible(reference)?;
    let ref_energy = reference.energy();
    if ref_energy == 0.0 {
        return Err(Error::domain("sdr reference is identically zero"));
    }
    let err_energy: f64 = est
        .samples()
        .iter()
        .zip(reference.samples())
        .map(|(a, b)| {
            let d = b - a;
            d * d
        })
        .sum();
    Ok(ratio_db(ref_energy, err_energy))
}

/// metric(est, ref) minus metric(mix, ref). A perfect estimate against an
/// imperfect mixture stays perfect; perfect against perfect is zero gain.
pub fn improvement(
    metric: Metric,
    est: &Waveform,
    mix: &Waveform,
    reference: &Waveform,
) -> Result<Db> {
    let f = match metric {
        Metric::SiSdr => si_sdr,
        Metric::Sdr => sdr,
    };
    let m_est = f(est, reference)?;
    let m_mix = f(mix, reference)?;
    Ok(match (m_est, m_mix) {
        (Db::Perfect, Db::Perfect) => Db::Finite(0.0),
        (Db::Perfect, Db::Finite(_)) => Db::Perfect,
        (Db::Finite(v), m) => Db::Finite(v - m.capped()),
    })
}

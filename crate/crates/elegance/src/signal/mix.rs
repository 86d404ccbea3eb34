//! Mixing a target with interferers at exact per-interferer SNRs.

use super::Waveform;
use crate::error::{Error, Result};

/// Scale each interferer so that 10*log10(target energy / scaled interferer
/// energy) hits the requested SNR exactly, then sum everything. Returns the
/// mixture and the applied gains.
pub fn mix_at_snr(
    target: &Waveform,
    interferers: &[Waveform],
    snr_db: &[f64],
) -> Result<(Waveform, Vec<f64>)> {
    if interferers.len() != snr_db.len() {
        return Err(Error::contract(format!(
            "{} interferers but {} SNR values",
            interferers.len(),
            snr_db.len()
        )));
    }
    let target_energy = target.energy();
    if target_energy == 0.0 {
        return Err(Error::domain("mix_at_snr target has zero energy"));
    }
    let mut mixture = target.clone();
    let mut gains = Vec::with_capacity(interferers.len());
    for (i, (interferer, &snr)) in interferers.iter().zip(snr_db).enumerate() {
        target.check_compatible(interferer)?;
        let energy = interferer.energy();
        if energy == 0.0 {
            return Err(Error::domain(format!(
                "mix_at_snr interferer {i} has zero energy"
            )));
        }
        let gain = (target_energy / (energy * 10f64.powf(snr / 10.0))).sqrt();
        for (m, x) in mixture.samples_mut().iter_mut().zip(interferer.samples()) {
            *m += gain * x;
        }
        gains.push(gain);
    }
    Ok((mixture, gains))
}

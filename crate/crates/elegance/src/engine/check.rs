//! Numerical gradient verification by central differences.

use super::params::{ParamId, ParamStore};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
use std::collections::BTreeMap;

/// One probed scalar entry: where it lives and how the analytic gradient
/// compared to the central-difference estimate.
#[derive(Clone, Debug)]
pub struct GradProbe {
    pub name: String,
    pub index: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub probes: Vec<GradProbe>,
    pub max_rel_err: f64,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err <= tol
    }
}

/// Check analytic gradients of `eval` against central differences.
///
/// `eval` maps the current store to a scalar loss plus a full gradient table
/// keyed by parameter name (missing entries mean zero gradient). Probes are
/// drawn uniformly over all trainable scalar entries with a seeded RNG, each
/// entry is perturbed by `±eps`, and the relative error uses the denominator
/// `max(|analytic| + |numeric|, 1e-5)`: the absolute floor keeps entries
/// whose true gradient is zero (as behind zero-initialized projections) from
/// turning round-off into spurious failures.
pub fn grad_check_fn(
    mut eval: impl FnMut(&ParamStore) -> (f64, BTreeMap<String, Array2<f64>>),
    store: &mut ParamStore,
    n_probes: usize,
    eps: f64,
    seed: u64,
) -> GradCheckReport {
    let (_, grads) = eval(store);

    // Enumerate trainable scalar coordinates.
    let mut coords: Vec<(ParamId, usize, usize)> = Vec::new();
    for id in store.trainable_ids() {
        let (r, c) = store.value(id).dim();
        for i in 0..r {
            for j in 0..c {
                coords.push((id, i, j));
            }
        }
    }
    assert!(!coords.is_empty(), "grad check needs at least one trainable scalar");

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport::default();
    for _ in 0..n_probes {
        let (id, i, j) = coords[rng.gen_range(0..coords.len())];
        let name = store.name(id).to_string();
        let analytic = grads.get(&name).map_or(0.0, |g| g[[i, j]]);

        let orig = store.value(id)[[i, j]];
        store.value_mut(id)[[i, j]] = orig + eps;
        let (loss_plus, _) = eval(store);
        store.value_mut(id)[[i, j]] = orig - eps;
        let (loss_minus, _) = eval(store);
        store.value_mut(id)[[i, j]] = orig;

        let numeric = (loss_plus - loss_minus) / (2.0 * eps);
        let denom = (analytic.abs() + numeric.abs()).max(1e-5);
        let rel_err = (analytic - numeric).abs() / denom;
        report.max_rel_err = report.max_rel_err.max(rel_err);
        report.probes.push(GradProbe {
            name,
            index: (i, j),
            analytic,
            numeric,
            rel_err,
        });
    }
    report
}

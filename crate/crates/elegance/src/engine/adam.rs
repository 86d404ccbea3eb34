//! Adam with bias correction, with moments serializable for exact resume.

use super::params::{ParamId, ParamStore, TapeBind};
use super::Grads;
use ndarray::Array2;

/// Adam state for one parameter store. Moment buffers line up with the
/// store's slots by index; frozen slots keep zero (untouched) moments so a
/// later unfreeze picks up cleanly.
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

/// Snapshot of the optimizer's mutable state, keyed by parameter name so it
/// survives re-registration order changes.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub lr: f64,
    pub step: u64,
    pub moments: Vec<(String, Array2<f64>, Array2<f64>)>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        let m = (0..store.len())
            .map(|i| Array2::zeros(store.value(ParamId(i)).dim()))
            .collect::<Vec<_>>();
        let v = m.clone();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m,
            v,
        }
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.lr = lr;
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Apply one update from the gradients of a finished backward pass.
    /// Trainable slots with no gradient on this tape are left alone (their
    /// moments do not decay), which matches how branch-specific parameters
    /// behave when an objective skips their branch.
    pub fn update(&mut self, store: &mut ParamStore, bind: &TapeBind, grads: &mut Grads) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..store.len() {
            let id = ParamId(i);
            if !store.is_trainable(id) {
                continue;
            }
            let Some(g) = grads.take(bind.var(id)) else { continue };
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            ndarray::Zip::from(m).and(v).and(&g).for_each(|m, v, &g| {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            });
            let value = store.value_mut(id);
            ndarray::Zip::from(value)
                .and(&self.m[i])
                .and(&self.v[i])
                .for_each(|p, &m, &v| {
                    let mhat = m / c1;
                    let vhat = v / c2;
                    *p -= self.lr * mhat / (vhat.sqrt() + self.eps);
                });
        }
    }

    pub fn export_state(&self, store: &ParamStore) -> AdamState {
        let moments = (0..store.len())
            .map(|i| {
                (
                    store.name(ParamId(i)).to_string(),
                    self.m[i].clone(),
                    self.v[i].clone(),
                )
            })
            .collect();
        AdamState {
            lr: self.lr,
            step: self.step,
            moments,
        }
    }

    pub fn import_state(&mut self, store: &ParamStore, state: &AdamState) {
        self.lr = state.lr;
        self.step = state.step;
        for (name, m, v) in &state.moments {
            let id = store
                .id(name)
                .unwrap_or_else(|| panic!("optimizer state names unknown parameter {name}"));
            assert_eq!(
                m.dim(),
                store.value(id).dim(),
                "optimizer moment shape mismatch for {name}"
            );
            self.m[id.0] = m.clone();
            self.v[id.0] = v.clone();
        }
    }
}

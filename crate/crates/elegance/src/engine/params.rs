//! Named parameter storage, initialization, and tape binding.
//!
//! Model code registers every weight matrix in a [`ParamStore`] under a
//! stable name. Each training step binds the store to a fresh [`Tape`]
//! (trainable slots become leaves, frozen ones constants), runs the forward
//! pass against the bound [`Var`]s, and applies the resulting gradients back
//! by slot index.

use super::{Tape, Var};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

/// Index of a parameter slot inside its [`ParamStore`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

/// How to fill a freshly registered parameter.
#[derive(Clone, Debug)]
pub enum Init {
    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` where fan_in is the row count.
    UniformFanIn,
    /// Uniform in `[-a, a]`.
    Uniform(f64),
    Zeros,
    Const(f64),
}

struct Slot {
    name: String,
    value: Array2<f64>,
    trainable: bool,
}

/// All parameters of a model, keyed by name, in registration order.
#[derive(Default)]
pub struct ParamStore {
    slots: Vec<Slot>,
    by_name: BTreeMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a parameter with an explicit value. Panics on name reuse.
    pub fn add_value(&mut self, name: &str, value: Array2<f64>) -> ParamId {
        assert!(
            !self.by_name.contains_key(name),
            "parameter name registered twice: {name}"
        );
        let id = self.slots.len();
        self.by_name.insert(name.to_string(), id);
        self.slots.push(Slot {
            name: name.to_string(),
            value,
            trainable: true,
        });
        ParamId(id)
    }

    /// Register a parameter of the given shape, filled per `init`.
    pub fn add(
        &mut self,
        name: &str,
        shape: (usize, usize),
        init: Init,
        rng: &mut ChaCha8Rng,
    ) -> ParamId {
        let value = match init {
            Init::UniformFanIn => {
                let bound = 1.0 / (shape.0 as f64).sqrt();
                Array2::from_shape_fn(shape, |_| rng.gen_range(-bound..=bound))
            }
            Init::Uniform(a) => Array2::from_shape_fn(shape, |_| rng.gen_range(-a..=a)),
            Init::Zeros => Array2::zeros(shape),
            Init::Const(c) => Array2::from_elem(shape, c),
        };
        self.add_value(name, value)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.slots[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Array2<f64> {
        &self.slots[id.0].value
    }

    pub fn value_by_name(&self, name: &str) -> Option<&Array2<f64>> {
        self.by_name.get(name).map(|&i| &self.slots[i].value)
    }

    pub fn set_value(&mut self, id: ParamId, value: Array2<f64>) {
        assert_eq!(
            self.slots[id.0].value.dim(),
            value.dim(),
            "shape change for parameter {}",
            self.slots[id.0].name
        );
        self.slots[id.0].value = value;
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        &mut self.slots[id.0].value
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.slots[id.0].trainable
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.slots[id.0].trainable = trainable;
    }

    /// Flip trainability for every parameter whose name starts with `prefix`.
    /// Returns how many slots matched.
    pub fn set_trainable_prefix(&mut self, prefix: &str, trainable: bool) -> usize {
        let mut hits = 0;
        for slot in &mut self.slots {
            if slot.name.starts_with(prefix) {
                slot.trainable = trainable;
                hits += 1;
            }
        }
        hits
    }

    /// Names in registration order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.slots.iter().map(|s| s.name.as_str())
    }

    /// Ids of all trainable parameters, in registration order.
    pub fn trainable_ids(&self) -> Vec<ParamId> {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.trainable)
            .map(|(i, _)| ParamId(i))
            .collect()
    }

    pub fn total_scalars(&self) -> usize {
        self.slots.iter().map(|s| s.value.len()).sum()
    }

    /// Digest over names, shapes, and exact f64 bytes, in name order. Two
    /// stores with identical parameters agree; any drift shows up here.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for (name, &idx) in &self.by_name {
            let slot = &self.slots[idx];
            hasher.update(name.as_bytes());
            hasher.update((slot.value.nrows() as u64).to_le_bytes());
            hasher.update((slot.value.ncols() as u64).to_le_bytes());
            for &x in slot.value.iter() {
                hasher.update(x.to_le_bytes());
            }
        }
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Digest over a single slot's f64 bytes. Handy for freeze tests.
    pub fn checksum_of(&self, id: ParamId) -> String {
        let mut hasher = Sha256::new();
        for &x in self.slots[id.0].value.iter() {
            hasher.update(x.to_le_bytes());
        }
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Put every parameter on a tape: trainable slots as leaves, frozen ones
    /// as constants.
    pub fn bind(&self, tape: &Tape) -> TapeBind {
        let vars = self
            .slots
            .iter()
            .map(|s| {
                if s.trainable {
                    tape.leaf(s.value.clone())
                } else {
                    tape.constant(s.value.clone())
                }
            })
            .collect();
        TapeBind { vars }
    }
}

/// The [`Var`]s a [`ParamStore`] produced on one particular tape.
pub struct TapeBind {
    vars: Vec<Var>,
}

impl TapeBind {
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }
}

/// An affine layer `x @ w + b` with weight shape (in_dim, out_dim).
#[derive(Copy, Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    /// Register weight and bias under `{name}.w` / `{name}.b`. The bias
    /// starts at zero; the weight follows `init`.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        init: Init,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let w = store.add(&format!("{name}.w"), (in_dim, out_dim), init, rng);
        let b = store.add(&format!("{name}.b"), (1, out_dim), Init::Zeros, rng);
        Self { w, b }
    }

    pub fn forward(&self, tape: &Tape, bind: &TapeBind, x: Var) -> Var {
        let y = tape.matmul(x, bind.var(self.w));
        tape.add_row(y, bind.var(self.b))
    }
}

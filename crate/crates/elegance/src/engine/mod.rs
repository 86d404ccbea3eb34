//! Reverse-mode autodiff over `ndarray` matrices, sized for desk-scale models.
//!
//! Everything runs in `f64`: gradient checks and the metric layer need the
//! headroom, and on one core the dense matmuls are fast enough that a second
//! precision would buy nothing but complexity. A [`Tape`] records one node per
//! op during the forward pass; [`Tape::backward`] replays the records in
//! reverse and hands back gradients for parameter leaves.

mod adam;
mod check;
mod ops;
mod params;
mod seq;

pub use adam::{Adam, AdamState};
pub use check::{grad_check_fn, GradCheckReport, GradProbe};
pub use params::{Init, Linear, ParamId, ParamStore, TapeBind};
pub use seq::SeqLayout;

use ndarray::{Array2, ArrayView2};
use std::cell::{Cell, RefCell};
use std::collections::HashMap;

/// Handle to a node on a [`Tape`]. Only meaningful for the tape that issued it.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

/// Arguments handed to an op's backward closure.
pub struct BwdCtx<'a> {
    /// Parent values, in the order they were passed to the op.
    pub parents: &'a [ArrayView2<'a, f64>],
    /// The node's own forward value.
    pub value: &'a Array2<f64>,
    /// Gradient of the loss with respect to this node.
    pub upstream: &'a Array2<f64>,
    /// Which parents need a gradient (ops may skip work for constants).
    pub needs: &'a [bool],
}

type GradFn = Box<dyn Fn(&BwdCtx) -> Vec<Option<Array2<f64>>>>;

struct Node {
    value: Array2<f64>,
    parents: Vec<usize>,
    grad_fn: Option<GradFn>,
    needs_grad: bool,
    retain: Cell<bool>,
}

/// Gradient table produced by [`Tape::backward`]: leaf nodes plus anything
/// marked with [`Tape::retain_grad`].
pub struct Grads {
    map: HashMap<usize, Array2<f64>>,
}

impl Grads {
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        self.map.get(&v.0)
    }

    pub fn take(&mut self, v: Var) -> Option<Array2<f64>> {
        self.map.remove(&v.0)
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Differentiable input: its gradient is kept by `backward`.
    pub fn leaf(&self, value: Array2<f64>) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            parents: Vec::new(),
            grad_fn: None,
            needs_grad: true,
            retain: Cell::new(false),
        });
        Var(nodes.len() - 1)
    }

    /// Non-differentiable input: gradients never flow into it.
    pub fn constant(&self, value: Array2<f64>) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            parents: Vec::new(),
            grad_fn: None,
            needs_grad: false,
            retain: Cell::new(false),
        });
        Var(nodes.len() - 1)
    }

    /// 1x1 constant, handy for scalar arithmetic.
    pub fn scalar(&self, value: f64) -> Var {
        self.constant(Array2::from_elem((1, 1), value))
    }

    pub(crate) fn push_op(
        &self,
        value: Array2<f64>,
        parents: Vec<usize>,
        grad_fn: GradFn,
    ) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        let needs_grad = parents.iter().any(|&p| nodes[p].needs_grad);
        nodes.push(Node {
            value,
            parents,
            grad_fn: if needs_grad { Some(grad_fn) } else { None },
            needs_grad,
            retain: Cell::new(false),
        });
        Var(nodes.len() - 1)
    }

    /// Clone a node's current value out of the tape.
    pub fn value(&self, v: Var) -> Array2<f64> {
        self.nodes.borrow()[v.0].value.clone()
    }

    /// Read a node's value without cloning.
    pub fn with_value<T>(&self, v: Var, f: impl FnOnce(&Array2<f64>) -> T) -> T {
        f(&self.nodes.borrow()[v.0].value)
    }

    pub fn dims(&self, v: Var) -> (usize, usize) {
        let nodes = self.nodes.borrow();
        nodes[v.0].value.dim()
    }

    /// Scalar view of a 1x1 node.
    pub fn scalar_value(&self, v: Var) -> f64 {
        let nodes = self.nodes.borrow();
        let val = &nodes[v.0].value;
        assert_eq!(val.dim(), (1, 1), "scalar_value needs a 1x1 node");
        val[[0, 0]]
    }

    /// Keep this node's gradient around so `Grads::get` can see it.
    pub fn retain_grad(&self, v: Var) {
        self.nodes.borrow()[v.0].retain.set(true);
    }

    /// Reverse sweep from a 1x1 loss node. Gradients are accumulated for
    /// every leaf reachable from `loss` and for retained nodes; transient
    /// gradients are freed as soon as their node has been processed.
    pub fn backward(&self, loss: Var) -> Grads {
        let nodes = self.nodes.borrow();
        assert_eq!(
            nodes[loss.0].value.dim(),
            (1, 1),
            "backward starts from a 1x1 loss node"
        );
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Array2::ones((1, 1)));
        let mut out = HashMap::new();

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if !node.needs_grad {
                continue;
            }
            let is_leaf = node.grad_fn.is_none() && node.parents.is_empty();
            if node.retain.get() || is_leaf {
                out.insert(id, g.clone());
            }
            let Some(grad_fn) = &node.grad_fn else { continue };
            let parent_vals: Vec<ArrayView2<f64>> =
                node.parents.iter().map(|&p| nodes[p].value.view()).collect();
            let parent_needs: Vec<bool> =
                node.parents.iter().map(|&p| nodes[p].needs_grad).collect();
            let ctx = BwdCtx {
                parents: &parent_vals,
                value: &node.value,
                upstream: &g,
                needs: &parent_needs,
            };
            let parent_grads = grad_fn(&ctx);
            debug_assert_eq!(parent_grads.len(), node.parents.len());
            for (&pid, pg) in node.parents.iter().zip(parent_grads) {
                let Some(pg) = pg else { continue };
                if !nodes[pid].needs_grad {
                    continue;
                }
                debug_assert_eq!(
                    pg.dim(),
                    nodes[pid].value.dim(),
                    "gradient shape mismatch flowing into node {pid}"
                );
                match &mut grads[pid] {
                    Some(acc) => *acc += &pg,
                    None => grads[pid] = Some(pg),
                }
            }
        }
        Grads { map: out }
    }
}

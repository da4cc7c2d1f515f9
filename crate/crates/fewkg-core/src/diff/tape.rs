//! Reverse-mode tape.
//!
//! Forward ops append nodes holding the computed value plus a backward
//! closure that maps the node's output gradient to per-parent gradients.
//! With recording off the same op code runs value-only, so evaluation and
//! training share one forward implementation.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use super::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(&self) -> usize {
        self.0
    }
}

type BackFn = Box<dyn Fn(&Tensor, &Tensor) -> Vec<Tensor>>;

struct Node {
    value: Tensor,
    parents: Vec<NodeId>,
    /// (grad_out, out_value) -> gradient per parent, in `parents` order.
    back: Option<BackFn>,
}

pub struct Tape {
    nodes: Vec<Node>,
    recording: bool,
}

impl Tape {
    pub fn new(recording: bool) -> Self {
        Self { nodes: Vec::new(), recording }
    }

    #[inline]
    pub fn recording(&self) -> bool {
        self.recording
    }

    #[inline]
    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Input node. Leaves get gradients accumulated but propagate nowhere.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.nodes.push(Node { value, parents: Vec::new(), back: None });
        NodeId(self.nodes.len() - 1)
    }

    /// Interior node; `back` is only materialized while recording.
    pub(crate) fn push(
        &mut self,
        value: Tensor,
        parents: Vec<NodeId>,
        back: impl FnOnce() -> BackFn,
    ) -> NodeId {
        let back = if self.recording { Some(back()) } else { None };
        self.nodes.push(Node { value, parents, back });
        NodeId(self.nodes.len() - 1)
    }

    /// Accumulate gradients of the scalar `root` with respect to every node.
    pub fn backward(&self, root: NodeId) -> Gradients {
        assert!(self.recording, "backward on a non-recording tape");
        assert_eq!(self.value(root).len(), 1, "backward root must be scalar");
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Tensor::scalar(1.0));
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if let Some(back) = &node.back {
                let parent_grads = back(&g, &node.value);
                debug_assert_eq!(parent_grads.len(), node.parents.len());
                for (pid, pg) in node.parents.iter().zip(parent_grads) {
                    debug_assert_eq!(pg.dims(), self.nodes[pid.0].value.dims());
                    match &mut grads[pid.0] {
                        Some(acc) => acc.axpy(1.0, &pg),
                        slot => *slot = Some(pg),
                    }
                }
            }
            grads[i] = Some(g);
        }
        Gradients { by_node: grads }
    }
}

pub struct Gradients {
    by_node: Vec<Option<Tensor>>,
}

impl Gradients {
    /// None when no gradient reached the node.
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.by_node.get(id.0).and_then(|g| g.as_ref())
    }
}

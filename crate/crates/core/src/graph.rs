//! Define-by-run reverse-mode autodiff over the detector's op set.
//!
//! Nodes are appended in evaluation order, so the node list is always a valid
//! topological order and backward is a single reverse sweep. A trainable leaf
//! that the loss does not depend on receives an all-zero gradient.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ops;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Input,
    Param(String),
    Conv2d {
        input: NodeId,
        weight: NodeId,
        bias: NodeId,
        stride: usize,
        padding: usize,
    },
    Relu(NodeId),
    Sigmoid(NodeId),
    Add(NodeId, NodeId),
    Upsample2x(NodeId),
    Sum(NodeId),
    /// Scalar computed outside the graph, carrying its own input gradients.
    External {
        inputs: Vec<NodeId>,
        grads: Vec<Tensor<T>>,
    },
}

#[derive(Debug, Clone)]
struct Node<T> {
    op: Op<T>,
    value: Tensor<T>,
}

#[derive(Debug, Clone, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients of the trainable leaves, keyed by parameter name.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    by_name: BTreeMap<String, Tensor<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.by_name.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor<T>)> {
        self.by_name.iter()
    }

    pub fn len(&self) -> usize {
        self.by_name.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_name.is_empty()
    }

    pub fn into_map(self) -> BTreeMap<String, Tensor<T>> {
        self.by_name
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op<T>, value: Tensor<T>) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    /// Constant leaf; receives no gradient.
    pub fn input(&mut self, value: Tensor<T>) -> NodeId {
        self.push(Op::Input, value)
    }

    /// Trainable leaf.
    pub fn param(&mut self, name: impl Into<String>, value: Tensor<T>) -> NodeId {
        self.push(Op::Param(name.into()), value)
    }

    pub fn conv2d(
        &mut self,
        input: NodeId,
        weight: NodeId,
        bias: NodeId,
        stride: usize,
        padding: usize,
    ) -> Result<NodeId> {
        let value = ops::conv2d(self.value(input), self.value(weight), self.value(bias), stride, padding)?;
        Ok(self.push(
            Op::Conv2d {
                input,
                weight,
                bias,
                stride,
                padding,
            },
            value,
        ))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let value = ops::relu(self.value(x));
        self.push(Op::Relu(x), value)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let value = ops::sigmoid(self.value(x));
        self.push(Op::Sigmoid(x), value)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = ops::add(self.value(a), self.value(b))?;
        Ok(self.push(Op::Add(a, b), value))
    }

    pub fn upsample2x(&mut self, x: NodeId) -> Result<NodeId> {
        let value = ops::upsample_nearest2x(self.value(x))?;
        Ok(self.push(Op::Upsample2x(x), value))
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let value = Tensor::scalar(self.value(x).sum());
        self.push(Op::Sum(x), value)
    }

    /// Appends a scalar whose value and partial derivatives were computed
    /// outside the graph (the detection loss does this in closed form).
    pub fn external_scalar(&mut self, inputs: Vec<NodeId>, value: T, grads: Vec<Tensor<T>>) -> Result<NodeId> {
        if inputs.len() != grads.len() {
            return Err(crate::error::invalid("grads", "one gradient per input is required"));
        }
        for (&id, g) in inputs.iter().zip(&grads) {
            self.value(id).same_shape(g, "external_scalar")?;
        }
        if !value.is_finite() {
            return Err(Error::NonFinite("external_scalar"));
        }
        Ok(self.push(Op::External { inputs, grads }, Tensor::scalar(value)))
    }

    /// Reverse sweep from a scalar node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients<T>> {
        let root = self.value(loss);
        if !root.is_scalar() {
            return Err(Error::NonScalarLoss(root.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::full(root.shape(), T::one()));

        fn accumulate<T: Scalar>(slot: &mut Option<Tensor<T>>, g: Tensor<T>) -> Result<()> {
            match slot {
                Some(acc) => acc.add_assign(&g),
                None => {
                    *slot = Some(g);
                    Ok(())
                }
            }
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Param(_) => {
                    grads[idx] = Some(g);
                }
                Op::Conv2d {
                    input,
                    weight,
                    bias,
                    stride,
                    padding,
                } => {
                    let cg = ops::conv2d_backward(
                        self.value(*input),
                        self.value(*weight),
                        self.value(*bias),
                        *stride,
                        *padding,
                        &g,
                    )?;
                    accumulate(&mut grads[input.0], cg.input)?;
                    accumulate(&mut grads[weight.0], cg.weight)?;
                    accumulate(&mut grads[bias.0], cg.bias)?;
                }
                Op::Relu(x) => {
                    let dx = ops::relu_backward(self.value(*x), &g);
                    accumulate(&mut grads[x.0], dx)?;
                }
                Op::Sigmoid(x) => {
                    let dx = ops::sigmoid_backward(&node.value, &g);
                    accumulate(&mut grads[x.0], dx)?;
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], g.clone())?;
                    accumulate(&mut grads[b.0], g)?;
                }
                Op::Upsample2x(x) => {
                    let dx = ops::upsample_nearest2x_backward(&g)?;
                    accumulate(&mut grads[x.0], dx)?;
                }
                Op::Sum(x) => {
                    let dx = Tensor::full(self.value(*x).shape(), g.item());
                    accumulate(&mut grads[x.0], dx)?;
                }
                Op::External { inputs, grads: local } => {
                    let up = g.item();
                    for (id, lg) in inputs.iter().zip(local) {
                        accumulate(&mut grads[id.0], lg.map(|v| v * up))?;
                    }
                }
            }
        }

        let mut by_name = BTreeMap::new();
        for (idx, node) in self.nodes.iter().enumerate() {
            if let Op::Param(name) = &node.op {
                let g = grads
                    .get_mut(idx)
                    .and_then(Option::take)
                    .unwrap_or_else(|| Tensor::zeros(node.value.shape()));
                match by_name.get_mut(name) {
                    Some(acc) => Tensor::add_assign(acc, &g)?,
                    None => {
                        by_name.insert(name.clone(), g);
                    }
                }
            }
        }
        Ok(Gradients { by_name })
    }
}

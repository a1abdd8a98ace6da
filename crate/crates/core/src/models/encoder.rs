use rand::Rng;

use crate::embeddings::{EmbeddingMatrix, Vocab};
use crate::error::{NluError, Result};
use crate::numerics::{NodeId, StreamRng, Tape, Tensor};
use crate::recurrent::{bi_encode_on, BoundCell, CellKind, CellParams, Encoded};

/// Affine output layer `W x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    pub fn init<R: Rng>(out_dim: usize, in_dim: usize, rng: &mut R) -> Self {
        let bound = (1.0 / in_dim as f64).sqrt();
        Self {
            weight: Tensor::uniform(&[out_dim, in_dim], bound, rng).with_grad(true),
            bias: Tensor::vector(vec![0.0; out_dim]).with_grad(true),
        }
    }

    pub fn from_tensors(weight: Tensor, bias: Tensor) -> Result<Self> {
        if weight.shape().len() != 2 || bias.shape() != [weight.rows()] {
            return Err(NluError::Shape {
                op: "linear",
                left: weight.shape().to_vec(),
                right: bias.shape().to_vec(),
            });
        }
        Ok(Self {
            weight: weight.with_grad(true),
            bias: bias.with_grad(true),
        })
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.weight, &self.bias]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }

    pub fn bind(&self, tape: &mut Tape) -> (NodeId, NodeId) {
        (tape.param(&self.weight), tape.param(&self.bias))
    }

    pub fn apply(tape: &mut Tape, bound: (NodeId, NodeId), x: NodeId) -> Result<NodeId> {
        let wx = tape.matvec(bound.0, x)?;
        tape.add(wx, bound.1)
    }
}

/// Embedding lookup followed by a bidirectional recurrent layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    pub vocab: Vocab,
    pub embeddings: EmbeddingMatrix,
    pub forward: CellParams,
    pub backward: CellParams,
}

pub struct BoundEncoder {
    table: NodeId,
    forward: BoundCell,
    backward: BoundCell,
}

impl Encoder {
    pub fn init(vocab: Vocab, embeddings: EmbeddingMatrix, kind: CellKind, hidden_dim: usize, rng: &mut StreamRng) -> Self {
        let d = embeddings.dim();
        let forward = CellParams::init(kind, d, hidden_dim, rng);
        let backward = CellParams::init(kind, d, hidden_dim, rng);
        Self {
            vocab,
            embeddings,
            forward,
            backward,
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.forward.hidden_dim
    }

    /// Width of each encoder output row (`2H`).
    pub fn output_dim(&self) -> usize {
        2 * self.forward.hidden_dim
    }

    pub fn cell_kind(&self) -> CellKind {
        self.forward.kind
    }

    /// Embedding table, forward cell, backward cell.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut v = vec![&self.embeddings.matrix];
        v.extend(self.forward.tensors());
        v.extend(self.backward.tensors());
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = vec![&mut self.embeddings.matrix];
        v.extend(self.forward.tensors_mut());
        v.extend(self.backward.tensors_mut());
        v
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundEncoder {
        let table = self.embeddings.bind(tape);
        BoundEncoder {
            table,
            forward: self.forward.bind(tape),
            backward: self.backward.bind(tape),
        }
    }

    pub fn encode(
        &self,
        tape: &mut Tape,
        bound: &BoundEncoder,
        indices: &[usize],
        dropout: &mut Option<(&mut StreamRng, f64)>,
    ) -> Result<Encoded> {
        if indices.is_empty() {
            return Err(NluError::Contract("cannot encode an empty token sequence".into()));
        }
        let xs = tape.gather(bound.table, indices)?;
        let xs = apply_dropout(tape, xs, dropout)?;
        bi_encode_on(tape, xs, &bound.forward, &bound.backward)
    }
}

pub(crate) fn apply_dropout(tape: &mut Tape, x: NodeId, dropout: &mut Option<(&mut StreamRng, f64)>) -> Result<NodeId> {
    match dropout {
        Some((rng, rate)) => tape.dropout(x, *rate, *rng, true),
        None => Ok(x),
    }
}

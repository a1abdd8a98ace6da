//! LSTM and GRU cells, the bidirectional encoder and additive attention
//! pooling. Each operation exists in two forms: a tape-level method on the
//! bound parameters (used in training) and a plain function over tensors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NluError, Result};
use crate::numerics::{NodeId, Tape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Lstm,
    Gru,
}

impl CellKind {
    pub fn gates(self) -> usize {
        match self {
            CellKind::Lstm => 4,
            CellKind::Gru => 3,
        }
    }
}

impl std::str::FromStr for CellKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "lstm" => Ok(Self::Lstm),
            "gru" => Ok(Self::Gru),
            _ => Err(format!("unknown cell kind `{s}` (expected lstm or gru)")),
        }
    }
}

/// Gate weights `[hidden × (input + hidden)]` and biases `[hidden]`.
/// LSTM gate order is i, f, g, o; GRU order is z, r, candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct CellParams {
    pub kind: CellKind,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub weights: Vec<Tensor>,
    pub biases: Vec<Tensor>,
}

const LSTM_FORGET: usize = 1;

impl CellParams {
    /// Uniform `±sqrt(1/fan_in)` weights, zero biases, forget bias 1.
    pub fn init<R: Rng>(kind: CellKind, input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let fan_in = input_dim + hidden_dim;
        let bound = (1.0 / fan_in as f64).sqrt();
        let weights = (0..kind.gates())
            .map(|_| Tensor::uniform(&[hidden_dim, fan_in], bound, rng).with_grad(true))
            .collect();
        let biases = (0..kind.gates())
            .map(|g| {
                let fill = if kind == CellKind::Lstm && g == LSTM_FORGET { 1.0 } else { 0.0 };
                Tensor::vector(vec![fill; hidden_dim]).with_grad(true)
            })
            .collect();
        Self {
            kind,
            input_dim,
            hidden_dim,
            weights,
            biases,
        }
    }

    pub fn from_tensors(kind: CellKind, input_dim: usize, hidden_dim: usize, tensors: Vec<Tensor>) -> Result<Self> {
        let g = kind.gates();
        if tensors.len() != 2 * g {
            return Err(NluError::Contract(format!("{kind:?} cell needs {} tensors, got {}", 2 * g, tensors.len())));
        }
        let mut tensors = tensors;
        let biases = tensors.split_off(g);
        let p = Self {
            kind,
            input_dim,
            hidden_dim,
            weights: tensors.into_iter().map(|t| t.with_grad(true)).collect(),
            biases: biases.into_iter().map(|t| t.with_grad(true)).collect(),
        };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        for w in &self.weights {
            if w.shape() != [self.hidden_dim, self.input_dim + self.hidden_dim] {
                return Err(NluError::Shape {
                    op: "cell weights",
                    left: w.shape().to_vec(),
                    right: vec![self.hidden_dim, self.input_dim + self.hidden_dim],
                });
            }
        }
        for b in &self.biases {
            if b.shape() != [self.hidden_dim] {
                return Err(NluError::Shape {
                    op: "cell bias",
                    left: b.shape().to_vec(),
                    right: vec![self.hidden_dim],
                });
            }
        }
        Ok(())
    }

    /// Weights then biases, in gate order.
    pub fn tensors(&self) -> Vec<&Tensor> {
        self.weights.iter().chain(&self.biases).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.weights.iter_mut().chain(self.biases.iter_mut()).collect()
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundCell {
        let weights = self.weights.iter().map(|w| tape.param(w)).collect();
        let biases = self.biases.iter().map(|b| tape.param(b)).collect();
        BoundCell {
            kind: self.kind,
            input_dim: self.input_dim,
            hidden_dim: self.hidden_dim,
            weights,
            biases,
        }
    }
}

/// Cell parameters registered on a tape.
#[derive(Clone, Debug)]
pub struct BoundCell {
    pub kind: CellKind,
    pub input_dim: usize,
    pub hidden_dim: usize,
    weights: Vec<NodeId>,
    biases: Vec<NodeId>,
}

impl BoundCell {
    fn gate(&self, tape: &mut Tape, g: usize, input: NodeId) -> Result<NodeId> {
        let pre = tape.matvec(self.weights[g], input)?;
        tape.add(pre, self.biases[g])
    }

    fn check_dims(&self, tape: &Tape, x: NodeId, h: NodeId, expected: CellKind) -> Result<()> {
        if self.kind != expected {
            return Err(NluError::Contract(format!("{:?} step on {:?} parameters", expected, self.kind)));
        }
        if tape.shape(x) != [self.input_dim] || tape.shape(h) != [self.hidden_dim] {
            return Err(NluError::Shape {
                op: "cell step",
                left: tape.shape(x).to_vec(),
                right: tape.shape(h).to_vec(),
            });
        }
        Ok(())
    }

    pub fn lstm_step(&self, tape: &mut Tape, x: NodeId, h: NodeId, c: NodeId) -> Result<(NodeId, NodeId)> {
        self.check_dims(tape, x, h, CellKind::Lstm)?;
        if tape.shape(c) != [self.hidden_dim] {
            return Err(NluError::Shape {
                op: "lstm cell state",
                left: tape.shape(c).to_vec(),
                right: vec![self.hidden_dim],
            });
        }
        let xh = tape.concat(&[x, h])?;
        let i = self.gate(tape, 0, xh)?;
        let i = tape.sigmoid(i);
        let f = self.gate(tape, 1, xh)?;
        let f = tape.sigmoid(f);
        let g = self.gate(tape, 2, xh)?;
        let g = tape.tanh(g);
        let o = self.gate(tape, 3, xh)?;
        let o = tape.sigmoid(o);
        let keep = tape.mul(f, c)?;
        let write = tape.mul(i, g)?;
        let c_next = tape.add(keep, write)?;
        let squashed = tape.tanh(c_next);
        let h_next = tape.mul(o, squashed)?;
        Ok((h_next, c_next))
    }

    pub fn gru_step(&self, tape: &mut Tape, x: NodeId, h: NodeId) -> Result<NodeId> {
        self.check_dims(tape, x, h, CellKind::Gru)?;
        let xh = tape.concat(&[x, h])?;
        let z = self.gate(tape, 0, xh)?;
        let z = tape.sigmoid(z);
        let r = self.gate(tape, 1, xh)?;
        let r = tape.sigmoid(r);
        let rh = tape.mul(r, h)?;
        let xrh = tape.concat(&[x, rh])?;
        let cand = self.gate(tape, 2, xrh)?;
        let cand = tape.tanh(cand);
        let keep_gate = tape.one_minus(z);
        let keep = tape.mul(keep_gate, h)?;
        let write = tape.mul(z, cand)?;
        tape.add(keep, write)
    }

    /// Runs the cell over `inputs` in order from a zero state and returns
    /// the hidden state after each step.
    pub fn run(&self, tape: &mut Tape, inputs: &[NodeId]) -> Result<Vec<NodeId>> {
        let zeros = Tensor::zeros(&[self.hidden_dim]);
        let mut h = tape.constant(&zeros);
        let mut c = tape.constant(&zeros);
        let mut states = Vec::with_capacity(inputs.len());
        for &x in inputs {
            match self.kind {
                CellKind::Lstm => {
                    let (h2, c2) = self.lstm_step(tape, x, h, c)?;
                    h = h2;
                    c = c2;
                }
                CellKind::Gru => h = self.gru_step(tape, x, h)?,
            }
            states.push(h);
        }
        Ok(states)
    }
}

/// Output of [`bi_encode_on`].
#[derive(Clone, Debug)]
pub struct Encoded {
    /// `[T × 2H]`; row t is `concat(forward[t], backward[t])`.
    pub outputs: NodeId,
    pub forward: Vec<NodeId>,
    pub backward: Vec<NodeId>,
}

impl Encoded {
    /// Final forward state followed by final backward state.
    pub fn summary(&self, tape: &mut Tape) -> Result<NodeId> {
        let last = *self.forward.last().expect("non-empty encoding");
        let first = self.backward[0];
        tape.concat(&[last, first])
    }
}

/// Bidirectional encoding of the rows of `xs` (`[T × d]`).
pub fn bi_encode_on(tape: &mut Tape, xs: NodeId, fwd: &BoundCell, bwd: &BoundCell) -> Result<Encoded> {
    let shape = tape.shape(xs).to_vec();
    if shape.len() != 2 {
        return Err(NluError::Shape {
            op: "bi_encode",
            left: shape,
            right: vec![],
        });
    }
    if shape[0] == 0 {
        return Err(NluError::Contract("cannot encode an empty sequence".into()));
    }
    let rows: Vec<NodeId> = (0..shape[0]).map(|t| tape.row(xs, t)).collect::<Result<_>>()?;
    let forward = fwd.run(tape, &rows)?;
    let reversed: Vec<NodeId> = rows.iter().rev().copied().collect();
    let mut backward = bwd.run(tape, &reversed)?;
    backward.reverse();
    let cat: Vec<NodeId> = forward
        .iter()
        .zip(&backward)
        .map(|(&f, &b)| tape.concat(&[f, b]))
        .collect::<Result<_>>()?;
    let outputs = tape.stack(&cat)?;
    Ok(Encoded {
        outputs,
        forward,
        backward,
    })
}

/// Projection `W [a × 2H]` and context vector `u [a]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionParams {
    pub projection: Tensor,
    pub context: Tensor,
}

impl AttentionParams {
    pub fn init<R: Rng>(input_dim: usize, attention_dim: usize, rng: &mut R) -> Self {
        let bound = (1.0 / input_dim as f64).sqrt();
        let ctx_bound = (1.0 / attention_dim as f64).sqrt();
        Self {
            projection: Tensor::uniform(&[attention_dim, input_dim], bound, rng).with_grad(true),
            context: Tensor::uniform(&[attention_dim], ctx_bound, rng).with_grad(true),
        }
    }

    pub fn from_tensors(projection: Tensor, context: Tensor) -> Result<Self> {
        if projection.shape().len() != 2 || context.shape() != [projection.rows()] {
            return Err(NluError::Shape {
                op: "attention params",
                left: projection.shape().to_vec(),
                right: context.shape().to_vec(),
            });
        }
        Ok(Self {
            projection: projection.with_grad(true),
            context: context.with_grad(true),
        })
    }

    pub fn attention_dim(&self) -> usize {
        self.projection.rows()
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.projection, &self.context]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.projection, &mut self.context]
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundAttention {
        BoundAttention {
            projection: tape.param(&self.projection),
            context: tape.param(&self.context),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BoundAttention {
    projection: NodeId,
    context: NodeId,
}

impl BoundAttention {
    /// `score_t = u · tanh(W h_t)`, `weights = softmax(score)`,
    /// `context = Σ_t weights_t h_t`. Returns `(context, weights)`.
    pub fn pool(&self, tape: &mut Tape, hs: NodeId) -> Result<(NodeId, NodeId)> {
        let hs_shape = tape.shape(hs).to_vec();
        let w_shape = tape.shape(self.projection).to_vec();
        if hs_shape.len() != 2 || hs_shape[1] != w_shape[1] {
            return Err(NluError::Shape {
                op: "attention_pool",
                left: hs_shape,
                right: w_shape,
            });
        }
        let wt = tape.transpose(self.projection)?;
        let proj = tape.matmul(hs, wt)?;
        let proj = tape.tanh(proj);
        let scores = tape.matvec(proj, self.context)?;
        let weights = tape.softmax(scores)?;
        let hs_t = tape.transpose(hs)?;
        let context = tape.matvec(hs_t, weights)?;
        Ok((context, weights))
    }
}

fn with_tape<T>(f: impl FnOnce(&mut Tape) -> Result<T>) -> Result<T> {
    let mut tape = Tape::new();
    f(&mut tape)
}

pub fn lstm_step(x: &Tensor, h_prev: &Tensor, c_prev: &Tensor, p: &CellParams) -> Result<(Tensor, Tensor)> {
    with_tape(|tape| {
        let cell = p.bind(tape);
        let (x, h, c) = (tape.constant(x), tape.constant(h_prev), tape.constant(c_prev));
        let (h, c) = cell.lstm_step(tape, x, h, c)?;
        Ok((tape.tensor(h), tape.tensor(c)))
    })
}

pub fn gru_step(x: &Tensor, h_prev: &Tensor, p: &CellParams) -> Result<Tensor> {
    with_tape(|tape| {
        let cell = p.bind(tape);
        let (x, h) = (tape.constant(x), tape.constant(h_prev));
        let h = cell.gru_step(tape, x, h)?;
        Ok(tape.tensor(h))
    })
}

pub fn bi_encode(xs: &Tensor, fwd: &CellParams, bwd: &CellParams) -> Result<Tensor> {
    with_tape(|tape| {
        let (f, b) = (fwd.bind(tape), bwd.bind(tape));
        let xs = tape.constant(xs);
        let enc = bi_encode_on(tape, xs, &f, &b)?;
        Ok(tape.tensor(enc.outputs))
    })
}

pub fn attention_pool(hs: &Tensor, p: &AttentionParams) -> Result<(Tensor, Tensor)> {
    with_tape(|tape| {
        let att = p.bind(tape);
        let hs = tape.constant(hs);
        let (ctx, w) = att.pool(tape, hs)?;
        Ok((tape.tensor(ctx), tape.tensor(w)))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gradcheck::{max_relative_error, numeric_gradients, FD_STEP};
    use crate::numerics::{backward, SeedStream};

    fn rng(seed: u64) -> crate::numerics::StreamRng {
        SeedStream::new(seed).rng()
    }

    fn zero_cell(kind: CellKind, d: usize, h: usize) -> CellParams {
        let mut p = CellParams::init(kind, d, h, &mut rng(0));
        for t in p.tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        p
    }

    fn randomize(p: &mut CellParams, seed: u64) {
        let mut r = rng(seed);
        for t in p.tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = r.random_range(-0.8..0.8));
        }
    }

    #[test]
    fn zero_lstm_gives_zero_state() {
        let p = zero_cell(CellKind::Lstm, 3, 4);
        let (h, c) = lstm_step(&Tensor::zeros(&[3]), &Tensor::zeros(&[4]), &Tensor::zeros(&[4]), &p).unwrap();
        assert!(h.data().iter().chain(c.data()).all(|&v| v == 0.0));
    }

    #[test]
    fn lstm_hidden_is_bounded() {
        let mut p = CellParams::init(CellKind::Lstm, 3, 5, &mut rng(1));
        randomize(&mut p, 2);
        let mut r = rng(3);
        for _ in 0..20 {
            let x = Tensor::uniform(&[3], 50.0, &mut r);
            let h = Tensor::uniform(&[5], 1.0, &mut r);
            let c = Tensor::uniform(&[5], 20.0, &mut r);
            let (h, _) = lstm_step(&x, &h, &c, &p).unwrap();
            assert!(h.data().iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let p = CellParams::init(CellKind::Lstm, 2, 3, &mut rng(1));
        assert!(p.biases[1].data().iter().all(|&v| v == 1.0));
        assert!(p.biases[0].data().iter().all(|&v| v == 0.0));
        let bound = (1.0f64 / 5.0).sqrt();
        assert!(p.weights.iter().all(|w| w.data().iter().all(|v| v.abs() <= bound)));
    }

    #[test]
    fn zero_gru_gives_zero_state() {
        let p = zero_cell(CellKind::Gru, 3, 4);
        let h = gru_step(&Tensor::zeros(&[3]), &Tensor::zeros(&[4]), &p).unwrap();
        assert!(h.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gru_state_is_convex_combination() {
        let mut p = CellParams::init(CellKind::Gru, 3, 4, &mut rng(5));
        randomize(&mut p, 6);
        let mut r = rng(7);
        for _ in 0..20 {
            let x = Tensor::uniform(&[3], 2.0, &mut r);
            let hp = Tensor::uniform(&[4], 1.0, &mut r);
            // recompute the candidate independently
            let z_and_r: Vec<Vec<f64>> = (0..2)
                .map(|g| {
                    let xh: Vec<f64> = x.data().iter().chain(hp.data()).copied().collect();
                    (0..4)
                        .map(|i| {
                            let a: f64 = p.weights[g].row(i).iter().zip(&xh).map(|(w, v)| w * v).sum::<f64>()
                                + p.biases[g].data()[i];
                            1.0 / (1.0 + (-a).exp())
                        })
                        .collect()
                })
                .collect();
            let xrh: Vec<f64> = x
                .data()
                .iter()
                .copied()
                .chain(hp.data().iter().zip(&z_and_r[1]).map(|(h, r)| h * r))
                .collect();
            let cand: Vec<f64> = (0..4)
                .map(|i| {
                    (p.weights[2].row(i).iter().zip(&xrh).map(|(w, v)| w * v).sum::<f64>() + p.biases[2].data()[i]).tanh()
                })
                .collect();
            let h = gru_step(&x, &hp, &p).unwrap();
            for i in 0..4 {
                let (lo, hi) = (hp.data()[i].min(cand[i]), hp.data()[i].max(cand[i]));
                assert!(h.data()[i] >= lo - 1e-12 && h.data()[i] <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn step_kind_and_shape_errors() {
        let lstm = CellParams::init(CellKind::Lstm, 3, 4, &mut rng(1));
        assert!(gru_step(&Tensor::zeros(&[3]), &Tensor::zeros(&[4]), &lstm).is_err());
        assert!(matches!(
            lstm_step(&Tensor::zeros(&[2]), &Tensor::zeros(&[4]), &Tensor::zeros(&[4]), &lstm),
            Err(NluError::Shape { .. })
        ));
    }

    fn cell_loss(kind: CellKind, params: &[Tensor], x: &Tensor, h: &Tensor, c: &Tensor, target: usize) -> Result<(Tape, NodeId)> {
        let p = CellParams::from_tensors(kind, 3, 4, params.to_vec())?;
        let mut tape = Tape::new();
        let cell = p.bind(&mut tape);
        let (xn, hn, cn) = (tape.constant(x), tape.constant(h), tape.constant(c));
        let out = match kind {
            CellKind::Lstm => cell.lstm_step(&mut tape, xn, hn, cn)?.0,
            CellKind::Gru => cell.gru_step(&mut tape, xn, hn)?,
        };
        let loss = tape.softmax_cross_entropy(out, target)?;
        Ok((tape, loss))
    }

    #[test]
    fn cell_gradients_match_finite_differences() {
        for kind in [CellKind::Lstm, CellKind::Gru] {
            let mut p = CellParams::init(kind, 3, 4, &mut rng(10));
            randomize(&mut p, 11);
            let params: Vec<Tensor> = p.tensors().into_iter().cloned().collect();
            let mut r = rng(12);
            let (x, h, c) = (Tensor::uniform(&[3], 1.0, &mut r), Tensor::uniform(&[4], 1.0, &mut r), Tensor::uniform(&[4], 1.0, &mut r));
            let (tape, loss) = cell_loss(kind, &params, &x, &h, &c, 2).unwrap();
            let mut g = backward(&tape, loss).unwrap();
            let analytic: Vec<Vec<f64>> = g.take_params(&tape).into_iter().map(|g| g.unwrap()).collect();
            let numeric = numeric_gradients(&params, FD_STEP, |ps| {
                let (t, l) = cell_loss(kind, ps, &x, &h, &c, 2)?;
                Ok(t.scalar(l))
            })
            .unwrap();
            let err = max_relative_error(&analytic, &numeric);
            assert!(err < 1e-6, "{kind:?}: {err}");
        }
    }

    #[test]
    fn bi_encode_single_step_and_shape() {
        let mut r = rng(20);
        let fwd = CellParams::init(CellKind::Lstm, 3, 4, &mut r);
        let bwd = CellParams::init(CellKind::Lstm, 3, 4, &mut r);
        let x = Tensor::uniform(&[1, 3], 1.0, &mut r);
        let out = bi_encode(&x, &fwd, &bwd).unwrap();
        assert_eq!(out.shape(), &[1, 8]);
        let x1 = Tensor::vector(x.row(0).to_vec());
        let z = Tensor::zeros(&[4]);
        let (hf, _) = lstm_step(&x1, &z, &z, &fwd).unwrap();
        let (hb, _) = lstm_step(&x1, &z, &z, &bwd).unwrap();
        assert_eq!(&out.data()[..4], hf.data());
        assert_eq!(&out.data()[4..], hb.data());
        let long = Tensor::uniform(&[6, 3], 1.0, &mut r);
        assert_eq!(bi_encode(&long, &fwd, &bwd).unwrap().shape(), &[6, 8]);
    }

    #[test]
    fn bi_encode_reversal_symmetry() {
        for kind in [CellKind::Lstm, CellKind::Gru] {
            let mut r = rng(21);
            let fwd = CellParams::init(kind, 3, 4, &mut r);
            let bwd = CellParams::init(kind, 3, 4, &mut r);
            let x = Tensor::uniform(&[5, 3], 1.0, &mut r);
            let rev_data: Vec<f64> = (0..5).rev().flat_map(|t| x.row(t).to_vec()).collect();
            let x_rev = Tensor::matrix(5, 3, rev_data).unwrap();
            let a = bi_encode(&x, &fwd, &bwd).unwrap();
            let b = bi_encode(&x_rev, &bwd, &fwd).unwrap();
            for t in 0..5 {
                let (ra, rb) = (a.row(t), b.row(4 - t));
                assert_eq!(&ra[..4], &rb[4..]);
                assert_eq!(&ra[4..], &rb[..4]);
            }
        }
    }

    #[test]
    fn bi_encode_is_order_sensitive() {
        let mut r = rng(22);
        let fwd = CellParams::init(CellKind::Lstm, 3, 4, &mut r);
        let bwd = CellParams::init(CellKind::Lstm, 3, 4, &mut r);
        let x = Tensor::uniform(&[4, 3], 1.0, &mut r);
        let swapped: Vec<f64> = [0, 2, 1, 3].iter().flat_map(|&t| x.row(t).to_vec()).collect();
        let y = Tensor::matrix(4, 3, swapped).unwrap();
        assert_ne!(bi_encode(&x, &fwd, &bwd).unwrap(), bi_encode(&y, &fwd, &bwd).unwrap());
        assert!(bi_encode(&x, &fwd, &bwd).unwrap() == bi_encode(&x, &fwd, &bwd).unwrap());
    }

    #[test]
    fn attention_degenerate_cases() {
        let mut r = rng(30);
        let p = AttentionParams::init(6, 3, &mut r);
        let one = Tensor::uniform(&[1, 6], 1.0, &mut r);
        let (ctx, w) = attention_pool(&one, &p).unwrap();
        assert_eq!(w.data(), &[1.0]);
        assert_eq!(ctx.data(), one.row(0));
        let row: Vec<f64> = one.row(0).to_vec();
        let same = Tensor::matrix(4, 6, row.repeat(4)).unwrap();
        let (_, w) = attention_pool(&same, &p).unwrap();
        assert!(w.data().iter().all(|&v| (v - 0.25).abs() < 1e-15));
        for seed in 0..5 {
            let hs = Tensor::uniform(&[7, 6], 2.0, &mut rng(seed));
            let (_, w) = attention_pool(&hs, &p).unwrap();
            assert!((w.data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(attention_pool(&Tensor::zeros(&[2, 5]), &p).is_err());
    }
}

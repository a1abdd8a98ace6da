use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{NluError, Result};
use crate::numerics::{backward, NodeId, OptimizerState, SeedStream, StreamRng, Tape, Tensor};
use crate::recurrent::CellKind;

/// Hyperparameters shared by every trainable model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub cell: CellKind,
    pub hidden_dim: usize,
    pub attention_dim: usize,
    /// Used only when no pretrained vectors are supplied.
    pub embedding_dim: usize,
    pub trainable_embeddings: bool,
    pub dropout: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    /// Share of the training data held out for early stopping; 0 monitors
    /// the training data itself.
    pub holdout_fraction: f64,
    /// Global gradient-norm clip; 0 disables clipping.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            cell: CellKind::Lstm,
            hidden_dim: 128,
            attention_dim: 64,
            embedding_dim: crate::embeddings::DEFAULT_DIM,
            trainable_embeddings: true,
            dropout: 0.2,
            learning_rate: 1e-3,
            max_epochs: 100,
            patience: 10,
            holdout_fraction: 0.1,
            clip_norm: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(NluError::Config(msg.to_string()));
        if self.hidden_dim == 0 || self.attention_dim == 0 || self.embedding_dim == 0 {
            return bad("dimensions must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.max_epochs == 0 || self.patience == 0 {
            return bad("max_epochs and patience must be positive");
        }
        if !(0.0..=0.5).contains(&self.holdout_fraction) {
            return bad("holdout fraction must lie in [0, 0.5]");
        }
        if !(self.clip_norm >= 0.0 && self.clip_norm.is_finite()) {
            return bad("clip norm must be non-negative");
        }
        Ok(())
    }

    pub(crate) fn stream(&self) -> SeedStream {
        SeedStream::new(self.seed)
    }

    /// Copy of this config whose seed is derived for a named sub-model.
    pub fn for_component(&self, name: &str) -> Self {
        let mut c = self.clone();
        c.seed = self.stream().derive(name, 0).seed();
        c
    }
}

/// What one `fit` run did.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_score: f64,
}

pub(crate) type DropoutCtx<'a> = Option<(&'a mut StreamRng, f64)>;

pub(crate) trait Network {
    type Example;

    /// Parameters in the exact order `loss` registers them on the tape.
    fn tensors(&self) -> Vec<&Tensor>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;
    fn loss(&self, tape: &mut Tape, example: &Self::Example, dropout: &mut DropoutCtx<'_>) -> Result<NodeId>;
    /// Weighted F1 (higher is better) used for early stopping.
    fn monitor_score(&self, examples: &[Self::Example]) -> Result<f64>;
}

fn clip(grads: &mut [Option<Vec<f64>>], max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let norm = grads.iter().flatten().flatten().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        grads.iter_mut().flatten().flatten().for_each(|g| *g *= scale);
    }
}

/// Per-example Adam updates with early stopping on the monitor score. The
/// best-scoring parameters are kept and rounded to f32, the storage
/// precision, so an in-memory model predicts exactly like a reloaded one.
pub(crate) fn fit<N: Network>(net: &mut N, examples: Vec<N::Example>, cfg: &TrainConfig) -> Result<FitSummary> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(NluError::Data("cannot train on an empty corpus".into()));
    }
    let seeds = cfg.stream();
    let (train, monitor) = split_holdout(examples, cfg.holdout_fraction, seeds.derive("holdout", 0));
    let monitor: &[N::Example] = if monitor.is_empty() { &train } else { &monitor };

    let mut opt = OptimizerState::adam(cfg.learning_rate, &net.tensors())?;
    let mut best_score = f64::NEG_INFINITY;
    let mut best_params: Vec<Tensor> = net.tensors().into_iter().cloned().collect();
    let mut best_epoch = 0;
    let mut epochs = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..cfg.max_epochs {
        epochs = epoch + 1;
        order.shuffle(&mut seeds.derive("shuffle", epoch as u64).rng());
        let mut drop_rng = seeds.derive("dropout", epoch as u64).rng();
        for &i in &order {
            let mut tape = Tape::new();
            let mut ctx: DropoutCtx<'_> = (cfg.dropout > 0.0).then_some((&mut drop_rng, cfg.dropout));
            let loss = net.loss(&mut tape, &train[i], &mut ctx)?;
            let mut grads = backward(&tape, loss)?.take_params(&tape);
            clip(&mut grads, cfg.clip_norm);
            opt.step(&mut net.tensors_mut(), &grads)?;
        }
        let score = net.monitor_score(monitor)?;
        if score > best_score {
            best_score = score;
            best_epoch = epochs;
            best_params = net.tensors().into_iter().cloned().collect();
        }
        if best_score >= 1.0 || epochs - best_epoch >= cfg.patience {
            break;
        }
    }
    for (dst, src) in net.tensors_mut().into_iter().zip(best_params) {
        *dst = src;
        dst.round_to_f32();
    }
    Ok(FitSummary {
        epochs,
        best_epoch,
        best_score,
    })
}

fn split_holdout<E>(examples: Vec<E>, fraction: f64, seed: SeedStream) -> (Vec<E>, Vec<E>) {
    let n = examples.len();
    let n_hold = (n as f64 * fraction).floor() as usize;
    if n_hold == 0 || n_hold >= n {
        return (examples, Vec::new());
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed.rng());
    let mut held = vec![false; n];
    for &i in &idx[..n_hold] {
        held[i] = true;
    }
    let (mut train, mut monitor) = (Vec::with_capacity(n - n_hold), Vec::with_capacity(n_hold));
    for (i, e) in examples.into_iter().enumerate() {
        if held[i] {
            monitor.push(e);
        } else {
            train.push(e);
        }
    }
    (train, monitor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = [
            TrainConfig { dropout: 1.0, ..Default::default() },
            TrainConfig { hidden_dim: 0, ..Default::default() },
            TrainConfig { learning_rate: 0.0, ..Default::default() },
            TrainConfig { holdout_fraction: 0.9, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
    }

    #[test]
    fn holdout_split_sizes() {
        let (t, m) = split_holdout((0..50).collect::<Vec<_>>(), 0.1, SeedStream::new(1));
        assert_eq!((t.len(), m.len()), (45, 5));
        let (t, m) = split_holdout((0..5).collect::<Vec<_>>(), 0.1, SeedStream::new(1));
        assert_eq!((t.len(), m.len()), (5, 0));
    }

    #[test]
    fn clipping_bounds_the_norm() {
        let mut g = vec![Some(vec![3.0, 4.0]), None, Some(vec![0.0])];
        clip(&mut g, 1.0);
        let n: f64 = g.iter().flatten().flatten().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-12);
    }
}

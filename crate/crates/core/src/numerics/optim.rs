use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{NluError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// First-order optimizer state. Moments are allocated once, matching the
/// parameter shapes passed at construction.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step_count: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64, params: &[&Tensor]) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(NluError::Config(format!("learning rate must be positive, got {learning_rate}")));
        }
        let moments = || -> Vec<Vec<f64>> {
            match kind {
                OptimizerKind::Adam => params.iter().map(|p| vec![0.0; p.len()]).collect(),
                OptimizerKind::Sgd => Vec::new(),
            }
        };
        Ok(Self {
            kind,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            m: moments(),
            v: moments(),
        })
    }

    pub fn adam(learning_rate: f64, params: &[&Tensor]) -> Result<Self> {
        Self::new(OptimizerKind::Adam, learning_rate, params)
    }

    pub fn sgd(learning_rate: f64, params: &[&Tensor]) -> Result<Self> {
        Self::new(OptimizerKind::Sgd, learning_rate, params)
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Applies one update. `grads[i]` belongs to `params[i]`; a missing
    /// gradient counts as zero.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Option<Vec<f64>>]) -> Result<()> {
        if grads.len() != params.len() {
            return Err(NluError::Shape {
                op: "optimizer_step",
                left: vec![params.len()],
                right: vec![grads.len()],
            });
        }
        for (p, g) in params.iter().zip(grads) {
            if let Some(g) = g {
                if g.len() != p.len() {
                    return Err(NluError::Shape {
                        op: "optimizer_step",
                        left: p.shape().to_vec(),
                        right: vec![g.len()],
                    });
                }
            }
        }
        if self.kind == OptimizerKind::Adam && self.m.len() != params.len() {
            return Err(NluError::Shape {
                op: "optimizer_step",
                left: vec![self.m.len()],
                right: vec![params.len()],
            });
        }
        self.step_count += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    if let Some(g) = g {
                        for (w, gv) in p.data_mut().iter_mut().zip(g) {
                            *w -= lr * gv;
                        }
                    }
                }
            }
            OptimizerKind::Adam => {
                let t = self.step_count as i32;
                let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
                let bc1 = 1.0 - b1.powi(t);
                let bc2 = 1.0 - b2.powi(t);
                for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
                    let (m, v) = (&mut self.m[i], &mut self.v[i]);
                    if g.is_none() && m.iter().all(|&x| x == 0.0) {
                        continue;
                    }
                    let data = p.data_mut();
                    for j in 0..data.len() {
                        let gj = g.as_ref().map_or(0.0, |g| g[j]);
                        m[j] = b1 * m[j] + (1.0 - b1) * gj;
                        v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
                        let m_hat = m[j] / bc1;
                        let v_hat = v[j] / bc2;
                        data[j] -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradients_leave_params_unchanged() {
        let mut p = Tensor::vector(vec![0.5, -0.25]);
        let before = p.clone();
        let mut opt = OptimizerState::adam(1e-3, &[&p]).unwrap();
        opt.step(&mut [&mut p], &[Some(vec![0.0, 0.0])]).unwrap();
        opt.step(&mut [&mut p], &[None]).unwrap();
        assert_eq!(p, before);
        assert_eq!(opt.step_count(), 2);
    }

    #[test]
    fn first_adam_step_closed_form() {
        let mut p = Tensor::scalar(0.0);
        let mut opt = OptimizerState::adam(1e-3, &[&p]).unwrap();
        opt.step(&mut [&mut p], &[Some(vec![1.0])]).unwrap();
        let expected = -1e-3 * 1.0 / (1.0 + 1e-8);
        assert!((p.data()[0] - expected).abs() < 1e-15);
        assert!((p.data()[0] + 9.99999e-4).abs() < 1e-9);
    }

    #[test]
    fn sgd_step() {
        let mut p = Tensor::vector(vec![1.0, 2.0]);
        let mut opt = OptimizerState::sgd(0.1, &[&p]).unwrap();
        opt.step(&mut [&mut p], &[Some(vec![1.0, -2.0])]).unwrap();
        assert_eq!(p.data(), &[0.9, 2.2]);
    }

    #[test]
    fn deterministic_and_shape_checked() {
        let run = || {
            let mut p = Tensor::vector(vec![0.3, -0.1, 0.7]);
            let mut opt = OptimizerState::adam(1e-2, &[&p]).unwrap();
            for s in 0..5 {
                let g = vec![0.1 * s as f64, -0.2, 0.05];
                opt.step(&mut [&mut p], &[Some(g)]).unwrap();
            }
            p.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
        let mut p = Tensor::vector(vec![0.0; 3]);
        let mut opt = OptimizerState::adam(1e-2, &[&p]).unwrap();
        assert!(opt.step(&mut [&mut p], &[Some(vec![0.0; 2])]).is_err());
        assert!(OptimizerState::adam(0.0, &[&p]).is_err());
    }
}

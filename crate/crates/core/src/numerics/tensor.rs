use std::sync::Arc;

use rand::Rng;

use super::PROB_FLOOR;
use crate::error::{NluError, Result};

/// Dense row-major f64 array with an immutable shape.
///
/// The buffer is reference counted so tape leaves can alias parameters
/// without copying; mutation goes through copy-on-write.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Arc<Vec<f64>>,
    requires_grad: bool,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(NluError::Contract(format!("tensor dimensions must be positive, got {shape:?}")));
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(NluError::Shape {
                op: "tensor",
                left: shape,
                right: vec![data.len()],
            });
        }
        Ok(Self {
            shape,
            data: Arc::new(data),
            requires_grad: false,
        })
    }

    pub(crate) fn from_parts(shape: Vec<usize>, data: Arc<Vec<f64>>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self {
            shape,
            data,
            requires_grad: false,
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self::from_parts(shape.to_vec(), Arc::new(vec![0.0; n]))
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self::from_parts(vec![data.len()], Arc::new(data))
    }

    pub fn scalar(value: f64) -> Self {
        Self::from_parts(Vec::new(), Arc::new(vec![value]))
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    /// Uniform in `(-bound, bound)`.
    pub fn uniform<R: Rng>(shape: &[usize], bound: f64, rng: &mut R) -> Self {
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
        Self::from_parts(shape.to_vec(), Arc::new(data))
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self::from_parts(vec![n, n], Arc::new(data))
    }

    pub fn with_grad(mut self, requires_grad: bool) -> Self {
        self.requires_grad = requires_grad;
        self
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn set_requires_grad(&mut self, requires_grad: bool) {
        self.requires_grad = requires_grad;
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn shared_data(&self) -> Arc<Vec<f64>> {
        Arc::clone(&self.data)
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        Arc::make_mut(&mut self.data).as_mut_slice()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    pub fn cols(&self) -> usize {
        if self.shape.len() == 2 {
            self.shape[1]
        } else {
            1
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    /// Rounds every entry through f32, the on-disk precision.
    pub fn round_to_f32(&mut self) {
        for v in self.data_mut() {
            *v = f64::from(*v as f32);
        }
    }
}

pub(crate) fn matmul_kernel(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += aip * bv;
            }
        }
    }
    out
}

pub(crate) fn softmax_kernel(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    out
}

/// Matrix product of two 2-D tensors.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape.len() != 2 || b.shape.len() != 2 || a.shape[1] != b.shape[0] {
        return Err(NluError::Shape {
            op: "matmul",
            left: a.shape.clone(),
            right: b.shape.clone(),
        });
    }
    let (m, k, n) = (a.shape[0], a.shape[1], b.shape[1]);
    let data = matmul_kernel(&a.data, &b.data, m, k, n);
    Ok(Tensor::from_parts(vec![m, n], Arc::new(data)))
}

/// Numerically stable softmax over a 1-D tensor.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    if logits.shape.len() != 1 {
        return Err(NluError::Shape {
            op: "softmax",
            left: logits.shape.clone(),
            right: vec![],
        });
    }
    if logits.data.iter().any(|v| !v.is_finite()) {
        return Err(NluError::NumericInput("softmax"));
    }
    Ok(Tensor::vector(softmax_kernel(&logits.data)))
}

/// `-ln(p[target])` with the probability floored at 1e-12.
pub fn cross_entropy(probs: &Tensor, target: usize) -> Result<f64> {
    let p = probs
        .data
        .get(target)
        .ok_or(NluError::Index {
            index: target,
            len: probs.len(),
        })?;
    Ok(-p.max(PROB_FLOOR).ln())
}

/// Inverted dropout. Identity at inference or when `rate == 0`.
pub fn dropout<R: Rng>(x: &Tensor, rate: f64, rng: &mut R, training: bool) -> Result<Tensor> {
    let mask = dropout_mask(x.len(), rate, rng, training)?;
    Ok(match mask {
        None => x.clone(),
        Some(mask) => {
            let data = x.data.iter().zip(&mask).map(|(v, m)| v * m).collect();
            Tensor::from_parts(x.shape.clone(), Arc::new(data))
        }
    })
}

pub(crate) fn dropout_mask<R: Rng>(n: usize, rate: f64, rng: &mut R, training: bool) -> Result<Option<Vec<f64>>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NluError::Config(format!("dropout rate must lie in [0, 1), got {rate}")));
    }
    if !training || rate == 0.0 {
        return Ok(None);
    }
    let keep = 1.0 / (1.0 - rate);
    Ok(Some(
        (0..n)
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeedStream;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Tensor {
        Tensor::uniform(&[rows, cols], 1.0, &mut SeedStream::new(seed).rng())
    }

    fn naive_matmul(a: &Tensor, b: &Tensor) -> Vec<f64> {
        let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut acc = 0.0;
                for p in 0..k {
                    acc += a.data()[i * k + p] * b.data()[p * n + j];
                }
                out[i * n + j] = acc;
            }
        }
        out
    }

    #[test]
    fn shape_must_match_data() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![2, 0], vec![]).is_err());
        assert_eq!(Tensor::new(vec![2, 3], vec![0.0; 6]).unwrap().len(), 6);
    }

    #[test]
    fn matmul_identity_and_zero() {
        let m = random_matrix(3, 3, 1);
        assert_eq!(matmul(&Tensor::identity(3), &m).unwrap(), m);
        let z = matmul(&m, &Tensor::zeros(&[3, 3])).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let a = random_matrix(3, 4, 2);
        let b = random_matrix(4, 2, 3);
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.shape(), &[3, 2]);
        for (x, y) in c.data().iter().zip(naive_matmul(&a, &b)) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let err = matmul(&random_matrix(3, 4, 1), &random_matrix(3, 2, 1)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[3, 4]") && msg.contains("[3, 2]"), "{msg}");
    }

    #[test]
    fn softmax_cases() {
        let u = softmax(&Tensor::vector(vec![0.0; 3])).unwrap();
        for v in u.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
        let s = softmax(&Tensor::vector(vec![1.0, 2.0, 3.0])).unwrap();
        let denom = 1f64.exp() + 2f64.exp() + 3f64.exp();
        for (i, v) in s.data().iter().enumerate() {
            assert!((v - ((i + 1) as f64).exp() / denom).abs() < 1e-12);
        }
        assert!(matches!(
            softmax(&Tensor::vector(vec![1.0, f64::NAN])),
            Err(NluError::NumericInput(_))
        ));
        assert!(softmax(&Tensor::vector(vec![f64::INFINITY])).is_err());
    }

    #[test]
    fn cross_entropy_cases() {
        let onehot = Tensor::vector(vec![0.0, 1.0, 0.0]);
        assert_eq!(cross_entropy(&onehot, 1).unwrap(), 0.0);
        let uniform = Tensor::vector(vec![0.1; 10]);
        assert!((cross_entropy(&uniform, 4).unwrap() - 2.302585).abs() < 1e-6);
        assert!(matches!(cross_entropy(&uniform, 10), Err(NluError::Index { .. })));
        // floor keeps the loss finite
        assert!((cross_entropy(&onehot, 0).unwrap() - (-(1e-12f64).ln())).abs() < 1e-9);
        let probs = softmax(&Tensor::vector(vec![0.3, -1.2, 2.0, 0.1])).unwrap();
        for t in 0..4 {
            assert!((cross_entropy(&probs, t).unwrap() + probs.data()[t].ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn dropout_cases() {
        let x = Tensor::vector(vec![1.0; 100_000]);
        let mut rng = SeedStream::new(11).rng();
        assert_eq!(dropout(&x, 0.3, &mut rng, false).unwrap(), x);
        assert_eq!(dropout(&x, 0.0, &mut rng, true).unwrap(), x);
        let y = dropout(&x, 0.3, &mut rng, true).unwrap();
        let mean = y.data().iter().sum::<f64>() / y.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        let zeros = y.data().iter().filter(|&&v| v == 0.0).count() as f64 / y.len() as f64;
        assert!((zeros - 0.3).abs() < 0.01);
        assert!(matches!(dropout(&x, 1.0, &mut rng, true), Err(NluError::Config(_))));
    }
}

//! Softmax classifier (linear or one hidden ReLU layer) with hand-written
//! reverse-mode gradients and an Adam optimizer.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    #[default]
    Linear,
    Mlp { hidden: usize },
}

/// Model parameters stored as one flat vector.
///
/// Layout, each weight matrix row-major `in × out`:
/// * Linear: `W (D×C)`, `b (C)`
/// * MLP: `W1 (D×H)`, `b1 (H)`, `W2 (H×C)`, `b2 (C)`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub architecture: Architecture,
    pub feature_dim: usize,
    pub num_classes: usize,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Dense {
    input: usize,
    output: usize,
    offset: usize,
}

impl Dense {
    fn weights<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.offset..self.offset + self.input * self.output]
    }

    fn bias<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        let start = self.offset + self.input * self.output;
        &p[start..start + self.output]
    }

    fn size(&self) -> usize {
        (self.input + 1) * self.output
    }

    /// `x W + b` for every row of `x`.
    fn apply(&self, p: &[f64], x: &Matrix) -> Matrix {
        let (w, b) = (self.weights(p), self.bias(p));
        let mut out = Matrix::zeros(x.rows(), self.output);
        for r in 0..x.rows() {
            let o = out.row_mut(r);
            o.copy_from_slice(b);
            for (i, &xi) in x.row(r).iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                for (oj, &wij) in o.iter_mut().zip(&w[i * self.output..(i + 1) * self.output]) {
                    *oj += xi * wij;
                }
            }
        }
        out
    }

    /// Accumulates `dW = xᵀ dz`, `db = Σ dz` into `grad` and returns `dz Wᵀ`.
    fn backward(&self, p: &[f64], x: &Matrix, dz: &Matrix, grad: &mut [f64]) -> Matrix {
        let w = self.weights(p);
        let (gw, gb) = grad[self.offset..self.offset + self.size()].split_at_mut(self.input * self.output);
        let mut dx = Matrix::zeros(x.rows(), self.input);
        for r in 0..x.rows() {
            let dzr = dz.row(r);
            for (gbj, &d) in gb.iter_mut().zip(dzr) {
                *gbj += d;
            }
            let xr = x.row(r);
            let dxr = dx.row_mut(r);
            for i in 0..self.input {
                let wrow = &w[i * self.output..(i + 1) * self.output];
                let grow = &mut gw[i * self.output..(i + 1) * self.output];
                let mut acc = 0.0;
                for j in 0..self.output {
                    grow[j] += xr[i] * dzr[j];
                    acc += dzr[j] * wrow[j];
                }
                dxr[i] = acc;
            }
        }
        dx
    }
}

impl ModelParams {
    /// Random initialization: He-normal for layers feeding a ReLU, Xavier-normal
    /// otherwise; biases start at zero.
    pub fn init(architecture: Architecture, feature_dim: usize, num_classes: usize, rng: &mut Rng) -> Result<Self> {
        if feature_dim == 0 || num_classes < 2 {
            return Err(Error::arg("model needs feature_dim >= 1 and num_classes >= 2"));
        }
        if let Architecture::Mlp { hidden: 0 } = architecture {
            return Err(Error::arg("hidden width must be >= 1"));
        }
        let mut model = Self {
            architecture,
            feature_dim,
            num_classes,
            params: Vec::new(),
        };
        let layers = model.layers();
        let relu_inputs = layers.len() > 1;
        for (k, layer) in layers.iter().enumerate() {
            let std = if relu_inputs && k == 0 {
                (2.0 / layer.input as f64).sqrt()
            } else {
                (2.0 / (layer.input + layer.output) as f64).sqrt()
            };
            model
                .params
                .extend((0..layer.input * layer.output).map(|_| rng.normal(0.0, std)));
            model.params.extend(std::iter::repeat_n(0.0, layer.output));
        }
        Ok(model)
    }

    /// All-zero parameters.
    pub fn zeros(architecture: Architecture, feature_dim: usize, num_classes: usize) -> Self {
        let mut model = Self {
            architecture,
            feature_dim,
            num_classes,
            params: Vec::new(),
        };
        model.params = vec![0.0; model.num_params()];
        model
    }

    fn layers(&self) -> Vec<Dense> {
        match self.architecture {
            Architecture::Linear => vec![Dense {
                input: self.feature_dim,
                output: self.num_classes,
                offset: 0,
            }],
            Architecture::Mlp { hidden } => {
                let first = Dense {
                    input: self.feature_dim,
                    output: hidden,
                    offset: 0,
                };
                let second = Dense {
                    input: hidden,
                    output: self.num_classes,
                    offset: first.size(),
                };
                vec![first, second]
            }
        }
    }

    pub fn num_params(&self) -> usize {
        self.layers().iter().map(Dense::size).sum()
    }

    fn check(&self, features: &Matrix) -> Result<()> {
        if self.params.len() != self.num_params() {
            return Err(Error::arg("parameter vector does not match architecture"));
        }
        if features.cols() != self.feature_dim {
            return Err(Error::arg(format!(
                "features have {} columns, model expects {}",
                features.cols(),
                self.feature_dim
            )));
        }
        if features.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("non-finite input feature"));
        }
        Ok(())
    }

    /// Pre-softmax scores and, for the MLP, the hidden activations.
    fn logits(&self, features: &Matrix) -> (Matrix, Option<(Matrix, Matrix)>) {
        let layers = self.layers();
        match layers.as_slice() {
            [out] => (out.apply(&self.params, features), None),
            [hidden, out] => {
                let pre = hidden.apply(&self.params, features);
                let mut act = pre.clone();
                act.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
                (out.apply(&self.params, &act), Some((pre, act)))
            }
            _ => unreachable!(),
        }
    }

    /// Softmax class probabilities, one row per input row.
    pub fn forward(&self, features: &Matrix) -> Result<Matrix> {
        self.check(features)?;
        let (mut z, _) = self.logits(features);
        softmax_rows(&mut z);
        Ok(z)
    }

    /// Parameter gradient of a loss given `∂loss/∂probs` (same shape as the
    /// forward output). The forward pass is recomputed.
    pub fn backward(&self, features: &Matrix, grad_probs: &Matrix) -> Result<Vec<f64>> {
        self.check(features)?;
        if grad_probs.rows() != features.rows() || grad_probs.cols() != self.num_classes {
            return Err(Error::arg("upstream gradient has the wrong shape"));
        }
        let mut grad = vec![0.0; self.params.len()];
        self.backward_into(features, grad_probs, 1.0, &mut grad)?;
        Ok(grad)
    }

    /// Adds `scale · ∂loss/∂params` into `grad`.
    pub fn backward_into(&self, features: &Matrix, grad_probs: &Matrix, scale: f64, grad: &mut [f64]) -> Result<()> {
        let (mut probs, hidden) = self.logits(features);
        softmax_rows(&mut probs);
        // Softmax Jacobian-vector product: dz = p ⊙ (g − ⟨g, p⟩).
        let mut dz = Matrix::zeros(probs.rows(), probs.cols());
        for r in 0..probs.rows() {
            let (p, g) = (probs.row(r), grad_probs.row(r));
            let dot: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
            for ((d, &pi), &gi) in dz.row_mut(r).iter_mut().zip(p).zip(g) {
                *d = scale * pi * (gi - dot);
            }
        }
        let layers = self.layers();
        match (layers.as_slice(), hidden) {
            ([out], None) => {
                out.backward(&self.params, features, &dz, grad);
            }
            ([first, out], Some((pre, act))) => {
                let mut dact = out.backward(&self.params, &act, &dz, grad);
                for (d, &a) in dact.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                }
                first.backward(&self.params, features, &dact, grad);
            }
            _ => unreachable!(),
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|v| v.is_finite())
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let model: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        if model.params.len() != model.num_params() {
            return Err(Error::arg("checkpoint parameter count does not match architecture"));
        }
        Ok(model)
    }
}

/// In-place row softmax with max subtraction.
pub fn softmax_rows(z: &mut Matrix) {
    for r in 0..z.rows() {
        let row = z.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(num_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len(), "adam buffer shape mismatch");
        assert_eq!(grad.len(), self.m.len(), "adam gradient shape mismatch");
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn features(rows: usize, dim: usize, rng: &mut Rng) -> Matrix {
        Matrix::from_vec(rows, dim, (0..rows * dim).map(|_| rng.gauss()).collect())
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = ModelParams::zeros(Architecture::Linear, 3, 4);
        let p = m.forward(&Matrix::from_rows(&[&[1.0, -2.0, 0.5]])).unwrap();
        for &v in p.row(0) {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_shift_invariant() {
        let mut a = Matrix::from_rows(&[&[0.3, -1.2, 2.0]]);
        let mut b = Matrix::from_rows(&[&[100.3, 98.8, 102.0]]);
        softmax_rows(&mut a);
        softmax_rows(&mut b);
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn saturation() {
        let mut m = ModelParams::zeros(Architecture::Linear, 1, 2);
        m.params[0] = 500.0;
        m.params[1] = -500.0;
        let p = m.forward(&Matrix::from_rows(&[&[1.0]])).unwrap();
        assert!((p.get(0, 0) - 1.0).abs() < 1e-15);
        assert!(p.get(0, 1) < 1e-300);
    }

    #[test]
    fn nan_input_rejected() {
        let m = ModelParams::zeros(Architecture::Linear, 2, 2);
        assert!(m.forward(&Matrix::from_rows(&[&[f64::NAN, 0.0]])).is_err());
        assert!(m.forward(&Matrix::from_rows(&[&[0.0, 0.0, 0.0]])).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let mut rng = Rng::new(0);
        for arch in [Architecture::Linear, Architecture::Mlp { hidden: 5 }] {
            let m = ModelParams::init(arch, 4, 3, &mut rng).unwrap();
            let x = features(6, 4, &mut rng);
            let g = m.backward(&x, &Matrix::zeros(6, 3)).unwrap();
            assert!(g.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn dead_relu_blocks_first_layer() {
        let mut rng = Rng::new(1);
        let mut m = ModelParams::init(Architecture::Mlp { hidden: 4 }, 3, 2, &mut rng).unwrap();
        // Force all first-layer pre-activations negative: zero weights, negative bias.
        for v in &mut m.params[..12] {
            *v = 0.0;
        }
        for v in &mut m.params[12..16] {
            *v = -1.0;
        }
        let x = features(5, 3, &mut rng);
        let up = Matrix::from_vec(5, 2, (0..10).map(|_| rng.gauss()).collect());
        let g = m.backward(&x, &up).unwrap();
        assert!(g[..16].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_matches_finite_differences_of_linear_functional() {
        // f(θ) = Σ u ⊙ softmax(xθ) for a fixed random u.
        let mut rng = Rng::new(2);
        for arch in [Architecture::Linear, Architecture::Mlp { hidden: 6 }] {
            let m = ModelParams::init(arch, 3, 4, &mut rng).unwrap();
            let x = features(5, 3, &mut rng);
            let u = Matrix::from_vec(5, 4, (0..20).map(|_| rng.gauss()).collect());
            let f = |model: &ModelParams| -> f64 {
                let p = model.forward(&x).unwrap();
                p.as_slice().iter().zip(u.as_slice()).map(|(a, b)| a * b).sum()
            };
            let g = m.backward(&x, &u).unwrap();
            let h = 1e-6;
            for i in 0..m.params.len() {
                let mut plus = m.clone();
                plus.params[i] += h;
                let mut minus = m.clone();
                minus.params[i] -= h;
                let fd = (f(&plus) - f(&minus)) / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + fd.abs()), "{arch:?} param {i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut params = vec![1.0, -1.0, 0.0];
        let mut adam = AdamState::new(3, 0.1);
        adam.update(&mut params, &[2.0, -3.0, 0.0]);
        assert!((params[0] - 0.9).abs() < 1e-7);
        assert!((params[1] + 0.9).abs() < 1e-7);
        assert_eq!(params[2], 0.0);
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut x = vec![3.0, -2.0];
        let mut adam = AdamState::new(2, 0.05);
        for _ in 0..2000 {
            let g: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
            adam.update(&mut x, &g);
        }
        assert!(x.iter().all(|v| v.abs() < 1e-3), "{x:?}");
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let m = ModelParams::init(Architecture::Mlp { hidden: 3 }, 2, 3, &mut Rng::new(4)).unwrap();
        m.save_json(&path).unwrap();
        assert_eq!(ModelParams::load_json(&path).unwrap(), m);
    }
}

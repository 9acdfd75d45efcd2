//! Bag-level losses with gradients w.r.t. per-instance class probabilities.
//!
//! Losses see only the predicted probabilities and the bag's proportion label;
//! they have no access to instance labels.

use crate::data::{ProportionVector, SIMPLEX_TOL};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::mixbag::{ci_bounds, MixedBagLabel};

/// Clamp inside the logarithm; gradients vanish below it.
pub const LOG_EPS: f64 = 1e-12;

/// Row-simplex tolerance accepted for instance probabilities.
pub const ROW_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct BagPrediction {
    instance_probs: Matrix,
    bag_estimate: ProportionVector,
}

impl BagPrediction {
    pub fn new(instance_probs: Matrix) -> Result<Self> {
        let bag_estimate = bag_estimate(&instance_probs)?;
        Ok(Self {
            instance_probs,
            bag_estimate,
        })
    }

    pub fn instance_probs(&self) -> &Matrix {
        &self.instance_probs
    }

    pub fn bag_estimate(&self) -> &ProportionVector {
        &self.bag_estimate
    }

    pub fn bag_size(&self) -> usize {
        self.instance_probs.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.instance_probs.cols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValueWithGrad {
    pub value: f64,
    /// Same shape as the instance probabilities.
    pub grad_instance_probs: Matrix,
}

/// Mean predicted probability per class.
pub fn bag_estimate(instance_probs: &Matrix) -> Result<ProportionVector> {
    let (n, c) = (instance_probs.rows(), instance_probs.cols());
    if n == 0 {
        return Err(Error::arg("bag estimate of an empty bag"));
    }
    let mut mean = vec![0.0; c];
    for (r, row) in instance_probs.iter_rows().enumerate() {
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > ROW_TOL || row.iter().any(|&p| !(0.0..=1.0 + ROW_TOL).contains(&p)) {
            return Err(Error::arg(format!("row {r} is not a probability vector")));
        }
        for (m, &p) in mean.iter_mut().zip(row) {
            *m += p;
        }
    }
    for m in &mut mean {
        *m = (*m / n as f64).min(1.0);
    }
    let total: f64 = mean.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOL {
        // Only reachable for rows off the simplex by more than rounding.
        mean.iter_mut().for_each(|m| *m /= total);
    }
    ProportionVector::new(mean)
}

/// `-Σ_c w_c log(max(p̂_c, ε))`, gradient `-w_c / (|B| p̂_c)` per instance.
/// Terms with `w_c == 0` contribute nothing.
fn weighted_log_loss(pred: &BagPrediction, weights: &[f64]) -> LossValueWithGrad {
    let n = pred.bag_size();
    let est = pred.bag_estimate.as_slice();
    let mut value = 0.0;
    let mut col_grad = vec![0.0; weights.len()];
    for (c, (&w, &p)) in weights.iter().zip(est).enumerate() {
        if w == 0.0 {
            continue;
        }
        value -= w * p.max(LOG_EPS).ln();
        if p > LOG_EPS {
            col_grad[c] = -w / (n as f64 * p);
        }
    }
    let mut grad = Matrix::zeros(n, weights.len());
    for r in 0..n {
        grad.row_mut(r).copy_from_slice(&col_grad);
    }
    LossValueWithGrad {
        value,
        grad_instance_probs: grad,
    }
}

fn check_classes(pred: &BagPrediction, c: usize) -> Result<()> {
    if pred.num_classes() != c {
        return Err(Error::arg(format!(
            "prediction has {} classes, label has {c}",
            pred.num_classes()
        )));
    }
    Ok(())
}

/// Cross-entropy between the bag label and the bag estimate.
pub fn proportion_loss(pred: &BagPrediction, target: &ProportionVector) -> Result<LossValueWithGrad> {
    check_classes(pred, target.num_classes())?;
    Ok(weighted_log_loss(pred, target.as_slice()))
}

/// Per-class indicator: `true` (loss active) when the bag estimate falls
/// outside the label's confidence interval.
pub fn ci_gates(pred: &BagPrediction, label: &MixedBagLabel) -> Result<Vec<bool>> {
    check_classes(pred, label.num_classes())?;
    Ok(ci_bounds(label)
        .iter()
        .zip(pred.bag_estimate.as_slice())
        .map(|(iv, &p)| !iv.contains(p))
        .collect())
}

/// Proportion loss against `expected` with a fixed per-class gate.
pub fn gated_loss(pred: &BagPrediction, expected: &ProportionVector, gates: &[bool]) -> Result<LossValueWithGrad> {
    check_classes(pred, expected.num_classes())?;
    if gates.len() != expected.num_classes() {
        return Err(Error::arg("gate vector has the wrong length"));
    }
    let weights: Vec<f64> = expected
        .as_slice()
        .iter()
        .zip(gates)
        .map(|(&p, &on)| if on { p } else { 0.0 })
        .collect();
    Ok(weighted_log_loss(pred, &weights))
}

/// Confidence-interval loss: proportion loss whose class terms are dropped
/// while the bag estimate lies inside that class's interval. Gates are
/// re-evaluated on every call and treated as constants for the gradient.
pub fn ci_loss(pred: &BagPrediction, label: &MixedBagLabel) -> Result<LossValueWithGrad> {
    let gates = ci_gates(pred, label)?;
    gated_loss(pred, &label.expected, &gates)
}

/// Shannon entropy in nats, with `0 log 0 = 0`.
pub fn entropy(p: &ProportionVector) -> f64 {
    -p.as_slice()
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

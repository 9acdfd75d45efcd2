//! Finite-difference checks of the loss and model gradients.

use mixbag_core::loss::{ci_gates, ci_loss, proportion_loss, BagPrediction, LossValueWithGrad};
use mixbag_core::mixbag::MixedBagLabel;
use mixbag_core::model::softmax_rows;
use mixbag_core::{Architecture, Matrix, ModelParams, ProportionVector, Rng};

const H: f64 = 1e-6;

fn random_simplex(c: usize, rng: &mut Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..c).map(|_| 0.05 + rng.uniform()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

fn random_probs(n: usize, c: usize, rng: &mut Rng) -> Matrix {
    let mut z = Matrix::from_vec(n, c, (0..n * c).map(|_| rng.gauss()).collect());
    softmax_rows(&mut z);
    z
}

fn random_label(c: usize, rng: &mut Rng) -> MixedBagLabel {
    MixedBagLabel {
        expected: ProportionVector::new(random_simplex(c, rng)).unwrap(),
        sigma: (0..c).map(|_| 0.1 * rng.uniform()).collect(),
        alpha: 2.576,
        gamma: 0.5,
        parent_ids: (0, 1),
    }
}

/// Replaces row `r` by `(p + h e_c) / (1 + h)`.
fn perturbed(p: &Matrix, r: usize, c: usize, h: f64) -> Matrix {
    let mut q = p.clone();
    let row = q.row_mut(r);
    row[c] += h;
    row.iter_mut().for_each(|v| *v /= 1.0 + h);
    q
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na.max(nb) < 1e-12 {
        diff
    } else {
        diff / na.max(nb)
    }
}

/// Compares the analytic gradient, projected onto the renormalized-row
/// perturbation direction `e_c - p_r`, with central differences.
fn check_prob_space<F>(probs: &Matrix, f: F) -> Option<f64>
where
    F: Fn(&Matrix) -> (LossValueWithGrad, Vec<bool>),
{
    let (base, base_gates) = f(probs);
    let g = &base.grad_instance_probs;
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for r in 0..probs.rows() {
        let dot: f64 = g.row(r).iter().zip(probs.row(r)).map(|(a, b)| a * b).sum();
        for c in 0..probs.cols() {
            let (plus, gp) = f(&perturbed(probs, r, c, H));
            let (minus, gm) = f(&perturbed(probs, r, c, -H));
            if gp != base_gates || gm != base_gates {
                return None;
            }
            analytic.push(g.get(r, c) - dot);
            numeric.push((plus.value - minus.value) / (2.0 * H));
        }
    }
    Some(rel_err(&analytic, &numeric))
}

#[test]
fn proportion_loss_gradient_in_probability_space() {
    let mut rng = Rng::new(100);
    for case in 0..100 {
        let c = [2, 3, 10][case % 3];
        let n = 1 + rng.below(20);
        let probs = random_probs(n, c, &mut rng);
        let target = ProportionVector::new(random_simplex(c, &mut rng)).unwrap();
        let err = check_prob_space(&probs, |p| {
            let pred = BagPrediction::new(p.clone()).unwrap();
            (proportion_loss(&pred, &target).unwrap(), vec![])
        })
        .unwrap();
        assert!(err < 1e-4, "case {case}: rel err {err}");
    }
}

#[test]
fn ci_loss_gradient_in_probability_space() {
    let mut rng = Rng::new(200);
    let mut checked = 0;
    while checked < 100 {
        let c = [2, 3, 10][checked % 3];
        let n = 1 + rng.below(20);
        let probs = random_probs(n, c, &mut rng);
        let label = random_label(c, &mut rng);
        let result = check_prob_space(&probs, |p| {
            let pred = BagPrediction::new(p.clone()).unwrap();
            (ci_loss(&pred, &label).unwrap(), ci_gates(&pred, &label).unwrap())
        });
        // Cases straddling a gate boundary are resampled.
        if let Some(err) = result {
            assert!(err < 1e-4, "case {checked}: rel err {err}");
            checked += 1;
        }
    }
}

#[test]
fn composed_parameter_gradient_matches_finite_differences() {
    let mut rng = Rng::new(300);
    let mut checked = 0;
    while checked < 20 {
        let arch = if checked % 2 == 0 {
            Architecture::Linear
        } else {
            Architecture::Mlp { hidden: 5 }
        };
        let (d, c) = (3, [2, 3][checked % 2]);
        let n = 1 + rng.below(10);
        let model = ModelParams::init(arch, d, c, &mut rng).unwrap();
        let x = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.gauss()).collect());
        let label = random_label(c, &mut rng);
        let loss_at = |m: &ModelParams| {
            let pred = BagPrediction::new(m.forward(&x).unwrap()).unwrap();
            (ci_loss(&pred, &label).unwrap(), ci_gates(&pred, &label).unwrap())
        };
        let (base, gates) = loss_at(&model);
        let analytic = model.backward(&x, &base.grad_instance_probs).unwrap();
        let mut numeric = Vec::new();
        let mut straddles = false;
        for i in 0..model.params.len() {
            let mut plus = model.clone();
            plus.params[i] += H;
            let mut minus = model.clone();
            minus.params[i] -= H;
            let ((lp, gp), (lm, gm)) = (loss_at(&plus), loss_at(&minus));
            straddles |= gp != gates || gm != gates;
            numeric.push((lp.value - lm.value) / (2.0 * H));
        }
        if straddles {
            continue;
        }
        let err = rel_err(&analytic, &numeric);
        assert!(err < 1e-4, "case {checked} {arch:?}: rel err {err}");
        checked += 1;
    }
}

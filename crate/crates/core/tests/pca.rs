use mixbag_core::baggen::sample_proportion;
use mixbag_core::pca::{covariance, pca};
use mixbag_core::{mix_bags, Bag, ConfidenceDegree, Rng};
use nalgebra::{DMatrix, SymmetricEigen};

fn proportion_cloud(c: usize, n: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| sample_proportion(c, 0.15, rng).unwrap().as_slice().to_vec())
        .collect()
}

fn dense_eigenvalues(points: &[Vec<f64>]) -> Vec<f64> {
    let (_, cov) = covariance(points).unwrap();
    let d = cov.len();
    let m = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

#[test]
fn projected_variance_matches_dense_eigensolver() {
    let mut rng = Rng::new(42);
    for c in [3, 4, 5, 10] {
        let points = proportion_cloud(c, 300, &mut rng);
        let fit = pca(&points, 2).unwrap();
        let oracle = dense_eigenvalues(&points);
        for (k, &eigenvalue) in oracle.iter().take(2).enumerate() {
            let projected: Vec<f64> = points.iter().map(|p| fit.project(p)[k]).collect();
            let var = projected.iter().map(|x| x * x).sum::<f64>() / projected.len() as f64;
            assert!((var - eigenvalue).abs() < 1e-6, "C={c} axis {k}: {var} vs {eigenvalue}");
            assert!((fit.eigenvalues[k] - eigenvalue).abs() < 1e-6);
        }
        let mean_proj: f64 = points.iter().map(|p| fit.project(p)[0]).sum::<f64>() / points.len() as f64;
        assert!(mean_proj.abs() < 1e-12);
    }
}

#[test]
fn components_are_orthonormal() {
    let mut rng = Rng::new(7);
    let fit = pca(&proportion_cloud(6, 200, &mut rng), 2).unwrap();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    assert!((dot(&fit.components[0], &fit.components[0]) - 1.0).abs() < 1e-9);
    assert!((dot(&fit.components[1], &fit.components[1]) - 1.0).abs() < 1e-9);
    assert!(dot(&fit.components[0], &fit.components[1]).abs() < 1e-6);
}

#[test]
fn mixed_points_project_between_their_parents() {
    let mut rng = Rng::new(11);
    let c = 4;
    let bags: Vec<Bag> = (0..30)
        .map(|k| Bag::new((k * 100..(k + 1) * 100).collect(), sample_proportion(c, 0.15, &mut rng).unwrap()).unwrap())
        .collect();
    let mut points: Vec<Vec<f64>> = bags.iter().map(|b| b.label.as_slice().to_vec()).collect();
    let mut mixed = Vec::new();
    for _ in 0..200 {
        let i = rng.below(bags.len());
        let j = (i + 1 + rng.below(bags.len() - 1)) % bags.len();
        let gamma = rng.uniform();
        let m = mix_bags(&bags, i, j, gamma, ConfidenceDegree::P99, &mut rng).unwrap();
        points.push(m.label.expected.as_slice().to_vec());
        mixed.push(m);
    }
    let fit = pca(&points, 2).unwrap();
    for m in &mixed {
        let (i, j) = m.label.parent_ids;
        let g = m.label.gamma;
        let (pi, pj) = (fit.project(bags[i].label.as_slice()), fit.project(bags[j].label.as_slice()));
        let pm = fit.project(m.label.expected.as_slice());
        for k in 0..2 {
            let expected = g * pi[k] + (1.0 - g) * pj[k];
            assert!((pm[k] - expected).abs() < 1e-9, "{} vs {expected}", pm[k]);
        }
    }
}

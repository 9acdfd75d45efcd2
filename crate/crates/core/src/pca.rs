//! Principal components of small point sets via power iteration with deflation
//! on the sample covariance.

use crate::error::{Error, Result};

pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITERS: usize = 10_000;
/// Variance (std 1e-12) below which a direction carries no spread.
const ABS_VARIANCE_FLOOR: f64 = 1e-24;

#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Unit-norm principal axes; zero vectors where the covariance had no
    /// remaining variance.
    pub components: Vec<Vec<f64>>,
    /// Covariance eigenvalue for each component (population normalization).
    pub eigenvalues: Vec<f64>,
    /// Number of components that carry variance.
    pub rank: usize,
}

impl Pca {
    pub fn project(&self, point: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|axis| {
                axis.iter()
                    .zip(point.iter().zip(&self.mean))
                    .map(|(a, (x, m))| a * (x - m))
                    .sum()
            })
            .collect()
    }
}

/// Population covariance (divides by `n`) of mean-centred points.
pub fn covariance(points: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = points.len();
    if n == 0 {
        return Err(Error::arg("no points"));
    }
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::arg("points have differing dimensions"));
    }
    let mut mean = vec![0.0; d];
    for p in points {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = vec![vec![0.0; d]; d];
    for p in points {
        for i in 0..d {
            let di = p[i] - mean[i];
            for j in 0..d {
                cov[i][j] += di * (p[j] - mean[j]);
            }
        }
    }
    for row in &mut cov {
        row.iter_mut().for_each(|v| *v /= n as f64);
    }
    Ok((mean, cov))
}

fn mat_vec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Top-`k` principal components.
pub fn pca(points: &[Vec<f64>], k: usize) -> Result<Pca> {
    let (mean, mut cov) = covariance(points)?;
    let d = mean.len();
    let scale = (0..d).map(|i| cov[i][i]).sum::<f64>();
    // Eigenvalues below this are treated as numerical zero. The absolute part
    // absorbs rounding in the mean when all points coincide.
    let floor = (1e-12 * scale).max(ABS_VARIANCE_FLOOR);
    let mut components = Vec::with_capacity(k);
    let mut eigenvalues = Vec::with_capacity(k);
    let mut rank = 0;

    for _ in 0..k.min(d) {
        // Generic start vector; all-ones would lie in the null space of
        // covariances of simplex-valued data.
        let mut v: Vec<f64> = (0..d).map(|i| 1.0 + ((i + 1) as f64).sqrt().fract() + i as f64 * 0.37).collect();
        orthogonalize(&mut v, &components);
        normalize(&mut v);
        let mut lambda = 0.0;
        for _ in 0..POWER_MAX_ITERS {
            let mut w = mat_vec(&cov, &v);
            orthogonalize(&mut w, &components);
            if normalize(&mut w) <= floor {
                lambda = 0.0;
                break;
            }
            let delta = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = w;
            lambda = dot(&v, &mat_vec(&cov, &v));
            if delta < POWER_TOL {
                break;
            }
        }
        if lambda <= floor {
            break;
        }
        // Sign convention: largest-magnitude entry positive.
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        for i in 0..d {
            for j in 0..d {
                cov[i][j] -= lambda * v[i] * v[j];
            }
        }
        components.push(v);
        eigenvalues.push(lambda);
        rank += 1;
    }
    while components.len() < k {
        components.push(vec![0.0; d]);
        eigenvalues.push(0.0);
    }
    Ok(Pca {
        mean,
        components,
        eigenvalues,
        rank,
    })
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(v, b);
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn identical_points_have_no_components() {
        let pts = vec![vec![0.2, 0.3, 0.5]; 5];
        let p = pca(&pts, 2).unwrap();
        assert_eq!(p.rank, 0);
        assert_eq!(p.eigenvalues, vec![0.0, 0.0]);
        assert_eq!(p.project(&pts[0]), vec![0.0, 0.0]);
    }

    #[test]
    fn axis_aligned_spread() {
        // Variance 4 on x, 1 on y, none on z.
        let pts = vec![
            vec![2.0, 0.0, 1.0],
            vec![-2.0, 0.0, 1.0],
            vec![0.0, 1.0, 1.0],
            vec![0.0, -1.0, 1.0],
        ];
        let p = pca(&pts, 3).unwrap();
        assert_eq!(p.rank, 2);
        assert!((p.eigenvalues[0] - 2.0).abs() < 1e-9);
        assert!((p.eigenvalues[1] - 0.5).abs() < 1e-9);
        assert!((p.components[0][0] - 1.0).abs() < 1e-9);
        assert!((p.components[1][1] - 1.0).abs() < 1e-9);
        assert_eq!(p.components[2], vec![0.0; 3]);
    }

    #[test]
    fn components_are_orthonormal() {
        let mut rng = Rng::new(3);
        let pts: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..4).map(|k| rng.gauss() * (k + 1) as f64).collect())
            .collect();
        let p = pca(&pts, 3).unwrap();
        for i in 0..3 {
            assert!((dot(&p.components[i], &p.components[i]) - 1.0).abs() < 1e-9);
            for j in 0..i {
                assert!(dot(&p.components[i], &p.components[j]).abs() < 1e-8);
            }
        }
        assert!(p.eigenvalues.windows(2).all(|w| w[0] >= w[1] - 1e-12));
    }

    #[test]
    fn rejects_ragged_input() {
        assert!(pca(&[vec![1.0], vec![1.0, 2.0]], 1).is_err());
        assert!(pca(&[], 1).is_err());
    }
}

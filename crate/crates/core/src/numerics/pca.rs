use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::linalg::{Matrix, Vector};
use crate::error::{Error, Result};

/// Linear projection onto the leading principal components of a sample set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaTransform {
    pub mean: Vector,
    /// One component per row, `components x input_dim`.
    pub basis: Matrix,
    pub energy_retained: f64,
}

impl PcaTransform {
    pub fn input_dim(&self) -> usize {
        self.basis.cols()
    }

    pub fn components(&self) -> usize {
        self.basis.rows()
    }

    pub fn apply(&self, v: &Vector) -> Result<Vector> {
        pca_apply(self, v)
    }

    /// Maps projected coordinates back into input space.
    pub fn reconstruct(&self, z: &Vector) -> Result<Vector> {
        self.basis.tr_matvec(z)?.add(&self.mean)
    }
}

/// Fits a PCA keeping the fewest components whose eigenvalue mass reaches
/// `energy` of the total.
///
/// The covariance is decomposed exactly. Eigenvalues are ordered descending
/// (ties keep decomposition order) and each basis row is signed so that its
/// largest-magnitude entry is positive.
pub fn pca_fit(samples: &[Vector], energy: f64) -> Result<PcaTransform> {
    if samples.len() < 2 {
        return Err(Error::Invalid(format!(
            "pca needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if !(energy > 0.0 && energy <= 1.0) {
        return Err(Error::Invalid(format!("pca energy {energy} not in (0, 1]")));
    }
    let dim = samples[0].len();
    if dim == 0 {
        return Err(Error::Empty("pca_fit"));
    }
    for (i, s) in samples.iter().enumerate() {
        if s.len() != dim {
            return Err(Error::shape(
                "pca_fit",
                format!("sample 0 len {dim}"),
                format!("sample {i} len {}", s.len()),
            ));
        }
    }

    let n = samples.len() as f64;
    let mut mean = vec![0.0; dim];
    for s in samples {
        for (m, x) in mean.iter_mut().zip(s.iter()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    let mut centered = vec![0.0; dim];
    for s in samples {
        for ((c, x), m) in centered.iter_mut().zip(s.iter()).zip(&mean) {
            *c = x - m;
        }
        for i in 0..dim {
            if centered[i] == 0.0 {
                continue;
            }
            for j in i..dim {
                cov[(i, j)] += centered[i] * centered[j];
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            let v = cov[(i, j)] / (n - 1.0);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = values.iter().sum();
    // Identical samples leave only rounding noise in the covariance.
    let magnitude = 1.0 + mean.iter().map(|m| m * m).sum::<f64>();
    if !(total > 1e-24 * magnitude) {
        return Err(Error::Degenerate("covariance is zero (identical samples)".into()));
    }

    let mut kept = 0;
    let mut cumulative = 0.0;
    for &v in &values {
        cumulative += v;
        kept += 1;
        if cumulative >= energy * total {
            break;
        }
    }

    let mut basis = Matrix::zeros(kept, dim);
    for (r, &col) in order.iter().take(kept).enumerate() {
        let v = eig.eigenvectors.column(col);
        let mut pivot = 0;
        for i in 1..dim {
            if v[i].abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for c in 0..dim {
            basis.set(r, c, sign * v[c]);
        }
    }

    Ok(PcaTransform {
        mean: Vector::from(mean),
        basis,
        energy_retained: cumulative / total,
    })
}

pub fn pca_apply(t: &PcaTransform, v: &Vector) -> Result<Vector> {
    if v.len() != t.input_dim() {
        return Err(Error::shape(
            "pca_apply",
            format!("transform input dim {}", t.input_dim()),
            format!("vector len {}", v.len()),
        ));
    }
    let centered = v.sub(&t.mean)?;
    t.basis.matvec(&centered)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::seeded_rng;

    fn max_orthonormal_defect(b: &Matrix) -> f64 {
        let g = b.matmul(&b.transpose()).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g.get(i, j) - target).abs());
            }
        }
        worst
    }

    fn line_samples() -> Vec<Vector> {
        let dir = [1.0, -2.0, 0.5];
        (0..20)
            .map(|k| {
                let t = k as f64 * 0.3 - 2.0;
                Vector::from(vec![1.0 + t * dir[0], 2.0 + t * dir[1], -1.0 + t * dir[2]])
            })
            .collect()
    }

    #[test]
    fn rank_one_keeps_one_component() {
        let t = pca_fit(&line_samples(), 0.9).unwrap();
        assert_eq!(t.components(), 1);
        assert!(max_orthonormal_defect(&t.basis) <= 1e-8);
    }

    #[test]
    fn rank_one_round_trip_is_lossless() {
        let samples = line_samples();
        let t = pca_fit(&samples, 0.9).unwrap();
        for s in &samples {
            let back = t.reconstruct(&pca_apply(&t, s).unwrap()).unwrap();
            for (a, b) in back.iter().zip(s.iter()) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn isotropic_cloud_needs_both_components() {
        let mut rng = seeded_rng(11);
        let samples: Vec<Vector> = (0..2000)
            .map(|_| Vector::from(vec![rng.normal(), rng.normal()]))
            .collect();
        let t = pca_fit(&samples, 0.9).unwrap();
        assert_eq!(t.components(), 2);
    }

    #[test]
    fn full_energy_keeps_all_dims() {
        let mut rng = seeded_rng(5);
        let samples: Vec<Vector> = (0..30)
            .map(|_| (0..4).map(|_| rng.normal()).collect())
            .collect();
        let t = pca_fit(&samples, 1.0).unwrap();
        assert_eq!(t.components(), 4);
        assert!((t.energy_retained - 1.0).abs() < 1e-10);
        assert!(max_orthonormal_defect(&t.basis) <= 1e-8);
    }

    #[test]
    fn sign_convention_and_determinism() {
        let mut rng = seeded_rng(8);
        let samples: Vec<Vector> = (0..50)
            .map(|_| (0..5).map(|_| rng.normal()).collect())
            .collect();
        let a = pca_fit(&samples, 0.8).unwrap();
        let b = pca_fit(&samples, 0.8).unwrap();
        assert_eq!(a, b);
        for r in 0..a.components() {
            let row = a.basis.row(r);
            let pivot = row
                .iter()
                .copied()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(pivot > 0.0);
        }
    }

    #[test]
    fn apply_edge_cases() {
        let t = PcaTransform {
            mean: Vector::zeros(3),
            basis: Matrix::identity(3),
            energy_retained: 1.0,
        };
        let v = Vector::from(vec![0.5, -1.0, 2.0]);
        assert_eq!(pca_apply(&t, &v).unwrap(), v);
        let fitted = pca_fit(&line_samples(), 0.9).unwrap();
        let at_mean = pca_apply(&fitted, &fitted.mean).unwrap();
        assert!(at_mean.iter().all(|x| x.abs() < 1e-12));
        assert!(pca_apply(&fitted, &Vector::zeros(2)).is_err());
    }

    #[test]
    fn identical_samples_are_degenerate() {
        let s = vec![Vector::from(vec![1.0, 2.0]); 5];
        assert!(matches!(pca_fit(&s, 0.9), Err(Error::Degenerate(_))));
    }
}

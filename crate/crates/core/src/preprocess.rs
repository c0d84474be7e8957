//! Z-score scaling and PCA projection, fitted on training data only.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-attribute training mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    /// Fits per-column mean and (sample) standard deviation. Needs at least
    /// two instances for a meaningful deviation.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Scaler> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::invalid(format!(
                "scaler needs >= 2 training instances, got {n}"
            )));
        }
        let p = rows[0].len();
        let mut mean = vec![0.0; p];
        for row in rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        let mut var = vec![0.0; p];
        for row in rows {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                let d = v - m;
                *s += d * d;
            }
        }
        let std = var.into_iter().map(|s| (s / (n - 1) as f64).sqrt()).collect();
        Ok(Scaler { mean, std })
    }

    /// `(x - mean) / std` per attribute; constant columns (std = 0) map to 0.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| if *s > 0.0 { (v - m) / s } else { 0.0 })
            .collect()
    }

    pub fn apply_all(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }
}

/// Principal directions (rows, orthonormal), their explained-variance
/// ratios, and how many are retained for projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projector {
    /// Row-major component matrix, all components, variance-descending.
    pub components: Vec<Vec<f64>>,
    pub explained_ratio: Vec<f64>,
    pub retained: usize,
}

impl Projector {
    /// Eigendecomposition of the sample covariance of (already scaled) data.
    /// Retains the smallest prefix of components whose cumulative
    /// explained-variance ratio reaches `cumvar_target`. Each component's
    /// largest-magnitude coordinate is made positive so refits are
    /// byte-identical.
    pub fn fit(rows: &[Vec<f64>], cumvar_target: f64) -> Result<Projector> {
        if !(cumvar_target > 0.0 && cumvar_target <= 1.0) {
            return Err(Error::invalid(format!(
                "cumvar_target must be in (0, 1], got {cumvar_target}"
            )));
        }
        let n = rows.len();
        if n < 2 {
            return Err(Error::invalid("PCA needs >= 2 instances"));
        }
        let p = rows[0].len();
        let mut mean = DVector::zeros(p);
        for row in rows {
            mean += DVector::from_column_slice(row);
        }
        mean /= n as f64;
        let mut cov = DMatrix::zeros(p, p);
        for row in rows {
            let d = DVector::from_column_slice(row) - &mean;
            cov += &d * d.transpose();
        }
        cov /= (n - 1) as f64;

        let eig = cov.symmetric_eigen();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let mut components = Vec::with_capacity(p);
        let mut eigenvalues = Vec::with_capacity(p);
        for &i in &order {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            // sign convention: make the largest-magnitude coordinate positive
            let lead = v
                .iter()
                .cloned()
                .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            if lead < 0.0 {
                for x in v.iter_mut() {
                    *x = -*x;
                }
            }
            components.push(v);
            eigenvalues.push(eig.eigenvalues[i].max(0.0)); // clip tiny negatives
        }
        let total: f64 = eigenvalues.iter().sum();
        let explained_ratio: Vec<f64> = if total > 0.0 {
            eigenvalues.iter().map(|e| e / total).collect()
        } else {
            // fully degenerate (all-constant) data: spread evenly
            vec![1.0 / p as f64; p]
        };
        let mut cum = 0.0;
        let mut retained = p;
        for (i, r) in explained_ratio.iter().enumerate() {
            cum += r;
            if cum >= cumvar_target - 1e-12 {
                retained = i + 1;
                break;
            }
        }
        Ok(Projector {
            components,
            explained_ratio,
            retained,
        })
    }

    /// Projects a scaled vector onto the retained components.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.components[..self.retained]
            .iter()
            .map(|c| c.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn project_all(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.project(r)).collect()
    }

    /// Maps a projection back into the original space (uses as many
    /// components as `z` has coordinates).
    pub fn reconstruct(&self, z: &[f64]) -> Vec<f64> {
        let p = self.components[0].len();
        let mut out = vec![0.0; p];
        for (c, zi) in self.components.iter().zip(z) {
            for (o, ci) in out.iter_mut().zip(c) {
                *o += zi * ci;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn symmetric_two_point_column() {
        let scaler = Scaler::fit(&[vec![2.0], vec![4.0]]).unwrap();
        assert_eq!(scaler.apply(&[3.0]), vec![0.0]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let scaler = Scaler::fit(&[vec![7.0, 1.0], vec![7.0, 3.0]]).unwrap();
        assert_eq!(scaler.apply(&[7.0, 2.0])[0], 0.0);
        assert_eq!(scaler.apply(&[123.0, 2.0])[0], 0.0);
    }

    #[test]
    fn single_instance_rejected() {
        assert!(Scaler::fit(&[vec![1.0]]).is_err());
    }

    #[test]
    fn scaled_moments_recover_standard_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rows: Vec<Vec<f64>> = (0..1000)
            .map(|_| (0..64).map(|j| rng.gen::<f64>() * (j + 1) as f64).collect())
            .collect();
        let scaler = Scaler::fit(&rows).unwrap();
        let scaled = scaler.apply_all(&rows);
        for j in 0..64 {
            let col: Vec<f64> = scaled.iter().map(|r| r[j]).collect();
            let m: f64 = col.iter().sum::<f64>() / col.len() as f64;
            let v: f64 = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (col.len() - 1) as f64;
            assert!(m.abs() < 1e-9, "mean {m} at column {j}");
            assert!((v.sqrt() - 1.0).abs() < 1e-9, "std {} at column {j}", v.sqrt());
        }
    }

    #[test]
    fn collinear_points_need_one_component() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let proj = Projector::fit(&rows, 0.95).unwrap();
        assert_eq!(proj.retained, 1);
        assert!((proj.explained_ratio[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn isotropic_gaussian_needs_all_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..3000)
            .map(|_| {
                (0..3)
                    .map(|_| {
                        // Box-Muller
                        let u1: f64 = rng.gen::<f64>().max(1e-12);
                        let u2: f64 = rng.gen();
                        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
                    })
                    .collect()
            })
            .collect();
        let proj = Projector::fit(&rows, 0.95).unwrap();
        assert_eq!(proj.retained, 3);
    }

    #[test]
    fn orthonormal_rows_and_ratio_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..8).map(|_| rng.gen::<f64>() - 0.5).collect())
            .collect();
        let proj = Projector::fit(&rows, 0.95).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let dot: f64 = proj.components[i]
                    .iter()
                    .zip(&proj.components[j])
                    .map(|(a, b)| a * b)
                    .sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-9, "rows {i},{j} dot {dot}");
            }
        }
        let sum: f64 = proj.explained_ratio.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(proj
            .explained_ratio
            .windows(2)
            .all(|w| w[0] >= w[1] - 1e-12));
    }

    #[test]
    fn full_reconstruction_is_near_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..6).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect())
            .collect();
        let proj = Projector::fit(&rows, 1.0).unwrap();
        for row in rows.iter().take(10) {
            let z: Vec<f64> = proj
                .components
                .iter()
                .map(|c| c.iter().zip(row).map(|(a, b)| a * b).sum())
                .collect();
            let back = proj.reconstruct(&z);
            let err: f64 = back
                .iter()
                .zip(row)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(err < 1e-6, "reconstruction error {err}");
        }
    }

    #[test]
    fn fitting_twice_is_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..120)
            .map(|_| (0..10).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let a = Projector::fit(&rows, 0.9).unwrap();
        let b = Projector::fit(&rows, 0.9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rank_deficient_data_handled() {
        // 4-dim data confined to 2 dimensions
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let rows: Vec<Vec<f64>> = (0..80)
            .map(|_| {
                let a = rng.gen::<f64>();
                let b = rng.gen::<f64>();
                vec![a, b, a + b, a - b]
            })
            .collect();
        let proj = Projector::fit(&rows, 0.999).unwrap();
        assert!(proj.retained <= 2);
    }
}

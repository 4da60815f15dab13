//! Principal component analysis for the spatial-domain view of features.

use ndarray::{Array2, Axis};

use crate::ecf::FeatureMatrix;
use crate::error::{Error, Result};

const JACOBI_MAX_SWEEPS: usize = 100;

/// Top principal directions of a feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k x d`, unit-norm orthogonal rows, largest-magnitude entry positive.
    pub components: Array2<f64>,
    /// Population variance along each component, nonincreasing.
    pub explained_variance: Vec<f64>,
}

/// Fits the top `k` principal components using the population covariance
/// (divisor `n`) and a cyclic Jacobi eigensolver.
pub fn pca_fit(features: &FeatureMatrix, k: usize) -> Result<PcaModel> {
    let n = features.nrows();
    let d = features.ncols();
    if n < 2 {
        return Err(Error::invalid(format!(
            "PCA needs at least 2 samples, got {n}"
        )));
    }
    if k == 0 || k > n.min(d) {
        return Err(Error::invalid(format!(
            "cannot extract {k} components from a {n}x{d} matrix"
        )));
    }
    let x = features.values();
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let centered = &x - &mean;
    let cov = centered.t().dot(&centered) / n as f64;

    let (values, vectors) = symmetric_eigen(cov);
    let mut order: Vec<usize> = (0..d).collect();
    // stable sort keeps the lower index first among equal eigenvalues
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    let mut components = Array2::zeros((k, d));
    let mut explained_variance = Vec::with_capacity(k);
    for (row, &idx) in order.iter().take(k).enumerate() {
        let mut v = vectors.column(idx).to_owned();
        let pivot = v
            .iter()
            .enumerate()
            .fold((0, 0.0_f64), |best, (i, &x)| {
                if x.abs() > best.1.abs() {
                    (i, x)
                } else {
                    best
                }
            })
            .1;
        if pivot < 0.0 {
            v.mapv_inplace(|x| -x);
        }
        components.row_mut(row).assign(&v);
        explained_variance.push(values[idx].max(0.0));
    }
    Ok(PcaModel {
        mean: mean.to_vec(),
        components,
        explained_variance,
    })
}

/// Projects rows onto the fitted components: `(x - mean) * components^T`.
pub fn pca_project(model: &PcaModel, features: &FeatureMatrix) -> Result<Array2<f64>> {
    if features.ncols() != model.mean.len() {
        return Err(Error::invalid(format!(
            "PCA model has dimension {}, features have {}",
            model.mean.len(),
            features.ncols()
        )));
    }
    let mean = ndarray::ArrayView1::from(&model.mean);
    let centered = &features.values() - &mean;
    Ok(centered.dot(&model.components.t()))
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and a matrix whose columns are the eigenvectors.
fn symmetric_eigen(mut a: Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let d = a.nrows();
    let mut v = Array2::<f64>::eye(d);
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..d)
            .flat_map(|p| (0..d).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[[p, q]] * a[[p, q]])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale || off == 0.0 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..d {
                    let arp = a[[r, p]];
                    let arq = a[[r, q]];
                    a[[r, p]] = c * arp - s * arq;
                    a[[r, q]] = s * arp + c * arq;
                }
                for r in 0..d {
                    let apr = a[[p, r]];
                    let aqr = a[[q, r]];
                    a[[p, r]] = c * apr - s * aqr;
                    a[[q, r]] = s * apr + c * aqr;
                }
                for r in 0..d {
                    let vrp = v[[r, p]];
                    let vrq = v[[r, q]];
                    v[[r, p]] = c * vrp - s * vrq;
                    v[[r, q]] = s * vrp + c * vrq;
                }
            }
        }
    }
    ((0..d).map(|i| a[[i, i]]).collect(), v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn line_y_equals_x() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![i as f64 * 0.3, i as f64 * 0.3])
            .collect();
        let fm = FeatureMatrix::from_rows(&rows, "l").unwrap();
        let m = pca_fit(&fm, 2).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((m.components[[0, 0]] - h).abs() < 1e-12);
        assert!((m.components[[0, 1]] - h).abs() < 1e-12);
        assert!(m.explained_variance[1].abs() < 1e-12);
    }

    #[test]
    fn isotropic_spectrum_keeps_order() {
        let fm = FeatureMatrix::new(
            array![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
            "i",
        )
        .unwrap();
        let m = pca_fit(&fm, 2).unwrap();
        assert!((m.explained_variance[0] - m.explained_variance[1]).abs() < 1e-12);
        assert!(m.explained_variance[0] >= m.explained_variance[1]);
        let dotp: f64 = m.components.row(0).dot(&m.components.row(1));
        assert!(dotp.abs() < 1e-12);
    }

    #[test]
    fn projecting_the_mean_gives_origin() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let values = Array2::from_shape_simple_fn((15, 4), || rng.random_range(-1.0..1.0));
        let fm = FeatureMatrix::new(values, "r").unwrap();
        let m = pca_fit(&fm, 2).unwrap();
        let mean = FeatureMatrix::from_rows(std::slice::from_ref(&m.mean), "m").unwrap();
        let p = pca_project(&m, &mean).unwrap();
        assert!(p.iter().all(|v| v.abs() < 1e-12));
        for row in m.components.rows() {
            let (i, _) = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .unwrap();
            assert!(row[i] > 0.0);
        }
    }

    #[test]
    fn identity_components_center_input() {
        let m = PcaModel {
            mean: vec![1.0, 2.0],
            components: Array2::eye(2),
            explained_variance: vec![1.0, 1.0],
        };
        let fm = FeatureMatrix::new(array![[3.0, 5.0], [0.0, 0.0]], "x").unwrap();
        assert_eq!(
            pca_project(&m, &fm).unwrap(),
            array![[2.0, 3.0], [-1.0, -2.0]]
        );
    }

    #[test]
    fn argument_errors() {
        let one = FeatureMatrix::new(array![[1.0, 2.0]], "x").unwrap();
        assert!(pca_fit(&one, 1).is_err());
        let two = FeatureMatrix::new(array![[1.0, 2.0], [0.0, 1.0]], "x").unwrap();
        assert!(pca_fit(&two, 3).is_err());
        let m = pca_fit(&two, 2).unwrap();
        let wrong = FeatureMatrix::new(array![[1.0, 2.0, 3.0]], "x").unwrap();
        assert!(pca_project(&m, &wrong).is_err());
    }
}

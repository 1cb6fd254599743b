//! Dense kernels for the spectral learner.
//!
//! SVD and symmetric eigendecomposition come from `nalgebra`; this module adds
//! sorted/truncated wrappers, Moore-Penrose pseudoinverses, whitening of a
//! second moment and the robust tensor power method with deflation.

mod tensor;

pub use tensor::{tensor_power_method, EigenPairs, PowerMethodConfig, Tensor3};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative eigenvalue floor used when whitening.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Thin SVD with singular values sorted in descending order.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `m × k`
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    /// `n × k`
    pub v: DMatrix<f64>,
}

impl Svd {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&self.singular_values) * self.v.transpose()
    }
}

fn ensure_finite(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub fn svd(m: &DMatrix<f64>) -> Result<Svd> {
    ensure_finite(m, "svd input")?;
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(Svd {
            u: DMatrix::zeros(rows, 0),
            singular_values: DVector::zeros(0),
            v: DMatrix::zeros(cols, 0),
        });
    }
    let raw = m.clone().svd(true, true);
    let u = raw.u.expect("requested U");
    let v_t = raw.v_t.expect("requested V^T");
    let s = raw.singular_values;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    let u = DMatrix::from_fn(rows, k, |i, j| u[(i, order[j])]);
    let v = DMatrix::from_fn(cols, k, |i, j| v_t[(order[j], i)]);
    let singular_values = DVector::from_fn(k, |j, _| s[order[j]].max(0.0));
    Ok(Svd {
        u,
        singular_values,
        v,
    })
}

/// Moore-Penrose pseudoinverse; singular values below `rank_tolerance · σ_max`
/// are treated as zero.
pub fn pseudoinverse(m: &DMatrix<f64>, rank_tolerance: f64) -> Result<DMatrix<f64>> {
    let d = svd(m)?;
    let smax = d.singular_values.iter().copied().fold(0.0, f64::max);
    let keep = d
        .singular_values
        .iter()
        .filter(|&&s| smax > 0.0 && s > rank_tolerance * smax)
        .count();
    Ok(pinv_from_svd(&d, keep, m.shape()))
}

/// Pseudoinverse of the best rank-`rank` approximation of `m`.
pub fn truncated_pseudoinverse(m: &DMatrix<f64>, rank: usize) -> Result<DMatrix<f64>> {
    let d = svd(m)?;
    let keep = d
        .singular_values
        .iter()
        .take(rank)
        .filter(|&&s| s > 0.0)
        .count();
    Ok(pinv_from_svd(&d, keep, m.shape()))
}

fn pinv_from_svd(d: &Svd, keep: usize, (rows, cols): (usize, usize)) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(cols, rows);
    for k in 0..keep {
        let inv = 1.0 / d.singular_values[k];
        out += d.v.column(k) * d.u.column(k).transpose() * inv;
    }
    out
}

/// Number of singular values at or above `threshold`.
pub fn count_singular_values_above(m: &DMatrix<f64>, threshold: f64) -> Result<usize> {
    Ok(svd(m)?
        .singular_values
        .iter()
        .filter(|&&s| s >= threshold)
        .count())
}

/// Whitening of a PSD second moment at a given rank.
#[derive(Debug, Clone)]
pub struct Whitening {
    /// `n × r`, with `Wᵀ M2 W = I_r`.
    pub w: DMatrix<f64>,
    /// `r × n`, the pseudoinverse of `W`; `w_pinv.transpose()` maps whitened
    /// vectors back to the original space.
    pub w_pinv: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

/// Builds `W = U_r diag(λ_r)^{-1/2}` from the top-`rank` eigenpairs of `m2`.
pub fn whiten(m2: &DMatrix<f64>, rank: usize) -> Result<Whitening> {
    ensure_finite(m2, "second moment")?;
    let n = m2.nrows();
    if m2.ncols() != n {
        return Err(Error::Dimension(format!(
            "second moment must be square, got {}×{}",
            n,
            m2.ncols()
        )));
    }
    let scale = m2.amax().max(f64::MIN_POSITIVE);
    let asym = (m2 - m2.transpose()).amax();
    if asym > 1e-8 * scale.max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    if rank == 0 || rank > n {
        return Err(Error::RankExceeded {
            requested: rank,
            available: n,
        });
    }
    let sym = (m2 + m2.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let top = eig.eigenvalues[order[0]];
    let floor = EIGEN_FLOOR * top.abs().max(f64::MIN_POSITIVE);
    let numerical_rank = order
        .iter()
        .filter(|&&i| eig.eigenvalues[i] > floor)
        .count();
    if rank > numerical_rank {
        return Err(Error::RankExceeded {
            requested: rank,
            available: numerical_rank,
        });
    }
    let eigenvalues: Vec<f64> = order[..rank]
        .iter()
        .map(|&i| eig.eigenvalues[i].max(floor))
        .collect();
    let w = DMatrix::from_fn(n, rank, |i, j| {
        eig.eigenvectors[(i, order[j])] / eigenvalues[j].sqrt()
    });
    let w_pinv = DMatrix::from_fn(rank, n, |j, i| {
        eig.eigenvectors[(i, order[j])] * eigenvalues[j].sqrt()
    });
    Ok(Whitening {
        w,
        w_pinv,
        eigenvalues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn svd_identity() {
        let d = svd(&DMatrix::identity(3, 3)).unwrap();
        assert!(d.singular_values.iter().all(|&s| (s - 1.0).abs() < 1e-12));
    }

    #[test]
    fn svd_rank_one_outer_product() {
        let u = DVector::from_vec(vec![2.0, 0.0, 0.0]);
        let v = DVector::from_vec(vec![0.0, 3.0 / 2f64.sqrt(), 3.0 / 2f64.sqrt()]);
        let d = svd(&(&u * v.transpose())).unwrap();
        assert!((d.singular_values[0] - 6.0).abs() < 1e-10);
        assert!(d.singular_values.iter().skip(1).all(|&s| s <= 1e-10));
    }

    #[test]
    fn svd_reconstructs_and_sorts() {
        for (r, c) in [(5, 4), (4, 5), (1, 3)] {
            let m = random_matrix(r, c, 17);
            let d = svd(&m).unwrap();
            let err = (&m - d.reconstruct()).norm();
            assert!(err <= 1e-8 * m.norm(), "residual {err}");
            assert!(d
                .singular_values
                .as_slice()
                .windows(2)
                .all(|w| w[0] >= w[1] && w[1] >= 0.0));
        }
    }

    #[test]
    fn svd_rejects_nan() {
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert_eq!(svd(&m).unwrap_err(), Error::NonFinite("svd input"));
        assert!(pseudoinverse(&m, 1e-12).is_err());
    }

    #[test]
    fn pinv_of_invertible_is_inverse() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 7.0, 2.0, 6.0]);
        let p = pseudoinverse(&m, 1e-12).unwrap();
        let inv = m.clone().try_inverse().unwrap();
        assert!((p - inv).amax() < 1e-10);
    }

    #[test]
    fn pinv_of_zero_is_zero() {
        let p = pseudoinverse(&DMatrix::zeros(3, 2), 1e-12).unwrap();
        assert_eq!(p.shape(), (2, 3));
        assert!(p.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pinv_moore_penrose_conditions_rank_two() {
        let m = random_matrix(4, 2, 3) * random_matrix(2, 4, 4);
        let p = pseudoinverse(&m, 1e-10).unwrap();
        let tol = 1e-7;
        let rel = |a: DMatrix<f64>, b: &DMatrix<f64>| (a - b).amax() / b.amax().max(1.0);
        assert!(rel(&m * &p * &m, &m) < tol);
        assert!(rel(&p * &m * &p, &p) < tol);
        let mp = &m * &p;
        assert!(rel(mp.transpose(), &mp) < tol);
        let pm = &p * &m;
        assert!(rel(pm.transpose(), &pm) < tol);
        assert_eq!(count_singular_values_above(&m, 1e-8).unwrap(), 2);
    }

    #[test]
    fn truncated_pinv_matches_full_on_exact_rank() {
        let m = random_matrix(5, 3, 8) * random_matrix(3, 5, 9);
        let a = truncated_pseudoinverse(&m, 3).unwrap();
        let b = pseudoinverse(&m, 1e-10).unwrap();
        assert!((a - b).amax() < 1e-8);
    }

    #[test]
    fn whiten_identity() {
        let m2 = DMatrix::<f64>::identity(3, 3);
        let wh = whiten(&m2, 3).unwrap();
        let g = wh.w.transpose() * &m2 * &wh.w;
        assert!((g - DMatrix::<f64>::identity(3, 3)).amax() < 1e-6);
    }

    #[test]
    fn whiten_diag_rank_two() {
        let m2 = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0, 0.0]));
        let wh = whiten(&m2, 2).unwrap();
        let g = wh.w.transpose() * &m2 * &wh.w;
        assert!((g - DMatrix::<f64>::identity(2, 2)).amax() < 1e-6);
        assert!(matches!(
            whiten(&m2, 3),
            Err(Error::RankExceeded { requested: 3, available: 2 })
        ));
    }

    #[test]
    fn whiten_rejects_asymmetric() {
        let m2 = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(whiten(&m2, 1), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn whitened_mixture_factors_are_orthonormal() {
        // M2 = Σ w_i μ_i μ_iᵀ with non-orthogonal μ; W^T μ_i √w_i must be orthonormal
        let mu = [
            DVector::from_vec(vec![0.6, 0.3, 0.1, 0.0]),
            DVector::from_vec(vec![0.1, 0.2, 0.3, 0.4]),
        ];
        let w = [0.35, 0.65];
        let m2 = &mu[0] * mu[0].transpose() * w[0] + &mu[1] * mu[1].transpose() * w[1];
        let wh = whiten(&m2, 2).unwrap();
        let f: Vec<DVector<f64>> = (0..2)
            .map(|i| wh.w.transpose() * &mu[i] * w[i].sqrt())
            .collect();
        assert!((f[0].norm() - 1.0).abs() < 1e-6);
        assert!((f[1].norm() - 1.0).abs() < 1e-6);
        assert!(f[0].dot(&f[1]).abs() < 1e-6);
        // unwhitening recovers μ
        let back = wh.w_pinv.transpose() * &f[0] / w[0].sqrt();
        assert!((back - &mu[0]).amax() < 1e-8);
    }
}

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense third-order tensor, row-major (`[i][j][k]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    dims: (usize, usize, usize),
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(d1: usize, d2: usize, d3: usize) -> Self {
        Self {
            dims: (d1, d2, d3),
            data: vec![0.0; d1 * d2 * d3],
        }
    }

    pub fn from_vec(dims: (usize, usize, usize), data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.0 * dims.1 * dims.2 {
            return Err(Error::Dimension(format!(
                "{} entries for dims {dims:?}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tensor"));
        }
        Ok(Self { dims, data })
    }

    /// `Σ_i weights[i] · a_i ⊗ a_i ⊗ a_i` for the columns `a_i` of `factors`.
    pub fn symmetric_from_factors(weights: &[f64], factors: &DMatrix<f64>) -> Self {
        let n = factors.nrows();
        let mut t = Self::zeros(n, n, n);
        for (c, &w) in weights.iter().enumerate() {
            let col = factors.column(c);
            for i in 0..n {
                for j in 0..n {
                    let wij = w * col[i] * col[j];
                    for k in 0..n {
                        t.data[(i * n + j) * n + k] += wij * col[k];
                    }
                }
            }
        }
        t
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims.1 + j) * self.dims.2 + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.idx(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.idx(i, j, k);
        self.data[idx] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.idx(i, j, k);
        self.data[idx] += v;
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_cubic(&self) -> bool {
        self.dims.0 == self.dims.1 && self.dims.1 == self.dims.2
    }

    /// Largest deviation from symmetry under index permutations.
    pub fn symmetry_defect(&self) -> f64 {
        if !self.is_cubic() {
            return f64::INFINITY;
        }
        let n = self.dims.0;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    let vals = [
                        self.get(i, j, k),
                        self.get(i, k, j),
                        self.get(j, i, k),
                        self.get(j, k, i),
                        self.get(k, i, j),
                        self.get(k, j, i),
                    ];
                    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    worst = worst.max(hi - lo);
                }
            }
        }
        worst
    }

    /// Average over the six index permutations.
    pub fn symmetrized(&self) -> Result<Self> {
        if !self.is_cubic() {
            return Err(Error::Dimension(format!("cannot symmetrize dims {:?}", self.dims)));
        }
        let n = self.dims.0;
        let mut out = Self::zeros(n, n, n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let v = (self.get(i, j, k)
                        + self.get(i, k, j)
                        + self.get(j, i, k)
                        + self.get(j, k, i)
                        + self.get(k, i, j)
                        + self.get(k, j, i))
                        / 6.0;
                    out.set(i, j, k, v);
                }
            }
        }
        Ok(out)
    }

    /// Sum over the third index.
    pub fn marginalize_third(&self) -> DMatrix<f64> {
        let (d1, d2, d3) = self.dims;
        DMatrix::from_fn(d1, d2, |i, j| (0..d3).map(|k| self.get(i, j, k)).sum())
    }

    /// Slice `[:, :, k]`.
    pub fn frontal_slice(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.dims.0, self.dims.1, |i, j| self.get(i, j, k))
    }

    /// Multilinear transform `T(A, B, C)[a,b,c] = Σ T[i,j,k] A[i,a] B[j,b] C[k,c]`.
    pub fn multilinear(&self, a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<Self> {
        let (d1, d2, d3) = self.dims;
        if a.nrows() != d1 || b.nrows() != d2 || c.nrows() != d3 {
            return Err(Error::Dimension(format!(
                "multilinear transform of {:?} by {}/{}/{} rows",
                self.dims,
                a.nrows(),
                b.nrows(),
                c.nrows()
            )));
        }
        let (ra, rb, rc) = (a.ncols(), b.ncols(), c.ncols());
        // mode 3
        let mut t1 = vec![0.0; d1 * d2 * rc];
        for i in 0..d1 {
            for j in 0..d2 {
                let base = (i * d2 + j) * d3;
                for z in 0..rc {
                    t1[(i * d2 + j) * rc + z] =
                        (0..d3).map(|k| self.data[base + k] * c[(k, z)]).sum();
                }
            }
        }
        // mode 2
        let mut t2 = vec![0.0; d1 * rb * rc];
        for i in 0..d1 {
            for y in 0..rb {
                for z in 0..rc {
                    t2[(i * rb + y) * rc + z] =
                        (0..d2).map(|j| t1[(i * d2 + j) * rc + z] * b[(j, y)]).sum();
                }
            }
        }
        // mode 1
        let mut out = Self::zeros(ra, rb, rc);
        for x in 0..ra {
            for y in 0..rb {
                for z in 0..rc {
                    let v = (0..d1).map(|i| t2[(i * rb + y) * rc + z] * a[(i, x)]).sum();
                    out.set(x, y, z, v);
                }
            }
        }
        Ok(out)
    }

    /// `T(I, u, u)`.
    pub fn apply_vec2(&self, u: &DVector<f64>) -> DVector<f64> {
        let (d1, d2, d3) = self.dims;
        DVector::from_fn(d1, |i, _| {
            let mut acc = 0.0;
            for j in 0..d2 {
                let base = (i * d2 + j) * d3;
                let inner: f64 = (0..d3).map(|k| self.data[base + k] * u[k]).sum();
                acc += inner * u[j];
            }
            acc
        })
    }

    /// `T(u, u, u)`.
    pub fn apply_vec3(&self, u: &DVector<f64>) -> f64 {
        self.apply_vec2(u).dot(u)
    }

    /// `T ← T − λ φ⊗φ⊗φ`.
    pub fn deflate(&mut self, lambda: f64, phi: &DVector<f64>) {
        let n = self.dims.0;
        for i in 0..n {
            for j in 0..n {
                let lij = lambda * phi[i] * phi[j];
                for k in 0..n {
                    let idx = (i * n + j) * n + k;
                    self.data[idx] -= lij * phi[k];
                }
            }
        }
    }
}

/// Eigenpairs of a symmetric tensor, ordered by decreasing |eigenvalue|.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// Unit-norm eigenvectors as columns.
    pub vectors: DMatrix<f64>,
}

impl EigenPairs {
    pub fn rank(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerMethodConfig {
    /// Random restarts per extracted component.
    pub restarts: usize,
    /// Power iterations per restart.
    pub iterations: usize,
    /// Symmetry tolerance, relative to the largest entry.
    pub symmetry_tol: f64,
}

impl Default for PowerMethodConfig {
    fn default() -> Self {
        Self {
            restarts: 25,
            iterations: 100,
            symmetry_tol: 1e-6,
        }
    }
}

/// Runs power iteration `u ← T(I,u,u)/‖T(I,u,u)‖` from `start`, returning the
/// final vector and its Rayleigh quotient `T(u,u,u)`.
fn power_iterate(t: &Tensor3, start: DVector<f64>, iterations: usize) -> (DVector<f64>, f64) {
    let mut u = start;
    for _ in 0..iterations {
        let next = t.apply_vec2(&u);
        let norm = next.norm();
        if norm <= f64::MIN_POSITIVE {
            break;
        }
        u = next / norm;
    }
    let lambda = t.apply_vec3(&u);
    (u, lambda)
}

/// Robust tensor power method with deflation.
///
/// Extracts `r` eigenpairs of a symmetric `r × r × r` tensor. For each pair the
/// best of `restarts` random starts (by Rayleigh quotient) is refined and then
/// deflated. Each restart draws from its own sub-seed, so the result does not
/// depend on evaluation order. Eigenvectors are sign-normalised so their
/// largest-magnitude entry is positive.
pub fn tensor_power_method<R: Rng + ?Sized>(
    t: &Tensor3,
    config: &PowerMethodConfig,
    rng: &mut R,
) -> Result<EigenPairs> {
    if !t.is_cubic() {
        return Err(Error::Dimension(format!("tensor dims {:?} are not cubic", t.dims())));
    }
    let r = t.dims().0;
    if r == 0 {
        return Err(Error::Empty("tensor of rank 0"));
    }
    let defect = t.symmetry_defect();
    if defect > config.symmetry_tol * t.max_abs().max(1.0) {
        return Err(Error::NotSymmetric(defect));
    }
    let restarts = config.restarts.max(1);
    let mut work = t.clone();
    let mut pairs: Vec<(f64, DVector<f64>)> = Vec::with_capacity(r);
    for _ in 0..r {
        let seeds: Vec<u64> = (0..restarts).map(|_| rng.random()).collect();
        let mut best: Option<(DVector<f64>, f64)> = None;
        for seed in seeds {
            let mut sub = ChaCha8Rng::seed_from_u64(seed);
            let mut start = DVector::from_fn(r, |_, _| sub.sample::<f64, _>(StandardNormal));
            let norm = start.norm();
            if norm <= f64::MIN_POSITIVE {
                continue;
            }
            start /= norm;
            let (u, lambda) = power_iterate(&work, start, config.iterations);
            if best.as_ref().is_none_or(|(_, b)| lambda > *b) {
                best = Some((u, lambda));
            }
        }
        let (u, _) = best.expect("at least one restart");
        let (mut phi, mut lambda) = power_iterate(&work, u, config.iterations);
        let lead = phi.iter().copied().fold(0.0_f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if lead < 0.0 {
            phi = -phi;
            lambda = -lambda;
        }
        work.deflate(lambda, &phi);
        pairs.push((lambda, phi));
    }
    pairs.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()));
    let values = pairs.iter().map(|p| p.0).collect();
    let vectors = DMatrix::from_fn(r, r, |i, j| pairs[j].1[i]);
    Ok(EigenPairs { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orthonormal_pair() -> (DVector<f64>, DVector<f64>) {
        let a = DVector::from_vec(vec![0.6, 0.8]);
        let b = DVector::from_vec(vec![-0.8, 0.6]);
        (a, b)
    }

    fn aligned(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        (u - v).amax().min((u + v).amax())
    }

    #[test]
    fn single_basis_component() {
        let mut t = Tensor3::zeros(2, 2, 2);
        t.set(0, 0, 0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = tensor_power_method(&t, &PowerMethodConfig::default(), &mut rng).unwrap();
        assert!((p.values[0] - 1.0).abs() < 1e-9);
        assert!(p.values[1].abs() < 1e-9);
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        assert!(aligned(&p.vectors.column(0).into_owned(), &e1) < 1e-9);
    }

    #[test]
    fn recovers_planted_orthogonal_factors() {
        let (a, b) = orthonormal_pair();
        let f = DMatrix::from_columns(&[a.clone(), b.clone()]);
        let t = Tensor3::symmetric_from_factors(&[2.0, 1.0], &f);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = tensor_power_method(&t, &PowerMethodConfig::default(), &mut rng).unwrap();
        assert!((p.values[0].abs() - 2.0).abs() < 1e-6);
        assert!((p.values[1].abs() - 1.0).abs() < 1e-6);
        assert!(aligned(&p.vectors.column(0).into_owned(), &a) < 1e-6);
        assert!(aligned(&p.vectors.column(1).into_owned(), &b) < 1e-6);
        let mut residual = t.clone();
        for i in 0..2 {
            residual.deflate(p.values[i], &p.vectors.column(i).into_owned());
        }
        assert!(residual.frobenius_norm() <= 1e-5 * t.frobenius_norm());
    }

    #[test]
    fn sign_convention_largest_entry_positive() {
        let v = DVector::from_vec(vec![-0.8, 0.6]);
        let f = DMatrix::from_columns(&[v]);
        let t = Tensor3::symmetric_from_factors(&[-1.5], &f);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut cfg = PowerMethodConfig::default();
        cfg.restarts = 3;
        let p = tensor_power_method(&t, &cfg, &mut rng).unwrap();
        let phi = p.vectors.column(0);
        let lead = if phi[0].abs() > phi[1].abs() { phi[0] } else { phi[1] };
        assert!(lead > 0.0);
    }

    #[test]
    fn noisy_planted_tensor() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // random orthonormal basis of R^3 via QR
        let g = DMatrix::from_fn(3, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = g.qr().q();
        let weights = [3.0, 2.0, 1.0];
        let mut t = Tensor3::symmetric_from_factors(&weights, &q);
        let mut noise = Tensor3::zeros(3, 3, 3);
        for v in noise.data.iter_mut() {
            *v = 1e-4 * rng.random_range(-1.0..1.0);
        }
        for (x, n) in t.data.iter_mut().zip(noise.symmetrized().unwrap().data) {
            *x += n;
        }
        let p = tensor_power_method(&t, &PowerMethodConfig::default(), &mut rng).unwrap();
        for i in 0..3 {
            assert!((p.values[i].abs() - weights[i]).abs() < 1e-2);
            assert!(aligned(&p.vectors.column(i).into_owned(), &q.column(i).into_owned()) < 1e-2);
        }
    }

    #[test]
    fn rayleigh_quotient_non_decreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = DMatrix::from_fn(4, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = g.qr().q();
        let t = Tensor3::symmetric_from_factors(&[1.0, 0.8, 0.5, 0.3], &q);
        let mut u = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
        u /= u.norm();
        // make the first Rayleigh quotient positive so the iterate tracks a positive component
        if t.apply_vec3(&u) < 0.0 {
            u = -u;
        }
        let mut prev = t.apply_vec3(&u);
        for _ in 0..50 {
            let next = t.apply_vec2(&u);
            u = &next / next.norm();
            let rq = t.apply_vec3(&u);
            assert!(rq >= prev - 1e-12, "{rq} < {prev}");
            prev = rq;
        }
    }

    #[test]
    fn rejects_asymmetric_and_empty() {
        let mut t = Tensor3::zeros(2, 2, 2);
        t.set(0, 0, 1, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            tensor_power_method(&t, &PowerMethodConfig::default(), &mut rng),
            Err(Error::NotSymmetric(_))
        ));
        assert!(matches!(
            tensor_power_method(&Tensor3::zeros(0, 0, 0), &PowerMethodConfig::default(), &mut rng),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        let (a, b) = orthonormal_pair();
        let t = Tensor3::symmetric_from_factors(&[1.0, 0.7], &DMatrix::from_columns(&[a, b]));
        let run = |s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            tensor_power_method(&t, &PowerMethodConfig::default(), &mut rng).unwrap()
        };
        let (x, y) = (run(9), run(9));
        assert_eq!(x.values, y.values);
        assert_eq!(x.vectors, y.vectors);
    }

    #[test]
    fn multilinear_whitening_matches_direct_sum() {
        let f = DMatrix::from_row_slice(3, 2, &[0.5, 0.1, 0.3, 0.2, 0.2, 0.7]);
        let t = Tensor3::symmetric_from_factors(&[0.4, 0.6], &f);
        let w = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.5, 2.0, -1.0, 1.0]);
        let tw = t.multilinear(&w, &w, &w).unwrap();
        let wf = w.transpose() * &f;
        let direct = Tensor3::symmetric_from_factors(&[0.4, 0.6], &wf);
        assert!(tw.data.iter().zip(direct.data()).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}

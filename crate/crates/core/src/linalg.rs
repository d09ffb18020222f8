//! Dense complex linear algebra helpers on top of `nalgebra`, plus a small
//! matrix-free operator abstraction with power iteration.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn real_scalar_matrix(dim: usize, value: f64) -> CMatrix {
    CMatrix::identity(dim, dim) * c(value, 0.0)
}

/// Matrix with i.i.d. standard complex Gaussian entries (`E|z|^2 = 1`).
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re * scale, im * scale)
    })
}

/// Random Hermitian matrix `(G + G^*) / 2` with `G` Ginibre.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = ginibre(dim, dim, rng);
    (&g + g.adjoint()) * c(0.5, 0.0)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn max_abs_entry(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    m.is_square() && max_abs_entry(&(m - m.adjoint())) <= tol
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut vals: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues ascending.
pub fn hermitian_eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMatrix::from_fn(m.nrows(), m.ncols(), |r, j| eig.eigenvectors[(r, order[j])]);
    (vals, vecs)
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn hermitian_max_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m)
        .last()
        .copied()
        .unwrap_or(f64::NEG_INFINITY)
}

/// All eigenvalues of a general complex square matrix, via the complex Schur form.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<C64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![m[(0, 0)]]);
    }
    let schur = Schur::try_new(m.clone(), 1e-14, 100_000).ok_or(Error::NonConvergence {
        iterations: 100_000,
        gap: f64::NAN,
    })?;
    let (_, t) = schur.unpack();
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

pub fn spectral_radius_dense(m: &CMatrix) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn operator_norm(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn min_singular_value(m: &CMatrix) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

pub fn inverse(m: &CMatrix) -> Option<CMatrix> {
    m.clone().try_inverse()
}

/// Hermitian square root of a positive semidefinite matrix. Eigenvalues below
/// `-neg_tol` are reported as a positivity failure; those in `[-neg_tol, 0)`
/// are clamped to zero.
pub fn sqrt_psd(m: &CMatrix, neg_tol: f64) -> Result<CMatrix> {
    let (vals, vecs) = hermitian_eigh(m);
    if let Some(&lo) = vals.first() {
        if lo < -neg_tol {
            return Err(Error::Precondition(format!(
                "matrix is not positive semidefinite (eigenvalue {lo:e})"
            )));
        }
    }
    let roots = CVector::from_iterator(vals.len(), vals.iter().map(|&v| c(v.max(0.0).sqrt(), 0.0)));
    let scaled = CMatrix::from_fn(m.nrows(), m.ncols(), |r, j| vecs[(r, j)] * roots[j]);
    Ok(&scaled * vecs.adjoint())
}

pub fn vec_norm(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn random_unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..dim)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                c(re, im)
            })
            .collect();
        let norm = vec_norm(&v);
        if norm > 0.0 {
            return v.into_iter().map(|z| z / norm).collect();
        }
    }
}

/// A linear map on `C^dim` that can be applied together with its adjoint.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C64], y: &mut [C64]);
    fn apply_adjoint(&self, x: &[C64], y: &mut [C64]);
}

impl LinearOperator for CMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let xv = CVector::from_column_slice(x);
        let r = self * xv;
        y.copy_from_slice(r.as_slice());
    }

    fn apply_adjoint(&self, x: &[C64], y: &mut [C64]) {
        let xv = CVector::from_column_slice(x);
        let r = self.ad_mul(&xv);
        y.copy_from_slice(r.as_slice());
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PowerIterationOptions {
    /// Relative change of the Rayleigh quotient of `M^*M` at which to stop.
    pub tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for PowerIterationOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 5000,
            restarts: 1,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NormEstimate {
    pub norm: f64,
    pub iterations: usize,
}

/// Operator norm of `op` by power iteration on `op^* op`.
///
/// The estimate is a lower bound at every iterate. If the first run does not
/// reach the tolerance, the iteration restarts from a fresh random vector
/// (`opts.restarts` times) before giving up.
pub fn operator_norm_power<O: LinearOperator + ?Sized>(
    op: &O,
    opts: &PowerIterationOptions,
) -> Result<NormEstimate> {
    let dim = op.dim();
    if dim == 0 {
        return Ok(NormEstimate {
            norm: 0.0,
            iterations: 0,
        });
    }
    let mut rng = crate::rng::stream(opts.seed);
    let mut w = vec![ZERO; dim];
    let mut u = vec![ZERO; dim];
    let mut total = 0;
    let mut last_gap = f64::INFINITY;
    let mut best = 0.0_f64;
    for _ in 0..=opts.restarts {
        let mut v = random_unit_vector(dim, &mut rng);
        let mut prev = f64::NAN;
        for _ in 0..opts.max_iter {
            total += 1;
            op.apply(&v, &mut w);
            let theta = w.iter().map(|z| z.norm_sqr()).sum::<f64>();
            best = best.max(theta);
            if theta == 0.0 {
                // v is in the kernel; a kernel hit from a random start means op = 0
                // with overwhelming probability, restart to make sure.
                break;
            }
            op.apply_adjoint(&w, &mut u);
            let un = vec_norm(&u);
            for (vi, ui) in v.iter_mut().zip(&u) {
                *vi = ui / un;
            }
            if prev.is_finite() {
                last_gap = (theta - prev).abs() / theta;
                if last_gap <= opts.tol {
                    return Ok(NormEstimate {
                        norm: best.sqrt(),
                        iterations: total,
                    });
                }
            }
            prev = theta;
        }
        if best == 0.0 {
            last_gap = 0.0;
        }
    }
    if best == 0.0 {
        return Ok(NormEstimate {
            norm: 0.0,
            iterations: total,
        });
    }
    Err(Error::NonConvergence {
        iterations: total,
        gap: last_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_schur_recovers_known_spectrum() {
        let mut rng = crate::rng::stream(7);
        let q = {
            let g = ginibre(6, 6, &mut rng);
            g.qr().q()
        };
        let diag = [
            c(1.0, 0.5),
            c(-2.0, 0.0),
            c(0.0, 3.0),
            c(0.25, -0.25),
            c(4.0, 1.0),
            c(-1.0, -1.0),
        ];
        let d = CMatrix::from_diagonal(&CVector::from_row_slice(&diag));
        let m = &q * d * q.adjoint();
        let mut ev = eigenvalues(&m).unwrap();
        for target in diag {
            let (pos, best) = ev
                .iter()
                .enumerate()
                .map(|(i, z)| (i, (z - target).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!(best < 1e-10, "eigenvalue {target} missing");
            ev.remove(pos);
        }
    }

    #[test]
    fn sqrt_psd_squares_back() {
        let mut rng = crate::rng::stream(3);
        let g = ginibre(4, 4, &mut rng);
        let p = g.adjoint() * &g;
        let s = sqrt_psd(&p, 1e-10).unwrap();
        assert!(max_abs_entry(&(&s * &s - &p)) < 1e-10);
        assert!(is_hermitian(&s, 1e-12));
    }

    #[test]
    fn sqrt_psd_rejects_negative_matrix() {
        let m = real_scalar_matrix(2, -1.0);
        assert!(sqrt_psd(&m, 1e-10).is_err());
    }

    #[test]
    fn power_iteration_matches_svd() {
        let mut rng = crate::rng::stream(11);
        let m = ginibre(30, 30, &mut rng);
        let est = operator_norm_power(&m, &PowerIterationOptions::default()).unwrap();
        let exact = operator_norm(&m);
        assert!((est.norm - exact).abs() < 1e-5 * exact);
        assert!(est.norm <= exact * (1.0 + 1e-12));
    }

    #[test]
    fn power_iteration_on_zero_operator() {
        let m = CMatrix::zeros(5, 5);
        let est = operator_norm_power(&m, &PowerIterationOptions::default()).unwrap();
        assert_eq!(est.norm, 0.0);
    }
}

//! Finite non-backtracking operators
//! `B = Σ_{j != i*} b_j ⊗ E_ij` (right) and `B~ = Σ_{j != i*} b_i ⊗ E_ij` (left),
//! their companion operators `A^(λ)` and the operator `B_μ` built from the
//! resolvent of a free pencil.
//!
//! Matrices are laid out colour-major: basis vector `x` of colour `i` sits at
//! index `i * D + x`, so block `(i, j)` of the realized matrix is `E_ij`'s slot.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::freegroup::{
    hat_weights, matrix_from_json, matrix_to_json, MatrixPencil, ResolventOptions,
};
use crate::linalg::{
    c, eigenvalues, kron, max_abs_entry, min_singular_value, operator_norm, CMatrix, C64,
};
use crate::{Error, Result};

/// Dimension up to which spectral radii are computed by a dense eigensolve.
pub const DENSE_EIGEN_CAP: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Right,
    Left,
}

/// Involution `i* = (i + ℓ/2) mod ℓ` on colours.
pub fn colour_star(ell: usize, i: usize) -> usize {
    (i + ell / 2) % ell
}

#[derive(Debug, Clone)]
pub struct NBOperator {
    pub ell: usize,
    pub dim: usize,
    pub side: Side,
    pub weights: Vec<CMatrix>,
    pub matrix: CMatrix,
}

fn check_family(weights: &[CMatrix]) -> Result<usize> {
    if weights.is_empty() || weights.len() % 2 != 0 {
        return Err(Error::Invalid(format!(
            "need an even, positive number of weights, got {}",
            weights.len()
        )));
    }
    let dim = weights[0].nrows();
    for w in weights {
        if w.nrows() != dim || w.ncols() != dim {
            return Err(Error::Invalid(format!(
                "weight of shape {}x{} in a family of dimension {dim}",
                w.nrows(),
                w.ncols()
            )));
        }
    }
    Ok(dim)
}

pub fn build_nb(weights: &[CMatrix], side: Side) -> Result<NBOperator> {
    let dim = check_family(weights)?;
    let ell = weights.len();
    let mut matrix = CMatrix::zeros(ell * dim, ell * dim);
    for i in 0..ell {
        for j in (0..ell).filter(|&j| j != colour_star(ell, i)) {
            let b = match side {
                Side::Right => &weights[j],
                Side::Left => &weights[i],
            };
            matrix.view_mut((i * dim, j * dim), (dim, dim)).copy_from(b);
        }
    }
    Ok(NBOperator {
        ell,
        dim,
        side,
        weights: weights.to_vec(),
        matrix,
    })
}

impl NBOperator {
    pub fn total_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        eigenvalues(&self.matrix)
    }
}

/// Weights `a_i ⊗ V_i`.
pub fn tensor_weights(a: &[CMatrix], v: &[CMatrix]) -> Result<Vec<CMatrix>> {
    Error::check_len(a.len(), v.len())?;
    Ok(a.iter().zip(v).map(|(x, y)| kron(x, y)).collect())
}

#[derive(Debug, Clone)]
pub struct CompanionOperator {
    pub lambda: C64,
    pub matrix: CMatrix,
}

/// Default smallest singular value of `λ² - b_{i*} b_i` accepted by
/// [`build_companion`].
pub const COMPANION_MARGIN: f64 = 1e-9;

/// `A^(λ) = b_0(λ) + Σ_i b_i(λ)` with `b_i(λ) = λ b_i (λ² - b_{i*} b_i)^{-1}` and
/// `b_0(λ) = -1 - Σ_i b_i (λ² - b_{i*} b_i)^{-1} b_{i*}`.
pub fn build_companion(weights: &[CMatrix], lambda: C64) -> Result<CompanionOperator> {
    build_companion_with_margin(weights, lambda, COMPANION_MARGIN)
}

pub fn build_companion_with_margin(
    weights: &[CMatrix],
    lambda: C64,
    margin: f64,
) -> Result<CompanionOperator> {
    let dim = check_family(weights)?;
    let ell = weights.len();
    let l2 = lambda * lambda;
    let mut matrix = -CMatrix::identity(dim, dim);
    for i in 0..ell {
        let bs = &weights[colour_star(ell, i)];
        let m = CMatrix::identity(dim, dim) * l2 - bs * &weights[i];
        let smin = min_singular_value(&m);
        if smin <= margin {
            return Err(Error::Precondition(format!(
                "lambda^2 is within {smin:e} of the spectrum of b_{{i*}} b_i for i = {i}"
            )));
        }
        let inv = m.try_inverse().ok_or_else(|| {
            Error::Precondition(format!("lambda^2 - b_{{i*}} b_i singular for i = {i}"))
        })?;
        let bi_inv = &weights[i] * inv;
        matrix += &bi_inv * lambda;
        matrix -= &bi_inv * bs;
    }
    Ok(CompanionOperator { lambda, matrix })
}

/// Smallest singular value of `λ² - b_{i*} b_i` over `i`.
pub fn excluded_set_distance(weights: &[CMatrix], lambda: C64) -> f64 {
    let ell = weights.len();
    let dim = weights.first().map_or(0, |w| w.nrows());
    (0..ell)
        .map(|i| {
            let m = CMatrix::identity(dim, dim) * (lambda * lambda)
                - &weights[colour_star(ell, i)] * &weights[i];
            min_singular_value(&m)
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy)]
pub struct SpectralMappingOptions {
    /// Eigenvalues of `B` must give `σ_min(A^(λ))` below this.
    pub tol_map: f64,
    /// Grid points at least this far from `σ(B)` must give `σ_min(A^(λ))`
    /// above `tol_map`.
    pub tol_sep: f64,
    /// Points with `σ_min(λ² - b_{i*} b_i)` below this are skipped.
    pub exclusion_margin: f64,
    pub grid_points: usize,
}

impl Default for SpectralMappingOptions {
    fn default() -> Self {
        Self {
            tol_map: 1e-6,
            tol_sep: 1e-2,
            exclusion_margin: 1e-3,
            grid_points: 24,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralMappingReport {
    pub side: Side,
    pub eigenvalues_checked: usize,
    pub eigenvalues_excluded: usize,
    /// Largest `σ_min(A^(λ))` over checked eigenvalues `λ`.
    pub worst_eigen_residual: f64,
    pub eigen_failures: Vec<[f64; 3]>,
    pub grid_checked: usize,
    /// Smallest `σ_min(A^(λ))` over grid points away from `σ(B)`.
    pub smallest_off_spectrum: f64,
    pub false_positives: Vec<[f64; 3]>,
}

impl SpectralMappingReport {
    pub fn passed(&self) -> bool {
        self.eigen_failures.is_empty() && self.false_positives.is_empty()
    }
}

/// Checks "λ ∈ σ(B) iff 0 ∈ σ(A^(λ))" on the computed spectrum of `B` and on a
/// square grid of points away from it.
pub fn verify_spectral_mapping(
    weights: &[CMatrix],
    side: Side,
    opts: &SpectralMappingOptions,
) -> Result<SpectralMappingReport> {
    let nb = build_nb(weights, side)?;
    if nb.total_dim() > 3000 {
        return Err(Error::capacity("spectral mapping check dimension", 3000));
    }
    let spectrum = nb.eigenvalues()?;
    let mut report = SpectralMappingReport {
        side,
        eigenvalues_checked: 0,
        eigenvalues_excluded: 0,
        worst_eigen_residual: 0.0,
        eigen_failures: Vec::new(),
        grid_checked: 0,
        smallest_off_spectrum: f64::INFINITY,
        false_positives: Vec::new(),
    };
    let residuals: Vec<Option<f64>> = spectrum
        .par_iter()
        .map(|&lambda| {
            if excluded_set_distance(weights, lambda) < opts.exclusion_margin {
                return None;
            }
            build_companion_with_margin(weights, lambda, 0.0)
                .ok()
                .map(|a| min_singular_value(&a.matrix))
        })
        .collect();
    for (lambda, res) in spectrum.iter().zip(residuals) {
        match res {
            None => report.eigenvalues_excluded += 1,
            Some(s) => {
                report.eigenvalues_checked += 1;
                report.worst_eigen_residual = report.worst_eigen_residual.max(s);
                if s >= opts.tol_map {
                    report.eigen_failures.push([lambda.re, lambda.im, s]);
                }
            }
        }
    }

    let radius = spectrum.iter().map(|z| z.norm()).fold(0.0, f64::max) * 1.25 + 0.5;
    let g = opts.grid_points.max(2);
    let points: Vec<C64> = (0..g)
        .flat_map(|a| {
            (0..g).map(move |b| {
                let t = |k: usize| -radius + 2.0 * radius * (k as f64 + 0.37) / g as f64;
                c(t(a), t(b))
            })
        })
        .collect();
    let grid: Vec<Option<(C64, f64)>> = points
        .par_iter()
        .map(|&lambda| {
            let sep = spectrum
                .iter()
                .map(|z| (z - lambda).norm())
                .fold(f64::INFINITY, f64::min);
            if sep <= opts.tol_sep || excluded_set_distance(weights, lambda) < opts.exclusion_margin
            {
                return None;
            }
            build_companion_with_margin(weights, lambda, 0.0)
                .ok()
                .map(|a| (lambda, min_singular_value(&a.matrix)))
        })
        .collect();
    for (lambda, s) in grid.into_iter().flatten() {
        report.grid_checked += 1;
        report.smallest_off_spectrum = report.smallest_off_spectrum.min(s);
        if s <= opts.tol_map {
            report.false_positives.push([lambda.re, lambda.im, s]);
        }
    }
    Ok(report)
}

/// `‖M^ℓ‖^{1/ℓ}` by binary powering with rescaling, so large `ℓ` neither
/// overflows nor underflows.
pub fn norm_power_root(m: &CMatrix, ell: usize) -> f64 {
    if ell == 0 {
        return 1.0;
    }
    let mut log_scale_base = 0.0_f64;
    let mut base = m.clone();
    let mut acc: Option<(CMatrix, f64)> = None;
    let mut e = ell;
    loop {
        let s = max_abs_entry(&base);
        if s == 0.0 {
            return 0.0;
        }
        base /= c(s, 0.0);
        log_scale_base += s.ln();
        if e & 1 == 1 {
            acc = Some(match acc {
                None => (base.clone(), log_scale_base),
                Some((a, ls)) => {
                    let mut p = &a * &base;
                    let t = max_abs_entry(&p);
                    if t == 0.0 {
                        return 0.0;
                    }
                    p /= c(t, 0.0);
                    (p, ls + log_scale_base + t.ln())
                }
            });
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        base = &base * &base;
        log_scale_base *= 2.0;
    }
    let (a, ls) = acc.expect("ell > 0");
    let n = operator_norm(&a);
    if n == 0.0 {
        return 0.0;
    }
    ((n.ln() + ls) / ell as f64).exp()
}

/// Spectral radius: dense eigensolve up to [`DENSE_EIGEN_CAP`], otherwise
/// `‖B^ℓ‖^{1/ℓ}` with `ℓ` doubled until the relative change drops below 1e-3.
pub fn spectral_radius(op: &NBOperator) -> Result<f64> {
    spectral_radius_of(&op.matrix)
}

pub fn spectral_radius_of(m: &CMatrix) -> Result<f64> {
    if m.nrows() <= DENSE_EIGEN_CAP {
        return crate::linalg::spectral_radius_dense(m);
    }
    spectral_radius_by_powers(m, 1 << 20)
}

pub fn spectral_radius_by_powers(m: &CMatrix, max_ell: usize) -> Result<f64> {
    let mut ell = 8;
    let mut prev = norm_power_root(m, ell);
    while ell < max_ell {
        ell *= 2;
        let next = norm_power_root(m, ell);
        let gap = if next == 0.0 {
            0.0
        } else {
            (next - prev).abs() / next
        };
        if gap < 1e-3 {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::NonConvergence {
        iterations: ell,
        gap: f64::NAN,
    })
}

/// `B_μ = Σ_{i != j*} hat a_j ⊗ V_j ⊗ E_ij` (or its left variant).
pub fn build_b_mu(hat: &[CMatrix], unitaries: &[CMatrix], side: Side) -> Result<NBOperator> {
    build_nb(&tensor_weights(hat, unitaries)?, side)
}

/// [`build_b_mu`] with the hat weights of `pencil` at `mu`.
pub fn b_mu_from_pencil(
    pencil: &MatrixPencil,
    mu: f64,
    unitaries: &[CMatrix],
    side: Side,
    opts: &ResolventOptions,
) -> Result<NBOperator> {
    let hat = hat_weights(pencil, mu, opts)?;
    build_b_mu(&hat, unitaries, side)
}

/// `det(1 - M)`.
pub fn det_one_minus(m: &CMatrix) -> C64 {
    (CMatrix::identity(m.nrows(), m.ncols()) - m).determinant()
}

/// On-disk weights format for `nb-spectrum`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightsFile {
    pub weights: Vec<Vec<Vec<[f64; 2]>>>,
}

impl WeightsFile {
    pub fn from_weights(w: &[CMatrix]) -> Self {
        Self {
            weights: w.iter().map(matrix_to_json).collect(),
        }
    }

    pub fn to_weights(&self) -> Result<Vec<CMatrix>> {
        self.weights
            .iter()
            .map(|m| matrix_from_json(m, m.len()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freegroup::scalar;
    use crate::haarmodel::sample_haar_unitary;
    use crate::linalg::{ginibre, ONE, ZERO};

    fn random_weights(
        seed: u64,
        d: usize,
        r: usize,
        n: usize,
    ) -> (Vec<CMatrix>, Vec<CMatrix>, Vec<CMatrix>) {
        let mut rng = crate::rng::stream(seed);
        let mut a = vec![CMatrix::zeros(r, r); 2 * d];
        let mut v = vec![CMatrix::zeros(n, n); 2 * d];
        for i in 0..2 * d {
            a[i] = ginibre(r, r, &mut rng) * c(1.0 / (r as f64).sqrt(), 0.0);
        }
        for i in 0..d {
            let u = sample_haar_unitary(n, &mut rng);
            v[i + d] = u.adjoint();
            v[i] = u;
        }
        let w = tensor_weights(&a, &v).unwrap();
        (a, v, w)
    }

    #[test]
    fn zero_weights_give_zero_operator() {
        let z = vec![CMatrix::zeros(2, 2); 4];
        let b = build_nb(&z, Side::Right).unwrap();
        assert_eq!(max_abs_entry(&b.matrix), 0.0);
        assert_eq!(spectral_radius(&b).unwrap(), 0.0);
        let a = build_companion(&z, c(0.7, 0.2)).unwrap();
        assert!(max_abs_entry(&(a.matrix + CMatrix::identity(2, 2))) < 1e-15);
    }

    #[test]
    fn block_pattern() {
        let w: Vec<CMatrix> = (0..4).map(|i| scalar(c(i as f64 + 1.0, 0.0))).collect();
        let b = build_nb(&w, Side::Right).unwrap();
        let nonzero = b.matrix.iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(nonzero, 12);
        assert_eq!(b.matrix[(0, 2)], ZERO);
        assert_eq!(b.matrix[(0, 1)], c(2.0, 0.0));
        let l = build_nb(&w, Side::Left).unwrap();
        assert_eq!(l.matrix[(0, 1)], c(1.0, 0.0));
        assert!(build_nb(&[scalar(ONE), CMatrix::zeros(2, 2)], Side::Right).is_err());
    }

    #[test]
    fn two_colour_unit_weights() {
        let w = vec![scalar(ONE), scalar(ONE)];
        let b = build_nb(&w, Side::Right).unwrap();
        assert_eq!(b.matrix, CMatrix::identity(2, 2));
        let ev = b.eigenvalues().unwrap();
        assert!(ev.iter().all(|z| (z - ONE).norm() < 1e-14));
    }

    #[test]
    fn four_colour_pattern_radius_is_three() {
        let w = vec![scalar(ONE); 4];
        let b = build_nb(&w, Side::Right).unwrap();
        assert!((spectral_radius(&b).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn companion_hand_value() {
        let w = vec![scalar(ONE), scalar(ONE)];
        let a = build_companion(&w, c(2.0, 0.0)).unwrap();
        assert!((a.matrix[(0, 0)] - c(-1.0 / 3.0, 0.0)).norm() < 1e-15);
        assert!(build_companion(&w, ONE).is_err());
    }

    #[test]
    fn companion_matches_tensor_form() {
        let (a, v, w) = random_weights(4, 2, 2, 3);
        let lambda = c(0.9, -0.4);
        let got = build_companion(&w, lambda).unwrap().matrix;
        // A^(λ) = a_0(λ) ⊗ 1 + Σ a_i(λ) ⊗ V_i
        let r = 2;
        let n = 3;
        let mut a0 = -CMatrix::identity(r, r);
        let mut expected = CMatrix::zeros(r * n, r * n);
        for i in 0..4 {
            let s = (i + 2) % 4;
            let inv = (CMatrix::identity(r, r) * (lambda * lambda) - &a[s] * &a[i])
                .try_inverse()
                .unwrap();
            expected += kron(&(&a[i] * &inv * lambda), &v[i]);
            a0 -= &a[i] * &inv * &a[s];
        }
        expected += kron(&a0, &CMatrix::identity(n, n));
        assert!(max_abs_entry(&(got - expected)) < 1e-12);
    }

    #[test]
    fn left_and_right_are_conjugate() {
        let (_, _, w) = random_weights(9, 2, 2, 2);
        let r = build_nb(&w, Side::Right).unwrap();
        let l = build_nb(&w, Side::Left).unwrap();
        let dim = w[0].nrows();
        let mut dm = CMatrix::zeros(4 * dim, 4 * dim);
        for (i, b) in w.iter().enumerate() {
            dm.view_mut((i * dim, i * dim), (dim, dim)).copy_from(b);
        }
        let conj = &dm * &r.matrix * dm.try_inverse().unwrap();
        assert!(max_abs_entry(&(conj - &l.matrix)) < 1e-9);
        let a = spectral_radius(&r).unwrap();
        let b = spectral_radius(&l).unwrap();
        assert!((a - b).abs() < 1e-9 * a.max(1.0));
    }

    #[test]
    fn spectral_mapping_random_instances() {
        for seed in 0..6 {
            let (_, _, w) = random_weights(100 + seed, 1 + (seed as usize % 2), 2, 3);
            for side in [Side::Right, Side::Left] {
                let rep =
                    verify_spectral_mapping(&w, side, &SpectralMappingOptions::default()).unwrap();
                assert!(rep.passed(), "seed {seed} {side:?}: {rep:?}");
                assert!(rep.eigenvalues_checked > 0 && rep.grid_checked > 0);
            }
        }
    }

    #[test]
    fn power_roots_agree_with_eigensolve() {
        let (_, _, w) = random_weights(21, 2, 2, 4);
        let b = build_nb(&w, Side::Right).unwrap();
        let dense = spectral_radius(&b).unwrap();
        let powers = spectral_radius_by_powers(&b.matrix, 1 << 20).unwrap();
        assert!((dense - powers).abs() < 0.02 * dense, "{dense} vs {powers}");
        let m = CMatrix::identity(3, 3) * c(2.0, 0.0);
        assert!((norm_power_root(&m, 1000) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn b_mu_detects_outlier_of_permutation_model() {
        // With permutation matrices the constant vector gives the eigenvalue
        // 4 = 2d of A = Σ V_i + V_i^*, outside hull(σ(A_★)) = [-2√3, 2√3].
        let p = MatrixPencil::uniform_scalar(2, 0.0, 1.0).unwrap();
        let perm = |images: &[usize]| {
            let n = images.len();
            let mut m = CMatrix::zeros(n, n);
            for (j, &i) in images.iter().enumerate() {
                m[(i, j)] = ONE;
            }
            m
        };
        let p1 = perm(&[1, 2, 0]);
        let p2 = perm(&[1, 0, 2]);
        let v = vec![p1.clone(), p2.clone(), p1.adjoint(), p2.adjoint()];
        let opts = ResolventOptions::default();
        let det_at = |mu: f64| {
            let b = b_mu_from_pencil(&p, mu, &v, Side::Right, &opts).unwrap();
            det_one_minus(&b.matrix).re
        };
        let below = det_at(3.9);
        let above = det_at(4.1);
        assert!(below * above < 0.0, "{below} {above}");
        let far = b_mu_from_pencil(&p, 5.0, &v, Side::Right, &opts).unwrap();
        assert!(spectral_radius(&far).unwrap() < 1.0);
        let at = b_mu_from_pencil(&p, 4.0, &v, Side::Right, &opts).unwrap();
        let ev = at.eigenvalues().unwrap();
        assert!(ev.iter().any(|z| (z - ONE).norm() < 1e-6));
    }
}

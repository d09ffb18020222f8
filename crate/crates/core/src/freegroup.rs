//! Free groups, operator pencils on `l^2(F_d)` and their Cayley-tree
//! truncations.
//!
//! Letters are `0..2d`; letter `i` stands for the generator `g_{i+1}` when
//! `i < d` and for `g_{i-d+1}^{-1}` otherwise, so the involution is
//! `star(i) = (i + d) mod 2d`. The left-regular representation acts by
//! prepending letters, so in the Cayley tree the children of a word `w` with
//! leftmost letter `l` are the words `k w` with `k != star(l)`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{
    c, ginibre, hermitian_eigenvalues, hermitian_max_eigenvalue, inverse, is_hermitian,
    max_abs_entry, operator_norm, random_hermitian, CMatrix, C64,
};
use crate::{Error, Result};

/// Dense ball matrices are only assembled up to this dimension.
pub const DENSE_BALL_CAP: usize = 20_000;
/// Cap on the number of products visited by [`rho_k_enumerated`].
pub const WORD_ENUMERATION_CAP: usize = 10_000_000;
/// Largest `m` accepted by [`astar_norm_lower`].
pub const CLOSED_WALK_CAP: usize = 1024;

pub fn star(d: usize, i: usize) -> usize {
    (i + d) % (2 * d)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ReducedWord {
    d: usize,
    letters: Vec<usize>,
}

impl ReducedWord {
    pub fn identity(d: usize) -> Self {
        Self {
            d,
            letters: Vec::new(),
        }
    }

    pub fn generator(d: usize, i: usize) -> Result<Self> {
        Self::new(d, vec![i])
    }

    /// Checks that `letters` is reduced.
    pub fn new(d: usize, letters: Vec<usize>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Invalid("free group needs d >= 1".into()));
        }
        if let Some(&bad) = letters.iter().find(|&&l| l >= 2 * d) {
            return Err(Error::Invalid(format!("letter {bad} outside 0..{}", 2 * d)));
        }
        if letters.windows(2).any(|w| w[1] == star(d, w[0])) {
            return Err(Error::Invalid(format!("word {letters:?} is not reduced")));
        }
        Ok(Self { d, letters })
    }

    /// Free reduction of an arbitrary letter sequence.
    pub fn reduce(d: usize, letters: &[usize]) -> Result<Self> {
        let mut out = Self::identity(d);
        for &l in letters {
            if l >= 2 * d {
                return Err(Error::Invalid(format!("letter {l} outside 0..{}", 2 * d)));
            }
            out.push_right(l);
        }
        Ok(out)
    }

    fn push_right(&mut self, l: usize) {
        if self.letters.last() == Some(&star(self.d, l)) {
            self.letters.pop();
        } else {
            self.letters.push(l);
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn letters(&self) -> &[usize] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// `g_l * self`.
    pub fn left_mul(&self, l: usize) -> Self {
        let mut letters = self.letters.clone();
        if letters.first() == Some(&star(self.d, l)) {
            letters.remove(0);
        } else {
            letters.insert(0, l);
        }
        Self { d: self.d, letters }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for &l in &other.letters {
            out.push_right(l);
        }
        out
    }

    pub fn inverse(&self) -> Self {
        Self {
            d: self.d,
            letters: self
                .letters
                .iter()
                .rev()
                .map(|&l| star(self.d, l))
                .collect(),
        }
    }
}

impl fmt::Display for ReducedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "o");
        }
        let parts: Vec<String> = self
            .letters
            .iter()
            .map(|&l| {
                if l < self.d {
                    format!("g{}", l + 1)
                } else {
                    format!("g{}^-1", l - self.d + 1)
                }
            })
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// All reduced words of length at most `radius`, by length then letters.
pub fn ball_words(d: usize, radius: usize) -> Vec<ReducedWord> {
    let mut out = vec![ReducedWord::identity(d)];
    let mut level = vec![ReducedWord::identity(d)];
    for _ in 0..radius {
        let mut next = Vec::new();
        for w in &level {
            for l in 0..2 * d {
                if w.letters.last() != Some(&star(d, l)) {
                    let mut letters = w.letters.clone();
                    letters.push(l);
                    next.push(ReducedWord { d, letters });
                }
            }
        }
        next.sort();
        out.extend(next.iter().cloned());
        level = next;
    }
    out
}

pub fn ball_size(d: usize, radius: usize) -> usize {
    if d == 0 {
        return 1;
    }
    let mut total = 1usize;
    let mut level = 1usize;
    for t in 0..radius {
        level = level.saturating_mul(if t == 0 { 2 * d } else { 2 * d - 1 });
        total = total.saturating_add(level);
    }
    total
}

/// The pencil `A = a0 (x) 1 + sum_i a_i (x) lambda(g_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PencilFile", into = "PencilFile")]
pub struct MatrixPencil {
    d: usize,
    coeff_dim: usize,
    a0: CMatrix,
    a: Vec<CMatrix>,
}

impl MatrixPencil {
    pub fn new(d: usize, a0: CMatrix, a: Vec<CMatrix>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Invalid("pencil needs d >= 1".into()));
        }
        Error::check_len(2 * d, a.len())?;
        let r = a0.nrows();
        if r == 0 {
            return Err(Error::Invalid(
                "coefficient dimension must be positive".into(),
            ));
        }
        for m in std::iter::once(&a0).chain(&a) {
            if m.nrows() != r || m.ncols() != r {
                return Err(Error::Invalid(format!(
                    "coefficient of shape {}x{} in a pencil of dimension {r}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(Self {
            d,
            coeff_dim: r,
            a0,
            a,
        })
    }

    /// Scalar pencil `a0 + x * sum_i lambda(g_i)`.
    pub fn uniform_scalar(d: usize, a0: f64, x: f64) -> Result<Self> {
        let s = |v: f64| CMatrix::from_element(1, 1, c(v, 0.0));
        Self::new(d, s(a0), vec![s(x); 2 * d])
    }

    pub fn zero(d: usize, coeff_dim: usize) -> Result<Self> {
        let z = CMatrix::zeros(coeff_dim, coeff_dim);
        Self::new(d, z.clone(), vec![z; 2 * d])
    }

    /// A self-adjoint pencil with Gaussian coefficients of norm of order one.
    pub fn random_self_adjoint<R: Rng + ?Sized>(d: usize, coeff_dim: usize, rng: &mut R) -> Self {
        let scale = c(1.0 / (2.0 * (coeff_dim as f64).sqrt()), 0.0);
        let a0 = random_hermitian(coeff_dim, rng) * scale;
        let mut a = vec![CMatrix::zeros(coeff_dim, coeff_dim); 2 * d];
        for i in 0..d {
            let g = ginibre(coeff_dim, coeff_dim, rng) * scale;
            a[i + d] = g.adjoint();
            a[i] = g;
        }
        Self {
            d,
            coeff_dim,
            a0,
            a,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn coeff_dim(&self) -> usize {
        self.coeff_dim
    }

    pub fn a0(&self) -> &CMatrix {
        &self.a0
    }

    pub fn weights(&self) -> &[CMatrix] {
        &self.a
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        is_hermitian(&self.a0, tol)
            && (0..2 * self.d)
                .all(|i| max_abs_entry(&(&self.a[star(self.d, i)] - self.a[i].adjoint())) <= tol)
    }

    /// `‖a0‖ + sum ‖a_i‖`, an upper bound on `‖A‖`.
    pub fn trivial_norm_bound(&self) -> f64 {
        operator_norm(&self.a0) + self.a.iter().map(operator_norm).sum::<f64>()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let f = c(s, 0.0);
        Self {
            d: self.d,
            coeff_dim: self.coeff_dim,
            a0: &self.a0 * f,
            a: self.a.iter().map(|m| m * f).collect(),
        }
    }

    /// The self-adjoint pencil with coefficients `[[0, a_g], [a_{g^-1}^*, 0]]`,
    /// whose operator is `E12 (x) A + E21 (x) A^*` and has the same norm as `A`.
    pub fn hermitian_dilation(&self) -> Self {
        let r = self.coeff_dim;
        let block = |x: &CMatrix, y: &CMatrix| {
            let mut m = CMatrix::zeros(2 * r, 2 * r);
            m.view_mut((0, r), (r, r)).copy_from(x);
            m.view_mut((r, 0), (r, r)).copy_from(&y.adjoint());
            m
        };
        Self {
            d: self.d,
            coeff_dim: 2 * r,
            a0: block(&self.a0, &self.a0),
            a: (0..2 * self.d)
                .map(|i| block(&self.a[i], &self.a[star(self.d, i)]))
                .collect(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

type JsonMatrix = Vec<Vec<[f64; 2]>>;

/// On-disk pencil format: complex entries as `[re, im]`, matrices row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PencilFile {
    pub d: usize,
    pub coeff_dim: usize,
    pub a0: JsonMatrix,
    pub a: Vec<JsonMatrix>,
}

pub fn matrix_to_json(m: &CMatrix) -> JsonMatrix {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect()
}

pub fn matrix_from_json(rows: &JsonMatrix, dim: usize) -> Result<CMatrix> {
    Error::check_len(dim, rows.len())?;
    for row in rows {
        Error::check_len(dim, row.len())?;
    }
    Ok(CMatrix::from_fn(dim, dim, |i, j| {
        c(rows[i][j][0], rows[i][j][1])
    }))
}

impl TryFrom<PencilFile> for MatrixPencil {
    type Error = Error;

    fn try_from(f: PencilFile) -> Result<Self> {
        let a0 = matrix_from_json(&f.a0, f.coeff_dim)?;
        let a =
            f.a.iter()
                .map(|m| matrix_from_json(m, f.coeff_dim))
                .collect::<Result<Vec<_>>>()?;
        MatrixPencil::new(f.d, a0, a)
    }
}

impl From<MatrixPencil> for PencilFile {
    fn from(p: MatrixPencil) -> Self {
        PencilFile {
            d: p.d,
            coeff_dim: p.coeff_dim,
            a0: matrix_to_json(&p.a0),
            a: p.a.iter().map(matrix_to_json).collect(),
        }
    }
}

/// Compression of `A` to the span of `C^r (x) delta_w`, `|w| <= radius`.
#[derive(Debug, Clone)]
pub struct TreeBallOperator {
    pub radius: usize,
    pub basis: Vec<ReducedWord>,
    pub matrix: CMatrix,
}

impl TreeBallOperator {
    pub fn build(pencil: &MatrixPencil, radius: usize) -> Result<Self> {
        let r = pencil.coeff_dim;
        let size = ball_size(pencil.d, radius);
        if size.saturating_mul(r) > DENSE_BALL_CAP {
            return Err(Error::capacity(
                format!(
                    "ball of radius {radius} has dimension {}",
                    size.saturating_mul(r)
                ),
                DENSE_BALL_CAP,
            ));
        }
        let basis = ball_words(pencil.d, radius);
        let index: HashMap<&ReducedWord, usize> =
            basis.iter().enumerate().map(|(i, w)| (w, i)).collect();
        let mut matrix = CMatrix::zeros(size * r, size * r);
        for (col, y) in basis.iter().enumerate() {
            matrix
                .view_mut((col * r, col * r), (r, r))
                .copy_from(&pencil.a0);
            for l in 0..2 * pencil.d {
                let x = y.left_mul(l);
                if let Some(&row) = index.get(&x) {
                    let mut blk = matrix.view_mut((row * r, col * r), (r, r));
                    blk += &pencil.a[l];
                }
            }
        }
        Ok(Self {
            radius,
            basis,
            matrix,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn norm(&self) -> f64 {
        operator_norm(&self.matrix)
    }
}

/// Extreme eigenvalues of a ball compression of a self-adjoint pencil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallSpectrum {
    pub radius: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl BallSpectrum {
    pub fn norm(&self) -> f64 {
        self.lambda_max.max(-self.lambda_min)
    }
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// Whether `mu - T_R` is positive definite, `T_R` the radius-`radius` ball
/// compression. Eliminates the tree from the leaves inwards: all vertices of
/// the same type at the same depth share a pivot, and the matrix is positive
/// definite exactly when every pivot is.
fn ball_dominated_by(pencil: &MatrixPencil, mu: f64, radius: usize) -> bool {
    let d = pencil.d;
    let r = pencil.coeff_dim;
    let base = CMatrix::identity(r, r) * c(mu, 0.0) - &pencil.a0;
    // nalgebra's complex Cholesky takes complex square roots of negative
    // pivots instead of failing, so definiteness is read off the spectrum.
    let pd_inverse = |p: CMatrix| -> Option<CMatrix> {
        let h = hermitian_part(&p);
        if hermitian_eigenvalues(&h).first().is_some_and(|&v| v > 0.0) {
            inverse(&h)
        } else {
            None
        }
    };
    if radius == 0 {
        return pd_inverse(base).is_some();
    }
    let leaf = match pd_inverse(base.clone()) {
        Some(g) => g,
        None => return false,
    };
    let mut gamma = vec![leaf; 2 * d];
    for _ in 1..radius {
        let mut next = Vec::with_capacity(2 * d);
        for i in 0..2 * d {
            let mut p = base.clone();
            for k in (0..2 * d).filter(|&k| k != star(d, i)) {
                p -= &pencil.a[star(d, k)] * &gamma[k] * &pencil.a[k];
            }
            match pd_inverse(p) {
                Some(g) => next.push(g),
                None => return false,
            }
        }
        gamma = next;
    }
    let mut root = base;
    for j in 0..2 * d {
        root -= &pencil.a[star(d, j)] * &gamma[j] * &pencil.a[j];
    }
    pd_inverse(root).is_some()
}

fn ball_lambda_max(pencil: &MatrixPencil, radius: usize) -> f64 {
    if pencil.trivial_norm_bound() == 0.0 {
        return 0.0;
    }
    let mut lo = hermitian_max_eigenvalue(&hermitian_part(&pencil.a0));
    let mut hi = lo.max(0.0) + pencil.trivial_norm_bound() + 1.0;
    let scale = hi.abs().max(1.0);
    for _ in 0..200 {
        if hi - lo <= 1e-13 * scale {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if ball_dominated_by(pencil, mid, radius) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Spectrum edges of the ball compression of a self-adjoint pencil, by
/// bisection on positive definiteness. Both edges move outwards as the radius
/// grows and converge to the edges of `hull(σ(A))`.
pub fn ball_spectrum(pencil: &MatrixPencil, radius: usize) -> Result<BallSpectrum> {
    if !pencil.is_self_adjoint(1e-10) {
        return Err(Error::Precondition(
            "ball spectrum needs a self-adjoint pencil".into(),
        ));
    }
    Ok(BallSpectrum {
        radius,
        lambda_max: ball_lambda_max(pencil, radius),
        lambda_min: -ball_lambda_max(&pencil.scaled(-1.0), radius),
    })
}

/// Lower estimate of `‖A‖` from the radius-`radius` ball compression. Works
/// for any pencil by passing through the Hermitian dilation.
pub fn ball_norm_estimate(pencil: &MatrixPencil, radius: usize) -> f64 {
    if pencil.is_self_adjoint(1e-10) {
        ball_spectrum(pencil, radius)
            .map(|s| s.norm())
            .unwrap_or(f64::NAN)
    } else {
        ball_lambda_max(&pencil.hermitian_dilation(), radius)
    }
}

/// `λ_max(P_o A^{2m} P_o^*)^{1/(2m)} = max_φ ‖A^m (φ ⊗ δ_o)‖^{1/m}` for a
/// self-adjoint pencil.
///
/// The `(o, o)` block of `A^L` is a sum over closed walks on the Cayley tree,
/// computed by first-excursion decomposition without building any ball.
pub fn astar_norm_lower(pencil: &MatrixPencil, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::Invalid("m must be positive".into()));
    }
    if m > CLOSED_WALK_CAP {
        return Err(Error::capacity(
            format!("closed walks of length {}", 2 * m),
            2 * CLOSED_WALK_CAP,
        ));
    }
    if !pencil.is_self_adjoint(1e-10) {
        return Err(Error::Precondition(
            "astar_norm_lower needs a self-adjoint pencil".into(),
        ));
    }
    let bound = pencil.trivial_norm_bound();
    if bound == 0.0 {
        return Ok(0.0);
    }
    let p = pencil.scaled(1.0 / bound);
    let w = closed_walk_sums(&p, 2 * m);
    let top = hermitian_max_eigenvalue(&hermitian_part(&w[2 * m])).max(0.0);
    Ok(bound * top.powf(1.0 / (2 * m) as f64))
}

/// `(A^L)_{oo}` for `L = 0..=len`.
pub fn closed_walk_sums(pencil: &MatrixPencil, len: usize) -> Vec<CMatrix> {
    let d = pencil.d;
    let r = pencil.coeff_dim;
    let id = CMatrix::identity(r, r);
    // z[j][L]: closed walks at g_j confined to its subtree; y[j][s]: excursions
    // from the parent into that subtree and back, of total length s.
    let mut z: Vec<Vec<CMatrix>> = vec![vec![id.clone()]; 2 * d];
    let mut y: Vec<Vec<CMatrix>> = vec![vec![CMatrix::zeros(r, r), CMatrix::zeros(r, r)]; 2 * d];
    let mut e: Vec<CMatrix> = vec![id];
    for l in 1..=len {
        if l >= 2 {
            for j in 0..2 * d {
                let v = &pencil.a[star(d, j)] * &z[j][l - 2] * &pencil.a[j];
                y[j].push(v);
            }
        }
        let mut next_z = Vec::with_capacity(2 * d);
        for j in 0..2 * d {
            let mut acc = &z[j][l - 1] * &pencil.a0;
            for k in (0..2 * d).filter(|&k| k != star(d, j)) {
                for s in 2..=l {
                    acc += &z[j][l - s] * &y[k][s];
                }
            }
            next_z.push(acc);
        }
        for (j, v) in next_z.into_iter().enumerate() {
            z[j].push(v);
        }
        let mut acc = &e[l - 1] * &pencil.a0;
        for yk in &y {
            for s in 2..=l {
                acc += &e[l - s] * &yk[s];
            }
        }
        e.push(acc);
    }
    e
}

/// The Weyl sequence `ρ_k` of the non-backtracking operator with weights
/// `a_1..a_{2d}`:
/// `ρ_k^{2k} = (2d-1) max_i λ_max(Σ_w M_w^* M_w)`, `w` over non-backtracking
/// colour sequences of length `k` starting with `i`, `M_w = a_{i_1}...a_{i_k}`.
///
/// The sum is accumulated by a recursion over the last colour, so the cost is
/// linear in `k`.
pub fn rho_k_weights(weights: &[CMatrix], k: usize) -> Result<f64> {
    let (d, r) = check_weights(weights)?;
    if k == 0 {
        return Err(Error::Invalid("k must be positive".into()));
    }
    let bound = weights.iter().map(operator_norm).fold(0.0, f64::max);
    if bound == 0.0 {
        return Ok(0.0);
    }
    let w: Vec<CMatrix> = weights.iter().map(|m| m * c(1.0 / bound, 0.0)).collect();
    let tops: Vec<f64> = (0..2 * d)
        .into_par_iter()
        .map(|i| {
            let mut s = vec![CMatrix::zeros(r, r); 2 * d];
            s[i] = w[i].adjoint() * &w[i];
            for _ in 1..k {
                let mut next = Vec::with_capacity(2 * d);
                for j in 0..2 * d {
                    let mut inner = CMatrix::zeros(r, r);
                    for (l, sl) in s.iter().enumerate() {
                        if j != star(d, l) {
                            inner += sl;
                        }
                    }
                    next.push(w[j].adjoint() * inner * &w[j]);
                }
                s = next;
            }
            let total = s.iter().fold(CMatrix::zeros(r, r), |acc, m| acc + m);
            hermitian_max_eigenvalue(&hermitian_part(&total))
        })
        .collect();
    Ok(rho_from_top(d, k, tops, bound))
}

fn rho_from_top(d: usize, k: usize, tops: Vec<f64>, bound: f64) -> f64 {
    let top = tops.into_iter().fold(0.0, f64::max);
    bound * ((2 * d - 1) as f64 * top).powf(1.0 / (2 * k) as f64)
}

pub fn rho_k(pencil: &MatrixPencil, k: usize) -> Result<f64> {
    rho_k_weights(&pencil.a, k)
}

/// `ρ_k` by streaming over every non-backtracking word, carrying the running
/// product. Capped at [`WORD_ENUMERATION_CAP`] products.
pub fn rho_k_enumerated(weights: &[CMatrix], k: usize) -> Result<f64> {
    let (d, r) = check_weights(weights)?;
    if k == 0 {
        return Err(Error::Invalid("k must be positive".into()));
    }
    let count = ((2 * d - 1) as f64).powi(k as i32 - 1) * (2 * d) as f64;
    if count > WORD_ENUMERATION_CAP as f64 {
        return Err(Error::capacity(
            format!("{count:.0} non-backtracking words of length {k}"),
            WORD_ENUMERATION_CAP,
        ));
    }
    fn walk(
        weights: &[CMatrix],
        d: usize,
        last: usize,
        prod: &CMatrix,
        remaining: usize,
        acc: &mut CMatrix,
    ) {
        if remaining == 0 {
            *acc += prod.adjoint() * prod;
            return;
        }
        for j in (0..2 * d).filter(|&j| j != star(d, last)) {
            walk(weights, d, j, &(prod * &weights[j]), remaining - 1, acc);
        }
    }
    let tops: Vec<f64> = (0..2 * d)
        .into_par_iter()
        .map(|i| {
            let mut acc = CMatrix::zeros(r, r);
            walk(weights, d, i, &weights[i], k - 1, &mut acc);
            hermitian_max_eigenvalue(&hermitian_part(&acc))
        })
        .collect();
    Ok(rho_from_top(d, k, tops, 1.0))
}

fn check_weights(weights: &[CMatrix]) -> Result<(usize, usize)> {
    if weights.is_empty() || weights.len() % 2 != 0 {
        return Err(Error::Invalid(format!(
            "need an even, positive number of weights, got {}",
            weights.len()
        )));
    }
    let r = weights[0].nrows();
    if weights.iter().any(|m| m.nrows() != r || m.ncols() != r) {
        return Err(Error::Invalid(
            "weights must be square of a common size".into(),
        ));
    }
    Ok((weights.len() / 2, r))
}

#[derive(Debug, Clone, Copy)]
pub struct ResolventOptions {
    pub initial_radius: usize,
    pub max_radius: usize,
    /// Largest entry change between successive radii accepted as converged.
    pub tol: f64,
    /// Points closer than this to the estimated hull are rejected.
    pub hull_margin: f64,
    /// Radius of the ball compression used to estimate the hull.
    pub hull_radius: usize,
}

impl Default for ResolventOptions {
    fn default() -> Self {
        Self {
            initial_radius: 16,
            max_radius: 1 << 16,
            tol: 1e-10,
            hull_margin: 0.05,
            hull_radius: 64,
        }
    }
}

/// Resolvent blocks `G_oo` and `G_{o g_j}` of the radius-`radius` truncation.
struct TruncatedResolvent {
    g_oo: CMatrix,
    g_o_gen: Vec<CMatrix>,
}

fn truncated_resolvent(
    pencil: &MatrixPencil,
    mu: f64,
    radius: usize,
) -> Result<TruncatedResolvent> {
    let d = pencil.d;
    let r = pencil.coeff_dim;
    let base = CMatrix::identity(r, r) * c(mu, 0.0) - &pencil.a0;
    let inv = |m: &CMatrix| {
        inverse(m).ok_or_else(|| {
            Error::Precondition(format!("singular pivot in the resolvent at mu = {mu}"))
        })
    };
    if radius == 0 {
        return Ok(TruncatedResolvent {
            g_oo: inv(&base)?,
            g_o_gen: vec![CMatrix::zeros(r, r); 2 * d],
        });
    }
    let leaf = inv(&base)?;
    let mut gamma = vec![leaf; 2 * d];
    for _ in 1..radius {
        let mut next = Vec::with_capacity(2 * d);
        for i in 0..2 * d {
            let mut p = base.clone();
            for k in (0..2 * d).filter(|&k| k != star(d, i)) {
                p -= &pencil.a[star(d, k)] * &gamma[k] * &pencil.a[k];
            }
            next.push(inv(&p)?);
        }
        gamma = next;
    }
    let mut root = base;
    for j in 0..2 * d {
        root -= &pencil.a[star(d, j)] * &gamma[j] * &pencil.a[j];
    }
    let g_oo = inv(&root)?;
    let g_o_gen = (0..2 * d)
        .map(|j| &g_oo * &pencil.a[star(d, j)] * &gamma[j])
        .collect();
    Ok(TruncatedResolvent { g_oo, g_o_gen })
}

fn check_outside_hull(pencil: &MatrixPencil, mu: f64, opts: &ResolventOptions) -> Result<()> {
    if !pencil.is_self_adjoint(1e-10) {
        return Err(Error::Precondition(
            "resolvent needs a self-adjoint pencil".into(),
        ));
    }
    let hull = ball_spectrum(pencil, opts.hull_radius)?;
    if mu >= hull.lambda_min - opts.hull_margin && mu <= hull.lambda_max + opts.hull_margin {
        return Err(Error::Precondition(format!(
            "mu = {mu} lies within {} of the estimated hull [{:.6}, {:.6}]",
            opts.hull_margin, hull.lambda_min, hull.lambda_max
        )));
    }
    Ok(())
}

fn converged_resolvent(
    pencil: &MatrixPencil,
    mu: f64,
    opts: &ResolventOptions,
) -> Result<TruncatedResolvent> {
    check_outside_hull(pencil, mu, opts)?;
    let mut radius = opts.initial_radius.max(1);
    let mut current = truncated_resolvent(pencil, mu, radius)?;
    loop {
        if radius >= opts.max_radius {
            break;
        }
        radius = (radius * 2).min(opts.max_radius);
        let next = truncated_resolvent(pencil, mu, radius)?;
        let mut gap = max_abs_entry(&(&next.g_oo - &current.g_oo));
        for (a, b) in next.g_o_gen.iter().zip(&current.g_o_gen) {
            gap = gap.max(max_abs_entry(&(a - b)));
        }
        current = next;
        if gap < opts.tol {
            return Ok(current);
        }
        if radius >= opts.max_radius {
            return Err(Error::NonConvergence {
                iterations: radius,
                gap,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: radius,
        gap: f64::NAN,
    })
}

/// Resolvent entries `G_{o x}(μ) = P_o (μ - A)^{-1} P_x^*` for words `x` of
/// length at most one, from Dirichlet truncations of growing radius.
pub fn resolvent_entries(
    pencil: &MatrixPencil,
    mu: f64,
    targets: &[ReducedWord],
    opts: &ResolventOptions,
) -> Result<BTreeMap<ReducedWord, CMatrix>> {
    for t in targets {
        if t.len() > 1 || t.d != pencil.d {
            return Err(Error::Invalid(format!("unsupported resolvent target {t}")));
        }
    }
    let res = converged_resolvent(pencil, mu, opts)?;
    Ok(targets
        .iter()
        .map(|t| {
            let m = match t.letters.first() {
                None => res.g_oo.clone(),
                Some(&j) => res.g_o_gen[j].clone(),
            };
            (t.clone(), m)
        })
        .collect())
}

/// `hat a_i(μ) = G_oo(μ)^{-1} G_{o g_i}(μ)`, the weights of the companion
/// non-backtracking operator.
pub fn hat_weights(
    pencil: &MatrixPencil,
    mu: f64,
    opts: &ResolventOptions,
) -> Result<Vec<CMatrix>> {
    let res = converged_resolvent(pencil, mu, opts)?;
    let scale = max_abs_entry(&res.g_oo).max(f64::MIN_POSITIVE);
    if crate::linalg::min_singular_value(&res.g_oo) <= 1e-12 * scale {
        return Err(Error::Precondition(format!(
            "G_oo is singular at mu = {mu}"
        )));
    }
    let inv = inverse(&res.g_oo)
        .ok_or_else(|| Error::Precondition(format!("G_oo is singular at mu = {mu}")))?;
    Ok(res.g_o_gen.iter().map(|g| &inv * g).collect())
}

pub fn scalar(v: C64) -> CMatrix {
    CMatrix::from_element(1, 1, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ONE, ZERO};

    fn kesten(d: usize) -> MatrixPencil {
        MatrixPencil::uniform_scalar(d, 0.0, 1.0).unwrap()
    }

    #[test]
    fn words_reduce_and_invert() {
        let w = ReducedWord::reduce(2, &[0, 1, 3, 2]).unwrap();
        assert!(w.is_empty());
        let w = ReducedWord::new(2, vec![0, 1]).unwrap();
        assert!(w.mul(&w.inverse()).is_empty());
        assert!(ReducedWord::new(2, vec![0, 2]).is_err());
        assert_eq!(w.left_mul(2).letters(), &[1]);
        assert_eq!(w.to_string(), "g1 g2");
    }

    #[test]
    fn ball_sizes_match_enumeration() {
        for d in 1..=3 {
            for r in 0..=4 {
                assert_eq!(ball_words(d, r).len(), ball_size(d, r));
            }
        }
    }

    #[test]
    fn rho_k_uniform_closed_form() {
        for d in 1..=3 {
            for k in 1..=12 {
                let x = 0.7;
                let p = MatrixPencil::uniform_scalar(d, 0.0, x).unwrap();
                let v = rho_k(&p, k).unwrap();
                let expected = ((2 * d - 1) as f64).sqrt() * x;
                assert!((v - expected).abs() < 1e-12, "d={d} k={k}: {v}");
            }
        }
    }

    #[test]
    fn rho_k_recursion_matches_enumeration() {
        let mut rng = crate::rng::stream(3);
        for d in 1..=2 {
            let p = MatrixPencil::random_self_adjoint(d, 2, &mut rng);
            for k in 1..=6 {
                let a = rho_k(&p, k).unwrap();
                let b = rho_k_enumerated(p.weights(), k).unwrap();
                assert!((a - b).abs() < 1e-10 * b.max(1.0), "{a} vs {b}");
            }
        }
        assert!(rho_k_enumerated(kesten(3).weights(), 14).is_err());
        assert_eq!(rho_k(&MatrixPencil::zero(2, 2).unwrap(), 5).unwrap(), 0.0);
    }

    #[test]
    fn ball_spectrum_matches_dense() {
        let mut rng = crate::rng::stream(11);
        for d in 1..=2 {
            let p = MatrixPencil::random_self_adjoint(d, 2, &mut rng);
            for radius in 0..=3 {
                let ball = TreeBallOperator::build(&p, radius).unwrap();
                let eig = hermitian_eigenvalues(&ball.matrix);
                let s = ball_spectrum(&p, radius).unwrap();
                assert!((s.lambda_max - eig[eig.len() - 1]).abs() < 1e-9);
                assert!((s.lambda_min - eig[0]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ball_norms_are_monotone() {
        let mut rng = crate::rng::stream(5);
        let p = MatrixPencil::random_self_adjoint(2, 2, &mut rng);
        let norms: Vec<f64> = (0..=4)
            .map(|r| TreeBallOperator::build(&p, r).unwrap().norm())
            .collect();
        for w in norms.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
    }

    #[test]
    fn integer_line_truncation() {
        // Dirichlet truncation of shift + shift^* on 2R+1 sites.
        for r in [1usize, 5, 20] {
            let s = ball_spectrum(&kesten(1), r).unwrap();
            let expected = 2.0 * (std::f64::consts::PI / (2 * r + 2) as f64).cos();
            assert!((s.lambda_max - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn kesten_ball_estimate_at_radius_20() {
        let est = ball_norm_estimate(&kesten(2), 20);
        assert!(est <= 2.0 * 3f64.sqrt() + 1e-12);
        assert!((est - 2.0 * 3f64.sqrt()).abs() < 0.15, "{est}");
    }

    #[test]
    fn astar_lower_scalar_multiple_of_identity() {
        let p = MatrixPencil::new(2, scalar(c(-1.5, 0.0)), vec![scalar(ZERO); 4]).unwrap();
        assert!((astar_norm_lower(&p, 3).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn closed_walks_count_on_tree() {
        // Closed walks of length 2m from the root of the 4-regular tree:
        // 1, 4, 28, 232, 2092.
        let w = closed_walk_sums(&kesten(2), 8);
        let counts: Vec<f64> = w.iter().step_by(2).map(|m| m[(0, 0)].re).collect();
        assert_eq!(counts, vec![1.0, 4.0, 28.0, 232.0, 2092.0]);
        assert_eq!(w[3][(0, 0)].re, 0.0);
    }

    #[test]
    fn astar_lower_is_below_ball_norms() {
        let mut rng = crate::rng::stream(8);
        let p = MatrixPencil::random_self_adjoint(2, 2, &mut rng);
        for m in 1..=4 {
            let lower = astar_norm_lower(&p, m).unwrap();
            let ball = TreeBallOperator::build(&p, m).unwrap().norm();
            assert!(lower <= ball + 1e-9, "m={m}: {lower} > {ball}");
        }
        let a = astar_norm_lower(&kesten(1), 200).unwrap();
        assert!(a < 2.0 && a > 1.95);
    }

    #[test]
    fn integer_line_resolvent() {
        let p = kesten(1);
        let o = ReducedWord::identity(1);
        let g = resolvent_entries(&p, 3.0, &[o.clone()], &ResolventOptions::default()).unwrap();
        assert!((g[&o][(0, 0)].re - 1.0 / 5f64.sqrt()).abs() < 1e-10);
        let hat = hat_weights(&p, 3.0, &ResolventOptions::default()).unwrap();
        for h in hat {
            assert!((h[(0, 0)].re - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_pencil_resolvent() {
        let p = MatrixPencil::zero(2, 1).unwrap();
        let o = ReducedWord::identity(2);
        let g = resolvent_entries(&p, 1.0, &[o.clone()], &ResolventOptions::default()).unwrap();
        assert!((g[&o][(0, 0)] - ONE).norm() < 1e-14);
        let hat = hat_weights(&p, 1.0, &ResolventOptions::default()).unwrap();
        assert!(hat.iter().all(|h| h[(0, 0)].norm() == 0.0));
    }

    #[test]
    fn kesten_resolvent_symmetry() {
        let p = kesten(2);
        let mut targets = vec![ReducedWord::identity(2)];
        targets.extend((0..4).map(|i| ReducedWord::generator(2, i).unwrap()));
        let g = resolvent_entries(&p, 4.0, &targets, &ResolventOptions::default()).unwrap();
        let goo = g[&targets[0]][(0, 0)];
        assert!(goo.re > 0.0 && goo.im.abs() < 1e-14);
        for t in &targets[1..] {
            assert!((g[t][(0, 0)] - g[&targets[1]][(0, 0)]).norm() < 1e-12);
        }
        let hat = hat_weights(&p, 4.0, &ResolventOptions::default()).unwrap();
        let h = hat[0][(0, 0)].re;
        assert!(h > 0.0 && h < 1.0 / 3.0);
    }

    #[test]
    fn resolvent_rejects_points_in_hull() {
        let p = kesten(2);
        let o = ReducedWord::identity(2);
        assert!(resolvent_entries(&p, 3.0, &[o], &ResolventOptions::default()).is_err());
    }

    #[test]
    fn pencil_json_round_trip() {
        let mut rng = crate::rng::stream(1);
        let p = MatrixPencil::random_self_adjoint(2, 3, &mut rng);
        let back = MatrixPencil::from_json_str(&p.to_json_string().unwrap()).unwrap();
        assert_eq!(p, back);
        assert!(back.is_self_adjoint(1e-14));
        assert!(
            MatrixPencil::from_json_str(r#"{"d":1,"coeff_dim":1,"a0":[[[0,0]]],"a":[]}"#).is_err()
        );
    }

    #[test]
    fn dilation_preserves_norm() {
        let mut rng = crate::rng::stream(2);
        let a0 = ginibre(2, 2, &mut rng);
        let a: Vec<CMatrix> = (0..2).map(|_| ginibre(2, 2, &mut rng)).collect();
        let p = MatrixPencil::new(1, a0, a).unwrap();
        let dil = p.hermitian_dilation();
        assert!(dil.is_self_adjoint(1e-14));
        let b = TreeBallOperator::build(&p, 3).unwrap().norm();
        let bd = TreeBallOperator::build(&dil, 3).unwrap().norm();
        assert!((b - bd).abs() < 1e-10);
    }
}

//! Reduction of norms of polynomials in the left-regular representation to
//! norms of linear pencils.
//!
//! A self-adjoint `Q` supported on `G²` is written as `P^* P - c|G|` with `P`
//! supported on `G`, so `‖Q + c|G|‖ = ‖P‖²`; doing this for `Q` and `-Q`
//! recovers `‖Q‖` from two shifted norms, and `‖P‖` is again the norm of a
//! self-adjoint polynomial of half the degree.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::freegroup::{ball_norm_estimate, ball_words, MatrixPencil, ReducedWord};
use crate::linalg::{c, kron, max_abs_entry, operator_norm, sqrt_psd, CMatrix, C64};
use crate::{Error, Result};

/// Radius of the ball compression used by [`default_oracle`].
pub const ORACLE_RADIUS: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct GroupPolynomial {
    d: usize,
    rows: usize,
    cols: usize,
    terms: BTreeMap<ReducedWord, CMatrix>,
}

impl GroupPolynomial {
    pub fn zero(d: usize, rows: usize, cols: usize) -> Self {
        Self {
            d,
            rows,
            cols,
            terms: BTreeMap::new(),
        }
    }

    /// `a · λ(e)`.
    pub fn constant(d: usize, a: CMatrix) -> Self {
        let mut p = Self::zero(d, a.nrows(), a.ncols());
        p.terms.insert(ReducedWord::identity(d), a);
        p
    }

    pub fn from_terms(
        d: usize,
        rows: usize,
        cols: usize,
        terms: Vec<(ReducedWord, CMatrix)>,
    ) -> Result<Self> {
        let mut p = Self::zero(d, rows, cols);
        for (w, m) in terms {
            p.add_term(w, m)?;
        }
        Ok(p)
    }

    /// Adds `m · λ(w)`, accumulating onto an existing coefficient.
    pub fn add_term(&mut self, w: ReducedWord, m: CMatrix) -> Result<()> {
        if w.d() != self.d {
            return Err(Error::Invalid(format!(
                "word {w} lives in F_{} not F_{}",
                w.d(),
                self.d
            )));
        }
        if m.nrows() != self.rows || m.ncols() != self.cols {
            return Err(Error::Invalid(format!(
                "coefficient {}x{} in a {}x{} polynomial",
                m.nrows(),
                m.ncols(),
                self.rows,
                self.cols
            )));
        }
        match self.terms.get_mut(&w) {
            Some(acc) => *acc += m,
            None => {
                self.terms.insert(w, m);
            }
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn terms(&self) -> &BTreeMap<ReducedWord, CMatrix> {
        &self.terms
    }

    pub fn coefficient(&self, w: &ReducedWord) -> CMatrix {
        self.terms
            .get(w)
            .cloned()
            .unwrap_or_else(|| CMatrix::zeros(self.rows, self.cols))
    }

    /// Words with a nonzero coefficient.
    pub fn support(&self) -> BTreeSet<ReducedWord> {
        self.terms
            .iter()
            .filter(|(_, m)| max_abs_entry(m) > 0.0)
            .map(|(w, _)| w.clone())
            .collect()
    }

    pub fn degree(&self) -> usize {
        self.support()
            .iter()
            .map(ReducedWord::len)
            .max()
            .unwrap_or(0)
    }

    pub fn adjoint(&self) -> Self {
        Self {
            d: self.d,
            rows: self.cols,
            cols: self.rows,
            terms: self
                .terms
                .iter()
                .map(|(w, m)| (w.inverse(), m.adjoint()))
                .collect(),
        }
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let adj = self.adjoint();
        let words: BTreeSet<&ReducedWord> = self.terms.keys().chain(adj.terms.keys()).collect();
        let ok = words
            .into_iter()
            .all(|w| max_abs_entry(&(self.coefficient(w) - adj.coefficient(w))) <= tol);
        ok
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows || self.d != other.d {
            return Err(Error::Invalid("incompatible polynomial product".into()));
        }
        let mut out = Self::zero(self.d, self.rows, other.cols);
        for (g, a) in &self.terms {
            for (h, b) in &other.terms {
                out.add_term(g.mul(h), a * b)?;
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            d: self.d,
            rows: self.rows,
            cols: self.cols,
            terms: self.terms.iter().map(|(w, m)| (w.clone(), m * s)).collect(),
        }
    }

    /// `self + x · 1`.
    pub fn shifted(&self, x: f64) -> Result<Self> {
        if self.rows != self.cols {
            return Err(Error::Invalid(
                "only square polynomials can be shifted".into(),
            ));
        }
        let mut out = self.clone();
        out.add_term(
            ReducedWord::identity(self.d),
            CMatrix::identity(self.rows, self.rows) * c(x, 0.0),
        )?;
        Ok(out)
    }

    /// Largest coefficient difference.
    pub fn distance(&self, other: &Self) -> f64 {
        let words: BTreeSet<&ReducedWord> = self.terms.keys().chain(other.terms.keys()).collect();
        words
            .into_iter()
            .map(|w| max_abs_entry(&(self.coefficient(w) - other.coefficient(w))))
            .fold(0.0, f64::max)
    }

    /// Pads the coefficients with zeros to `size x size`.
    pub fn padded(&self, size: usize) -> Result<Self> {
        if size < self.rows || size < self.cols {
            return Err(Error::Invalid("padding cannot shrink coefficients".into()));
        }
        let terms = self
            .terms
            .iter()
            .map(|(w, m)| {
                let mut big = CMatrix::zeros(size, size);
                big.view_mut((0, 0), (self.rows, self.cols)).copy_from(m);
                (w.clone(), big)
            })
            .collect();
        Ok(Self {
            d: self.d,
            rows: size,
            cols: size,
            terms,
        })
    }

    /// The linear pencil of a square polynomial of degree at most one.
    pub fn to_pencil(&self) -> Result<MatrixPencil> {
        if self.rows != self.cols {
            return Err(Error::Invalid("pencils need square coefficients".into()));
        }
        if self.degree() > 1 {
            return Err(Error::Invalid(format!(
                "degree {} polynomial is not a pencil",
                self.degree()
            )));
        }
        let a0 = self.coefficient(&ReducedWord::identity(self.d));
        let a = (0..2 * self.d)
            .map(|i| ReducedWord::generator(self.d, i).map(|w| self.coefficient(&w)))
            .collect::<Result<Vec<_>>>()?;
        MatrixPencil::new(self.d, a0, a)
    }

    pub fn from_pencil(p: &MatrixPencil) -> Result<Self> {
        let r = p.coeff_dim();
        let mut out = Self::constant(p.d(), p.a0().clone());
        for (i, a) in p.weights().iter().enumerate() {
            out.add_term(ReducedWord::generator(p.d(), i)?, a.clone())?;
        }
        debug_assert_eq!(out.rows, r);
        Ok(out)
    }

    /// `Σ_g a_g ⊗ U(g)` for unitaries `U_1..U_{2d}` (`U_{i*} = U_i^*`).
    pub fn evaluate(&self, unitaries: &[CMatrix]) -> Result<CMatrix> {
        Error::check_len(2 * self.d, unitaries.len())?;
        let n = unitaries[0].nrows();
        let mut out = CMatrix::zeros(self.rows * n, self.cols * n);
        for (w, a) in &self.terms {
            let mut u = CMatrix::identity(n, n);
            for &l in w.letters() {
                u = u * &unitaries[l];
            }
            out += kron(a, &u);
        }
        Ok(out)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: PolynomialFile = serde_json::from_str(s)?;
        file.try_into()
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&PolynomialFile::from(self))?)
    }
}

type JsonMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolynomialTerm {
    pub word: Vec<usize>,
    pub matrix: JsonMatrix,
}

/// On-disk polynomial: a list of `{word, matrix}` terms, letters as in
/// [`ReducedWord`], matrices row-major with `[re, im]` entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolynomialFile {
    pub d: usize,
    pub terms: Vec<PolynomialTerm>,
}

fn rect_from_json(rows: &JsonMatrix) -> Result<CMatrix> {
    let r = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    for row in rows {
        Error::check_len(k, row.len())?;
    }
    Ok(CMatrix::from_fn(r, k, |i, j| {
        c(rows[i][j][0], rows[i][j][1])
    }))
}

impl TryFrom<PolynomialFile> for GroupPolynomial {
    type Error = Error;

    fn try_from(f: PolynomialFile) -> Result<Self> {
        let first = f
            .terms
            .first()
            .ok_or_else(|| Error::Invalid("polynomial has no terms".into()))?;
        let m0 = rect_from_json(&first.matrix)?;
        let mut p = Self::zero(f.d, m0.nrows(), m0.ncols());
        for t in &f.terms {
            p.add_term(
                ReducedWord::new(f.d, t.word.clone())?,
                rect_from_json(&t.matrix)?,
            )?;
        }
        Ok(p)
    }
}

impl From<&GroupPolynomial> for PolynomialFile {
    fn from(p: &GroupPolynomial) -> Self {
        PolynomialFile {
            d: p.d,
            terms: p
                .terms
                .iter()
                .map(|(w, m)| PolynomialTerm {
                    word: w.letters().to_vec(),
                    matrix: crate::freegroup::matrix_to_json(m),
                })
                .collect(),
        }
    }
}

/// `[[0, M], [M^*, 0]]`, after padding rectangular coefficients to squares.
pub fn selfadjoint_embed(m: &GroupPolynomial) -> GroupPolynomial {
    let s = m.rows.max(m.cols);
    let sq = m.padded(s).expect("padding to the larger side");
    let adj = sq.adjoint();
    let words: BTreeSet<ReducedWord> = sq.terms.keys().chain(adj.terms.keys()).cloned().collect();
    let terms = words
        .into_iter()
        .map(|w| {
            let mut big = CMatrix::zeros(2 * s, 2 * s);
            big.view_mut((0, s), (s, s)).copy_from(&sq.coefficient(&w));
            big.view_mut((s, 0), (s, s)).copy_from(&adj.coefficient(&w));
            (w, big)
        })
        .collect();
    GroupPolynomial {
        d: m.d,
        rows: 2 * s,
        cols: 2 * s,
        terms,
    }
}

/// Recovers `‖P‖` for self-adjoint `P` from `(x, ‖x·1 + P‖)` samples: with
/// `x0` the largest magnitude present with both signs,
/// `λ_max = ‖x0 + P‖ - x0` and `λ_min = x0 - ‖-x0 + P‖`.
pub fn norm_from_shifts(shift_norms: &[(f64, f64)]) -> Result<f64> {
    let tol = 1e-9;
    for (i, &(x, nx)) in shift_norms.iter().enumerate() {
        if !(nx >= 0.0) {
            return Err(Error::Invalid(format!(
                "norm {nx} at shift {x} is not a nonnegative number"
            )));
        }
        for &(y, ny) in &shift_norms[i + 1..] {
            if (nx - ny).abs() > (x - y).abs() + tol * (1.0 + nx.max(ny)) {
                return Err(Error::Invalid(format!(
                    "shift norms are not 1-Lipschitz: ‖{x}+P‖ = {nx}, ‖{y}+P‖ = {ny}"
                )));
            }
        }
    }
    let x0 = shift_norms
        .iter()
        .filter(|&&(x, _)| x > 0.0 && shift_norms.iter().any(|&(y, _)| y == -x))
        .map(|&(x, _)| x)
        .fold(f64::NAN, f64::max);
    if x0.is_nan() {
        return Err(Error::Invalid("need a pair of shifts ±x0".into()));
    }
    let at = |x: f64| {
        shift_norms
            .iter()
            .find(|&&(y, _)| y == x)
            .map(|&(_, n)| n)
            .unwrap()
    };
    let lambda_max = at(x0) - x0;
    let lambda_min = x0 - at(-x0);
    let norm = lambda_max.max(-lambda_min).max(0.0);
    if norm > x0 * (1.0 + tol) {
        return Err(Error::Precondition(format!(
            "shift {x0} does not dominate the spectrum (recovered norm {norm})"
        )));
    }
    Ok(norm)
}

#[derive(Debug, Clone)]
pub struct SqrtPencil {
    /// `P = Σ_{g∈G} P̃_g ⊗ λ(g)` with `(k|G|) x k` coefficients.
    pub p: GroupPolynomial,
    /// The constant added to `Q̃`.
    pub c: f64,
    /// `c·|G|`, so that `P^* P = Q + shift·1`.
    pub shift: f64,
    /// Largest coefficient deviation of `P^* P` from `Q + shift·1`.
    pub residual: f64,
}

/// Multiplicity `|{(g', h') ∈ G²: g'^{-1} h' = r}|` of every `r`.
fn multiplicities(g: &[ReducedWord]) -> BTreeMap<ReducedWord, usize> {
    let mut out = BTreeMap::new();
    for a in g {
        for b in g {
            *out.entry(a.inverse().mul(b)).or_insert(0) += 1;
        }
    }
    out
}

pub fn check_symmetric(g: &[ReducedWord]) -> Result<()> {
    let set: BTreeSet<&ReducedWord> = g.iter().collect();
    if set.len() != g.len() {
        return Err(Error::Invalid("support set has repeated words".into()));
    }
    for w in g {
        if !set.contains(&w.inverse()) {
            return Err(Error::Invalid(format!(
                "support set is not symmetric: {w} without its inverse"
            )));
        }
    }
    Ok(())
}

/// `Q̃` with `Q̃_{g,h} = a_{g^{-1}h} / mult(g^{-1}h)`.
fn lift(q: &GroupPolynomial, g: &[ReducedWord]) -> Result<CMatrix> {
    let k = q.rows;
    let mult = multiplicities(g);
    for w in q.support() {
        if !mult.contains_key(&w) {
            return Err(Error::Invalid(format!(
                "support word {w} is not in G^{{-1}}G"
            )));
        }
    }
    let m = g.len();
    let mut big = CMatrix::zeros(k * m, k * m);
    for (a, ga) in g.iter().enumerate() {
        for (b, gb) in g.iter().enumerate() {
            let r = ga.inverse().mul(gb);
            if let Some(coef) = q.terms.get(&r) {
                let scaled = coef * c(1.0 / mult[&r] as f64, 0.0);
                big.view_mut((a * k, b * k), (k, k)).copy_from(&scaled);
            }
        }
    }
    Ok(big)
}

/// The constant `1.1 ‖Q̃‖ + 1` used by [`sqrt_pencil`].
pub fn default_shift_constant(q: &GroupPolynomial, g: &[ReducedWord]) -> Result<f64> {
    Ok(1.1 * operator_norm(&lift(q, g)?) + 1.0)
}

/// Writes `Q + c|G|·1 = P^* P` with `P` supported on `G`.
pub fn sqrt_pencil(q: &GroupPolynomial, g: &[ReducedWord]) -> Result<SqrtPencil> {
    let cst = default_shift_constant(q, g)?;
    sqrt_pencil_with(q, g, cst)
}

pub fn sqrt_pencil_with(q: &GroupPolynomial, g: &[ReducedWord], cst: f64) -> Result<SqrtPencil> {
    if !q.is_self_adjoint(1e-10) {
        return Err(Error::Precondition(
            "sqrt_pencil needs a self-adjoint polynomial".into(),
        ));
    }
    check_symmetric(g)?;
    let k = q.rows;
    let m = g.len();
    let qt = lift(q, g)?;
    let shifted =
        (&qt + qt.adjoint()) * c(0.5, 0.0) + CMatrix::identity(k * m, k * m) * c(cst, 0.0);
    let root = sqrt_psd(&shifted, 1e-10)?;
    let mut p = GroupPolynomial::zero(q.d, k * m, k);
    for (b, gb) in g.iter().enumerate() {
        p.add_term(gb.clone(), root.columns(b * k, k).into_owned())?;
    }
    let shift = cst * m as f64;
    let residual = p.adjoint().mul(&p)?.distance(&q.shifted(shift)?);
    Ok(SqrtPencil {
        p,
        c: cst,
        shift,
        residual,
    })
}

/// Norm oracle for linear self-adjoint pencils: the ball compression of
/// radius [`ORACLE_RADIUS`].
pub fn default_oracle(p: &MatrixPencil) -> Result<f64> {
    let v = ball_norm_estimate(p, ORACLE_RADIUS);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonConvergence {
            iterations: ORACLE_RADIUS,
            gap: f64::NAN,
        })
    }
}

/// `‖Q‖` in the left-regular representation. Polynomials of degree at most
/// one go straight to `oracle`; higher degrees are halved with
/// [`sqrt_pencil`] applied to `Q` and `-Q` and combined by
/// [`norm_from_shifts`]. Non-self-adjoint input is embedded first.
pub fn poly_norm<F>(q: &GroupPolynomial, oracle: &F) -> Result<f64>
where
    F: Fn(&MatrixPencil) -> Result<f64>,
{
    if !q.is_self_adjoint(1e-10) {
        return poly_norm(&selfadjoint_embed(q), oracle);
    }
    let deg = q.degree();
    if deg <= 1 {
        return oracle(&q.to_pencil()?);
    }
    let g = ball_words(q.d, deg.div_ceil(2));
    let neg = q.scale(c(-1.0, 0.0));
    let cst = default_shift_constant(q, &g)?.max(default_shift_constant(&neg, &g)?);
    let plus = sqrt_pencil_with(q, &g, cst)?;
    let minus = sqrt_pencil_with(&neg, &g, cst)?;
    let np = poly_norm(&selfadjoint_embed(&plus.p), oracle)?;
    let nm = poly_norm(&selfadjoint_embed(&minus.p), oracle)?;
    norm_from_shifts(&[(plus.shift, np * np), (-plus.shift, nm * nm)])
}

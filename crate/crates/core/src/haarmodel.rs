//! Haar sampling and the random tensor model
//! `A = a0 ⊗ 1 + Σ_i a_i ⊗ V_i` with `V_i = Ū_i^{⊗q-} ⊗ U_i^{⊗q+}`.
//!
//! Vectors of `C^r ⊗ (C^n)^{⊗q}` are stored coefficient-major: entry `(s, x)`
//! sits at `s * n^q + x`, and `x = (x_1, ..., x_q)` is read with `x_1` most
//! significant. Small models are materialized densely; larger ones are applied
//! factor by factor.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::freegroup::{ball_norm_estimate, star, MatrixPencil};
use crate::linalg::{
    c, ginibre, kron, operator_norm, operator_norm_power, CMatrix, LinearOperator,
    PowerIterationOptions, C64, ZERO,
};
use crate::nonbacktracking::norm_power_root;
use crate::symcore::all_permutations;
use crate::weingarten::wg_exact;
use crate::{exact::rational_to_f64, Error, Result};

/// Largest `r * n^q` for which operators are materialized densely.
pub const DENSE_MODEL_CAP: usize = 4096;
/// Largest `r * n^q` accepted at all.
pub const MODEL_CAP: usize = 1 << 22;
/// Ball radius used for the free-norm estimate in experiments.
pub const ASTAR_BALL_RADIUS: usize = 128;

/// Haar unitary: QR of a Ginibre matrix with the phases of `diag(R)` moved
/// into `Q`.
pub fn sample_haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = ginibre(n, n, rng);
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() == 0.0 {
            c(1.0, 0.0)
        } else {
            d / d.norm()
        };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n: usize,
    pub q_minus: usize,
    pub q_plus: usize,
    pub pencil: MatrixPencil,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(
        n: usize,
        q_minus: usize,
        q_plus: usize,
        pencil: MatrixPencil,
        seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            n,
            q_minus,
            q_plus,
            pencil,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn d(&self) -> usize {
        self.pencil.d()
    }

    pub fn q(&self) -> usize {
        self.q_minus + self.q_plus
    }

    /// `n^q`.
    pub fn tensor_dim(&self) -> Result<usize> {
        checked_pow(self.n, self.q())
    }

    pub fn total_dim(&self) -> Result<usize> {
        self.tensor_dim()?
            .checked_mul(self.pencil.coeff_dim())
            .ok_or_else(|| Error::capacity("model dimension", MODEL_CAP))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Invalid("n must be positive".into()));
        }
        if self.q() == 0 {
            return Err(Error::Invalid("q = q- + q+ must be at least 1".into()));
        }
        let total = self.total_dim()?;
        if total > MODEL_CAP {
            return Err(Error::capacity(
                format!("model dimension {total}"),
                MODEL_CAP,
            ));
        }
        Ok(())
    }
}

fn checked_pow(n: usize, q: usize) -> Result<usize> {
    let mut out = 1usize;
    for _ in 0..q {
        out = out
            .checked_mul(n)
            .filter(|&v| v <= MODEL_CAP)
            .ok_or_else(|| Error::capacity(format!("{n}^{q}"), MODEL_CAP))?;
    }
    Ok(out)
}

/// The projector `P_H = E V` onto the vectors fixed by every
/// `Ū^{⊗p} ⊗ U^{⊗p}`, in the factored form `Ω W Ω^*`: the columns of `Ω` are
/// `ω_σ = Σ_x e_x ⊗ e_{x∘σ}` for `σ ∈ S_p` and `W_{στ} = Wg(σ^{-1}τ, n)`.
/// It is zero unless `q- = q+`.
#[derive(Debug, Clone)]
pub struct Projector {
    pub n: usize,
    pub q_minus: usize,
    pub q_plus: usize,
    omega: CMatrix,
    wg: CMatrix,
}

impl Projector {
    pub fn new(n: usize, q_minus: usize, q_plus: usize) -> Result<Self> {
        let dim = checked_pow(n, q_minus + q_plus)?;
        if q_minus != q_plus {
            return Ok(Self {
                n,
                q_minus,
                q_plus,
                omega: CMatrix::zeros(dim, 0),
                wg: CMatrix::zeros(0, 0),
            });
        }
        let p = q_minus;
        let table = wg_exact(p, n)?;
        let perms = all_permutations(p)?;
        let half = checked_pow(n, p)?;
        let mut omega = CMatrix::zeros(dim, perms.len());
        let mut digits = vec![0usize; p];
        for x in 0..half {
            let mut rest = x;
            for slot in digits.iter_mut().rev() {
                *slot = rest % n;
                rest /= n;
            }
            for (col, sigma) in perms.iter().enumerate() {
                let y = (0..p).fold(0usize, |acc, t| acc * n + digits[sigma.image(t)]);
                omega[(x * half + y, col)] = c(1.0, 0.0);
            }
        }
        let wg = CMatrix::from_fn(perms.len(), perms.len(), |a, b| {
            c(
                rational_to_f64(table.value(&perms[a].inverse().compose(&perms[b]))),
                0.0,
            )
        });
        Ok(Self {
            n,
            q_minus,
            q_plus,
            omega,
            wg,
        })
    }

    pub fn dim(&self) -> usize {
        self.omega.nrows()
    }

    pub fn is_zero(&self) -> bool {
        self.omega.ncols() == 0
    }

    pub fn rank(&self) -> usize {
        self.omega.ncols()
    }

    /// `y = P_H x` for a vector of length `n^q`.
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        if self.is_zero() {
            y.iter_mut().for_each(|v| *v = ZERO);
            return;
        }
        let m = self.omega.ncols();
        let mut coeffs = vec![ZERO; m];
        for (col, slot) in coeffs.iter_mut().enumerate() {
            *slot = self
                .omega
                .column(col)
                .iter()
                .zip(x)
                .map(|(o, v)| o.conj() * v)
                .sum();
        }
        let w: Vec<C64> = (0..m)
            .map(|a| (0..m).map(|b| self.wg[(a, b)] * coeffs[b]).sum())
            .collect();
        for (i, slot) in y.iter_mut().enumerate() {
            *slot = (0..m).map(|col| self.omega[(i, col)] * w[col]).sum();
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        if self.is_zero() {
            return CMatrix::zeros(self.dim(), self.dim());
        }
        &self.omega * &self.wg * self.omega.adjoint()
    }
}

/// Dense `P_H`.
pub fn build_projector(n: usize, q_minus: usize, q_plus: usize) -> Result<CMatrix> {
    let dim = checked_pow(n, q_minus + q_plus)?;
    if dim > DENSE_MODEL_CAP {
        return Err(Error::capacity(
            format!("dense projector of dimension {dim}"),
            DENSE_MODEL_CAP,
        ));
    }
    Ok(Projector::new(n, q_minus, q_plus)?.to_dense())
}

/// A sample of the model together with everything needed to apply it.
#[derive(Debug, Clone)]
pub struct TensorModelInstance {
    pub config: ModelConfig,
    /// `U_1..U_{2d}` with `U_{i*} = U_i^*`.
    pub unitaries: Vec<CMatrix>,
    pub projector: Projector,
    dense: Option<DenseModel>,
}

#[derive(Debug, Clone)]
struct DenseModel {
    v: Vec<CMatrix>,
    a: CMatrix,
}

pub fn build_instance(cfg: &ModelConfig) -> Result<TensorModelInstance> {
    cfg.validate()?;
    let mut rng = crate::rng::stream(cfg.seed);
    build_instance_with(cfg, &mut rng)
}

pub fn build_instance_with<R: Rng + ?Sized>(
    cfg: &ModelConfig,
    rng: &mut R,
) -> Result<TensorModelInstance> {
    cfg.validate()?;
    let d = cfg.d();
    let mut unitaries = vec![CMatrix::zeros(cfg.n, cfg.n); 2 * d];
    for i in 0..d {
        let u = sample_haar_unitary(cfg.n, rng);
        unitaries[i + d] = u.adjoint();
        unitaries[i] = u;
    }
    instance_from_unitaries(cfg, unitaries)
}

pub fn instance_from_unitaries(
    cfg: &ModelConfig,
    unitaries: Vec<CMatrix>,
) -> Result<TensorModelInstance> {
    cfg.validate()?;
    Error::check_len(2 * cfg.d(), unitaries.len())?;
    let projector = Projector::new(cfg.n, cfg.q_minus, cfg.q_plus)?;
    let mut inst = TensorModelInstance {
        config: cfg.clone(),
        unitaries,
        projector,
        dense: None,
    };
    if cfg.total_dim()? <= DENSE_MODEL_CAP {
        let v: Vec<CMatrix> = (0..2 * cfg.d())
            .map(|i| inst.tensor_unitary_dense(i))
            .collect();
        let nq = cfg.tensor_dim()?;
        let p = &cfg.pencil;
        let mut a = kron(p.a0(), &CMatrix::identity(nq, nq));
        for (ai, vi) in p.weights().iter().zip(&v) {
            a += kron(ai, vi);
        }
        inst.dense = Some(DenseModel { v, a });
    }
    Ok(inst)
}

impl TensorModelInstance {
    pub fn tensor_dim(&self) -> usize {
        self.projector.dim()
    }

    pub fn total_dim(&self) -> usize {
        self.tensor_dim() * self.config.pencil.coeff_dim()
    }

    pub fn is_dense(&self) -> bool {
        self.dense.is_some()
    }

    fn factors(&self, i: usize) -> Vec<CMatrix> {
        let u = &self.unitaries[i];
        let ubar = u.map(|z| z.conj());
        (0..self.config.q())
            .map(|t| {
                if t < self.config.q_minus {
                    ubar.clone()
                } else {
                    u.clone()
                }
            })
            .collect()
    }

    fn tensor_unitary_dense(&self, i: usize) -> CMatrix {
        let mut out = CMatrix::identity(1, 1);
        for f in self.factors(i) {
            out = kron(&out, &f);
        }
        out
    }

    /// Dense `V_i`, or `None` above the dense cap.
    pub fn tensor_unitary(&self, i: usize) -> Option<&CMatrix> {
        self.dense.as_ref().map(|m| &m.v[i])
    }

    /// Dense `A`, or `None` above the dense cap.
    pub fn assembled(&self) -> Option<&CMatrix> {
        self.dense.as_ref().map(|m| &m.a)
    }

    /// `y = V_i x` on `(C^n)^{⊗q}`.
    pub fn apply_tensor_unitary(&self, i: usize, x: &[C64], y: &mut [C64]) {
        if let Some(m) = &self.dense {
            mat_vec(&m.v[i], x, y);
            return;
        }
        let n = self.config.n;
        let q = self.config.q();
        let mut cur = x.to_vec();
        let mut buf = vec![ZERO; n];
        for (t, f) in self.factors(i).iter().enumerate() {
            let inner = n.pow((q - 1 - t) as u32);
            let outer = cur.len() / (inner * n);
            let mut next = vec![ZERO; cur.len()];
            for o in 0..outer {
                for s in 0..inner {
                    let base = o * n * inner + s;
                    for (k, slot) in buf.iter_mut().enumerate() {
                        *slot = cur[base + k * inner];
                    }
                    for row in 0..n {
                        let mut acc = ZERO;
                        for (k, b) in buf.iter().enumerate() {
                            acc += f[(row, k)] * b;
                        }
                        next[base + row * inner] = acc;
                    }
                }
            }
            cur = next;
        }
        y.copy_from_slice(&cur);
    }

    /// `y = [V_i] x = (V_i - P_H) x`.
    pub fn apply_centered(&self, i: usize, x: &[C64], y: &mut [C64]) {
        self.apply_tensor_unitary(i, x, y);
        if !self.projector.is_zero() {
            let mut p = vec![ZERO; x.len()];
            self.projector.apply(x, &mut p);
            for (a, b) in y.iter_mut().zip(&p) {
                *a -= b;
            }
        }
    }

    /// `y = (1 ⊗ P_H) x` on `C^r ⊗ (C^n)^{⊗q}`.
    pub fn apply_projector_full(&self, x: &[C64], y: &mut [C64]) {
        let nq = self.tensor_dim();
        for (xs, ys) in x.chunks(nq).zip(y.chunks_mut(nq)) {
            self.projector.apply(xs, ys);
        }
    }

    fn apply_pencil(&self, x: &[C64], y: &mut [C64], adjoint: bool) {
        if let Some(m) = &self.dense {
            if adjoint {
                let r = m.a.ad_mul(&crate::linalg::CVector::from_column_slice(x));
                y.copy_from_slice(r.as_slice());
            } else {
                mat_vec(&m.a, x, y);
            }
            return;
        }
        let p = &self.config.pencil;
        let d = p.d();
        let r = p.coeff_dim();
        let nq = self.tensor_dim();
        let coef =
            |m: &CMatrix, s: usize, t: usize| if adjoint { m[(t, s)].conj() } else { m[(s, t)] };
        y.iter_mut().for_each(|v| *v = ZERO);
        for s in 0..r {
            for t in 0..r {
                let a = coef(p.a0(), s, t);
                if a != ZERO {
                    for k in 0..nq {
                        y[s * nq + k] += a * x[t * nq + k];
                    }
                }
            }
        }
        let mut vx = vec![ZERO; nq];
        for i in 0..2 * d {
            // (a_i ⊗ V_i)^* = a_i^* ⊗ V_{i*}
            let v_index = if adjoint { star(d, i) } else { i };
            for t in 0..r {
                if (0..r).all(|s| coef(&p.weights()[i], s, t) == ZERO) {
                    continue;
                }
                self.apply_tensor_unitary(v_index, &x[t * nq..(t + 1) * nq], &mut vx);
                for s in 0..r {
                    let a = coef(&p.weights()[i], s, t);
                    if a != ZERO {
                        for k in 0..nq {
                            y[s * nq + k] += a * vx[k];
                        }
                    }
                }
            }
        }
    }

    /// `y = A x`.
    pub fn apply_a(&self, x: &[C64], y: &mut [C64]) {
        self.apply_pencil(x, y, false);
    }

    pub fn apply_a_adjoint(&self, x: &[C64], y: &mut [C64]) {
        self.apply_pencil(x, y, true);
    }

    /// `(1 - P) A (1 - P)` as a matrix-free operator, `P = 1 ⊗ P_H`.
    pub fn restricted_operator(&self) -> RestrictedOperator<'_> {
        RestrictedOperator { inst: self }
    }
}

fn mat_vec(m: &CMatrix, x: &[C64], y: &mut [C64]) {
    let r = m * crate::linalg::CVector::from_column_slice(x);
    y.copy_from_slice(r.as_slice());
}

pub struct RestrictedOperator<'a> {
    inst: &'a TensorModelInstance,
}

impl RestrictedOperator<'_> {
    fn project_out(&self, x: &[C64]) -> Vec<C64> {
        let mut out = x.to_vec();
        if !self.inst.projector.is_zero() {
            let mut p = vec![ZERO; x.len()];
            self.inst.apply_projector_full(x, &mut p);
            for (a, b) in out.iter_mut().zip(&p) {
                *a -= b;
            }
        }
        out
    }
}

impl LinearOperator for RestrictedOperator<'_> {
    fn dim(&self) -> usize {
        self.inst.total_dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let px = self.project_out(x);
        let mut ax = vec![ZERO; x.len()];
        self.inst.apply_a(&px, &mut ax);
        y.copy_from_slice(&self.project_out(&ax));
    }

    fn apply_adjoint(&self, x: &[C64], y: &mut [C64]) {
        let px = self.project_out(x);
        let mut ax = vec![ZERO; x.len()];
        self.inst.apply_a_adjoint(&px, &mut ax);
        y.copy_from_slice(&self.project_out(&ax));
    }
}

/// `‖A|_{H_r^⊥}‖`, the norm of `M = (1-P) A (1-P)`. Dense instances are
/// solved exactly (Hermitian eigensolve or SVD); matrix-free ones use power
/// iteration on `M^* M`.
pub fn restricted_norm(inst: &TensorModelInstance) -> Result<f64> {
    match restricted_dense(inst) {
        Some(m) => Ok(dense_norm(&m)),
        None => restricted_norm_power(
            inst,
            &PowerIterationOptions {
                seed: inst.config.seed,
                ..PowerIterationOptions::default()
            },
        ),
    }
}

pub fn restricted_norm_power(
    inst: &TensorModelInstance,
    opts: &PowerIterationOptions,
) -> Result<f64> {
    Ok(operator_norm_power(&inst.restricted_operator(), opts)?.norm)
}

/// Dense `(1-P) A (1-P)` for instances below the dense cap.
pub fn restricted_dense(inst: &TensorModelInstance) -> Option<CMatrix> {
    let a = inst.assembled()?;
    if inst.projector.is_zero() {
        return Some(a.clone());
    }
    // P = Q W Q^* has low rank, so (1-P) A (1-P) is expanded instead of
    // multiplying dense projectors.
    let r = inst.config.pencil.coeff_dim();
    let id = CMatrix::identity(r, r);
    let q = kron(&id, &inst.projector.omega);
    let w = kron(&id, &inst.projector.wg);
    let qa = q.adjoint() * a;
    let aq = a * &q;
    let qaq = q.adjoint() * &aq;
    let pa = &q * (&w * &qa);
    let ap = (&aq * &w) * q.adjoint();
    let pap = &q * (&w * qaq * &w) * q.adjoint();
    Some(a - pa - ap + pap)
}

fn dense_norm(m: &CMatrix) -> f64 {
    if crate::linalg::is_hermitian(m, 1e-10 * crate::linalg::max_abs_entry(m).max(1.0)) {
        let h = (m + m.adjoint()) * c(0.5, 0.0);
        let eig = crate::linalg::hermitian_eigenvalues(&h);
        match (eig.first(), eig.last()) {
            (Some(lo), Some(hi)) => lo.abs().max(hi.abs()),
            _ => 0.0,
        }
    } else {
        operator_norm(m)
    }
}

/// Norm of the free operator `A_★` estimated from a ball compression.
pub fn astar_estimate(pencil: &MatrixPencil) -> f64 {
    ball_norm_estimate(pencil, ASTAR_BALL_RADIUS)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FreenessRow {
    pub n: usize,
    pub q_minus: usize,
    pub q_plus: usize,
    pub trial: u64,
    pub seed: u64,
    pub restricted_norm: f64,
    pub astar_estimate: f64,
    pub deviation: f64,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FreenessTable {
    pub rows: Vec<FreenessRow>,
    /// `(n, q-, q+, median |deviation|)`, sorted like the rows.
    pub medians: Vec<(usize, usize, usize, f64)>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExperimentOptions {
    /// Report zero wall time, for byte-identical reruns.
    pub deterministic_timing: bool,
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Restricted norms against the free norm, trial `t` of a config with seed `s`
/// drawing from the substream `s ^ t`.
pub fn freeness_experiment(
    configs: &[ModelConfig],
    trials: u64,
    opts: &ExperimentOptions,
) -> Result<FreenessTable> {
    for cfg in configs {
        cfg.validate()?;
    }
    let estimates: Vec<f64> = configs.iter().map(|c| astar_estimate(&c.pencil)).collect();
    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|c| (0..trials).map(move |t| (c, t)))
        .collect();
    let mut rows = jobs
        .par_iter()
        .map(|&(ci, trial)| {
            let cfg = &configs[ci];
            let start = Instant::now();
            let seed = cfg.seed ^ trial;
            let trial_cfg = ModelConfig {
                seed,
                ..cfg.clone()
            };
            let inst = build_instance(&trial_cfg)?;
            let norm = restricted_norm(&inst)?;
            let wall = if opts.deterministic_timing {
                0.0
            } else {
                start.elapsed().as_secs_f64() * 1e3
            };
            Ok(FreenessRow {
                n: cfg.n,
                q_minus: cfg.q_minus,
                q_plus: cfg.q_plus,
                trial,
                seed,
                restricted_norm: norm,
                astar_estimate: estimates[ci],
                deviation: norm - estimates[ci],
                wall_time_ms: wall,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| {
        (a.n, a.q_minus, a.q_plus, a.trial).cmp(&(b.n, b.q_minus, b.q_plus, b.trial))
    });
    let mut medians = Vec::new();
    for row in &rows {
        let key = (row.n, row.q_minus, row.q_plus);
        if medians.iter().any(|&(n, a, b, _)| (n, a, b) == key) {
            continue;
        }
        let mut devs: Vec<f64> = rows
            .iter()
            .filter(|r| (r.n, r.q_minus, r.q_plus) == key)
            .map(|r| r.deviation.abs())
            .collect();
        medians.push((key.0, key.1, key.2, median(&mut devs)));
    }
    Ok(FreenessTable { rows, medians })
}

impl FreenessTable {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "n",
            "trial",
            "seed",
            "restricted_norm",
            "astar_estimate",
            "deviation",
            "wall_time_ms",
        ])
        .map_err(csv_err)?;
        for r in &self.rows {
            out.write_record([
                r.n.to_string(),
                r.trial.to_string(),
                r.seed.to_string(),
                format!("{:.12}", r.restricted_norm),
                format!("{:.12}", r.astar_estimate),
                format!("{:.12}", r.deviation),
                format!("{:.3}", r.wall_time_ms),
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Non-backtracking operator with weights `b_i = a_i ⊗ [V_i]`, in the left
/// form `(B v)_i = b_i (Σ_j v_j - v_{i*})`.
pub struct CenteredNbOperator<'a> {
    inst: &'a TensorModelInstance,
}

impl<'a> CenteredNbOperator<'a> {
    pub fn new(inst: &'a TensorModelInstance) -> Self {
        Self { inst }
    }

    fn apply_weight(&self, i: usize, x: &[C64], y: &mut [C64], adjoint: bool) {
        let p = &self.inst.config.pencil;
        let d = p.d();
        let r = p.coeff_dim();
        let nq = self.inst.tensor_dim();
        let a = &p.weights()[i];
        y.iter_mut().for_each(|v| *v = ZERO);
        let mut vx = vec![ZERO; nq];
        for t in 0..r {
            // ([V_i])^* = [V_{i*}]
            let v_index = if adjoint { star(d, i) } else { i };
            self.inst
                .apply_centered(v_index, &x[t * nq..(t + 1) * nq], &mut vx);
            for s in 0..r {
                let coef = if adjoint { a[(t, s)].conj() } else { a[(s, t)] };
                if coef != ZERO {
                    for k in 0..nq {
                        y[s * nq + k] += coef * vx[k];
                    }
                }
            }
        }
    }

    /// Dense matrix of the operator, colour-major.
    pub fn to_dense(&self) -> CMatrix {
        let dim = LinearOperator::dim(self);
        let mut m = CMatrix::zeros(dim, dim);
        let mut e = vec![ZERO; dim];
        let mut col = vec![ZERO; dim];
        for j in 0..dim {
            e[j] = c(1.0, 0.0);
            self.apply(&e, &mut col);
            for (i, v) in col.iter().enumerate() {
                m[(i, j)] = *v;
            }
            e[j] = ZERO;
        }
        m
    }
}

impl LinearOperator for CenteredNbOperator<'_> {
    fn dim(&self) -> usize {
        2 * self.inst.config.d() * self.inst.total_dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let ell = 2 * self.inst.config.d();
        let block = self.inst.total_dim();
        let mut total = vec![ZERO; block];
        for chunk in x.chunks(block) {
            for (t, v) in total.iter_mut().zip(chunk) {
                *t += v;
            }
        }
        for i in 0..ell {
            let s = (i + ell / 2) % ell;
            let arg: Vec<C64> = total
                .iter()
                .zip(&x[s * block..(s + 1) * block])
                .map(|(t, v)| t - v)
                .collect();
            self.apply_weight(i, &arg, &mut y[i * block..(i + 1) * block], false);
        }
    }

    fn apply_adjoint(&self, x: &[C64], y: &mut [C64]) {
        // (B^* x)_j = Σ_i b_i^* x_i - b_{j*}^* x_{j*}
        let ell = 2 * self.inst.config.d();
        let block = self.inst.total_dim();
        let mut parts = vec![vec![ZERO; block]; ell];
        for (i, part) in parts.iter_mut().enumerate() {
            self.apply_weight(i, &x[i * block..(i + 1) * block], part, true);
        }
        let mut total = vec![ZERO; block];
        for part in &parts {
            for (t, v) in total.iter_mut().zip(part) {
                *t += v;
            }
        }
        for j in 0..ell {
            let s = (j + ell / 2) % ell;
            for k in 0..block {
                y[j * block + k] = total[k] - parts[s][k];
            }
        }
    }
}

/// Operator `M^ℓ` of a matrix-free operator.
struct PowerOperator<'a, O: LinearOperator> {
    op: &'a O,
    ell: usize,
}

impl<O: LinearOperator> LinearOperator for PowerOperator<'_, O> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let mut cur = x.to_vec();
        for _ in 0..self.ell {
            self.op.apply(&cur, y);
            cur.copy_from_slice(y);
        }
        y.copy_from_slice(&cur);
    }

    fn apply_adjoint(&self, x: &[C64], y: &mut [C64]) {
        let mut cur = x.to_vec();
        for _ in 0..self.ell {
            self.op.apply_adjoint(&cur, y);
            cur.copy_from_slice(y);
        }
        y.copy_from_slice(&cur);
    }
}

/// Dimension up to which `‖B^ℓ‖` is computed from a dense matrix power.
pub const DENSE_NB_CAP: usize = 2048;

/// `‖B^ℓ‖^{1/ℓ}` for the centered non-backtracking operator of an instance.
pub fn centered_nb_norm_root(inst: &TensorModelInstance, ell: usize) -> Result<f64> {
    let op = CenteredNbOperator::new(inst);
    if LinearOperator::dim(&op) <= DENSE_NB_CAP {
        return Ok(norm_power_root(&op.to_dense(), ell));
    }
    let pow = PowerOperator { op: &op, ell };
    let est = operator_norm_power(
        &pow,
        &PowerIterationOptions {
            seed: inst.config.seed,
            ..PowerIterationOptions::default()
        },
    )?;
    Ok(est.norm.powf(1.0 / ell as f64))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NbCheckRow {
    pub trial: u64,
    pub seed: u64,
    pub ell: usize,
    pub norm_root: f64,
    pub rho_star: f64,
    pub exceeds: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NbCheckTable {
    pub epsilon: f64,
    pub rows: Vec<NbCheckRow>,
}

impl NbCheckTable {
    /// Fraction of rows with `‖B^ℓ‖^{1/ℓ} > ρ(B_★) + ε` for the given `ℓ`.
    pub fn exceedance(&self, ell: usize) -> f64 {
        let rows: Vec<&NbCheckRow> = self.rows.iter().filter(|r| r.ell == ell).collect();
        if rows.is_empty() {
            return f64::NAN;
        }
        rows.iter().filter(|r| r.exceeds).count() as f64 / rows.len() as f64
    }
}

/// Number of terms of the Weyl sequence used for `ρ(B_★)`.
pub const RHO_STAR_K: usize = 64;

pub fn nb_norm_check(
    cfg: &ModelConfig,
    ell_values: &[usize],
    trials: u64,
    epsilon: f64,
) -> Result<NbCheckTable> {
    cfg.validate()?;
    let rho_star = crate::freegroup::rho_k(&cfg.pencil, RHO_STAR_K)?;
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let seed = cfg.seed ^ trial;
            let inst = build_instance(&ModelConfig {
                seed,
                ..cfg.clone()
            })?;
            ell_values
                .iter()
                .map(|&ell| {
                    let v = centered_nb_norm_root(&inst, ell)?;
                    Ok(NbCheckRow {
                        trial,
                        seed,
                        ell,
                        norm_root: v,
                        rho_star,
                        exceeds: v > rho_star + epsilon,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NbCheckTable {
        epsilon,
        rows: per_trial.into_iter().flatten().collect(),
    })
}

/// Dense operator norm of `A` itself, for small instances.
pub fn plain_norm(inst: &TensorModelInstance) -> Option<f64> {
    inst.assembled().map(operator_norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eigenvalues, max_abs_entry};
    use crate::symcore::EpsilonSequence;
    use crate::weingarten::haar_moment_signed;

    fn kesten_cfg(n: usize, qm: usize, qp: usize, seed: u64) -> ModelConfig {
        ModelConfig::new(
            n,
            qm,
            qp,
            MatrixPencil::uniform_scalar(2, 0.0, 1.0).unwrap(),
            seed,
        )
        .unwrap()
    }

    #[test]
    fn haar_samples_are_unitary() {
        let mut rng = crate::rng::stream(1);
        for n in [1usize, 2, 5, 17] {
            let u = sample_haar_unitary(n, &mut rng);
            let e = &u.adjoint() * &u - CMatrix::identity(n, n);
            assert!(max_abs_entry(&e) < 1e-12);
        }
        let u = sample_haar_unitary(1, &mut rng);
        assert!((u[(0, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn trace_moments() {
        let mut rng = crate::rng::stream(2);
        let samples = 20_000;
        let (mut s1, mut s2, mut s4) = (c(0.0, 0.0), 0.0, 0.0);
        for _ in 0..samples {
            let u = sample_haar_unitary(4, &mut rng);
            let t = u.trace();
            s1 += t;
            s2 += t.norm_sqr();
            s4 += t.norm_sqr() * t.norm_sqr();
        }
        let m = samples as f64;
        let mean_sq = s2 / m;
        let se = ((s4 / m - mean_sq * mean_sq) / m).sqrt();
        assert!((mean_sq - 1.0).abs() < 4.0 * se, "{mean_sq} ± {se}");
        assert!((s1 / m).norm() < 4.0 / m.sqrt());
    }

    #[test]
    fn projector_unbalanced_is_zero() {
        let p = build_projector(3, 0, 1).unwrap();
        assert_eq!(max_abs_entry(&p), 0.0);
    }

    #[test]
    fn projector_rank_one_case() {
        let n = 4;
        let p = build_projector(n, 1, 1).unwrap();
        for x in 0..n * n {
            for y in 0..n * n {
                let (x1, x2, y1, y2) = (x / n, x % n, y / n, y % n);
                let expected = if x1 == x2 && y1 == y2 {
                    1.0 / n as f64
                } else {
                    0.0
                };
                assert!((p[(x, y)].re - expected).abs() < 1e-15);
            }
        }
        assert!((p.trace().re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn projector_entries_match_exact_moments() {
        for (n, qm, qp) in [(3usize, 1usize, 1usize), (2, 2, 2), (3, 2, 2)] {
            let p = build_projector(n, qm, qp).unwrap();
            let q = qm + qp;
            let eps =
                EpsilonSequence::parse(&format!("{}{}", "-".repeat(qm), ".".repeat(qp))).unwrap();
            let digits = |mut v: usize| {
                let mut out = vec![0; q];
                for slot in out.iter_mut().rev() {
                    *slot = v % n;
                    v /= n;
                }
                out
            };
            let dim = n.pow(q as u32);
            for x in (0..dim).step_by(3) {
                for y in (0..dim).step_by(2) {
                    let e = haar_moment_signed(&digits(x), &digits(y), &eps, n).unwrap();
                    assert!((p[(x, y)].re - rational_to_f64(&e)).abs() < 1e-13);
                    assert!(p[(x, y)].im.abs() < 1e-15);
                }
            }
            let sq = &p * &p - &p;
            assert!(max_abs_entry(&sq) < 1e-10);
            assert!(max_abs_entry(&(&p - p.adjoint())) < 1e-12);
        }
    }

    #[test]
    fn instance_invariants() {
        let cfg = kesten_cfg(4, 1, 1, 7);
        let inst = build_instance(&cfg).unwrap();
        let p = inst.projector.to_dense();
        for i in 0..4 {
            let v = inst.tensor_unitary(i).unwrap();
            let comm = v * &p - &p * v;
            assert!(max_abs_entry(&comm) < 1e-10);
            let id = v.adjoint() * v - CMatrix::identity(16, 16);
            assert!(max_abs_entry(&id) < 1e-10);
        }
        let a = inst.assembled().unwrap();
        assert!(max_abs_entry(&(a - a.adjoint())) < 1e-10);
    }

    #[test]
    fn matrix_free_matches_dense() {
        let mut rng = crate::rng::stream(5);
        let pencil = MatrixPencil::random_self_adjoint(2, 2, &mut rng);
        let cfg = ModelConfig::new(3, 1, 2, pencil, 11).unwrap();
        let inst = build_instance(&cfg).unwrap();
        let mut free = inst.clone();
        free.dense = None;
        let x = crate::linalg::random_unit_vector(inst.total_dim(), &mut rng);
        let (mut y1, mut y2) = (vec![ZERO; x.len()], vec![ZERO; x.len()]);
        inst.apply_a(&x, &mut y1);
        free.apply_a(&x, &mut y2);
        let diff: f64 = y1
            .iter()
            .zip(&y2)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12);
        inst.apply_a_adjoint(&x, &mut y1);
        free.apply_a_adjoint(&x, &mut y2);
        let diff: f64 = y1
            .iter()
            .zip(&y2)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn one_generator_spectrum() {
        let pencil = MatrixPencil::uniform_scalar(1, 0.0, 1.0).unwrap();
        let cfg = ModelConfig::new(5, 0, 1, pencil, 3).unwrap();
        let inst = build_instance(&cfg).unwrap();
        let mut got = hermitian_eigenvalues(inst.assembled().unwrap());
        let mut expected: Vec<f64> = crate::linalg::eigenvalues(&inst.unitaries[0])
            .unwrap()
            .iter()
            .map(|z| 2.0 * z.arg().cos())
            .collect();
        expected.sort_by(|a, b| a.total_cmp(b));
        got.sort_by(|a, b| a.total_cmp(b));
        for (a, b) in got.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn restricted_norm_trivial_cases() {
        let a0 = CMatrix::from_diagonal(&crate::linalg::CVector::from_vec(vec![
            c(2.0, 0.0),
            c(-1.0, 0.0),
        ]));
        let pencil = MatrixPencil::new(1, a0, vec![CMatrix::zeros(2, 2); 2]).unwrap();
        let cfg = ModelConfig::new(3, 0, 1, pencil, 1).unwrap();
        let inst = build_instance(&cfg).unwrap();
        assert!((restricted_norm(&inst).unwrap() - 2.0).abs() < 1e-6);
        let cfg = kesten_cfg(6, 0, 1, 2);
        let inst = build_instance(&cfg).unwrap();
        let plain = plain_norm(&inst).unwrap();
        assert!((restricted_norm(&inst).unwrap() - plain).abs() < 1e-6 * plain);
    }

    #[test]
    fn restricted_norm_matches_dense_eigensolve() {
        let cfg = kesten_cfg(5, 1, 1, 9);
        let inst = build_instance(&cfg).unwrap();
        let a = inst.assembled().unwrap();
        let p = CMatrix::identity(25, 25) - inst.projector.to_dense();
        let m = &p * a * &p;
        let eig = hermitian_eigenvalues(&m);
        let top = eig[0].abs().max(eig[eig.len() - 1].abs());
        let norm = restricted_norm(&inst).unwrap();
        assert!((norm - top).abs() < 1e-10 * top, "{norm} vs {top}");
        let mut free = inst.clone();
        free.dense = None;
        let power = restricted_norm(&free).unwrap();
        assert!(
            power <= top + 1e-8 && power > 0.99 * top,
            "{power} vs {top}"
        );
        assert!(norm <= plain_norm(&inst).unwrap() + 1e-8);
    }

    #[test]
    fn centered_nb_apply_matches_left_nb() {
        let cfg = kesten_cfg(3, 1, 1, 4);
        let inst = build_instance(&cfg).unwrap();
        let op = CenteredNbOperator::new(&inst);
        let dense = op.to_dense();
        let p = inst.projector.to_dense();
        let weights: Vec<CMatrix> = (0..4)
            .map(|i| inst.tensor_unitary(i).unwrap() - &p)
            .collect();
        let nb =
            crate::nonbacktracking::build_nb(&weights, crate::nonbacktracking::Side::Left).unwrap();
        assert!(max_abs_entry(&(dense - &nb.matrix)) < 1e-12);
        let mut rng = crate::rng::stream(0);
        let x = crate::linalg::random_unit_vector(op.dim(), &mut rng);
        let mut y = vec![ZERO; x.len()];
        op.apply_adjoint(&x, &mut y);
        let expected = nb.matrix.adjoint() * crate::linalg::CVector::from_column_slice(&x);
        let diff: f64 = y
            .iter()
            .zip(expected.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn zero_pencil_experiment_has_zero_deviation() {
        let cfg = ModelConfig::new(5, 0, 1, MatrixPencil::zero(2, 1).unwrap(), 1).unwrap();
        let t = freeness_experiment(
            &[cfg],
            2,
            &ExperimentOptions {
                deterministic_timing: true,
            },
        )
        .unwrap();
        assert!(t
            .rows
            .iter()
            .all(|r| r.deviation == 0.0 && r.wall_time_ms == 0.0));
        let cfg = ModelConfig::new(5, 0, 1, MatrixPencil::zero(2, 1).unwrap(), 1).unwrap();
        let nb = nb_norm_check(&cfg, &[4], 2, 0.1).unwrap();
        assert!(nb.rows.iter().all(|r| r.norm_root == 0.0 && !r.exceeds));
    }

    #[test]
    fn csv_has_expected_header() {
        let cfg = kesten_cfg(4, 0, 1, 3);
        let t = freeness_experiment(
            &[cfg],
            1,
            &ExperimentOptions {
                deterministic_timing: true,
            },
        )
        .unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(
            s.starts_with("n,trial,seed,restricted_norm,astar_estimate,deviation,wall_time_ms\n")
        );
    }
}

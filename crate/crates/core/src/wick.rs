//! Gaussian Wick calculus and the comparison of Haar-unitary moments with
//! moments of a matrix of independent standard complex Gaussians.

use std::collections::HashMap;

use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::centered_wg::{
    all_sign_sequences, all_tuples, centered_moment_from_matrix, wg_bracket_matrix,
};
use crate::exact::{rational_to_f64, Rational};
use crate::linalg::{C64, ZERO};
use crate::symcore::{
    all_permutations, all_set_partitions, enumerate_pair_partitions, EpsilonSequence, Permutation,
    SetPartition, Sign,
};
use crate::weingarten::haar_moment_signed;
use crate::{Error, Result};

/// Relative slack applied to every float comparison.
pub const FLOAT_SLACK: f64 = 1e-9;

/// `E(g_1 ⋯ g_k h̄_1 ⋯ h̄_k) = Σ_{σ ∈ S_k} ∏_l E(g_l h̄_{σ(l)})`, evaluated as a
/// permanent with Ryser's formula. `cov(i, j)` is `E(g_i h̄_j)`.
pub fn wick_complex<F: Fn(usize, usize) -> C64>(cov: F, g: &[usize], h: &[usize]) -> C64 {
    if g.len() != h.len() {
        return ZERO;
    }
    let k = g.len();
    if k == 0 {
        return C64::new(1.0, 0.0);
    }
    let m: Vec<Vec<C64>> = g
        .iter()
        .map(|&a| h.iter().map(|&b| cov(a, b)).collect())
        .collect();
    let mut total = ZERO;
    for s in 1u64..(1 << k) {
        let mut prod = C64::new(1.0, 0.0);
        for row in &m {
            let mut acc = ZERO;
            for (j, v) in row.iter().enumerate() {
                if s >> j & 1 == 1 {
                    acc += v;
                }
            }
            prod *= acc;
        }
        if (k - s.count_ones() as usize) % 2 == 1 {
            total -= prod;
        } else {
            total += prod;
        }
    }
    total
}

/// `E(g_{i_1} ⋯ g_{i_k})` for a centered real Gaussian vector, as a sum over
/// pair partitions.
pub fn wick_real<F: Fn(usize, usize) -> f64>(cov: F, indices: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for p in enumerate_pair_partitions(indices.len())? {
        total += p
            .pairs()
            .iter()
            .map(|&(a, b)| cov(indices[a], indices[b]))
            .product::<f64>();
    }
    Ok(total)
}

/// `E(∏_t [∏_{i ∈ π_t} g_{v_i}^{ε_i}])` for a complex Gaussian family, summing
/// only over dot/bar pairings in which every block of `π` has a pair with one
/// end inside the block and the other outside.
///
/// `factors[i] = (v_i, ε_i)`; dot factors are unconjugated, bar factors are
/// conjugated, and `cov(a, b) = E(g_a ḡ_b)`.
pub fn wick_centered<F: Fn(usize, usize) -> C64>(
    pi: &SetPartition,
    cov: F,
    factors: &[(usize, Sign)],
) -> Result<C64> {
    Error::check_len(pi.k(), factors.len())?;
    let eps = EpsilonSequence::new(factors.iter().map(|f| f.1).collect());
    if !eps.is_balanced() {
        return Ok(ZERO);
    }
    let dots = eps.dots();
    let bars = eps.bars();
    let labels = pi.labels();
    let mut total = ZERO;
    for sigma in all_permutations(dots.len())? {
        if !crosses_every_block(&labels, pi.num_blocks(), &dots, &bars, &sigma) {
            continue;
        }
        let mut prod = C64::new(1.0, 0.0);
        for (a, &d) in dots.iter().enumerate() {
            prod *= cov(factors[d].0, factors[bars[sigma.image(a)]].0);
        }
        total += prod;
    }
    Ok(total)
}

fn crosses_every_block(
    labels: &[usize],
    blocks: usize,
    dots: &[usize],
    bars: &[usize],
    sigma: &Permutation,
) -> bool {
    let mut crossed = vec![false; blocks];
    for (a, &d) in dots.iter().enumerate() {
        let b = bars[sigma.image(a)];
        if labels[d] != labels[b] {
            crossed[labels[d]] = true;
            crossed[labels[b]] = true;
        }
    }
    crossed.into_iter().all(|c| c)
}

/// Number of dot/bar matchings `τ` of the given positions with
/// `δ_τ(x) δ_τ(y) = 1`, i.e. `E(∏_{i ∈ positions} G^{ε_i}_{x_i y_i})` for a matrix
/// `G` of independent standard complex Gaussians. When `blocks` is given,
/// only matchings crossing every listed block are counted, which gives the
/// moment of the product of the corresponding brackets.
pub fn gaussian_count(
    x: &[usize],
    y: &[usize],
    eps: &EpsilonSequence,
    positions: &[usize],
    blocks: Option<&[&[usize]]>,
) -> Result<u64> {
    let dots: Vec<usize> = positions
        .iter()
        .copied()
        .filter(|&i| eps.signs()[i] == Sign::Dot)
        .collect();
    let bars: Vec<usize> = positions
        .iter()
        .copied()
        .filter(|&i| eps.signs()[i] == Sign::Bar)
        .collect();
    if dots.len() != bars.len() {
        return Ok(0);
    }
    let mut labels = vec![usize::MAX; x.len()];
    let nblocks = blocks.map_or(0, |b| b.len());
    if let Some(blocks) = blocks {
        for (t, b) in blocks.iter().enumerate() {
            for &i in b.iter() {
                labels[i] = t;
            }
        }
    }
    let mut count = 0;
    for sigma in all_permutations(dots.len())? {
        let matched = dots.iter().enumerate().all(|(a, &d)| {
            let b = bars[sigma.image(a)];
            x[d] == x[b] && y[d] == y[b]
        });
        if matched && (nblocks == 0 || crosses_every_block(&labels, nblocks, &dots, &bars, &sigma))
        {
            count += 1;
        }
    }
    Ok(count)
}

/// `E(∏_i (G^{ε_i}_{x_i y_i} + η))`, expanded over subsets of factors.
pub fn shifted_gaussian_moment(
    x: &[usize],
    y: &[usize],
    eps: &EpsilonSequence,
    eta: f64,
) -> Result<f64> {
    let k = x.len();
    let mut total = 0.0;
    for s in 0u64..(1 << k) {
        let positions: Vec<usize> = (0..k).filter(|&i| s >> i & 1 == 1).collect();
        let c = gaussian_count(x, y, eps, &positions, None)?;
        if c > 0 {
            total += c as f64 * eta.powi((k - positions.len()) as i32);
        }
    }
    Ok(total)
}

/// `E(∏_t ([∏_{i ∈ π_t} G^{ε_i}_{x_i y_i}] + η))`, expanded over subsets of brackets.
pub fn shifted_bracket_gaussian_moment(
    x: &[usize],
    y: &[usize],
    eps: &EpsilonSequence,
    pi: &SetPartition,
    eta: f64,
) -> Result<f64> {
    let t = pi.num_blocks();
    let mut total = 0.0;
    for a in 0u64..(1 << t) {
        let chosen: Vec<&[usize]> = pi
            .blocks()
            .iter()
            .enumerate()
            .filter(|(i, _)| a >> i & 1 == 1)
            .map(|(_, b)| b.as_slice())
            .collect();
        let positions: Vec<usize> = chosen.iter().flat_map(|b| b.iter().copied()).collect();
        let c = if chosen.is_empty() {
            1
        } else {
            gaussian_count(x, y, eps, &positions, Some(&chosen))?
        };
        if c > 0 {
            total += c as f64 * eta.powi((t - chosen.len()) as i32);
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PathStatistics {
    /// Number of distinct pairs `(x_i, y_i)` of multiplicity one.
    pub e1: usize,
    /// Number of isolated blocks.
    pub b: usize,
    /// Sum of the multiplicities that are at least four.
    pub m4: usize,
    /// Every value has an even number of left arms and of right arms.
    pub even: bool,
}

pub fn is_even_sequence(x: &[usize], y: &[usize]) -> bool {
    let mut left: HashMap<usize, usize> = HashMap::new();
    let mut right: HashMap<usize, usize> = HashMap::new();
    for &u in x {
        *left.entry(u).or_default() += 1;
    }
    for &u in y {
        *right.entry(u).or_default() += 1;
    }
    left.values().chain(right.values()).all(|c| c % 2 == 0)
}

/// Multiplicities, isolated blocks and evenness of `(x, y)` relative to `π`.
///
/// A block is isolated when none of its pairs `(x_i, y_i)` occurs at a
/// position outside the block.
pub fn path_statistics(x: &[usize], y: &[usize], pi: &SetPartition) -> Result<PathStatistics> {
    Error::check_len(x.len(), y.len())?;
    Error::check_len(x.len(), pi.k())?;
    let mut mult: HashMap<(usize, usize), usize> = HashMap::new();
    for (&a, &b) in x.iter().zip(y) {
        *mult.entry((a, b)).or_default() += 1;
    }
    let e1 = mult.values().filter(|&&m| m == 1).count();
    let m4 = mult.values().filter(|&&m| m >= 4).sum();
    let labels = pi.labels();
    let b = pi
        .blocks()
        .iter()
        .enumerate()
        .filter(|(t, block)| {
            block
                .iter()
                .all(|&i| (0..x.len()).all(|j| labels[j] == *t || (x[i], y[i]) != (x[j], y[j])))
        })
        .count();
    Ok(PathStatistics {
        e1,
        b,
        m4,
        even: is_even_sequence(x, y),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonInstance {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    pub eps: String,
    pub pi: Option<String>,
    /// Exact left-hand side as `numerator/denominator`.
    pub lhs_exact: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub passed: bool,
}

impl ComparisonInstance {
    fn new(
        x: &[usize],
        y: &[usize],
        eps: &EpsilonSequence,
        pi: Option<&SetPartition>,
        lhs_exact: &Rational,
        lhs: f64,
        rhs: f64,
    ) -> Self {
        Self {
            x: x.to_vec(),
            y: y.to_vec(),
            eps: eps.to_string(),
            pi: pi.map(ToString::to_string),
            lhs_exact: lhs_exact.to_string(),
            lhs,
            rhs,
            margin: rhs - lhs,
            passed: lhs <= rhs * (1.0 + FLOAT_SLACK) + f64::MIN_POSITIVE,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub enum ComparisonOutcome {
    Checked(ComparisonInstance),
    Skipped(String),
}

impl ComparisonOutcome {
    pub fn passed(&self) -> bool {
        match self {
            ComparisonOutcome::Checked(c) => c.passed,
            ComparisonOutcome::Skipped(_) => true,
        }
    }
}

fn nonzero_on_odd(lhs: &Rational, x: &[usize], y: &[usize]) -> bool {
    !is_even_sequence(x, y) && !lhs.is_zero()
}

/// `n^{k/2} |E ∏ U^{ε_i}_{x_i y_i}| <= (1 + 3k^{7/2}n^{−2}) E ∏ (G^{ε_i}_{x_i y_i} + k n^{−1/4})`,
/// plus vanishing of the left side on non-even sequences.
pub fn check_warmup(
    x: &[usize],
    y: &[usize],
    eps: &EpsilonSequence,
    n: usize,
) -> Result<ComparisonOutcome> {
    let k = x.len();
    Error::check_len(k, y.len())?;
    Error::check_len(k, eps.len())?;
    let (kf, nf) = (k as f64, n as f64);
    if k % 2 == 1 || n < 4 || 2.0 * kf.powf(3.5) > nf * nf {
        return Ok(ComparisonOutcome::Skipped(format!(
            "outside regime: k = {k}, n = {n}"
        )));
    }
    let moment = haar_moment_signed(x, y, eps, n)?;
    Ok(ComparisonOutcome::Checked(warmup_instance(
        x, y, eps, n, &moment,
    )?))
}

fn warmup_instance(
    x: &[usize],
    y: &[usize],
    eps: &EpsilonSequence,
    n: usize,
    moment: &Rational,
) -> Result<ComparisonInstance> {
    let k = x.len();
    let (kf, nf) = (k as f64, n as f64);
    let lhs = nf.powf(kf / 2.0) * rational_to_f64(&moment.abs());
    let eta = kf * nf.powf(-0.25);
    let rhs = (1.0 + 3.0 * kf.powf(3.5) / (nf * nf)) * shifted_gaussian_moment(x, y, eps, eta)?;
    let mut inst = ComparisonInstance::new(x, y, eps, None, moment, lhs, rhs);
    if nonzero_on_odd(moment, x, y) {
        inst.passed = false;
    }
    Ok(inst)
}

/// Shift used for the bracket comparison: `2 k^ℓ n^{−1/2}` when every block
/// has both a dot and a bar, `2 k^ℓ n^{−1/4}` otherwise.
pub fn bracket_eta(pi: &SetPartition, eps: &EpsilonSequence, n: usize) -> f64 {
    let k = pi.k() as f64;
    let ell = pi.blocks().iter().map(Vec::len).max().unwrap_or(0) as i32;
    let mixed = pi.blocks().iter().all(|b| {
        b.iter().any(|&i| eps.signs()[i] == Sign::Dot)
            && b.iter().any(|&i| eps.signs()[i] == Sign::Bar)
    });
    let power = if mixed { -0.5 } else { -0.25 };
    2.0 * k.powi(ell) * (n as f64).powf(power)
}

/// `n^{k/2} |E ∏_t [∏ U^ε]| <= (1 + δ) E ∏_t ([∏ G^ε] + η)` with `δ = 3k^{7/2}n^{−2}`.
pub fn check_with_brackets(
    pi: &SetPartition,
    eps: &EpsilonSequence,
    x: &[usize],
    y: &[usize],
    n: usize,
) -> Result<ComparisonOutcome> {
    let k = pi.k();
    Error::check_len(k, eps.len())?;
    let (kf, nf) = (k as f64, n as f64);
    if k % 2 == 1 || n < 4 || 2.0 * kf.powf(3.5) > nf * nf {
        return Ok(ComparisonOutcome::Skipped(format!(
            "outside regime: k = {k}, n = {n}"
        )));
    }
    let moment = if eps.is_balanced() {
        let (ms, matrix) = wg_bracket_matrix(pi, eps, n)?;
        centered_moment_from_matrix(&ms, &matrix, x, y)?
    } else {
        Rational::zero()
    };
    Ok(ComparisonOutcome::Checked(bracket_instance(
        pi, eps, x, y, n, &moment,
    )?))
}

fn bracket_instance(
    pi: &SetPartition,
    eps: &EpsilonSequence,
    x: &[usize],
    y: &[usize],
    n: usize,
    moment: &Rational,
) -> Result<ComparisonInstance> {
    let k = pi.k();
    let (kf, nf) = (k as f64, n as f64);
    let lhs = nf.powf(kf / 2.0) * rational_to_f64(&moment.abs());
    let eta = bracket_eta(pi, eps, n);
    let delta = 3.0 * kf.powf(3.5) / (nf * nf);
    let rhs = (1.0 + delta) * shifted_bracket_gaussian_moment(x, y, eps, pi, eta)?;
    let mut inst = ComparisonInstance::new(x, y, eps, Some(pi), moment, lhs, rhs);
    if nonzero_on_odd(moment, x, y) {
        inst.passed = false;
    }
    Ok(inst)
}

/// `|E ∏_t [∏ U^ε]| <= c n^{−k/2} η^{b + e1/q} k^{m4/2}` with `η = c k^{q/2} n^{−1/8}`,
/// where `q = k / T` and every block must have exactly `q` elements.
pub fn check_cor_wg2(
    pi: &SetPartition,
    eps: &EpsilonSequence,
    x: &[usize],
    y: &[usize],
    n: usize,
    c: f64,
) -> Result<ComparisonOutcome> {
    let k = pi.k();
    Error::check_len(k, eps.len())?;
    let t = pi.num_blocks();
    if t == 0 || k % t != 0 || pi.blocks().iter().any(|b| b.len() < k / t) {
        return Ok(ComparisonOutcome::Skipped(
            "blocks are not of equal size q = k/T".into(),
        ));
    }
    let q = k / t;
    if !cor_wg2_regime(k, q, n) {
        return Ok(ComparisonOutcome::Skipped(format!(
            "k^(q+1) > n^(1/4) for k = {k}, q = {q}, n = {n}"
        )));
    }
    let moment = if eps.is_balanced() {
        let (ms, matrix) = wg_bracket_matrix(pi, eps, n)?;
        centered_moment_from_matrix(&ms, &matrix, x, y)?
    } else {
        Rational::zero()
    };
    Ok(ComparisonOutcome::Checked(cor_wg2_instance(
        pi, eps, x, y, n, q, c, &moment,
    )?))
}

/// `k^{q+1} <= n^{1/4}`, decided exactly as `k^{4(q+1)} <= n`.
pub fn cor_wg2_regime(k: usize, q: usize, n: usize) -> bool {
    (k as u128)
        .checked_pow(4 * (q as u32 + 1))
        .is_some_and(|v| v <= n as u128)
}

/// Smallest power of two `n` with `k^{q+1} <= n^{1/4}`.
pub fn cor_wg2_min_n(k: usize, q: usize) -> usize {
    let mut n = 1usize;
    while !cor_wg2_regime(k, q, n) {
        n *= 2;
    }
    n
}

#[allow(clippy::too_many_arguments)]
fn cor_wg2_instance(
    pi: &SetPartition,
    eps: &EpsilonSequence,
    x: &[usize],
    y: &[usize],
    n: usize,
    q: usize,
    c: f64,
    moment: &Rational,
) -> Result<ComparisonInstance> {
    let k = pi.k();
    let (kf, nf) = (k as f64, n as f64);
    let stats = path_statistics(x, y, pi)?;
    let eta = c * kf.powf(q as f64 / 2.0) * nf.powf(-0.125);
    let exponent = stats.b as f64 + stats.e1 as f64 / q as f64;
    let rhs = c * nf.powf(-kf / 2.0) * eta.powf(exponent) * kf.powf(stats.m4 as f64 / 2.0);
    let lhs = rational_to_f64(&moment.abs());
    Ok(ComparisonInstance::new(
        x,
        y,
        eps,
        Some(pi),
        moment,
        lhs,
        rhs,
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub name: String,
    pub k: usize,
    pub n: usize,
    pub checked: usize,
    pub skipped: usize,
    /// Non-even sequences whose exact left side was verified to be zero.
    pub odd_vanishing: usize,
    pub failures: Vec<ComparisonInstance>,
    pub worst_ratio: f64,
    /// Every checked instance, failures included.
    pub instances: Vec<ComparisonInstance>,
}

impl ComparisonReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn from_instances(
        name: &str,
        k: usize,
        n: usize,
        skipped: usize,
        instances: Vec<ComparisonInstance>,
    ) -> Self {
        let odd_vanishing = instances
            .iter()
            .filter(|i| !is_even_sequence(&i.x, &i.y) && i.lhs_exact == "0")
            .count();
        let worst_ratio = instances
            .iter()
            .filter(|i| i.rhs > 0.0)
            .map(|i| i.lhs / i.rhs)
            .fold(0.0, f64::max);
        let checked = instances.len();
        let failures = instances.iter().filter(|i| !i.passed).cloned().collect();
        Self {
            name: name.to_string(),
            k,
            n,
            checked,
            skipped,
            odd_vanishing,
            failures,
            worst_ratio,
            instances,
        }
    }
}

/// [`check_warmup`] over every balanced `ε` and every `x, y ∈ {1..alphabet}^k`.
pub fn warmup_grid(k: usize, n: usize, alphabet: usize) -> Result<ComparisonReport> {
    let (kf, nf) = (k as f64, n as f64);
    if k % 2 == 1 || n < 4 || 2.0 * kf.powf(3.5) > nf * nf {
        return Ok(ComparisonReport::from_instances(
            "warmup",
            k,
            n,
            1,
            Vec::new(),
        ));
    }
    let tuples = all_tuples(k, alphabet);
    let eps_list: Vec<EpsilonSequence> = all_sign_sequences(k)
        .into_iter()
        .filter(|e| e.is_balanced())
        .collect();
    let jobs: Vec<(&EpsilonSequence, &Vec<usize>)> = eps_list
        .iter()
        .flat_map(|e| tuples.iter().map(move |x| (e, x)))
        .collect();
    let instances = jobs
        .par_iter()
        .map(|&(eps, x)| {
            tuples
                .iter()
                .map(|y| {
                    let moment = haar_moment_signed(x, y, eps, n)?;
                    warmup_instance(x, y, eps, n, &moment)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(ComparisonReport::from_instances(
        "warmup", k, n, 0, instances,
    ))
}

/// [`check_with_brackets`] over every partition of `0..k`, every balanced `ε`
/// and every `x, y ∈ {1..alphabet}^k`.
pub fn brackets_grid(k: usize, n: usize, alphabet: usize) -> Result<ComparisonReport> {
    let (kf, nf) = (k as f64, n as f64);
    if k % 2 == 1 || n < 4 || 2.0 * kf.powf(3.5) > nf * nf {
        return Ok(ComparisonReport::from_instances(
            "with_brackets",
            k,
            n,
            1,
            Vec::new(),
        ));
    }
    let partitions = all_set_partitions(k)?;
    grid_over(
        &partitions,
        k,
        n,
        alphabet,
        "with_brackets",
        |pi, eps, x, y, m| bracket_instance(pi, eps, x, y, n, m),
    )
}

/// [`check_cor_wg2`] over every partition of `0..k` into blocks of size `q`.
pub fn cor_wg2_grid(
    k: usize,
    q: usize,
    n: usize,
    alphabet: usize,
    c: f64,
) -> Result<ComparisonReport> {
    if q == 0 || k % q != 0 || !cor_wg2_regime(k, q, n) {
        return Ok(ComparisonReport::from_instances(
            "cor_wg2",
            k,
            n,
            1,
            Vec::new(),
        ));
    }
    let partitions: Vec<SetPartition> = all_set_partitions(k)?
        .into_iter()
        .filter(|p| p.blocks().iter().all(|b| b.len() == q))
        .collect();
    grid_over(
        &partitions,
        k,
        n,
        alphabet,
        "cor_wg2",
        |pi, eps, x, y, m| cor_wg2_instance(pi, eps, x, y, n, q, c, m),
    )
}

fn grid_over<F>(
    partitions: &[SetPartition],
    k: usize,
    n: usize,
    alphabet: usize,
    name: &str,
    check: F,
) -> Result<ComparisonReport>
where
    F: Fn(
            &SetPartition,
            &EpsilonSequence,
            &[usize],
            &[usize],
            &Rational,
        ) -> Result<ComparisonInstance>
        + Sync,
{
    let tuples = all_tuples(k, alphabet);
    let eps_list: Vec<EpsilonSequence> = all_sign_sequences(k)
        .into_iter()
        .filter(|e| e.is_balanced())
        .collect();
    let jobs: Vec<(&SetPartition, &EpsilonSequence)> = partitions
        .iter()
        .flat_map(|p| eps_list.iter().map(move |e| (p, e)))
        .collect();
    let instances = jobs
        .par_iter()
        .map(|&(pi, eps)| {
            let (ms, matrix) = wg_bracket_matrix(pi, eps, n)?;
            let mut out = Vec::with_capacity(tuples.len() * tuples.len());
            for x in &tuples {
                for y in &tuples {
                    let moment = centered_moment_from_matrix(&ms, &matrix, x, y)?;
                    out.push(check(pi, eps, x, y, &moment)?);
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(ComparisonReport::from_instances(name, k, n, 0, instances))
}

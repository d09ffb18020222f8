//! Moments of products of centered monomials `[X] = X − E X` in the entries
//! of a Haar unitary (and orthogonal) matrix.
//!
//! For a partition `π = (π_1, …, π_T)` of the factor positions, the generalized
//! Weingarten function is the alternating sum
//! `Wg[π](p,q,n) = Σ_{A ⊆ [T]} (−1)^{T−|A|} Wg_A[π](p,q,n)`, where `Wg_A` is the
//! product of plain Weingarten functions over the blocks of `π_A` (the blocks
//! in `A` merged into one) and vanishes unless `p` and `q` respect `π_A`.

use std::collections::HashMap;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::exact::{rational_to_f64, Rational};
use crate::symcore::{
    epsilon_matchings, join, CycleType, EpsilonMatching, EpsilonSequence, PairPartition,
    SetPartition, Sign,
};
use crate::weingarten::{
    haar_moment_orth, haar_moment_signed, rpow, series_tail_bounds, wg_exact, wg_orth_exact,
    SeriesApprox, HURWITZ_DEPTH_CAP,
};
use crate::{Error, Result};

/// Largest number of brackets accepted.
pub const BRACKET_CAP: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BracketMomentSpec {
    pub pi: SetPartition,
    pub eps: EpsilonSequence,
    pub x: Vec<usize>,
    pub y: Vec<usize>,
}

impl BracketMomentSpec {
    pub fn new(
        pi: SetPartition,
        eps: EpsilonSequence,
        x: Vec<usize>,
        y: Vec<usize>,
    ) -> Result<Self> {
        Error::check_len(pi.k(), eps.len())?;
        Error::check_len(pi.k(), x.len())?;
        Error::check_len(pi.k(), y.len())?;
        Ok(Self { pi, eps, x, y })
    }

    pub fn k(&self) -> usize {
        self.pi.k()
    }
}

#[derive(Debug, Clone)]
pub struct CenteredWgValue {
    pub p: EpsilonMatching,
    pub q: EpsilonMatching,
    pub value: Rational,
    pub restricted_block_count: usize,
}

fn check_blocks(pi: &SetPartition) -> Result<()> {
    if pi.num_blocks() > BRACKET_CAP {
        return Err(Error::capacity("number of brackets", BRACKET_CAP));
    }
    Ok(())
}

fn check_matching(pi: &SetPartition, m: &EpsilonMatching) -> Result<()> {
    Error::check_len(pi.k(), m.k())
}

/// The permutation `p̂ q̂^{-1}` acting on bar labels.
fn sigma_of(p: &EpsilonMatching, q: &EpsilonMatching) -> crate::symcore::Permutation {
    p.hat().compose(&q.hat().inverse())
}

/// Per block: does `m` respect it?
fn respect_mask(pi: &SetPartition, m: &EpsilonMatching) -> u64 {
    pi.blocks()
        .iter()
        .enumerate()
        .filter(|(_, b)| m.respects(b))
        .fold(0, |acc, (t, _)| acc | 1 << t)
}

/// Number of blocks of `π` that are unions of blocks of `p ∨ q`.
pub fn restricted_block_count(
    pi: &SetPartition,
    p: &EpsilonMatching,
    q: &EpsilonMatching,
) -> Result<usize> {
    check_matching(pi, p)?;
    check_matching(pi, q)?;
    let pq = join(&p.pairs().to_set_partition(), &q.pairs().to_set_partition())?;
    let labels = pq.labels();
    let count = pi
        .blocks()
        .iter()
        .filter(|block| {
            let mut inside = vec![false; pi.k()];
            for &i in block.iter() {
                inside[i] = true;
            }
            (0..pi.k()).all(|i| inside[i] == block.iter().any(|&b| labels[b] == labels[i]))
        })
        .count();
    Ok(count)
}

/// `Wg[π](p, q, n)`.
pub fn wg_bracket(
    pi: &SetPartition,
    p: &EpsilonMatching,
    q: &EpsilonMatching,
    n: usize,
) -> Result<Rational> {
    check_blocks(pi)?;
    check_matching(pi, p)?;
    check_matching(pi, q)?;
    let m = p.k() / 2;
    if m > n {
        return Err(Error::UnsupportedRegime(format!(
            "centered Weingarten needs k/2 <= n, got k = {}, n = {n}",
            p.k()
        )));
    }
    let t = pi.num_blocks();
    let full = (1u64 << t) - 1;
    let respected = respect_mask(pi, p) & respect_mask(pi, q);
    let sigma = sigma_of(p, q);
    let pi_labels = pi.labels();
    // block of π containing each bar label
    let bar_block: Vec<usize> = p.bar_positions().iter().map(|&b| pi_labels[b]).collect();
    let cycles = sigma.cycles();

    let mut total = Rational::zero();
    for a in 0..=full {
        // Wg_A vanishes unless p and q respect every block outside A.
        if (full & !a) & !respected != 0 {
            continue;
        }
        // Group cycles: blocks outside A separately, blocks in A together.
        let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
        for c in &cycles {
            let b = bar_block[c[0]];
            let key = if a >> b & 1 == 1 { usize::MAX } else { b };
            groups.entry(key).or_default().push(c.len());
        }
        let mut term = Rational::one();
        for (_, mut parts) in groups {
            parts.sort_unstable_by(|x, y| y.cmp(x));
            let ct = CycleType(parts);
            term *= wg_exact(ct.degree(), n)?.value_of_type(&ct);
        }
        if (t - a.count_ones() as usize) % 2 == 1 {
            total -= term;
        } else {
            total += term;
        }
    }
    Ok(total)
}

pub fn centered_wg_value(
    pi: &SetPartition,
    p: &EpsilonMatching,
    q: &EpsilonMatching,
    n: usize,
) -> Result<CenteredWgValue> {
    Ok(CenteredWgValue {
        p: p.clone(),
        q: q.clone(),
        value: wg_bracket(pi, p, q, n)?,
        restricted_block_count: restricted_block_count(pi, p, q)?,
    })
}

/// All ε-matchings together with the matrix `Wg[π](p, q, n)` over them.
pub fn wg_bracket_matrix(
    pi: &SetPartition,
    eps: &EpsilonSequence,
    n: usize,
) -> Result<(Vec<EpsilonMatching>, Vec<Vec<Rational>>)> {
    Error::check_len(pi.k(), eps.len())?;
    let matchings = epsilon_matchings(eps)?;
    let matrix = matchings
        .iter()
        .map(|p| {
            matchings
                .iter()
                .map(|q| wg_bracket(pi, p, q, n))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((matchings, matrix))
}

/// `E(∏_t [∏_{i ∈ π_t} U^{ε_i}_{x_i y_i}])` through `Wg[π]`.
pub fn centered_moment(spec: &BracketMomentSpec, n: usize) -> Result<Rational> {
    check_blocks(&spec.pi)?;
    if !spec.eps.is_balanced() {
        // Some block outside A, or the union of A, is unbalanced for every A.
        return Ok(Rational::zero());
    }
    let (matchings, matrix) = wg_bracket_matrix(&spec.pi, &spec.eps, n)?;
    centered_moment_from_matrix(&matchings, &matrix, &spec.x, &spec.y)
}

/// Contracts a precomputed `Wg[π]` matrix with the index deltas.
pub fn centered_moment_from_matrix(
    matchings: &[EpsilonMatching],
    matrix: &[Vec<Rational>],
    x: &[usize],
    y: &[usize],
) -> Result<Rational> {
    let px: Vec<bool> = matchings
        .iter()
        .map(|p| p.delta(x))
        .collect::<Result<_>>()?;
    let qy: Vec<bool> = matchings
        .iter()
        .map(|q| q.delta(y))
        .collect::<Result<_>>()?;
    let mut acc = Rational::zero();
    for (i, row) in matrix.iter().enumerate() {
        if !px[i] {
            continue;
        }
        for (j, v) in row.iter().enumerate() {
            if qy[j] {
                acc += v;
            }
        }
    }
    Ok(acc)
}

/// The same moment by direct inclusion–exclusion over subsets of brackets:
/// `E([X_1]⋯[X_T]) = Σ_A (−1)^{T−|A|} E(∏_{t∈A} X_t) ∏_{t∉A} E(X_t)`.
pub fn centered_moment_expansion(spec: &BracketMomentSpec, n: usize) -> Result<Rational> {
    check_blocks(&spec.pi)?;
    let blocks = spec.pi.blocks();
    let sub = |positions: &[usize]| -> Result<Rational> {
        let x: Vec<usize> = positions.iter().map(|&i| spec.x[i]).collect();
        let y: Vec<usize> = positions.iter().map(|&i| spec.y[i]).collect();
        haar_moment_signed(&x, &y, &spec.eps.restrict(positions), n)
    };
    inclusion_exclusion(blocks, sub)
}

pub(crate) fn inclusion_exclusion<F>(blocks: &[Vec<usize>], mut moment: F) -> Result<Rational>
where
    F: FnMut(&[usize]) -> Result<Rational>,
{
    let t = blocks.len();
    let singles: Vec<Rational> = blocks.iter().map(|b| moment(b)).collect::<Result<_>>()?;
    let mut total = Rational::zero();
    for a in 0..(1u64 << t) {
        let mut term = Rational::one();
        let mut union = Vec::new();
        for (i, b) in blocks.iter().enumerate() {
            if a >> i & 1 == 1 {
                union.extend_from_slice(b);
            } else {
                term *= &singles[i];
            }
        }
        if term.is_zero() {
            continue;
        }
        union.sort_unstable();
        if !union.is_empty() {
            term *= moment(&union)?;
        }
        if (t - a.count_ones() as usize) % 2 == 1 {
            total -= term;
        } else {
            total += term;
        }
    }
    Ok(total)
}

/// Counts monotone factorizations `p̂ q̂^{-1} = τ_1 ⋯ τ_m` (transpositions on bar
/// labels, `m = |p̂q̂^{-1}| + l`) that cannot be restricted to any single block
/// of `π`. A solution restricts to a block when `p`, `q` and every `τ_i` leave
/// the block invariant.
pub fn restricted_hurwitz_count(
    pi: &SetPartition,
    p: &EpsilonMatching,
    q: &EpsilonMatching,
    l: usize,
) -> Result<u128> {
    let mut counter = RestrictedHurwitzCounter::new(pi, p, q)?;
    counter.count(l)
}

/// Memoized restricted count for a fixed `(π, p, q)`.
pub struct RestrictedHurwitzCounter {
    sigma: Vec<u8>,
    length: usize,
    initial_mask: u64,
    /// For each transposition `(i, j)` of bar labels, the blocks it crosses.
    crossing: Vec<Vec<u64>>,
    memo: HashMap<(Vec<u8>, u8, u8, u64), u128>,
}

impl RestrictedHurwitzCounter {
    pub fn new(pi: &SetPartition, p: &EpsilonMatching, q: &EpsilonMatching) -> Result<Self> {
        check_blocks(pi)?;
        check_matching(pi, p)?;
        check_matching(pi, q)?;
        let sigma = sigma_of(p, q);
        let pi_labels = pi.labels();
        let bar_block: Vec<usize> = p.bar_positions().iter().map(|&b| pi_labels[b]).collect();
        let m = bar_block.len();
        let crossing = (0..m)
            .map(|j| {
                (0..m)
                    .map(|i| {
                        if bar_block[i] == bar_block[j] {
                            0
                        } else {
                            (1u64 << bar_block[i]) | (1u64 << bar_block[j])
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            sigma: sigma.images().iter().map(|&v| v as u8).collect(),
            length: sigma.length(),
            initial_mask: respect_mask(pi, p) & respect_mask(pi, q),
            crossing,
            memo: HashMap::new(),
        })
    }

    pub fn count(&mut self, l: usize) -> Result<u128> {
        let steps = self.length + l;
        if steps > HURWITZ_DEPTH_CAP {
            return Err(Error::capacity(
                "Hurwitz factorization length",
                HURWITZ_DEPTH_CAP,
            ));
        }
        if l % 2 == 1 {
            return Ok(0);
        }
        Ok(self.rec(self.sigma.clone(), 0, steps as u8, self.initial_mask))
    }

    fn rec(&mut self, rem: Vec<u8>, min_j: u8, steps: u8, mask: u64) -> u128 {
        let dist = perm_length(&rem);
        if dist > steps as usize || (steps as usize - dist) % 2 == 1 {
            return 0;
        }
        if steps == 0 {
            return u128::from(mask == 0);
        }
        let key = (rem, min_j, steps, mask);
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let rem = key.0.clone();
        let k = rem.len() as u8;
        let mut total = 0u128;
        for j in min_j.max(1)..k {
            for i in 0..j {
                let mut next = rem.clone();
                for v in next.iter_mut() {
                    if *v == i {
                        *v = j;
                    } else if *v == j {
                        *v = i;
                    }
                }
                let cross = self.crossing[j as usize][i as usize];
                total += self.rec(next, j, steps - 1, mask & !cross);
            }
        }
        self.memo.insert(key, total);
        total
    }
}

fn perm_length(images: &[u8]) -> usize {
    let k = images.len();
    let mut seen = vec![false; k];
    let mut cycles = 0;
    for s in 0..k {
        if !seen[s] {
            cycles += 1;
            let mut x = s;
            while !seen[x] {
                seen[x] = true;
                x = images[x] as usize;
            }
        }
    }
    k - cycles
}

/// Partial sum `(−1)^{|σ|} n^{−k/2−|σ|} Σ_{g<=g_max} |P[π](p,q,2g)| n^{−2g}` with
/// `σ = p̂ q̂^{-1}`, together with tail bounds inherited from the plain series
/// (restricted counts never exceed unrestricted ones).
pub fn wg_bracket_series(
    pi: &SetPartition,
    p: &EpsilonMatching,
    q: &EpsilonMatching,
    n: usize,
    g_max: usize,
) -> Result<SeriesApprox> {
    let mut counter = RestrictedHurwitzCounter::new(pi, p, q)?;
    let m = p.k() / 2;
    if n < m {
        return Err(Error::UnsupportedRegime(format!(
            "series diverges at n = {n} < {m}"
        )));
    }
    let s = counter.length;
    let inv_n = Rational::one() / Rational::from_integer(n.into());
    let mut partial = Rational::zero();
    for g in 0..=g_max {
        let c = counter.count(2 * g)?;
        partial += Rational::from_integer(c.into()) * rpow(&inv_n, 2 * g);
    }
    partial *= rpow(&inv_n, m + s);
    if s % 2 == 1 {
        partial = -partial;
    }
    let (tail_exact, tail_geometric) = series_tail_bounds(m, s, n, g_max);
    Ok(SeriesApprox {
        partial,
        tail_exact,
        tail_geometric,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CenteredEstimateReport {
    pub k: usize,
    pub n: usize,
    pub value: f64,
    pub bound: f64,
    pub restricted_block_count: usize,
    pub sigma_length: usize,
    pub passed: bool,
    pub skipped: Option<String>,
}

/// Checks `|Wg[π](p,q,n)| <= (1 + 3k^{7/2}n^{−2}) n^{−k/2−|σ|} 4^{|σ|} (k^{7/4} n^{−1})^r`
/// with `r` the restricted block count and `k` the number of factors.
pub fn check_centered_estimate(
    pi: &SetPartition,
    p: &EpsilonMatching,
    q: &EpsilonMatching,
    n: usize,
) -> Result<CenteredEstimateReport> {
    let k = p.k();
    let kf = k as f64;
    let nf = n as f64;
    let s = sigma_of(p, q).length();
    let r = restricted_block_count(pi, p, q)?;
    if 2.0 * kf.powf(3.5) > nf * nf {
        return Ok(CenteredEstimateReport {
            k,
            n,
            value: f64::NAN,
            bound: f64::NAN,
            restricted_block_count: r,
            sigma_length: s,
            passed: true,
            skipped: Some(format!("2k^(7/2) > n^2 for k = {k}, n = {n}")),
        });
    }
    let value = rational_to_f64(&wg_bracket(pi, p, q, n)?);
    let bound = (1.0 + 3.0 * kf.powf(3.5) / (nf * nf))
        * nf.powi(-((k / 2 + s) as i32))
        * 4f64.powi(s as i32)
        * (kf.powf(1.75) / nf).powi(r as i32);
    Ok(CenteredEstimateReport {
        k,
        n,
        value,
        bound,
        restricted_block_count: r,
        sigma_length: s,
        passed: value.abs() <= bound * (1.0 + 1e-9),
        skipped: None,
    })
}

/// Generalized orthogonal Weingarten function over pair partitions of `0..k`.
pub fn wg_orth_bracket(
    pi: &SetPartition,
    p: &PairPartition,
    q: &PairPartition,
    n: usize,
) -> Result<Rational> {
    check_blocks(pi)?;
    Error::check_len(pi.k(), p.k())?;
    Error::check_len(pi.k(), q.k())?;
    let t = pi.num_blocks();
    let full = (1u64 << t) - 1;
    let mut total = Rational::zero();
    for a in 0..=full {
        let pa = pi.merge_blocks(a);
        let mut term = Rational::one();
        for block in pa.blocks() {
            match (restrict_pairs(p, block), restrict_pairs(q, block)) {
                (Some(pb), Some(qb)) => {
                    term *= wg_orth_exact(block.len(), n)?.value(&pb, &qb);
                }
                _ => {
                    term = Rational::zero();
                    break;
                }
            }
        }
        if (t - a.count_ones() as usize) % 2 == 1 {
            total -= term;
        } else {
            total += term;
        }
    }
    Ok(total)
}

fn restrict_pairs(p: &PairPartition, block: &[usize]) -> Option<PairPartition> {
    let pos: HashMap<usize, usize> = block.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    let mut pairs = Vec::new();
    for &(a, b) in p.pairs() {
        match (pos.get(&a), pos.get(&b)) {
            (Some(&i), Some(&j)) => pairs.push((i, j)),
            (None, None) => {}
            _ => return None,
        }
    }
    PairPartition::new(block.len(), pairs).ok()
}

/// `E(∏_t [∏_{i∈π_t} O_{x_i y_i}])` through `Wg_O[π]`.
pub fn centered_moment_orth(
    pi: &SetPartition,
    x: &[usize],
    y: &[usize],
    n: usize,
) -> Result<Rational> {
    Error::check_len(pi.k(), x.len())?;
    Error::check_len(pi.k(), y.len())?;
    let k = pi.k();
    if k % 2 == 1 {
        return Ok(Rational::zero());
    }
    let partitions = crate::symcore::enumerate_pair_partitions(k)?;
    let ps: Vec<&PairPartition> = partitions
        .iter()
        .filter(|p| p.delta(x).unwrap_or(false))
        .collect();
    let qs: Vec<&PairPartition> = partitions
        .iter()
        .filter(|q| q.delta(y).unwrap_or(false))
        .collect();
    let mut acc = Rational::zero();
    for p in &ps {
        for q in &qs {
            acc += wg_orth_bracket(pi, p, q, n)?;
        }
    }
    Ok(acc)
}

/// The orthogonal centered moment by direct inclusion–exclusion.
pub fn centered_moment_orth_expansion(
    pi: &SetPartition,
    x: &[usize],
    y: &[usize],
    n: usize,
) -> Result<Rational> {
    check_blocks(pi)?;
    inclusion_exclusion(pi.blocks(), |positions| {
        let xs: Vec<usize> = positions.iter().map(|&i| x[i]).collect();
        let ys: Vec<usize> = positions.iter().map(|&i| y[i]).collect();
        haar_moment_orth(&xs, &ys, n)
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    pub k: usize,
    pub n: usize,
    pub checked: usize,
    pub failures: Vec<String>,
}

impl ConsistencyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Compares [`centered_moment`] with [`centered_moment_expansion`] for every
/// partition of `0..k`, every balanced sign sequence and every `x, y` in
/// `{1, …, alphabet}^k`.
pub fn consistency_suite(k: usize, n: usize, alphabet: usize) -> Result<ConsistencyReport> {
    let mut failures = Vec::new();
    let mut checked = 0;
    let tuples = all_tuples(k, alphabet);
    for pi in crate::symcore::all_set_partitions(k)? {
        if pi.num_blocks() > BRACKET_CAP {
            continue;
        }
        for eps in all_sign_sequences(k)
            .into_iter()
            .filter(EpsilonSequence::is_balanced)
        {
            let (matchings, matrix) = wg_bracket_matrix(&pi, &eps, n)?;
            for x in &tuples {
                for y in &tuples {
                    let spec =
                        BracketMomentSpec::new(pi.clone(), eps.clone(), x.clone(), y.clone())?;
                    let via_wg = centered_moment_from_matrix(&matchings, &matrix, x, y)?;
                    let direct = centered_moment_expansion(&spec, n)?;
                    checked += 1;
                    if via_wg != direct {
                        failures.push(format!(
                            "π={pi} ε={eps} x={x:?} y={y:?}: {via_wg} != {direct}"
                        ));
                    }
                }
            }
        }
    }
    Ok(ConsistencyReport {
        k,
        n,
        checked,
        failures,
    })
}

/// All tuples in `{1, …, alphabet}^k`.
pub fn all_tuples(k: usize, alphabet: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|t| {
                (1..=alphabet).map(move |v| {
                    let mut t = t.clone();
                    t.push(v);
                    t
                })
            })
            .collect();
    }
    out
}

/// All `2^k` sign sequences of length `k`.
pub fn all_sign_sequences(k: usize) -> Vec<EpsilonSequence> {
    (0..1u64 << k)
        .map(|mask| {
            EpsilonSequence::new(
                (0..k)
                    .map(|i| {
                        if mask >> i & 1 == 1 {
                            Sign::Bar
                        } else {
                            Sign::Dot
                        }
                    })
                    .collect(),
            )
        })
        .collect()
}

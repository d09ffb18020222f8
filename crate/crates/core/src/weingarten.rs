//! Unitary and orthogonal Weingarten functions, monotone Hurwitz counts and
//! exact Haar moments.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::exact::{self, big_pow, rational_to_f64, Rational};
use crate::symcore::{
    all_permutations, enumerate_pair_partitions, integer_partitions, join, CycleType,
    EpsilonSequence, PairPartition, Permutation, Sign,
};
use crate::{Error, Result};

/// Largest `|σ| + l` accepted by [`hurwitz_count`].
pub const HURWITZ_DEPTH_CAP: usize = 32;

/// Exact values of `Wg(·, n)` on `S_k`, one per cycle type.
#[derive(Debug, Clone, PartialEq)]
pub struct WeingartenTable {
    pub k: usize,
    pub n: usize,
    pub values: BTreeMap<CycleType, Rational>,
}

impl WeingartenTable {
    pub fn value_of_type(&self, ct: &CycleType) -> &Rational {
        &self.values[ct]
    }

    pub fn value(&self, sigma: &Permutation) -> &Rational {
        assert_eq!(
            sigma.degree(),
            self.k,
            "permutation degree does not match table"
        );
        &self.values[&sigma.cycle_type()]
    }

    /// `Wg(p q^{-1}, n)`.
    pub fn entry(&self, p: &Permutation, q: &Permutation) -> &Rational {
        self.value(&p.compose(&q.inverse()))
    }
}

fn unitary_cache() -> &'static Mutex<HashMap<(usize, usize), Arc<WeingartenTable>>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<WeingartenTable>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Inserts an externally loaded table into the in-process cache.
pub fn seed_cache(table: WeingartenTable) {
    unitary_cache()
        .lock()
        .expect("cache poisoned")
        .insert((table.k, table.n), Arc::new(table));
}

/// Exact unitary Weingarten table for `1 <= k <= n`.
///
/// Solves the class-reduced Gram system
/// `Σ_q n^{ℓ(p q^{-1})} Wg(type q) = δ_{p,e}` with one row per cycle type.
pub fn wg_exact(k: usize, n: usize) -> Result<Arc<WeingartenTable>> {
    if k == 0 {
        return Err(Error::Invalid("degree must be positive".into()));
    }
    if k > n {
        return Err(Error::UnsupportedRegime(format!(
            "Weingarten function on S_{k} is not uniquely defined for n = {n} < k"
        )));
    }
    if let Some(t) = unitary_cache().lock().expect("cache poisoned").get(&(k, n)) {
        return Ok(Arc::clone(t));
    }
    let table = Arc::new(compute_wg(k, n)?);
    unitary_cache()
        .lock()
        .expect("cache poisoned")
        .insert((k, n), Arc::clone(&table));
    Ok(table)
}

fn compute_wg(k: usize, n: usize) -> Result<WeingartenTable> {
    let classes = integer_partitions(k);
    let class_index: HashMap<CycleType, usize> = classes
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, c)| (c, i))
        .collect();
    let perms = all_permutations(k)?;
    let powers: Vec<BigInt> = (0..=k).map(|e| big_pow(n as u64, e as u32)).collect();

    let mut rows = Vec::with_capacity(classes.len());
    for class in &classes {
        let p = class.representative();
        let mut row = vec![BigInt::zero(); classes.len()];
        for q in &perms {
            let l = p.compose(&q.inverse()).num_cycles();
            row[class_index[&q.cycle_type()]] += &powers[l];
        }
        rows.push(row);
    }
    let identity_class = class_index[&CycleType(vec![1; k])];
    let rhs: Vec<Vec<BigInt>> = (0..classes.len())
        .map(|i| {
            vec![if i == identity_class {
                BigInt::one()
            } else {
                BigInt::zero()
            }]
        })
        .collect();
    let sol = exact::solve_integer(&rows, &rhs).ok_or_else(|| {
        Error::UnsupportedRegime(format!("Gram system singular for k = {k}, n = {n}"))
    })?;
    let values = classes
        .into_iter()
        .zip(sol)
        .map(|(c, mut v)| (c, v.swap_remove(0)))
        .collect();
    Ok(WeingartenTable { k, n, values })
}

/// Checks that `[n^{ℓ(pq^{-1})}] · [Wg(pq^{-1}, n)]` is the identity over
/// all of `S_k`, in exact arithmetic.
pub fn gram_inverse_holds(table: &WeingartenTable) -> Result<bool> {
    let perms = all_permutations(table.k)?;
    let n = table.n as u64;
    let wg: Vec<Vec<&Rational>> = perms
        .iter()
        .map(|r| perms.iter().map(|q| table.entry(r, q)).collect())
        .collect();
    for (i, p) in perms.iter().enumerate() {
        let gram_row: Vec<Rational> = perms
            .iter()
            .map(|r| {
                Rational::from_integer(big_pow(n, p.compose(&r.inverse()).num_cycles() as u32))
            })
            .collect();
        for j in 0..perms.len() {
            let mut acc = Rational::zero();
            for (r, g) in gram_row.iter().enumerate() {
                acc += g * wg[r][j];
            }
            let expected = if i == j {
                Rational::one()
            } else {
                Rational::zero()
            };
            if acc != expected {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Memoized counter of monotone transposition factorizations.
///
/// A factorization of `σ` is a sequence `τ_1 ⋯ τ_m = σ` of transpositions
/// `τ_p = (i_p j_p)` with `i_p < j_p` and `j_p <= j_{p+1}`.
#[derive(Default)]
pub struct HurwitzCounter {
    memo: HashMap<(Vec<u8>, u8, u8), u128>,
}

impl HurwitzCounter {
    pub fn new() -> Self {
        Self::default()
    }

    /// `|P(σ, l)|`, the number of monotone factorizations of length `|σ| + l`.
    pub fn count(&mut self, sigma: &Permutation, l: usize) -> Result<u128> {
        let steps = sigma.length() + l;
        if steps > HURWITZ_DEPTH_CAP {
            return Err(Error::capacity(
                "Hurwitz factorization length",
                HURWITZ_DEPTH_CAP,
            ));
        }
        if sigma.degree() > u8::MAX as usize {
            return Err(Error::capacity("Hurwitz degree", u8::MAX as usize));
        }
        if l % 2 == 1 {
            return Ok(0);
        }
        let rem: Vec<u8> = sigma.images().iter().map(|&v| v as u8).collect();
        Ok(self.rec(rem, 0, steps as u8))
    }

    fn rec(&mut self, rem: Vec<u8>, min_j: u8, steps: u8) -> u128 {
        let dist = perm_length(&rem);
        if dist > steps as usize || (steps as usize - dist) % 2 == 1 {
            return 0;
        }
        if steps == 0 {
            return 1;
        }
        let key = (rem, min_j, steps);
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let (rem, _, _) = &key;
        let k = rem.len() as u8;
        let mut total = 0u128;
        for j in min_j.max(1)..k {
            for i in 0..j {
                // σ = τ ρ with ρ the remaining product, so ρ = τ σ.
                let mut next = rem.clone();
                for v in next.iter_mut() {
                    if *v == i {
                        *v = j;
                    } else if *v == j {
                        *v = i;
                    }
                }
                total += self.rec(next, j, steps - 1);
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

/// `|P(σ, l)|`; zero for odd `l`.
pub fn hurwitz_count(sigma: &Permutation, l: usize) -> Result<u128> {
    HurwitzCounter::new().count(sigma, l)
}

pub fn catalan(m: usize) -> u128 {
    let mut c: u128 = 1;
    for i in 0..m as u128 {
        c = c * 2 * (2 * i + 1) / (i + 2);
    }
    c
}

/// Complete homogeneous symmetric polynomials `h_0..=h_max` at `(1, 2, …, k-1)`.
/// `h_m` is the total number of monotone sequences of length `m` in `S_k`.
pub fn monotone_totals(k: usize, max: usize) -> Vec<BigUint> {
    let mut h = vec![BigUint::zero(); max + 1];
    h[0] = BigUint::one();
    for j in 1..k {
        let jj = BigUint::from(j);
        for m in 1..=max {
            let prev = h[m - 1].clone();
            h[m] += &jj * prev;
        }
    }
    h
}

/// Partial sum of the `1/n` expansion of `Wg(σ, n)` with a rigorous tail bound.
#[derive(Debug, Clone)]
pub struct SeriesApprox {
    pub partial: Rational,
    /// Exact tail bound from `|P(σ,l)| <= h_{|σ|+l}(1, …, k-1)`.
    pub tail_exact: Rational,
    /// Geometric tail from `|P(σ,2g)| <= 4^{|σ|} (6 k^{7/2})^g`, when that series converges.
    pub tail_geometric: Option<f64>,
}

impl SeriesApprox {
    /// The tightest available tail bound, as a float.
    pub fn tail_bound(&self) -> f64 {
        let e = rational_to_f64(&self.tail_exact);
        self.tail_geometric.map_or(e, |g| g.min(e))
    }

    /// True if `exact` lies within the tail bound of the partial sum.
    pub fn brackets(&self, exact: &Rational) -> bool {
        let diff = (exact - &self.partial).abs();
        if diff <= self.tail_exact {
            return true;
        }
        match self.tail_geometric {
            Some(g) => rational_to_f64(&diff) <= g * (1.0 + 1e-12),
            None => false,
        }
    }
}

/// `(−1)^{|σ|} n^{−k−|σ|} Σ_{g <= g_max} |P(σ,2g)| n^{−2g}` plus tail bounds.
pub fn wg_series(sigma: &Permutation, n: usize, g_max: usize) -> Result<SeriesApprox> {
    let mut counter = HurwitzCounter::new();
    wg_series_with(&mut counter, sigma, n, g_max)
}

pub fn wg_series_with(
    counter: &mut HurwitzCounter,
    sigma: &Permutation,
    n: usize,
    g_max: usize,
) -> Result<SeriesApprox> {
    let k = sigma.degree();
    if n < k {
        return Err(Error::UnsupportedRegime(format!(
            "series for Wg on S_{k} diverges at n = {n}"
        )));
    }
    let s = sigma.length();
    let inv_n = Rational::one() / Rational::from_integer(BigInt::from(n));
    let mut partial = Rational::zero();
    for g in 0..=g_max {
        let c = counter.count(sigma, 2 * g)?;
        partial += Rational::from_integer(BigInt::from(c)) * rpow(&inv_n, 2 * g);
    }
    let prefactor = rpow(&inv_n, k + s);
    partial *= &prefactor;
    if s % 2 == 1 {
        partial = -partial;
    }

    let (tail_exact, tail_geometric) = series_tail_bounds(k, s, n, g_max);
    Ok(SeriesApprox {
        partial,
        tail_exact,
        tail_geometric,
    })
}

/// Tail bounds for the terms `g > g_max` of the series of a permutation of
/// degree `k` and length `s`: the exact bound from `|P(σ,l)| <= h_{s+l}(1, …, k-1)`
/// and, when it converges, the geometric bound `n^{-k-s} 4^s x^{g_max+1} / (1 - x)`
/// with `x = 6 k^{7/2} / n^2`. Requires `n >= k`.
pub fn series_tail_bounds(k: usize, s: usize, n: usize, g_max: usize) -> (Rational, Option<f64>) {
    let inv_n = Rational::one() / Rational::from_integer(BigInt::from(n));
    // Σ_{m ≡ s (2)} h_m t^m = (F(t) + (−1)^s F(−t)) / 2 with F(t) = ∏ 1/(1 − j t).
    let f = |t: &Rational| -> Rational {
        let mut acc = Rational::one();
        for j in 1..k {
            acc /= Rational::one() - Rational::from_integer(BigInt::from(j)) * t;
        }
        acc
    };
    let mut full = f(&inv_n);
    let other = f(&(-inv_n.clone()));
    if s % 2 == 0 {
        full += other;
    } else {
        full -= other;
    }
    full /= Rational::from_integer(BigInt::from(2));
    let top = s + 2 * g_max;
    let h = monotone_totals(k, top);
    let mut head = Rational::zero();
    for (m, hm) in h.iter().enumerate().filter(|(m, _)| m % 2 == s % 2) {
        head += Rational::from_integer(BigInt::from(hm.clone())) * rpow(&inv_n, m);
    }
    let tail_exact = (full - head) * rpow(&inv_n, k);

    let x = 6.0 * (k as f64).powf(3.5) / (n as f64).powi(2);
    let tail_geometric = (x < 1.0).then(|| {
        (n as f64).powi(-((k + s) as i32)) * 4f64.powi(s as i32) * x.powi(g_max as i32 + 1)
            / (1.0 - x)
    });
    (tail_exact, tail_geometric)
}

pub(crate) fn rpow(base: &Rational, e: usize) -> Rational {
    num_traits::pow(base.clone(), e)
}

#[derive(Debug, Clone, Serialize)]
pub struct HurwitzBoundReport {
    pub k: usize,
    pub g: usize,
    pub checked: usize,
    pub violations: Vec<String>,
}

impl HurwitzBoundReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `(k−1)^g |P(σ,0)| <= |P(σ,2g)| <= (6k^{7/2})^g |P(σ,0)|` for every `σ ∈ S_k`.
/// The upper bound is compared after squaring, so the check is exact.
pub fn check_hurwitz_bounds(k: usize, g: usize) -> Result<HurwitzBoundReport> {
    let mut counter = HurwitzCounter::new();
    let mut violations = Vec::new();
    let perms = all_permutations(k)?;
    for sigma in &perms {
        let p0 = BigUint::from(counter.count(sigma, 0)?);
        let p2g = BigUint::from(counter.count(sigma, 2 * g)?);
        let lower = num_traits::pow(BigUint::from(k - 1), g) * &p0;
        let upper_sq = num_traits::pow(BigUint::from(36u32), g)
            * num_traits::pow(BigUint::from(k), 7 * g)
            * &p0
            * &p0;
        if lower > p2g {
            violations.push(format!(
                "{sigma}: lower bound {lower} > |P(σ,{})| = {p2g}",
                2 * g
            ));
        }
        if &p2g * &p2g > upper_sq {
            violations.push(format!(
                "{sigma}: |P(σ,{})| = {p2g} exceeds upper bound",
                2 * g
            ));
        }
    }
    Ok(HurwitzBoundReport {
        k,
        g,
        checked: perms.len(),
        violations,
    })
}

/// `(1 + 24 k^{7/2} n^{-2}) n^{-k-|σ|} 4^{|σ|}`.
pub fn wg_upper_bound(k: usize, sigma_length: usize, n: usize) -> f64 {
    let nf = n as f64;
    (1.0 + 24.0 * (k as f64).powf(3.5) / (nf * nf))
        * nf.powi(-((k + sigma_length) as i32))
        * 4f64.powi(sigma_length as i32)
}

/// `E(∏_l U_{x_l y_l} Ū_{x'_l y'_l})` over Haar-distributed `U ∈ U(n)`.
pub fn haar_moment(
    x: &[usize],
    y: &[usize],
    x2: &[usize],
    y2: &[usize],
    n: usize,
) -> Result<Rational> {
    let k = x.len();
    Error::check_len(k, y.len())?;
    Error::check_len(k, x2.len())?;
    Error::check_len(k, y2.len())?;
    if k == 0 {
        return Ok(Rational::one());
    }
    let table = wg_exact(k, n)?;
    let perms = all_permutations(k)?;
    let ps: Vec<&Permutation> = perms
        .iter()
        .filter(|p| (0..k).all(|l| x[l] == x2[p.image(l)]))
        .collect();
    let qs: Vec<&Permutation> = perms
        .iter()
        .filter(|q| (0..k).all(|l| y[l] == y2[q.image(l)]))
        .collect();
    let mut acc = Rational::zero();
    for p in &ps {
        for q in &qs {
            acc += table.entry(p, q);
        }
    }
    Ok(acc)
}

/// `E(∏_i U^{ε_i}_{x_i y_i})`; zero when `eps` is unbalanced.
pub fn haar_moment_signed(
    x: &[usize],
    y: &[usize],
    eps: &EpsilonSequence,
    n: usize,
) -> Result<Rational> {
    Error::check_len(eps.len(), x.len())?;
    Error::check_len(eps.len(), y.len())?;
    if !eps.is_balanced() {
        return Ok(Rational::zero());
    }
    let pick = |v: &[usize], s: Sign| -> Vec<usize> {
        eps.signs()
            .iter()
            .zip(v)
            .filter_map(|(&e, &val)| (e == s).then_some(val))
            .collect()
    };
    haar_moment(
        &pick(x, Sign::Dot),
        &pick(y, Sign::Dot),
        &pick(x, Sign::Bar),
        &pick(y, Sign::Bar),
        n,
    )
}

/// Exact orthogonal Weingarten matrix indexed by the pair partitions of `0..k`.
#[derive(Debug, Clone)]
pub struct OrthWeingartenTable {
    pub k: usize,
    pub n: usize,
    pub partitions: Vec<PairPartition>,
    pub matrix: Vec<Vec<Rational>>,
    index: HashMap<PairPartition, usize>,
}

impl OrthWeingartenTable {
    pub fn value(&self, p: &PairPartition, q: &PairPartition) -> &Rational {
        &self.matrix[self.index[p]][self.index[q]]
    }

    /// Values grouped by the class of `(p, q)` under simultaneous relabeling,
    /// which is determined by the block sizes of `p ∨ q`.
    pub fn values_by_class(&self) -> BTreeMap<Vec<usize>, Rational> {
        let mut out = BTreeMap::new();
        for (i, p) in self.partitions.iter().enumerate() {
            for (j, q) in self.partitions.iter().enumerate() {
                let joined =
                    join(&p.to_set_partition(), &q.to_set_partition()).expect("same ground set");
                let mut sizes: Vec<usize> = joined.blocks().iter().map(|b| b.len() / 2).collect();
                sizes.sort_unstable_by(|a, b| b.cmp(a));
                out.entry(sizes)
                    .or_insert_with(|| self.matrix[i][j].clone());
            }
        }
        out
    }
}

fn orth_cache() -> &'static Mutex<HashMap<(usize, usize), Arc<OrthWeingartenTable>>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<OrthWeingartenTable>>>> =
        OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Inverse of the Gram matrix `[n^{#blocks(p ∨ q)}]` over pair partitions of `0..k`.
pub fn wg_orth_exact(k: usize, n: usize) -> Result<Arc<OrthWeingartenTable>> {
    if k == 0 || k % 2 == 1 {
        return Err(Error::Invalid(format!(
            "orthogonal Weingarten needs even positive k, got {k}"
        )));
    }
    if let Some(t) = orth_cache().lock().expect("cache poisoned").get(&(k, n)) {
        return Ok(Arc::clone(t));
    }
    let partitions = enumerate_pair_partitions(k)?;
    let sets: Vec<_> = partitions
        .iter()
        .map(PairPartition::to_set_partition)
        .collect();
    let gram: Vec<Vec<BigInt>> = sets
        .iter()
        .map(|p| {
            sets.iter()
                .map(|q| {
                    big_pow(
                        n as u64,
                        join(p, q).expect("same ground set").num_blocks() as u32,
                    )
                })
                .collect()
        })
        .collect();
    let matrix = exact::inverse_integer(&gram).ok_or_else(|| {
        Error::UnsupportedRegime(format!(
            "orthogonal Gram matrix singular for k = {k}, n = {n}"
        ))
    })?;
    let index = partitions
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, p)| (p, i))
        .collect();
    let table = Arc::new(OrthWeingartenTable {
        k,
        n,
        partitions,
        matrix,
        index,
    });
    orth_cache()
        .lock()
        .expect("cache poisoned")
        .insert((k, n), Arc::clone(&table));
    Ok(table)
}

/// `E(∏_i O_{x_i y_i})` over Haar-distributed `O ∈ O(n)`.
pub fn haar_moment_orth(x: &[usize], y: &[usize], n: usize) -> Result<Rational> {
    let k = x.len();
    Error::check_len(k, y.len())?;
    if k == 0 {
        return Ok(Rational::one());
    }
    if k % 2 == 1 {
        return Ok(Rational::zero());
    }
    let table = wg_orth_exact(k, n)?;
    let ps: Vec<usize> = (0..table.partitions.len())
        .filter(|&i| table.partitions[i].delta(x).unwrap_or(false))
        .collect();
    let qs: Vec<usize> = (0..table.partitions.len())
        .filter(|&i| table.partitions[i].delta(y).unwrap_or(false))
        .collect();
    let mut acc = Rational::zero();
    for &i in &ps {
        for &j in &qs {
            acc += &table.matrix[i][j];
        }
    }
    Ok(acc)
}

/// `Wg` values as `f64`, keyed like the table.
pub fn table_as_f64(table: &WeingartenTable) -> BTreeMap<CycleType, f64> {
    table
        .values
        .iter()
        .map(|(c, v)| (c.clone(), v.to_f64().unwrap_or_else(|| rational_to_f64(v))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;
    use crate::symcore::Permutation;

    fn cyc(k: usize, cycles: &[&[usize]]) -> Permutation {
        Permutation::from_cycles_one_based(k, cycles).unwrap()
    }

    #[test]
    fn k1_and_k2_closed_forms() {
        for n in 1..8usize {
            let t = wg_exact(1, n).unwrap();
            assert_eq!(t.value(&Permutation::identity(1)), &rat(1, n as i64));
        }
        for n in 2..9i64 {
            let t = wg_exact(2, n as usize).unwrap();
            assert_eq!(t.value(&Permutation::identity(2)), &rat(1, n * n - 1));
            assert_eq!(t.value(&cyc(2, &[&[1, 2]])), &rat(-1, n * (n * n - 1)));
        }
        let t = wg_exact(2, 2).unwrap();
        assert_eq!(t.value(&Permutation::identity(2)), &rat(1, 3));
        assert_eq!(t.value(&cyc(2, &[&[1, 2]])), &rat(-1, 6));
    }

    #[test]
    fn k3_known_value() {
        // Wg([1,1,1], n) = (n^2 - 2) / (n (n^2 - 1)(n^2 - 4))
        let n = 5i64;
        let t = wg_exact(3, 5).unwrap();
        assert_eq!(
            t.value(&Permutation::identity(3)),
            &rat(n * n - 2, n * (n * n - 1) * (n * n - 4))
        );
        assert_eq!(
            t.value(&cyc(3, &[&[1, 2, 3]])),
            &rat(2, n * (n * n - 1) * (n * n - 4))
        );
    }

    #[test]
    fn rejects_k_above_n() {
        assert!(matches!(wg_exact(3, 2), Err(Error::UnsupportedRegime(_))));
    }

    #[test]
    fn gram_identity_small() {
        for k in 1..=3 {
            for n in k..=5 {
                assert!(gram_inverse_holds(&wg_exact(k, n).unwrap()).unwrap());
            }
        }
    }

    #[test]
    fn hurwitz_small_counts() {
        assert_eq!(hurwitz_count(&Permutation::identity(2), 0).unwrap(), 1);
        assert_eq!(hurwitz_count(&Permutation::identity(2), 2).unwrap(), 1);
        assert_eq!(hurwitz_count(&Permutation::identity(2), 1).unwrap(), 0);
        assert_eq!(hurwitz_count(&cyc(3, &[&[1, 2, 3]]), 0).unwrap(), 2);
        assert_eq!(hurwitz_count(&Permutation::identity(1), 4).unwrap(), 0);
        assert!(hurwitz_count(&Permutation::identity(3), 40).is_err());
    }

    #[test]
    fn catalan_numbers() {
        let expected = [1u128, 1, 2, 5, 14, 42, 132];
        for (m, &c) in expected.iter().enumerate() {
            assert_eq!(catalan(m), c);
        }
    }

    #[test]
    fn series_for_identity_in_s1_is_exact() {
        let s = wg_series(&Permutation::identity(1), 7, 3).unwrap();
        assert_eq!(s.partial, rat(1, 7));
        assert!(s.tail_exact.is_zero());
    }

    #[test]
    fn series_k2_n16() {
        let id = Permutation::identity(2);
        let s = wg_series(&id, 16, 3).unwrap();
        let inv = rat(1, 256);
        let expected = &inv * (rat(1, 1) + &inv + &inv * &inv + &inv * &inv * &inv);
        assert_eq!(s.partial, expected);
        assert!(s.brackets(&rat(1, 255)));
        let t = cyc(2, &[&[1, 2]]);
        let s = wg_series(&t, 16, 3).unwrap();
        assert!(s.partial < Rational::zero());
        assert!(s.brackets(&rat(-1, 16 * 255)));
    }

    #[test]
    fn known_unitary_moments() {
        for n in 2..=8i64 {
            let nu = n as usize;
            assert_eq!(
                haar_moment(&[1, 1], &[1, 1], &[1, 1], &[1, 1], nu).unwrap(),
                rat(2, n * (n + 1))
            );
            assert_eq!(
                haar_moment(&[1, 2], &[1, 2], &[1, 2], &[1, 2], nu).unwrap(),
                rat(1, n * n - 1)
            );
            assert_eq!(
                haar_moment(&[1, 1], &[1, 2], &[1, 1], &[1, 2], nu).unwrap(),
                rat(1, n * (n + 1))
            );
        }
    }

    #[test]
    fn signed_moments() {
        let e = |s: &str| EpsilonSequence::parse(s).unwrap();
        assert!(haar_moment_signed(&[1, 1], &[1, 1], &e(".."), 3)
            .unwrap()
            .is_zero());
        assert_eq!(
            haar_moment_signed(&[1, 1], &[1, 1], &e(".-"), 5).unwrap(),
            rat(1, 5)
        );
        assert_eq!(
            haar_moment_signed(&[1, 2, 1, 2], &[1, 2, 1, 2], &e("..--"), 4).unwrap(),
            rat(1, 15)
        );
    }

    #[test]
    fn orthogonal_spot_values() {
        assert_eq!(wg_orth_exact(2, 5).unwrap().matrix[0][0], rat(1, 5));
        assert_eq!(
            haar_moment_orth(&[1, 1, 1, 1], &[1, 1, 1, 1], 4).unwrap(),
            rat(1, 8)
        );
        assert_eq!(
            haar_moment_orth(&[1, 1, 2, 2], &[1, 1, 2, 2], 4).unwrap(),
            rat(5, 72)
        );
        assert!(wg_orth_exact(3, 4).is_err());
    }
}

//! Permutations, pair partitions, set partitions and sign sequences.
//!
//! Everything is stored 0-based. Constructors named `*_one_based` accept the
//! 1-based notation used in the mathematical literature.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest degree for which `S_k` may be enumerated.
pub const SYMMETRIC_GROUP_CAP: usize = 8;
/// Largest ground set size for which pair partitions may be enumerated.
pub const PAIR_PARTITION_CAP: usize = 12;
/// Largest ground set size for which all set partitions may be enumerated.
pub const SET_PARTITION_CAP: usize = 10;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    images: Vec<usize>,
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(images: Vec<usize>) -> Result<Self> {
        Permutation::from_images(images)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.images
    }
}

impl Permutation {
    pub fn identity(k: usize) -> Self {
        Self {
            images: (0..k).collect(),
        }
    }

    /// Builds a permutation from 0-based one-line notation.
    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let k = images.len();
        let mut seen = vec![false; k];
        for &v in &images {
            if v >= k || seen[v] {
                return Err(Error::Invalid(format!(
                    "{images:?} is not a permutation of 0..{k}"
                )));
            }
            seen[v] = true;
        }
        Ok(Self { images })
    }

    /// Builds a permutation from 1-based one-line notation.
    pub fn from_one_based(images: &[usize]) -> Result<Self> {
        if images.contains(&0) {
            return Err(Error::Invalid("one-based images must be positive".into()));
        }
        Self::from_images(images.iter().map(|&v| v - 1).collect())
    }

    /// Builds a permutation of degree `k` from disjoint 1-based cycles.
    pub fn from_cycles_one_based(k: usize, cycles: &[&[usize]]) -> Result<Self> {
        let mut images: Vec<usize> = (0..k).collect();
        let mut used = vec![false; k];
        for cycle in cycles {
            for (pos, &a) in cycle.iter().enumerate() {
                let b = cycle[(pos + 1) % cycle.len()];
                if a == 0 || b == 0 || a > k || b > k || used[a - 1] {
                    return Err(Error::Invalid(format!(
                        "bad cycle {cycle:?} for degree {k}"
                    )));
                }
                used[a - 1] = true;
                images[a - 1] = b - 1;
            }
        }
        Self::from_images(images)
    }

    /// The transposition swapping the 0-based points `i` and `j`.
    pub fn transposition(k: usize, i: usize, j: usize) -> Self {
        let mut images: Vec<usize> = (0..k).collect();
        images.swap(i, j);
        Self { images }
    }

    pub fn degree(&self) -> usize {
        self.images.len()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn image(&self, i: usize) -> usize {
        self.images[i]
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &v)| i == v)
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        assert_eq!(self.degree(), other.degree(), "degree mismatch in compose");
        Permutation {
            images: other.images.iter().map(|&j| self.images[j]).collect(),
        }
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.degree()];
        for (i, &v) in self.images.iter().enumerate() {
            inv[v] = i;
        }
        Permutation { images: inv }
    }

    /// Cycles as 0-based point lists, each starting at its smallest point.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let k = self.degree();
        let mut seen = vec![false; k];
        let mut out = Vec::new();
        for start in 0..k {
            if seen[start] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut x = start;
            while !seen[x] {
                seen[x] = true;
                cycle.push(x);
                x = self.images[x];
            }
            out.push(cycle);
        }
        out
    }

    pub fn num_cycles(&self) -> usize {
        self.cycles().len()
    }

    pub fn cycle_type(&self) -> CycleType {
        let mut parts: Vec<usize> = self.cycles().iter().map(Vec::len).collect();
        parts.sort_unstable_by(|a, b| b.cmp(a));
        CycleType(parts)
    }

    /// `|σ| = k − ℓ(σ)`.
    pub fn length(&self) -> usize {
        self.degree() - self.num_cycles()
    }

    pub fn sign(&self) -> i32 {
        if self.length() % 2 == 0 {
            1
        } else {
            -1
        }
    }

    /// Restriction to a subset of points that the permutation maps to itself.
    pub fn restrict(&self, points: &[usize]) -> Option<Permutation> {
        let mut pos = vec![usize::MAX; self.degree()];
        for (i, &p) in points.iter().enumerate() {
            pos[p] = i;
        }
        let images: Option<Vec<usize>> = points
            .iter()
            .map(|&p| {
                let t = pos[self.images[p]];
                (t != usize::MAX).then_some(t)
            })
            .collect();
        images.map(|images| Permutation { images })
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cycles: Vec<Vec<usize>> = self.cycles().into_iter().filter(|c| c.len() > 1).collect();
        if cycles.is_empty() {
            return write!(f, "()");
        }
        for c in cycles {
            let body: Vec<String> = c.iter().map(|v| (v + 1).to_string()).collect();
            write!(f, "({})", body.join(" "))?;
        }
        Ok(())
    }
}

/// Integer partition listing cycle lengths in nonincreasing order.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct CycleType(pub Vec<usize>);

impl CycleType {
    pub fn degree(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn num_parts(&self) -> usize {
        self.0.len()
    }

    /// `k − ℓ` for any permutation of this type.
    pub fn length(&self) -> usize {
        self.degree() - self.num_parts()
    }

    /// A permutation of this type whose cycles are consecutive intervals.
    pub fn representative(&self) -> Permutation {
        let k = self.degree();
        let mut images = vec![0; k];
        let mut start = 0;
        for &len in &self.0 {
            for i in 0..len {
                images[start + i] = start + (i + 1) % len;
            }
            start += len;
        }
        Permutation { images }
    }
}

impl fmt::Display for CycleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

pub fn cycle_type(sigma: &Permutation) -> CycleType {
    sigma.cycle_type()
}

pub fn transposition_distance(sigma: &Permutation) -> usize {
    sigma.length()
}

/// All integer partitions of `k`, each nonincreasing, in reverse lexicographic order.
pub fn integer_partitions(k: usize) -> Vec<CycleType> {
    fn rec(rem: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<CycleType>) {
        if rem == 0 {
            out.push(CycleType(cur.clone()));
            return;
        }
        for part in (1..=max.min(rem)).rev() {
            cur.push(part);
            rec(rem - part, part, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, k, &mut Vec::new(), &mut out);
    out
}

/// All permutations of degree `k` in lexicographic order of one-line notation.
pub fn all_permutations(k: usize) -> Result<Vec<Permutation>> {
    if k > SYMMETRIC_GROUP_CAP {
        return Err(Error::capacity(
            "symmetric group degree",
            SYMMETRIC_GROUP_CAP,
        ));
    }
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(Permutation {
            images: cur.clone(),
        });
        // next lexicographic permutation
        let Some(i) = (1..k).rev().find(|&i| cur[i - 1] < cur[i]) else {
            break;
        };
        let j = (i..k)
            .rev()
            .find(|&j| cur[j] > cur[i - 1])
            .expect("successor exists");
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    Ok(out)
}

/// `δ_σ(x, y) = ∏_l δ(x_l, y_{σ(l)})`.
pub fn delta_perm<T: PartialEq>(sigma: &Permutation, x: &[T], y: &[T]) -> Result<bool> {
    Error::check_len(sigma.degree(), x.len())?;
    Error::check_len(sigma.degree(), y.len())?;
    Ok((0..sigma.degree()).all(|l| x[l] == y[sigma.image(l)]))
}

/// A perfect matching of `0..k`, pairs `(i, j)` with `i < j` sorted by `i`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct PairPartition {
    k: usize,
    pairs: Vec<(usize, usize)>,
}

impl PairPartition {
    pub fn new(k: usize, pairs: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = vec![false; k];
        let mut canon = Vec::with_capacity(pairs.len());
        for (a, b) in pairs {
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if i == j || j >= k || seen[i] || seen[j] {
                return Err(Error::Invalid(format!(
                    "invalid pair ({a}, {b}) for k = {k}"
                )));
            }
            seen[i] = true;
            seen[j] = true;
            canon.push((i, j));
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Invalid("pairs do not cover the ground set".into()));
        }
        canon.sort_unstable();
        Ok(Self { k, pairs: canon })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn partner(&self, i: usize) -> usize {
        self.pairs
            .iter()
            .find_map(|&(a, b)| {
                if a == i {
                    Some(b)
                } else if b == i {
                    Some(a)
                } else {
                    None
                }
            })
            .expect("point outside the ground set")
    }

    pub fn to_set_partition(&self) -> SetPartition {
        SetPartition::from_blocks_unchecked(
            self.k,
            self.pairs.iter().map(|&(a, b)| vec![a, b]).collect(),
        )
    }

    /// `δ_p(x) = ∏_{(i,j) ∈ p} δ(x_i, x_j)`.
    pub fn delta<T: PartialEq>(&self, x: &[T]) -> Result<bool> {
        Error::check_len(self.k, x.len())?;
        Ok(self.pairs.iter().all(|&(a, b)| x[a] == x[b]))
    }
}

pub fn enumerate_pair_partitions(k: usize) -> Result<Vec<PairPartition>> {
    enumerate_pair_partitions_capped(k, PAIR_PARTITION_CAP)
}

pub fn enumerate_pair_partitions_capped(k: usize, cap: usize) -> Result<Vec<PairPartition>> {
    if k % 2 == 1 {
        return Ok(Vec::new());
    }
    if k > cap {
        return Err(Error::capacity("pair partition ground set", cap));
    }
    fn rec(
        free: &mut Vec<usize>,
        cur: &mut Vec<(usize, usize)>,
        k: usize,
        out: &mut Vec<PairPartition>,
    ) {
        if free.is_empty() {
            out.push(PairPartition {
                k,
                pairs: cur.clone(),
            });
            return;
        }
        let first = free.remove(0);
        for idx in 0..free.len() {
            let partner = free.remove(idx);
            cur.push((first, partner));
            rec(free, cur, k, out);
            cur.pop();
            free.insert(idx, partner);
        }
        free.insert(0, first);
    }
    let mut out = Vec::new();
    rec(&mut (0..k).collect(), &mut Vec::new(), k, &mut out);
    Ok(out)
}

/// A partition of `0..k` into nonempty blocks. Blocks are sorted and ordered
/// by their smallest element, so equality is structural.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct SetPartition {
    k: usize,
    blocks: Vec<Vec<usize>>,
}

impl SetPartition {
    pub fn new(k: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; k];
        for block in &blocks {
            if block.is_empty() {
                return Err(Error::Invalid("empty block".into()));
            }
            for &i in block {
                if i >= k || seen[i] {
                    return Err(Error::Invalid(format!(
                        "point {i} repeated or outside 0..{k}"
                    )));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Invalid("blocks do not cover the ground set".into()));
        }
        Ok(Self::from_blocks_unchecked(k, blocks))
    }

    pub fn new_one_based(k: usize, blocks: &[&[usize]]) -> Result<Self> {
        let blocks = blocks
            .iter()
            .map(|b| {
                b.iter()
                    .map(|&v| {
                        v.checked_sub(1)
                            .ok_or_else(|| Error::Invalid("zero point".into()))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(k, blocks)
    }

    fn from_blocks_unchecked(k: usize, mut blocks: Vec<Vec<usize>>) -> Self {
        for b in &mut blocks {
            b.sort_unstable();
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Self { k, blocks }
    }

    /// Partition whose blocks are the level sets of `labels`.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut index = std::collections::HashMap::new();
        for (i, &l) in labels.iter().enumerate() {
            let slot = *index.entry(l).or_insert_with(|| {
                blocks.push(Vec::new());
                blocks.len() - 1
            });
            blocks[slot].push(i);
        }
        Self::from_blocks_unchecked(labels.len(), blocks)
    }

    pub fn singletons(k: usize) -> Self {
        Self::from_blocks_unchecked(k, (0..k).map(|i| vec![i]).collect())
    }

    pub fn single_block(k: usize) -> Self {
        if k == 0 {
            return Self { k, blocks: vec![] };
        }
        Self::from_blocks_unchecked(k, vec![(0..k).collect()])
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// `labels[i]` is the index of the block containing `i`.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.k];
        for (b, block) in self.blocks.iter().enumerate() {
            for &i in block {
                labels[i] = b;
            }
        }
        labels
    }

    /// True if every block of `finer` lies inside a block of `self`.
    pub fn is_coarser_than(&self, finer: &SetPartition) -> bool {
        let labels = self.labels();
        self.k == finer.k
            && finer
                .blocks
                .iter()
                .all(|b| b.iter().all(|&i| labels[i] == labels[b[0]]))
    }

    /// The partition obtained by merging the blocks whose indices are set in `mask`
    /// into one block, keeping the others.
    pub fn merge_blocks(&self, mask: u64) -> SetPartition {
        let mut merged = Vec::new();
        let mut rest = Vec::new();
        for (t, block) in self.blocks.iter().enumerate() {
            if mask >> t & 1 == 1 {
                merged.extend_from_slice(block);
            } else {
                rest.push(block.clone());
            }
        }
        if !merged.is_empty() {
            rest.push(merged);
        }
        Self::from_blocks_unchecked(self.k, rest)
    }
}

impl fmt::Display for SetPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .blocks
            .iter()
            .map(|b| {
                let v: Vec<String> = b.iter().map(|i| (i + 1).to_string()).collect();
                format!("{{{}}}", v.join(","))
            })
            .collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Finest partition coarser than both `p` and `q`.
pub fn join(p: &SetPartition, q: &SetPartition) -> Result<SetPartition> {
    if p.k != q.k {
        return Err(Error::LengthMismatch {
            expected: p.k,
            got: q.k,
        });
    }
    let mut parent: Vec<usize> = (0..p.k).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for block in p.blocks.iter().chain(&q.blocks) {
        for w in block.windows(2) {
            let a = find(&mut parent, w[0]);
            let b = find(&mut parent, w[1]);
            parent[a] = b;
        }
    }
    let labels: Vec<usize> = (0..p.k).map(|i| find(&mut parent, i)).collect();
    Ok(SetPartition::from_labels(&labels))
}

/// All set partitions of `0..k` (restricted growth strings).
pub fn all_set_partitions(k: usize) -> Result<Vec<SetPartition>> {
    if k > SET_PARTITION_CAP {
        return Err(Error::capacity(
            "set partition ground set",
            SET_PARTITION_CAP,
        ));
    }
    fn rec(i: usize, max: usize, labels: &mut Vec<usize>, out: &mut Vec<SetPartition>) {
        if i == labels.len() {
            out.push(SetPartition::from_labels(labels));
            return;
        }
        for l in 0..=max {
            labels[i] = l;
            rec(i + 1, if l == max { max + 1 } else { max }, labels, out);
        }
    }
    let mut out = Vec::new();
    if k == 0 {
        out.push(SetPartition::single_block(0));
        return Ok(out);
    }
    let mut labels = vec![0; k];
    rec(1, 1, &mut labels, &mut out);
    Ok(out)
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub enum Sign {
    /// Unconjugated factor `U`.
    Dot,
    /// Conjugated factor `Ū`.
    Bar,
}

#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct EpsilonSequence {
    signs: Vec<Sign>,
}

impl EpsilonSequence {
    pub fn new(signs: Vec<Sign>) -> Self {
        Self { signs }
    }

    /// Parses a string over `.`/`+`/`·` (dot) and `-`/`−`/`*` (bar).
    pub fn parse(s: &str) -> Result<Self> {
        s.chars()
            .filter(|c| !c.is_whitespace() && *c != ',')
            .map(|c| match c {
                '.' | '+' | '·' => Ok(Sign::Dot),
                '-' | '−' | '*' => Ok(Sign::Bar),
                other => Err(Error::Invalid(format!("unknown sign character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn signs(&self) -> &[Sign] {
        &self.signs
    }

    pub fn dots(&self) -> Vec<usize> {
        self.positions(Sign::Dot)
    }

    pub fn bars(&self) -> Vec<usize> {
        self.positions(Sign::Bar)
    }

    fn positions(&self, s: Sign) -> Vec<usize> {
        self.signs
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| (v == s).then_some(i))
            .collect()
    }

    pub fn is_balanced(&self) -> bool {
        2 * self.dots().len() == self.signs.len()
    }

    /// Restriction to the given positions.
    pub fn restrict(&self, positions: &[usize]) -> EpsilonSequence {
        Self::new(positions.iter().map(|&i| self.signs[i]).collect())
    }
}

impl fmt::Display for EpsilonSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.signs {
            f.write_str(match s {
                Sign::Dot => ".",
                Sign::Bar => "-",
            })?;
        }
        Ok(())
    }
}

/// A pair partition joining each dot position to a bar position, stored as
/// the bijection `hat`: the `a`-th dot (in position order) is paired with the
/// `hat(a)`-th bar.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct EpsilonMatching {
    dots: Vec<usize>,
    bars: Vec<usize>,
    hat: Permutation,
}

impl EpsilonMatching {
    pub fn from_bijection(eps: &EpsilonSequence, hat: Permutation) -> Result<Self> {
        let dots = eps.dots();
        let bars = eps.bars();
        if dots.len() != bars.len() {
            return Err(Error::Invalid("sign sequence is not balanced".into()));
        }
        Error::check_len(dots.len(), hat.degree())?;
        Ok(Self { dots, bars, hat })
    }

    pub fn from_pair_partition(eps: &EpsilonSequence, p: &PairPartition) -> Result<Self> {
        let dots = eps.dots();
        let bars = eps.bars();
        Error::check_len(eps.len(), p.k())?;
        let mut images = Vec::with_capacity(dots.len());
        for &d in &dots {
            let partner = p.partner(d);
            let c = bars
                .iter()
                .position(|&b| b == partner)
                .ok_or_else(|| Error::Invalid("pair does not join a dot to a bar".into()))?;
            images.push(c);
        }
        Self::from_bijection(eps, Permutation::from_images(images)?)
    }

    pub fn k(&self) -> usize {
        2 * self.dots.len()
    }

    pub fn hat(&self) -> &Permutation {
        &self.hat
    }

    pub fn dot_positions(&self) -> &[usize] {
        &self.dots
    }

    pub fn bar_positions(&self) -> &[usize] {
        &self.bars
    }

    pub fn pairs(&self) -> PairPartition {
        let pairs = self
            .dots
            .iter()
            .enumerate()
            .map(|(a, &d)| (d, self.bars[self.hat.image(a)]))
            .collect();
        PairPartition::new(self.k(), pairs).expect("matching is a valid pair partition")
    }

    /// `δ_p(x) = ∏_a δ(x_{dot a}, x_{bar hat(a)})`.
    pub fn delta<T: PartialEq>(&self, x: &[T]) -> Result<bool> {
        Error::check_len(self.k(), x.len())?;
        Ok(self
            .dots
            .iter()
            .enumerate()
            .all(|(a, &d)| x[d] == x[self.bars[self.hat.image(a)]]))
    }

    /// True if every pair of the matching lies inside or outside `block`.
    pub fn respects(&self, block: &[usize]) -> bool {
        let mut inside = vec![false; self.k()];
        for &i in block {
            inside[i] = true;
        }
        self.dots
            .iter()
            .enumerate()
            .all(|(a, &d)| inside[d] == inside[self.bars[self.hat.image(a)]])
    }
}

/// All ε-matchings; empty when `eps` is unbalanced.
pub fn epsilon_matchings(eps: &EpsilonSequence) -> Result<Vec<EpsilonMatching>> {
    if !eps.is_balanced() {
        return Ok(Vec::new());
    }
    all_permutations(eps.len() / 2)?
        .into_iter()
        .map(|hat| EpsilonMatching::from_bijection(eps, hat))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn perm(cycles: &[&[usize]], k: usize) -> Permutation {
        Permutation::from_cycles_one_based(k, cycles).unwrap()
    }

    #[test]
    fn cycle_types_of_small_permutations() {
        assert_eq!(cycle_type(&Permutation::identity(3)).0, vec![1, 1, 1]);
        assert_eq!(cycle_type(&perm(&[&[1, 2]], 2)).0, vec![2]);
        assert_eq!(cycle_type(&perm(&[&[1, 2, 3]], 3)).0, vec![3]);
        assert_eq!(transposition_distance(&Permutation::identity(4)), 0);
        assert_eq!(transposition_distance(&perm(&[&[1, 2]], 2)), 1);
        assert_eq!(transposition_distance(&perm(&[&[1, 2, 3]], 3)), 2);
    }

    #[test]
    fn permutation_group_laws() {
        for p in all_permutations(4).unwrap() {
            assert!(p.compose(&p.inverse()).is_identity());
            assert_eq!(p.cycle_type(), p.inverse().cycle_type());
        }
        assert_eq!(all_permutations(5).unwrap().len(), 120);
        assert!(all_permutations(9).is_err());
    }

    #[test]
    fn display_uses_one_based_cycles() {
        assert_eq!(perm(&[&[1, 3], &[2, 4]], 4).to_string(), "(1 3)(2 4)");
        assert_eq!(Permutation::identity(2).to_string(), "()");
    }

    #[test]
    fn cycle_type_representative_round_trip() {
        for ct in integer_partitions(6) {
            assert_eq!(ct.representative().cycle_type(), ct);
        }
        assert_eq!(integer_partitions(6).len(), 11);
    }

    #[test]
    fn pair_partition_counts() {
        assert_eq!(enumerate_pair_partitions(2).unwrap().len(), 1);
        assert_eq!(enumerate_pair_partitions(4).unwrap().len(), 3);
        assert_eq!(enumerate_pair_partitions(6).unwrap().len(), 15);
        assert!(enumerate_pair_partitions(5).unwrap().is_empty());
        assert!(enumerate_pair_partitions(14).is_err());
        let four = enumerate_pair_partitions(4).unwrap();
        assert_eq!(four[0].pairs(), &[(0, 1), (2, 3)]);
    }

    #[test]
    fn epsilon_matching_counts() {
        let e = |s: &str| EpsilonSequence::parse(s).unwrap();
        assert_eq!(epsilon_matchings(&e(".-")).unwrap().len(), 1);
        assert!(epsilon_matchings(&e("..")).unwrap().is_empty());
        assert_eq!(epsilon_matchings(&e("..--")).unwrap().len(), 2);
        assert_eq!(epsilon_matchings(&e(".-.-.-")).unwrap().len(), 6);
    }

    #[test]
    fn matching_round_trips_through_pair_partition() {
        let eps = EpsilonSequence::parse(".-.-").unwrap();
        for m in epsilon_matchings(&eps).unwrap() {
            let back = EpsilonMatching::from_pair_partition(&eps, &m.pairs()).unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn join_examples() {
        let p = SetPartition::new_one_based(4, &[&[1, 2], &[3, 4]]).unwrap();
        let q = SetPartition::new_one_based(4, &[&[2, 3], &[1, 4]]).unwrap();
        assert_eq!(join(&p, &q).unwrap(), SetPartition::single_block(4));
        assert_eq!(join(&p, &p).unwrap(), p);
        assert_eq!(join(&p, &SetPartition::singletons(4)).unwrap(), p);
        assert!(join(&p, &SetPartition::singletons(3)).is_err());
    }

    #[test]
    fn bell_numbers() {
        let bell = [1, 1, 2, 5, 15, 52, 203];
        for (k, &b) in bell.iter().enumerate() {
            assert_eq!(all_set_partitions(k).unwrap().len(), b);
        }
    }

    #[test]
    fn delta_perm_examples() {
        let id = Permutation::identity(2);
        let t = perm(&[&[1, 2]], 2);
        assert!(delta_perm(&id, &[1, 2], &[1, 2]).unwrap());
        assert!(delta_perm(&t, &[1, 2], &[2, 1]).unwrap());
        assert!(!delta_perm(&id, &[1, 2], &[2, 1]).unwrap());
        assert!(delta_perm(&id, &[1], &[1, 2]).is_err());
    }

    #[test]
    fn merge_blocks_builds_coarser_partition() {
        let pi = SetPartition::new_one_based(6, &[&[1, 2], &[3, 4], &[5, 6]]).unwrap();
        let merged = pi.merge_blocks(0b101);
        assert_eq!(
            merged,
            SetPartition::new_one_based(6, &[&[1, 2, 5, 6], &[3, 4]]).unwrap()
        );
        assert!(merged.is_coarser_than(&pi));
    }
}

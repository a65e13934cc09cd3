//! Permutations on `[n]`, lexicographic enumeration of `S_n` and `A_n`,
//! cyclic shifts, setwise stabilizers and exact integer helpers.
//!
//! Positions are 1-based at the API boundary; storage is 0-based.

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{QsiError, Result};
use crate::par::{map_indexed, Exec};

/// Largest `n` for which the symmetric group is enumerated.
pub const MAX_ENUM_N: usize = 10;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self {
            map: (0..n).collect(),
        }
    }

    /// One-line notation, 1-based: `images[i-1]` is the image of `i`.
    pub fn from_one_line(images: &[usize]) -> Result<Self> {
        if images.contains(&0) {
            return Err(QsiError::InvalidPermutation(
                "one-line notation is 1-based".into(),
            ));
        }
        Self::from_zero_based(images.iter().map(|&x| x - 1).collect())
    }

    pub fn from_zero_based(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        if n == 0 {
            return Err(QsiError::InvalidPermutation("empty permutation".into()));
        }
        let mut seen = vec![false; n];
        for &x in &map {
            if x >= n || seen[x] {
                return Err(QsiError::InvalidPermutation(format!(
                    "{map:?} is not a bijection"
                )));
            }
            seen[x] = true;
        }
        Ok(Self { map })
    }

    /// Exchanges positions `a` and `b` (1-based).
    pub fn transposition(n: usize, a: usize, b: usize) -> Result<Self> {
        if a == 0 || b == 0 || a > n || b > n || a == b {
            return Err(QsiError::InvalidPermutation(format!(
                "bad transposition ({a} {b}) on {n} points"
            )));
        }
        let mut p = Self::identity(n);
        p.map.swap(a - 1, b - 1);
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.map.len()
    }

    /// Image of position `i` (1-based).
    pub fn image(&self, i: usize) -> usize {
        self.map[i - 1] + 1
    }

    pub fn zero_based(&self) -> &[usize] {
        &self.map
    }

    pub fn one_line(&self) -> Vec<usize> {
        self.map.iter().map(|x| x + 1).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &x)| i == x)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        assert_eq!(self.n(), other.n(), "composing permutations of different degree");
        Permutation {
            map: other.map.iter().map(|&x| self.map[x]).collect(),
        }
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.n()];
        for (i, &x) in self.map.iter().enumerate() {
            inv[x] = i;
        }
        Permutation { map: inv }
    }

    pub fn sign(&self) -> i8 {
        sign_of(&self.map)
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Perm{:?}", self.one_line())
    }
}

pub(crate) fn sign_of(map: &[usize]) -> i8 {
    let n = map.len();
    let mut seen = [false; 64];
    let mut seen_vec;
    let seen: &mut [bool] = if n <= 64 {
        &mut seen[..n]
    } else {
        seen_vec = vec![false; n];
        &mut seen_vec
    };
    let mut cycles = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        cycles += 1;
        let mut j = start;
        while !seen[j] {
            seen[j] = true;
            j = map[j];
        }
    }
    if (n - cycles).is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// In-place lexicographic successor of `a`; false once `a` is the last arrangement.
pub(crate) fn next_permutation(a: &mut [usize]) -> bool {
    if a.len() < 2 {
        return false;
    }
    let mut i = a.len() - 1;
    while i > 0 && a[i - 1] >= a[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = a.len() - 1;
    while a[j] <= a[i - 1] {
        j -= 1;
    }
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}

/// Visits, in lexicographic order, every permutation of `0..n` whose first
/// image is `first`. Concatenating the visits for `first = 0..n` yields all
/// of `S_n` in lexicographic order.
pub(crate) fn visit_sym_block<F: FnMut(&[usize])>(n: usize, first: usize, mut f: F) {
    let mut a: Vec<usize> = std::iter::once(first)
        .chain((0..n).filter(|&x| x != first))
        .collect();
    loop {
        f(&a);
        if !next_permutation(&mut a[1..]) {
            break;
        }
    }
}

fn check_enum_range(n: usize, min: usize) -> Result<()> {
    if n < min || n > MAX_ENUM_N {
        return Err(QsiError::CapExceeded(format!(
            "enumeration requires {min} <= n <= {MAX_ENUM_N}, got {n}"
        )));
    }
    Ok(())
}

/// All of `S_n` in lexicographic one-line order; element 0 is the identity.
pub fn enumerate_sym(n: usize) -> Result<Vec<Permutation>> {
    check_enum_range(n, 1)?;
    let mut out = Vec::with_capacity(factorial_u64(n) as usize);
    for first in 0..n {
        visit_sym_block(n, first, |a| out.push(Permutation { map: a.to_vec() }));
    }
    Ok(out)
}

/// Even elements of `enumerate_sym(n)`, order preserved.
pub fn enumerate_alt(n: usize) -> Result<Vec<Permutation>> {
    check_enum_range(n, 2)?;
    let mut out = Vec::with_capacity(factorial_u64(n) as usize / 2);
    for first in 0..n {
        visit_sym_block(n, first, |a| {
            if sign_of(a) == 1 {
                out.push(Permutation { map: a.to_vec() });
            }
        });
    }
    Ok(out)
}

/// `σ_c^{j mod n}` where `σ_c(i) = i + 1` and `σ_c(n) = 1`.
pub fn cycle_power(n: usize, j: usize) -> Permutation {
    assert!(n >= 1, "cycle_power on zero points");
    let shift = j % n;
    Permutation {
        map: (0..n).map(|i| (i + shift) % n).collect(),
    }
}

/// Disjoint nonempty blocks covering `[n]`, stored 1-based and sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        if n == 0 {
            return Err(QsiError::InvalidPartition("n must be positive".into()));
        }
        let mut seen = vec![false; n];
        let mut sorted = Vec::with_capacity(blocks.len());
        for mut b in blocks {
            if b.is_empty() {
                return Err(QsiError::InvalidPartition("empty block".into()));
            }
            for &i in &b {
                if i == 0 || i > n {
                    return Err(QsiError::InvalidPartition(format!("index {i} outside [1, {n}]")));
                }
                if seen[i - 1] {
                    return Err(QsiError::InvalidPartition(format!("index {i} appears twice")));
                }
                seen[i - 1] = true;
            }
            b.sort_unstable();
            sorted.push(b);
        }
        if let Some(miss) = seen.iter().position(|s| !s) {
            return Err(QsiError::InvalidPartition(format!(
                "index {} not covered",
                miss + 1
            )));
        }
        Ok(Self { n, blocks: sorted })
    }

    pub fn single_block(n: usize) -> Result<Self> {
        Self::new(n, vec![(1..=n).collect()])
    }

    pub fn discrete(n: usize) -> Result<Self> {
        Self::new(n, (1..=n).map(|i| vec![i]).collect())
    }

    /// `{members}, [n] \ {members}`; a single block when either side is empty.
    pub fn two_block(n: usize, members: &[usize]) -> Result<Self> {
        let rest: Vec<usize> = (1..=n).filter(|i| !members.contains(i)).collect();
        let blocks = [members.to_vec(), rest]
            .into_iter()
            .filter(|b| !b.is_empty())
            .collect();
        Self::new(n, blocks)
    }

    /// Builds the partition whose blocks are the positions sharing a label.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let mut order: Vec<usize> = Vec::new();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            match order.iter().position(|&x| x == l) {
                Some(b) => blocks[b].push(i + 1),
                None => {
                    order.push(l);
                    blocks.push(vec![i + 1]);
                }
            }
        }
        Self::new(labels.len(), blocks)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Block index of each position, indexed 0-based.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.n];
        for (b, block) in self.blocks.iter().enumerate() {
            for &i in block {
                labels[i - 1] = b;
            }
        }
        labels
    }

    /// Union of blocks `i` and `j` (block indices, `i != j`).
    pub fn merge(&self, i: usize, j: usize) -> Result<Self> {
        if i == j || i >= self.blocks.len() || j >= self.blocks.len() {
            return Err(QsiError::InvalidArgument(format!("cannot merge blocks {i}, {j}")));
        }
        let mut blocks = Vec::with_capacity(self.blocks.len() - 1);
        let mut merged = self.blocks[i].clone();
        merged.extend_from_slice(&self.blocks[j]);
        for (k, b) in self.blocks.iter().enumerate() {
            if k == i {
                blocks.push(merged.clone());
            } else if k != j {
                blocks.push(b.clone());
            }
        }
        Self::new(self.n, blocks)
    }
}

pub(crate) fn stabilizes_labels(map: &[usize], labels: &[usize]) -> bool {
    map.iter().enumerate().all(|(i, &x)| labels[i] == labels[x])
}

/// True iff `p` maps every block of `part` into itself.
pub fn setwise_stabilizes(p: &Permutation, part: &Partition) -> bool {
    assert_eq!(p.n(), part.n(), "degree mismatch");
    stabilizes_labels(&p.map, &part.labels())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupKind {
    Sym,
    Alt,
}

/// Number of elements of `S_n` (or `A_n`) stabilizing every block, by enumeration.
pub fn stabilizer_count(part: &Partition, group: GroupKind) -> Result<u128> {
    stabilizer_count_with(part, group, Exec::default())
}

pub fn stabilizer_count_with(part: &Partition, group: GroupKind, exec: Exec) -> Result<u128> {
    let n = part.n();
    check_enum_range(n, if group == GroupKind::Alt { 2 } else { 1 })?;
    let labels = part.labels();
    let per_block = map_indexed(exec, n, |first| {
        let mut count = 0u128;
        visit_sym_block(n, first, |a| {
            if stabilizes_labels(a, &labels) && (group == GroupKind::Sym || sign_of(a) == 1) {
                count += 1;
            }
        });
        count
    });
    Ok(per_block.into_iter().sum())
}

pub fn factorial(n: usize) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * BigUint::from(k))
}

pub(crate) fn factorial_u64(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// `C(n, k)`, zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

pub fn gcd(a: usize, b: usize) -> usize {
    num_integer::gcd(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    #[test]
    fn enumerate_sym_examples() {
        assert_eq!(enumerate_sym(1).unwrap(), vec![Permutation::identity(1)]);
        let s3 = enumerate_sym(3).unwrap();
        assert_eq!(s3.len(), 6);
        assert_eq!(s3[0].one_line(), vec![1, 2, 3]);
        assert_eq!(s3[5].one_line(), vec![3, 2, 1]);
        assert_eq!(enumerate_sym(5).unwrap().len(), 120);
        assert!(enumerate_sym(0).is_err());
        assert!(enumerate_sym(11).is_err());
    }

    #[test]
    fn enumerate_sym_is_sorted_and_distinct() {
        let s5 = enumerate_sym(5).unwrap();
        let lines: Vec<Vec<usize>> = s5.iter().map(|p| p.one_line()).collect();
        assert!(lines.windows(2).all(|w| w[0] < w[1]));
        let set: HashSet<_> = lines.into_iter().collect();
        assert_eq!(set.len(), 120);
    }

    #[test]
    fn sign_examples() {
        assert_eq!(Permutation::identity(4).sign(), 1);
        assert_eq!(Permutation::transposition(2, 1, 2).unwrap().sign(), -1);
        let even = enumerate_sym(4).unwrap().iter().filter(|p| p.sign() == 1).count();
        assert_eq!(even, 12);
    }

    #[test]
    fn enumerate_alt_examples() {
        assert_eq!(enumerate_alt(2).unwrap(), vec![Permutation::identity(2)]);
        let a3 = enumerate_alt(3).unwrap();
        let c3: Vec<Permutation> = (0..3).map(|j| cycle_power(3, j)).collect();
        let a3set: HashSet<_> = a3.iter().cloned().collect();
        let c3set: HashSet<_> = c3.into_iter().collect();
        assert_eq!(a3set, c3set);
        assert_eq!(enumerate_alt(5).unwrap().len(), 60);
        assert!(enumerate_alt(5).unwrap().iter().all(|p| p.sign() == 1));
        assert!(enumerate_alt(1).is_err());
    }

    #[test]
    fn cycle_power_examples() {
        assert!(cycle_power(4, 0).is_identity());
        assert_eq!(cycle_power(4, 1).one_line(), vec![2, 3, 4, 1]);
        assert!(cycle_power(4, 4).is_identity());
    }

    #[test]
    fn stabilizer_examples() {
        let p = Partition::new(3, vec![vec![1, 2], vec![3]]).unwrap();
        assert!(setwise_stabilizes(&Permutation::identity(3), &p));
        assert!(!setwise_stabilizes(
            &Permutation::transposition(3, 1, 3).unwrap(),
            &p
        ));
        let count = enumerate_sym(3)
            .unwrap()
            .iter()
            .filter(|q| setwise_stabilizes(q, &p))
            .count();
        assert_eq!(count, 2);

        let p4 = Partition::new(4, vec![vec![1, 2], vec![3, 4]]).unwrap();
        assert_eq!(stabilizer_count(&p4, GroupKind::Sym).unwrap(), 4);
        assert_eq!(stabilizer_count(&p4, GroupKind::Alt).unwrap(), 2);
        let p3 = Partition::new(3, vec![vec![1], vec![2, 3]]).unwrap();
        assert_eq!(stabilizer_count(&p3, GroupKind::Alt).unwrap(), 1);
    }

    #[test]
    fn stabilizer_count_two_block_identities() {
        for n in 2..=9 {
            for l in 1..n {
                let members: Vec<usize> = (1..=l).collect();
                let part = Partition::two_block(n, &members).unwrap();
                let expect = factorial_u64(l) as u128 * factorial_u64(n - l) as u128;
                assert_eq!(stabilizer_count(&part, GroupKind::Sym).unwrap(), expect);
                if n >= 3 {
                    assert_eq!(stabilizer_count(&part, GroupKind::Alt).unwrap(), expect / 2);
                }
            }
        }
    }

    #[test]
    fn stabilizer_count_multi_block_product() {
        let part = Partition::new(7, vec![vec![1, 4], vec![2, 5, 7], vec![3], vec![6]]).unwrap();
        assert_eq!(stabilizer_count(&part, GroupKind::Sym).unwrap(), 2 * 6);
        let brute = enumerate_sym(7)
            .unwrap()
            .iter()
            .filter(|p| setwise_stabilizes(p, &part))
            .count() as u128;
        assert_eq!(brute, 12);
    }

    #[test]
    fn stabilizer_count_exec_agree() {
        let part = Partition::new(8, vec![vec![1, 3, 8], vec![2, 4], vec![5, 6, 7]]).unwrap();
        for g in [GroupKind::Sym, GroupKind::Alt] {
            assert_eq!(
                stabilizer_count_with(&part, g, Exec::Sequential).unwrap(),
                stabilizer_count_with(&part, g, Exec::Parallel).unwrap()
            );
        }
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(3, vec![vec![1, 2]]).is_err());
        assert!(Partition::new(3, vec![vec![1, 2], vec![2, 3]]).is_err());
        assert!(Partition::new(3, vec![vec![1, 2, 3], vec![]]).is_err());
        assert!(Partition::new(3, vec![vec![0, 1, 2]]).is_err());
        let p = Partition::new(4, vec![vec![1], vec![2], vec![3, 4]]).unwrap();
        let m = p.merge(0, 2).unwrap();
        assert_eq!(m.blocks(), &[vec![1, 3, 4], vec![2]]);
        assert_eq!(
            Partition::from_labels(&[7, 3, 7]).unwrap().blocks(),
            &[vec![1, 3], vec![2]]
        );
    }

    #[test]
    fn integer_utilities() {
        assert_eq!(factorial(10), BigUint::from(3_628_800u32));
        assert_eq!(binomial(24, 12), BigUint::from(2_704_156u32));
        assert_eq!(binomial(3, 5), BigUint::from(0u32));
        assert_eq!(gcd(12, 18), 6);
        assert_eq!(
            factorial(40).to_string(),
            "815915283247897734345611269596115894272000000000"
        );
    }

    fn perm_strategy(n: usize) -> impl Strategy<Value = Permutation> {
        Just((0..n).collect::<Vec<usize>>())
            .prop_shuffle()
            .prop_map(|v| Permutation::from_zero_based(v).unwrap())
    }

    proptest! {
        #[test]
        fn sign_is_homomorphism((p, q) in (1usize..=7).prop_flat_map(|n| (perm_strategy(n), perm_strategy(n)))) {
            prop_assert_eq!(p.compose(&q).sign(), p.sign() * q.sign());
        }

        #[test]
        fn cycle_powers_compose(n in 1usize..20, j in 0usize..50, k in 0usize..50) {
            prop_assert_eq!(cycle_power(n, j).compose(&cycle_power(n, k)), cycle_power(n, j + k));
        }

        #[test]
        fn inverse_roundtrip(p in (1usize..=9).prop_flat_map(perm_strategy)) {
            prop_assert!(p.compose(&p.inverse()).is_identity());
        }
    }
}

//! Exact combinatorics for fixed-weight bit strings.
//!
//! The central objects are the bijection between n-bit strings of Hamming
//! weight j (ordered by increasing binary value) and the integers
//! 0..C(n,j)-1, and the binary expansion of C(n,j) that drives the
//! pair-counting cascade. Everything here is exact integer arithmetic
//! with overflow detection; no floating point.

use crate::statevec::BitString;
use std::fmt;
use thiserror::Error;

/// Largest n for which C(n,j) is computed; C(60,30) still fits in u64.
pub const MAX_N: usize = 60;

#[derive(Debug, Error, PartialEq)]
pub enum CombinatError {
    #[error("weight {j} exceeds string length {n}")]
    WeightExceedsLength { n: usize, j: usize },
    #[error("n = {0} exceeds the exact-arithmetic bound n <= {MAX_N}")]
    OutOfDomain(usize),
    #[error("overflow while computing C({n},{j})")]
    Overflow { n: usize, j: usize },
    #[error("rank {rank} out of range: C({n},{j}) = {count}")]
    RankOutOfRange { rank: u64, n: usize, j: usize, count: u64 },
    #[error("string {x} has Hamming weight {actual}, expected {expected}")]
    WeightMismatch { x: BitString, actual: usize, expected: usize },
    #[error("table over {0} bits exceeds the in-memory bound of 24 bits")]
    TableTooLarge(usize),
}

pub type Result<T> = std::result::Result<T, CombinatError>;

/// Position of a fixed-weight string in increasing binary order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rank(pub u64);

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Exact binomial coefficient C(n,j) via the multiplicative formula;
/// every intermediate division is exact.
pub fn binomial(n: usize, j: usize) -> Result<u64> {
    if j > n {
        return Err(CombinatError::WeightExceedsLength { n, j });
    }
    if n > MAX_N {
        return Err(CombinatError::OutOfDomain(n));
    }
    let j = j.min(n - j);
    let mut acc: u64 = 1;
    for i in 1..=j {
        acc = acc
            .checked_mul((n - j + i) as u64)
            .ok_or(CombinatError::Overflow { n, j })?
            / i as u64;
    }
    Ok(acc)
}

/// C(n,j) treating out-of-range weights as zero; used by the ranking
/// recurrence where C(n-1, j) legitimately vanishes for j > n-1.
pub(crate) fn binomial_or_zero(n: usize, j: usize) -> Result<u64> {
    if j > n {
        Ok(0)
    } else {
        binomial(n, j)
    }
}

/// Number of 1 bits in the string.
pub fn hamming_weight(x: &BitString) -> usize {
    x.bits().iter().filter(|&&b| b).count()
}

/// The y-th smallest (as a binary integer) n-bit string of Hamming
/// weight j. Peels one leading bit per step: values below C(n-1,j) get
/// a leading 0; the rest get a leading 1 and the offset C(n-1,j) is
/// subtracted before recursing on (n-1, j-1).
pub fn unrank(y: Rank, n: usize, j: usize) -> Result<BitString> {
    let count = binomial(n, j)?;
    if y.0 >= count {
        return Err(CombinatError::RankOutOfRange { rank: y.0, n, j, count });
    }
    let mut bits = Vec::with_capacity(n);
    let mut remaining = y.0;
    let mut nv = n;
    let mut jv = j;
    while nv > 0 {
        let below = binomial_or_zero(nv - 1, jv)?;
        if remaining < below {
            bits.push(false);
        } else {
            bits.push(true);
            remaining -= below;
            jv -= 1;
        }
        nv -= 1;
    }
    debug_assert_eq!(remaining, 0);
    debug_assert_eq!(jv, 0);
    BitString::from_bits(bits).map_err(|_| CombinatError::OutOfDomain(n))
}

/// Inverse of [`unrank`]: the position of a weight-j string in increasing
/// binary order over all weight-j strings of the same length.
pub fn rank(x: &BitString, j: usize) -> Result<Rank> {
    let actual = hamming_weight(x);
    if actual != j {
        return Err(CombinatError::WeightMismatch {
            x: x.clone(),
            actual,
            expected: j,
        });
    }
    let n = x.width();
    let _ = binomial(n, j)?; // domain check
    let mut acc: u64 = 0;
    let mut jv = j;
    for (pos, &bit) in x.bits().iter().enumerate() {
        let nv = n - pos;
        if bit {
            acc += binomial_or_zero(nv - 1, jv)?;
            jv -= 1;
        }
    }
    Ok(Rank(acc))
}

/// Binary expansion of C(n,j) together with its bit length
/// k = floor(log2 C(n,j)) + 1. The leading bit of the expansion is
/// always set, and k = 1 exactly when C(n,j) = 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinomialExpansion {
    pub n: usize,
    pub j: usize,
    /// Exact value of C(n,j).
    pub value: u64,
    /// Bit length of `value`.
    pub k: usize,
    /// The k-bit binary representation of `value`, leading bit first.
    pub bits: BitString,
}

impl BinomialExpansion {
    /// Bit of the expansion at significance `i` (so `bit(k-1)` is the
    /// leading bit and always 1).
    pub fn bit(&self, i: usize) -> bool {
        self.bits.bit(self.k - 1 - i)
    }
}

pub fn binomial_expansion(n: usize, j: usize) -> Result<BinomialExpansion> {
    let value = binomial(n, j)?;
    let k = (64 - value.leading_zeros()) as usize;
    let bits = BitString::from_value(k, value).map_err(|_| CombinatError::OutOfDomain(n))?;
    Ok(BinomialExpansion { n, j, value, k, bits })
}

/// Permutation table on all 2^n strings extending the weight-j ranking:
/// weight-j strings map to their rank 0..C(n,j)-1, and every other
/// string maps to the remaining values C(n,j)..2^n-1 in increasing
/// binary order. The extension is only required to be a bijection; the
/// protocol touches it solely on the weight-j subspace.
pub fn extended_rank_table(n: usize, j: usize) -> Result<Vec<u64>> {
    if n > 24 {
        return Err(CombinatError::TableTooLarge(n));
    }
    let count = binomial(n, j)?;
    let mut table = vec![0u64; 1 << n];
    let mut next_ranked = 0u64;
    let mut next_other = count;
    for (x, slot) in table.iter_mut().enumerate() {
        if (x as u64).count_ones() as usize == j {
            *slot = next_ranked;
            next_ranked += 1;
        } else {
            *slot = next_other;
            next_other += 1;
        }
    }
    debug_assert_eq!(next_ranked, count);
    Ok(table)
}

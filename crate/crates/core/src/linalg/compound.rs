//! Multiplicative compounds and higher adjugates.
//!
//! Index sets are increasing 1-based sequences enumerated in lexicographic
//! order: for `N = 4, r = 2` the order is
//! `(1,2) (1,3) (1,4) (2,3) (2,4) (3,4)`. Row/column `k` of a compound or
//! higher adjugate corresponds to the `k`-th sequence of that enumeration.

use alloc::vec::Vec;
use core::fmt;

use super::{det, ComplexMatrix};
use crate::{Error, Result};

/// Strictly increasing sequence of 1-based indices drawn from `[1, n]`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexSequence(Vec<usize>);

impl IndexSequence {
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.iter().any(|&i| i == 0 || i > n) {
            return Err(Error::invalid("index sequence entry outside [1, n]"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("index sequence must be strictly increasing"));
        }
        Ok(Self(indices))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    /// `[1, n]` minus this sequence.
    pub fn complement(&self, n: usize) -> Self {
        Self((1..=n).filter(|i| !self.contains(*i)).collect())
    }

    /// The same positions as 0-based indices.
    pub fn zero_based(&self) -> Vec<usize> {
        self.0.iter().map(|i| i - 1).collect()
    }

    pub fn sum(&self) -> usize {
        self.0.iter().sum()
    }
}

impl fmt::Debug for IndexSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// All increasing sequences of length `k` from `[1, n]`, lexicographically.
pub fn index_sequences(n: usize, k: usize) -> Vec<IndexSequence> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut cur: Vec<usize> = (1..=k).collect();
    loop {
        out.push(IndexSequence(cur.clone()));
        // rightmost position that can still be incremented
        let Some(pos) = (0..k).rev().find(|&i| cur[i] < n - (k - 1 - i)) else {
            break;
        };
        cur[pos] += 1;
        for i in pos + 1..k {
            cur[i] = cur[i - 1] + 1;
        }
    }
    out
}

fn check_order(a: &ComplexMatrix, r: usize) -> Result<usize> {
    if !a.is_square() {
        return Err(Error::invalid("compound matrices need a square matrix"));
    }
    let n = a.rows();
    if r > n {
        return Err(Error::invalid("compound order exceeds matrix dimension"));
    }
    Ok(n)
}

/// `r`-th multiplicative compound `C_r(A)`: all `r×r` minors, rows indexed by
/// the row sets `β`, columns by the column sets `γ`. `C_0(A) = [1]`.
pub fn compound(a: &ComplexMatrix, r: usize) -> Result<ComplexMatrix> {
    let n = check_order(a, r)?;
    let seqs: Vec<Vec<usize>> = index_sequences(n, r).iter().map(IndexSequence::zero_based).collect();
    Ok(ComplexMatrix::from_fn(seqs.len(), seqs.len(), |i, j| det(&a.select(&seqs[i], &seqs[j]))))
}

/// `r`-th higher adjugate: entry `(γ, β) = (−1)^{Σγ+Σβ} det(A[βᶜ|γᶜ])`.
///
/// `adj_1` is the classical adjugate, `adj_0(A) = [det A]`, `adj_N(A) = [1]`.
pub fn higher_adjugate(a: &ComplexMatrix, r: usize) -> Result<ComplexMatrix> {
    let n = check_order(a, r)?;
    let seqs = index_sequences(n, r);
    let comps: Vec<Vec<usize>> = seqs.iter().map(|s| s.complement(n).zero_based()).collect();
    Ok(ComplexMatrix::from_fn(seqs.len(), seqs.len(), |g, b| {
        let minor = det(&a.select(&comps[b], &comps[g]));
        if (seqs[g].sum() + seqs[b].sum()) % 2 == 1 {
            -minor
        } else {
            minor
        }
    }))
}

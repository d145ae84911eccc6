//! d-dimensional permutations and their patterns.
//!
//! A d-permutation of size n is stored as d−1 columns; column `j` lists the
//! `j`-th coordinate of the points `1..=n` in index order. Values are 0-based
//! internally and 1-based wherever users can see them.

use std::fmt;
use std::str::FromStr;

use num::{BigInt, BigRational, BigUint, One, Zero};
use rand::seq::index::sample as sample_indices;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationError};
use crate::mc::{self, Estimate};

/// Default bound on the pattern size accepted by exhaustive occurrence counting.
pub const DEFAULT_K_MAX: usize = 4;

/// A permutation of dimension `d ≥ 2` and size `n ≥ 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DPermutation {
    n: usize,
    cols: Vec<Vec<u32>>,
}

/// One of the `2^{d−1}` sign sequences used by block sums and sign trees.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignSequence(Vec<i8>);

/// A strictly increasing set of 1-based indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexSet(Vec<usize>);

/// Checks 1-based columns against every d-permutation invariant and lists
/// all violations in column order.
pub fn validate(cols: &[Vec<usize>]) -> std::result::Result<(), Vec<ValidationError>> {
    if cols.is_empty() {
        return Err(vec![ValidationError::EmptyColumnSet]);
    }
    let n = cols[0].len();
    if n == 0 {
        return Err(vec![ValidationError::EmptySize]);
    }
    let mut errors = Vec::new();
    for (j, col) in cols.iter().enumerate() {
        let column = j + 1;
        if col.len() != n {
            errors.push(ValidationError::WrongLength {
                column,
                len: col.len(),
                expected: n,
            });
            continue;
        }
        let mut seen = vec![false; n];
        for &value in col {
            if value == 0 || value > n {
                errors.push(ValidationError::OutOfRange { column, value, n });
            } else if std::mem::replace(&mut seen[value - 1], true) {
                errors.push(ValidationError::Duplicate { column, value });
            }
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

impl DPermutation {
    /// Builds a permutation from 1-based columns, one per non-index coordinate.
    pub fn new(cols: Vec<Vec<usize>>) -> Result<Self> {
        validate(&cols).map_err(Error::InvalidPermutation)?;
        let n = cols[0].len();
        let cols = cols
            .into_iter()
            .map(|c| c.into_iter().map(|v| (v - 1) as u32).collect())
            .collect();
        Ok(DPermutation { n, cols })
    }

    /// Builds a permutation from 0-based columns.
    pub fn from_zero_based(cols: Vec<Vec<u32>>) -> Result<Self> {
        let one: Vec<Vec<usize>> = cols
            .iter()
            .map(|c| c.iter().map(|&v| v as usize + 1).collect())
            .collect();
        validate(&one).map_err(Error::InvalidPermutation)?;
        Ok(DPermutation {
            n: cols[0].len(),
            cols,
        })
    }

    /// Builds a permutation from 0-based columns already known to be valid.
    pub(crate) fn from_zero_based_unchecked(cols: Vec<Vec<u32>>) -> Self {
        debug_assert!(!cols.is_empty());
        DPermutation {
            n: cols[0].len(),
            cols,
        }
    }

    /// The identity d-permutation of size `n`.
    pub fn identity(n: usize, d: usize) -> Self {
        assert!(n >= 1 && d >= 2, "identity requires n ≥ 1 and d ≥ 2");
        DPermutation {
            n,
            cols: vec![(0..n as u32).collect(); d - 1],
        }
    }

    /// Dimension d.
    pub fn d(&self) -> usize {
        self.cols.len() + 1
    }

    /// Size n.
    pub fn n(&self) -> usize {
        self.n
    }

    /// 0-based column `j` (0-based coordinate index among the d−1 columns).
    pub fn col(&self, j: usize) -> &[u32] {
        &self.cols[j]
    }

    /// All 0-based columns.
    pub fn cols(&self) -> &[Vec<u32>] {
        &self.cols
    }

    /// All columns with 1-based values.
    pub fn cols_one_based(&self) -> Vec<Vec<usize>> {
        self.cols
            .iter()
            .map(|c| c.iter().map(|&v| v as usize + 1).collect())
            .collect()
    }

    /// The 2-permutation formed by the index coordinate and column `j` (1-based).
    pub fn marginal(&self, j: usize) -> Result<DPermutation> {
        if j == 0 || j > self.cols.len() {
            return Err(Error::IndexOutOfRange {
                index: j,
                max: self.cols.len(),
            });
        }
        Ok(DPermutation {
            n: self.n,
            cols: vec![self.cols[j - 1].clone()],
        })
    }

    /// Rank of this permutation among all d-permutations of the same size and
    /// dimension, in lexicographic order of the concatenated columns.
    pub fn lex_rank(&self) -> u64 {
        let fact = factorial_u64(self.n);
        self.cols
            .iter()
            .fold(0u64, |acc, c| acc * fact + perm_rank(c))
    }

    /// Inverse of [`DPermutation::lex_rank`].
    pub fn from_lex_rank(n: usize, d: usize, mut rank: u64) -> Self {
        let fact = factorial_u64(n);
        let mut cols = vec![Vec::new(); d - 1];
        for c in cols.iter_mut().rev() {
            *c = perm_unrank(n, rank % fact);
            rank /= fact;
        }
        DPermutation { n, cols }
    }

    /// Point `i` (0-based index) as its d coordinates, 0-based.
    pub fn point(&self, i: usize) -> Vec<u32> {
        std::iter::once(i as u32)
            .chain(self.cols.iter().map(|c| c[i]))
            .collect()
    }

    /// Serialisable 1-based view.
    pub fn to_json(&self) -> PermutationJson {
        PermutationJson {
            d: self.d(),
            n: self.n,
            cols: self.cols_one_based(),
        }
    }

    /// Compact `1,3,2|2,1,3` rendering used in CSV tables and on the command line.
    pub fn to_pipe_string(&self) -> String {
        self.cols_one_based()
            .iter()
            .map(|c| {
                c.iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect::<Vec<_>>()
            .join("|")
    }
}

impl fmt::Display for DPermutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body = self
            .cols_one_based()
            .iter()
            .map(|c| {
                let vals: Vec<String> = c.iter().map(ToString::to_string).collect();
                format!("({})", vals.join(","))
            })
            .collect::<Vec<_>>()
            .join(",");
        if self.cols.len() == 1 {
            write!(f, "{body}")
        } else {
            write!(f, "({body})")
        }
    }
}

impl FromStr for DPermutation {
    type Err = Error;

    /// Parses the pipe format `1,3,2|2,1,3`.
    fn from_str(s: &str) -> Result<Self> {
        let cols = s
            .split('|')
            .map(|c| {
                c.split(',')
                    .map(|v| {
                        v.trim()
                            .parse::<usize>()
                            .map_err(|e| Error::Invalid(format!("bad value {v:?}: {e}")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        DPermutation::new(cols)
    }
}

/// JSON schema `{"d":…, "n":…, "cols":[[…],…]}` with 1-based values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationJson {
    /// Dimension.
    pub d: usize,
    /// Size.
    pub n: usize,
    /// 1-based columns.
    pub cols: Vec<Vec<usize>>,
}

impl TryFrom<PermutationJson> for DPermutation {
    type Error = Error;

    fn try_from(j: PermutationJson) -> Result<Self> {
        let p = DPermutation::new(j.cols)?;
        if p.d() != j.d || p.n() != j.n {
            return Err(Error::Invalid(format!(
                "header says d={}, n={} but columns give d={}, n={}",
                j.d,
                j.n,
                p.d(),
                p.n()
            )));
        }
        Ok(p)
    }
}

impl SignSequence {
    /// Builds a sign sequence from entries in `{+1, −1}`.
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.is_empty() {
            return Err(Error::Invalid("sign sequence must be nonempty".into()));
        }
        if let Some(bad) = signs.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::Invalid(format!("sign {bad} is not ±1")));
        }
        Ok(SignSequence(signs))
    }

    /// The all-plus sequence of length `m`.
    pub fn plus(m: usize) -> Self {
        SignSequence(vec![1; m])
    }

    /// Entries as ±1.
    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    /// Length d−1.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false for a constructed sequence.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Bitmask with bit `j` set where the sign is −1.
    pub fn to_mask(&self) -> u32 {
        self.0
            .iter()
            .enumerate()
            .fold(0, |m, (j, &s)| if s < 0 { m | (1 << j) } else { m })
    }

    /// Inverse of [`SignSequence::to_mask`].
    pub fn from_mask(mask: u32, m: usize) -> Self {
        SignSequence((0..m).map(|j| if mask >> j & 1 == 1 { -1 } else { 1 }).collect())
    }
}

impl IndexSet {
    /// Builds an index set from strictly increasing 1-based indices not exceeding `n`.
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        for (a, &i) in indices.iter().enumerate() {
            if i == 0 || i > n {
                return Err(Error::IndexOutOfRange { index: i, max: n });
            }
            if a > 0 && indices[a - 1] >= i {
                return Err(Error::Invalid(format!(
                    "indices must be strictly increasing, got {} then {i}",
                    indices[a - 1]
                )));
            }
        }
        Ok(IndexSet(indices))
    }

    /// 1-based indices.
    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    /// Number of indices.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// True for the empty set.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Pattern of `σ` on the index set `I`.
pub fn pattern_at(sigma: &DPermutation, set: &IndexSet) -> Result<DPermutation> {
    if set.is_empty() {
        return Err(Error::Invalid("pattern of an empty index set".into()));
    }
    if let Some(&i) = set.indices().last() {
        if i > sigma.n() {
            return Err(Error::IndexOutOfRange {
                index: i,
                max: sigma.n(),
            });
        }
    }
    let idx: Vec<usize> = set.indices().iter().map(|i| i - 1).collect();
    Ok(pattern_at_zero_based(sigma, &idx))
}

/// Pattern of `σ` on increasing 0-based indices, without validation.
pub fn pattern_at_zero_based(sigma: &DPermutation, idx: &[usize]) -> DPermutation {
    let cols = sigma
        .cols
        .iter()
        .map(|c| {
            let vals: Vec<u32> = idx.iter().map(|&i| c[i]).collect();
            ranks(&vals)
        })
        .collect();
    DPermutation::from_zero_based_unchecked(cols)
}

/// 0-based ranks of distinct values.
pub(crate) fn ranks<T: PartialOrd + Copy>(vals: &[T]) -> Vec<u32> {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).expect("comparable values"));
    let mut r = vec![0u32; vals.len()];
    for (pos, &i) in order.iter().enumerate() {
        r[i] = pos as u32;
    }
    r
}

fn check_dims(a: &DPermutation, b: &DPermutation) -> Result<()> {
    if a.d() != b.d() {
        return Err(Error::DimensionMismatch(a.d(), b.d()));
    }
    Ok(())
}

/// Number of index sets on which `σ` has pattern `τ`, with the default limit on `|τ|`.
pub fn occ(tau: &DPermutation, sigma: &DPermutation) -> Result<u64> {
    occ_with_limit(tau, sigma, DEFAULT_K_MAX)
}

/// Number of index sets on which `σ` has pattern `τ`; fails when `|τ| > k_max`.
pub fn occ_with_limit(tau: &DPermutation, sigma: &DPermutation, k_max: usize) -> Result<u64> {
    check_dims(tau, sigma)?;
    let k = tau.n();
    if k > sigma.n() {
        return Ok(0);
    }
    if k > k_max && k != sigma.n() {
        return Err(Error::EnumerationLimit { k, limit: k_max });
    }
    let mut count = 0u64;
    for_each_subset(sigma.n(), k, |idx| {
        if matches_pattern(sigma, idx, tau) {
            count += 1;
        }
    });
    Ok(count)
}

/// Exact frequency `occ(τ,σ)/C(n,k)`, zero when `|τ| > |σ|`.
pub fn freq(tau: &DPermutation, sigma: &DPermutation) -> Result<BigRational> {
    freq_with_limit(tau, sigma, DEFAULT_K_MAX)
}

/// [`freq`] with an explicit enumeration limit.
pub fn freq_with_limit(
    tau: &DPermutation,
    sigma: &DPermutation,
    k_max: usize,
) -> Result<BigRational> {
    let o = occ_with_limit(tau, sigma, k_max)?;
    if tau.n() > sigma.n() {
        return Ok(BigRational::zero());
    }
    Ok(BigRational::new(
        BigInt::from(o),
        BigInt::from(binomial(sigma.n(), tau.n())),
    ))
}

/// Monte Carlo estimate of `freq(τ,σ)` from `trials` uniform index sets.
pub fn freq_sampled(
    tau: &DPermutation,
    sigma: &DPermutation,
    trials: u64,
    seed: u64,
) -> Result<Estimate> {
    check_dims(tau, sigma)?;
    if trials == 0 {
        return Err(Error::Invalid("trials must be at least 1".into()));
    }
    let k = tau.n();
    if k > sigma.n() {
        return Ok(Estimate {
            mean: 0.0,
            se: 0.0,
            samples: trials,
        });
    }
    let hits: u64 = mc::chunked(trials, seed, |rng, len| {
        let mut h = 0u64;
        let mut idx = Vec::with_capacity(k);
        for _ in 0..len {
            idx.clear();
            idx.extend(sample_indices(rng, sigma.n(), k).into_iter());
            idx.sort_unstable();
            if matches_pattern(sigma, &idx, tau) {
                h += 1;
            }
        }
        h
    })
    .into_iter()
    .sum();
    Ok(Estimate::from_counts(hits, trials))
}

/// True when the pattern of `σ` on the 0-based increasing indices `idx` is `τ`.
pub(crate) fn matches_pattern(sigma: &DPermutation, idx: &[usize], tau: &DPermutation) -> bool {
    sigma.cols.iter().zip(tau.cols.iter()).all(|(c, t)| {
        idx.iter().enumerate().all(|(a, &ia)| {
            idx.iter()
                .enumerate()
                .skip(a + 1)
                .all(|(b, &ib)| (c[ia] < c[ib]) == (t[a] < t[b]))
        })
    })
}

/// Calls `f` on every increasing `k`-subset of `0..n` in lexicographic order.
pub fn for_each_subset<F: FnMut(&[usize])>(n: usize, k: usize, mut f: F) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for a in i..k {
            idx[a] = idx[a - 1] + 1;
        }
    }
}

/// Block sum `σ1 ⊚_s σ2`: coordinate `j` is a direct sum when `s_j = +1` and
/// a skew sum when `s_j = −1`.
pub fn block_sum(
    s1: &DPermutation,
    s2: &DPermutation,
    signs: &SignSequence,
) -> Result<DPermutation> {
    check_dims(s1, s2)?;
    if signs.len() != s1.d() - 1 {
        return Err(Error::DimensionMismatch(signs.len() + 1, s1.d()));
    }
    let (n1, n2) = (s1.n() as u32, s2.n() as u32);
    let cols = s1
        .cols
        .iter()
        .zip(&s2.cols)
        .zip(signs.signs())
        .map(|((c1, c2), &s)| {
            let (off1, off2) = if s > 0 { (0, n1) } else { (n2, 0) };
            c1.iter()
                .map(|v| v + off1)
                .chain(c2.iter().map(|v| v + off2))
                .collect()
        })
        .collect();
    Ok(DPermutation::from_zero_based_unchecked(cols))
}

/// Inverse of column `j` (1-based) as a 1-based permutation array.
pub fn inverse_marginal(sigma: &DPermutation, j: usize) -> Result<Vec<usize>> {
    if j == 0 || j > sigma.cols.len() {
        return Err(Error::IndexOutOfRange {
            index: j,
            max: sigma.cols.len(),
        });
    }
    Ok(invert(&sigma.cols[j - 1])
        .into_iter()
        .map(|v| v as usize + 1)
        .collect())
}

/// Inverse of a 0-based permutation array.
pub fn invert(p: &[u32]) -> Vec<u32> {
    let mut inv = vec![0u32; p.len()];
    for (i, &v) in p.iter().enumerate() {
        inv[v as usize] = i as u32;
    }
    inv
}

/// The d-permutation whose points have the same relative order as `points`;
/// the first coordinate defines the index order.
pub fn perm_of_points(points: &[Vec<f64>]) -> Result<DPermutation> {
    let k = points.len();
    if k == 0 {
        return Err(Error::Invalid("no points".into()));
    }
    let d = points[0].len();
    if d < 2 || points.iter().any(|p| p.len() != d) {
        return Err(Error::Invalid("points must share a dimension of at least 2".into()));
    }
    let mut by_first: Vec<usize> = (0..k).collect();
    by_first.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]));
    let mut cols = Vec::with_capacity(d - 1);
    for c in 0..d {
        let vals: Vec<f64> = by_first.iter().map(|&i| points[i][c]).collect();
        let mut sorted = vals.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Tie(c + 1));
        }
        if c > 0 {
            cols.push(ranks(&vals));
        }
    }
    Ok(DPermutation::from_zero_based_unchecked(cols))
}

/// Number of inversions of a 0-based permutation array, by a Fenwick tree.
pub fn inversion_count(p: &[u32]) -> u64 {
    let n = p.len();
    let mut tree = vec![0u32; n + 1];
    let mut inv = 0u64;
    for (seen, &v) in p.iter().enumerate() {
        let mut i = v as usize + 1;
        let mut below = 0u64;
        while i > 0 {
            below += tree[i] as u64;
            i &= i - 1;
        }
        inv += seen as u64 - below;
        let mut i = v as usize + 1;
        while i <= n {
            tree[i] += 1;
            i += i & i.wrapping_neg();
        }
    }
    inv
}

/// Fraction of index pairs that are inversions of a 0-based permutation array.
pub fn inversion_frequency(p: &[u32]) -> f64 {
    let n = p.len() as f64;
    if p.len() < 2 {
        return 0.0;
    }
    inversion_count(p) as f64 / (n * (n - 1.0) / 2.0)
}

/// Exact binomial coefficient.
pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

pub(crate) fn factorial_u64(n: usize) -> u64 {
    (1..=n as u64).product()
}

fn perm_rank(p: &[u32]) -> u64 {
    let n = p.len();
    let mut rank = 0u64;
    for i in 0..n {
        let smaller_after = p[i + 1..].iter().filter(|&&v| v < p[i]).count() as u64;
        rank = rank * (n - i) as u64 + smaller_after;
    }
    rank
}

fn perm_unrank(n: usize, mut rank: u64) -> Vec<u32> {
    let mut digits = vec![0u64; n];
    for i in (0..n).rev() {
        let base = (n - i) as u64;
        digits[i] = rank % base;
        rank /= base;
    }
    let mut pool: Vec<u32> = (0..n as u32).collect();
    digits.iter().map(|&dgt| pool.remove(dgt as usize)).collect()
}

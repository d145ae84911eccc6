//! d-separable permutations and their sign and swap trees.
//!
//! Uniform sampling goes through conditioned Galton–Watson trees. Patterns of
//! the Brownian separable permuton are drawn from random binary sign trees.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::{self, Rng};
use crate::perm::{DPermutation, IndexSet, SignSequence};

/// Largest size accepted by the uniform separable samplers.
pub const SEPARABLE_MAX_N: usize = 5000;

/// Default attempt cap of the rejection sampler.
pub const DEFAULT_GW_ATTEMPTS: u64 = 100_000_000;

/// A rooted plane tree on nodes `0..len` with root `0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TreeShape {
    children: Vec<Vec<usize>>,
}

impl TreeShape {
    /// A shape from child lists; node `0` is the root.
    pub fn new(children: Vec<Vec<usize>>) -> Result<Self> {
        let m = children.len();
        if m == 0 {
            return Err(Error::Invalid("a tree has at least one node".into()));
        }
        let mut seen = vec![false; m];
        seen[0] = true;
        for list in &children {
            for &c in list {
                if c >= m || seen[c] {
                    return Err(Error::Invalid(format!("node {c} is not a fresh child")));
                }
                seen[c] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Invalid("some node is unreachable".into()));
        }
        let shape = TreeShape { children };
        if shape.preorder().len() != m {
            return Err(Error::Invalid("child lists contain a cycle".into()));
        }
        Ok(shape)
    }

    /// A single leaf.
    pub fn leaf() -> Self {
        TreeShape {
            children: vec![Vec::new()],
        }
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.children.len()
    }

    /// Never true.
    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }

    /// Children of `v` from left to right.
    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    /// True if `v` has no children.
    pub fn is_leaf(&self, v: usize) -> bool {
        self.children[v].is_empty()
    }

    /// Nodes in preorder.
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = vec![0usize];
        while let Some(v) = stack.pop() {
            if out.len() > self.len() {
                break;
            }
            out.push(v);
            stack.extend(self.children[v].iter().rev());
        }
        out
    }

    /// Leaves from left to right.
    pub fn leaves(&self) -> Vec<usize> {
        self.preorder().into_iter().filter(|&v| self.is_leaf(v)).collect()
    }

    /// Internal nodes in preorder.
    pub fn internal(&self) -> Vec<usize> {
        self.preorder().into_iter().filter(|&v| !self.is_leaf(v)).collect()
    }

    fn parents(&self) -> Vec<Option<usize>> {
        let mut p = vec![None; self.len()];
        for (v, list) in self.children.iter().enumerate() {
            for &c in list {
                p[c] = Some(v);
            }
        }
        p
    }

    /// Builds a shape from out-degrees listed in preorder.
    pub fn from_preorder_degrees(degrees: &[usize]) -> Result<Self> {
        let mut children = vec![Vec::new(); degrees.len()];
        let mut open: Vec<(usize, usize)> = Vec::new();
        for (v, &deg) in degrees.iter().enumerate() {
            if v > 0 {
                let Some(top) = open.last_mut() else {
                    return Err(Error::Invalid("degree sequence ends early".into()));
                };
                children[top.0].push(v);
                top.1 -= 1;
                if top.1 == 0 {
                    open.pop();
                }
            }
            if deg > 0 {
                open.push((v, deg));
            }
        }
        if !open.is_empty() || degrees.is_empty() {
            return Err(Error::Invalid("degree sequence is incomplete".into()));
        }
        Ok(TreeShape { children })
    }
}

/// A plane tree whose internal nodes carry sign sequences.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignTree {
    d: usize,
    shape: TreeShape,
    signs: Vec<Option<SignSequence>>,
}

/// A plane tree with a signed root and nonzero swap strings elsewhere.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SwapTree {
    d: usize,
    shape: TreeShape,
    root: Option<SignSequence>,
    swaps: Vec<Option<Vec<bool>>>,
}

fn check_branching(shape: &TreeShape) -> Result<()> {
    for v in 0..shape.len() {
        if shape.children(v).len() == 1 {
            return Err(Error::Invalid(format!("node {v} has a single child")));
        }
    }
    Ok(())
}

impl SignTree {
    /// Checks that internal nodes have at least two children and carry a
    /// sign sequence of length `d − 1`, and that leaves carry none.
    pub fn new(d: usize, shape: TreeShape, signs: Vec<Option<SignSequence>>) -> Result<Self> {
        if d < 2 {
            return Err(Error::Invalid("dimension must be at least 2".into()));
        }
        if signs.len() != shape.len() {
            return Err(Error::Invalid("one label slot per node is required".into()));
        }
        check_branching(&shape)?;
        for (v, s) in signs.iter().enumerate() {
            match (shape.is_leaf(v), s) {
                (true, None) => {}
                (false, Some(s)) if s.len() == d - 1 => {}
                _ => return Err(Error::Invalid(format!("bad label at node {v}"))),
            }
        }
        Ok(SignTree { d, shape, signs })
    }

    /// Dimension.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Underlying shape.
    pub fn shape(&self) -> &TreeShape {
        &self.shape
    }

    /// Sign of node `v`, `None` on leaves.
    pub fn sign(&self, v: usize) -> Option<&SignSequence> {
        self.signs[v].as_ref()
    }

    /// Number of leaves.
    pub fn n(&self) -> usize {
        self.shape.leaves().len()
    }

    /// True when no internal node shares its sign with its parent.
    pub fn is_reduced(&self) -> bool {
        self.shape.parents().iter().enumerate().all(|(v, p)| match (p, &self.signs[v]) {
            (Some(p), Some(s)) => self.signs[*p].as_ref() != Some(s),
            _ => true,
        })
    }

    /// Serialisable view.
    pub fn to_json(&self) -> TreeJson {
        TreeJson {
            kind: TreeKind::Sign,
            d: self.d,
            node: node_json(&self.shape, 0, &|v| {
                self.signs[v]
                    .as_ref()
                    .map(|s| s.signs().iter().map(|&x| x as i64).collect())
            }),
        }
    }
}

impl SwapTree {
    /// Checks branching, a root sign of length `d − 1` (when the root is
    /// internal) and nonzero swap strings of that length elsewhere.
    pub fn new(
        d: usize,
        shape: TreeShape,
        root: Option<SignSequence>,
        swaps: Vec<Option<Vec<bool>>>,
    ) -> Result<Self> {
        if d < 2 {
            return Err(Error::Invalid("dimension must be at least 2".into()));
        }
        if swaps.len() != shape.len() {
            return Err(Error::Invalid("one label slot per node is required".into()));
        }
        check_branching(&shape)?;
        match (&root, shape.is_leaf(0)) {
            (None, true) => {}
            (Some(s), false) if s.len() == d - 1 => {}
            _ => return Err(Error::Invalid("bad root label".into())),
        }
        for (v, s) in swaps.iter().enumerate() {
            match (v == 0 || shape.is_leaf(v), s) {
                (true, None) => {}
                (false, Some(w)) if w.len() == d - 1 && w.iter().any(|&b| b) => {}
                (false, Some(_)) => {
                    return Err(Error::Invalid(format!("swap label at node {v} is zero or mis-sized")))
                }
                _ => return Err(Error::Invalid(format!("bad label at node {v}"))),
            }
        }
        Ok(SwapTree {
            d,
            shape,
            root,
            swaps,
        })
    }

    /// Underlying shape.
    pub fn shape(&self) -> &TreeShape {
        &self.shape
    }

    /// Root sign, `None` for a single leaf.
    pub fn root_sign(&self) -> Option<&SignSequence> {
        self.root.as_ref()
    }

    /// Swap string of a non-root internal node.
    pub fn swap(&self, v: usize) -> Option<&[bool]> {
        self.swaps[v].as_deref()
    }

    /// Serialisable view; the root label is its sign sequence.
    pub fn to_json(&self) -> TreeJson {
        TreeJson {
            kind: TreeKind::Swap,
            d: self.d,
            node: node_json(&self.shape, 0, &|v| {
                if v == 0 {
                    self.root
                        .as_ref()
                        .map(|s| s.signs().iter().map(|&x| x as i64).collect())
                } else {
                    self.swaps[v].as_ref().map(|w| w.iter().map(|&b| b as i64).collect())
                }
            }),
        }
    }
}

/// Tree kind in JSON output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeKind {
    /// Sign tree.
    Sign,
    /// Swap tree.
    Swap,
}

/// JSON schema `{"kind":…, "d":…, "node":{…}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeJson {
    /// Sign or swap.
    pub kind: TreeKind,
    /// Dimension.
    pub d: usize,
    /// Root node.
    pub node: NodeJson,
}

/// One node: label (`null` on leaves) and children.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeJson {
    /// Sign entries `±1` or swap bits `0/1`.
    pub label: Option<Vec<i64>>,
    /// Children from left to right.
    pub children: Vec<NodeJson>,
}

fn node_json(shape: &TreeShape, v: usize, label: &dyn Fn(usize) -> Option<Vec<i64>>) -> NodeJson {
    NodeJson {
        label: label(v),
        children: shape.children(v).iter().map(|&c| node_json(shape, c, label)).collect(),
    }
}

/// Coordinates `j` in which a prefix of length `m` of the columns is the
/// lowest (`+1`) or highest (`−1`) block, or `None` if some column is neither.
fn split_sign(cols: &[Vec<u32>], mins: &[Vec<u32>], maxs: &[Vec<u32>], m: usize) -> Option<Vec<i8>> {
    let len = cols[0].len() as u32;
    cols.iter()
        .enumerate()
        .map(|(j, _)| {
            if maxs[j][m - 1] == m as u32 - 1 {
                Some(1)
            } else if mins[j][m - 1] == len - m as u32 {
                Some(-1)
            } else {
                None
            }
        })
        .collect()
}

fn decompose(cols: Vec<Vec<u32>>, out: &mut Builder) -> Option<usize> {
    let len = cols[0].len();
    let node = out.push(None);
    if len == 1 {
        return Some(node);
    }
    let prefix = |f: fn(u32, u32) -> u32| -> Vec<Vec<u32>> {
        cols.iter()
            .map(|c| {
                c.iter()
                    .scan(None, |acc: &mut Option<u32>, &v| {
                        *acc = Some(acc.map_or(v, |a| f(a, v)));
                        *acc
                    })
                    .collect()
            })
            .collect()
    };
    let mins = prefix(u32::min);
    let maxs = prefix(u32::max);
    let mut sign = None;
    let mut cuts = vec![0usize];
    for m in 1..len {
        if let Some(s) = split_sign(&cols, &mins, &maxs, m) {
            debug_assert!(sign.as_ref().is_none_or(|t| *t == s));
            sign = Some(s);
            cuts.push(m);
        }
    }
    let sign = sign?;
    cuts.push(len);
    out.signs[node] = Some(SignSequence::new(sign).expect("±1 entries"));
    for w in cuts.windows(2) {
        let sub: Vec<Vec<u32>> = cols
            .iter()
            .map(|c| {
                let part = &c[w[0]..w[1]];
                let lo = *part.iter().min().expect("nonempty");
                part.iter().map(|v| v - lo).collect()
            })
            .collect();
        let child = decompose(sub, out)?;
        out.children[node].push(child);
    }
    Some(node)
}

#[derive(Default)]
struct Builder {
    children: Vec<Vec<usize>>,
    signs: Vec<Option<SignSequence>>,
}

impl Builder {
    fn push(&mut self, s: Option<SignSequence>) -> usize {
        self.children.push(Vec::new());
        self.signs.push(s);
        self.children.len() - 1
    }
}

/// The sign tree of `σ`, or `None` if `σ` is not separable.
fn try_sign_tree(sigma: &DPermutation) -> Option<SignTree> {
    let mut b = Builder::default();
    decompose(sigma.cols().to_vec(), &mut b)?;
    Some(SignTree {
        d: sigma.d(),
        shape: TreeShape { children: b.children },
        signs: b.signs,
    })
}

/// True if `σ` is obtained from size-1 permutations by block sums.
pub fn is_separable(sigma: &DPermutation) -> bool {
    try_sign_tree(sigma).is_some()
}

/// The sign tree of a separable `σ`.
pub fn sign_tree(sigma: &DPermutation) -> Result<SignTree> {
    try_sign_tree(sigma).ok_or_else(|| Error::Invalid(format!("{sigma} is not separable")))
}

/// The permutation of a sign tree: coordinate `j` sends the `i`-th leaf to
/// its position once the children of every node with `j`-th sign `−1` are
/// reversed.
pub fn sign_tree_inverse(t: &SignTree) -> DPermutation {
    let leaves = t.shape.leaves();
    let mut leaf_index = vec![usize::MAX; t.shape.len()];
    for (i, &l) in leaves.iter().enumerate() {
        leaf_index[l] = i;
    }
    let n = leaves.len();
    let cols = (0..t.d - 1)
        .map(|j| {
            let mut col = vec![0u32; n];
            let mut pos = 0u32;
            let mut stack = vec![0usize];
            while let Some(v) = stack.pop() {
                if t.shape.is_leaf(v) {
                    col[leaf_index[v]] = pos;
                    pos += 1;
                    continue;
                }
                let flip = t.signs[v].as_ref().expect("internal label").signs()[j] < 0;
                if flip {
                    stack.extend(t.shape.children(v).iter());
                } else {
                    stack.extend(t.shape.children(v).iter().rev());
                }
            }
            col
        })
        .collect();
    DPermutation::from_zero_based_unchecked(cols)
}

/// The swap tree of a separable `σ`.
pub fn swap_tree(sigma: &DPermutation) -> Result<SwapTree> {
    Ok(sign_to_swap(&sign_tree(sigma)?))
}

/// Swap labels of a reduced sign tree: bit `j` marks a sign change in
/// coordinate `j` relative to the parent.
pub fn sign_to_swap(t: &SignTree) -> SwapTree {
    let parents = t.shape.parents();
    let swaps = (0..t.shape.len())
        .map(|v| match (parents[v], &t.signs[v]) {
            (Some(p), Some(s)) => {
                let ps = t.signs[p].as_ref().expect("parent is internal");
                Some(s.signs().iter().zip(ps.signs()).map(|(a, b)| a != b).collect())
            }
            _ => None,
        })
        .collect();
    SwapTree {
        d: t.d,
        shape: t.shape.clone(),
        root: t.signs[0].clone(),
        swaps,
    }
}

/// Sign labels recovered from swap labels, root down.
pub fn swap_to_sign(t: &SwapTree) -> SignTree {
    let mut signs: Vec<Option<SignSequence>> = vec![None; t.shape.len()];
    signs[0] = t.root.clone();
    for v in t.shape.preorder() {
        let Some(s) = signs[v].clone() else { continue };
        for &c in t.shape.children(v) {
            if let Some(w) = &t.swaps[c] {
                let flipped = s
                    .signs()
                    .iter()
                    .zip(w)
                    .map(|(&x, &b)| if b { -x } else { x })
                    .collect();
                signs[c] = Some(SignSequence::new(flipped).expect("±1 entries"));
            }
        }
    }
    SignTree {
        d: t.d,
        shape: t.shape.clone(),
        signs,
    }
}

/// Pattern induced by the leaves `I` (1-based, left to right): the tree
/// spanned by those leaves and the closest common ancestors of consecutive
/// ones, read through [`sign_tree_inverse`].
pub fn pattern_from_tree(t: &SignTree, set: &IndexSet) -> Result<DPermutation> {
    let leaves = t.shape.leaves();
    if set.is_empty() {
        return Err(Error::Invalid("pattern of an empty index set".into()));
    }
    if let Some(&i) = set.indices().last() {
        if i > leaves.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                max: leaves.len(),
            });
        }
    }
    let parents = t.shape.parents();
    let order = t.shape.preorder();
    let mut pre = vec![0usize; t.shape.len()];
    let mut depth = vec![0usize; t.shape.len()];
    for (i, &v) in order.iter().enumerate() {
        pre[v] = i;
        if let Some(p) = parents[v] {
            depth[v] = depth[p] + 1;
        }
    }
    let lca = |mut a: usize, mut b: usize| {
        while depth[a] > depth[b] {
            a = parents[a].expect("non-root");
        }
        while depth[b] > depth[a] {
            b = parents[b].expect("non-root");
        }
        while a != b {
            a = parents[a].expect("non-root");
            b = parents[b].expect("non-root");
        }
        a
    };
    let chosen: Vec<usize> = set.indices().iter().map(|&i| leaves[i - 1]).collect();
    let mut nodes = chosen.clone();
    nodes.extend(chosen.windows(2).map(|w| lca(w[0], w[1])));
    nodes.sort_by_key(|&v| pre[v]);
    nodes.dedup();
    let mut local = std::collections::HashMap::new();
    for (i, &v) in nodes.iter().enumerate() {
        local.insert(v, i);
    }
    let mut children = vec![Vec::new(); nodes.len()];
    let mut stack: Vec<usize> = Vec::new();
    for &v in &nodes {
        while let Some(&top) = stack.last() {
            if lca(top, v) == top {
                break;
            }
            stack.pop();
        }
        if let Some(&top) = stack.last() {
            children[local[&top]].push(local[&v]);
        }
        stack.push(v);
    }
    let signs = nodes.iter().map(|&v| t.signs[v].clone()).collect();
    let induced = SignTree {
        d: t.d,
        shape: TreeShape { children },
        signs,
    };
    Ok(sign_tree_inverse(&induced))
}

/// Critical offspring law of the uniform swap tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffspringLaw {
    /// Dimension.
    pub d: usize,
    /// Number of swap strings, `2^{d−1} − 1`.
    pub a: f64,
    /// Geometric ratio `1 − √(a/(a+1))`.
    pub b: f64,
}

/// The offspring law for dimension `d ≥ 2`.
pub fn offspring_law(d: usize) -> Result<OffspringLaw> {
    if !(2..=32).contains(&d) {
        return Err(Error::Invalid(format!("dimension {d} outside 2..=32")));
    }
    let a = ((1u64 << (d - 1)) - 1) as f64;
    let b = 1.0 - (a / (a + 1.0)).sqrt();
    Ok(OffspringLaw { d, a, b })
}

impl OffspringLaw {
    /// `P(ξ = r)`.
    pub fn pmf(&self, r: usize) -> f64 {
        match r {
            0 => 1.0 + self.a - (self.a * (self.a + 1.0)).sqrt(),
            1 => 0.0,
            _ => self.a * self.b.powi(r as i32 - 1),
        }
    }

    /// Mean, summed from the mass function.
    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    /// `E[ξ²]`, summed from the mass function.
    pub fn second_moment(&self) -> f64 {
        self.moment(2)
    }

    /// `E[ξ²]` in closed form, `ab(b² − 3b + 4)/(1 − b)³`.
    pub fn second_moment_closed_form(&self) -> f64 {
        let (a, b) = (self.a, self.b);
        a * b * (b * b - 3.0 * b + 4.0) / (1.0 - b).powi(3)
    }

    /// Variance, summed from the mass function.
    pub fn variance(&self) -> f64 {
        self.second_moment() - self.mean().powi(2)
    }

    /// Total mass, summed from the mass function.
    pub fn total_mass(&self) -> f64 {
        self.moment(0)
    }

    fn moment(&self, p: i32) -> f64 {
        let mut total = if p == 0 { self.pmf(0) } else { 0.0 };
        let mut r = 2usize;
        loop {
            let term = self.pmf(r) * (r as f64).powi(p);
            total += term;
            if term < 1e-300 || (r > 10 && term < total * 1e-18) {
                break;
            }
            r += 1;
        }
        total
    }

    /// One draw of `ξ`.
    pub fn sample(&self, rng: &mut Rng) -> usize {
        let u: f64 = rng.random();
        if u < self.pmf(0) {
            return 0;
        }
        let v: f64 = 1.0 - rng.random::<f64>();
        2 + (v.ln() / self.b.ln()).floor() as usize
    }
}

/// Galton–Watson tree with exactly `n` leaves by rejection, or `None` once
/// `max_attempts` trees have been discarded.
fn gw_shape_rejection(law: &OffspringLaw, n: usize, rng: &mut Rng, max_attempts: u64) -> Option<TreeShape> {
    let mut degrees = Vec::with_capacity(2 * n);
    for _ in 0..max_attempts {
        degrees.clear();
        let mut pending = 1usize;
        let mut leaves = 0usize;
        let mut ok = true;
        while pending > 0 {
            let k = law.sample(rng);
            pending -= 1;
            if k == 0 {
                leaves += 1;
            } else {
                pending += k;
            }
            degrees.push(k);
            if leaves + pending > n {
                ok = false;
                break;
            }
        }
        if ok && leaves == n {
            return TreeShape::from_preorder_degrees(&degrees).ok();
        }
    }
    None
}

/// Uniform plane tree with `n` leaves and internal degrees at least 2, drawn
/// with weight `a^m` for `m` internal nodes, via the cycle lemma.
fn gw_shape_cycle_lemma(law: &OffspringLaw, n: usize, rng: &mut Rng) -> TreeShape {
    if n == 1 {
        return TreeShape::leaf();
    }
    let mut ln_fact = vec![0.0f64; 2 * n + 1];
    for i in 1..ln_fact.len() {
        ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
    }
    let ln_choose = |a: usize, b: usize| ln_fact[a] - ln_fact[b] - ln_fact[a - b];
    let logw: Vec<f64> = (1..n)
        .map(|m| {
            ln_choose(n + m, m) + ln_choose(n - 2, m - 1) - ((n + m) as f64).ln() + m as f64 * law.a.ln()
        })
        .collect();
    let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut m = n - 1;
    for (i, wi) in w.iter().enumerate() {
        if u < *wi {
            m = i + 1;
            break;
        }
        u -= wi;
    }
    let mut bars: Vec<usize> = rand::seq::index::sample(rng, n - 2, m - 1).into_vec();
    bars.sort_unstable();
    let mut parts = Vec::with_capacity(m);
    let mut last = 0usize;
    for (i, &b) in bars.iter().enumerate() {
        let cut = b - i;
        parts.push(2 + cut - last);
        last = cut;
    }
    parts.push(2 + (n - 1 - m) - last);
    let mut seq = parts;
    seq.extend(std::iter::repeat_n(0usize, n));
    seq.shuffle(rng);
    let len = seq.len();
    let mut sum = 0i64;
    let mut best = (i64::MAX, 0usize);
    for (i, &c) in seq.iter().enumerate() {
        sum += c as i64 - 1;
        if sum < best.0 {
            best = (sum, i);
        }
    }
    let start = (best.1 + 1) % len;
    seq.rotate_left(start);
    TreeShape::from_preorder_degrees(&seq).expect("cycle lemma rotation is a tree")
}

/// Tree construction used by the uniform separable sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GwMethod {
    /// Galton–Watson trees rejected until the leaf count is `n`.
    Rejection,
    /// Direct draw of the conditioned tree through the cycle lemma.
    CycleLemma,
}

/// Uniform swap tree with `n` leaves in dimension `d`.
pub fn sample_uniform_swap_tree(n: usize, d: usize, seed: u64, method: GwMethod) -> Result<SwapTree> {
    if n == 0 {
        return Err(Error::Invalid("size must be at least 1".into()));
    }
    if n > SEPARABLE_MAX_N {
        return Err(Error::Budget(format!("separable size {n} exceeds {SEPARABLE_MAX_N}")));
    }
    let law = offspring_law(d)?;
    let mut rng = mc::rng(seed);
    let shape = match method {
        GwMethod::Rejection => gw_shape_rejection(&law, n, &mut rng, DEFAULT_GW_ATTEMPTS)
            .ok_or(Error::RetryExhausted(DEFAULT_GW_ATTEMPTS))?,
        GwMethod::CycleLemma => gw_shape_cycle_lemma(&law, n, &mut rng),
    };
    let m = d - 1;
    let root = (!shape.is_leaf(0)).then(|| SignSequence::from_mask(rng.random_range(0..1u32 << m), m));
    let swaps = (0..shape.len())
        .map(|v| {
            (v != 0 && !shape.is_leaf(v)).then(|| {
                let mask = rng.random_range(1..1u32 << m);
                (0..m).map(|j| mask >> j & 1 == 1).collect()
            })
        })
        .collect();
    Ok(SwapTree {
        d,
        shape,
        root,
        swaps,
    })
}

/// Uniform d-separable permutation of size `n` via rejection.
pub fn sample_uniform_separable(n: usize, d: usize, seed: u64) -> Result<DPermutation> {
    sample_uniform_separable_with(n, d, seed, GwMethod::Rejection)
}

/// Uniform d-separable permutation of size `n` with a chosen tree sampler.
pub fn sample_uniform_separable_with(n: usize, d: usize, seed: u64, method: GwMethod) -> Result<DPermutation> {
    Ok(sign_tree_inverse(&swap_to_sign(&sample_uniform_swap_tree(n, d, seed, method)?)))
}

/// All d-separable permutations of size `n`, in lexicographic order.
pub fn enumerate_separable(n: usize, d: usize) -> Result<Vec<DPermutation>> {
    if n > 6 || d > 3 {
        return Err(Error::Budget(format!("separable enumeration needs n ≤ 6, d ≤ 3 (got {n}, {d})")));
    }
    Ok(crate::oracle::all_d_permutations(n, d)?
        .filter(is_separable)
        .collect())
}

/// Uniform binary plane tree with `k` leaves, grown by inserting a new leaf
/// next to a uniformly chosen node on a uniformly chosen side.
pub fn uniform_binary_tree(k: usize, rng: &mut Rng) -> TreeShape {
    let mut children: Vec<Vec<usize>> = vec![Vec::new()];
    let mut parent: Vec<Option<usize>> = vec![None];
    let mut root = 0usize;
    for _ in 1..k {
        let x = rng.random_range(0..children.len());
        let leaf = children.len();
        children.push(Vec::new());
        parent.push(None);
        let node = children.len();
        children.push(if rng.random::<bool>() { vec![x, leaf] } else { vec![leaf, x] });
        parent.push(parent[x]);
        match parent[x] {
            Some(p) => {
                let slot = children[p].iter().position(|&c| c == x).expect("child");
                children[p][slot] = node;
            }
            None => root = node,
        }
        parent[x] = Some(node);
        parent[leaf] = Some(node);
    }
    relabel_from(root, &children)
}

fn relabel_from(root: usize, children: &[Vec<usize>]) -> TreeShape {
    let mut order = Vec::with_capacity(children.len());
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        order.push(v);
        stack.extend(children[v].iter().rev());
    }
    let mut new_id = vec![0usize; children.len()];
    for (i, &v) in order.iter().enumerate() {
        new_id[v] = i;
    }
    TreeShape {
        children: order
            .iter()
            .map(|&v| children[v].iter().map(|&c| new_id[c]).collect())
            .collect(),
    }
}

/// Sign tree on a binary shape with independent signs: coordinate `i` of
/// every internal node is `+1` with probability `p[i]`.
pub fn brownian_sign_tree(k: usize, p: &[f64], rng: &mut Rng) -> Result<SignTree> {
    if k == 0 {
        return Err(Error::Invalid("pattern size must be at least 1".into()));
    }
    if p.is_empty() || p.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::Invalid("probabilities must lie in [0, 1]".into()));
    }
    let shape = uniform_binary_tree(k, rng);
    let signs = (0..shape.len())
        .map(|v| {
            (!shape.is_leaf(v)).then(|| {
                SignSequence::new(
                    p.iter()
                        .map(|&pi| if rng.random::<f64>() < pi { 1 } else { -1 })
                        .collect(),
                )
                .expect("±1 entries")
            })
        })
        .collect();
    Ok(SignTree {
        d: p.len() + 1,
        shape,
        signs,
    })
}

/// Size-`k` pattern of the Brownian separable permuton with parameters `p`.
pub fn sample_brownian_pattern(k: usize, p: &[f64], seed: u64) -> Result<DPermutation> {
    let mut rng = mc::rng(seed);
    Ok(sign_tree_inverse(&brownian_sign_tree(k, p, &mut rng)?))
}

/// Large Brownian separable pattern used as a point-cloud surrogate.
pub fn sample_brownian_cloud(n: usize, p: &[f64], seed: u64) -> Result<DPermutation> {
    sample_brownian_pattern(n, p, seed)
}

/// All plane trees with `n` leaves whose internal nodes have at least two children.
pub fn all_shapes(n: usize) -> Vec<TreeShape> {
    fn compositions(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![Vec::new()];
        }
        (1..=n)
            .flat_map(|first| {
                compositions(n - first).into_iter().map(move |mut rest| {
                    rest.insert(0, first);
                    rest
                })
            })
            .collect()
    }
    fn gen(n: usize) -> Vec<Vec<usize>> {
        if n == 1 {
            return vec![vec![0]];
        }
        let mut out = Vec::new();
        for parts in compositions(n).into_iter().filter(|c| c.len() >= 2) {
            let mut acc: Vec<Vec<usize>> = vec![vec![parts.len()]];
            for &p in &parts {
                let subs = gen(p);
                acc = acc
                    .into_iter()
                    .flat_map(|prefix| {
                        subs.iter().map(move |s| {
                            let mut v = prefix.clone();
                            v.extend(s);
                            v
                        })
                    })
                    .collect();
            }
            out.extend(acc);
        }
        out
    }
    gen(n)
        .into_iter()
        .map(|deg| TreeShape::from_preorder_degrees(&deg).expect("valid degrees"))
        .collect()
}

/// All reduced sign trees with `n` leaves in dimension `d`.
pub fn all_sign_trees(n: usize, d: usize) -> Vec<SignTree> {
    let m = d - 1;
    let mut out = Vec::new();
    for shape in all_shapes(n) {
        let internal = shape.internal();
        let choices = 1usize << m;
        let total = choices.pow(internal.len() as u32);
        for code in 0..total {
            let mut signs: Vec<Option<SignSequence>> = vec![None; shape.len()];
            let mut c = code;
            for &v in &internal {
                signs[v] = Some(SignSequence::from_mask((c % choices) as u32, m));
                c /= choices;
            }
            let t = SignTree {
                d,
                shape: shape.clone(),
                signs,
            };
            if t.is_reduced() {
                out.push(t);
            }
        }
    }
    out
}

//! Schnyder woods and the 3-permutations and trees they determine.
//!
//! A Schnyder wood of size `n` is encoded by a string over `{g, b, r}` and
//! the equivalent cone walk with `2n` steps. The walk drives the green and
//! red coalescent-walk processes.

use std::collections::BTreeMap;

use num::{BigUint, One, Zero};
use rand::{Rng as _, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::{self, Rng};
use crate::perm::DPermutation;

/// Largest size accepted by the exhaustive string enumerator.
pub const ENUMERATION_MAX_N: usize = 6;

/// Largest size sampled with exact big-integer counts.
pub const EXACT_DP_MAX_N: usize = 60;

/// Default largest size accepted by the floating-point DP sampler.
pub const DEFAULT_DP_MAX_N: usize = 2000;

/// Default retry cap of the rejection sampler.
pub const DEFAULT_REJECTION_CAP: u64 = 50_000_000;

/// Largest `k` of a `(−k, 1)` step generated by the rejection sampler.
pub const REJECTION_MAX_K: u32 = 60;

/// A valid Schnyder wood string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SchnyderString(Vec<u8>);

/// A cone walk: `2n` steps `(1,−1)` or `(−k,1)` from the origin back to the
/// origin, staying in `{x ≥ 0, y ≥ −1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConeWalk(Vec<(i64, i64)>);

/// Checks the three string invariants.
pub fn validate_string(s: &str) -> Result<SchnyderString> {
    let bytes = s.as_bytes();
    if bytes.is_empty() || bytes.len() % 3 != 0 {
        return Err(Error::Invalid(format!(
            "length {} is not a positive multiple of 3",
            bytes.len()
        )));
    }
    let (mut g, mut b, mut r) = (0usize, 0usize, 0usize);
    for (i, &c) in bytes.iter().enumerate() {
        match c {
            b'g' => g += 1,
            b'b' => b += 1,
            b'r' => r += 1,
            _ => {
                return Err(Error::Invalid(format!(
                    "character {:?} at position {} is not g, b or r",
                    c as char,
                    i + 1
                )))
            }
        }
        if !(g >= b && b >= r) {
            return Err(Error::Invalid(format!(
                "prefix of length {} has {g} g, {b} b, {r} r",
                i + 1
            )));
        }
        if c == b'b' && i > 0 && bytes[i - 1] == b'r' {
            return Err(Error::Invalid(format!(
                "r at position {i} is followed by b",
            )));
        }
    }
    let n = bytes.len() / 3;
    if g != n || b != n || r != n {
        return Err(Error::Invalid(format!(
            "counts g={g}, b={b}, r={r} are not all {n}"
        )));
    }
    Ok(SchnyderString(bytes.to_vec()))
}

impl SchnyderString {
    /// Size `n`.
    pub fn n(&self) -> usize {
        self.0.len() / 3
    }

    /// Characters as bytes.
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    /// The string itself.
    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.0).expect("ascii string")
    }
}

impl std::fmt::Display for SchnyderString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SchnyderString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        validate_string(s)
    }
}

/// JSON schema `{"n":…, "steps":[[dx,dy],…]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkJson {
    /// Size.
    pub n: usize,
    /// Steps as `[dx, dy]` pairs.
    pub steps: Vec<[i64; 2]>,
}

impl ConeWalk {
    /// Validates a step sequence.
    pub fn new(steps: Vec<(i64, i64)>) -> Result<Self> {
        if steps.is_empty() || steps.len() % 2 != 0 {
            return Err(Error::Invalid(format!(
                "walk length {} is not a positive even number",
                steps.len()
            )));
        }
        let (mut x, mut y) = (0i64, 0i64);
        let (mut ups, mut downs) = (0usize, 0usize);
        for (t, &(dx, dy)) in steps.iter().enumerate() {
            match (dx, dy) {
                (1, -1) => downs += 1,
                (k, 1) if k <= 0 => ups += 1,
                _ => {
                    return Err(Error::Invalid(format!(
                        "step {} = ({dx},{dy}) is neither (1,-1) nor (-k,1)",
                        t + 1
                    )))
                }
            }
            x += dx;
            y += dy;
            if x < 0 || y < -1 {
                return Err(Error::Invalid(format!(
                    "position ({x},{y}) after step {} leaves the cone",
                    t + 1
                )));
            }
        }
        if (x, y) != (0, 0) || ups != downs {
            return Err(Error::Invalid(format!("walk ends at ({x},{y})")));
        }
        Ok(ConeWalk(steps))
    }

    /// Size `n` (half the number of steps).
    pub fn n(&self) -> usize {
        self.0.len() / 2
    }

    /// Steps `(dx, dy)`.
    pub fn steps(&self) -> &[(i64, i64)] {
        &self.0
    }

    /// Positions after each step, starting with the origin.
    pub fn positions(&self) -> Vec<(i64, i64)> {
        let mut p = vec![(0, 0)];
        for &(dx, dy) in &self.0 {
            let (x, y) = *p.last().expect("nonempty");
            p.push((x + dx, y + dy));
        }
        p
    }

    /// Time reversal: steps in reverse order, each negated.
    pub fn reversed_steps(&self) -> Vec<(i64, i64)> {
        self.0.iter().rev().map(|&(dx, dy)| (-dx, -dy)).collect()
    }

    /// Serialisable view.
    pub fn to_json(&self) -> WalkJson {
        WalkJson {
            n: self.n(),
            steps: self.0.iter().map(|&(a, b)| [a, b]).collect(),
        }
    }
}

/// String to walk: move the leading `g` to the end, map `b ↦ (1,−1)` and a
/// block of `k` letters `r` followed by `g` to `(−k,1)`.
pub fn string_to_walk(s: &SchnyderString) -> ConeWalk {
    let bytes = s.as_bytes();
    let mut steps = Vec::with_capacity(2 * s.n());
    let mut run = 0i64;
    for &c in bytes[1..].iter().chain(std::iter::once(&b'g')) {
        match c {
            b'b' => steps.push((1, -1)),
            b'r' => run += 1,
            _ => {
                steps.push((-run, 1));
                run = 0;
            }
        }
    }
    ConeWalk(steps)
}

/// Walk to string, inverting [`string_to_walk`].
pub fn walk_to_string(w: &ConeWalk) -> SchnyderString {
    let mut out = Vec::with_capacity(3 * w.n());
    out.push(b'g');
    for &(dx, dy) in w.steps() {
        if dy < 0 {
            out.push(b'b');
        } else {
            out.extend(std::iter::repeat_n(b'r', (-dx) as usize));
            out.push(b'g');
        }
    }
    out.pop();
    SchnyderString(out)
}

/// Which of the two coalescent-walk processes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Driven by the time-reversed walk; labels descend left to right.
    Green,
    /// Driven by the walk itself; labels ascend left to right.
    Red,
}

/// A one-dimensional coalescent-walk process, queried by start index.
pub trait PathSource {
    /// Number of starting points.
    fn num_starts(&self) -> usize;
    /// Time of the `idx`-th starting point, in increasing order of `idx`.
    fn start_time(&self, idx: usize) -> i64;
    /// Label of the `idx`-th starting point.
    fn label(&self, idx: usize) -> usize;
    /// Height of the path from start `idx` at time `t ≥ start_time(idx)`.
    fn height_at(&self, idx: usize, t: i64) -> i64;
}

/// Green or red coalescent-walk process of a cone walk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoalescentWalkProcess {
    variant: Variant,
    driver: Vec<(i64, i64)>,
    starts: Vec<i64>,
}

/// Builds the green process (driven by the reversed walk) or the red process.
pub fn build_process(w: &ConeWalk, variant: Variant) -> CoalescentWalkProcess {
    let two_n = 2 * w.n() as i64;
    let (driver, mut starts): (Vec<(i64, i64)>, Vec<i64>) = match variant {
        Variant::Green => {
            let d = w.reversed_steps();
            let s = d
                .iter()
                .enumerate()
                .filter(|(_, s)| s.1 == -1)
                .map(|(t, _)| if t == 0 { two_n } else { t as i64 })
                .collect();
            (d, s)
        }
        Variant::Red => {
            let d = w.steps().to_vec();
            let s = d
                .iter()
                .enumerate()
                .filter(|(_, s)| s.1 == 1)
                .map(|(t, _)| if t as i64 + 1 == two_n { 0 } else { t as i64 + 1 })
                .collect();
            (d, s)
        }
    };
    starts.sort_unstable();
    CoalescentWalkProcess {
        variant,
        driver,
        starts,
    }
}

impl CoalescentWalkProcess {
    /// Green or red.
    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Driving steps; step `t` goes from time `t` to `t+1`.
    pub fn driver(&self) -> &[(i64, i64)] {
        &self.driver
    }

    /// Sorted starting times.
    pub fn starts(&self) -> &[i64] {
        &self.starts
    }

    /// Length `2n` of the time interval `[0, 2n]`.
    pub fn horizon(&self) -> i64 {
        self.driver.len() as i64
    }

    /// Height change of a path at height `z` over driving step `step`.
    pub fn increment(&self, step: (i64, i64), z: i64) -> i64 {
        increment(self.variant, step, z)
    }

    /// Height at time `t` of the path started at time `j`.
    pub fn path_eval(&self, j: i64, t: i64) -> Result<i64> {
        if self.starts.binary_search(&j).is_err() {
            return Err(Error::Invalid(format!("{j} is not a starting time")));
        }
        if t < j || t > self.horizon() {
            return Err(Error::Invalid(format!(
                "time {t} outside [{j}, {}]",
                self.horizon()
            )));
        }
        let mut z = 0;
        for s in j..t {
            z += self.increment(self.driver[s as usize], z);
        }
        Ok(z)
    }

    /// Runs the sweep computing both orders and the first-hit forest.
    pub fn sweep(&self) -> Sweep {
        sweep(self)
    }
}

fn increment(variant: Variant, (dx, dy): (i64, i64), z: i64) -> i64 {
    match variant {
        Variant::Green => {
            if dy < 0 {
                let k = dx;
                if z > 0 {
                    -1
                } else if z < 0 {
                    -k
                } else {
                    -k - 1
                }
            } else {
                1
            }
        }
        Variant::Red => {
            if dy > 0 {
                let k = -dx;
                if z >= 0 {
                    1
                } else if z + k <= 0 {
                    k
                } else {
                    -z
                }
            } else {
                -1
            }
        }
    }
}

impl PathSource for CoalescentWalkProcess {
    fn num_starts(&self) -> usize {
        self.starts.len()
    }

    fn start_time(&self, idx: usize) -> i64 {
        self.starts[idx]
    }

    fn label(&self, idx: usize) -> usize {
        match self.variant {
            Variant::Green => self.starts.len() - idx,
            Variant::Red => idx + 1,
        }
    }

    fn height_at(&self, idx: usize, t: i64) -> i64 {
        self.path_eval(self.starts[idx], t)
            .expect("time within the path's domain")
    }
}

/// A process given by explicit path heights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplicitProcess {
    starts: Vec<i64>,
    labels: Vec<usize>,
    paths: Vec<Vec<i64>>,
}

impl ExplicitProcess {
    /// `paths[i][s]` is the height at time `starts[i] + s`; starts must increase
    /// and labels must be a permutation of `1..=len`.
    pub fn new(starts: Vec<i64>, labels: Vec<usize>, paths: Vec<Vec<i64>>) -> Result<Self> {
        if starts.len() != labels.len() || starts.len() != paths.len() {
            return Err(Error::Invalid("starts, labels and paths differ in length".into()));
        }
        if starts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid("starting times must increase".into()));
        }
        let mut seen = labels.clone();
        seen.sort_unstable();
        if seen != (1..=labels.len()).collect::<Vec<_>>() {
            return Err(Error::Invalid("labels must be a permutation".into()));
        }
        if paths.iter().any(|p| p.first() != Some(&0)) {
            return Err(Error::Invalid("every path starts at height 0".into()));
        }
        Ok(ExplicitProcess {
            starts,
            labels,
            paths,
        })
    }
}

impl PathSource for ExplicitProcess {
    fn num_starts(&self) -> usize {
        self.starts.len()
    }

    fn start_time(&self, idx: usize) -> i64 {
        self.starts[idx]
    }

    fn label(&self, idx: usize) -> usize {
        self.labels[idx]
    }

    fn height_at(&self, idx: usize, t: i64) -> i64 {
        self.paths[idx][(t - self.starts[idx]) as usize]
    }
}

fn sigma_by<P: PathSource + ?Sized>(z: &P, before: fn(i64) -> bool) -> Vec<usize> {
    let m = z.num_starts();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        if a == b {
            return std::cmp::Ordering::Equal;
        }
        let (e, l) = if a < b { (a, b) } else { (b, a) };
        let e_first = before(z.height_at(e, z.start_time(l)));
        let a_first = if a == e { e_first } else { !e_first };
        if a_first {
            std::cmp::Ordering::Less
        } else {
            std::cmp::Ordering::Greater
        }
    });
    let mut sigma = vec![0usize; m];
    for (pos, &idx) in order.iter().enumerate() {
        sigma[z.label(idx) - 1] = pos + 1;
    }
    sigma
}

/// `σ^up(Z)` as a 1-based array indexed by label: `j1 < j2` are ordered
/// `j1 ≤ j2` exactly when `Z^{(j1)}_{j2} < 0`.
pub fn sigma_up<P: PathSource + ?Sized>(z: &P) -> Vec<usize> {
    sigma_by(z, |h| h < 0)
}

/// `σ^down(Z)` as a 1-based array indexed by label: `j1 < j2` are ordered
/// `j1 ≤ j2` exactly when `Z^{(j1)}_{j2} > 0`.
pub fn sigma_down<P: PathSource + ?Sized>(z: &P) -> Vec<usize> {
    sigma_by(z, |h| h > 0)
}

/// Output of the sweep over a coalescent-walk process.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sweep {
    /// Start indices in `≤^up` order.
    pub order_up: Vec<usize>,
    /// Start indices in `≤^down` order.
    pub order_down: Vec<usize>,
    /// Start index first hit by each path, `None` if it hits none.
    pub parent: Vec<Option<usize>>,
}

struct Class {
    height: i64,
    count: usize,
    open: Vec<usize>,
}

/// Simulates all paths together as coalescence classes sorted by height.
///
/// Earlier paths lying strictly below a new start form a prefix of the
/// current `≤^up` order and those strictly above form a prefix of the
/// current `≤^down` order, so each start is inserted at the size of that prefix.
fn sweep(p: &CoalescentWalkProcess) -> Sweep {
    let m = p.starts.len();
    let mut classes: Vec<Class> = Vec::new();
    let mut order_up = Vec::with_capacity(m);
    let mut order_down = Vec::with_capacity(m);
    let mut parent = vec![None; m];
    let mut next = 0usize;
    for t in 0..=p.horizon() {
        while next < m && p.starts[next] == t {
            let below: usize = classes.iter().take_while(|c| c.height < 0).map(|c| c.count).sum();
            let above: usize = classes.iter().rev().take_while(|c| c.height > 0).map(|c| c.count).sum();
            order_up.insert(below, next);
            order_down.insert(above, next);
            match classes.binary_search_by_key(&0, |c| c.height) {
                Ok(i) => {
                    for u in classes[i].open.drain(..) {
                        parent[u] = Some(next);
                    }
                    classes[i].open.push(next);
                    classes[i].count += 1;
                }
                Err(i) => classes.insert(
                    i,
                    Class {
                        height: 0,
                        count: 1,
                        open: vec![next],
                    },
                ),
            }
            next += 1;
        }
        if t == p.horizon() {
            break;
        }
        let step = p.driver[t as usize];
        for c in classes.iter_mut() {
            c.height += increment(p.variant, step, c.height);
        }
        let mut merged: Vec<Class> = Vec::with_capacity(classes.len());
        for c in classes.drain(..) {
            match merged.last_mut() {
                Some(last) if last.height == c.height => {
                    last.count += c.count;
                    last.open.extend(c.open);
                }
                Some(last) => {
                    debug_assert!(last.height < c.height, "paths crossed");
                    merged.push(c);
                }
                None => merged.push(c),
            }
        }
        classes = merged;
    }
    Sweep {
        order_up,
        order_down,
        parent,
    }
}

/// Colour of a tree of the wood.
pub type TreeColor = Variant;

/// A forest on labels `1..=n` whose roots hang from a virtual root `0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedForest {
    color: TreeColor,
    parent: Vec<usize>,
    children: Vec<Vec<usize>>,
}

/// JSON schema `{"root":…, "parent":{label:label|0}, "order":{label:[children]}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestJson {
    /// `"green"` or `"red"`.
    pub root: TreeColor,
    /// Parent of every label, `0` for the root.
    pub parent: BTreeMap<usize, usize>,
    /// Children of every vertex in clockwise order, including the root `0`.
    pub order: BTreeMap<usize, Vec<usize>>,
}

impl RootedForest {
    /// Builds a forest from parents (`0` for the root, index 0 ignored) and
    /// child lists (index 0 for the root).
    pub fn new(color: TreeColor, parent: Vec<usize>, children: Vec<Vec<usize>>) -> Result<Self> {
        let f = RootedForest {
            color,
            parent,
            children,
        };
        f.validate()?;
        Ok(f)
    }

    /// Checks that every label has one parent listing it and that no
    /// label lies on a cycle.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.children.len() != n + 1 {
            return Err(Error::Invalid("child lists do not cover all labels".into()));
        }
        for v in 1..=n {
            let p = self.parent[v];
            if p > n || !self.children[p].contains(&v) {
                return Err(Error::Invalid(format!("label {v} missing from its parent's list")));
            }
        }
        if self.children.iter().map(Vec::len).sum::<usize>() != n {
            return Err(Error::Invalid("child lists have extra entries".into()));
        }
        for v in 1..=n {
            let mut u = v;
            let mut steps = 0;
            while u != 0 {
                u = self.parent[u];
                steps += 1;
                if steps > n {
                    return Err(Error::Invalid(format!("cycle through label {v}")));
                }
            }
        }
        Ok(())
    }

    /// Number of labels.
    pub fn n(&self) -> usize {
        self.parent.len() - 1
    }

    /// Green or red.
    pub fn color(&self) -> TreeColor {
        self.color
    }

    /// Parent of `label`, `0` for the root.
    pub fn parent(&self, label: usize) -> usize {
        self.parent[label]
    }

    /// Children of `label` (or of the root for `0`) in clockwise order.
    pub fn children(&self, label: usize) -> &[usize] {
        &self.children[label]
    }

    /// Labels in preorder, children visited in stored order.
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n());
        let mut stack: Vec<usize> = self.children[0].iter().rev().copied().collect();
        while let Some(v) = stack.pop() {
            out.push(v);
            stack.extend(self.children[v].iter().rev());
        }
        out
    }

    /// Serialisable view.
    pub fn to_json(&self) -> ForestJson {
        ForestJson {
            root: self.color,
            parent: (1..=self.n()).map(|v| (v, self.parent[v])).collect(),
            order: (0..=self.n()).map(|v| (v, self.children[v].clone())).collect(),
        }
    }
}

/// Permutation column and first-hit forest extracted from one process.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessSummary {
    /// `σ^up` for green and `σ^down` for red, 1-based and indexed by label.
    pub sigma: Vec<usize>,
    /// First-hit forest with children in process order.
    pub forest: RootedForest,
}

fn summarise(p: &CoalescentWalkProcess) -> ProcessSummary {
    let sw = p.sweep();
    let m = p.num_starts();
    let order = match p.variant {
        Variant::Green => &sw.order_up,
        Variant::Red => &sw.order_down,
    };
    let mut sigma = vec![0usize; m];
    for (pos, &idx) in order.iter().enumerate() {
        sigma[p.label(idx) - 1] = pos + 1;
    }
    let mut parent = vec![0usize; m + 1];
    let mut children = vec![Vec::new(); m + 1];
    for idx in 0..m {
        let v = p.label(idx);
        let pl = sw.parent[idx].map_or(0, |q| p.label(q));
        parent[v] = pl;
        children[pl].push(v);
    }
    for list in children.iter_mut() {
        list.sort_by_key(|&v| sigma[v - 1]);
    }
    ProcessSummary {
        sigma,
        forest: RootedForest {
            color: p.variant,
            parent,
            children,
        },
    }
}

/// Everything the pipeline derives from one string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wood {
    /// The string.
    pub string: SchnyderString,
    /// Its cone walk.
    pub walk: ConeWalk,
    /// The 3-permutation `(σ^g, σ^r)`.
    pub perm: DPermutation,
    /// Green tree.
    pub green: RootedForest,
    /// Red tree.
    pub red: RootedForest,
}

/// Runs string → walk → processes → permutation and trees.
pub fn analyse(s: &SchnyderString) -> Wood {
    let walk = string_to_walk(s);
    let g = summarise(&build_process(&walk, Variant::Green));
    let r = summarise(&build_process(&walk, Variant::Red));
    let perm = DPermutation::new(vec![g.sigma, r.sigma]).expect("sweep yields permutations");
    Wood {
        string: s.clone(),
        walk,
        perm,
        green: g.forest,
        red: r.forest,
    }
}

/// The Schnyder wood permutation `(σ^up(Z^g), σ^down(Z^r))` of a string.
pub fn schnyder_perm_from_string(s: &SchnyderString) -> DPermutation {
    analyse(s).perm
}

/// Green and red forests read from first hits of the two processes.
pub fn trees_from_processes(
    green: &CoalescentWalkProcess,
    red: &CoalescentWalkProcess,
) -> Result<(RootedForest, RootedForest)> {
    if green.variant != Variant::Green || red.variant != Variant::Red {
        return Err(Error::Invalid("expected a green and a red process".into()));
    }
    if green.horizon() != red.horizon() {
        return Err(Error::Invalid("processes come from different walks".into()));
    }
    Ok((summarise(green).forest, summarise(red).forest))
}

/// Green tree rebuilt from `(σ^g)^{-1}` alone: the root path of the most
/// recent vertex is kept as a stack of increasing labels, and a new label
/// hangs below the deepest stack entry smaller than itself.
pub fn green_tree_from_marginal(sigma_g_inverse: &[usize]) -> RootedForest {
    let n = sigma_g_inverse.len();
    let mut parent = vec![0usize; n + 1];
    let mut children = vec![Vec::new(); n + 1];
    let mut stack: Vec<usize> = Vec::new();
    for &x in sigma_g_inverse {
        if x == 0 || x > n {
            continue;
        }
        while stack.last().is_some_and(|&top| top > x) {
            stack.pop();
        }
        let p = stack.last().copied().unwrap_or(0);
        parent[x] = p;
        children[p].push(x);
        stack.push(x);
    }
    RootedForest {
        color: Variant::Green,
        parent,
        children,
    }
}

/// All valid strings of size `n` in lexicographic order (`b < g < r`).
pub fn enumerate_schnyder_strings(n: usize) -> Result<Vec<SchnyderString>> {
    if n == 0 || n > ENUMERATION_MAX_N {
        return Err(Error::Budget(format!(
            "string enumeration supports 1 ≤ n ≤ {ENUMERATION_MAX_N}, got {n}"
        )));
    }
    let mut out = Vec::new();
    let mut buf = Vec::with_capacity(3 * n);
    fn rec(n: usize, g: usize, b: usize, r: usize, buf: &mut Vec<u8>, out: &mut Vec<SchnyderString>) {
        if buf.len() == 3 * n {
            out.push(SchnyderString(buf.clone()));
            return;
        }
        let last = buf.last().copied();
        if b < g && last != Some(b'r') {
            buf.push(b'b');
            rec(n, g, b + 1, r, buf, out);
            buf.pop();
        }
        if g < n {
            buf.push(b'g');
            rec(n, g + 1, b, r, buf, out);
            buf.pop();
        }
        if r < b {
            buf.push(b'r');
            rec(n, g, b, r + 1, buf, out);
            buf.pop();
        }
    }
    rec(n, 0, 0, 0, &mut buf, &mut out);
    Ok(out)
}

/// Pre-green and pre-red processes of a string, in doubled units: time is
/// counted in half-steps and heights in halves.
pub fn pre_processes(s: &SchnyderString) -> (ExplicitProcess, ExplicitProcess) {
    let steps: Vec<(i64, i64)> = s
        .as_bytes()
        .iter()
        .map(|&c| match c {
            b'g' => (0, 1),
            b'b' => (1, -1),
            _ => (-1, 0),
        })
        .collect();
    let reversed: Vec<(i64, i64)> = steps.iter().rev().map(|&(x, y)| (-x, -y)).collect();
    let is_r: Vec<bool> = steps.iter().map(|&st| st == (-1, 0)).collect();
    let green = pre_process(&reversed, -1, None, true);
    let red = pre_process(&steps, 1, Some(&is_r), false);
    (green, red)
}

fn pre_process(
    steps: &[(i64, i64)],
    start_dy: i64,
    dwell_after: Option<&[bool]>,
    descending: bool,
) -> ExplicitProcess {
    let ticks = 2 * steps.len() as i64;
    let starts: Vec<i64> = steps
        .iter()
        .enumerate()
        .filter(|(_, st)| st.1 == start_dy)
        .map(|(t, _)| 2 * t as i64 + 1)
        .filter(|&h| h < ticks)
        .collect();
    let m = starts.len();
    let labels = (0..m)
        .map(|i| if descending { m - i } else { i + 1 })
        .collect();
    let paths = starts
        .iter()
        .map(|&j| {
            let mut z = 0i64;
            let mut path = vec![0i64];
            for h in j..ticks {
                let (x, y) = steps[(h / 2) as usize];
                let dwell = h % 2 == 0
                    && h > 0
                    && z == 0
                    && dwell_after.is_some_and(|r| r[(h / 2 - 1) as usize]);
                z += if dwell {
                    0
                } else if z >= 0 {
                    y
                } else {
                    -x
                };
                path.push(z);
            }
            path
        })
        .collect();
    ExplicitProcess {
        starts,
        labels,
        paths,
    }
}

/// Uniform sampling method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMethod {
    /// Backward counting with forward sampling.
    Dp,
    /// Unconditioned walk accepted when it is a cone walk.
    Rejection,
}

/// Exact state counts `N(t, y, x)` of completions to the origin at `2n`.
#[derive(Debug, Clone)]
struct Layout {
    n: usize,
}

impl Layout {
    fn ymax(&self, t: usize) -> i64 {
        t.min(2 * self.n - t) as i64
    }

    /// Valid heights at time `t`, lowest first.
    fn heights(&self, t: usize) -> impl Iterator<Item = i64> {
        let first = if t % 2 == 0 { 0 } else { -1 };
        (first..=self.ymax(t)).step_by(2)
    }

    fn row_len(t: usize, y: i64) -> usize {
        ((t as i64 - y) / 2 + 1) as usize
    }

    /// Offsets of the rows of slice `t`, with the total length appended.
    fn offsets(&self, t: usize) -> Vec<usize> {
        let mut off = vec![0usize];
        for y in self.heights(t) {
            let last = *off.last().expect("nonempty");
            off.push(last + Self::row_len(t, y));
        }
        off
    }

    fn row_index(t: usize, y: i64) -> usize {
        let first = if t % 2 == 0 { 0 } else { -1 };
        ((y - first) / 2) as usize
    }
}

/// A slice of counts at one time, rows indexed by height.
#[derive(Debug, Clone)]
struct Slice<T> {
    t: usize,
    offsets: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Clone> Slice<T> {
    fn get(&self, layout: &Layout, y: i64, x: i64) -> Option<&T> {
        if y < -1 || y > layout.ymax(self.t) || (self.t as i64 - y) % 2 != 0 || x < 0 {
            return None;
        }
        let r = Layout::row_index(self.t, y);
        let len = self.offsets[r + 1] - self.offsets[r];
        if x as usize >= len {
            return None;
        }
        Some(&self.vals[self.offsets[r] + x as usize])
    }
}

trait Weight: Clone + Sized {
    fn zero() -> Self;
    fn one() -> Self;
    fn add(&self, other: &Self) -> Self;
    fn normalise(_vals: &mut [Self]) {}
}

impl Weight for BigUint {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
}

impl Weight for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn normalise(vals: &mut [Self]) {
        let m = vals.iter().cloned().fold(0.0f64, f64::max);
        if m > 0.0 {
            let inv = 1.0 / m;
            for v in vals.iter_mut() {
                *v *= inv;
            }
        }
    }
}

fn final_slice<T: Weight>(layout: &Layout) -> Slice<T> {
    let t = 2 * layout.n;
    let offsets = layout.offsets(t);
    let mut vals = vec![T::zero(); *offsets.last().expect("nonempty")];
    vals[0] = T::one();
    Slice { t, offsets, vals }
}

/// Counts at time `t` from the counts at time `t+1`.
fn step_back<T: Weight>(layout: &Layout, next: &Slice<T>) -> Slice<T> {
    let t = next.t - 1;
    let offsets = layout.offsets(t);
    let mut vals = Vec::with_capacity(*offsets.last().expect("nonempty"));
    for y in layout.heights(t) {
        let len = Layout::row_len(t, y);
        let mut prefix = T::zero();
        for x in 0..len as i64 {
            if let Some(v) = next.get(layout, y + 1, x) {
                prefix = prefix.add(v);
            }
            let mut total = prefix.clone();
            if y > -1 {
                if let Some(v) = next.get(layout, y - 1, x + 1) {
                    total = total.add(v);
                }
            }
            vals.push(total);
        }
    }
    T::normalise(&mut vals);
    Slice { t, offsets, vals }
}

/// Candidate successors of state `(t, y, x)`: the `(1,−1)` step first, then
/// `(−k,1)` for `k = 0, 1, …`.
fn successors(y: i64, x: i64) -> impl Iterator<Item = ((i64, i64), (i64, i64))> {
    std::iter::once(((1, -1), (y - 1, x + 1)))
        .chain((0..=x).map(move |k| ((-k, 1), (y + 1, x - k))))
}

/// Uniform cone-walk sampler of a fixed size.
#[derive(Debug, Clone)]
pub struct SchnyderSampler {
    layout: Layout,
    kind: SamplerKind,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Exact(Vec<Slice<BigUint>>),
    Float {
        block: usize,
        checkpoints: BTreeMap<usize, Slice<f64>>,
    },
}

impl SchnyderSampler {
    /// Precomputes counts for size `n`, with the default size cap.
    pub fn new(n: usize) -> Result<Self> {
        Self::with_cap(n, DEFAULT_DP_MAX_N)
    }

    /// Precomputes counts for size `n`; sizes above `max_n` are refused.
    pub fn with_cap(n: usize, max_n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Invalid("size must be at least 1".into()));
        }
        if n > max_n {
            return Err(Error::Budget(format!("DP sampler size {n} exceeds {max_n}")));
        }
        Self::build(n, n <= EXACT_DP_MAX_N)
    }

    /// Precomputes normalised floating-point weights at any size up to
    /// [`DEFAULT_DP_MAX_N`].
    pub fn new_float(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Invalid("size must be at least 1".into()));
        }
        if n > DEFAULT_DP_MAX_N {
            return Err(Error::Budget(format!("DP sampler size {n} exceeds {DEFAULT_DP_MAX_N}")));
        }
        Self::build(n, false)
    }

    fn build(n: usize, exact: bool) -> Result<Self> {
        let layout = Layout { n };
        let kind = if exact {
            let mut slices = vec![final_slice::<BigUint>(&layout)];
            for _ in 0..2 * n {
                let next = step_back(&layout, slices.last().expect("nonempty"));
                slices.push(next);
            }
            slices.reverse();
            SamplerKind::Exact(slices)
        } else {
            let block = ((2 * n + 1) as f64).sqrt().ceil() as usize;
            let mut checkpoints = BTreeMap::new();
            let mut cur = final_slice::<f64>(&layout);
            loop {
                if cur.t % block == 0 || cur.t == 2 * n {
                    checkpoints.insert(cur.t, cur.clone());
                }
                if cur.t == 0 {
                    break;
                }
                cur = step_back(&layout, &cur);
            }
            SamplerKind::Float { block, checkpoints }
        };
        Ok(SchnyderSampler { layout, kind })
    }

    /// Size.
    pub fn n(&self) -> usize {
        self.layout.n
    }

    /// Number of cone walks of this size (exact tables only).
    pub fn count(&self) -> Option<BigUint> {
        match &self.kind {
            SamplerKind::Exact(slices) => Some(slices[0].vals[0].clone()),
            SamplerKind::Float { .. } => None,
        }
    }

    /// One uniform string.
    pub fn sample(&self, seed: u64) -> SchnyderString {
        self.sample_batch(&[seed]).pop().expect("one sample")
    }

    /// One uniform string per seed; each result equals `sample(seed)`.
    pub fn sample_batch(&self, seeds: &[u64]) -> Vec<SchnyderString> {
        let n = self.layout.n;
        let mut walkers: Vec<Walker> = seeds
            .iter()
            .map(|&s| Walker {
                rng: mc::rng(s),
                y: 0,
                x: 0,
                steps: Vec::with_capacity(2 * n),
            })
            .collect();
        match &self.kind {
            SamplerKind::Exact(slices) => {
                for w in walkers.iter_mut() {
                    for t in 0..2 * n {
                        w.advance_exact(&self.layout, &slices[t], &slices[t + 1]);
                    }
                }
            }
            SamplerKind::Float { block, checkpoints } => {
                let mut start = 0usize;
                while start < 2 * n {
                    let end = (start + block).min(2 * n);
                    let mut cur = checkpoints
                        .range(end..)
                        .next()
                        .map(|(_, s)| s.clone())
                        .expect("checkpoint at or after every block end");
                    while cur.t > end {
                        cur = step_back(&self.layout, &cur);
                    }
                    let mut stack = vec![cur];
                    while stack.last().expect("nonempty").t > start + 1 {
                        let prev = step_back(&self.layout, stack.last().expect("nonempty"));
                        stack.push(prev);
                    }
                    stack.reverse();
                    for next in &stack {
                        for w in walkers.iter_mut() {
                            w.advance_float(&self.layout, next);
                        }
                    }
                    start = end;
                }
            }
        }
        walkers
            .into_iter()
            .map(|w| walk_to_string(&ConeWalk(w.steps)))
            .collect()
    }
}

struct Walker {
    rng: Rng,
    y: i64,
    x: i64,
    steps: Vec<(i64, i64)>,
}

impl Walker {
    fn apply(&mut self, step: (i64, i64), to: (i64, i64)) {
        self.steps.push(step);
        self.y = to.0;
        self.x = to.1;
    }

    fn advance_exact(&mut self, layout: &Layout, here: &Slice<BigUint>, next: &Slice<BigUint>) {
        let total = here
            .get(layout, self.y, self.x)
            .expect("walker stays on reachable states")
            .clone();
        let mut r = random_below(&mut self.rng, &total);
        for (step, to) in successors(self.y, self.x) {
            if let Some(w) = next.get(layout, to.0, to.1) {
                if r < *w {
                    self.apply(step, to);
                    return;
                }
                r -= w;
            }
        }
        unreachable!("counts of successors add up to the state count");
    }

    fn advance_float(&mut self, layout: &Layout, next: &Slice<f64>) {
        let cands: Vec<((i64, i64), (i64, i64), f64)> = successors(self.y, self.x)
            .filter_map(|(s, to)| next.get(layout, to.0, to.1).map(|&w| (s, to, w)))
            .collect();
        let total: f64 = cands.iter().map(|c| c.2).sum();
        let mut u = self.rng.random::<f64>() * total;
        let mut chosen = None;
        for c in &cands {
            if c.2 > 0.0 {
                chosen = Some(c);
                if u < c.2 {
                    break;
                }
                u -= c.2;
            }
        }
        let c = chosen.expect("some successor has positive weight");
        self.apply(c.0, c.1);
    }
}

/// Uniform integer in `[0, bound)` by rejection on `bits(bound)` random bits.
fn random_below(rng: &mut Rng, bound: &BigUint) -> BigUint {
    let bits = bound.bits();
    let words = bits.div_ceil(32) as usize;
    let top = bits - 32 * (words as u64 - 1);
    loop {
        let mut digits: Vec<u32> = (0..words).map(|_| rng.next_u32()).collect();
        if top < 32 {
            digits[words - 1] &= (1u32 << top) - 1;
        }
        let v = BigUint::from_slice(&digits);
        if v < *bound {
            return v;
        }
    }
}

/// One unconditioned step: `(1,−1)` with probability 1/2, else `(−k,1)` with
/// probability `2^{−(k+2)}`, restricted to `k ≤` [`REJECTION_MAX_K`].
fn free_step(rng: &mut Rng) -> (i64, i64) {
    loop {
        let v = rng.next_u64();
        if v & 1 == 0 {
            return (1, -1);
        }
        let k = (v >> 1).trailing_zeros();
        if k <= REJECTION_MAX_K {
            return (-(k as i64), 1);
        }
    }
}

/// Rejection sampler: runs free walks until one is a cone walk of size `n`.
pub fn sample_rejection(n: usize, seed: u64, max_attempts: u64) -> Result<SchnyderString> {
    if n == 0 {
        return Err(Error::Invalid("size must be at least 1".into()));
    }
    let mut rng = mc::rng(seed);
    let mut steps = Vec::with_capacity(2 * n);
    for _ in 0..max_attempts {
        steps.clear();
        let (mut x, mut y, mut downs, mut ups) = (0i64, 0i64, 0usize, 0usize);
        let mut ok = true;
        for _ in 0..2 * n {
            let s = free_step(&mut rng);
            if s.1 < 0 {
                downs += 1;
            } else {
                ups += 1;
            }
            x += s.0;
            y += s.1;
            steps.push(s);
            if x < 0 || y < -1 || downs > n || ups > n {
                ok = false;
                break;
            }
        }
        if ok && x == 0 && y == 0 {
            return Ok(walk_to_string(&ConeWalk(steps)));
        }
    }
    Err(Error::RetryExhausted(max_attempts))
}

/// A uniform Schnyder wood string of size `n`.
pub fn sample_uniform_schnyder(n: usize, seed: u64, method: SampleMethod) -> Result<SchnyderString> {
    match method {
        SampleMethod::Dp => Ok(SchnyderSampler::new(n)?.sample(seed)),
        SampleMethod::Rejection => sample_rejection(n, seed, DEFAULT_REJECTION_CAP),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLDEN: &str = "gbggbgrgbrrgbbbgbrrggbrrrgbbrr";

    #[test]
    fn string_validation() {
        assert!(validate_string(GOLDEN).is_ok());
        assert!(validate_string("gbr").is_ok());
        assert!(validate_string("grb").is_err());
        assert!(validate_string("bgr").is_err());
        assert!(validate_string("gbrr").is_err());
        assert!(validate_string("ggbbrr").is_ok());
        assert!(validate_string("gx").is_err());
    }

    #[test]
    fn golden_walk() {
        let s = validate_string(GOLDEN).unwrap();
        let w = string_to_walk(&s);
        let expected = vec![
            (1, -1), (0, 1), (0, 1), (1, -1), (0, 1), (-1, 1), (1, -1), (-2, 1), (1, -1), (1, -1),
            (1, -1), (0, 1), (1, -1), (-2, 1), (0, 1), (1, -1), (-3, 1), (1, -1), (1, -1), (-2, 1),
        ];
        assert_eq!(w.steps(), expected.as_slice());
        assert!(ConeWalk::new(expected).is_ok());
        assert_eq!(walk_to_string(&w), s);
    }

    #[test]
    fn gbr_walk() {
        let s = validate_string("gbr").unwrap();
        assert_eq!(string_to_walk(&s).steps(), &[(1, -1), (-1, 1)]);
    }

    #[test]
    fn golden_starts() {
        let w = string_to_walk(&validate_string(GOLDEN).unwrap());
        let g = build_process(&w, Variant::Green);
        let r = build_process(&w, Variant::Red);
        assert_eq!(g.starts(), &[3, 5, 6, 8, 12, 14, 15, 17, 18, 20]);
        assert_eq!(r.starts(), &[0, 2, 3, 5, 6, 8, 12, 14, 15, 17]);
    }

    #[test]
    fn enumeration_counts() {
        let counts: Vec<usize> = (1..=5)
            .map(|n| enumerate_schnyder_strings(n).unwrap().len())
            .collect();
        assert_eq!(counts, vec![1, 3, 14, 84, 594]);
        assert_eq!(enumerate_schnyder_strings(1).unwrap()[0].as_str(), "gbr");
    }

    #[test]
    fn exact_counts_match_enumeration() {
        for n in 1..=5 {
            let s = SchnyderSampler::new(n).unwrap();
            assert_eq!(
                s.count().unwrap(),
                BigUint::from(enumerate_schnyder_strings(n).unwrap().len())
            );
        }
    }

    #[test]
    fn size_one_samples() {
        for seed in 0..5 {
            assert_eq!(sample_uniform_schnyder(1, seed, SampleMethod::Dp).unwrap().as_str(), "gbr");
            assert_eq!(
                sample_uniform_schnyder(1, seed, SampleMethod::Rejection).unwrap().as_str(),
                "gbr"
            );
        }
    }

    #[test]
    fn batch_matches_single() {
        let s = SchnyderSampler::new(70).unwrap();
        let seeds = [3u64, 9, 27];
        let batch = s.sample_batch(&seeds);
        for (b, &sd) in batch.iter().zip(&seeds) {
            assert_eq!(*b, s.sample(sd));
            assert!(validate_string(b.as_str()).is_ok());
        }
    }

    fn inverse(sigma: &[usize]) -> Vec<usize> {
        let mut inv = vec![0; sigma.len()];
        for (i, &v) in sigma.iter().enumerate() {
            inv[v - 1] = i + 1;
        }
        inv
    }

    #[test]
    fn golden_permutation() {
        let wood = analyse(&validate_string(GOLDEN).unwrap());
        let cols = wood.perm.cols_one_based();
        assert_eq!(inverse(&cols[0]), vec![10, 6, 1, 5, 3, 4, 9, 8, 2, 7]);
        assert_eq!(inverse(&cols[1]), vec![8, 7, 2, 10, 9, 4, 6, 5, 3, 1]);
    }

    #[test]
    fn golden_trees() {
        let wood = analyse(&validate_string(GOLDEN).unwrap());
        assert_eq!(wood.green.children(0), &[10, 6, 1]);
        assert_eq!(wood.red.children(10), &[9, 4, 6]);
        assert_eq!(wood.green.preorder(), inverse(&wood.perm.cols_one_based()[0]));
        assert_eq!(green_tree_from_marginal(&wood.green.preorder()), wood.green);
        assert_eq!(wood.red.preorder(), inverse(&wood.perm.cols_one_based()[1]));
    }

    #[test]
    fn gbr_permutation() {
        let p = schnyder_perm_from_string(&validate_string("gbr").unwrap());
        assert_eq!(p.cols_one_based(), vec![vec![1], vec![1]]);
    }

    #[test]
    fn explicit_process_orders() {
        let mut paths = vec![
            vec![0, 2, 2, 0, 2, 1, 0],
            vec![0, -1, 0, 2, 1, 0],
            vec![0, 2, 1, 0],
            vec![0, -2],
        ];
        paths[1].truncate(6);
        let z = ExplicitProcess::new(vec![2, 3, 5, 7], vec![1, 2, 3, 4], paths).unwrap();
        assert_eq!(sigma_up(&z), vec![4, 3, 2, 1]);
        assert_eq!(sigma_down(&z), vec![2, 3, 1, 4]);
    }

    #[test]
    fn sweep_matches_pairwise_orders() {
        for n in 1..=5 {
            for s in enumerate_schnyder_strings(n).unwrap() {
                let w = string_to_walk(&s);
                let g = build_process(&w, Variant::Green);
                let r = build_process(&w, Variant::Red);
                let p = analyse(&s).perm.cols_one_based();
                assert_eq!(p[0], sigma_up(&g), "{s}");
                assert_eq!(p[1], sigma_down(&r), "{s}");
            }
        }
    }

    #[test]
    fn pre_processes_agree() {
        for n in 1..=5 {
            for s in enumerate_schnyder_strings(n).unwrap() {
                let (pg, pr) = pre_processes(&s);
                let p = analyse(&s).perm.cols_one_based();
                assert_eq!(sigma_up(&pg), p[0], "green {s}");
                assert_eq!(sigma_down(&pr), p[1], "red {s}");
            }
        }
    }
}

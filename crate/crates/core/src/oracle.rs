//! Exhaustive enumerators and exact laws behind the cross-check manifest.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::time::{Duration, Instant};

use num::{BigInt, BigRational, One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::{self, DPermutation, IndexSet};
use crate::permuton::{self, EmpiricalPermuton, ExactLimits};
use crate::schnyder::{self, Variant};
use crate::perm::SignSequence;
use crate::separable::{self, SignTree};

/// Largest `(n!)^{d−1}` accepted by [`all_d_permutations`].
pub const MAX_ENUMERATION: u64 = 10_000_000;

/// Size caps of the exhaustive checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationBudget {
    /// Largest Schnyder wood size.
    pub schnyder_n: usize,
    /// Largest separable size.
    pub separable_n: usize,
    /// Largest permutation size of the pattern-lemma check.
    pub lemma_n: usize,
    /// Largest pattern size.
    pub max_k: usize,
    /// Wall-clock cap; checks starting after it are reported as skipped.
    pub wall_clock: Duration,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        EnumerationBudget {
            schnyder_n: 5,
            separable_n: 5,
            lemma_n: 5,
            max_k: 3,
            wall_clock: Duration::from_secs(600),
        }
    }
}

impl EnumerationBudget {
    /// Rejects zero caps.
    pub fn validate(&self) -> Result<()> {
        if self.schnyder_n == 0 || self.separable_n == 0 || self.lemma_n == 0 || self.max_k == 0 {
            return Err(Error::Invalid("enumeration caps must be positive".into()));
        }
        if self.wall_clock.is_zero() {
            return Err(Error::Invalid("wall-clock cap must be positive".into()));
        }
        Ok(())
    }
}

/// Every d-permutation of size `n`, each once, in lexicographic order.
pub fn all_d_permutations(n: usize, d: usize) -> Result<impl Iterator<Item = DPermutation>> {
    if n == 0 || d < 2 {
        return Err(Error::Invalid(format!("need n ≥ 1 and d ≥ 2, got n={n}, d={d}")));
    }
    let total = (1..=n as u64)
        .try_fold(1u64, |a, b| a.checked_mul(b))
        .and_then(|f| f.checked_pow(d as u32 - 1))
        .filter(|&t| t <= MAX_ENUMERATION)
        .ok_or_else(|| Error::Budget(format!("(n!)^(d-1) for n={n}, d={d} exceeds {MAX_ENUMERATION}")))?;
    Ok((0..total).map(move |r| DPermutation::from_lex_rank(n, d, r)))
}

/// Random model whose size-`k` patterns have an exact law.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplerSpec {
    /// Brownian separable permuton with sign probabilities `p`.
    Brownian {
        /// Probability of `+1` in each coordinate.
        p: Vec<BigRational>,
    },
    /// Uniform d-separable permutation of size `n`.
    UniformSeparable {
        /// Size.
        n: usize,
        /// Dimension.
        d: usize,
    },
    /// Uniform Schnyder wood permutation of size `n`.
    UniformSchnyder {
        /// Size.
        n: usize,
    },
}

/// Exact law of the pattern of size `k`, keyed by pattern.
pub type PatternLaw = BTreeMap<DPermutation, BigRational>;

/// Exact law of a size-`k` pattern under `spec` for `k ≤ 4`.
pub fn exact_pattern_law(spec: &SamplerSpec, k: usize) -> Result<PatternLaw> {
    if k == 0 || k > 4 {
        return Err(Error::EnumerationLimit { k, limit: 4 });
    }
    match spec {
        SamplerSpec::Brownian { p } => brownian_law(p, k),
        SamplerSpec::UniformSeparable { n, d } => {
            average_pattern_law(&separable::enumerate_separable(*n, *d)?, k)
        }
        SamplerSpec::UniformSchnyder { n } => {
            let perms: Vec<DPermutation> = schnyder::enumerate_schnyder_strings(*n)?
                .iter()
                .map(schnyder::schnyder_perm_from_string)
                .collect();
            average_pattern_law(&perms, k)
        }
    }
}

fn brownian_law(p: &[BigRational], k: usize) -> Result<PatternLaw> {
    if p.is_empty() || p.iter().any(|x| *x < BigRational::zero() || *x > BigRational::one()) {
        return Err(Error::Invalid("probabilities must lie in [0, 1]".into()));
    }
    let m = p.len();
    let shapes: Vec<_> = separable::all_shapes(k)
        .into_iter()
        .filter(|s| (0..s.len()).all(|v| s.children(v).len() != 1 && s.children(v).len() <= 2))
        .collect();
    let tree_weight = BigRational::new(BigInt::one(), BigInt::from(shapes.len()));
    let mut law = PatternLaw::new();
    for shape in shapes {
        let internal = shape.internal();
        let slots = internal.len() * m;
        for code in 0u64..(1u64 << slots) {
            let mut w = tree_weight.clone();
            let mut signs: Vec<Option<SignSequence>> = vec![None; shape.len()];
            for (a, &v) in internal.iter().enumerate() {
                let mask = ((code >> (a * m)) & ((1 << m) - 1)) as u32;
                let s = SignSequence::from_mask(mask, m);
                for (j, &x) in s.signs().iter().enumerate() {
                    w *= if x > 0 { p[j].clone() } else { BigRational::one() - &p[j] };
                }
                signs[v] = Some(s);
            }
            let t = SignTree::new(m + 1, shape.clone(), signs)?;
            *law.entry(separable::sign_tree_inverse(&t)).or_insert_with(BigRational::zero) += w;
        }
    }
    Ok(law)
}

fn average_pattern_law(perms: &[DPermutation], k: usize) -> Result<PatternLaw> {
    let mut law = PatternLaw::new();
    let Some(first) = perms.first() else {
        return Err(Error::Invalid("empty support".into()));
    };
    if k > first.n() {
        return Err(Error::Invalid(format!("pattern size {k} exceeds {}", first.n())));
    }
    let per = BigRational::new(
        BigInt::one(),
        BigInt::from(perms.len()) * BigInt::from(perm::binomial(first.n(), k)),
    );
    for s in perms {
        perm::for_each_subset(s.n(), k, |idx| {
            *law.entry(perm::pattern_at_zero_based(s, idx))
                .or_insert_with(BigRational::zero) += &per;
        });
    }
    Ok(law)
}

/// Outcome of one cross-check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    /// Short identifier.
    pub name: String,
    /// `"pass"`, `"fail"` or `"skipped"`.
    pub status: String,
    /// Wall-clock time in milliseconds.
    pub millis: f64,
    /// Summary or first counterexample.
    pub detail: String,
}

/// All cross-checks of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// Budget used.
    pub budget: EnumerationBudget,
    /// One entry per check.
    pub checks: Vec<CheckResult>,
    /// True when every check passed.
    pub all_passed: bool,
}

type Check = (&'static str, fn(&EnumerationBudget) -> std::result::Result<String, String>);

/// Names of the checks run by [`verify`], in order.
pub fn check_names() -> Vec<&'static str> {
    checks().iter().map(|c| c.0).collect()
}

fn checks() -> Vec<Check> {
    vec![
        ("all_d_permutations.counts", check_enumeration_counts),
        ("schnyder.golden", check_schnyder_golden),
        ("schnyder.explicit_process", check_explicit_process),
        ("schnyder.counts_vs_dp", check_schnyder_counts),
        ("schnyder.bijections", check_schnyder_bijections),
        ("schnyder.shared_green_marginal", check_shared_green),
        ("separable.sign_swap_round_trips", check_separable_round_trips),
        ("separable.counts", check_separable_counts),
        ("separable.pattern_from_tree", check_pattern_from_tree),
        ("separable.offspring_law", check_offspring_law),
        ("brownian.exact_law", check_brownian_law),
        ("permuton.pattern_lemma", check_pattern_lemma),
    ]
}

/// Runs every cross-check within `budget`.
pub fn verify(budget: &EnumerationBudget) -> Result<Manifest> {
    budget.validate()?;
    let start = Instant::now();
    let mut out = Vec::new();
    for (name, f) in checks() {
        if start.elapsed() > budget.wall_clock {
            out.push(CheckResult {
                name: name.into(),
                status: "skipped".into(),
                millis: 0.0,
                detail: "wall-clock cap reached".into(),
            });
            continue;
        }
        let t = Instant::now();
        let r = f(budget);
        let millis = t.elapsed().as_secs_f64() * 1e3;
        let (status, detail) = match r {
            Ok(d) => ("pass", d),
            Err(d) => ("fail", d),
        };
        out.push(CheckResult {
            name: name.into(),
            status: status.into(),
            millis,
            detail,
        });
    }
    let all_passed = out.iter().all(|c| c.status == "pass");
    Ok(Manifest {
        budget: *budget,
        checks: out,
        all_passed,
    })
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: Error) -> String {
    e.to_string()
}

fn check_enumeration_counts(_: &EnumerationBudget) -> std::result::Result<String, String> {
    for (n, d, want) in [(2usize, 3usize, 4usize), (3, 2, 6), (3, 3, 36)] {
        let all: Vec<_> = all_d_permutations(n, d).map_err(err)?.collect();
        ensure(all.len() == want, || format!("n={n} d={d}: {} elements", all.len()))?;
        ensure(all.windows(2).all(|w| w[0] < w[1]), || format!("n={n} d={d}: not increasing"))?;
        for p in &all {
            perm::validate(&p.cols_one_based()).map_err(|e| format!("{e:?}"))?;
        }
    }
    Ok("sizes 4, 6, 36".into())
}

/// The string of the ten-vertex reference wood.
pub const GOLDEN_STRING: &str = "gbggbgrgbrrgbbbgbrrggbrrrgbbrr";

fn inverse(sigma: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; sigma.len()];
    for (i, &v) in sigma.iter().enumerate() {
        inv[v - 1] = i + 1;
    }
    inv
}

fn check_schnyder_golden(_: &EnumerationBudget) -> std::result::Result<String, String> {
    let s = schnyder::validate_string(GOLDEN_STRING).map_err(err)?;
    let wood = schnyder::analyse(&s);
    let cols = wood.perm.cols_one_based();
    ensure(inverse(&cols[0]) == [10, 6, 1, 5, 3, 4, 9, 8, 2, 7], || {
        format!("green inverse {:?}", inverse(&cols[0]))
    })?;
    ensure(inverse(&cols[1]) == [8, 7, 2, 10, 9, 4, 6, 5, 3, 1], || {
        format!("red inverse {:?}", inverse(&cols[1]))
    })?;
    ensure(wood.green.children(0) == [10, 6, 1], || "green root children".into())?;
    ensure(wood.red.children(10) == [9, 4, 6], || "red children of 10".into())?;
    Ok("reference wood reproduced".into())
}

/// The four-path example process with starts `{2, 3, 5, 7}`.
pub fn example_process() -> schnyder::ExplicitProcess {
    schnyder::ExplicitProcess::new(
        vec![2, 3, 5, 7],
        vec![1, 2, 3, 4],
        vec![
            vec![0, 2, 2, 0, 2, 1, 0],
            vec![0, -1, 0, 2, 1, 0],
            vec![0, 2, 1, 0],
            vec![0, -2],
        ],
    )
    .expect("valid example")
}

fn check_explicit_process(_: &EnumerationBudget) -> std::result::Result<String, String> {
    let z = example_process();
    let up = schnyder::sigma_up(&z);
    let down = schnyder::sigma_down(&z);
    ensure(up == [4, 3, 2, 1] && down == [2, 3, 1, 4], || format!("up {up:?} down {down:?}"))?;
    Ok("(4,3,2,1) and (2,3,1,4)".into())
}

fn check_schnyder_counts(b: &EnumerationBudget) -> std::result::Result<String, String> {
    let want = [1usize, 3, 14, 84, 594, 4719];
    for n in 1..=b.schnyder_n.min(schnyder::ENUMERATION_MAX_N) {
        let e = schnyder::enumerate_schnyder_strings(n).map_err(err)?.len();
        let dp = schnyder::SchnyderSampler::new(n).map_err(err)?.count().expect("exact table");
        ensure(e == want[n - 1] && dp == e.into(), || format!("n={n}: {e} strings, dp {dp}"))?;
    }
    Ok(format!("n ≤ {}", b.schnyder_n))
}

/// Exhaustive checks of the Schnyder pipeline for one size; returns the
/// number of woods checked.
pub fn schnyder_bijection_suite(n: usize) -> std::result::Result<usize, String> {
    let strings = schnyder::enumerate_schnyder_strings(n).map_err(err)?;
    let mut seen = HashSet::new();
    for s in &strings {
        let w = schnyder::string_to_walk(s);
        schnyder::ConeWalk::new(w.steps().to_vec()).map_err(|e| format!("{s}: {e}"))?;
        ensure(schnyder::walk_to_string(&w) == *s, || format!("{s}: round trip"))?;
        let wood = schnyder::analyse(s);
        ensure(seen.insert(wood.perm.clone()), || format!("{s}: permutation repeated"))?;
        let (pg, pr) = schnyder::pre_processes(s);
        let cols = wood.perm.cols_one_based();
        ensure(schnyder::sigma_up(&pg) == cols[0], || format!("{s}: pre-green differs"))?;
        ensure(schnyder::sigma_down(&pr) == cols[1], || format!("{s}: pre-red differs"))?;
        ensure(schnyder::green_tree_from_marginal(&inverse(&cols[0])) == wood.green, || {
            format!("{s}: green tree from marginal differs")
        })?;
        ensure(wood.green.preorder() == inverse(&cols[0]), || format!("{s}: green traversal"))?;
        ensure(wood.red.preorder() == inverse(&cols[1]), || format!("{s}: red traversal"))?;
        for v in 1..=n {
            let pg = wood.green.parent(v);
            ensure(pg < v, || format!("{s}: green edge {v}→{pg}"))?;
            let pr = wood.red.parent(v);
            ensure(pr == 0 || pr > v, || format!("{s}: red edge {v}→{pr}"))?;
        }
        wood.green.validate().map_err(|e| format!("{s}: {e}"))?;
        wood.red.validate().map_err(|e| format!("{s}: {e}"))?;
        let g = schnyder::build_process(&w, Variant::Green);
        let r = schnyder::build_process(&w, Variant::Red);
        let two_n = 2 * n as i64;
        let mirrored: Vec<i64> = g.starts().iter().rev().map(|&j| two_n - j).collect();
        ensure(mirrored == r.starts(), || format!("{s}: start duality"))?;
    }
    Ok(strings.len())
}

fn check_schnyder_bijections(b: &EnumerationBudget) -> std::result::Result<String, String> {
    let mut total = 0;
    for n in 1..=b.schnyder_n.min(schnyder::ENUMERATION_MAX_N) {
        total += schnyder_bijection_suite(n)?;
    }
    Ok(format!("{total} woods"))
}

/// Pairs of size-`n` strings whose permutations share `σ^g` but not `σ^r`.
pub fn shared_green_pairs(n: usize) -> Result<Vec<(String, String)>> {
    let mut by_green: HashMap<Vec<u32>, Vec<(String, Vec<u32>)>> = HashMap::new();
    for s in schnyder::enumerate_schnyder_strings(n)? {
        let p = schnyder::schnyder_perm_from_string(&s);
        by_green
            .entry(p.col(0).to_vec())
            .or_default()
            .push((s.to_string(), p.col(1).to_vec()));
    }
    let mut out = Vec::new();
    for group in by_green.values() {
        for i in 0..group.len() {
            for j in i + 1..group.len() {
                if group[i].1 != group[j].1 {
                    out.push((group[i].0.clone(), group[j].0.clone()));
                }
            }
        }
    }
    out.sort();
    Ok(out)
}

fn check_shared_green(_: &EnumerationBudget) -> std::result::Result<String, String> {
    let pairs = shared_green_pairs(3).map_err(err)?;
    ensure(!pairs.is_empty(), || "no pair at n=3".into())?;
    Ok(format!("{} pairs at n=3, e.g. {} / {}", pairs.len(), pairs[0].0, pairs[0].1))
}

/// Exhaustive separable checks for one size and dimension; returns the
/// number of separable permutations.
pub fn separable_suite(n: usize, d: usize) -> std::result::Result<usize, String> {
    let all = separable::enumerate_separable(n, d).map_err(err)?;
    for s in &all {
        let t = separable::sign_tree(s).map_err(err)?;
        ensure(t.is_reduced(), || format!("{s}: sign tree not reduced"))?;
        ensure(separable::sign_tree_inverse(&t) == *s, || format!("{s}: sign round trip"))?;
        let sw = separable::swap_tree(s).map_err(err)?;
        ensure(separable::swap_to_sign(&sw) == t, || format!("{s}: swap round trip"))?;
    }
    let trees = separable::all_sign_trees(n, d);
    ensure(trees.len() == all.len(), || {
        format!("n={n} d={d}: {} trees vs {} permutations", trees.len(), all.len())
    })?;
    let from_trees: HashSet<DPermutation> = trees.iter().map(separable::sign_tree_inverse).collect();
    ensure(from_trees.len() == all.len() && all.iter().all(|s| from_trees.contains(s)), || {
        format!("n={n} d={d}: tree images differ")
    })?;
    for t in &trees {
        let s = separable::sign_tree_inverse(t);
        ensure(separable::sign_tree(&s).map_err(err)? == *t, || format!("{s}: tree round trip"))?;
    }
    Ok(all.len())
}

fn check_separable_round_trips(b: &EnumerationBudget) -> std::result::Result<String, String> {
    let mut total = 0;
    for d in [2, 3] {
        for n in 1..=b.separable_n.min(5) {
            total += separable_suite(n, d)?;
        }
    }
    Ok(format!("{total} permutations"))
}

/// True if `σ` avoids `τ`.
pub fn avoids(sigma: &DPermutation, tau: &DPermutation) -> bool {
    perm::occ(tau, sigma).map(|c| c == 0).unwrap_or(true)
}

/// Separability through forbidden patterns: every 2-dimensional marginal
/// avoids 2413 and 3142, and every 3-dimensional marginal avoids the
/// symmetry class of `((1,3,2),(2,1,3))`.
pub fn separable_by_avoidance(sigma: &DPermutation) -> bool {
    let d = sigma.d();
    let mut coords: Vec<Vec<u32>> = vec![(0..sigma.n() as u32).collect()];
    coords.extend(sigma.cols().iter().cloned());
    let two: Vec<DPermutation> = ["2,4,1,3", "3,1,4,2"].iter().map(|s| s.parse().expect("pattern")).collect();
    for a in 0..d {
        for b in a + 1..d {
            let m = projection(&coords, &[a, b]);
            if two.iter().any(|t| !avoids(&m, t)) {
                return false;
            }
        }
    }
    if d >= 3 {
        let base = [vec![0u32, 1, 2], vec![0, 2, 1], vec![1, 0, 2]];
        let forbidden = symmetry_class(&base);
        for a in 0..d {
            for b in a + 1..d {
                for c in b + 1..d {
                    let m = projection(&coords, &[a, b, c]);
                    if forbidden.iter().any(|t| !avoids(&m, t)) {
                        return false;
                    }
                }
            }
        }
    }
    true
}

fn projection(coords: &[Vec<u32>], axes: &[usize]) -> DPermutation {
    let n = coords[0].len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| coords[axes[0]][i]);
    let cols = axes[1..]
        .iter()
        .map(|&a| order.iter().map(|&i| coords[a][i]).collect())
        .collect();
    DPermutation::from_zero_based(cols).expect("projection is a permutation")
}

/// Images of a 3-dimensional point set under axis permutations and reversals.
fn symmetry_class(coords: &[Vec<u32>]) -> Vec<DPermutation> {
    let n = coords[0].len() as u32;
    let mut out = HashSet::new();
    for axes in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
        for flips in 0..8u32 {
            let c: Vec<Vec<u32>> = (0..3)
                .map(|i| {
                    coords[axes[i]]
                        .iter()
                        .map(|&v| if flips >> i & 1 == 1 { n - 1 - v } else { v })
                        .collect()
                })
                .collect();
            out.insert(projection(&c, &[0, 1, 2]));
        }
    }
    out.into_iter().collect()
}

fn check_separable_counts(b: &EnumerationBudget) -> std::result::Result<String, String> {
    let want = [1usize, 2, 6, 22, 90, 394];
    for n in 1..=b.separable_n.min(6) {
        let c = separable::enumerate_separable(n, 2).map_err(err)?.len();
        ensure(c == want[n - 1], || format!("d=2 n={n}: {c}"))?;
    }
    for d in [2, 3] {
        for n in 1..=b.separable_n.min(5) {
            for s in all_d_permutations(n, d).map_err(err)? {
                ensure(separable::is_separable(&s) == separable_by_avoidance(&s), || {
                    format!("{s}: decomposition and avoidance disagree")
                })?;
            }
        }
    }
    Ok("d=2 counts and avoidance characterisation".into())
}

fn check_pattern_from_tree(b: &EnumerationBudget) -> std::result::Result<String, String> {
    let mut total = 0usize;
    for d in [2, 3] {
        for n in 1..=b.separable_n.min(5) {
            for s in separable::enumerate_separable(n, d).map_err(err)? {
                let t = separable::sign_tree(&s).map_err(err)?;
                for k in 1..=b.max_k.min(n) {
                    let mut bad = None;
                    perm::for_each_subset(n, k, |idx| {
                        let set = IndexSet::new(idx.iter().map(|i| i + 1).collect(), n).expect("valid");
                        let a = separable::pattern_from_tree(&t, &set).expect("valid set");
                        total += 1;
                        if a != perm::pattern_at_zero_based(&s, idx) && bad.is_none() {
                            bad = Some(format!("{s} on {idx:?}"));
                        }
                    });
                    if let Some(b) = bad {
                        return Err(b);
                    }
                }
            }
        }
    }
    Ok(format!("{total} index sets"))
}

fn check_offspring_law(_: &EnumerationBudget) -> std::result::Result<String, String> {
    for d in 2..=8 {
        let l = separable::offspring_law(d).map_err(err)?;
        ensure((l.total_mass() - 1.0).abs() < 1e-12, || format!("d={d}: mass"))?;
        ensure((l.mean() - 1.0).abs() < 1e-12, || format!("d={d}: mean {}", l.mean()))?;
        let v = l.second_moment_closed_form() - 1.0;
        ensure((l.variance() - v).abs() < 1e-10 && v > 0.0, || {
            format!("d={d}: variance {} vs {v}", l.variance())
        })?;
        ensure(l.pmf(1) == 0.0, || format!("d={d}: P(1) ≠ 0"))?;
    }
    Ok("d = 2..8".into())
}

/// Rational from a decimal string such as `"0.3"`.
pub fn rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    let digits = format!("{int}{frac}");
    let num: BigInt = digits
        .parse()
        .map_err(|_| Error::Invalid(format!("{s:?} is not a decimal number")))?;
    Ok(BigRational::new(num, num::pow(BigInt::from(10), frac.len())))
}

fn check_brownian_law(b: &EnumerationBudget) -> std::result::Result<String, String> {
    let half = rational("0.5").map_err(err)?;
    let quarter = &half * &half;
    let law2 = exact_pattern_law(&SamplerSpec::Brownian { p: vec![half.clone(), half.clone()] }, 2).map_err(err)?;
    ensure(law2.len() == 4 && law2.values().all(|v| *v == quarter), || format!("k=2 law {law2:?}"))?;
    for (p1, p2) in [("0.5", "0.5"), ("0.3", "0.8")] {
        let (p1, p2) = (rational(p1).map_err(err)?, rational(p2).map_err(err)?);
        let spec = SamplerSpec::Brownian { p: vec![p1.clone(), p2.clone()] };
        for k in 1..=b.max_k.min(4) {
            let law = exact_pattern_law(&spec, k).map_err(err)?;
            let total: BigRational = law.values().sum();
            ensure(total == BigRational::one(), || format!("k={k}: total {total}"))?;
        }
        let law2 = exact_pattern_law(&spec, 2).map_err(err)?;
        let id2 = DPermutation::identity(2, 3);
        ensure(law2[&id2] == &p1 * &p2, || "k=2 identity".into())?;
        let law3 = exact_pattern_law(&spec, 3).map_err(err)?;
        let id3 = DPermutation::identity(3, 3);
        ensure(law3[&id3] == &p1 * &p1 * &p2 * &p2, || "k=3 identity".into())?;
        let t: DPermutation = "1,2,3|1,3,2".parse().expect("pattern");
        let want = &half * &p1 * &p1 * &p2 * (BigRational::one() - &p2);
        ensure(law3.get(&t) == Some(&want), || format!("k=3 {t}: {:?}", law3.get(&t)))?;
    }
    Ok("k ≤ 3 closed forms and totals".into())
}

/// Verifies `|freq(τ,σ) − P(P_{μ_σ}[k] = τ)| ≤ C(k,2)/n` exactly for every
/// `σ` of size `n`, every `k ≤ max_k` and every `τ`; returns the number of
/// permutations checked.
pub fn pattern_lemma_suite(n: usize, d: usize, max_k: usize) -> std::result::Result<usize, String> {
    let perms: Vec<DPermutation> = all_d_permutations(n, d).map_err(err)?.collect();
    let limits = ExactLimits { max_n: n.max(6), max_k: max_k.max(3) };
    perms
        .par_iter()
        .map(|s| {
            let mu = EmpiricalPermuton::new(s.clone());
            for k in 1..=max_k.min(n) {
                let law = permuton::exact_pattern_law(&mu, k, limits).map_err(err)?;
                let kd = law.weights.len();
                let mut occ = vec![0u64; kd];
                perm::for_each_subset(n, k, |idx| {
                    occ[perm::pattern_at_zero_based(s, idx).lex_rank() as usize] += 1;
                });
                let c = u128::try_from(perm::binomial(n, k)).expect("small binomial");
                let den = law.denom as u128;
                let bound = (k * (k - 1) / 2) as u128 * c * den;
                for r in 0..kd {
                    let lhs = (occ[r] as u128 * den).abs_diff(law.weights[r] as u128 * c) * n as u128;
                    if lhs > bound {
                        return Err(format!("{s} k={k} pattern rank {r}"));
                    }
                }
            }
            Ok(())
        })
        .collect::<std::result::Result<Vec<()>, String>>()?;
    Ok(perms.len())
}

fn check_pattern_lemma(b: &EnumerationBudget) -> std::result::Result<String, String> {
    let mut total = 0;
    for d in [2, 3] {
        for n in 1..=b.lemma_n.min(6) {
            total += pattern_lemma_suite(n, d, b.max_k.min(3))?;
        }
    }
    Ok(format!("{total} permutations"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_manifest_passes() {
        let m = verify(&EnumerationBudget {
            lemma_n: 4,
            ..Default::default()
        })
        .unwrap();
        for c in &m.checks {
            assert_eq!(c.status, "pass", "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn decimal_rationals() {
        assert_eq!(rational("0.3").unwrap(), BigRational::new(3.into(), 10.into()));
        assert_eq!(rational("1").unwrap(), BigRational::one());
    }
}

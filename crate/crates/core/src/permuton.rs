//! Empirical permutons with their distances and pattern statistics.
//!
//! The empirical permuton `μ_σ` of a d-permutation `σ` of size `n` spreads
//! mass `1/n` uniformly over the cube
//! `((i−1)/n, i/n) × Π_j ((σ(i)^{(j)}−1)/n, σ(i)^{(j)}/n)` of every point.

use std::collections::BTreeMap;

use num::{BigInt, BigRational};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::{self, Estimate, Rng};
use crate::perm::{self, factorial_u64, DPermutation};

/// Number of resampling attempts when a sampled point cloud contains a tie.
pub const TIE_RETRIES: usize = 16;

/// Default cap on `(n1+n2+1)^{2d}` for exact box distances.
pub const DEFAULT_BOX_BUDGET: u64 = 100_000_000;

/// Cap on `L^d` lattice evaluations for CDF sup distances.
pub const CDF_LATTICE_BUDGET: u64 = 20_000_000_000;

/// The grid measure `μ_σ` of a d-permutation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalPermuton {
    source: DPermutation,
}

/// Points in `[0,1]^d` together with the seed and generator that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    /// One row of d coordinates per point.
    pub points: Vec<Vec<f64>>,
    /// Seed of the generating run.
    pub seed: u64,
    /// Short name of the generator.
    pub generator: String,
}

impl EmpiricalPermuton {
    /// The empirical permuton of `σ`.
    pub fn new(source: DPermutation) -> Self {
        EmpiricalPermuton { source }
    }

    /// Underlying permutation.
    pub fn source(&self) -> &DPermutation {
        &self.source
    }

    /// Dimension.
    pub fn d(&self) -> usize {
        self.source.d()
    }

    /// Number of cubes.
    pub fn n(&self) -> usize {
        self.source.n()
    }

    /// 0-based cell of cube `i` in coordinate `c` (coordinate 0 is the index).
    fn cell(&self, i: usize, c: usize) -> u32 {
        if c == 0 {
            i as u32
        } else {
            self.source.col(c - 1)[i]
        }
    }
}

impl PointCloud {
    /// Writes the cloud as CSV with header `i,x1,...,xd` and 1-based row numbers.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        write_points_csv(&self.points, w)
    }
}

/// Writes rows of points as CSV with header `i,x1,...,xd`.
pub fn write_points_csv<W: std::io::Write>(points: &[Vec<f64>], w: W) -> Result<()> {
    let io = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
    let d = points.first().map_or(0, Vec::len);
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["i".to_string()];
    header.extend((1..=d).map(|c| format!("x{c}")));
    out.write_record(&header).map_err(io)?;
    for (i, p) in points.iter().enumerate() {
        let mut row = vec![(i + 1).to_string()];
        row.extend(p.iter().map(|x| format!("{x:?}")));
        out.write_record(&row).map_err(io)?;
    }
    out.flush()
        .map_err(|e| Error::Invalid(format!("csv: {e}")))?;
    Ok(())
}

/// Fraction of the 0-based cell `v` of a size-`n` grid lying below `x`.
fn clipped(n: usize, v: u32, x: f64) -> f64 {
    (n as f64 * x - v as f64).clamp(0.0, 1.0)
}

/// `F(x) = μ(Π[0, x_i])`, summed cube by cube.
pub fn cdf(mu: &EmpiricalPermuton, x: &[f64]) -> Result<f64> {
    if x.len() != mu.d() {
        return Err(Error::DimensionMismatch(x.len(), mu.d()));
    }
    if let Some(bad) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Invalid(format!("coordinate {bad} outside [0,1]")));
    }
    let n = mu.n();
    let total: f64 = (0..n)
        .map(|i| {
            (0..mu.d())
                .map(|c| clipped(n, mu.cell(i, c), x[c]))
                .product::<f64>()
        })
        .sum();
    Ok(total / n as f64)
}

/// Union of the grids `{i/n1}` and `{j/n2}`, as reduced-free fractions `p/q`.
#[derive(Debug, Clone)]
struct Lattice {
    pts: Vec<(u64, u64)>,
}

impl Lattice {
    fn new(n1: usize, n2: usize) -> Self {
        let (n1, n2) = (n1 as u64, n2 as u64);
        let mut pts = Vec::with_capacity((n1 + n2 + 1) as usize);
        let (mut i, mut j) = (0u64, 0u64);
        while i <= n1 || j <= n2 {
            let take_i = j > n2 || (i <= n1 && i * n2 <= j * n1);
            let take_j = i > n1 || (j <= n2 && j * n1 <= i * n2);
            if take_i && take_j {
                pts.push((i, n1));
                i += 1;
                j += 1;
            } else if take_i {
                pts.push((i, n1));
                i += 1;
            } else {
                pts.push((j, n2));
                j += 1;
            }
        }
        Lattice { pts }
    }

    fn len(&self) -> usize {
        self.pts.len()
    }

    /// Exact `clamp(n·x − v, 0, 1)` at lattice point `a`.
    fn frac(&self, a: usize, n: usize, v: u32) -> f64 {
        let (p, q) = self.pts[a];
        let num = n as i128 * p as i128 - v as i128 * q as i128;
        if num <= 0 {
            0.0
        } else if num >= q as i128 {
            1.0
        } else {
            num as f64 / q as f64
        }
    }

    /// First lattice index where cell `v` of a size-`n` grid has positive mass below.
    fn start(&self, n: usize, v: u32) -> usize {
        self.pts
            .partition_point(|&(p, q)| n as u128 * p as u128 <= v as u128 * q as u128)
    }
}

/// Sweeps the first coordinate across the combined lattice and hands every
/// slice of `F1 − F2` (over the remaining coordinates, row-major) to `visit`.
fn sweep_cdf_difference<F: FnMut(usize, &[f64])>(
    m1: &EmpiricalPermuton,
    m2: &EmpiricalPermuton,
    lattice: &Lattice,
    mut visit: F,
) {
    let d = m1.d();
    let l = lattice.len();
    let slice_len = l.pow((d - 1) as u32);
    let mut slice = vec![0.0f64; slice_len];
    visit(0, &slice);
    for a in 1..l {
        for (mu, sign) in [(m1, 1.0), (m2, -1.0)] {
            let n = mu.n();
            let (p0, q0) = lattice.pts[a - 1];
            let (p1, q1) = lattice.pts[a];
            let lo = (n as u64 * p0 / q0) as usize;
            let hi = (n as u64 * p1).div_ceil(q1) as usize;
            for i in lo..hi.min(n) {
                let delta =
                    lattice.frac(a, n, i as u32) - lattice.frac(a - 1, n, i as u32);
                if delta != 0.0 {
                    add_cube_profile(&mut slice, mu, i, sign * delta / n as f64, lattice);
                }
            }
        }
        visit(a, &slice);
    }
}

/// Adds `factor · Π_{c≥1} frac_c(y_c)` for cube `i` to every slice entry.
fn add_cube_profile(
    slice: &mut [f64],
    mu: &EmpiricalPermuton,
    i: usize,
    factor: f64,
    lattice: &Lattice,
) {
    let n = mu.n();
    let l = lattice.len();
    let d = mu.d();
    let starts: Vec<usize> = (1..d).map(|c| lattice.start(n, mu.cell(i, c))).collect();
    let vals: Vec<u32> = (1..d).map(|c| mu.cell(i, c)).collect();
    fn rec(
        slice: &mut [f64],
        depth: usize,
        offset: usize,
        factor: f64,
        ctx: (&[usize], &[u32], usize, usize, &Lattice),
    ) {
        let (starts, vals, l, n, lattice) = ctx;
        let last = depth + 1 == starts.len();
        for y in starts[depth]..l {
            let f = factor * lattice.frac(y, n, vals[depth]);
            let idx = offset * l + y;
            if last {
                slice[idx] += f;
            } else {
                rec(slice, depth + 1, idx, f, ctx);
            }
        }
    }
    rec(slice, 0, 0, factor, (&starts, &vals, l, n, lattice));
}

fn check_same_d(m1: &EmpiricalPermuton, m2: &EmpiricalPermuton) -> Result<()> {
    if m1.d() != m2.d() {
        return Err(Error::DimensionMismatch(m1.d(), m2.d()));
    }
    Ok(())
}

/// Exact `‖F1 − F2‖_∞`, evaluated at every vertex of the combined lattice.
pub fn cdf_sup_distance(m1: &EmpiricalPermuton, m2: &EmpiricalPermuton) -> Result<f64> {
    check_same_d(m1, m2)?;
    let lattice = Lattice::new(m1.n(), m2.n());
    let work = (lattice.len() as f64).powi(m1.d() as i32);
    if work > CDF_LATTICE_BUDGET as f64 {
        return Err(Error::Budget(format!(
            "{work:.3e} lattice evaluations exceed {CDF_LATTICE_BUDGET}"
        )));
    }
    let mut best = 0.0f64;
    sweep_cdf_difference(m1, m2, &lattice, |_, s| {
        for v in s {
            best = best.max(v.abs());
        }
    });
    Ok(best)
}

/// Box distance mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxMode {
    /// Supremum over lattice-aligned boxes, limited by a budget on `(n1+n2+1)^{2d}`.
    Exact {
        /// Largest admissible value of `(n1+n2+1)^{2d}`.
        budget: u64,
    },
    /// The interval `[‖F1−F2‖∞, 2^d ‖F1−F2‖∞]`.
    Bound,
}

/// Result of [`box_distance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoxDistance {
    /// Exact value.
    Exact(f64),
    /// Lower and upper bounds.
    Interval(f64, f64),
}

impl BoxDistance {
    /// Lower end (the value itself in exact mode).
    pub fn lower(&self) -> f64 {
        match *self {
            BoxDistance::Exact(v) | BoxDistance::Interval(v, _) => v,
        }
    }

    /// Upper end (the value itself in exact mode).
    pub fn upper(&self) -> f64 {
        match *self {
            BoxDistance::Exact(v) | BoxDistance::Interval(_, v) => v,
        }
    }
}

/// Box distance `sup_R |μ1(R) − μ2(R)|` over axis-parallel boxes `R`.
pub fn box_distance(
    m1: &EmpiricalPermuton,
    m2: &EmpiricalPermuton,
    mode: BoxMode,
) -> Result<BoxDistance> {
    check_same_d(m1, m2)?;
    let d = m1.d();
    match mode {
        BoxMode::Bound => {
            let s = cdf_sup_distance(m1, m2)?;
            Ok(BoxDistance::Interval(s, s * (1u64 << d) as f64))
        }
        BoxMode::Exact { budget } => {
            let l = (m1.n() + m2.n() + 1) as f64;
            if l.powi(2 * d as i32) > budget as f64 {
                return Err(Error::Budget(format!(
                    "{:.3e} box evaluations exceed {budget}",
                    l.powi(2 * d as i32)
                )));
            }
            let lattice = Lattice::new(m1.n(), m2.n());
            let ll = lattice.len();
            let mut table = Vec::with_capacity(ll.pow(d as u32));
            sweep_cdf_difference(m1, m2, &lattice, |_, s| table.extend_from_slice(s));
            Ok(BoxDistance::Exact(max_box(&table, ll, d)))
        }
    }
}

/// Largest `|Σ ±table|` over all lattice boxes, by inclusion–exclusion.
fn max_box(table: &[f64], l: usize, d: usize) -> f64 {
    let strides: Vec<usize> = (0..d).map(|c| l.pow((d - 1 - c) as u32)).collect();
    let pairs: Vec<(usize, usize)> = (0..l)
        .flat_map(|lo| (lo + 1..l).map(move |hi| (lo, hi)))
        .collect();
    if pairs.is_empty() {
        return 0.0;
    }
    let mut best = 0.0f64;
    let mut choice = vec![0usize; d];
    loop {
        let mut sum = 0.0;
        for corner in 0..(1u32 << d) {
            let mut idx = 0;
            let mut sign = 1.0;
            for c in 0..d {
                let (lo, hi) = pairs[choice[c]];
                if corner >> c & 1 == 1 {
                    idx += hi * strides[c];
                } else {
                    idx += lo * strides[c];
                    sign = -sign;
                }
            }
            sum += sign * table[idx];
        }
        best = best.max(sum.abs());
        let mut c = 0;
        while c < d {
            choice[c] += 1;
            if choice[c] < pairs.len() {
                break;
            }
            choice[c] = 0;
            c += 1;
        }
        if c == d {
            return best;
        }
    }
}

/// Draws one point of `μ` into `out`.
fn draw_point(mu: &EmpiricalPermuton, rng: &mut Rng, out: &mut Vec<f64>) {
    let n = mu.n();
    let i = rng.random_range(0..n);
    out.clear();
    for c in 0..mu.d() {
        let u: f64 = rng.random();
        out.push((mu.cell(i, c) as f64 + u) / n as f64);
    }
}

/// `k` iid points of `μ`.
pub fn sample_points(mu: &EmpiricalPermuton, k: usize, seed: u64) -> PointCloud {
    let mut rng = mc::rng(seed);
    PointCloud {
        points: sample_points_rng(mu, k, &mut rng),
        seed,
        generator: "empirical-permuton".into(),
    }
}

fn sample_points_rng(mu: &EmpiricalPermuton, k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    (0..k)
        .map(|_| {
            let mut p = Vec::with_capacity(mu.d());
            draw_point(mu, rng, &mut p);
            p
        })
        .collect()
}

/// The random pattern `P_μ[k]`: the permutation induced by `k` iid points of `μ`.
pub fn sample_pattern(mu: &EmpiricalPermuton, k: usize, seed: u64) -> Result<DPermutation> {
    sample_pattern_rng(mu, k, &mut mc::rng(seed))
}

/// [`sample_pattern`] drawing from an existing generator.
pub fn sample_pattern_rng(mu: &EmpiricalPermuton, k: usize, rng: &mut Rng) -> Result<DPermutation> {
    if k == 0 {
        return Err(Error::Invalid("pattern size must be at least 1".into()));
    }
    let mut last = Error::Tie(0);
    for _ in 0..TIE_RETRIES {
        match perm::perm_of_points(&sample_points_rng(mu, k, rng)) {
            Ok(p) => return Ok(p),
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// Monte Carlo estimate of `P(P_μ[k] = τ)`.
pub fn freq_permuton(
    tau: &DPermutation,
    mu: &EmpiricalPermuton,
    trials: u64,
    seed: u64,
) -> Result<Estimate> {
    if tau.d() != mu.d() {
        return Err(Error::DimensionMismatch(tau.d(), mu.d()));
    }
    if trials == 0 {
        return Err(Error::Invalid("trials must be at least 1".into()));
    }
    let k = tau.n();
    let hits = mc::chunked(trials, seed, |rng, len| -> Result<u64> {
        let mut h = 0;
        for _ in 0..len {
            if sample_pattern_rng(mu, k, rng)? == *tau {
                h += 1;
            }
        }
        Ok(h)
    })
    .into_iter()
    .sum::<Result<u64>>()?;
    Ok(Estimate::from_counts(hits, trials))
}

/// Size limits of the exact permuton pattern oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactLimits {
    /// Largest permutation size.
    pub max_n: usize,
    /// Largest pattern size.
    pub max_k: usize,
}

impl Default for ExactLimits {
    fn default() -> Self {
        ExactLimits { max_n: 6, max_k: 3 }
    }
}

/// Exact law of `P_{μ_σ}[k]` as integer weights over a common denominator,
/// indexed by [`DPermutation::lex_rank`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactPatternLaw {
    /// Pattern size.
    pub k: usize,
    /// Dimension.
    pub d: usize,
    /// Common denominator `n^k (k!)^d`.
    pub denom: u64,
    /// Numerators by lexicographic rank.
    pub weights: Vec<u64>,
}

impl ExactPatternLaw {
    /// Probability of `τ` as an exact rational.
    pub fn prob(&self, tau: &DPermutation) -> BigRational {
        BigRational::new(
            BigInt::from(self.weights[tau.lex_rank() as usize]),
            BigInt::from(self.denom),
        )
    }
}

/// Exact law of the size-`k` pattern of `k` iid points of `μ_σ`.
///
/// Every assignment of the `k` points to cubes is enumerated. Points in
/// distinct cubes are ordered by their cubes in every coordinate; points
/// sharing a cube are ordered by independent uniform permutations, one per
/// coordinate.
pub fn exact_pattern_law(
    mu: &EmpiricalPermuton,
    k: usize,
    limits: ExactLimits,
) -> Result<ExactPatternLaw> {
    let n = mu.n();
    let d = mu.d();
    if n > limits.max_n {
        return Err(Error::Budget(format!("n = {n} exceeds {}", limits.max_n)));
    }
    if k == 0 || k > limits.max_k || k > 8 {
        return Err(Error::EnumerationLimit {
            k,
            limit: limits.max_k.min(8),
        });
    }
    let kf = factorial_u64(k);
    let denom = (n as u64).pow(k as u32) * kf.pow(d as u32);
    let num_patterns = kf.pow((d - 1) as u32) as usize;
    let mut weights = vec![0u64; num_patterns];
    let perms: Vec<Vec<Vec<u32>>> = (0..=k).map(all_perms).collect();
    let mut assign = vec![0usize; k];
    let mut keys = vec![[0u32; 8]; d];
    loop {
        let mut group_of = [usize::MAX; 8];
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for a in 0..k {
            match (0..a).find(|&b| assign[b] == assign[a]) {
                Some(b) => {
                    group_of[a] = group_of[b];
                    groups[group_of[b]].push(a);
                }
                None => {
                    group_of[a] = groups.len();
                    groups.push(vec![a]);
                }
            }
        }
        if groups.len() == 1 && k > 1 {
            for w in weights.iter_mut() {
                *w += kf;
            }
        } else {
            let slots: Vec<(usize, usize)> = (0..d)
                .flat_map(|q| {
                    groups
                        .iter()
                        .enumerate()
                        .filter(|(_, g)| g.len() > 1)
                        .map(move |(gi, _)| (q, gi))
                })
                .collect();
            let combos: u64 = slots
                .iter()
                .map(|&(_, gi)| factorial_u64(groups[gi].len()))
                .product();
            let weight = kf.pow(d as u32) / combos;
            let mut choice = vec![0usize; slots.len()];
            loop {
                for (q, key) in keys.iter_mut().enumerate() {
                    for a in 0..k {
                        key[a] = mu.cell(assign[a], q) * k as u32;
                    }
                }
                for (s, &(q, gi)) in slots.iter().enumerate() {
                    let g = &groups[gi];
                    let pr = &perms[g.len()][choice[s]];
                    for (pos, &a) in g.iter().enumerate() {
                        keys[q][a] += pr[pos];
                    }
                }
                weights[rank_from_keys(&keys, k)] += weight;
                let mut s = 0;
                while s < slots.len() {
                    choice[s] += 1;
                    if choice[s] < perms[groups[slots[s].1].len()].len() {
                        break;
                    }
                    choice[s] = 0;
                    s += 1;
                }
                if s == slots.len() {
                    break;
                }
            }
        }
        let mut a = 0;
        while a < k {
            assign[a] += 1;
            if assign[a] < n {
                break;
            }
            assign[a] = 0;
            a += 1;
        }
        if a == k {
            break;
        }
    }
    Ok(ExactPatternLaw {
        k,
        d,
        denom,
        weights,
    })
}

/// Lexicographic rank of the pattern whose points have the given distinct keys.
fn rank_from_keys(keys: &[[u32; 8]], k: usize) -> usize {
    let mut order = [0usize; 8];
    for (a, o) in order.iter_mut().enumerate().take(k) {
        *o = a;
    }
    order[..k].sort_unstable_by_key(|&a| keys[0][a]);
    let kf = factorial_u64(k) as usize;
    let mut rank = 0usize;
    for key in &keys[1..] {
        let mut r = 0usize;
        for i in 0..k {
            let vi = key[order[i]];
            let smaller = (i + 1..k).filter(|&j| key[order[j]] < vi).count();
            r = r * (k - i) + smaller;
        }
        rank = rank * kf + r;
    }
    rank
}

/// All permutations of `0..m` in lexicographic order.
pub(crate) fn all_perms(m: usize) -> Vec<Vec<u32>> {
    (0..factorial_u64(m))
        .map(|r| DPermutation::from_lex_rank(m.max(1), 2, r).col(0).to_vec())
        .map(|v| if m == 0 { Vec::new() } else { v })
        .collect()
}

/// Exact `P(P_{μ_σ}[k] = τ)` with the default size limits.
pub fn freq_permuton_exact(tau: &DPermutation, mu: &EmpiricalPermuton) -> Result<BigRational> {
    if tau.d() != mu.d() {
        return Err(Error::DimensionMismatch(tau.d(), mu.d()));
    }
    Ok(exact_pattern_law(mu, tau.n(), ExactLimits::default())?.prob(tau))
}

/// Summary of `d_□(μ, μ_{P_μ[k]})` over repeated draws at one value of `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    /// Number of sampled points.
    pub k: usize,
    /// Median of the lower end of the bound-mode interval.
    pub median_lower: f64,
    /// 90th percentile of the lower end.
    pub p90_lower: f64,
    /// Median of the upper end of the bound-mode interval.
    pub median_upper: f64,
    /// 90th percentile of the upper end.
    pub p90_upper: f64,
    /// Reference value `d 2^{d+2} k^{−1/4}`.
    pub reference_bound: f64,
    /// Number of draws.
    pub reps: usize,
}

/// Quantile of sorted values by the nearest-rank rule.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

/// Distances between `μ` and the empirical permuton of `k` of its sampled points.
pub fn approximation_curve(
    mu: &EmpiricalPermuton,
    ks: &[usize],
    reps: usize,
    seed: u64,
) -> Result<Vec<CurveRow>> {
    if ks.is_empty() || reps == 0 {
        return Err(Error::Invalid("need at least one k and one repetition".into()));
    }
    let d = mu.d();
    ks.iter()
        .enumerate()
        .map(|(ki, &k)| {
            let mut lows = (0..reps)
                .into_par_iter()
                .map(|r| -> Result<f64> {
                    let mut rng = mc::stream_rng(seed, (ki * reps + r) as u64);
                    let p = sample_pattern_rng(mu, k, &mut rng)?;
                    cdf_sup_distance(mu, &EmpiricalPermuton::new(p))
                })
                .collect::<Result<Vec<f64>>>()?;
            lows.sort_by(f64::total_cmp);
            let scale = (1u64 << d) as f64;
            let median = quantile(&lows, 0.5);
            let p90 = quantile(&lows, 0.9);
            Ok(CurveRow {
                k,
                median_lower: median,
                p90_lower: p90,
                median_upper: (median * scale).min(1.0),
                p90_upper: (p90 * scale).min(1.0),
                reference_bound: d as f64 * (1u64 << (d + 2)) as f64 * (k as f64).powf(-0.25),
                reps,
            })
        })
        .collect()
}

/// A source of random d-permutations indexed by size and seed.
pub trait PermSampler: Sync {
    /// One sample of size `n` for each seed, in seed order.
    fn sample_batch(&self, n: usize, seeds: &[u64]) -> Result<Vec<DPermutation>>;
}

/// Adapts a closure `(n, seed) → σ` to [`PermSampler`].
pub struct FnSampler<F>(pub F);

impl<F> PermSampler for FnSampler<F>
where
    F: Fn(usize, u64) -> Result<DPermutation> + Sync,
{
    fn sample_batch(&self, n: usize, seeds: &[u64]) -> Result<Vec<DPermutation>> {
        seeds.par_iter().map(|&s| (self.0)(n, s)).collect()
    }
}

/// How each sampled permutation's pattern frequency is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreqMode {
    /// Exact occurrence counting (fast path for 2-dimensional inversions).
    Exact,
    /// Uniform index-set sampling with the given number of trials.
    Sampled {
        /// Index sets drawn per permutation.
        trials: u64,
    },
}

/// Configuration of [`convergence_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportSpec {
    /// Patterns whose expected frequencies are tracked.
    pub patterns: Vec<DPermutation>,
    /// Sizes at which the sampler is run.
    pub sizes: Vec<usize>,
    /// Samples per size.
    pub reps: usize,
    /// Frequency measurement mode.
    pub mode: FreqMode,
    /// Size of the random pattern `pat_{I_{n,k}}(σ_n)` whose law is tabulated.
    pub law_k: usize,
}

/// One size's estimate of `E[freq(τ, σ_n)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// Size.
    pub n: usize,
    /// Mean frequency over the samples.
    pub mean: f64,
    /// Standard error of the mean.
    pub se: f64,
    /// Number of samples.
    pub reps: usize,
}

/// Frequency estimates of one pattern across sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternEntry {
    /// Pattern in pipe format.
    pub pattern: String,
    /// One row per size.
    pub rows: Vec<ReportRow>,
    /// Means are monotone in `n`.
    pub monotone: bool,
    /// Successive changes of the mean shrink in absolute value.
    pub settling: bool,
}

/// Empirical law of a uniformly placed size-`k` pattern at one size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawRow {
    /// Size.
    pub n: usize,
    /// Pattern size.
    pub k: usize,
    /// Counts keyed by pattern in pipe format.
    pub counts: BTreeMap<String, u64>,
}

/// Trend diagnostics for a random permutation family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// One entry per tracked pattern.
    pub entries: Vec<PatternEntry>,
    /// One law per size.
    pub laws: Vec<LawRow>,
}

fn frequency(tau: &DPermutation, sigma: &DPermutation, mode: FreqMode, seed: u64) -> Result<f64> {
    match mode {
        FreqMode::Exact => {
            if tau.n() > sigma.n() {
                return Ok(0.0);
            }
            if tau.d() == 2 && tau.n() == 2 && sigma.d() == 2 {
                let inv = perm::inversion_frequency(sigma.col(0));
                return Ok(if tau.col(0)[0] == 1 { inv } else { 1.0 - inv });
            }
            let o = perm::occ(tau, sigma)?;
            let total = perm::binomial(sigma.n(), tau.n());
            Ok(o as f64 / num::ToPrimitive::to_f64(&total).unwrap_or(f64::INFINITY))
        }
        FreqMode::Sampled { trials } => Ok(perm::freq_sampled(tau, sigma, trials, seed)?.mean),
    }
}

/// Estimates `E[freq(τ, σ_n)]` and the law of a random size-`k` pattern
/// for every requested size.
pub fn convergence_report<S: PermSampler + ?Sized>(
    sampler: &S,
    spec: &ReportSpec,
    seed: u64,
) -> Result<ConvergenceReport> {
    let mut means: Vec<Vec<ReportRow>> = vec![Vec::new(); spec.patterns.len()];
    let mut laws = Vec::new();
    for (ni, &n) in spec.sizes.iter().enumerate() {
        let seeds: Vec<u64> = (0..spec.reps)
            .map(|r| mc::derive_seed(seed, (ni * spec.reps + r) as u64))
            .collect();
        let sample = sampler.sample_batch(n, &seeds)?;
        for (pi, tau) in spec.patterns.iter().enumerate() {
            let vals = sample
                .par_iter()
                .zip(&seeds)
                .map(|(s, &sd)| frequency(tau, s, spec.mode, mc::derive_seed(sd, 1)))
                .collect::<Result<Vec<f64>>>()?;
            let e = Estimate::from_values(&vals);
            means[pi].push(ReportRow {
                n,
                mean: e.mean,
                se: e.se,
                reps: vals.len(),
            });
        }
        let mut counts = BTreeMap::new();
        if spec.law_k >= 1 {
            for (s, &sd) in sample.iter().zip(&seeds) {
                if spec.law_k > s.n() {
                    continue;
                }
                let mut rng = mc::stream_rng(sd, 2);
                let mut idx: Vec<usize> =
                    rand::seq::index::sample(&mut rng, s.n(), spec.law_k).into_vec();
                idx.sort_unstable();
                let p = perm::pattern_at_zero_based(s, &idx);
                *counts.entry(p.to_pipe_string()).or_insert(0) += 1;
            }
        }
        laws.push(LawRow {
            n,
            k: spec.law_k,
            counts,
        });
    }
    let entries = spec
        .patterns
        .iter()
        .zip(means)
        .map(|(tau, rows)| {
            let m: Vec<f64> = rows.iter().map(|r| r.mean).collect();
            let up = m.windows(2).all(|w| w[1] >= w[0]);
            let down = m.windows(2).all(|w| w[1] <= w[0]);
            let deltas: Vec<f64> = m.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
            PatternEntry {
                pattern: tau.to_pipe_string(),
                rows,
                monotone: up || down,
                settling: deltas.windows(2).all(|w| w[1] <= w[0]),
            }
        })
        .collect();
    Ok(ConvergenceReport { entries, laws })
}

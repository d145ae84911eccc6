use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use rayon::prelude::*;
use clap::{Args, Parser, Subcommand, ValueEnum};
use permuton_lab::perm::{self, DPermutation, PermutationJson};
use permuton_lab::permuton::{self, FnSampler, FreqMode, ReportSpec};
use permuton_lab::schnyder::{self, SampleMethod, SchnyderSampler};
use permuton_lab::separable::{self, GwMethod};
use permuton_lab::{mc, oracle, Error};
use serde_json::json;

#[derive(Parser)]
#[command(name = "permuton-lab", version, about = "Sampling, pattern statistics and verification for multidimensional permutations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a random permutation and export it with its point cloud.
    Sample(SampleArgs),
    /// Pattern frequency of a stored permutation.
    Freq(FreqArgs),
    /// Run every oracle cross-check and write the manifest.
    Verify(VerifyArgs),
    /// Pattern-frequency trends of a random family across sizes.
    Convergence(ConvergenceArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    Schnyder,
    Separable,
    Brownian,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(value_enum)]
    family: Family,
    /// Size of the permutation (number of points).
    #[arg(long)]
    n: usize,
    /// Dimension of a separable permutation.
    #[arg(long, default_value_t = 3)]
    d: usize,
    /// Sign probabilities p1,p2,... of the Brownian separable family.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    #[arg(long)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Point-cloud file format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Schnyder: dp or rejection. Separable: rejection or cycle-lemma.
    #[arg(long)]
    method: Option<String>,
}

#[derive(Args)]
struct FreqArgs {
    /// Permutation JSON file.
    #[arg(long)]
    input: PathBuf,
    /// Pattern in the form 1,3,2|2,1,3.
    #[arg(long)]
    pattern: String,
    /// exact or mc.
    #[arg(long, default_value = "exact")]
    method: String,
    /// Monte Carlo index sets.
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// Report file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Largest size of the exhaustive checks.
    #[arg(long)]
    n: Option<usize>,
    /// Largest pattern size of the exhaustive checks.
    #[arg(long)]
    k: Option<usize>,
    /// Manifest file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[arg(value_enum)]
    family: Family,
    /// Sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [100usize, 400, 1600])]
    n: Vec<usize>,
    /// Dimension of the separable family.
    #[arg(long, default_value_t = 3)]
    d: usize,
    /// Sign probabilities of the Brownian family.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    /// Tracked pattern; repeatable. Defaults to every size-2 pattern.
    #[arg(long)]
    pattern: Vec<String>,
    /// Samples per size.
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// exact or mc frequency measurement.
    #[arg(long, default_value = "exact")]
    method: String,
    /// Index sets per sample in mc mode.
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    /// Size of the tabulated random pattern; 0 disables the table.
    #[arg(long, default_value_t = 3)]
    law_k: usize,
    #[arg(long)]
    seed: u64,
    /// Report file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Validation(String),
    Budget(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Budget(_) => 3,
            Failure::Io(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Budget(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_budget() {
            Failure::Budget(e.to_string())
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Validation(msg.into())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Outcome {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Failure::Io(e.to_string()))?;
    Ok(())
}

fn to_json_bytes<T: serde::Serialize>(value: &T) -> Result<Vec<u8>, Failure> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

fn emit<T: serde::Serialize>(out: Option<&Path>, value: &T) -> Outcome {
    let bytes = to_json_bytes(value)?;
    match out {
        Some(p) => write_atomic(p, &bytes),
        None => {
            std::io::stdout().write_all(&bytes)?;
            Ok(())
        }
    }
}

/// Point `i` of a size-`n` permutation sits at the centre of its cube.
fn normalized_points(sigma: &DPermutation) -> Vec<Vec<f64>> {
    let n = sigma.n() as f64;
    let centre = |v: usize| (2 * v + 1) as f64 / (2.0 * n);
    (0..sigma.n())
        .map(|i| {
            std::iter::once(centre(i))
                .chain(sigma.cols().iter().map(|c| centre(c[i] as usize)))
                .collect()
        })
        .collect()
}

fn points_bytes(sigma: &DPermutation, format: Format) -> Result<Vec<u8>, Failure> {
    let points = normalized_points(sigma);
    match format {
        Format::Csv => {
            let mut buf = Vec::new();
            permuton::write_points_csv(&points, &mut buf)?;
            Ok(buf)
        }
        Format::Json => to_json_bytes(&json!({ "d": sigma.d(), "n": sigma.n(), "points": points })),
    }
}

fn write_permutation(dir: &Path, sigma: &DPermutation, format: Format) -> Outcome {
    write_atomic(&dir.join("perm.json"), &to_json_bytes(&sigma.to_json())?)?;
    let name = match format {
        Format::Csv => "points.csv",
        Format::Json => "points.json",
    };
    write_atomic(&dir.join(name), &points_bytes(sigma, format)?)
}

fn check_probabilities(p: &[f64]) -> Outcome {
    if p.is_empty() || p.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(invalid("--p needs one or more probabilities in [0, 1]"));
    }
    Ok(())
}

fn brownian_p(p: Option<Vec<f64>>, d: usize) -> Result<Vec<f64>, Failure> {
    let p = p.unwrap_or_else(|| vec![0.5; d.saturating_sub(1)]);
    check_probabilities(&p)?;
    Ok(p)
}

fn schnyder_method(m: Option<&str>) -> Result<SampleMethod, Failure> {
    match m.unwrap_or("dp") {
        "dp" => Ok(SampleMethod::Dp),
        "rejection" => Ok(SampleMethod::Rejection),
        other => Err(invalid(format!("unknown Schnyder method {other:?}; use dp or rejection"))),
    }
}

fn gw_method(m: Option<&str>) -> Result<GwMethod, Failure> {
    match m.unwrap_or("rejection") {
        "rejection" => Ok(GwMethod::Rejection),
        "cycle-lemma" => Ok(GwMethod::CycleLemma),
        other => Err(invalid(format!("unknown separable method {other:?}; use rejection or cycle-lemma"))),
    }
}

fn cmd_sample(a: SampleArgs) -> Outcome {
    if a.n == 0 {
        return Err(invalid("--n must be at least 1"));
    }
    fs::create_dir_all(&a.out)?;
    match a.family {
        Family::Schnyder => {
            let method = schnyder_method(a.method.as_deref())?;
            let s = schnyder::sample_uniform_schnyder(a.n, a.seed, method)?;
            let wood = schnyder::analyse(&s);
            write_atomic(&a.out.join("string.txt"), format!("{}\n", wood.string).as_bytes())?;
            write_atomic(&a.out.join("walk.json"), &to_json_bytes(&wood.walk.to_json())?)?;
            write_atomic(&a.out.join("green.json"), &to_json_bytes(&wood.green.to_json())?)?;
            write_atomic(&a.out.join("red.json"), &to_json_bytes(&wood.red.to_json())?)?;
            write_permutation(&a.out, &wood.perm, a.format)
        }
        Family::Separable => {
            let sign = match a.p {
                Some(p) => {
                    check_probabilities(&p)?;
                    if a.d != p.len() + 1 {
                        return Err(invalid(format!("--d {} needs {} probabilities, got {}", a.d, a.d - 1, p.len())));
                    }
                    separable::brownian_sign_tree(a.n, &p, &mut mc::rng(a.seed))?
                }
                None => {
                    let method = gw_method(a.method.as_deref())?;
                    separable::swap_to_sign(&separable::sample_uniform_swap_tree(a.n, a.d, a.seed, method)?)
                }
            };
            let sigma = separable::sign_tree_inverse(&sign);
            write_atomic(&a.out.join("sign_tree.json"), &to_json_bytes(&sign.to_json())?)?;
            write_atomic(&a.out.join("swap_tree.json"), &to_json_bytes(&separable::sign_to_swap(&sign).to_json())?)?;
            write_permutation(&a.out, &sigma, a.format)
        }
        Family::Brownian => {
            let p = brownian_p(a.p, a.d)?;
            let sigma = separable::sample_brownian_cloud(a.n, &p, a.seed)?;
            write_permutation(&a.out, &sigma, a.format)
        }
    }
}

fn read_permutation(path: &Path) -> Result<DPermutation, Failure> {
    let text = fs::read_to_string(path)?;
    let j: PermutationJson =
        serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    Ok(DPermutation::try_from(j)?)
}

fn parse_pattern(s: &str) -> Result<DPermutation, Failure> {
    s.parse::<DPermutation>()
        .map_err(|e| invalid(format!("pattern {s:?}: {e}")))
}

fn cmd_freq(a: FreqArgs) -> Outcome {
    let sigma = read_permutation(&a.input)?;
    let tau = parse_pattern(&a.pattern)?;
    let report = match a.method.as_str() {
        "exact" => {
            let f = perm::freq(&tau, &sigma)?;
            json!({
                "pattern": tau.to_pipe_string(),
                "mode": "exact",
                "freq": num::ToPrimitive::to_f64(&f),
                "rational": f.to_string(),
            })
        }
        "mc" => {
            let seed = a.seed.ok_or_else(|| invalid("--seed is required with --method mc"))?;
            let e = perm::freq_sampled(&tau, &sigma, a.trials, seed)?;
            json!({
                "pattern": tau.to_pipe_string(),
                "mode": "mc",
                "freq": e.mean,
                "se": e.se,
                "trials": e.samples,
                "seed": seed,
            })
        }
        other => return Err(invalid(format!("unknown frequency method {other:?}; use exact or mc"))),
    };
    emit(a.out.as_deref(), &report)
}

fn cmd_verify(a: VerifyArgs) -> Outcome {
    let mut budget = oracle::EnumerationBudget::default();
    if let Some(n) = a.n {
        budget.schnyder_n = n;
        budget.separable_n = n;
        budget.lemma_n = n;
    }
    if let Some(k) = a.k {
        budget.max_k = k;
    }
    let manifest = oracle::verify(&budget)?;
    emit(a.out.as_deref(), &manifest)?;
    if manifest.all_passed {
        Ok(())
    } else {
        let failed: Vec<&str> = manifest
            .checks
            .iter()
            .filter(|c| c.status != "pass")
            .map(|c| c.name.as_str())
            .collect();
        Err(invalid(format!("checks not passed: {}", failed.join(", "))))
    }
}

fn default_patterns(d: usize) -> Result<Vec<DPermutation>, Failure> {
    Ok(oracle::all_d_permutations(2, d)?.collect())
}

fn cmd_convergence(a: ConvergenceArgs) -> Outcome {
    if a.n.is_empty() || a.n.contains(&0) {
        return Err(invalid("--n needs positive sizes"));
    }
    if a.reps == 0 {
        return Err(invalid("--reps must be at least 1"));
    }
    let mode = match a.method.as_str() {
        "exact" => FreqMode::Exact,
        "mc" => FreqMode::Sampled { trials: a.trials },
        other => return Err(invalid(format!("unknown frequency method {other:?}; use exact or mc"))),
    };
    let d = match a.family {
        Family::Schnyder => 3,
        Family::Separable => a.d,
        Family::Brownian => a.p.as_ref().map_or(a.d, |p| p.len() + 1),
    };
    let patterns = if a.pattern.is_empty() {
        default_patterns(d)?
    } else {
        a.pattern.iter().map(|s| parse_pattern(s)).collect::<Result<_, _>>()?
    };
    if let Some(t) = patterns.iter().find(|t| t.d() != d) {
        return Err(invalid(format!("pattern {t} has dimension {}, family has {d}", t.d())));
    }
    let spec = ReportSpec {
        patterns,
        sizes: a.n.clone(),
        reps: a.reps,
        mode,
        law_k: a.law_k,
    };
    let report = match a.family {
        Family::Schnyder => {
            let cached = a
                .n
                .iter()
                .map(|&n| SchnyderSampler::new(n).map(|s| (n, s)))
                .collect::<Result<Vec<_>, _>>()?;
            permuton::convergence_report(&CachedSchnyder(cached), &spec, a.seed)?
        }
        Family::Separable => {
            let d = a.d;
            let sampler = FnSampler(move |n: usize, seed: u64| {
                separable::sample_uniform_separable_with(n, d, seed, GwMethod::CycleLemma)
            });
            permuton::convergence_report(&sampler, &spec, a.seed)?
        }
        Family::Brownian => {
            let p = brownian_p(a.p.clone(), a.d)?;
            let sampler = FnSampler(move |n: usize, seed: u64| separable::sample_brownian_cloud(n, &p, seed));
            permuton::convergence_report(&sampler, &spec, a.seed)?
        }
    };
    emit(a.out.as_deref(), &report)
}

struct CachedSchnyder(Vec<(usize, SchnyderSampler)>);

impl permuton::PermSampler for CachedSchnyder {
    fn sample_batch(&self, n: usize, seeds: &[u64]) -> permuton_lab::Result<Vec<DPermutation>> {
        let (_, sampler) = self
            .0
            .iter()
            .find(|(m, _)| *m == n)
            .ok_or_else(|| Error::Invalid(format!("no sampler prepared for size {n}")))?;
        Ok(sampler
            .sample_batch(seeds)
            .par_iter()
            .map(schnyder::schnyder_perm_from_string)
            .collect())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    mc::init_thread_pool_from_env();
    let result = match cli.command {
        Command::Sample(a) => cmd_sample(a),
        Command::Freq(a) => cmd_freq(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Convergence(a) => cmd_convergence(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("permuton-lab: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

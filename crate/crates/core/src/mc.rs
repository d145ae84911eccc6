//! Seeded random streams and chunked Monte Carlo helpers.
//!
//! A run seed is split into independent streams by mixing a stream index into
//! it with the SplitMix64 finaliser. Work is cut into fixed-size chunks that
//! each draw from their own stream. Chunk results are combined in chunk order,
//! so results never depend on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// The generator used by every sampler in the crate.
pub type Rng = ChaCha8Rng;

/// Number of trials handled by a single chunk in chunked estimators.
pub const CHUNK: u64 = 4096;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `stream` derived from the run seed `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// Generator for stream `stream` of run seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, stream))
}

/// Generator seeded directly from `seed`.
pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Runs `f(rng, trials_in_chunk)` over `trials` split into [`CHUNK`]-sized
/// chunks and returns the per-chunk results in chunk order.
pub fn chunked<T, F>(trials: u64, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut Rng, u64) -> T + Sync,
{
    let chunks = trials.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(trials - c * CHUNK);
            let mut r = stream_rng(seed, c);
            f(&mut r, len)
        })
        .collect()
}

/// Mean and standard error of a Monte Carlo proportion or average.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Estimate {
    /// Point estimate.
    pub mean: f64,
    /// Standard error of the point estimate.
    pub se: f64,
    /// Number of samples behind the estimate.
    pub samples: u64,
}

impl Estimate {
    /// Estimate of a Bernoulli mean from `hits` successes in `samples` trials.
    pub fn from_counts(hits: u64, samples: u64) -> Self {
        let p = hits as f64 / samples as f64;
        Estimate {
            mean: p,
            se: (p * (1.0 - p) / samples as f64).sqrt(),
            samples,
        }
    }

    /// Sample mean and standard error of the mean of `values`.
    pub fn from_values(values: &[f64]) -> Self {
        let m = values.len() as f64;
        let mean = values.iter().sum::<f64>() / m;
        let se = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
            (var / m).sqrt()
        } else {
            0.0
        };
        Estimate {
            mean,
            se,
            samples: values.len() as u64,
        }
    }

    /// True when `value` lies within `z` standard errors of the estimate.
    /// A zero standard error degrades to a tolerance of `1e-12`.
    pub fn within(&self, value: f64, z: f64) -> bool {
        (self.mean - value).abs() <= (z * self.se).max(1e-12)
    }
}

/// Reads the thread cap from `PERMUTON_LAB_THREADS`, if set to a positive integer.
pub fn thread_cap_from_env() -> Option<usize> {
    std::env::var("PERMUTON_LAB_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
}

/// Installs a global thread pool capped by `PERMUTON_LAB_THREADS`, if set.
/// Returns the cap that was applied.
pub fn init_thread_pool_from_env() -> Option<usize> {
    let cap = thread_cap_from_env()?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cap)
        .build_global()
        .ok()
        .map(|_| cap)
}

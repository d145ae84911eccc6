use std::collections::HashMap;
use std::hash::Hash;

use permuton_lab::mc;
use permuton_lab::perm::{self, DPermutation, IndexSet};
use permuton_lab::permuton::{self, EmpiricalPermuton};
use permuton_lab::schnyder::{self, SampleMethod, SchnyderSampler};
use permuton_lab::separable::{self, TreeShape};
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn tally<T: Eq + Hash>(items: impl IntoIterator<Item = T>) -> HashMap<T, u64> {
    let mut m = HashMap::new();
    for x in items {
        *m.entry(x).or_insert(0) += 1;
    }
    m
}

fn uniform_p_value<T: Eq + Hash>(counts: &HashMap<T, u64>, support: &[T], total: u64) -> f64 {
    assert!(counts.keys().all(|k| support.contains(k)), "sample outside the support");
    let e = total as f64 / support.len() as f64;
    let stat: f64 = support
        .iter()
        .map(|s| (*counts.get(s).unwrap_or(&0) as f64 - e).powi(2) / e)
        .sum();
    1.0 - ChiSquared::new((support.len() - 1) as f64).unwrap().cdf(stat)
}

fn two_sample_p_value<T: Eq + Hash>(a: &HashMap<T, u64>, b: &HashMap<T, u64>, support: &[T]) -> f64 {
    let (na, nb) = (a.values().sum::<u64>() as f64, b.values().sum::<u64>() as f64);
    let mut stat = 0.0;
    let mut cells = 0;
    for s in support {
        let (x, y) = (*a.get(s).unwrap_or(&0) as f64, *b.get(s).unwrap_or(&0) as f64);
        if x + y == 0.0 {
            continue;
        }
        cells += 1;
        let ea = (x + y) * na / (na + nb);
        let eb = (x + y) * nb / (na + nb);
        stat += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
    }
    1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn dp_samples_are_uniform_at_size_three() {
    let support = schnyder::enumerate_schnyder_strings(3).unwrap();
    let samples = 100_000u64;
    for sampler in [SchnyderSampler::new(3).unwrap(), SchnyderSampler::new_float(3).unwrap()] {
        let seeds: Vec<u64> = (0..samples).map(|i| mc::derive_seed(31, i)).collect();
        let counts = tally(sampler.sample_batch(&seeds));
        let p = uniform_p_value(&counts, &support, samples);
        assert!(p > 0.001, "p-value {p}");
    }
}

#[test]
fn float_dp_is_uniform_at_size_four() {
    let support = schnyder::enumerate_schnyder_strings(4).unwrap();
    let samples = 100_000u64;
    let seeds: Vec<u64> = (0..samples).map(|i| mc::derive_seed(41, i)).collect();
    let counts = tally(SchnyderSampler::new_float(4).unwrap().sample_batch(&seeds));
    let p = uniform_p_value(&counts, &support, samples);
    assert!(p > 0.001, "p-value {p}");
}

#[test]
fn dp_and_rejection_agree_at_size_three() {
    let support = schnyder::enumerate_schnyder_strings(3).unwrap();
    let samples = 100_000u64;
    let dp = tally(
        (0..samples)
            .into_par_iter()
            .map(|i| schnyder::sample_uniform_schnyder(3, mc::derive_seed(32, i), SampleMethod::Dp).unwrap())
            .collect::<Vec<_>>(),
    );
    let rej = tally(
        (0..samples)
            .into_par_iter()
            .map(|i| schnyder::sample_uniform_schnyder(3, mc::derive_seed(33, i), SampleMethod::Rejection).unwrap())
            .collect::<Vec<_>>(),
    );
    let p = two_sample_p_value(&dp, &rej, &support);
    assert!(p > 0.001, "p-value {p}");
    assert!(uniform_p_value(&rej, &support, samples) > 0.001);
}

#[test]
fn binary_trees_are_uniform() {
    for k in 1..=5usize {
        let support: Vec<TreeShape> = separable::all_shapes(k)
            .into_iter()
            .filter(|s| (0..s.len()).all(|v| s.children(v).len() <= 2))
            .collect();
        let samples = 100_000u64;
        let counts = tally(
            (0..samples)
                .into_par_iter()
                .map(|i| separable::uniform_binary_tree(k, &mut mc::rng(mc::derive_seed(50 + k as u64, i))))
                .collect::<Vec<_>>(),
        );
        if support.len() > 1 {
            let p = uniform_p_value(&counts, &support, samples);
            assert!(p > 0.001, "k={k}: p-value {p}");
        } else {
            assert_eq!(counts.len(), 1);
        }
    }
}

#[test]
fn separable_sampler_covers_the_support() {
    let draws = tally((0..20_000u64).map(|i| separable::sample_uniform_separable(4, 2, i).unwrap()));
    assert_eq!(draws.len(), 22);
    let draws = tally((0..100_000u64).into_par_iter().map(|i| separable::sample_uniform_separable(3, 2, i).unwrap()).collect::<Vec<_>>());
    let support = separable::enumerate_separable(3, 2).unwrap();
    assert_eq!(support.len(), 6);
    assert!(uniform_p_value(&draws, &support, 100_000) > 0.001);
}

#[test]
fn brownian_clouds_have_symmetric_marginals() {
    let clouds = 400u64;
    let p = [0.5, 0.5];
    let sigmas: Vec<DPermutation> = (0..clouds)
        .into_par_iter()
        .map(|i| separable::sample_brownian_cloud(500, &p, mc::derive_seed(60, i)).unwrap())
        .collect();
    for j in 0..2 {
        let values: Vec<f64> = sigmas.iter().map(|s| perm::inversion_frequency(s.col(j))).collect();
        let e = mc::Estimate::from_values(&values);
        assert!(e.within(0.5, 4.0), "coordinate {j}: {e:?}");
    }
    let trials = 100u64;
    let per_cloud: Vec<HashMap<DPermutation, u64>> = sigmas
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = mc::stream_rng(61, i as u64);
            tally((0..trials).map(|_| {
                let mut idx: Vec<usize> =
                    rand::seq::index::sample(&mut rng, 500, 2).into_iter().map(|x| x + 1).collect();
                idx.sort_unstable();
                perm::pattern_at(s, &IndexSet::new(idx, 500).unwrap()).unwrap()
            }))
        })
        .collect();
    for tau in perm_list(2) {
        let values: Vec<f64> = per_cloud
            .iter()
            .map(|c| *c.get(&tau).unwrap_or(&0) as f64 / trials as f64)
            .collect();
        let e = mc::Estimate::from_values(&values);
        assert!(e.within(0.25, 4.0), "{tau}: {e:?}");
    }
}

fn perm_list(k: usize) -> Vec<DPermutation> {
    permuton_lab::oracle::all_d_permutations(k, 3).unwrap().collect()
}

#[test]
fn sampled_frequencies_match_exact() {
    let sigma = schnyder::schnyder_perm_from_string(&SchnyderSampler::new(40).unwrap().sample(7));
    for tau in ["1,2|1,2", "2,1|1,2", "1,3,2|2,1,3"] {
        let tau: DPermutation = tau.parse().unwrap();
        let exact = num::ToPrimitive::to_f64(&perm::freq(&tau, &sigma).unwrap()).unwrap();
        let e = perm::freq_sampled(&tau, &sigma, 200_000, 9).unwrap();
        assert!(e.within(exact, 4.0), "{tau}: {e:?} vs {exact}");
    }
}

#[test]
fn permuton_frequencies_match_exact_law() {
    let sigma: DPermutation = "3,1,4,2|2,4,1,3".parse().unwrap();
    let mu = EmpiricalPermuton::new(sigma);
    for tau in ["1,2|1,2", "2,1,3|3,1,2"] {
        let tau: DPermutation = tau.parse().unwrap();
        let exact = num::ToPrimitive::to_f64(&permuton::freq_permuton_exact(&tau, &mu).unwrap()).unwrap();
        let e = permuton::freq_permuton(&tau, &mu, 200_000, 11).unwrap();
        assert!(e.within(exact, 4.0), "{tau}: {e:?} vs {exact}");
    }
}

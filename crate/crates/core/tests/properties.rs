use num::{BigRational, One};
use permuton_lab::mc::{self, Rng};
use permuton_lab::oracle;
use permuton_lab::perm::{self, DPermutation, IndexSet, SignSequence};
use permuton_lab::permuton::{self, EmpiricalPermuton, FnSampler, FreqMode, ReportSpec};
use permuton_lab::schnyder::{self, SchnyderSampler, Variant};
use permuton_lab::separable::{self, SwapTree, TreeShape};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng as _;

fn random_perm(n: usize, d: usize, rng: &mut Rng) -> DPermutation {
    let cols = (0..d - 1)
        .map(|_| {
            let mut c: Vec<u32> = (0..n as u32).collect();
            c.shuffle(rng);
            c
        })
        .collect();
    DPermutation::from_zero_based(cols).unwrap()
}

fn perm_strategy(max_n: usize, max_d: usize) -> impl Strategy<Value = DPermutation> {
    (1..=max_n, 2..=max_d, any::<u64>()).prop_map(|(n, d, seed)| random_perm(n, d, &mut mc::rng(seed)))
}

fn signs_strategy(m: usize) -> impl Strategy<Value = SignSequence> {
    (0..1u32 << m).prop_map(move |mask| SignSequence::from_mask(mask, m))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn frequencies_sum_to_one(sigma in perm_strategy(7, 3), k in 1usize..=4) {
        let k = k.min(sigma.n());
        let total: BigRational = oracle::all_d_permutations(k, sigma.d())
            .unwrap()
            .map(|tau| perm::freq(&tau, &sigma).unwrap())
            .sum();
        prop_assert_eq!(total, BigRational::one());
    }

    #[test]
    fn full_pattern_is_identity(sigma in perm_strategy(10, 4)) {
        let all = IndexSet::new((1..=sigma.n()).collect(), sigma.n()).unwrap();
        prop_assert_eq!(perm::pattern_at(&sigma, &all).unwrap(), sigma);
    }

    #[test]
    fn block_sum_blocks_are_patterns(a in 1usize..6, b in 1usize..6, d in 2usize..4, seed in any::<u64>(), mask in any::<u32>()) {
        let mut rng = mc::rng(seed);
        let s1 = random_perm(a, d, &mut rng);
        let s2 = random_perm(b, d, &mut rng);
        let s = SignSequence::from_mask(mask & ((1 << (d - 1)) - 1), d - 1);
        let sum = perm::block_sum(&s1, &s2, &s).unwrap();
        let first = IndexSet::new((1..=a).collect(), a + b).unwrap();
        let second = IndexSet::new((a + 1..=a + b).collect(), a + b).unwrap();
        prop_assert_eq!(perm::pattern_at(&sum, &first).unwrap(), s1);
        prop_assert_eq!(perm::pattern_at(&sum, &second).unwrap(), s2);
    }

    #[test]
    fn block_sum_is_associative(seed in any::<u64>(), s in signs_strategy(2)) {
        let mut rng = mc::rng(seed);
        let x: Vec<DPermutation> = (0..3).map(|_| {
            let n = rng.random_range(1..5);
            random_perm(n, 3, &mut rng)
        }).collect();
        let left = perm::block_sum(&perm::block_sum(&x[0], &x[1], &s).unwrap(), &x[2], &s).unwrap();
        let right = perm::block_sum(&x[0], &perm::block_sum(&x[1], &x[2], &s).unwrap(), &s).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn points_round_trip(sigma in perm_strategy(8, 4)) {
        let pts: Vec<Vec<f64>> = (0..sigma.n())
            .map(|i| sigma.point(i).iter().map(|&v| v as f64 + 0.5).collect())
            .collect();
        prop_assert_eq!(perm::perm_of_points(&pts).unwrap(), sigma);
    }

    #[test]
    fn slabs_have_width_mass(sigma in perm_strategy(12, 4), j in 0usize..4, a in 0usize..12, w in 0usize..12) {
        let n = sigma.n();
        let j = j % sigma.d();
        let a = a % (n + 1);
        let b = (a + w).min(n);
        let coords: Vec<u32> = (0..n).map(|i| sigma.point(i)[j]).collect();
        let inside = coords.iter().filter(|&&v| (v as usize) >= a && (v as usize) < b).count();
        prop_assert_eq!(inside, b - a);
        let mu = EmpiricalPermuton::new(sigma.clone());
        let upper = |t: usize| {
            let mut x = vec![1.0; sigma.d()];
            x[j] = t as f64 / n as f64;
            permuton::cdf(&mu, &x).unwrap()
        };
        prop_assert!((upper(b) - upper(a) - (b - a) as f64 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn point_clouds_are_deterministic(sigma in perm_strategy(20, 4), k in 1usize..50, seed in any::<u64>()) {
        let mu = EmpiricalPermuton::new(sigma);
        let a = permuton::sample_points(&mu, k, seed);
        let b = permuton::sample_points(&mu, k, seed);
        prop_assert_eq!(a.points, b.points);
    }

    #[test]
    fn start_duality_with_labels(n in 1usize..=100, seed in any::<u64>()) {
        use schnyder::PathSource;
        let s = SchnyderSampler::new(n).unwrap().sample(seed);
        let w = schnyder::string_to_walk(&s);
        let g = schnyder::build_process(&w, Variant::Green);
        let r = schnyder::build_process(&w, Variant::Red);
        let two_n = 2 * n as i64;
        for i in 0..r.num_starts() {
            let j = r.start_time(i);
            let gi = g.starts().iter().position(|&t| t == two_n - j);
            prop_assert!(gi.is_some());
            prop_assert_eq!(g.label(gi.unwrap()), r.label(i));
        }
    }

    #[test]
    fn sampled_woods_satisfy_tree_laws(n in 1usize..=120, seed in any::<u64>()) {
        let s = SchnyderSampler::new(n).unwrap().sample(seed);
        let wood = schnyder::analyse(&s);
        prop_assert!(wood.green.validate().is_ok());
        prop_assert!(wood.red.validate().is_ok());
        for v in 1..=n {
            prop_assert!(wood.green.parent(v) < v);
            let p = wood.red.parent(v);
            prop_assert!(p == 0 || p > v);
        }
        let inv = perm::inverse_marginal(&wood.perm, 1).unwrap();
        prop_assert_eq!(wood.green.preorder(), inv.clone());
        prop_assert_eq!(schnyder::green_tree_from_marginal(&inv), wood.green);
        prop_assert_eq!(wood.red.preorder(), perm::inverse_marginal(&wood.perm, 2).unwrap());
    }

    #[test]
    fn sweep_matches_pairwise_order(n in 1usize..=40, seed in any::<u64>()) {
        let s = SchnyderSampler::new(n).unwrap().sample(seed);
        let w = schnyder::string_to_walk(&s);
        let p = schnyder::schnyder_perm_from_string(&s).cols_one_based();
        prop_assert_eq!(&p[0], &schnyder::sigma_up(&schnyder::build_process(&w, Variant::Green)));
        prop_assert_eq!(&p[1], &schnyder::sigma_down(&schnyder::build_process(&w, Variant::Red)));
    }

    #[test]
    fn separable_samples_round_trip(n in 1usize..=60, d in 2usize..=5, seed in any::<u64>()) {
        let sigma = separable::sample_uniform_separable(n, d, seed).unwrap();
        prop_assert!(separable::is_separable(&sigma));
        let t = separable::sign_tree(&sigma).unwrap();
        prop_assert!(t.is_reduced());
        prop_assert_eq!(separable::sign_tree_inverse(&t), sigma.clone());
        let sw = separable::swap_tree(&sigma).unwrap();
        prop_assert_eq!(separable::swap_to_sign(&sw), t);
    }

    #[test]
    fn brownian_patterns_match_subtrees(k in 1usize..=40, seed in any::<u64>(), picks in proptest::collection::vec(any::<u64>(), 3)) {
        let mut rng = mc::rng(seed);
        let t = separable::brownian_sign_tree(k, &[0.5, 0.3], &mut rng).unwrap();
        let sigma = separable::sign_tree_inverse(&t);
        let mut idx: Vec<usize> = picks.iter().map(|p| (*p % k as u64) as usize + 1).collect();
        idx.sort_unstable();
        idx.dedup();
        let set = IndexSet::new(idx, k).unwrap();
        prop_assert_eq!(separable::pattern_from_tree(&t, &set).unwrap(), perm::pattern_at(&sigma, &set).unwrap());
    }
}

#[test]
fn reports_are_deterministic() {
    let sampler = FnSampler(|n: usize, seed: u64| {
        Ok(schnyder::schnyder_perm_from_string(&SchnyderSampler::new(n)?.sample(seed)))
    });
    let spec = ReportSpec {
        patterns: vec!["2,1|1,2".parse().unwrap(), "2,1|2,1".parse().unwrap()],
        sizes: vec![10, 20],
        reps: 8,
        mode: FreqMode::Sampled { trials: 500 },
        law_k: 2,
    };
    let a = permuton::convergence_report(&sampler, &spec, 3).unwrap();
    let b = permuton::convergence_report(&sampler, &spec, 3).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn size_one_objects() {
    assert_eq!(
        schnyder::enumerate_schnyder_strings(1).unwrap().iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        vec!["gbr"]
    );
    let counts: Vec<usize> = (1..=6).map(|n| schnyder::enumerate_schnyder_strings(n).unwrap().len()).collect();
    assert!(counts.windows(2).all(|w| w[0] <= w[1]));
    let w = schnyder::string_to_walk(&"gbr".parse().unwrap());
    let g = schnyder::build_process(&w, Variant::Green);
    assert_eq!(g.starts(), &[2]);
    assert_eq!(g.path_eval(2, 2).unwrap(), 0);
    assert!(g.path_eval(2, 1).is_err());
    assert!(g.path_eval(1, 2).is_err());
    let (pg, pr) = schnyder::pre_processes(&"gbr".parse().unwrap());
    assert_eq!(schnyder::sigma_up(&pg), vec![1]);
    assert_eq!(schnyder::sigma_down(&pr), vec![1]);
    let t = schnyder::green_tree_from_marginal(&[1]);
    assert_eq!(t.children(0), &[1]);
    let leaf = separable::sign_tree(&DPermutation::identity(1, 4)).unwrap();
    assert_eq!(leaf.n(), 1);
    assert_eq!(separable::sign_tree_inverse(&leaf), DPermutation::identity(1, 4));
    for seed in 0..10 {
        assert_eq!(separable::sample_uniform_separable(1, 3, seed).unwrap(), DPermutation::identity(1, 3));
        assert_eq!(separable::sample_brownian_cloud(1, &[0.5, 0.5], seed).unwrap(), DPermutation::identity(1, 3));
    }
    for n in 1..=2 {
        for s in oracle::all_d_permutations(n, 4).unwrap() {
            assert!(separable::is_separable(&s));
        }
    }
}

#[test]
fn zero_swap_labels_are_rejected() {
    let shape = TreeShape::new(vec![vec![1, 2], vec![], vec![3, 4], vec![], vec![]]).unwrap();
    let root = Some(SignSequence::new(vec![1, -1]).unwrap());
    let bad = vec![None, None, Some(vec![false, false]), None, None];
    assert!(SwapTree::new(3, shape.clone(), root.clone(), bad).is_err());
    let good = vec![None, None, Some(vec![true, false]), None, None];
    assert!(SwapTree::new(3, shape, root, good).is_ok());
}

#[test]
fn marginals_do_not_determine_separable_permutations() {
    let all = separable::enumerate_separable(4, 3).unwrap();
    let found = all.iter().enumerate().any(|(i, a)| {
        all[i + 1..].iter().any(|b| a.col(0) == b.col(0))
    });
    assert!(found);
}

#[test]
fn schnyder_map_is_injective_up_to_six() {
    let strings = schnyder::enumerate_schnyder_strings(6).unwrap();
    let perms: std::collections::HashSet<_> = strings.iter().map(schnyder::schnyder_perm_from_string).collect();
    assert_eq!(perms.len(), strings.len());
}

#[test]
fn rejection_cap_is_reported() {
    let e = schnyder::sample_rejection(40, 1, 10).unwrap_err();
    assert!(e.is_budget());
    assert!(SchnyderSampler::with_cap(100, 50).unwrap_err().is_budget());
}

#[test]
fn sampled_strings_round_trip() {
    let mut checked = 0;
    for n in 1..=200usize {
        let sampler = SchnyderSampler::new(n).unwrap();
        let seeds: Vec<u64> = (0..50).map(|i| mc::derive_seed(n as u64, i)).collect();
        for s in sampler.sample_batch(&seeds) {
            let w = schnyder::string_to_walk(&s);
            assert!(schnyder::ConeWalk::new(w.steps().to_vec()).is_ok());
            assert_eq!(schnyder::walk_to_string(&w), s);
            checked += 1;
        }
    }
    assert_eq!(checked, 10_000);
}

#[test]
fn processes_do_not_cross_and_coalesce() {
    let samplers: Vec<SchnyderSampler> = (1..=30).map(|n| SchnyderSampler::new(n).unwrap()).collect();
    for i in 0..1000u64 {
        let s = samplers[(i % 30) as usize].sample(mc::derive_seed(99, i));
        let w = schnyder::string_to_walk(&s);
        for variant in [Variant::Green, Variant::Red] {
            let z = schnyder::build_process(&w, variant);
            let horizon = z.horizon();
            let paths: Vec<(i64, Vec<i64>)> = z
                .starts()
                .iter()
                .map(|&j| (j, (j..=horizon).map(|t| z.path_eval(j, t).unwrap()).collect()))
                .collect();
            for (j1, p1) in &paths {
                for (j2, p2) in &paths {
                    for t in (*j1).max(*j2)..horizon {
                        let a = (p1[(t - j1) as usize], p1[(t + 1 - j1) as usize]);
                        let b = (p2[(t - j2) as usize], p2[(t + 1 - j2) as usize]);
                        assert!(a.0 < b.0 || a.1 >= b.1, "{s}: crossing at {t}");
                        assert!(a.0 != b.0 || a.1 == b.1, "{s}: split at {t}");
                    }
                }
            }
        }
    }
}

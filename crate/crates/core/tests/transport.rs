use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semalign::domain::mask_labels;
use semalign::proximity::assemble_intra;
use semalign::semantic::{normalize, profiles, SemanticCost, SemanticProfile};
use semalign::transport::{co_partition, coupling_cost, exact_semantic, hiref, HiRefParams};
use semalign::{Coupling, Forest, ForestParams, LabeledDomain, RngConfig};

/// Two interleaved half circles with noise, lifted to positive 3-vectors.
fn moons_profile(n: usize, seed: u64) -> SemanticProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = Array2::from_shape_fn((n, 3), |_| 0.0);
    let mut m = m;
    for i in 0..n {
        let t = rng.random::<f64>() * std::f64::consts::PI;
        let (mut x, mut y) = if i % 2 == 0 {
            (t.cos(), t.sin())
        } else {
            (1.0 - t.cos(), 0.5 - t.sin())
        };
        x += 0.1 * (rng.random::<f64>() - 0.5);
        y += 0.1 * (rng.random::<f64>() - 0.5);
        m[[i, 0]] = x.exp();
        m[[i, 1]] = y.exp();
        m[[i, 2]] = (-x - y).exp();
    }
    normalize(&SemanticProfile::from_matrix(m).unwrap())
}

#[test]
fn hierarchical_cost_stays_near_exact() {
    let mut ratios = Vec::new();
    for seed in 0..20u64 {
        let a = moons_profile(256, 2 * seed);
        let b = moons_profile(256, 2 * seed + 1);
        let cost = SemanticCost::new(&a, &b).unwrap();
        let exact = exact_semantic(&cost, 4096).unwrap();
        let t = hiref(&a, &b, &HiRefParams::default(), &RngConfig::new(seed)).unwrap();
        ratios.push(coupling_cost(&cost, &t) / exact.objective);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let worst = ratios.iter().cloned().fold(0.0, f64::max);
    println!("mean ratio {mean:.4} worst {worst:.4}");
    assert!(mean <= 1.25 && worst <= 1.5);
}

fn random_profile(n: usize, c: usize, seed: u64) -> SemanticProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    normalize(&SemanticProfile::from_matrix(Array2::from_shape_fn((n, c), |_| rng.random::<f64>())).unwrap())
}

#[test]
fn leaf_solves_never_lose_to_arbitrary_block_matchings() {
    for seed in 0..10u64 {
        let a = random_profile(300, 4, seed);
        let b = random_profile(300, 4, seed + 50);
        let params = HiRefParams { base_size: 40, ..Default::default() };
        let rng = RngConfig::new(seed);
        let t = hiref(&a, &b, &params, &rng).unwrap();
        let cost = SemanticCost::new(&a, &b).unwrap();
        let refined = coupling_cost(&cost, &t);
        let blocks = co_partition(&a, &b, &params, &rng).unwrap();
        let mut shuffle = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..5 {
            let mut forward = vec![0; 300];
            for block in &blocks {
                let mut dst = block.dst.clone();
                dst.shuffle(&mut shuffle);
                for (&i, &j) in block.src.iter().zip(&dst) {
                    forward[i] = j;
                }
            }
            let coarse = coupling_cost(&cost, &Coupling::new(forward).unwrap());
            assert!(refined <= coarse + 1e-9);
        }
        for block in &blocks {
            for &i in &block.src {
                assert!(block.dst.contains(&t.target_of(i)));
            }
        }
    }
}

#[test]
fn couplings_are_bijections_for_awkward_sizes() {
    for (n, branching) in [(1, 2), (2, 2), (65, 2), (129, 3), (200, 4), (1000, 2)] {
        let a = random_profile(n, 3, n as u64);
        let b = random_profile(n, 3, n as u64 + 1);
        let params = HiRefParams { branching, ..Default::default() };
        let t = hiref(&a, &b, &params, &RngConfig::new(1)).unwrap();
        let mut seen = t.forward().to_vec();
        seen.sort_unstable();
        assert_eq!(seen, (0..n).collect::<Vec<_>>());
    }
}

#[test]
fn identical_separated_profiles_map_to_identical_rows() {
    let n = 256;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let m = Array2::from_shape_fn((n, 4), |(i, c)| if i % 4 == c { 1.0 } else { 0.05 * rng.random::<f64>() });
    let p = normalize(&SemanticProfile::from_matrix(m).unwrap());
    let t = hiref(&p, &p, &HiRefParams::default(), &RngConfig::new(0)).unwrap();
    let cost = SemanticCost::new(&p, &p).unwrap();
    assert!(coupling_cost(&cost, &t).abs() < 1e-12);
    for i in 0..n {
        assert_eq!(p.row(i), p.row(t.target_of(i)));
    }
}

/// Gaussian blobs, one per class, in `dims` dimensions.
fn blobs(n: usize, dims: usize, classes: usize, seed: u64) -> LabeledDomain {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = rand_distr::StandardNormal;
    let centers = Array2::from_shape_fn((classes, dims), |_| rng.random::<f64>() * 20.0 - 10.0);
    let labels: Vec<Option<usize>> = (0..n).map(|i| Some(i % classes)).collect();
    let features = Array2::from_shape_fn((n, dims), |(i, d)| {
        centers[[i % classes, d]] + rng.sample::<f64, _>(normal)
    });
    LabeledDomain::new(format!("blobs{seed}"), features, labels, classes).unwrap()
}

#[test]
fn separable_domains_couple_within_classes() {
    let n = 1000;
    let truth_a = blobs(n, 5, 3, 1);
    let truth_b = blobs(n, 8, 3, 2);
    let rng = RngConfig::new(5);
    let a = mask_labels(&truth_a, 0.5, &rng.derive(1)).unwrap();
    let b = mask_labels(&truth_b, 0.5, &rng.derive(2)).unwrap();
    let params = ForestParams::default();
    let profile = |d: &LabeledDomain, salt: u64| {
        let forest = Forest::train(d, &params, &rng.derive(salt)).unwrap();
        let w = assemble_intra(&forest, d).unwrap();
        normalize(&profiles(&w, d).unwrap())
    };
    let (pa, pb) = (profile(&a, 3), profile(&b, 4));
    let t = hiref(&pa, &pb, &HiRefParams::default(), &rng).unwrap();
    let mismatched = (0..n)
        .filter(|&i| truth_a.labels()[i] != truth_b.labels()[t.target_of(i)])
        .count();
    let rate = mismatched as f64 / n as f64;
    println!("cross-class couples: {rate:.4}");
    assert!(rate <= 0.02);
}

mod common;

use nary_schema::corpus::{build_4mode_tensor, TupleRecord};
use nary_schema::factorization::{factorize, fit_report, init_factors, Ranks, Regularizers, SolverOptions};
use nary_schema::synth::{generate, SyntheticSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn exact_low_rank_instance_is_fitted() {
    let ranks = Ranks::new(2, 2, 2);
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let planted = common::separated_factors(&mut rng, (10, 9, 8, 3), ranks, 0.02);
        let t = common::synthesize(&planted);
        let opts = SolverOptions { seed, ..Default::default() };
        let (_, rep) = factorize(&t, ranks, Regularizers::default(), &opts).unwrap();
        assert!(rep.iterations_run <= 500);
        assert!(rep.avg_fit >= 0.99, "seed {seed}: AvgFIT {}", rep.avg_fit);
    }
}

#[test]
fn infinite_tolerance_stops_after_one_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = common::random_backoff(&mut rng, [8, 8, 6, 3], 0.1);
    let opts = SolverOptions { tol: f64::INFINITY, ..Default::default() };
    let (_, rep) = factorize(&t, Ranks::new(2, 2, 2), Regularizers::default(), &opts).unwrap();
    assert_eq!(rep.iterations_run, 1);
}

#[test]
fn zero_iterations_returns_the_initialisation() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let t = common::random_backoff(&mut rng, [8, 8, 6, 3], 0.1);
    let ranks = Ranks::new(2, 3, 2);
    let opts = SolverOptions { max_iters: 0, ..Default::default() };
    let (f, rep) = factorize(&t, ranks, Regularizers::default(), &opts).unwrap();
    assert_eq!(rep.iterations_run, 0);
    assert_eq!(f, init_factors(&t, ranks, 0).unwrap());
}

#[test]
fn initialisation_beats_random_factors() {
    let spec = SyntheticSpec::standard(5, 0.0);
    let (records, _) = nary_schema::corpus::split_five_tuples(generate(&spec).unwrap().records);
    let t = nary_schema::corpus::build_backoff_tensors(&records).unwrap();
    let ranks = Ranks::new(4, 4, 5);
    let reg = Regularizers::default();
    let init = fit_report(&t, &init_factors(&t, ranks, 5).unwrap(), &reg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let random = common::random_factors(&mut rng, t.vocab.sizes(), ranks, 0.0, 1.0);
    let random = fit_report(&t, &random, &reg).unwrap();
    assert!(init.avg_fit > random.avg_fit, "init {} vs random {}", init.avg_fit, random.avg_fit);
}

#[test]
fn factorize_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t = common::random_backoff(&mut rng, [12, 10, 8, 4], 0.05);
    let opts = SolverOptions { seed: 17, max_iters: 60, ..Default::default() };
    let reg = Regularizers::new(0.1, 0.2, 0.3);
    let a = factorize(&t, Ranks::new(3, 3, 3), reg, &opts).unwrap();
    let b = factorize(&t, Ranks::new(3, 3, 3), reg, &opts).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sparsity_ratio_matches_hand_count() {
    let records = vec![
        TupleRecord::new("s0", "r0", "o0", &["x0"], 3),
        TupleRecord::new("s0", "r0", "o0", &["x0"], 2),
        TupleRecord::new("s1", "r0", "o1", &["x0"], 1),
        TupleRecord::new("s1", "r1", "o0", &["x1"], 1),
    ];
    let four = build_4mode_tensor(&records).unwrap();
    // 2 subjects x 2 objects x 2 others x 2 relations, three distinct cells.
    assert_eq!(four.shape, [2, 2, 2, 2]);
    assert_eq!(four.nnz(), 3);
    assert_eq!(four.sparsity_ratio(), 3.0 / 16.0);
    assert_eq!(four.entries[0], ([0, 0, 0, 0], 5));
}

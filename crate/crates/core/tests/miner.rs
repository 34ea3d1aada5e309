mod common;

use std::collections::BTreeSet;

use nary_schema::dense::{DenseMatrix, DenseTensor3};
use nary_schema::factorization::{FactorSet, Ranks};
use nary_schema::schema_miner::{build_graph, induce_schemata, merge_cliques, mine_triangles, MinerOptions};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 0/1 indicator factor: column `j` covers rows `2j` and `2j + 1`.
fn blocks(cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(2 * cols, cols, |i, j| if i / 2 == j { 1.0 } else { 0.0 })
}

#[test]
fn designed_triangles_are_recovered_in_weight_order() {
    // (relation, a, b, cs, weight)
    let planted: [(usize, usize, usize, &[usize], f64); 3] =
        [(0, 0, 1, &[2], 5.0), (1, 2, 0, &[0, 1], 2.0), (2, 1, 2, &[1], 1.0)];
    let mut f = FactorSet {
        a: blocks(3),
        b: blocks(3),
        c: blocks(3),
        g1: DenseTensor3::zeros([3, 3, 3]),
        g2: DenseTensor3::zeros([3, 3, 3]),
        g3: DenseTensor3::zeros([3, 3, 3]),
    };
    for &(p, a, b, cs, w) in &planted {
        f.g3.set(a, b, p, w);
        for &c in cs {
            f.g2.set(a, c, p, w);
            f.g1.set(b, c, p, w);
        }
    }
    let vocab = common::vocab(6, 6, 6, 3);
    let out = induce_schemata(&f, &vocab, &MinerOptions::default()).unwrap();
    assert_eq!(out.len(), 3);
    for (s, &(p, a, b, cs, w)) in out.iter().zip(&planted) {
        assert_eq!((s.relation, s.a_col, s.b_col, s.c_cols.as_slice()), (p, a, b, cs));
        // Unit-norm columns scale every core cell by 2; one A-B edge plus two edges per C.
        let want = 2.0 * w * (1 + 2 * cs.len()) as f64;
        assert!((s.score - want).abs() < 1e-12, "{} vs {want}", s.score);
        let subjects: Vec<&str> = s.labels[0].nps.iter().take(2).map(|n| n.np.as_str()).collect();
        assert_eq!(subjects, [format!("s{}", 2 * a), format!("s{}", 2 * a + 1)]);
    }
    assert_eq!(out[1].signature(), "r1⟨A2,B0,C0,C1⟩");
}

#[test]
fn zero_cores_give_no_schemata() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut f = common::random_factors(&mut rng, (6, 6, 6, 2), Ranks::new(2, 2, 3), 0.1, 1.0);
    for g in [&mut f.g1, &mut f.g2, &mut f.g3] {
        g.scale(0.0);
    }
    let out = induce_schemata(&f, &common::vocab(6, 6, 6, 2), &MinerOptions::default()).unwrap();
    assert!(out.is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schemata_are_built_from_graph_triangles(seed in any::<u64>(), n in 1usize..12, ratio in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = common::random_factors(&mut rng, (7, 6, 8, 3), Ranks::new(3, 3, 4), 0.0, 1.0);
        let vocab = common::vocab(7, 6, 8, 3);
        let opts = MinerOptions { top_n: n, min_ratio: ratio, top_s: usize::MAX, ..Default::default() };
        let out = induce_schemata(&f, &vocab, &opts).unwrap();
        let normalized = f.normalized();
        let mut seen = BTreeSet::new();
        for s in &out {
            let g = build_graph(&normalized, s.relation, n, ratio).unwrap();
            let tri: BTreeSet<_> = mine_triangles(&g).into_iter().collect();
            for t in s.clique().triangles() {
                prop_assert!(tri.contains(&t));
            }
            prop_assert!(seen.insert((s.relation, s.a_col, s.b_col)), "two schemata share an A-B edge");
        }
        for w in out.windows(2) {
            prop_assert!(w[0].score >= w[1].score);
        }
    }

    #[test]
    fn merging_is_lossless_and_idempotent(seed in any::<u64>(), density in 0.05f64..0.8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = common::random_graph(&mut rng, 8, density);
        let tri = mine_triangles(&g);
        let cliques = merge_cliques(&tri);
        let mut back: Vec<_> = cliques.iter().flat_map(|c| c.triangles().collect::<Vec<_>>()).collect();
        back.sort();
        let mut sorted = tri.clone();
        sorted.sort();
        prop_assert_eq!(&back, &sorted);
        prop_assert_eq!(merge_cliques(&back), cliques.clone());
        prop_assert_eq!(merge_cliques(&tri), cliques);
    }
}

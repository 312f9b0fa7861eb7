use jtm_core::eval::{auc, hit_rate_at_n, ndcg_at_n, precision_at_n, RankingResult};
use jtm_core::numerics::{softmax, Tensor};
use jtm_core::poincare::poincare_distance;
use jtm_core::syntactic::{build_syntactic_vector, Taxonomy};
use jtm_core::text::canonicalize_title;
use proptest::prelude::*;

/// A point strictly inside the unit ball.
fn ball_point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(-1.0f64..1.0, dim), 0.0f64..0.95).prop_map(|(v, r)| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            v
        } else {
            v.iter().map(|x| x / n * r).collect()
        }
    })
}

fn pair(dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (ball_point(dim), ball_point(dim))
}

fn ranking(n_cand: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (
        Just((0..n_cand).collect::<Vec<_>>()).prop_shuffle(),
        prop::collection::vec(0..n_cand, 0..4),
    )
}

proptest! {
    #[test]
    fn softmax_rows_lie_on_simplex(rows in 1usize..5, cols in 1usize..8, seed in prop::collection::vec(-50.0f64..50.0, 40)) {
        let data: Vec<f64> = seed.iter().cycle().take(rows * cols).copied().collect();
        let s = softmax(&Tensor::matrix(rows, cols, data).unwrap()).unwrap();
        for row in s.data().chunks(cols) {
            prop_assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn distance_is_symmetric_and_nonnegative((a, b) in (1usize..6).prop_flat_map(pair)) {
        let ab = poincare_distance(&a, &b).unwrap();
        let ba = poincare_distance(&b, &a).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
        prop_assert!(poincare_distance(&a, &a).unwrap().abs() < 1e-6);
    }

    #[test]
    fn canonicalization_is_idempotent(raw in "[ \\t\\n\\x00-\\x1fA-Za-z0-9é&/.-]{0,30}") {
        if let Ok(once) = canonicalize_title(&raw) {
            prop_assert_eq!(canonicalize_title(&once).unwrap(), once.clone());
            prop_assert!(!once.chars().any(char::is_control));
            prop_assert!(!once.starts_with(' ') && !once.ends_with(' '));
            prop_assert!(!once.contains("  "));
        }
    }

    #[test]
    fn syntactic_values_in_unit_interval(
        title in "[a-z]{1,8}( [a-z]{1,8}){0,2}",
        titles in prop::collection::btree_set("[a-z]{1,8}( [a-z]{1,6})?", 1..6),
    ) {
        let titles: Vec<String> = titles.into_iter().collect();
        let tax = Taxonomy::new(&titles).unwrap();
        let v = build_syntactic_vector(&title, &tax).unwrap();
        prop_assert_eq!(v.values.len(), titles.len());
        prop_assert!(v.values.iter().all(|x| (0.0..=1.0).contains(x)));
        if let Some(i) = titles.iter().position(|t| *t == title) {
            prop_assert_eq!(v.values[i], 1.0);
        }
    }

    #[test]
    fn ranking_metrics_in_range(queries in prop::collection::vec(ranking(12), 1..6), n in 1usize..15) {
        let mut r = RankingResult::new();
        for (rank, rel) in &queries {
            r.push(rank.clone(), rel.iter().copied()).unwrap();
        }
        let p = precision_at_n(&r, n).unwrap();
        let h = hit_rate_at_n(&r, n).unwrap();
        let g = ndcg_at_n(&r, n).unwrap();
        for m in [p, h, g] {
            prop_assert!((0.0..=1.0).contains(&m));
        }
        prop_assert!(p <= h + 1e-12);
    }

    #[test]
    fn auc_agrees_with_pairwise(pos in prop::collection::vec(0u8..6, 1..30), neg in prop::collection::vec(0u8..6, 1..30)) {
        let pos: Vec<f64> = pos.into_iter().map(f64::from).collect();
        let neg: Vec<f64> = neg.into_iter().map(f64::from).collect();
        let mut wins = 0.0;
        for p in &pos {
            for q in &neg {
                wins += if p > q { 1.0 } else if p == q { 0.5 } else { 0.0 };
            }
        }
        let want = wins / (pos.len() * neg.len()) as f64;
        prop_assert_eq!(auc(&pos, &neg).unwrap(), want);
    }
}

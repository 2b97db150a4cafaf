use std::collections::BTreeSet;

use graphprobe::features::{self, Iteration, DEFAULT_DAMPING};
use graphprobe::graph::load_edge_list;
use graphprobe::probe::labels::log_bin_labels;
use graphprobe::probe::metrics::{accuracy, confusion_matrix, micro_f1};
use graphprobe::probe::split::kfold_splits;
use graphprobe::projection::joint_p;
use graphprobe::walks::{generate_corpus, WalkStrategy};
use graphprobe::Graph;
use proptest::prelude::*;

fn graph_strategy(max_n: usize) -> impl Strategy<Value = Graph> {
    (2..max_n).prop_flat_map(|n| {
        proptest::collection::vec((0..n, 0..n), 0..3 * n).prop_map(move |pairs| {
            let edges: Vec<_> = pairs.into_iter().filter(|(u, v)| u != v).collect();
            Graph::from_edges(n, &edges).expect("endpoints are in range")
        })
    })
}

fn edge_labels(g: &Graph) -> BTreeSet<(String, String)> {
    g.edges()
        .map(|(u, v)| {
            let (a, b) = (g.label(u).to_owned(), g.label(v).to_owned());
            if a <= b {
                (a, b)
            } else {
                (b, a)
            }
        })
        .collect()
}

fn points_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (6usize..20, 1usize..5).prop_flat_map(|(n, d)| {
        proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, d), n)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn binning_is_monotone(values in proptest::collection::vec(
        prop_oneof![Just(0.0), 1e-6f64..1e6], 1..200), bins in 1usize..10) {
        let lv = log_bin_labels(&values, bins, "x").unwrap();
        prop_assert!(lv.labels.iter().all(|&l| l < bins));
        for i in 0..values.len() {
            for j in 0..values.len() {
                if values[i] <= values[j] {
                    prop_assert!(lv.labels[i] <= lv.labels[j]);
                }
            }
        }
    }

    #[test]
    fn micro_f1_equals_accuracy(pairs in proptest::collection::vec((0usize..6, 0usize..6), 1..300)) {
        let (t, p): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let labels: Vec<usize> = (0..6).collect();
        prop_assert_eq!(micro_f1(&t, &p, &labels).unwrap(), accuracy(&t, &p).unwrap());
    }

    #[test]
    fn confusion_rows_count_true_labels(pairs in proptest::collection::vec((0usize..5, 0usize..5), 1..300)) {
        let (t, p): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let m = confusion_matrix(&t, &p, 5).unwrap();
        for (c, row) in m.iter().enumerate() {
            prop_assert_eq!(row.iter().sum::<usize>(), t.iter().filter(|&&x| x == c).count());
        }
        let cols: Vec<usize> = (0..5).map(|c| m.iter().map(|r| r[c]).sum()).collect();
        for (c, &n) in cols.iter().enumerate() {
            prop_assert_eq!(n, p.iter().filter(|&&x| x == c).count());
        }
    }

    #[test]
    fn edge_list_round_trip(g in graph_strategy(40)) {
        // the loader rejects edge lists without edges
        prop_assume!(g.edge_count() > 0);
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let back = load_edge_list(buf.as_slice()).unwrap().graph;
        prop_assert_eq!(back.vertex_count(), g.vertex_count());
        prop_assert_eq!(back.edge_count(), g.edge_count());
        prop_assert_eq!(edge_labels(&back), edge_labels(&g));
    }

    #[test]
    fn walks_follow_edges_and_repeat(g in graph_strategy(25), len in 1usize..30,
        seed in any::<u64>(), biased in any::<bool>()) {
        let strategy = if biased {
            WalkStrategy::Biased { p: 0.5, q: 2.0 }
        } else {
            WalkStrategy::Uniform
        };
        let corpus = generate_corpus(&g, 2, len, strategy, seed).unwrap();
        prop_assert_eq!(corpus.walks.len(), 2 * g.vertex_count());
        for w in &corpus.walks {
            prop_assert!(!w.is_empty() && w.len() <= len);
            if w.len() < len {
                prop_assert_eq!(g.degree(*w.last().unwrap()), 0);
            }
            for s in w.windows(2) {
                prop_assert!(g.has_edge(s[0], s[1]));
            }
        }
        let again = generate_corpus(&g, 2, len, strategy, seed).unwrap();
        prop_assert_eq!(corpus, again);
    }

    #[test]
    fn kfold_partitions_and_stratifies(labels in proptest::collection::vec(0usize..4, 10..120),
        k in 2usize..6, seed in any::<u64>()) {
        let folds = kfold_splits(&labels, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut seen = vec![0usize; labels.len()];
        for (train, test) in &folds {
            prop_assert_eq!(train.len() + test.len(), labels.len());
            for &i in test {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        for class in 0..4 {
            let per: Vec<usize> = folds
                .iter()
                .map(|(_, test)| test.iter().filter(|&&i| labels[i] == class).count())
                .collect();
            prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn p_is_translation_invariant(points in points_strategy(), shift in -100.0f64..100.0) {
        let n = points.len();
        let perplexity = (n as f64 / 3.0).max(2.0);
        let moved: Vec<Vec<f64>> = points.iter().map(|r| r.iter().map(|x| x + shift).collect()).collect();
        let (a, _) = joint_p(&points, perplexity);
        let (b, _) = joint_p(&moved, perplexity);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-8, "{x} vs {y}");
        }
    }

    #[test]
    fn duplicate_points_share_p_rows(mut points in points_strategy(), i in 0usize..6, j in 0usize..6) {
        prop_assume!(i != j);
        let n = points.len();
        points[j] = points[i].clone();
        let perplexity = (n as f64 / 3.0).max(2.0);
        let (p, _) = joint_p(&points, perplexity);
        for k in (0..n).filter(|&k| k != i && k != j) {
            prop_assert!((p[i * n + k] - p[j * n + k]).abs() < 1e-12);
        }
    }

    #[test]
    fn degree_centrality_orders_like_degree(g in graph_strategy(40)) {
        let dg = features::degree(&g);
        let dc = features::degree_centrality(&g);
        for u in 0..g.vertex_count() {
            for v in 0..g.vertex_count() {
                prop_assert_eq!(dg[u].cmp(&dg[v]), dc[u].total_cmp(&dc[v]));
            }
        }
    }

    #[test]
    fn pagerank_sums_to_one(g in graph_strategy(40)) {
        let pr = features::pagerank(&g, DEFAULT_DAMPING, Iteration::default()).unwrap();
        prop_assert!((pr.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(pr.iter().all(|&x| x > 0.0));
    }
}

use dsf_core::analysis::homophily_histogram;
use dsf_core::synthetic::erdos_renyi;
use dsf_core::Graph;
use proptest::prelude::*;

fn graph_strategy() -> impl Strategy<Value = Graph> {
    (1..=30usize, 0.0..0.5f64, 1..=4usize, any::<u64>())
        .prop_map(|(n, p, c, seed)| erdos_renyi(n, p, 2, c, seed).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn neighborhoods_are_nested(g in graph_strategy(), k in 0..4usize) {
        for i in 0..g.num_nodes() {
            let a = g.k_hop(i, k).unwrap();
            let b = g.k_hop(i, k + 1).unwrap();
            prop_assert!(a.nodes.contains(&i));
            prop_assert!(a.nodes.iter().all(|v| b.nodes.contains(v)));
            prop_assert!(a.edges.iter().all(|e| g.edges().contains(e)));
        }
    }

    #[test]
    fn homophily_in_unit_interval(g in graph_strategy(), k in 1..4usize) {
        if let Ok(h) = g.edge_homophily() {
            prop_assert!((0.0..=1.0).contains(&h));
        }
        for i in 0..g.num_nodes() {
            if let Some(h) = g.local_label_homophily(i, k).unwrap() {
                prop_assert!((0.0..=1.0).contains(&h));
            }
        }
    }

    #[test]
    fn diameter_hop_homophily_is_global_on_connected_graphs(g in graph_strategy()) {
        let n = g.num_nodes();
        if g.num_edges() > 0 && g.k_hop(0, n).unwrap().nodes.len() == n {
            let global = g.edge_homophily().unwrap();
            for i in 0..n {
                prop_assert_eq!(g.local_label_homophily(i, n).unwrap(), Some(global));
            }
        }
    }

    #[test]
    fn relabeling_preserves_homophily(g in graph_strategy(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let n = g.num_nodes();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut dsf_core::rng::rng_for(seed, &[]));
        let h = g.relabel(&perm).unwrap();
        prop_assert_eq!(h.num_edges(), g.num_edges());
        prop_assert_eq!(h.edge_homophily().ok(), g.edge_homophily().ok());
        for i in 0..n {
            prop_assert_eq!(h.degree(perm[i]), g.degree(i));
            prop_assert_eq!(
                h.local_label_homophily(perm[i], 2).unwrap(),
                g.local_label_homophily(i, 2).unwrap()
            );
        }
    }

    #[test]
    fn histogram_matches_pointwise_calls(g in graph_strategy()) {
        let hist = homophily_histogram(&g, 2).unwrap();
        let direct: Vec<(usize, f64)> = (0..g.num_nodes())
            .filter_map(|i| g.local_label_homophily(i, 2).unwrap().map(|h| (i, h)))
            .collect();
        prop_assert_eq!(hist, direct);
    }
}

#[test]
fn histogram_examples() {
    let path = Graph::from_feature_rows(&[(0, 1), (1, 2)], 3, &[], vec![0, 0, 1], 2).unwrap();
    let h = homophily_histogram(&path, 2).unwrap();
    assert_eq!(h, vec![(0, 0.5), (1, 0.5), (2, 0.5)]);

    let uniform = Graph::from_feature_rows(&[(0, 1), (1, 2)], 3, &[], vec![1, 1, 1], 2).unwrap();
    assert!(homophily_histogram(&uniform, 2).unwrap().iter().all(|&(_, v)| v == 1.0));

    let star = Graph::from_feature_rows(&[(0, 1), (0, 2), (0, 3)], 4, &[], vec![1, 0, 0, 0], 2).unwrap();
    assert_eq!(star.local_label_homophily(0, 1).unwrap(), Some(0.0));
}

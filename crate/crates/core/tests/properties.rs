use flowsteer::discrete::*;
use flowsteer::graph::*;
use flowsteer::retro::{generate_dataset, rank_by_frequency, topk_metrics, GenConfig, Reaction, RewardOracle};
use flowsteer::steering::{effective_sample_size, systematic_resample};
use proptest::prelude::*;

fn graph_strategy(max_n: usize, node_vocab: u8, edge_vocab: u8) -> impl Strategy<Value = AttributedGraph> {
    (1..=max_n).prop_flat_map(move |n| {
        (prop::collection::vec(0..node_vocab, n), prop::collection::vec(0..edge_vocab, n * (n - 1) / 2))
            .prop_map(|(labels, upper)| AttributedGraph::from_parts(labels, upper).unwrap())
    })
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = vec![];
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn brute_isomorphic(a: &AttributedGraph, b: &AttributedGraph) -> bool {
    a.n() == b.n() && permutations(a.n()).iter().any(|p| &a.permuted(p) == b)
}

fn weights_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 1..12).prop_filter("some mass", |w| w.iter().sum::<f64>() > 1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_form_is_invariant_under_every_permutation(g in graph_strategy(5, 3, 3)) {
        let c = g.canonical_form().unwrap();
        for p in permutations(g.n()) {
            prop_assert_eq!(&g.permuted(&p).canonical_form().unwrap(), &c);
        }
    }

    #[test]
    fn canonical_form_decides_isomorphism(a in graph_strategy(6, 2, 2), b in graph_strategy(6, 2, 2)) {
        let same = a.canonical_form().unwrap() == b.canonical_form().unwrap();
        prop_assert_eq!(same, brute_isomorphic(&a, &b));
    }

    #[test]
    fn canonical_form_matches_a_relabelled_copy(g in graph_strategy(6, 3, 3), seed in any::<u64>()) {
        let (h, _) = permute_nodes(&g, &mut RandomStream::new(seed, 0));
        prop_assert_eq!(g.canonical_form().unwrap(), h.canonical_form().unwrap());
        prop_assert!(brute_isomorphic(&g, &h));
    }

    #[test]
    fn flatten_round_trips(g in graph_strategy(8, 6, 3)) {
        let s = g.flatten(6, 3).unwrap();
        prop_assert_eq!(s.dims(), g.n() + g.n() * (g.n() - 1) / 2);
        prop_assert_eq!(unflatten(&s).unwrap(), g);
    }

    #[test]
    fn padding_keeps_the_real_subgraph(g in graph_strategy(6, 3, 3), count in 0usize..5) {
        let mut g = g;
        for i in 0..g.n() {
            if g.label(i) == DUMMY {
                g.set_label(i, 1);
            }
        }
        let padded = pad_with_dummies(&g, count);
        prop_assert_eq!(padded.n(), g.n() + count);
        prop_assert_eq!(padded.strip_dummies().canonical_form().unwrap(), g.canonical_form().unwrap());
        for i in 0..padded.n() {
            prop_assert_eq!(padded.edge(i, i), NO_BOND);
            for j in 0..padded.n() {
                prop_assert_eq!(padded.edge(i, j), padded.edge(j, i));
            }
        }
    }

    #[test]
    fn systematic_resampling_is_balanced(w in weights_strategy(), seed in any::<u64>()) {
        let k = w.len();
        let idx = systematic_resample(&w, &mut RandomStream::new(seed, 1)).unwrap();
        prop_assert_eq!(idx.len(), k);
        prop_assert!(idx.windows(2).all(|p| p[0] <= p[1]));
        let total: f64 = w.iter().sum();
        for (m, wm) in w.iter().enumerate() {
            let expected = k as f64 * wm / total;
            let got = idx.iter().filter(|&&i| i == m).count() as f64;
            prop_assert!(got >= expected.floor() - 1e-9 && got <= expected.ceil() + 1e-9, "m={} got={} expected={}", m, got, expected);
        }
    }

    #[test]
    fn ess_lies_between_one_and_k(w in weights_strategy()) {
        let e = effective_sample_size(&w).unwrap();
        prop_assert!(e >= 1.0 - 1e-9 && e <= w.len() as f64 + 1e-9);
    }

    #[test]
    fn distances_vanish_only_on_equal_inputs(w in prop::collection::vec(0.01f64..1.0, 2..8), i in 0usize..8) {
        let p = Categorical::from_unnormalized(w.clone()).unwrap();
        prop_assert_eq!(total_variation(&p, &p).unwrap(), 0.0);
        prop_assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let mut v = w;
        let i = i % v.len();
        v[i] += 0.5;
        let q = Categorical::from_unnormalized(v).unwrap();
        prop_assert!(total_variation(&p, &q).unwrap() > 0.0);
        prop_assert!(kl_divergence(&p, &q).unwrap() > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sampler_law_concentrates(w in prop::collection::vec(0.0f64..1.0, 1..=8), seed in any::<u64>()) {
        prop_assume!(w.iter().sum::<f64>() > 1e-3);
        let p = Categorical::from_unnormalized(w).unwrap();
        let n = 100_000;
        let mut counts = vec![0.0; p.len()];
        let mut rng = RandomStream::new(seed, 0);
        for _ in 0..n {
            counts[sample(&p, &mut rng)] += 1.0 / n as f64;
        }
        let emp = Categorical::from_unnormalized(counts).unwrap();
        prop_assert!(total_variation(&p, &emp).unwrap() <= 3.0 * (p.len() as f64 / n as f64).sqrt());
    }
}

fn reaction_world() -> Vec<Reaction> {
    let cfg = GenConfig { count: 40, split: [1.0, 0.0, 0.0], ..GenConfig::default() };
    generate_dataset(&cfg, &RandomStream::new(11, 0)).unwrap().train
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn metric_identities_hold(picks in prop::collection::vec((0usize..40, any::<bool>()), 1..30), which in 0usize..40) {
        let world = reaction_world();
        let r = &world[which];
        let oracle = RewardOracle::new(r.product.clone());
        // candidates: true reactants, reactants of other products, and a broken copy
        let samples: Vec<AttributedGraph> = picks
            .iter()
            .map(|&(i, own)| {
                if own {
                    world[which].reactants.clone()
                } else if i % 3 == 0 {
                    let mut g = world[i].reactants.clone();
                    g.set_label(0, DUMMY);
                    g
                } else {
                    world[i].reactants.clone()
                }
            })
            .collect();
        let ranked = rank_by_frequency(&samples).unwrap();
        let total: f64 = ranked.entries.iter().map(|e| e.score).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let ks = [1, 3, 5, 10];
        let m = topk_metrics(&ranked, &r.reactants, &oracle, &ks).unwrap();
        for (i, &k) in ks.iter().enumerate() {
            prop_assert!(m.exact[i] <= m.coverage[i]);
            let top: Vec<f64> = ranked.entries.iter().take(k).map(|e| oracle.score(&e.graph).unwrap()).collect();
            prop_assert_eq!(m.round_trip[i], top.iter().sum::<f64>() / k as f64);
            if i > 0 {
                prop_assert!(m.exact[i] >= m.exact[i - 1] && m.coverage[i] >= m.coverage[i - 1]);
            }
        }
    }
}

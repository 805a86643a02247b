//! Invariants of the graph, gossip and probability layers on random inputs.

use proptest::prelude::*;

use gossip_bandits::consensus::{consensus_step_with, disagreement, ConsensusState};
use gossip_bandits::player::{mix_probabilities, probability_from_average, select_by_inverse_cdf};
use gossip_bandits::topology::{connected_erdos_renyi, generate_erdos_renyi, metropolis_weights, Graph};

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn erdos_renyi_is_a_pure_function_of_the_seed(k in 2usize..40, p in 0.0f64..=1.0, seed in any::<u64>()) {
        let a = generate_erdos_renyi(k, p, seed).unwrap();
        let b = generate_erdos_renyi(k, p, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.connected, a.graph.is_connected());
    }

    #[test]
    fn metropolis_support_matches_graph(k in 3usize..30, p in 0.2f64..0.9, seed in any::<u64>()) {
        let g = connected_erdos_renyi(k, p, seed, 10_000).unwrap().graph;
        let a = metropolis_weights(&g).unwrap();
        prop_assert!(a.respects(&g));
        prop_assert!(a.violations().is_empty());
        // Self-inclusive degrees: off-diagonal weight is 1 / max(deg + 1).
        for (l, k2) in g.edges() {
            let expect = 1.0 / ((g.degree(l).max(g.degree(k2)) + 1) as f64);
            prop_assert_eq!(a.get(l, k2), expect);
        }
    }

    #[test]
    fn graph_text_round_trip(k in 2usize..25, p in 0.0f64..=1.0, seed in any::<u64>()) {
        let g = generate_erdos_renyi(k, p, seed).unwrap().graph;
        prop_assert_eq!(Graph::from_text(&g.to_text()).unwrap(), g);
    }

    #[test]
    fn zeroed_messages_never_raise_a_node_above_its_honest_value(
        k in 3usize..20, seed in any::<u64>(), values in proptest::collection::vec(0.01f64..1.0, 20),
    ) {
        let g = connected_erdos_renyi(k, 0.5, seed, 10_000).unwrap().graph;
        let a = metropolis_weights(&g).unwrap();
        let state = ConsensusState::new(values[..k].to_vec());
        let honest = consensus_step_with(&state, &a, |_, v| v).unwrap();
        let zeroed = consensus_step_with(&state, &a, |l, v| if l == 0 { 0.0 } else { v }).unwrap();
        for i in 0..k {
            prop_assert!(zeroed.values[i] <= honest.values[i]);
        }
        prop_assert_eq!(zeroed.values[0], honest.values[0]);
        prop_assert!(disagreement(&honest.values) <= disagreement(&state.values) + 1e-15);
    }

    #[test]
    fn mixed_probabilities_lie_on_the_floor_simplex(
        logs in proptest::collection::vec(-800.0f64..800.0, 1..30), gamma in 0.0f64..=1.0,
    ) {
        let p = mix_probabilities(&logs, gamma);
        let k = logs.len() as f64;
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for &v in &p {
            prop_assert!(v >= gamma / k - 1e-15);
        }
    }

    #[test]
    fn exact_average_reproduces_the_player_map(
        logs in proptest::collection::vec(-30.0f64..30.0, 2..20), gamma in 0.0f64..=1.0,
    ) {
        let p = mix_probabilities(&logs, gamma);
        let w: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
        let avg = w.iter().sum::<f64>() / w.len() as f64;
        for (i, &wi) in w.iter().enumerate() {
            let q = probability_from_average(wi, avg, w.len(), gamma);
            prop_assert!((q - p[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_cdf_never_selects_a_zero_mass_arm(
        raw in proptest::collection::vec(0.0f64..1.0, 1..15), u in 0.0f64..1.0,
    ) {
        let total: f64 = raw.iter().sum();
        prop_assume!(total > 1e-6);
        let p: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let k = select_by_inverse_cdf(&p, u).unwrap();
        prop_assert!(p[k] > 0.0);
    }
}

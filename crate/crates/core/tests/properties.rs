use proptest::prelude::*;

use tsch_model::chain::build_chain;
use tsch_model::conflict::{active_links, disturbing_links, validate};
use tsch_model::metrics::analyze_node;
use tsch_model::schedule::{Schedule, ScheduleBuilder, DEFAULT_CHANNEL};
use tsch_model::schedulers::{generate, proper_descendants, ta_multi_length, ta_single_length, Algorithm};
use tsch_model::stationary::{solve, Method, SolverOptions};
use tsch_model::topology::Topology;
use tsch_model::traffic::TrafficSpec;

/// Random tree plus random extra range edges.
fn topology() -> impl Strategy<Value = Topology> {
    (2usize..12)
        .prop_flat_map(|n| {
            (
                Just(n),
                proptest::collection::vec(any::<prop::sample::Index>(), n - 1),
                proptest::collection::vec((0..n, 0..n), 0..n),
            )
        })
        .prop_map(|(n, picks, extra)| {
            let mut parents = vec![None];
            let mut edges = Vec::new();
            for (j, pick) in picks.iter().enumerate() {
                let p = pick.index(j + 1);
                parents.push(Some(p));
                edges.push((j + 1, p));
            }
            edges.extend(extra.into_iter().filter(|(a, b)| a != b));
            Topology::new(n, &edges, parents).unwrap()
        })
}

/// Random well-formed schedule: per slot, a set of node-disjoint links on
/// random channels.
fn schedule_on(n: usize, max_links: usize) -> impl Strategy<Value = Schedule> {
    let slot = proptest::collection::vec((0..n, 0..n, 11u8..14), 0..=max_links);
    proptest::collection::vec(slot, 1..6).prop_map(move |slots| {
        let mut b = ScheduleBuilder::new(n, slots.len());
        for (i, links) in slots.iter().enumerate() {
            let mut busy = vec![false; n];
            for &(tx, rx, ch) in links {
                if tx != rx && !busy[tx] && !busy[rx] {
                    busy[tx] = true;
                    busy[rx] = true;
                    b.link(tx, rx, i, ch);
                }
            }
        }
        b.build().unwrap()
    })
}

fn scenario() -> impl Strategy<Value = (Topology, Schedule)> {
    topology().prop_flat_map(|t| {
        let n = t.node_count();
        (Just(t), schedule_on(n, 4))
    })
}

fn traffic(s: usize) -> impl Strategy<Value = TrafficSpec> {
    (
        proptest::collection::vec(0.0..1.0f64, s),
        proptest::collection::vec(0.0..=1.0f64, s),
    )
        .prop_map(|(p, b)| TrafficSpec::new(p, b).unwrap())
}

fn node() -> impl Strategy<Value = (usize, Vec<usize>, TrafficSpec)> {
    (1usize..7).prop_flat_map(|s| {
        (
            Just(s),
            proptest::sample::subsequence((0..s).collect::<Vec<_>>(), 1..=s),
            traffic(s),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn disturbance_is_symmetric((t, s) in scenario()) {
        for slot in 0..s.slotframe_length() {
            for l1 in active_links(&s, slot) {
                let d1 = disturbing_links(&s, &t, slot, l1).unwrap();
                prop_assert!(!d1.contains(&l1));
                for l2 in &d1 {
                    prop_assert!(disturbing_links(&s, &t, slot, *l2).unwrap().contains(&l1));
                }
            }
        }
    }

    #[test]
    fn valid_schedules_separate_disturbers_by_channel((t, s) in scenario()) {
        if validate(&s, &t).is_valid() {
            for slot in 0..s.slotframe_length() {
                for l1 in active_links(&s, slot) {
                    for l2 in disturbing_links(&s, &t, slot, l1).unwrap() {
                        prop_assert_ne!(s.channel(l1.tx, slot), s.channel(l2.tx, slot));
                    }
                }
            }
        }
    }

    #[test]
    fn one_link_per_slot_always_validates(t in topology(), s in schedule_on(11, 1)) {
        let n = t.node_count();
        // Restrict the schedule to the topology's nodes.
        let mut b = ScheduleBuilder::new(n, s.slotframe_length());
        for slot in 0..s.slotframe_length() {
            for l in active_links(&s, slot) {
                if l.tx < n && l.rx < n {
                    b.link(l.tx, l.rx, slot, DEFAULT_CHANNEL);
                }
            }
        }
        let r = validate(&b.build().unwrap(), &t);
        prop_assert!(r.is_valid());
        prop_assert!(r.is_interference_free());
    }

    #[test]
    fn chains_are_row_stochastic((s, tx, tr) in node(), k in 1usize..8) {
        let chain = build_chain(k, s, &tx, &tr).unwrap();
        for j in 0..chain.state_count() {
            prop_assert!((chain.matrix().row_sum(j) - 1.0).abs() <= 1e-12);
            for (c, _) in chain.matrix().row(j) {
                prop_assert_eq!(chain.state(c).1, (chain.state(j).1 + 1) % s);
            }
        }
    }

    #[test]
    fn node_metrics_are_well_formed((s, tx, tr) in node(), k in 1usize..8) {
        let m = analyze_node(k, &tx, &tr, &SolverOptions::default()).unwrap();
        prop_assert!((m.stationary.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!((0.0..=1.0).contains(&m.acceptance));
        prop_assert!(m.residual <= 1e-10);
        for i in 0..s {
            if !tx.contains(&i) {
                prop_assert_eq!(m.transmission[i], 0.0);
            }
        }
    }

    #[test]
    fn acceptance_falls_with_load((_, tx, tr) in node(), k in 1usize..8, scale in 1.0..3.0f64) {
        let heavier = TrafficSpec::new(
            tr.poisson_rates().iter().map(|x| x * scale).collect(),
            tr.bernoulli_probabilities().to_vec(),
        ).unwrap();
        prop_assume!(tr.expected_arrivals_per_slotframe() > 0.0);
        let o = SolverOptions::default();
        let a = analyze_node(k, &tx, &tr, &o).unwrap().acceptance;
        let b = analyze_node(k, &tx, &heavier, &o).unwrap().acceptance;
        prop_assert!(b <= a + 1e-9, "{} then {}", a, b);
    }

    #[test]
    fn acceptance_grows_with_queue_limit(rate in 0.02..0.6f64) {
        let tr = TrafficSpec::uniform_poisson(5, rate).unwrap();
        let o = SolverOptions::default();
        let mut last = 0.0;
        for k in 1..=16 {
            let a = analyze_node(k, &[0], &tr, &o).unwrap().acceptance;
            prop_assert!(a >= last - 1e-9);
            last = a;
        }
    }

    #[test]
    fn forwarding_alone_is_lossless(
        (s, slots) in (2usize..10).prop_flat_map(|s| (Just(s), Just((0..s).collect::<Vec<_>>()).prop_shuffle())),
        probs in proptest::collection::vec(0.05..=1.0f64, 10),
        extra in 0usize..3,
    ) {
        // Random interleaving of r RX slots and at least r TX slots.
        let r = s / 2;
        let mut bernoulli = vec![0.0; s];
        for j in 0..r {
            bernoulli[slots[j]] = probs[j];
        }
        let tx = &slots[r..];
        let tr = TrafficSpec::new(vec![0.0; s], bernoulli).unwrap();
        let a = analyze_node(r.max(1) + extra, tx, &tr, &SolverOptions::default()).unwrap().acceptance;
        prop_assert!((a - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn iterative_matches_dense((s, tx, tr) in node(), k in 1usize..8) {
        let chain = build_chain(k, s, &tx, &tr).unwrap();
        let o = SolverOptions::default();
        let a = solve(&chain, &o.with_method(Method::Iterative)).unwrap().distribution;
        let b = solve(&chain, &o.with_method(Method::Dense)).unwrap().distribution;
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-8);
        }
    }

    #[test]
    fn offered_load_is_the_sum_of_slot_means(tr in (1usize..8).prop_flat_map(traffic)) {
        let direct: f64 = tr.poisson_rates().iter().zip(tr.bernoulli_probabilities()).map(|(l, p)| l + p).sum();
        prop_assert!((tr.expected_arrivals_per_slotframe() - direct).abs() <= 1e-12);
    }

    #[test]
    fn schedulers_respect_their_invariants(t in topology()) {
        let d = proper_descendants(&t);
        for a in Algorithm::ALL {
            let s = generate(a, &t).unwrap().schedule;
            prop_assert!(validate(&s, &t).is_valid(), "{}", a);
            for n in 1..t.node_count() {
                let want = if a == Algorithm::Sbd { 1 } else { d.gamma[n] + 1 };
                prop_assert_eq!(s.tx_slots(n).len(), want);
            }
            let len = match a {
                Algorithm::Sbd => t.node_count(),
                Algorithm::TaSingle => ta_single_length(&d),
                Algorithm::TaMulti => ta_multi_length(&d),
            };
            prop_assert_eq!(s.slotframe_length(), len);
            prop_assert_eq!(generate(a, &t).unwrap().schedule, s);
        }
    }
}

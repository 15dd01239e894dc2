use approx::assert_abs_diff_eq;

use tsch_model::metrics::{analyze_node, Variant};
use tsch_model::multihop::{evaluate_network, NetworkError, NetworkScenario};
use tsch_model::schedule::{ScheduleBuilder, DEFAULT_CHANNEL};
use tsch_model::schedulers::{generate, Algorithm};
use tsch_model::sim::{simulate_network, NetworkSimConfig};
use tsch_model::stationary::SolverOptions;
use tsch_model::topology::{Topology, ROOT};
use tsch_model::traffic::TrafficSpec;

fn sbd19() -> NetworkScenario {
    let t = Topology::concentric(2);
    let s = generate(Algorithm::Sbd, &t).unwrap().schedule;
    NetworkScenario::new(s, t, 0.0, 16)
}

#[test]
fn sink_row_is_trivial() {
    let r = evaluate_network(&sbd19().with_interval(10.0)).unwrap();
    assert_eq!(r.end_to_end(ROOT), (1.0, 0.0));
    assert!(r.nodes[ROOT].is_none());
}

#[test]
fn no_traffic_no_throughput() {
    for a in Algorithm::ALL {
        let t = Topology::concentric(2);
        let s = generate(a, &t).unwrap().schedule;
        let r = evaluate_network(&NetworkScenario::new(s, t, 0.0, 6)).unwrap();
        assert_eq!(r.throughput(), 0.0);
        assert!(r.pdr.iter().all(|&p| p == 1.0));
    }
}

#[test]
fn low_rate_throughput_is_offered_load() {
    for a in Algorithm::ALL {
        for rings in [2, 3] {
            let t = Topology::concentric(rings);
            let n = t.node_count();
            let s = generate(a, &t).unwrap().schedule;
            let rate = 1e-4;
            let r = evaluate_network(&NetworkScenario::new(s.clone(), t, rate, 16)).unwrap();
            let expected = (n - 1) as f64 * rate / s.slot_duration();
            assert!((r.throughput() / expected - 1.0).abs() < 0.01, "{a} N={n}");
        }
    }
}

#[test]
fn two_perfect_hops_add_delays() {
    let mut b = ScheduleBuilder::new(3, 4);
    b.link(2, 1, 1, DEFAULT_CHANNEL).link(1, 0, 2, DEFAULT_CHANNEL).link(1, 0, 3, DEFAULT_CHANNEL);
    let sc = NetworkScenario::new(b.build().unwrap(), Topology::line(3), 0.0, 8);
    let r = evaluate_network(&sc).unwrap();
    assert_eq!((r.pdr[1], r.pdr[2]), (1.0, 1.0));
    let d1 = r.nodes[1].as_ref().unwrap().expected_delay;
    let d2 = r.nodes[2].as_ref().unwrap().expected_delay;
    assert_eq!(r.delay[2], d1 + d2);
}

#[test]
fn forwarding_enters_as_bernoulli_traffic() {
    let sc = sbd19().with_interval(1.0);
    let r = evaluate_network(&sc).unwrap();
    let n = sc.topology.children(ROOT)[0];
    let s = sc.schedule.slotframe_length();
    let mut bernoulli = vec![0.0; s];
    for a in &sc.schedule.node(n).rx {
        bernoulli[a.slot] = r.nodes[a.peer].as_ref().unwrap().transmission[a.slot];
    }
    let traffic = TrafficSpec::new(vec![sc.generation_rate; s], bernoulli).unwrap();
    let alone = analyze_node(16, &sc.schedule.tx_slots(n), &traffic, &SolverOptions::default()).unwrap();
    assert_abs_diff_eq!(alone.acceptance, r.nodes[n].as_ref().unwrap().acceptance, epsilon = 1e-12);
    let p = sc.topology.parent(n).unwrap();
    assert_abs_diff_eq!(r.pdr[n], r.pdr[p] * alone.acceptance, epsilon = 1e-12);
}

#[test]
fn packet_errors_halve_reception() {
    let sc = sbd19().with_interval(2.0);
    let n = sc.topology.outermost()[0];
    let p = sc.topology.parent(n).unwrap();
    let slot = sc.schedule.tx_slots(n)[0];
    let clean = evaluate_network(&sc).unwrap();
    let lossy = evaluate_network(&sc.clone().with_packet_error(n, p, 0.5)).unwrap();
    assert_abs_diff_eq!(lossy.reception[p][slot], 0.5 * clean.reception[p][slot], epsilon = 1e-15);
    assert!(sc.with_packet_error(n, p, 1.5).check().is_err());
}

#[test]
fn pdr_degrades_with_rate() {
    let outer = Topology::concentric(2).outermost();
    let pdr: Vec<f64> = [10.0, 1.0, 0.6, 0.5, 0.3]
        .iter()
        .map(|&i| evaluate_network(&sbd19().with_interval(i)).unwrap().average(&outer).0)
        .collect();
    assert!(pdr[0] > 0.99);
    assert!(pdr.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{pdr:?}");
    assert!(pdr[4] < 0.9);
}

#[test]
fn variants_apply_network_wide() {
    let sc = sbd19().with_interval(0.8);
    for v in Variant::ALL {
        let r = evaluate_network(&sc.clone().with_variant(v)).unwrap();
        assert!(r.nodes.iter().flatten().all(|m| m.variant == v));
    }
}

#[test]
fn rejects_mismatched_inputs() {
    let sc = sbd19();
    let wrong = NetworkScenario::new(sc.schedule.clone(), Topology::concentric(1), 0.01, 4);
    assert!(matches!(evaluate_network(&wrong), Err(NetworkError::SizeMismatch { .. })));
    let bad_rate = NetworkScenario::new(sc.schedule.clone(), sc.topology.clone(), -1.0, 4);
    assert!(matches!(evaluate_network(&bad_rate), Err(NetworkError::Rate(_))));
    // A forwarding node without TX slots.
    let mut b = ScheduleBuilder::new(3, 3);
    b.link(1, 0, 1, DEFAULT_CHANNEL);
    let t = Topology::line(3);
    let silent = NetworkScenario::new(b.build().unwrap(), t, 0.01, 4);
    assert!(matches!(evaluate_network(&silent), Err(NetworkError::NoTxSlots(2))));
}

#[test]
fn simulation_conserves_packets() {
    let sc = sbd19().with_interval(0.5).with_packet_error(7, 1, 0.2);
    let config = NetworkSimConfig {
        runs: 2,
        warmup_slots: 5_000,
        ..NetworkSimConfig::default()
    };
    let stats = simulate_network(&sc, &config).unwrap();
    for run in &stats.runs {
        assert!(run.conservation.balanced(), "{:?}", run.conservation);
        assert!(run.conservation.dropped > 0 && run.conservation.lost > 0);
        assert!(run.max_queue <= 16);
    }
}

#[test]
fn simulation_is_deterministic_per_seed() {
    let sc = sbd19().with_interval(1.0);
    let config = NetworkSimConfig {
        runs: 2,
        warmup_slots: 2_000,
        ..NetworkSimConfig::default()
    };
    let a = simulate_network(&sc, &config).unwrap();
    let b = simulate_network(&sc, &config).unwrap();
    assert_eq!(a.runs, b.runs);
    let c = simulate_network(&sc, &NetworkSimConfig { seed: 9, ..config }).unwrap();
    assert_ne!(a.runs, c.runs);
}

#[test]
fn simulated_two_node_network_at_low_rate() {
    let mut b = ScheduleBuilder::new(2, 4);
    b.link(1, 0, 2, DEFAULT_CHANNEL);
    let sc = NetworkScenario::new(b.build().unwrap(), Topology::line(2), 0.002, 8);
    let model = evaluate_network(&sc).unwrap();
    let config = NetworkSimConfig {
        runs: 10,
        tracked_packets: 2_000,
        warmup_slots: 1_000,
        ..NetworkSimConfig::default()
    };
    let sim = simulate_network(&sc, &config).unwrap();
    assert_eq!(sim.pdr.mean, 1.0);
    assert!(sim.delay.contains(model.delay[1]), "{} vs {:?}", model.delay[1], sim.delay);
}

#[test]
fn simulated_low_rate_outer_ring_is_lossless() {
    let sc = sbd19().with_interval(5.0);
    let config = NetworkSimConfig {
        tracked_nodes: sc.topology.outermost(),
        warmup_slots: 10_000,
        ..NetworkSimConfig::default()
    };
    let sim = simulate_network(&sc, &config).unwrap();
    assert!(sim.pdr.mean > 0.99);
    let model = evaluate_network(&sc).unwrap();
    assert!(model.average(&sc.topology.outermost()).0 > 0.99);
}

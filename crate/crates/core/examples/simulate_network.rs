//! Analytical model against the slot-level simulation on the 19-node
//! concentric network with sender-based dedicated slots and K = 16.
//! Averages are over the outer ring. The inner ring saturates near
//! I_up = 0.57 s, so the last two rates show PDR dropping.

use tsch_model::multihop::{concentric_topology, evaluate_network, NetworkScenario};
use tsch_model::schedulers::schedule_orchestra_sbd;
use tsch_model::sim::{simulate_network, NetworkSimConfig};

fn main() {
    let topology = concentric_topology(2);
    let schedule = schedule_orchestra_sbd(&topology);
    let outer = topology.outermost();
    let config = NetworkSimConfig {
        tracked_nodes: outer.clone(),
        ..NetworkSimConfig::default()
    }
    .with_warmup_seconds(900.0, schedule.slot_duration());
    println!(
        "{:>8} {:>8} {:>20} {:>8} {:>22}",
        "I_up[s]", "PDR", "sim PDR 95% CI", "delay", "sim delay 95% CI"
    );
    for interval in [5.0, 2.0, 1.0, 0.75, 0.6, 0.5] {
        let scenario = NetworkScenario::new(schedule.clone(), topology.clone(), 0.0, 16)
            .with_interval(interval);
        let model = evaluate_network(&scenario).unwrap();
        let (pdr, delay) = model.average(&outer);
        let sim = simulate_network(&scenario, &config).unwrap();
        println!(
            "{interval:>8.2} {pdr:>8.4} [{:>8.4}, {:>8.4}] {delay:>8.2} [{:>9.2}, {:>9.2}]",
            sim.pdr.ci_low, sim.pdr.ci_high, sim.delay.ci_low, sim.delay.ci_high
        );
    }
}

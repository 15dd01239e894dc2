//! Model-only view of the 37-node network: sink throughput and outer-ring
//! PDR for the three schedules as the generation rate grows.

use tsch_model::multihop::{concentric_topology, evaluate_network, NetworkScenario};
use tsch_model::schedulers::{generate, Algorithm};

fn main() {
    let topology = concentric_topology(3);
    let outer = topology.outermost();
    let rates = [0.001, 0.003, 0.01, 0.03, 0.1, 0.3];
    for algorithm in Algorithm::ALL {
        let schedule = generate(algorithm, &topology).unwrap().schedule;
        println!("{algorithm} (S={})", schedule.slotframe_length());
        println!("  {:>7} {:>12} {:>10} {:>12}", "p_gen", "thr [pkt/s]", "outer PDR", "delay [s]");
        for rate in rates {
            let r = evaluate_network(&NetworkScenario::new(schedule.clone(), topology.clone(), rate, 16)).unwrap();
            let (pdr, delay) = r.average(&outer);
            println!(
                "  {rate:>7.3} {:>12.2} {pdr:>10.4} {:>12.3}",
                r.throughput(),
                delay * schedule.slot_duration()
            );
        }
    }
}

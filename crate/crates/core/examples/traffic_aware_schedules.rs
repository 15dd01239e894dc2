//! Generates the three bundled schedules for concentric networks and checks
//! them against the topology.

use tsch_model::conflict::{channels_in_slot, validate};
use tsch_model::schedulers::{generate, Algorithm};
use tsch_model::topology::{Topology, ROOT};

fn main() {
    for rings in [2, 3] {
        let topology = Topology::concentric(rings);
        println!("{} nodes", topology.node_count());
        println!("  {:<6} {:>3} {:>9} {:>9} {:>9}", "", "S", "root RX", "RX ratio", "conflicts");
        for algorithm in Algorithm::ALL {
            let generated = generate(algorithm, &topology).unwrap();
            let schedule = &generated.schedule;
            let report = validate(schedule, &topology);
            let (rx, ratio) = schedule.rx_ratio(ROOT);
            println!(
                "  {:<6} {:>3} {:>9} {:>9.3} {:>9}",
                algorithm.name(),
                schedule.slotframe_length(),
                rx,
                ratio,
                report.collisions.len() + report.violations.len()
            );
            if algorithm == Algorithm::TaMulti {
                let used = channels_in_slot(schedule, 1);
                println!("         slot 1 uses channels {used:?}");
            }
        }
    }
}

//! Checks two small schedules against a topology: the three-node example,
//! which is conflict-free, and a four-node one where two neighbouring links
//! share slot and channel.

use tsch_model::conflict::{disturbing_links, validate, Link};
use tsch_model::schedule::{three_node_example, ScheduleBuilder, DEFAULT_CHANNEL};
use tsch_model::topology::Topology;

fn main() {
    let schedule = three_node_example();
    let topology = Topology::line(3);
    println!("three-node example:\n{}\n", validate(&schedule, &topology));

    // 1 -> 0 and 3 -> 2 in the same slot; 2 hears 0.
    let topology = Topology::new(4, &[(0, 1), (0, 2), (2, 3)], vec![None, Some(0), Some(0), Some(2)]).unwrap();
    let mut b = ScheduleBuilder::new(4, 3);
    b.link(1, 0, 1, DEFAULT_CHANNEL)
        .link(3, 2, 1, DEFAULT_CHANNEL)
        .link(2, 0, 2, DEFAULT_CHANNEL);
    let schedule = b.build().unwrap();
    let near = disturbing_links(&schedule, &topology, 1, Link { tx: 1, rx: 0 }).unwrap();
    println!("links disturbing 1->0 in slot 1: {near:?}");
    println!("{}\n", validate(&schedule, &topology));

    // Moving one of them to another channel resolves it.
    let mut b = ScheduleBuilder::new(4, 3);
    b.link(1, 0, 1, 11).link(3, 2, 1, 12).link(2, 0, 2, DEFAULT_CHANNEL);
    println!("{}", validate(&b.build().unwrap(), &topology));
}

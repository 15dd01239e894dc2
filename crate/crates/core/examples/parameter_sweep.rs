//! Runs the sweep in `examples/data/throughput_sweep.json` (three schedules,
//! two queue limits, 19 and 37 nodes) and prints the saturation throughput
//! of each curve. Pass a path to write the full CSV.

use std::collections::BTreeMap;
use std::fs::File;

use tsch_model::sweep::{run_sweep, write_csv, SweepSpec};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/throughput_sweep.json");
    let spec = SweepSpec::load(path).unwrap();
    let rows = run_sweep(&spec).unwrap();
    if let Some(out) = std::env::args().nth(1) {
        write_csv(&rows, File::create(&out).unwrap()).unwrap();
        println!("wrote {} rows to {out}", rows.len());
    }
    let mut peak: BTreeMap<(usize, String, usize), f64> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.metric == "throughput") {
        let e = peak.entry((r.nodes, r.schedule.clone(), r.queue_limit)).or_default();
        *e = e.max(r.value);
    }
    println!("{:>5} {:<6} {:>3} {:>12}", "N", "", "K", "max pkt/s");
    for ((n, schedule, k), v) in peak {
        println!("{n:>5} {schedule:<6} {k:>3} {v:>12.2}");
    }
}

//! One node, ten packet buffer, five slot frame with a single TX slot.
//! Prints acceptance probability, delay and queue-level distribution for a
//! few offered loads.

use tsch_model::metrics::analyze_node;
use tsch_model::stationary::SolverOptions;
use tsch_model::traffic::TrafficSpec;

fn main() {
    let (k, s, tx) = (10, 5, [0]);
    let options = SolverOptions::default();
    println!("{:<10} {:>7} {:>9} {:>9}", "traffic", "A_total", "Paccept", "E[delay]");
    let mut cases = Vec::new();
    for total in [0.5, 1.0, 1.5, 2.5] {
        cases.push(("poisson", total, TrafficSpec::uniform_poisson(s, total / s as f64).unwrap()));
    }
    cases.push(("bernoulli", 1.0, TrafficSpec::uniform_bernoulli(s, 0.2).unwrap()));
    for (name, total, traffic) in &cases {
        let m = analyze_node(k, &tx, traffic, &options).unwrap();
        println!("{name:<10} {total:>7.2} {:>9.4} {:>9.3}", m.acceptance, m.expected_delay);
    }

    let m = analyze_node(k, &tx, &cases[1].2, &options).unwrap();
    println!("\nqueue levels at A_total = 1:");
    for (q, p) in m.marginals.iter().enumerate() {
        println!("  q={q:<2} {p:.5}");
    }
}

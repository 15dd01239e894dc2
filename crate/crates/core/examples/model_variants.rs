//! A five-slot node with one RX and one TX slot and a five packet buffer.
//! Local generation p_gen grows while forwarded traffic shrinks, keeping one
//! arriving packet per slotframe. Compares the three model variants with the
//! simulation.

use tsch_model::metrics::{model_variant, Variant};
use tsch_model::sim::{simulate_queue, QueueSimConfig, QueueSpec};
use tsch_model::stationary::SolverOptions;
use tsch_model::traffic::TrafficSpec;

const RX: usize = 1;
const TX: usize = 3;

fn main() {
    let options = SolverOptions::default();
    println!(
        "{:>6} {:>7} {:>12} {:>7} {:>20}",
        "p_gen", "md1k", "distributed", "full", "simulation 95% CI"
    );
    for j in 0..10 {
        let p_gen = 0.2 * j as f64 / 9.0;
        let mut bernoulli = vec![0.0; 5];
        bernoulli[RX] = (1.0 - 5.0 * p_gen).max(0.0);
        let traffic = TrafficSpec::new(vec![p_gen; 5], bernoulli).unwrap();
        let p: Vec<f64> = Variant::ALL
            .iter()
            .map(|&v| model_variant(v, 5, &[TX], &traffic, &options).unwrap().acceptance)
            .collect();
        let spec = QueueSpec {
            queue_limit: 5,
            tx_slots: vec![TX],
            traffic,
        };
        let sim = simulate_queue(&spec, &QueueSimConfig::default()).acceptance;
        println!(
            "{p_gen:>6.3} {:>7.4} {:>12.4} {:>7.4} [{:.4}, {:.4}]",
            p[0], p[1], p[2], sim.ci_low, sim.ci_high
        );
    }
}

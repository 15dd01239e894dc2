//! Reducible chains and the two solvers. A node that receives in slot 0 and
//! sends in slot 1 can never hold a packet at the start of slot 2, so that
//! state is pruned before solving.

use tsch_model::chain::build_chain;
use tsch_model::stationary::{reachable_states, solve, Method, SolverOptions};
use tsch_model::traffic::TrafficSpec;

fn main() {
    let traffic = TrafficSpec::new(vec![0.0; 3], vec![0.6, 0.0, 0.0]).unwrap();
    let chain = build_chain(1, 3, &[1], &traffic).unwrap();
    let mask = reachable_states(&chain).unwrap();
    let options = SolverOptions::default();
    for method in [Method::Iterative, Method::Dense] {
        let r = solve(&chain, &options.with_method(method)).unwrap();
        println!("{method:?}: residual {:.1e}, {} iterations", r.residual, r.iterations);
        for (j, p) in r.distribution.iter().enumerate() {
            let (q, i) = chain.state(j);
            let note = if mask[j] { "" } else { "  (pruned)" };
            println!("  X({q},{i}) = {p:.4}{note}");
        }
    }

    // A larger chain: 17 queue levels over a 31-slot frame.
    let traffic = TrafficSpec::uniform_poisson(31, 0.02).unwrap();
    let chain = build_chain(16, 31, &[3, 17, 29], &traffic).unwrap();
    let a = solve(&chain, &options.with_method(Method::Iterative)).unwrap();
    let b = solve(&chain, &options.with_method(Method::Dense)).unwrap();
    let gap = a
        .distribution
        .iter()
        .zip(&b.distribution)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    println!(
        "\n{} states, {} reachable, GMRES {} iterations, max gap to dense {gap:.1e}",
        chain.state_count(),
        a.reachable,
        a.iterations
    );
}

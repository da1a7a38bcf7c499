//! Simulate a shared session over a lossy network.
//!
//! `cargo run --example lossy_sync -- [loss] [seed]`

use graphite::netsim::{run_scenario, standard_scenario, NetworkModel};

fn main() {
    let mut args = std::env::args().skip(1);
    let loss = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.2);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);
    let m = run_scenario(&standard_scenario(3, 300, NetworkModel::lossy(loss, seed))).unwrap();
    println!("{}", m.to_json());
    println!(
        "state replication converged: {}, event-replay strawman desynced: {}",
        m.converged, m.strawman_desynced
    );
}

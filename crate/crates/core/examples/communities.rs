//! Modularity clustering of the karate club network.

use graphite::community::{detect_communities, modularity};
use graphite::generators::karate_club;

fn main() {
    let g = karate_club();
    let part = detect_communities(&g, 0);
    let q = modularity(&g, &part).expect("modularity").value();
    println!("{} communities, Q = {q:.4}", part.count());
    for (c, members) in part.members().iter().enumerate() {
        let ids: Vec<&str> = members.iter().map(|&v| g.id(v)).collect();
        println!("  {c}: {}", ids.join(" "));
    }
}

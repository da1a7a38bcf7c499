//! Down-sample a scale-free graph three ways and compare degree distributions.
//!
//! `cargo run --example sampling -- [fraction]`

use graphite::generators::barabasi_albert;
use graphite::sampler::{degree_ks, matched_re_probability, sample_re, sample_rn, sample_rw};

fn main() {
    let fraction: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.3);
    let g = barabasi_albert(5000, 3, 1);
    let target = fraction * g.vertex_count() as f64;
    let p_re = matched_re_probability(&g, target);

    let rn = sample_rn(&g, fraction, 0).unwrap();
    let re = sample_re(&g, p_re, 0).unwrap();
    let rw = sample_rw(&g, 0.15, fraction, 0).unwrap();

    println!("original: {} vertices, {} edges", g.vertex_count(), g.edge_count());
    for (name, s) in [("RN", &rn), ("RE", &re), ("RW", &rw)] {
        println!(
            "{name}: {:>5} vertices {:>6} edges  degree KS {:.4}{}",
            s.graph.vertex_count(),
            s.graph.edge_count(),
            degree_ks(&g, &s.graph).unwrap(),
            if s.is_partial() { "  (walk hit its step cap)" } else { "" }
        );
    }
    println!("RE edge probability {p_re:.4} chosen to keep about {target:.0} vertices");
}

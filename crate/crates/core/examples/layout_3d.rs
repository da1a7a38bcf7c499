//! Force-directed 3D layout of the karate club network.
//!
//! `cargo run --example layout_3d -- [seed]`

use graphite::generators::karate_club;
use graphite::layout::{ideal_length, run_layout_with, LayoutParams};

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let g = karate_club();
    let params = LayoutParams::with_seed(seed);

    let pos = run_layout_with(&g, &params, |done, total| {
        if done % 500 == 0 {
            eprintln!("iteration {done}/{total}");
        }
        true
    })
    .expect("layout");

    let k = ideal_length(params.volume_side, g.vertex_count());
    let lengths: Vec<f64> = g
        .edges()
        .iter()
        .map(|&(a, b)| pos[a.index()].distance(pos[b.index()]))
        .collect();
    let mean = lengths.iter().sum::<f64>() / lengths.len() as f64;
    println!("{} vertices, {} edges, k = {k:.4}", g.vertex_count(), g.edge_count());
    println!("mean edge length {mean:.4} ({:.2} k)", mean / k);
    for v in g.vertices().take(5) {
        let p = pos[v.index()];
        println!("  {:>3}  ({:+.4}, {:+.4}, {:+.4})", g.id(v), p.x, p.y, p.z);
    }
}

//! Nearest-vertex picking with the kd-tree, the way a fingertip selects a node.

use graphite::generators::karate_club;
use graphite::geom::Vec3;
use graphite::interaction::update_highlight;
use graphite::layout::{run_layout, LayoutParams};
use graphite::spatial::KdTree;

fn main() {
    let g = karate_club();
    let pos = run_layout(&g, &LayoutParams::default()).unwrap();
    let tree = KdTree::from_positions(&pos);
    println!("{} points, tree height {}", tree.len(), tree.height());

    let target = pos[33];
    for offset in [0.0, 0.02, 0.2] {
        let tip = target + Vec3::new(offset, 0.0, 0.0);
        let hit = tree.nearest(tip).unwrap();
        print!("tip {offset:.2} from vertex {}: nearest {} at {:.4}", g.id(graphite::graph::VertexId(33)), g.id(hit.id), hit.distance);
        match update_highlight(&g, &tree, tip, 0.05) {
            Some(h) => println!(", highlighted {} with {} incident edges", h.label, h.edges.len()),
            None => println!(", nothing within 0.05"),
        }
    }
}

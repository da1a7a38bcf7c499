//! Drive a client session with synthetic hand frames: grab, drag, pinch to scale, point.

use graphite::generators::star;
use graphite::geom::Vec3;
use graphite::interaction::{ClientSession, HandFrame, PoseCode};
use graphite::layout::{run_layout, LayoutParams};
use graphite::spatial::KdTree;

fn main() {
    let g = star(5);
    let pos = run_layout(&g, &LayoutParams::default()).unwrap();
    let tree = KdTree::from_positions(&pos);
    let mut s = ClientSession::new(1);

    let fwd = Vec3::Z;
    let mut t = 0;
    let mut frame = |code: PoseCode, at: Vec3| {
        t += 33;
        HandFrame::with_pose(at, fwd, code, t)
    };
    let script = [
        (PoseCode::FIST, Vec3::ZERO),
        (PoseCode::FIST, Vec3::new(0.1, 0.0, 0.0)),
        (PoseCode::FIST, Vec3::new(0.2, 0.1, 0.0)),
        (PoseCode::OPEN, Vec3::new(0.2, 0.1, 0.0)),
        (PoseCode::PINCH, Vec3::new(0.3, 0.3, 0.3)),
        (PoseCode::PINCH, Vec3::new(0.5, 0.5, 0.5)),
        (PoseCode::OPEN, Vec3::new(0.5, 0.5, 0.5)),
    ];
    for (code, at) in script {
        let msgs = s.step(&frame(code, at), Some((&g, &tree)));
        let c = s.state.current;
        println!(
            "pose {:05b} -> {:?}: translation ({:+.3}, {:+.3}, {:+.3}) scale {:.3}, {} messages",
            code.bits(),
            s.state.mode,
            c.translation.x,
            c.translation.y,
            c.translation.z,
            c.scale,
            msgs.len()
        );
    }

    // Point at the hub, seen through the current transform.
    let hub = s.state.current.apply(pos[0]);
    let f = HandFrame::with_pose(hub, fwd, PoseCode::POINT, t + 33);
    let tip = f.index_tip();
    let f = HandFrame::with_pose(hub - (tip - hub), fwd, PoseCode::POINT, t + 33);
    s.step(&f, Some((&g, &tree)));
    println!("pointing: highlighted {:?}", s.state.highlighted.map(|v| g.id(v).to_string()));
}

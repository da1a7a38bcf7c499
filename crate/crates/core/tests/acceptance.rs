//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test --test acceptance`.

use std::collections::VecDeque;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use graphite::community::detect_communities;
use graphite::generators;
use graphite::geom::Vec3;
use graphite::graph::{to_document, Graph, VertexId};
use graphite::interaction::{
    apply_scale, encode_pose, FingerState, GraphTransform, HandFrame, InteractionState, Mode, PoseCode,
};
use graphite::layout::{ideal_length, init_layout, layout_step, run_layout, LayoutParams};
use graphite::netsim::{run_scenario, standard_scenario, NetworkModel};
use graphite::protocol::{
    encode_message, Datagram, FairScheduler, Message, MsgType, ProtocolError, ReassemblyBuffer,
    MAX_PAYLOAD,
};
use graphite::sampler::{degree_ks, matched_re_probability, sample_re, sample_rn, sample_rw};
use graphite::server::{JobError, JobParams, JobService, JobState, Launcher};
use graphite::spatial::KdTree;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if !n.is_multiple_of(2) {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
    Graph::from_edges(n, edges.iter().copied()).unwrap().0
}

// 1 ---------------------------------------------------------------------------------------

fn layout_equilibrium() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut ok = true;
    for seed in 0..5 {
        let p = LayoutParams::with_seed(seed);
        let k2 = graph(2, &[(0, 1)]);
        let pos = run_layout(&k2, &p).unwrap();
        let k = ideal_length(p.volume_side, 2);
        let d = pos[0].distance(pos[1]);
        ok &= (0.5 * k..=2.0 * k).contains(&d);
        ok &= pos == run_layout(&k2, &p).unwrap();

        let k3 = graph(3, &[(0, 1), (1, 2), (2, 0)]);
        let pos = run_layout(&k3, &p).unwrap();
        let ds = [pos[0].distance(pos[1]), pos[1].distance(pos[2]), pos[2].distance(pos[0])];
        let (lo, hi) = (ds.iter().copied().fold(f64::MAX, f64::min), ds.iter().copied().fold(0.0, f64::max));
        let spread = (hi - lo) / lo;
        ok &= spread <= 0.15;
        ok &= pos == run_layout(&k3, &p).unwrap();
        if seed == 0 {
            notes.push(format!("K2 d/k={:.3}, K3 spread={:.4}", d / k, spread));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 5.0;
    outcome(ok, format!("{} over 5 seeds, deterministic, {secs:.2}s", notes.join(", ")))
}

// 2 ---------------------------------------------------------------------------------------

fn random_edges(n: usize, m: usize, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = std::collections::BTreeSet::new();
    while set.len() < m {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b {
            set.insert((a.min(b), a.max(b)));
        }
    }
    graph(n, &set.into_iter().collect::<Vec<_>>())
}

fn median_step_seconds(n: usize) -> f64 {
    let g = random_edges(n, 1000, n as u64);
    let p = LayoutParams::default();
    let mut s = init_layout(&g, &p).unwrap();
    for _ in 0..3 {
        s = layout_step(s, &g).unwrap();
    }
    let mut times = Vec::new();
    for _ in 0..31 {
        let t = Instant::now();
        s = layout_step(s, &g).unwrap();
        times.push(t.elapsed().as_secs_f64());
    }
    median(times)
}

fn layout_scaling() -> Outcome {
    let start = Instant::now();
    let t: Vec<f64> = [250, 500, 1000].into_iter().map(median_step_seconds).collect();
    let r1 = t[1] / t[0];
    let r2 = t[2] / t[1];
    let secs = start.elapsed().as_secs_f64();
    let ok = (2.5..=6.0).contains(&r1) && (2.5..=6.0).contains(&r2) && secs < 60.0;
    outcome(
        ok,
        format!(
            "step {:.2}/{:.2}/{:.2} ms at N=250/500/1000, ratios {r1:.2} and {r2:.2}, {secs:.1}s",
            t[0] * 1e3,
            t[1] * 1e3,
            t[2] * 1e3
        ),
    )
}

// 3 ---------------------------------------------------------------------------------------

/// Q straight from the definition: (1/2m) Σ_ij (A_ij − k_i k_j / 2m) δ(c_i, c_j).
fn q_oracle(n: usize, edges: &[(usize, usize)], label: &[usize]) -> f64 {
    let m = edges.len() as f64;
    let mut a = vec![vec![0.0; n]; n];
    let mut k = vec![0.0; n];
    for &(x, y) in edges {
        a[x][y] = 1.0;
        a[y][x] = 1.0;
        k[x] += 1.0;
        k[y] += 1.0;
    }
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if label[i] == label[j] {
                q += a[i][j] - k[i] * k[j] / (2.0 * m);
            }
        }
    }
    q / (2.0 * m)
}

/// Best Q over every set partition (restricted growth strings).
fn exhaustive_best(n: usize, edges: &[(usize, usize)]) -> f64 {
    fn rec(i: usize, label: &mut Vec<usize>, max: usize, n: usize, edges: &[(usize, usize)], best: &mut f64) {
        if i == n {
            *best = best.max(q_oracle(n, edges, label));
            return;
        }
        for c in 0..=max + 1 {
            label.push(c);
            rec(i + 1, label, max.max(c), n, edges, best);
            label.pop();
        }
    }
    let mut best = f64::MIN;
    let mut label = vec![0];
    rec(1, &mut label, 0, n, edges, &mut best);
    best
}

fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut q = VecDeque::from([0]);
    seen[0] = true;
    while let Some(v) = q.pop_front() {
        for &u in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                q.push_back(u);
            }
        }
    }
    seen.iter().all(|&s| s)
}

fn community_quality() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut misses = 0;
    let mut done = 0;
    while done < 50 {
        let n = rng.random_range(3..=8);
        let p = rng.random_range(0.25..0.8);
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.random_bool(p) {
                    edges.push((a, b));
                }
            }
        }
        if !connected(n, &edges) {
            continue;
        }
        done += 1;
        let g = graph(n, &edges);
        let part = detect_communities(&g, done);
        let labels: Vec<usize> = g.vertices().map(|v| part.community_of(v) as usize).collect();
        let gap = exhaustive_best(n, &edges) - q_oracle(n, &edges, &labels);
        worst = worst.max(gap);
        if gap > 0.05 {
            misses += 1;
        }
    }
    let karate = generators::karate_club();
    let part = detect_communities(&karate, 0);
    let kedges: Vec<(usize, usize)> = karate.edges().iter().map(|&(a, b)| (a.index(), b.index())).collect();
    let klabels: Vec<usize> = karate.vertices().map(|v| part.community_of(v) as usize).collect();
    let kq = q_oracle(34, &kedges, &klabels);
    let secs = start.elapsed().as_secs_f64();
    let ok = misses == 0 && kq >= 0.35 && secs < 30.0;
    outcome(
        ok,
        format!("50 graphs, worst gap to optimum {worst:.4}, karate Q={kq:.4} ({} communities), {secs:.2}s", part.count()),
    )
}

// 4 ---------------------------------------------------------------------------------------

fn sampling_fidelity() -> Outcome {
    let start = Instant::now();
    let g = generators::barabasi_albert(1000, 3, 1);
    let p_re = matched_re_probability(&g, 0.5 * g.vertex_count() as f64);
    let (mut rn, mut re, mut rw_vs_rn) = (Vec::new(), Vec::new(), Vec::new());
    for seed in 0..20 {
        let s_rn = sample_rn(&g, 0.5, seed).unwrap().graph;
        let s_re = sample_re(&g, p_re, seed).unwrap().graph;
        let s_rw = sample_rw(&g, 1.0, 0.5, seed).unwrap().graph;
        rn.push(degree_ks(&g, &s_rn).unwrap());
        re.push(degree_ks(&g, &s_re).unwrap());
        rw_vs_rn.push(degree_ks(&s_rw, &s_rn).unwrap());
    }
    let (rn, re, rw) = (median(rn), median(re), median(rw_vs_rn));
    let secs = start.elapsed().as_secs_f64();
    let ok = rn < re && rw <= 0.1 && secs < 60.0;
    outcome(
        ok,
        format!("median KS: RN@0.5 {rn:.4} < RE@{p_re:.4} {re:.4}; RW@p=1 vs RN {rw:.4}, {secs:.2}s"),
    )
}

// 5 ---------------------------------------------------------------------------------------

fn scan(points: &[(Vec3, VertexId)], q: Vec3) -> (f64, VertexId) {
    points
        .iter()
        .map(|&(p, id)| (q.distance_squared(p), id))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .unwrap()
}

fn kd_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut v = || Vec3::new(rng.random(), rng.random(), rng.random());
    let points: Vec<(Vec3, VertexId)> = (0..10_000).map(|i| (v(), VertexId(i))).collect();
    let queries: Vec<Vec3> = (0..1000).map(|_| v()).collect();

    let start = Instant::now();
    let tree = KdTree::build(&points);
    let hits: Vec<_> = queries.iter().map(|&q| tree.nearest(q).unwrap()).collect();
    let secs = start.elapsed().as_secs_f64();
    let agree = queries
        .iter()
        .zip(&hits)
        .filter(|(q, h)| scan(&points, **q).1 == h.id)
        .count();

    // Lattice with queries at cell centres and edge midpoints: many exact ties.
    let lattice: Vec<(Vec3, VertexId)> = (0..21 * 21 * 21)
        .map(|i| {
            let p = Vec3::new((i % 21) as f64, (i / 21 % 21) as f64, (i / 441) as f64);
            (p, VertexId(i as u32))
        })
        .collect();
    let mut shuffled = lattice.clone();
    shuffled.shuffle(&mut rng);
    let ltree = KdTree::build(&shuffled);
    let mut tie_agree = 0;
    for _ in 0..1000 {
        let h = |r: &mut ChaCha8Rng| r.random_range(0..40) as f64 * 0.5;
        let q = Vec3::new(h(&mut rng), h(&mut rng), h(&mut rng));
        if scan(&lattice, q).1 == ltree.nearest(q).unwrap().id {
            tie_agree += 1;
        }
    }
    let ok = agree == 1000 && tie_agree == 1000 && secs < 1.0;
    outcome(
        ok,
        format!("{agree}/1000 uniform, {tie_agree}/1000 tie-heavy lattice; build+queries {:.1} ms", secs * 1e3),
    )
}

// 6 ---------------------------------------------------------------------------------------

fn random_message(rng: &mut ChaCha8Rng, i: usize) -> Message {
    let len = if i.is_multiple_of(1000) {
        rng.random_range(0..=MAX_PAYLOAD)
    } else {
        rng.random_range(0..2048)
    };
    let payload: Vec<u8> = (0..len).map(|_| rng.random()).collect();
    Message::new(MsgType::ALL[rng.random_range(0..4)], rng.random(), rng.random(), payload)
}

fn wire_safety() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut roundtrip = 0;
    let mut oversize = 0;
    for i in 0..100_000 {
        let m = random_message(&mut rng, i);
        let mtu = rng.random_range(17..=1500);
        let ds = encode_message(&m, mtu).unwrap();
        let mut bytes: Vec<Vec<u8>> = ds.iter().map(Datagram::encode).collect();
        oversize += bytes.iter().filter(|b| b.len() > mtu).count();
        bytes.shuffle(&mut rng);
        let mut r = ReassemblyBuffer::new();
        let mut got = None;
        for b in &bytes {
            if let Some(x) = graphite::protocol::decode_datagram(b, &mut r) {
                got = Some(x);
            }
        }
        if let Some(x) = got {
            let again: Vec<Vec<u8>> = encode_message(&x, mtu).unwrap().iter().map(Datagram::encode).collect();
            let orig: Vec<Vec<u8>> = ds.iter().map(Datagram::encode).collect();
            if x == m && again == orig {
                roundtrip += 1;
            }
        }
    }

    // Every payload size up to the limit at a spread of MTUs.
    for mtu in [17, 64, 576, 1400, 9000, 65535] {
        for len in (0..=MAX_PAYLOAD).step_by(251).chain([MAX_PAYLOAD]) {
            let m = Message::new(MsgType::Pose, 1, 0, vec![0xAB; len]);
            oversize += encode_message(&m, mtu)
                .unwrap()
                .iter()
                .filter(|d| d.encode().len() > mtu)
                .count();
        }
    }
    let too_big = matches!(
        encode_message(&Message::new(MsgType::Pose, 1, 0, vec![0; MAX_PAYLOAD + 1]), 1400),
        Err(ProtocolError::PayloadTooLarge(_))
    );

    let mut partial = 0;
    for i in 0..2000 {
        let mut m = random_message(&mut rng, i + 1);
        m.payload.resize(rng.random_range(200..5000), 7);
        let mut bytes: Vec<Vec<u8>> = encode_message(&m, 128).unwrap().iter().map(Datagram::encode).collect();
        bytes.remove(rng.random_range(0..bytes.len()));
        bytes.shuffle(&mut rng);
        let mut r = ReassemblyBuffer::new();
        for b in &bytes {
            if graphite::protocol::decode_datagram(b, &mut r).is_some() {
                partial += 1;
            }
        }
        // Fragments of the next message must not complete the damaged one either.
        let next = Message::new(m.msg_type, m.client_id, m.sequence.wrapping_add(1), vec![1; 300]);
        for d in encode_message(&next, 128).unwrap() {
            if let Some(x) = r.push(d) {
                if x != next {
                    partial += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = roundtrip == 100_000 && oversize == 0 && too_big && partial == 0;
    outcome(
        ok,
        format!("{roundtrip}/100000 round-trips, {oversize} oversize datagrams, {partial} partial deliveries in 2000 damaged messages, {secs:.1}s"),
    )
}

// 7 ---------------------------------------------------------------------------------------

fn fairness() -> Outcome {
    let mut s: FairScheduler<u32> = FairScheduler::new();
    let mut sent = 0;
    let mut round = 0u32;
    let mut active = 0;
    while sent < 10_000 {
        for i in 0..100 {
            s.push(MsgType::Pose, round * 100 + i);
        }
        s.push(MsgType::Highlight, round);
        active = active.max(s.active_types());
        for _ in 0..50 {
            if s.next_to_send().is_some() {
                sent += 1;
            }
        }
        round += 1;
    }
    let gap = s.stats().max_gap_of(MsgType::Highlight);

    // Same load through the relay: POSE at 100 per tick against one of everything else.
    let mut sc = standard_scenario(2, 100, NetworkModel::default());
    sc.pose_repeat = 99;
    sc.server_budget = Some(60);
    let m = run_scenario(&sc).unwrap();
    let relay_ok = [MsgType::Transform, MsgType::Highlight]
        .iter()
        .all(|t| m.per_type[t].max_send_gap <= m.active_types as u64);
    let relayed: u64 = m.per_type.values().map(|t| t.max_send_gap).max().unwrap_or(0);

    let ok = gap <= active as u64 && relay_ok;
    outcome(
        ok,
        format!(
            "scheduler: {sent} sends, rare max gap {gap} with {active} active types; relay: rare gaps {} / {} (worst any type {relayed}) with {} types",
            m.per_type[&MsgType::Transform].max_send_gap,
            m.per_type[&MsgType::Highlight].max_send_gap,
            m.active_types
        ),
    )
}

// 8 ---------------------------------------------------------------------------------------

fn loss_convergence() -> Outcome {
    let start = Instant::now();
    let mut converged = 0;
    let mut desynced = 0;
    for seed in 0..20 {
        let m = run_scenario(&standard_scenario(2, 120, NetworkModel::lossy(0.2, seed))).unwrap();
        converged += m.converged as usize;
        desynced += m.strawman_desynced as usize;
    }
    let ok = converged == 20 && desynced >= 1;
    outcome(
        ok,
        format!(
            "state-based converged on {converged}/20 seeds, event-based strawman desynced on {desynced}/20, {:.2}s",
            start.elapsed().as_secs_f64()
        ),
    )
}

// 9 ---------------------------------------------------------------------------------------

fn pose_coverage() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut reachable = 0;
    for code in PoseCode::all() {
        let fwd = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.5);
        let f = HandFrame::with_pose(Vec3::new(0.1, 0.2, 0.3), fwd, code, 0);
        let ok = [[FingerState::Open; 5], [FingerState::Closed; 5]]
            .iter()
            .all(|prev| encode_pose(&f, prev).0 == code);
        reachable += ok as usize;
    }

    let mut transitions = 0;
    let mut states: [FingerState; 5] = std::array::from_fn(|_| {
        if rng.random_bool(0.5) {
            FingerState::Open
        } else {
            FingerState::Closed
        }
    });
    for t in 0..1000 {
        let angles = std::array::from_fn(|_| rng.random_range(80.0001..99.9999));
        let fwd = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let f = HandFrame::from_angles(Vec3::ZERO, fwd, angles, t);
        let (_, next) = encode_pose(&f, &states);
        transitions += next.iter().zip(&states).filter(|(a, b)| a != b).count();
        states = next;
    }
    let ok = reachable == 32 && transitions == 0;
    outcome(ok, format!("{reachable}/32 codes reachable, {transitions} transitions over 1000 dead-band frames"))
}

// 10 --------------------------------------------------------------------------------------

fn scale_fixed_point() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let mut v = |r: f64| Vec3::new(rng.random_range(-r..r), rng.random_range(-r..r), rng.random_range(-r..r));
        let translation = v(5.0);
        let anchor = v(5.0);
        let hand = anchor + v(1.0);
        let center = v(1.0);
        let start = GraphTransform {
            translation,
            scale: rng.random_range(0.1..10.0),
        };
        let s = InteractionState {
            current: start,
            ..Default::default()
        }
        .enter(Mode::Scaling, anchor, Vec3::Z, center);
        let out = apply_scale(&s, hand).unwrap();
        let local = start.inverse_apply(anchor);
        worst = worst.max(out.current.apply(local).distance(anchor));
    }
    outcome(worst <= 1e-9, format!("1000 random gestures, worst anchor drift {worst:.2e}"))
}

// 11 --------------------------------------------------------------------------------------

#[cfg(unix)]
fn kill(pid: u32) {
    unsafe {
        libc::kill(pid as i32, libc::SIGKILL);
    }
}

fn server_durability() -> Outcome {
    if !cfg!(unix) {
        return outcome(false, "needs a unix host to kill worker processes");
    }
    let dir = tempfile::tempdir().unwrap();
    let launcher = Launcher::Process(env!("CARGO_BIN_EXE_graphite").into());
    let wait = Duration::from_secs(120);
    let slow_doc = to_document(&generators::barabasi_albert(3000, 3, 2));
    let k3 = to_document(&generators::complete(3));

    let svc = JobService::open(dir.path(), launcher.clone()).unwrap();
    let mut slow = JobParams::default();
    slow.layout.max_iterations = 1_000_000;
    let victim = svc.submit(&slow_doc, slow).unwrap();
    let running = svc.wait_for(&victim, wait, |s| s == JobState::Running).unwrap();
    let pid = running.worker_pid;
    #[cfg(unix)]
    kill(pid.unwrap_or(0));
    let after_kill = svc.wait(&victim, wait).unwrap();
    let no_phantom = matches!(after_kill.state, JobState::Failed | JobState::Queued)
        && matches!(svc.fetch_result(&victim), Err(JobError::NotDone { .. }));

    let good = svc.submit(&k3, JobParams::default()).unwrap();
    let done = svc.wait(&good, wait).unwrap();
    let before = svc.fetch_result(&good).unwrap();
    drop(svc);

    let svc = JobService::open(dir.path(), launcher).unwrap();
    let after = svc.fetch_result(&good).unwrap();
    let victim_after = svc.status(&victim).unwrap().state;
    let ok = pid.is_some()
        && no_phantom
        && done.state == JobState::Done
        && before == after
        && victim_after == JobState::Failed;
    outcome(
        ok,
        format!(
            "killed worker -> {}, other job {}, result after restart {} ({} bytes)",
            after_kill.state,
            done.state,
            if before == after { "identical" } else { "DIFFERENT" },
            after.len()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("layout equilibrium", layout_equilibrium),
        ("layout cost scaling", layout_scaling),
        ("community quality", community_quality),
        ("sampling fidelity", sampling_fidelity),
        ("kd-tree exactness", kd_exactness),
        ("wire safety", wire_safety),
        ("fairness", fairness),
        ("loss convergence", loss_convergence),
        ("pose coverage and hysteresis", pose_coverage),
        ("scale fixed point", scale_fixed_point),
        ("server durability", server_durability),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!("{} {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

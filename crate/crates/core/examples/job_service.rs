//! Submit layout jobs to an in-process job service and fetch the annotated result.

use std::time::Duration;

use graphite::generators::karate_club;
use graphite::graph::{load_graph, to_document};
use graphite::server::{JobParams, JobService, Launcher};

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let svc = JobService::open(dir.path(), Launcher::Thread).unwrap();

    let doc = to_document(&karate_club());
    let id = svc.submit(&doc, JobParams::default()).unwrap();
    println!("submitted {id}");
    let job = svc.wait(&id, Duration::from_secs(60)).unwrap();
    println!("state {} result {:?}", job.state, job.result_ref);

    let (g, _) = load_graph(&svc.fetch_result(&id).unwrap()).unwrap();
    for v in g.vertices().take(4) {
        let m = g.meta(v);
        println!("  {} cluster {:?} position {:?}", g.id(v), m.cluster, m.position);
    }
}

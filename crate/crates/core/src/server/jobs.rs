use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use super::blob::{BlobStore, LocalBlobStore};
use super::catalogue::{now_ms, CatalogueError, JobCatalogue, JobParams, JobState, LayoutJob};
use crate::community::detect_communities;
use crate::graph::{load_graph, serialize_annotated, GraphError};
use crate::layout::{run_layout_with, LayoutError};
use crate::sampler::SampleError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
}

/// Sample (if asked), lay out, cluster and annotate. Same input, same bytes.
pub fn run_pipeline(doc: &[u8], params: &JobParams) -> Result<Vec<u8>, PipelineError> {
    run_pipeline_with(doc, params, |_, _| true)
}

/// [`run_pipeline`] with layout progress reporting and cancellation, as in
/// [`run_layout_with`].
pub fn run_pipeline_with(
    doc: &[u8],
    params: &JobParams,
    progress: impl FnMut(usize, usize) -> bool,
) -> Result<Vec<u8>, PipelineError> {
    let (mut g, _) = load_graph(doc)?;
    if let Some(spec) = &params.sample {
        g = spec.apply(&g)?.graph;
    }
    let positions = run_layout_with(&g, &params.layout, progress)?;
    let partition = detect_communities(&g, params.layout.rng_seed);
    Ok(serialize_annotated(&g, &positions, &partition)?)
}

/// Progress a worker reports to its supervisor, one per stdout line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WorkerEvent {
    Running,
    Progress { done: usize, total: usize },
    Uploading,
    Done { result_ref: String },
    Failed { error: String },
}

impl WorkerEvent {
    pub fn to_line(&self) -> String {
        match self {
            WorkerEvent::Running => "running".into(),
            WorkerEvent::Progress { done, total } => format!("progress {done}/{total}"),
            WorkerEvent::Uploading => "uploading".into(),
            WorkerEvent::Done { result_ref } => format!("done {result_ref}"),
            WorkerEvent::Failed { error } => format!("failed {}", error.replace('\n', " ")),
        }
    }

    pub fn parse(line: &str) -> Option<Self> {
        let (word, rest) = line.split_once(' ').unwrap_or((line, ""));
        match word {
            "running" => Some(WorkerEvent::Running),
            "progress" => {
                let (d, t) = rest.split_once('/')?;
                Some(WorkerEvent::Progress {
                    done: d.parse().ok()?,
                    total: t.parse().ok()?,
                })
            }
            "uploading" => Some(WorkerEvent::Uploading),
            "done" if !rest.is_empty() => Some(WorkerEvent::Done {
                result_ref: rest.to_string(),
            }),
            "failed" => Some(WorkerEvent::Failed {
                error: rest.to_string(),
            }),
            _ => None,
        }
    }
}

fn job_dir(data_dir: &Path, id: &str) -> PathBuf {
    data_dir.join("jobs").join(id)
}

fn blob_dir(data_dir: &Path) -> PathBuf {
    data_dir.join("blobs")
}

fn result_key(id: &str) -> String {
    format!("{id}.json")
}

const PROGRESS_EVERY: Duration = Duration::from_millis(200);

/// The worker side: reads the job's input from the data directory, runs the pipeline, stores
/// the result and reports each step through `report`. When `report` returns false nobody is
/// listening any more, and the layout is abandoned at the next progress report.
pub fn run_worker(data_dir: &Path, id: &str, mut report: impl FnMut(WorkerEvent) -> bool) -> bool {
    report(WorkerEvent::Running);
    let mut last = Instant::now();
    let outcome = (|| -> Result<String, String> {
        let dir = job_dir(data_dir, id);
        let doc = fs::read(dir.join("input.json")).map_err(|e| format!("reading input: {e}"))?;
        let params: JobParams = serde_json::from_slice(
            &fs::read(dir.join("params.json")).map_err(|e| format!("reading params: {e}"))?,
        )
        .map_err(|e| format!("params: {e}"))?;
        let bytes = run_pipeline_with(&doc, &params, |done, total| {
            if last.elapsed() < PROGRESS_EVERY {
                return true;
            }
            last = Instant::now();
            report(WorkerEvent::Progress { done, total })
        })
        .map_err(|e| e.to_string())?;
        report(WorkerEvent::Uploading);
        let key = result_key(id);
        LocalBlobStore::open(blob_dir(data_dir))
            .and_then(|s| s.put(&key, &bytes))
            .map_err(|e| format!("storing result: {e}"))?;
        Ok(key)
    })();
    match outcome {
        Ok(result_ref) => {
            report(WorkerEvent::Done { result_ref });
            true
        }
        Err(error) => {
            report(WorkerEvent::Failed { error });
            false
        }
    }
}

/// Entry point of the worker process: events go to stdout. Returns the exit code.
pub fn worker_main(data_dir: &Path, id: &str) -> i32 {
    let stdout = io::stdout();
    let ok = run_worker(data_dir, id, |e| {
        let mut out = stdout.lock();
        writeln!(out, "{}", e.to_line()).and_then(|_| out.flush()).is_ok()
    });
    if ok {
        0
    } else {
        1
    }
}

/// How workers are started.
#[derive(Clone, Debug)]
pub enum Launcher {
    /// Runs `program worker --data-dir D --job ID` as a child process.
    Process(PathBuf),
    /// Runs the pipeline on a thread of this process. No crash isolation; for embedding and
    /// examples that have no worker binary at hand.
    Thread,
}

#[derive(Debug, Error)]
pub enum JobError {
    #[error("invalid graph document: {0}")]
    InvalidGraph(#[from] GraphError),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no job {0}")]
    NotFound(String),
    #[error("job {id} is {state}, not done")]
    NotDone { id: String, state: JobState },
    #[error("result of job {0} is missing from the blob store")]
    MissingResult(String),
    #[error(transparent)]
    Catalogue(#[from] CatalogueError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

/// Accepts layout jobs, runs each in its own worker and records progress in the catalogue.
pub struct JobService {
    data_dir: PathBuf,
    catalogue: Arc<Mutex<JobCatalogue>>,
    blobs: Arc<dyn BlobStore>,
    launcher: Launcher,
}

impl JobService {
    /// Opens (or creates) the service state under `data_dir`. Jobs left in flight by an
    /// earlier instance are marked failed.
    pub fn open(data_dir: impl Into<PathBuf>, launcher: Launcher) -> Result<Self, JobError> {
        let data_dir = data_dir.into();
        fs::create_dir_all(data_dir.join("jobs"))?;
        let blobs = LocalBlobStore::open(blob_dir(&data_dir))?;
        let catalogue = JobCatalogue::open(data_dir.join("catalogue.json"))?;
        Ok(JobService {
            data_dir,
            catalogue: Arc::new(Mutex::new(catalogue)),
            blobs: Arc::new(blobs),
            launcher,
        })
    }

    pub fn data_dir(&self) -> &Path {
        &self.data_dir
    }

    /// Validates the document and parameters, records the job as queued and starts its worker.
    pub fn submit(&self, doc: &[u8], params: JobParams) -> Result<String, JobError> {
        load_graph(doc)?;
        params
            .layout
            .validate()
            .map_err(|e| JobError::InvalidParams(e.to_string()))?;
        if let Some(s) = &params.sample {
            s.validate().map_err(|e| JobError::InvalidParams(e.to_string()))?;
        }

        let id = uuid::Uuid::new_v4().simple().to_string();
        let dir = job_dir(&self.data_dir, &id);
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("input.json"), doc)?;
        fs::write(
            dir.join("params.json"),
            serde_json::to_vec(&params).expect("params serialize"),
        )?;
        self.catalogue.lock().unwrap().insert(LayoutJob {
            job_id: id.clone(),
            state: JobState::Queued,
            params,
            submitted_at_ms: now_ms(),
            finished_at_ms: None,
            result_ref: None,
            error: None,
            worker_pid: None,
        })?;
        if let Err(e) = self.launch(&id) {
            self.fail(&id, &format!("could not start worker: {e}"));
        }
        Ok(id)
    }

    fn launch(&self, id: &str) -> io::Result<()> {
        let catalogue = self.catalogue.clone();
        let blobs = self.blobs.clone();
        let job = id.to_string();
        match &self.launcher {
            Launcher::Process(program) => {
                let mut child = Command::new(program)
                    .arg("worker")
                    .arg("--data-dir")
                    .arg(&self.data_dir)
                    .arg("--job")
                    .arg(id)
                    .stdin(Stdio::null())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()?;
                let _ = catalogue.lock().unwrap().set_worker_pid(id, child.id());
                let stdout = child.stdout.take().expect("stdout piped");
                thread::spawn(move || {
                    for line in BufReader::new(stdout).lines() {
                        let Ok(line) = line else { break };
                        if let Some(e) = WorkerEvent::parse(line.trim()) {
                            apply_event(&catalogue, blobs.as_ref(), &job, e);
                        }
                    }
                    let status = child.wait();
                    let mut c = catalogue.lock().unwrap();
                    if c.get(&job).is_some_and(|j| !j.state.is_terminal()) {
                        let why = match status {
                            Ok(s) => format!("worker exited without finishing ({s})"),
                            Err(e) => format!("worker lost: {e}"),
                        };
                        let _ = c.transition(&job, JobState::Failed, |j| j.error = Some(why));
                    }
                });
            }
            Launcher::Thread => {
                let data_dir = self.data_dir.clone();
                thread::spawn(move || {
                    run_worker(&data_dir, &job, |e| {
                        apply_event(&catalogue, blobs.as_ref(), &job, e);
                        true
                    });
                });
            }
        }
        Ok(())
    }

    fn fail(&self, id: &str, why: &str) {
        let _ = self
            .catalogue
            .lock()
            .unwrap()
            .transition(id, JobState::Failed, |j| j.error = Some(why.to_string()));
    }

    pub fn status(&self, id: &str) -> Result<LayoutJob, JobError> {
        self.catalogue
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| JobError::NotFound(id.to_string()))
    }

    pub fn list(&self) -> Vec<LayoutJob> {
        self.catalogue.lock().unwrap().list().cloned().collect()
    }

    pub fn worker_pid(&self, id: &str) -> Option<u32> {
        self.status(id).ok()?.worker_pid
    }

    /// The stored result document of a finished job.
    pub fn fetch_result(&self, id: &str) -> Result<Vec<u8>, JobError> {
        let job = self.status(id)?;
        let key = match (job.state, job.result_ref) {
            (JobState::Done, Some(k)) => k,
            (state, _) => {
                return Err(JobError::NotDone {
                    id: id.to_string(),
                    state,
                })
            }
        };
        self.blobs
            .get(&key)?
            .ok_or_else(|| JobError::MissingResult(id.to_string()))
    }

    /// Polls until the job is done or failed, or `timeout` passes.
    pub fn wait(&self, id: &str, timeout: Duration) -> Result<LayoutJob, JobError> {
        self.wait_for(id, timeout, JobState::is_terminal)
    }

    pub fn wait_for(
        &self,
        id: &str,
        timeout: Duration,
        pred: impl Fn(JobState) -> bool,
    ) -> Result<LayoutJob, JobError> {
        let start = Instant::now();
        loop {
            let j = self.status(id)?;
            if pred(j.state) || start.elapsed() >= timeout {
                return Ok(j);
            }
            thread::sleep(Duration::from_millis(10));
        }
    }
}

fn apply_event(catalogue: &Mutex<JobCatalogue>, blobs: &dyn BlobStore, id: &str, e: WorkerEvent) {
    let mut c = catalogue.lock().unwrap();
    let _ = match e {
        WorkerEvent::Running => c.transition(id, JobState::Running, |_| {}),
        WorkerEvent::Progress { .. } => return,
        WorkerEvent::Uploading => c.transition(id, JobState::Uploading, |_| {}),
        // Done is recorded only once the blob is really there.
        WorkerEvent::Done { result_ref } => match blobs.contains(&result_ref) {
            Ok(true) => c.transition(id, JobState::Done, |j| j.result_ref = Some(result_ref)),
            _ => c.transition(id, JobState::Failed, |j| {
                j.error = Some(format!("worker reported {result_ref} but it is not stored"))
            }),
        },
        WorkerEvent::Failed { error } => c.transition(id, JobState::Failed, |j| j.error = Some(error)),
    };
}

#[cfg(test)]
mod tests {
    use super::*;

    const K3: &[u8] = br#"{"nodes":[{"id":"a","label":"A"},{"id":"b"},{"id":"c"}],"edges":[["a","b"],["b","c"],["c","a"]]}"#;

    #[test]
    fn event_lines_roundtrip() {
        for e in [
            WorkerEvent::Running,
            WorkerEvent::Progress { done: 3, total: 2000 },
            WorkerEvent::Uploading,
            WorkerEvent::Done {
                result_ref: "x.json".into(),
            },
            WorkerEvent::Failed {
                error: "bad thing".into(),
            },
        ] {
            assert_eq!(WorkerEvent::parse(&e.to_line()), Some(e));
        }
        assert_eq!(WorkerEvent::parse("noise"), None);
    }

    #[test]
    fn pipeline_annotates_every_vertex() {
        let out = run_pipeline(K3, &JobParams::default()).unwrap();
        let (g, _) = load_graph(&out).unwrap();
        assert_eq!(g.vertex_count(), 3);
        for v in g.vertices() {
            assert!(g.meta(v).position.is_some());
            assert!(g.meta(v).cluster.is_some());
        }
        assert_eq!(out, run_pipeline(K3, &JobParams::default()).unwrap());
    }

    #[test]
    fn thread_jobs_complete_and_reject_bad_input() {
        let d = tempfile::tempdir().unwrap();
        let svc = JobService::open(d.path(), Launcher::Thread).unwrap();
        assert!(matches!(svc.submit(b"{nope", JobParams::default()), Err(JobError::InvalidGraph(_))));
        assert!(svc.list().is_empty());

        let a = svc.submit(K3, JobParams::default()).unwrap();
        let mut p = JobParams::default();
        p.layout.rng_seed = 9;
        let b = svc.submit(K3, p.clone()).unwrap();
        for id in [&a, &b] {
            assert_eq!(svc.wait(id, Duration::from_secs(20)).unwrap().state, JobState::Done);
        }
        assert_eq!(svc.fetch_result(&a).unwrap(), run_pipeline(K3, &JobParams::default()).unwrap());
        assert_eq!(svc.fetch_result(&b).unwrap(), run_pipeline(K3, &p).unwrap());
        assert!(matches!(svc.status("nope"), Err(JobError::NotFound(_))));
    }

    #[test]
    fn failing_pipeline_marks_job_failed() {
        let d = tempfile::tempdir().unwrap();
        let svc = JobService::open(d.path(), Launcher::Thread).unwrap();
        let id = svc.submit(br#"{"nodes":[]}"#, JobParams::default()).unwrap();
        let j = svc.wait(&id, Duration::from_secs(10)).unwrap();
        assert_eq!(j.state, JobState::Failed);
        assert!(j.error.is_some());
        assert!(matches!(
            svc.fetch_result(&id),
            Err(JobError::NotDone { state: JobState::Failed, .. })
        ));
    }
}

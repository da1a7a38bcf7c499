use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::blob::write_atomic;
use crate::layout::LayoutParams;
use crate::sampler::SampleSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Uploading,
    Done,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }

    /// Forward along Queued → Running → Uploading → Done, or to Failed from anywhere not
    /// already finished.
    pub fn can_become(self, next: JobState) -> bool {
        use JobState::*;
        matches!(
            (self, next),
            (Queued, Running) | (Running, Uploading) | (Uploading, Done)
        ) || (next == Failed && !self.is_terminal())
    }
}

impl fmt::Display for JobState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JobState::Queued => "queued",
            JobState::Running => "running",
            JobState::Uploading => "uploading",
            JobState::Done => "done",
            JobState::Failed => "failed",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JobParams {
    pub layout: LayoutParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<SampleSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutJob {
    pub job_id: String,
    pub state: JobState,
    pub params: JobParams,
    pub submitted_at_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worker_pid: Option<u32>,
}

#[derive(Debug, Error)]
pub enum CatalogueError {
    #[error("catalogue i/o: {0}")]
    Io(#[from] io::Error),
    #[error("catalogue file is corrupt: {0}")]
    Corrupt(#[from] serde_json::Error),
    #[error("job {0} already exists")]
    Duplicate(String),
    #[error("no job {0}")]
    NotFound(String),
    #[error("job {id} cannot go from {from} to {to}")]
    Transition { id: String, from: JobState, to: JobState },
}

/// Durable map of jobs, kept in one JSON file that is rewritten by atomic rename on every
/// change. One process owns it at a time.
#[derive(Debug)]
pub struct JobCatalogue {
    path: PathBuf,
    jobs: BTreeMap<String, LayoutJob>,
}

pub const RESTART_ERROR: &str = "interrupted by server restart";

impl JobCatalogue {
    /// Loads `path` if it exists. Jobs that were still in flight belonged to workers of a
    /// previous server and are marked failed.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, CatalogueError> {
        let path = path.into();
        let jobs = match fs::read(&path) {
            Ok(b) => serde_json::from_slice(&b)?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(e.into()),
        };
        let mut c = JobCatalogue { path, jobs };
        let stale: Vec<String> = c
            .jobs
            .values()
            .filter(|j| !j.state.is_terminal())
            .map(|j| j.job_id.clone())
            .collect();
        for id in &stale {
            let j = c.jobs.get_mut(id).unwrap();
            j.state = JobState::Failed;
            j.error = Some(RESTART_ERROR.into());
            j.worker_pid = None;
            j.finished_at_ms = Some(now_ms());
        }
        if !stale.is_empty() {
            c.persist()?;
        }
        Ok(c)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn persist(&self) -> Result<(), CatalogueError> {
        let bytes = serde_json::to_vec_pretty(&self.jobs)?;
        write_atomic(&self.path, &bytes)?;
        Ok(())
    }

    pub fn insert(&mut self, job: LayoutJob) -> Result<(), CatalogueError> {
        if self.jobs.contains_key(&job.job_id) {
            return Err(CatalogueError::Duplicate(job.job_id));
        }
        self.jobs.insert(job.job_id.clone(), job);
        self.persist()
    }

    pub fn get(&self, id: &str) -> Option<&LayoutJob> {
        self.jobs.get(id)
    }

    pub fn list(&self) -> impl Iterator<Item = &LayoutJob> {
        self.jobs.values()
    }

    /// Moves a job to `to` if the transition is legal, letting `edit` fill in the other
    /// fields, and persists before returning.
    pub fn transition(
        &mut self,
        id: &str,
        to: JobState,
        edit: impl FnOnce(&mut LayoutJob),
    ) -> Result<&LayoutJob, CatalogueError> {
        let j = self
            .jobs
            .get_mut(id)
            .ok_or_else(|| CatalogueError::NotFound(id.to_string()))?;
        if !j.state.can_become(to) {
            return Err(CatalogueError::Transition {
                id: id.to_string(),
                from: j.state,
                to,
            });
        }
        j.state = to;
        if to.is_terminal() {
            j.finished_at_ms = Some(now_ms());
            j.worker_pid = None;
        }
        edit(j);
        self.persist()?;
        Ok(&self.jobs[id])
    }

    pub fn set_worker_pid(&mut self, id: &str, pid: u32) -> Result<(), CatalogueError> {
        let j = self
            .jobs
            .get_mut(id)
            .ok_or_else(|| CatalogueError::NotFound(id.to_string()))?;
        j.worker_pid = Some(pid);
        self.persist()
    }
}

pub fn now_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::eval::{EvalProgress, EvalReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Running,
    Completed,
    Cancelled,
    Failed,
}

#[derive(Debug)]
pub struct Job {
    pub id: String,
    pub progress: EvalProgress,
    state: Mutex<JobState>,
}

#[derive(Debug)]
struct JobState {
    status: JobStatus,
    report: Option<EvalReport>,
    error: Option<String>,
}

/// What `GET /api/jobs/{id}` returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobView {
    pub id: String,
    pub status: JobStatus,
    pub done: usize,
    pub total: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<EvalReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Job {
    fn new() -> Self {
        Self {
            id: Uuid::new_v4().to_string(),
            progress: EvalProgress::new(),
            state: Mutex::new(JobState {
                status: JobStatus::Running,
                report: None,
                error: None,
            }),
        }
    }

    pub fn view(&self) -> JobView {
        let state = self.state.lock().unwrap();
        JobView {
            id: self.id.clone(),
            status: state.status,
            done: self.progress.done(),
            total: self.progress.total(),
            report: state.report.clone(),
            error: state.error.clone(),
        }
    }

    pub fn complete(&self, report: EvalReport) {
        let mut state = self.state.lock().unwrap();
        if state.status == JobStatus::Running {
            state.status = JobStatus::Completed;
            state.report = Some(report);
        }
    }

    pub fn fail(&self, error: String) {
        let mut state = self.state.lock().unwrap();
        if state.status == JobStatus::Running {
            state.status = JobStatus::Failed;
            state.error = Some(error);
        }
    }

    /// Cancel a running job. Returns false if it already finished.
    pub fn cancel(&self) -> bool {
        let mut state = self.state.lock().unwrap();
        if state.status != JobStatus::Running {
            return state.status == JobStatus::Cancelled;
        }
        self.progress.cancel();
        state.status = JobStatus::Cancelled;
        state.report = None;
        true
    }
}

#[derive(Debug, Default)]
pub struct JobRegistry {
    jobs: Mutex<HashMap<String, Arc<Job>>>,
}

impl JobRegistry {
    pub fn create(&self) -> Arc<Job> {
        let job = Arc::new(Job::new());
        self.jobs
            .lock()
            .unwrap()
            .insert(job.id.clone(), job.clone());
        job
    }

    pub fn get(&self, id: &str) -> Option<Arc<Job>> {
        self.jobs.lock().unwrap().get(id).cloned()
    }
}

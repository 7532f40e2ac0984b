use std::path::{Path, PathBuf};

use babble_core::{EpisodeLog, FeedbackCondition};
use serde::{Deserialize, Serialize};
use tokio::io::AsyncWriteExt;
use tokio::sync::Mutex;

pub const INDEX_FILE: &str = "index.jsonl";

/// One line of the append-only index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub status: EntryStatus,
    pub file: Option<String>,
    pub condition: FeedbackCondition,
    pub trials: usize,
    pub converged: bool,
    pub survey: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryStatus {
    Terminated,
    Survey,
    Expired,
}

/// Directory of episode logs plus an index file.
#[derive(Debug)]
pub struct Archive {
    dir: PathBuf,
    index: Mutex<()>,
}

impl Archive {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into(), index: Mutex::new(()) }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn log_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }

    pub async fn store(&self, log: &EpisodeLog, status: EntryStatus) -> std::io::Result<()> {
        let id = log.id.clone().unwrap_or_default();
        tokio::fs::create_dir_all(&self.dir).await?;
        let file = format!("{id}.json");
        tokio::fs::write(self.dir.join(&file), log.to_json()).await?;
        self.append(IndexEntry {
            id,
            status,
            file: Some(file),
            condition: log.condition(),
            trials: log.trials.len(),
            converged: log.converged,
            survey: log.survey.is_some(),
        })
        .await
    }

    pub async fn append(&self, entry: IndexEntry) -> std::io::Result<()> {
        let _guard = self.index.lock().await;
        tokio::fs::create_dir_all(&self.dir).await?;
        let mut line = serde_json::to_string(&entry).expect("index entry serializes");
        line.push('\n');
        let mut f = tokio::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.dir.join(INDEX_FILE))
            .await?;
        f.write_all(line.as_bytes()).await?;
        f.flush().await
    }

    pub async fn read_index(&self) -> std::io::Result<Vec<IndexEntry>> {
        let text = match tokio::fs::read_to_string(self.dir.join(INDEX_FILE)).await {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e),
        };
        text.lines()
            .map(|l| serde_json::from_str(l).map_err(std::io::Error::other))
            .collect()
    }
}

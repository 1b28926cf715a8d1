use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::record::{RunRecord, RunStatus};
use crate::error::{Error, Result};
use crate::federation::{AttributePlan, Checkpoint, ClientSummary, GlobalIndex, RoundMetrics, RunConfig, RunSetup};
use crate::representation::AttributeHistogram;

const CONFIG_FILE: &str = "config.toml";
const EVENTS_FILE: &str = "events.jsonl";
const METRICS_FILE: &str = "metrics.jsonl";
const SETUP_FILE: &str = "setup.json";
const FEATURES_FILE: &str = "features.fgck";
const CHECKPOINT_DIR: &str = "checkpoints";

/// One line of a run's event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Created { simulated: bool },
    Status { status: RunStatus, error: Option<String> },
    Registered { clients: Vec<ClientSummary> },
    Checkpoint { round: u64 },
}

#[derive(Serialize, Deserialize)]
struct StoredSetup {
    config_hash: [u8; 32],
    index: GlobalIndex,
    clients: Vec<ClientSummary>,
    plan: AttributePlan,
    histograms: Vec<AttributeHistogram>,
    reported_edges: usize,
    releases: usize,
}

/// Append-only directory of runs: configuration, event and metric logs,
/// and checkpoint files. Nothing is rewritten once written.
#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
}

fn append_line<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut line = serde_json::to_string(value)?;
    line.push('\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(line.as_bytes())?;
    Ok(())
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for line in BufReader::new(fs::File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Run ids become directory names, so only a safe alphabet is kept.
pub fn sanitize_id(raw: &str) -> String {
    let s: String =
        raw.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' }).collect();
    if s.is_empty() {
        "run".into()
    } else {
        s
    }
}

impl RunStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    /// A fresh id derived from the configured run id.
    pub fn allocate_id(&self, base: &str) -> Result<String> {
        let base = sanitize_id(base);
        for n in 1u32.. {
            let id = format!("{base}-{n:04}");
            if !self.dir(&id).exists() {
                return Ok(id);
            }
        }
        unreachable!("ids are unbounded")
    }

    pub fn create(&self, record: &RunRecord) -> Result<()> {
        let dir = self.dir(&record.id);
        if dir.exists() {
            return Err(Error::invalid(format!("run `{}` already exists", record.id)));
        }
        fs::create_dir_all(dir.join(CHECKPOINT_DIR))?;
        fs::write(dir.join(CONFIG_FILE), record.config.to_toml()?)?;
        self.append_event(&record.id, &Event::Created { simulated: record.simulated })
    }

    pub fn append_event(&self, id: &str, event: &Event) -> Result<()> {
        append_line(&self.dir(id).join(EVENTS_FILE), event)
    }

    pub fn append_metrics(&self, id: &str, metrics: &RoundMetrics) -> Result<()> {
        append_line(&self.dir(id).join(METRICS_FILE), metrics)
    }

    pub fn save_setup(&self, id: &str, setup: &RunSetup) -> Result<()> {
        let dir = self.dir(id);
        let stored = StoredSetup {
            config_hash: setup.config_hash,
            index: setup.index.clone(),
            clients: setup.clients.clone(),
            plan: setup.plan.clone(),
            histograms: setup.histograms.clone(),
            reported_edges: setup.reported_edges,
            releases: setup.releases,
        };
        Checkpoint::new(0, setup.config_hash, vec![setup.features.clone()])?.save(&dir.join(FEATURES_FILE))?;
        let tmp = dir.join(format!("{SETUP_FILE}.tmp"));
        fs::write(&tmp, serde_json::to_vec(&stored)?)?;
        fs::rename(tmp, dir.join(SETUP_FILE))?;
        Ok(())
    }

    pub fn load_setup(&self, id: &str) -> Result<Option<RunSetup>> {
        let dir = self.dir(id);
        let path = dir.join(SETUP_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let s: StoredSetup = serde_json::from_slice(&fs::read(path)?)?;
        let features = Checkpoint::load(&dir.join(FEATURES_FILE))?
            .tables
            .into_iter()
            .next()
            .ok_or_else(|| Error::Checkpoint("feature file holds no table".into()))?;
        Ok(Some(RunSetup {
            config_hash: s.config_hash,
            index: s.index,
            clients: s.clients,
            plan: s.plan,
            features,
            histograms: s.histograms,
            reported_edges: s.reported_edges,
            releases: s.releases,
        }))
    }

    pub fn checkpoint_path(&self, id: &str, round: u64) -> PathBuf {
        self.dir(id).join(CHECKPOINT_DIR).join(format!("{round:08}.fgck"))
    }

    pub fn save_checkpoint(&self, id: &str, checkpoint: &Checkpoint) -> Result<()> {
        checkpoint.save(&self.checkpoint_path(id, checkpoint.round))?;
        self.append_event(id, &Event::Checkpoint { round: checkpoint.round })
    }

    pub fn load_checkpoint(&self, id: &str, round: u64) -> Result<Checkpoint> {
        let path = self.checkpoint_path(id, round);
        if !path.exists() {
            return Err(Error::NotFound(format!("run `{id}` has no checkpoint for round {round}")));
        }
        Checkpoint::load(&path)
    }

    pub fn list(&self) -> Result<Vec<String>> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            if entry.path().join(CONFIG_FILE).exists() {
                ids.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Rebuild a record by replaying its logs.
    pub fn load_record(&self, id: &str) -> Result<RunRecord> {
        let dir = self.dir(id);
        let config_path = dir.join(CONFIG_FILE);
        if !config_path.exists() {
            return Err(Error::NotFound(format!("unknown run `{id}`")));
        }
        let config = RunConfig::from_toml(&fs::read_to_string(config_path)?)?;
        let mut record = RunRecord::new(id.to_string(), config, true);
        for event in read_lines::<Event>(&dir.join(EVENTS_FILE))? {
            match event {
                Event::Created { simulated } => record.simulated = simulated,
                Event::Status { status, error } => {
                    record.status = status;
                    record.error = error;
                }
                Event::Registered { clients } => record.clients = clients,
                Event::Checkpoint { round } => {
                    if record.checkpoints.last().is_none_or(|&r| r < round) {
                        record.checkpoints.push(round);
                    }
                }
            }
        }
        record.metrics = read_lines(&dir.join(METRICS_FILE))?;
        record.last_round = record.metrics.iter().map(|m| m.round).max().unwrap_or(0);
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_filesystem_safe() {
        assert_eq!(sanitize_id("../etc/x"), "---etc-x");
        assert_eq!(sanitize_id(""), "run");
    }

    #[test]
    fn record_replays_from_logs() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::open(dir.path()).unwrap();
        let id = store.allocate_id("demo").unwrap();
        let record = RunRecord::new(id.clone(), RunConfig::default(), false);
        store.create(&record).unwrap();
        store.append_event(&id, &Event::Status { status: RunStatus::Running, error: None }).unwrap();
        store.append_event(&id, &Event::Checkpoint { round: 0 }).unwrap();
        let loaded = store.load_record(&id).unwrap();
        assert_eq!(loaded.status, RunStatus::Running);
        assert_eq!(loaded.checkpoints, vec![0]);
        assert!(!loaded.simulated);
        assert_eq!(store.allocate_id("demo").unwrap(), "demo-0002");
        assert!(matches!(store.load_record("nope"), Err(Error::NotFound(_))));
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::federation::{ClientSummary, RoundMetrics, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Configured,
    Running,
    Paused,
    Stopped,
    Finished,
    Failed,
}

impl RunStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, RunStatus::Stopped | RunStatus::Finished | RunStatus::Failed)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Configured => "configured",
            RunStatus::Running => "running",
            RunStatus::Paused => "paused",
            RunStatus::Stopped => "stopped",
            RunStatus::Finished => "finished",
            RunStatus::Failed => "failed",
        }
    }

    pub fn can_become(self, to: RunStatus) -> bool {
        use RunStatus::*;
        matches!(
            (self, to),
            (Configured, Running)
                | (Configured, Failed)
                | (Running, Paused)
                | (Paused, Running)
                | (Running | Paused, Stopped | Finished | Failed)
        )
    }

    pub fn check(self, to: RunStatus) -> Result<()> {
        if self.can_become(to) {
            Ok(())
        } else {
            Err(Error::InvalidTransition { from: self.as_str().into(), to: to.as_str().into() })
        }
    }
}

/// A run as the service sees it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub id: String,
    pub config: RunConfig,
    pub status: RunStatus,
    /// Parties are simulated in process rather than connecting over TCP.
    pub simulated: bool,
    pub clients: Vec<ClientSummary>,
    /// Rounds with a checkpoint, increasing.
    pub checkpoints: Vec<u64>,
    pub metrics: Vec<RoundMetrics>,
    pub last_round: u64,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn new(id: String, config: RunConfig, simulated: bool) -> Self {
        Self {
            id,
            config,
            status: RunStatus::Configured,
            simulated,
            clients: Vec::new(),
            checkpoints: Vec::new(),
            metrics: Vec::new(),
            last_round: 0,
            error: None,
        }
    }

    pub fn latest_checkpoint(&self) -> Option<u64> {
        self.checkpoints.last().copied()
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            id: self.id.clone(),
            status: self.status,
            clients: self.config.clients,
            rounds: self.config.rounds * self.config.phases().len(),
            last_round: self.last_round,
            checkpoints: self.checkpoints.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub id: String,
    pub status: RunStatus,
    pub clients: usize,
    /// Total rounds over all phases.
    pub rounds: usize,
    pub last_round: u64,
    pub checkpoints: usize,
}

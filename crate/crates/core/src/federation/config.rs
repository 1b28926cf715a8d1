use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::embedding::{EmbeddingModelState, SkipGramConfig, WalkConfig};
use crate::error::{Error, Result};
use crate::graph::AttributeSchema;
use crate::privacy::PrivacyConfig;
use crate::representation::{FilterCondition, HistogramConfig, ReconstructionConfig};
use crate::seed;
use crate::synth::SbmConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Deepwalk,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub model: ModelKind,
    pub walk: WalkConfig,
    pub skipgram: SkipGramConfig,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.walk.validate()?;
        self.skipgram.validate()
    }
}

/// Which model a training phase updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Embedding,
    Structure,
}

impl Phase {
    fn label(self) -> &'static [u8] {
        match self {
            Phase::Embedding => b"embedding",
            Phase::Structure => b"structure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientSource {
    pub id: String,
    pub edges: PathBuf,
    pub nodes: Option<PathBuf>,
    /// Seed stream label; defaults to the client id. Parties given the same
    /// stream draw identical walks and negatives.
    pub stream: Option<String>,
}

/// Where the parties' data comes from when the coordinator simulates them.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub schema: Option<AttributeSchema>,
    pub clients: Vec<ClientSource>,
    pub synthetic: Option<SbmConfig>,
}

/// Everything that defines a run. The configuration document mirrors this
/// struct field for field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run_id: String,
    pub seed: u64,
    /// Number of parties (K).
    pub clients: usize,
    /// Rounds per training phase (T).
    pub rounds: usize,
    pub checkpoint_every: usize,
    /// Parties sampled per round; all of them when absent.
    pub clients_per_round: Option<usize>,
    /// Minibatches per local round; a full pass over the local pairs when
    /// absent.
    pub local_batches_per_round: Option<usize>,
    pub embedding: ModelConfig,
    /// Separate model trained for structure reconstruction. The embedding
    /// model is reused when absent.
    pub structure: Option<ModelConfig>,
    pub privacy: PrivacyConfig,
    pub histograms: HistogramConfig,
    pub filter: FilterCondition,
    pub reconstruction: ReconstructionConfig,
    pub data: DataConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            run_id: "run".into(),
            seed: 0,
            clients: 1,
            rounds: 300,
            checkpoint_every: 10,
            clients_per_round: None,
            local_batches_per_round: None,
            embedding: ModelConfig::default(),
            structure: None,
            privacy: PrivacyConfig::default(),
            histograms: HistogramConfig::default(),
            filter: FilterCondition::default(),
            reconstruction: ReconstructionConfig::default(),
            data: DataConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.run_id.is_empty() {
            return Err(Error::Config("run_id must be non-empty".into()));
        }
        if self.clients < 1 {
            return Err(Error::Config("at least one client is required".into()));
        }
        if self.rounds < 1 {
            return Err(Error::Config("at least one round is required".into()));
        }
        if self.checkpoint_every < 1 {
            return Err(Error::Config("checkpoint_every must be at least 1".into()));
        }
        if let Some(m) = self.clients_per_round {
            if m < 1 || m > self.clients {
                return Err(Error::Config(format!("clients_per_round must be in 1..={}", self.clients)));
            }
        }
        if self.local_batches_per_round == Some(0) {
            return Err(Error::Config("local_batches_per_round must be positive".into()));
        }
        self.embedding.validate()?;
        if let Some(s) = &self.structure {
            s.validate()?;
            if s.skipgram.dimension != self.embedding.skipgram.dimension {
                return Err(Error::Config("structure and embedding models must share a dimension".into()));
            }
        }
        self.privacy.validate()?;
        if self.histograms.bins == 0 {
            return Err(Error::Config("histogram bin count must be positive".into()));
        }
        if let Some(sbm) = &self.data.synthetic {
            sbm.validate()?;
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.embedding.skipgram.dimension
    }

    pub fn model(&self, phase: Phase) -> &ModelConfig {
        match phase {
            Phase::Embedding => &self.embedding,
            Phase::Structure => self.structure.as_ref().unwrap_or(&self.embedding),
        }
    }

    pub fn phases(&self) -> Vec<Phase> {
        if self.structure.is_some() {
            vec![Phase::Embedding, Phase::Structure]
        } else {
            vec![Phase::Embedding]
        }
    }

    /// Initial weights of a phase, identical on every party.
    pub fn initial_state(&self, phase: Phase, rows: usize) -> EmbeddingModelState {
        EmbeddingModelState::initialize(rows, self.dimension(), seed::derive(self.seed, &[b"initial", phase.label()]))
    }

    /// Seed of a party's local trainer for one phase.
    pub fn trainer_seed(&self, phase: Phase, stream: &str) -> u64 {
        seed::derive(self.seed, &[b"trainer", phase.label(), stream.as_bytes()])
    }

    pub fn projection_seed(&self) -> u64 {
        seed::derive(self.seed, &[b"projection"])
    }

    pub fn mask_seed(&self) -> u64 {
        seed::derive(self.seed, &[b"masks"])
    }
}

use std::collections::{BTreeMap, BTreeSet};
use std::sync::mpsc::{Receiver, TryRecvError};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::aggregate::federated_average;
use super::attributes::{decode_histograms, sensitive_spec, vector_len};
use super::checkpoint::{config_hash, Checkpoint};
use super::config::{Phase, RunConfig};
use super::index::GlobalIndex;
use super::protocol::{ClientUpdate, Control, Envelope, InitBundle, Message, Register, RoundMetrics, RowWeights};
use super::transport::{Incoming, ServerTransport};
use crate::embedding::{EmbeddingModelState, Table};
use crate::error::{Error, Result};
use crate::graph::{AttributeSchema, GlobalStats};
use crate::privacy::{pairwise_seeds, Mechanism, SecureAggregator};
use crate::representation::{
    assemble, merge_metric_ranges, plan_histograms, AssemblyInput, AttributeHistogram, FederatedRepresentation,
    FilterCondition, HistogramSpec,
};
use crate::seed;

/// Operator commands delivered to a running coordinator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Pause,
    Resume,
    EarlyStop,
    Abort,
}

/// Public facts about a registered party.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientSummary {
    pub id: String,
    pub ordinal: u32,
    pub nodes: usize,
    pub edges: u64,
}

/// Receives progress from the coordinator as it happens.
pub trait RunObserver: Send {
    fn on_registered(&mut self, _clients: &[ClientSummary]) {}
    fn on_metrics(&mut self, _metrics: &RoundMetrics) {}
    fn on_checkpoint(&mut self, _checkpoint: &Checkpoint) {}
    /// Called once the index, features and initial histograms are known.
    fn on_initialized(&mut self, _setup: &RunSetup) {}
    fn on_paused(&mut self, _reason: &str) {}
    fn on_resumed(&mut self) {}
}

pub struct NoopObserver;

impl RunObserver for NoopObserver {}

#[derive(Debug, Clone, Copy)]
pub struct CoordinatorOptions {
    /// Fail when nothing arrives from any party for this long.
    pub idle_timeout: Duration,
}

impl Default for CoordinatorOptions {
    fn default() -> Self {
        Self { idle_timeout: Duration::from_secs(600) }
    }
}

/// Histogram bins fixed at initialization, reused by later attribute
/// sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributePlan {
    pub schema: AttributeSchema,
    pub stats: GlobalStats,
    pub specs: Vec<HistogramSpec>,
    pub sensitive: Option<HistogramSpec>,
}

/// What initialization fixed for the rest of the run.
#[derive(Debug, Clone)]
pub struct RunSetup {
    pub config_hash: [u8; 32],
    pub index: GlobalIndex,
    pub clients: Vec<ClientSummary>,
    pub plan: AttributePlan,
    /// Projected attribute features, N x M.
    pub features: Table,
    pub histograms: Vec<AttributeHistogram>,
    /// Sum of the parties' reported edge counts.
    pub reported_edges: usize,
    /// Protected histogram releases so far.
    pub releases: usize,
}

impl RunSetup {
    /// Assemble the representation from one of the run's checkpoints.
    pub fn representation(&self, config: &RunConfig, checkpoint: &Checkpoint) -> Result<FederatedRepresentation> {
        let embedding = checkpoint.state(0)?;
        let structure = if checkpoint.tables.len() >= 4 { checkpoint.state(1)? } else { embedding.clone() };
        assemble(AssemblyInput {
            round: checkpoint.round,
            config_hash: checkpoint.config_hash,
            index: &self.index,
            basic: &embedding.input,
            features: &self.features,
            structure_table: &structure.input,
            histograms: self.histograms.clone(),
            reported_edges: self.reported_edges,
            reconstruction: &config.reconstruction,
            privacy: &config.privacy,
            releases: self.releases,
        })
    }
}

/// Everything a finished (or early-stopped) run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub setup: RunSetup,
    pub checkpoints: Vec<Checkpoint>,
    pub metrics: Vec<RoundMetrics>,
    pub last_round: u64,
    pub early_stopped: bool,
}

impl RunOutcome {
    pub fn final_checkpoint(&self) -> &Checkpoint {
        self.checkpoints.last().expect("a run always checkpoints round 0")
    }

    /// Embedding model weights at the end of the run.
    pub fn final_state(&self) -> EmbeddingModelState {
        self.final_checkpoint().state(0).expect("checkpoints hold the embedding model")
    }

    pub fn checkpoint(&self, round: u64) -> Option<&Checkpoint> {
        self.checkpoints.iter().find(|c| c.round == round)
    }

    pub fn representation(&self) -> Result<FederatedRepresentation> {
        self.representation_at(self.final_checkpoint())
    }

    pub fn representation_at(&self, checkpoint: &Checkpoint) -> Result<FederatedRepresentation> {
        self.setup.representation(&self.config, checkpoint)
    }
}

struct Party {
    id: String,
    rows: Vec<u32>,
    active: bool,
}

struct Coordinator<'a, T: ServerTransport> {
    cfg: RunConfig,
    transport: T,
    observer: &'a mut dyn RunObserver,
    control: Option<Receiver<Command>>,
    options: CoordinatorOptions,
    parties: Vec<Party>,
    paused: bool,
    stop_requested: bool,
}

/// Run the coordinator side of the protocol to completion.
///
/// Parties may register in any order; they are ranked by id. A party that
/// disconnects pauses the run until the operator resumes (the party is
/// dropped), stops early, or aborts. Without a control channel the run fails.
pub fn run_coordinator<T: ServerTransport>(
    cfg: RunConfig,
    transport: T,
    observer: &mut dyn RunObserver,
    control: Option<Receiver<Command>>,
    options: CoordinatorOptions,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut c = Coordinator {
        cfg,
        transport,
        observer,
        control,
        options,
        parties: Vec::new(),
        paused: false,
        stop_requested: false,
    };
    let result = c.run();
    // best effort: release parties still waiting
    for i in 0..c.parties.len() {
        if c.parties[i].active {
            let id = c.parties[i].id.clone();
            let _ = c.send(&id, 0, Message::Control(Control::Finish));
        }
    }
    result
}

impl<T: ServerTransport> Coordinator<'_, T> {
    fn run(&mut self) -> Result<RunOutcome> {
        let hash = config_hash(&self.cfg)?;
        let registrations = self.register()?;
        let (index, plan, clients, reported_edges) = self.initialize(&registrations)?;
        self.observer.on_registered(&clients);

        let features = self.collect_features(index.len())?;
        let histograms = self.attribute_session(0, &plan, &self.cfg.filter.clone())?;
        let releases = match self.cfg.privacy.mechanism {
            Mechanism::Laplace | Mechanism::Exponential => plan.specs.len(),
            _ => 0,
        };
        let setup =
            RunSetup { config_hash: hash, index, clients, plan, features, histograms, reported_edges, releases };
        self.observer.on_initialized(&setup);
        let n = setup.index.len();

        let phases = self.cfg.phases();
        let mut states: BTreeMap<Phase, EmbeddingModelState> =
            phases.iter().map(|&p| (p, self.cfg.initial_state(p, n))).collect();
        let mut checkpoints = Vec::new();
        let mut metrics = Vec::new();
        let mut emit =
            |round: u64, states: &BTreeMap<Phase, EmbeddingModelState>, observer: &mut dyn RunObserver| -> Result<()> {
                let ck = Checkpoint::of_states(round, hash, states.values())?;
                observer.on_checkpoint(&ck);
                checkpoints.push(ck);
                Ok(())
            };
        emit(0, &states, self.observer)?;

        let t = self.cfg.rounds as u64;
        let mut round = 0u64;
        let mut last_checkpoint = 0u64;
        'phases: for (p, &phase) in phases.iter().enumerate() {
            for local in 1..=t {
                self.between_rounds()?;
                if self.stop_requested {
                    break 'phases;
                }
                round = p as u64 * t + local;
                let state = states.get_mut(&phase).expect("state per phase");
                metrics.extend(self.round(phase, round, state)?);
                if round % self.cfg.checkpoint_every as u64 == 0 || local == t {
                    emit(round, &states, self.observer)?;
                    last_checkpoint = round;
                }
            }
        }
        let early_stopped = self.stop_requested;
        if round != last_checkpoint {
            emit(round, &states, self.observer)?;
        }
        for i in 0..self.parties.len() {
            if self.parties[i].active {
                let id = self.parties[i].id.clone();
                self.send(&id, round, Message::Control(Control::Finish))?;
                self.parties[i].active = false;
            }
        }
        Ok(RunOutcome { config: self.cfg.clone(), setup, checkpoints, metrics, last_round: round, early_stopped })
    }

    fn send(&mut self, client_id: &str, round: u64, body: Message) -> Result<()> {
        self.transport.send(
            client_id,
            Envelope { run_id: self.cfg.run_id.clone(), round, client_id: client_id.to_string(), body },
        )
    }

    fn ordinal(&self, client_id: &str) -> Result<usize> {
        self.parties
            .iter()
            .position(|p| p.id == client_id)
            .ok_or_else(|| Error::Protocol(format!("message from unknown client `{client_id}`")))
    }

    fn register(&mut self) -> Result<BTreeMap<String, Register>> {
        let mut regs = BTreeMap::new();
        let deadline = Instant::now() + self.options.idle_timeout;
        while regs.len() < self.cfg.clients {
            match self.transport.recv_timeout(Duration::from_millis(50))? {
                Some(Incoming::Message(env)) => match env.body {
                    Message::Register(r) => {
                        if regs.insert(env.client_id.clone(), r).is_some() {
                            return Err(Error::Protocol(format!("duplicate client registration `{}`", env.client_id)));
                        }
                    }
                    other => {
                        return Err(Error::Protocol(format!(
                            "`{}` from `{}` before registration completed",
                            other.kind(),
                            env.client_id
                        )))
                    }
                },
                Some(Incoming::Disconnected { client_id, reason }) => {
                    if regs.remove(&client_id).is_some() {
                        log::warn!("client `{client_id}` left during registration: {reason}");
                    }
                }
                None => {
                    self.poll_control()?;
                    if Instant::now() > deadline {
                        return Err(Error::Disconnected(format!(
                            "{} of {} clients registered before the timeout",
                            regs.len(),
                            self.cfg.clients
                        )));
                    }
                }
            }
        }
        Ok(regs)
    }

    fn initialize(
        &mut self,
        regs: &BTreeMap<String, Register>,
    ) -> Result<(GlobalIndex, AttributePlan, Vec<ClientSummary>, usize)> {
        let first = regs.values().next().expect("at least one client");
        let schema = first.schema.clone();
        for (id, r) in regs {
            if r.schema != schema {
                return Err(Error::Schema(format!("client `{id}` registered a different attribute schema")));
            }
        }
        let index = GlobalIndex::unify(regs.values().map(|r| r.node_ids.iter()))?;
        let local_stats: Vec<_> = regs.values().map(|r| r.stats.clone()).collect();
        let stats = GlobalStats::merge(&schema, &local_stats)?;
        let ranges = merge_metric_ranges(regs.values().map(|r| r.metric_ranges.as_slice()));
        self.cfg.filter.validate(&schema)?;
        let specs = plan_histograms(&schema, &stats, &ranges, &self.cfg.histograms)?;
        let sensitive = sensitive_spec(&schema, &stats, &self.cfg.privacy)?;
        let ordinals: Vec<u32> = (0..regs.len() as u32).collect();
        let mut seeds = pairwise_seeds(self.cfg.mask_seed(), &ordinals);

        let mut clients = Vec::new();
        for (ordinal, (id, r)) in regs.iter().enumerate() {
            let rows = index.rows_for(r.node_ids.iter())?;
            self.parties.push(Party { id: id.clone(), rows: rows.clone(), active: true });
            clients.push(ClientSummary {
                id: id.clone(),
                ordinal: ordinal as u32,
                nodes: r.node_ids.len(),
                edges: r.edge_count,
            });
            let bundle = InitBundle {
                ordinal: ordinal as u32,
                participants: ordinals.clone(),
                node_count: index.len() as u64,
                rows,
                config: self.cfg.clone(),
                stats: stats.clone(),
                histograms: specs.clone(),
                sensitive: sensitive.clone(),
                projection_seed: self.cfg.projection_seed(),
                mask_seeds: seeds.remove(&(ordinal as u32)).expect("seed per ordinal"),
            };
            self.send(id, 0, Message::Init(Box::new(bundle)))?;
        }
        let reported_edges = regs.values().map(|r| r.edge_count as usize).sum();
        Ok((index, AttributePlan { schema, stats, specs, sensitive }, clients, reported_edges))
    }

    /// Mean of the feature rows uploaded for each global row.
    fn collect_features(&mut self, n: usize) -> Result<Table> {
        let dim = self.cfg.dimension();
        let expected = self.active();
        let uploads = self.collect(&expected, 0, |m| matches!(m, Message::FeatureUpload { .. }))?;
        let mut sums = vec![vec![0.0f64; dim]; n];
        let mut counts = vec![0usize; n];
        for (_, msg) in uploads {
            let Message::FeatureUpload { rows } = msg else { unreachable!() };
            for r in rows {
                if r.row as usize >= n || r.values.len() != dim {
                    return Err(Error::Protocol(format!("bad feature row {}", r.row)));
                }
                for (s, v) in sums[r.row as usize].iter_mut().zip(&r.values) {
                    *s += v;
                }
                counts[r.row as usize] += 1;
            }
        }
        for (s, c) in sums.iter_mut().zip(&counts) {
            if *c > 1 {
                s.iter_mut().for_each(|v| *v /= *c as f64);
            }
        }
        Table::from_rows(dim, &sums)
    }

    /// Ask every party for protected, masked histograms and unmask the sum.
    fn attribute_session(
        &mut self,
        session: u64,
        plan: &AttributePlan,
        filter: &FilterCondition,
    ) -> Result<Vec<AttributeHistogram>> {
        let everyone: BTreeSet<usize> = (0..self.parties.len()).collect();
        if self.active() != everyone {
            return Err(Error::AggregationAborted("a client is missing; masks cannot cancel".into()));
        }
        for i in 0..self.parties.len() {
            let id = self.parties[i].id.clone();
            self.send(&id, 0, Message::Control(Control::CollectAttributes { session, filter: filter.clone() }))?;
        }
        let len = vector_len(&plan.specs);
        let mut agg = SecureAggregator::new((0..self.parties.len() as u32).collect::<Vec<_>>(), len);
        let uploads =
            self.collect(&everyone, 0, |m| matches!(m, Message::AttributeUpload { session: s, .. } if *s == session))?;
        for (ordinal, msg) in uploads {
            let Message::AttributeUpload { masked, .. } = msg else { unreachable!() };
            agg.submit(ordinal as u32, masked)?;
        }
        let sum = agg.finish()?;
        decode_histograms(&plan.specs, &sum, self.parties.len(), self.cfg.privacy.mechanism, filter)
    }

    fn active(&self) -> BTreeSet<usize> {
        (0..self.parties.len()).filter(|&i| self.parties[i].active).collect()
    }

    fn participants(&self, round: u64) -> Vec<usize> {
        let mut active: Vec<usize> = self.active().into_iter().collect();
        if let Some(m) = self.cfg.clients_per_round {
            if m < active.len() {
                active.shuffle(&mut seed::derive_rng(self.cfg.seed, &[b"participants", &round.to_le_bytes()]));
                active.truncate(m);
                active.sort_unstable();
            }
        }
        active
    }

    fn round(&mut self, phase: Phase, round: u64, state: &mut EmbeddingModelState) -> Result<Vec<RoundMetrics>> {
        let participants = self.participants(round);
        let started = Instant::now();
        for &i in &participants {
            let rows = &self.parties[i].rows;
            let pick = |table: &Table| -> Vec<RowWeights> {
                rows.iter().map(|&r| RowWeights { row: r, values: table.row(r as usize).to_vec() }).collect()
            };
            let body = Message::WeightsBroadcast { phase, input: pick(&state.input), output: pick(&state.output) };
            let id = self.parties[i].id.clone();
            self.send(&id, round, body)?;
        }
        let expected: BTreeSet<usize> = participants.iter().copied().collect();
        let mut durations = BTreeMap::new();
        let replies = self.collect_timed(
            &expected,
            round,
            &mut durations,
            started,
            |m| matches!(m, Message::ClientUpdate(u) if u.phase == phase),
        )?;
        let updates: Vec<(usize, ClientUpdate)> = replies
            .into_iter()
            .map(|(i, m)| match m {
                Message::ClientUpdate(u) => (i, u),
                _ => unreachable!(),
            })
            .collect();
        let named: Vec<(&str, &ClientUpdate)> =
            updates.iter().map(|(i, u)| (self.parties[*i].id.as_str(), u)).collect();
        if let Err(e) = federated_average(state, named) {
            log::warn!("round {round} aborted, weights unchanged: {e}");
        }
        let mut out = Vec::new();
        for (i, u) in &updates {
            let m = RoundMetrics {
                round,
                phase,
                client_id: self.parties[*i].id.clone(),
                loss: u.loss,
                samples: u.samples,
                accuracy: None,
                duration_ms: durations.get(i).copied().unwrap_or(0.0),
                skipped: u.failure.is_some() || u.samples == 0,
            };
            self.observer.on_metrics(&m);
            let id = m.client_id.clone();
            self.send(&id, round, Message::RoundMetrics(m.clone()))?;
            out.push(m);
        }
        Ok(out)
    }

    fn collect(
        &mut self,
        expected: &BTreeSet<usize>,
        round: u64,
        accept: impl Fn(&Message) -> bool,
    ) -> Result<BTreeMap<usize, Message>> {
        let mut durations = BTreeMap::new();
        self.collect_timed(expected, round, &mut durations, Instant::now(), accept)
    }

    /// Wait for one accepted message from each expected, still active party.
    fn collect_timed(
        &mut self,
        expected: &BTreeSet<usize>,
        round: u64,
        durations: &mut BTreeMap<usize, f64>,
        started: Instant,
        accept: impl Fn(&Message) -> bool,
    ) -> Result<BTreeMap<usize, Message>> {
        let mut got = BTreeMap::new();
        let mut last_activity = Instant::now();
        loop {
            let waiting = expected.iter().filter(|i| self.parties[**i].active && !got.contains_key(*i)).count();
            if waiting == 0 {
                return Ok(got);
            }
            match self.transport.recv_timeout(Duration::from_millis(50))? {
                Some(Incoming::Message(env)) => {
                    last_activity = Instant::now();
                    let i = self.ordinal(&env.client_id)?;
                    if let Message::Goodbye { reason } = env.body {
                        self.disconnected(i, &reason)?;
                        continue;
                    }
                    if !expected.contains(&i) || env.round != round || !accept(&env.body) {
                        return Err(Error::Protocol(format!(
                            "unexpected `{}` for round {} from `{}` while waiting on round {round}",
                            env.body.kind(),
                            env.round,
                            env.client_id
                        )));
                    }
                    if got.insert(i, env.body).is_some() {
                        return Err(Error::Protocol(format!("duplicate reply from `{}`", env.client_id)));
                    }
                    durations.insert(i, started.elapsed().as_secs_f64() * 1e3);
                }
                Some(Incoming::Disconnected { client_id, reason }) => {
                    let i = self.ordinal(&client_id)?;
                    self.disconnected(i, &reason)?;
                }
                None => {
                    self.poll_control()?;
                    if last_activity.elapsed() > self.options.idle_timeout {
                        return Err(Error::Disconnected(format!(
                            "no client message for {:?}",
                            self.options.idle_timeout
                        )));
                    }
                }
            }
        }
    }

    fn poll_control(&mut self) -> Result<()> {
        let Some(rx) = &self.control else { return Ok(()) };
        let mut pending = Vec::new();
        let closed = loop {
            match rx.try_recv() {
                Ok(cmd) => pending.push(cmd),
                Err(TryRecvError::Empty) => break false,
                Err(TryRecvError::Disconnected) => break true,
            }
        };
        if closed {
            self.control = None;
        }
        for cmd in pending {
            self.apply(cmd)?;
        }
        Ok(())
    }

    fn apply(&mut self, cmd: Command) -> Result<()> {
        match cmd {
            Command::Pause => {
                if !self.paused {
                    self.paused = true;
                    self.observer.on_paused("operator request");
                }
            }
            Command::Resume => {
                if self.paused {
                    self.paused = false;
                    self.observer.on_resumed();
                }
            }
            Command::EarlyStop => {
                self.stop_requested = true;
                self.paused = false;
            }
            Command::Abort => return Err(Error::Protocol("run aborted by operator".into())),
        }
        Ok(())
    }

    /// Block while paused; commands are only acted on between rounds.
    fn between_rounds(&mut self) -> Result<()> {
        self.poll_control()?;
        while self.paused && !self.stop_requested {
            let Some(rx) = &self.control else {
                return Err(Error::Protocol("paused without a control channel".into()));
            };
            let next = rx.recv_timeout(Duration::from_millis(100));
            match next {
                Ok(cmd) => self.apply(cmd)?,
                Err(std::sync::mpsc::RecvTimeoutError::Timeout) => {}
                Err(std::sync::mpsc::RecvTimeoutError::Disconnected) => {
                    return Err(Error::Protocol("control channel closed while paused".into()))
                }
            }
        }
        Ok(())
    }

    /// A party went away mid-run: pause and let the operator decide.
    fn disconnected(&mut self, i: usize, reason: &str) -> Result<()> {
        if !self.parties[i].active {
            return Ok(());
        }
        self.parties[i].active = false;
        let id = self.parties[i].id.clone();
        log::warn!("client `{id}` disconnected: {reason}");
        if self.control.is_none() {
            return Err(Error::Disconnected(format!("client `{id}`: {reason}")));
        }
        self.paused = true;
        self.observer.on_paused(&format!("client `{id}` disconnected"));
        self.between_rounds()?;
        if self.active().is_empty() {
            return Err(Error::Disconnected("every client has left".into()));
        }
        Ok(())
    }
}

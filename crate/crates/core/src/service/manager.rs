use std::collections::{BTreeMap, HashMap};
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::mpsc::{self, Sender};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use super::hub::{MetricsHub, Subscription};
use super::query::{Component, ComponentPayload, EmbeddingOptions, QueryContext, SelectionQuery};
use super::record::{RunRecord, RunStatus, RunSummary};
use super::store::{Event, RunStore};
use crate::error::{Error, Result};
use crate::federation::{
    load_parties, run_coordinator, simulate, Checkpoint, ClientData, ClientSummary, Command, CoordinatorOptions,
    RoundMetrics, RunConfig, RunObserver, RunOutcome, RunSetup, TcpServer,
};
use crate::representation::FederatedRepresentation;

#[derive(Debug, Clone)]
pub struct ManagerOptions {
    /// Data paths in run configurations are relative to this directory.
    pub data_dir: PathBuf,
    /// Where non-simulated runs wait for their parties.
    pub coordinator_addr: String,
    /// How long a non-simulated run waits for every party to connect.
    pub accept_timeout: Duration,
}

impl Default for ManagerOptions {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("."),
            coordinator_addr: "127.0.0.1:7878".into(),
            accept_timeout: Duration::from_secs(600),
        }
    }
}

#[derive(Default)]
struct SlotState {
    control: Option<Sender<Command>>,
    worker: Option<JoinHandle<()>>,
    setup: Option<Arc<RunSetup>>,
    parties: Option<Arc<Vec<ClientData>>>,
    representations: HashMap<u64, Arc<FederatedRepresentation>>,
}

struct Slot {
    record: Mutex<RunRecord>,
    state: Mutex<SlotState>,
    hub: MetricsHub,
}

impl Slot {
    fn record(&self) -> MutexGuard<'_, RunRecord> {
        self.record.lock().expect("record lock")
    }

    fn state(&self) -> MutexGuard<'_, SlotState> {
        self.state.lock().expect("slot lock")
    }
}

/// Owns every run of one service: lifecycle, persistence, metric streams and
/// representation queries. Runs execute on their own threads.
pub struct RunManager {
    store: RunStore,
    options: ManagerOptions,
    slots: Mutex<BTreeMap<String, Arc<Slot>>>,
}

impl RunManager {
    /// Open a store, reloading the runs already in it. Runs that were live
    /// when the previous service stopped are marked failed.
    pub fn open(store: RunStore, options: ManagerOptions) -> Result<Self> {
        let mut slots = BTreeMap::new();
        for id in store.list()? {
            let mut record = store.load_record(&id)?;
            if !record.status.is_terminal() && record.status != RunStatus::Configured {
                let error = Some("service restarted while the run was live".to_string());
                store.append_event(&id, &Event::Status { status: RunStatus::Failed, error: error.clone() })?;
                record.status = RunStatus::Failed;
                record.error = error;
            }
            let terminal = record.status.is_terminal().then_some(record.status);
            let hub = MetricsHub::with_history(record.metrics.clone(), terminal);
            let setup = store.load_setup(&id)?.map(Arc::new);
            let slot =
                Slot { record: Mutex::new(record), state: Mutex::new(SlotState { setup, ..Default::default() }), hub };
            slots.insert(id, Arc::new(slot));
        }
        Ok(Self { store, options, slots: Mutex::new(slots) })
    }

    pub fn store(&self) -> &RunStore {
        &self.store
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>> {
        self.slots
            .lock()
            .expect("slots lock")
            .get(id)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("unknown run `{id}`")))
    }

    pub fn create(&self, config: RunConfig, simulated: bool) -> Result<String> {
        config.validate()?;
        let mut slots = self.slots.lock().expect("slots lock");
        let id = self.store.allocate_id(&config.run_id)?;
        let record = RunRecord::new(id.clone(), config, simulated);
        self.store.create(&record)?;
        let slot = Slot { record: Mutex::new(record), state: Mutex::default(), hub: MetricsHub::new() };
        slots.insert(id.clone(), Arc::new(slot));
        Ok(id)
    }

    pub fn create_from_toml(&self, text: &str, simulated: bool) -> Result<String> {
        self.create(RunConfig::from_toml(text)?, simulated)
    }

    pub fn get(&self, id: &str) -> Result<RunRecord> {
        Ok(self.slot(id)?.record().clone())
    }

    pub fn list(&self) -> Vec<RunSummary> {
        let slots: Vec<_> = self.slots.lock().expect("slots lock").values().cloned().collect();
        slots.iter().map(|s| s.record().summary()).collect()
    }

    pub fn subscribe(&self, id: &str) -> Result<Subscription> {
        Ok(self.slot(id)?.hub.subscribe())
    }

    fn set_status(&self, id: &str, record: &mut RunRecord, to: RunStatus) -> Result<()> {
        record.status.check(to)?;
        self.store.append_event(id, &Event::Status { status: to, error: None })?;
        record.status = to;
        Ok(())
    }

    pub fn start(&self, id: &str) -> Result<()> {
        let slot = self.slot(id)?;
        let mut record = slot.record();
        record.status.check(RunStatus::Running)?;
        let config = record.config.clone();
        let simulated = record.simulated;
        let (tx, rx) = mpsc::channel();
        let observer = ServiceObserver { id: id.to_string(), store: self.store.clone(), slot: slot.clone() };
        let worker = if simulated {
            let parties = Arc::new(load_parties(&config, &self.options.data_dir)?);
            slot.state().parties = Some(parties.clone());
            let cfg = config.clone();
            thread::Builder::new().name(format!("run-{id}")).spawn(move || {
                let mut observer = observer;
                let result = simulate(cfg, &parties, &mut observer, Some(rx), None);
                observer.finish(result);
            })?
        } else {
            let listener = TcpListener::bind(&self.options.coordinator_addr)?;
            let timeout = self.options.accept_timeout;
            let cfg = config.clone();
            thread::Builder::new().name(format!("run-{id}")).spawn(move || {
                let mut observer = observer;
                let result = TcpServer::accept(&listener, cfg.clients, Some(timeout)).and_then(|server| {
                    run_coordinator(cfg, server, &mut observer, Some(rx), CoordinatorOptions::default())
                });
                observer.finish(result);
            })?
        };
        self.set_status(id, &mut record, RunStatus::Running)?;
        let mut state = slot.state();
        state.control = Some(tx);
        state.worker = Some(worker);
        Ok(())
    }

    /// Deliver an operator command to a live run. Only `Running` and `Paused`
    /// runs take commands, so a configured run cannot be resumed into life.
    fn command(&self, id: &str, to: RunStatus, cmd: Command) -> Result<()> {
        let slot = self.slot(id)?;
        let mut record = slot.record();
        if !matches!(record.status, RunStatus::Running | RunStatus::Paused) {
            return Err(Error::InvalidTransition { from: record.status.as_str().into(), to: to.as_str().into() });
        }
        record.status.check(to)?;
        if let Some(tx) = &slot.state().control {
            // the worker may have just finished; its own status wins then
            let _ = tx.send(cmd);
        }
        self.set_status(id, &mut record, to)
    }

    pub fn pause(&self, id: &str) -> Result<()> {
        self.command(id, RunStatus::Paused, Command::Pause)
    }

    pub fn resume(&self, id: &str) -> Result<()> {
        self.command(id, RunStatus::Running, Command::Resume)
    }

    /// Stop training; the final representation comes from the latest
    /// checkpoint written before the stop took effect.
    pub fn early_stop(&self, id: &str) -> Result<()> {
        self.command(id, RunStatus::Stopped, Command::EarlyStop)
    }

    /// Block until the run's worker thread has exited.
    pub fn wait(&self, id: &str) -> Result<RunRecord> {
        let slot = self.slot(id)?;
        let worker = slot.state().worker.take();
        if let Some(w) = worker {
            w.join().map_err(|_| Error::Protocol(format!("run `{id}` worker panicked")))?;
        }
        let record = slot.record().clone();
        Ok(record)
    }

    pub fn checkpoint_bytes(&self, id: &str, round: u64) -> Result<Vec<u8>> {
        let slot = self.slot(id)?;
        if !slot.record().checkpoints.contains(&round) {
            return Err(Error::NotFound(format!("run `{id}` has no checkpoint for round {round}")));
        }
        Ok(std::fs::read(self.store.checkpoint_path(id, round))?)
    }

    fn parties(&self, slot: &Slot) -> Result<Option<Arc<Vec<ClientData>>>> {
        let (simulated, config) = {
            let r = slot.record();
            (r.simulated, r.config.clone())
        };
        if !simulated {
            return Ok(None);
        }
        let mut state = slot.state();
        if state.parties.is_none() {
            state.parties = Some(Arc::new(load_parties(&config, &self.options.data_dir)?));
        }
        Ok(state.parties.clone())
    }

    /// The assembled representation at a checkpoint (the latest when
    /// `round` is `None`).
    pub fn representation(&self, id: &str, round: Option<u64>) -> Result<Arc<FederatedRepresentation>> {
        let slot = self.slot(id)?;
        let (config, round) = {
            let r = slot.record();
            let round = match round {
                Some(round) if r.checkpoints.contains(&round) => round,
                Some(round) => return Err(Error::NotFound(format!("run `{id}` has no checkpoint for round {round}"))),
                None => r
                    .latest_checkpoint()
                    .ok_or_else(|| Error::NotFound(format!("run `{id}` has no checkpoints yet")))?,
            };
            (r.config.clone(), round)
        };
        let setup = {
            let state = slot.state();
            if let Some(rep) = state.representations.get(&round) {
                return Ok(rep.clone());
            }
            state.setup.clone()
        };
        let setup = setup.ok_or_else(|| Error::NotFound(format!("run `{id}` is not initialized")))?;
        let checkpoint = self.store.load_checkpoint(id, round)?;
        let rep = Arc::new(setup.representation(&config, &checkpoint)?);
        slot.state().representations.insert(round, rep.clone());
        Ok(rep)
    }

    pub fn query(
        &self,
        id: &str,
        round: Option<u64>,
        component: Component,
        selection: &SelectionQuery,
        options: &EmbeddingOptions,
    ) -> Result<ComponentPayload> {
        let rep = self.representation(id, round)?;
        let slot = self.slot(id)?;
        let config = slot.record().config.clone();
        let setup =
            slot.state().setup.clone().ok_or_else(|| Error::NotFound(format!("run `{id}` is not initialized")))?;
        let parties = if selection.predicates.is_empty() { None } else { self.parties(&slot)? };
        let ctx = QueryContext { config: &config, setup: &setup, parties: parties.as_deref().map(Vec::as_slice) };
        ctx.query(&rep, component, selection, options)
    }
}

/// Mirrors coordinator progress into the record, the store and the hub.
struct ServiceObserver {
    id: String,
    store: RunStore,
    slot: Arc<Slot>,
}

impl ServiceObserver {
    fn persist(&self, what: &str, result: Result<()>) {
        if let Err(e) = result {
            log::error!("run `{}`: cannot persist {what}: {e}", self.id);
        }
    }

    /// Status changes requested by the coordinator itself; the operator may
    /// already have moved the run there.
    fn transition(&self, to: RunStatus, error: Option<String>) {
        let mut record = self.slot.record();
        if record.status == to || !record.status.can_become(to) {
            return;
        }
        self.persist("status", self.store.append_event(&self.id, &Event::Status { status: to, error: error.clone() }));
        record.status = to;
        record.error = error;
    }

    fn finish(self, result: Result<RunOutcome>) {
        match result {
            Ok(outcome) => {
                let to = if outcome.early_stopped { RunStatus::Stopped } else { RunStatus::Finished };
                self.transition(to, None);
            }
            Err(e) => {
                log::warn!("run `{}` failed: {e}", self.id);
                self.transition(RunStatus::Failed, Some(e.to_string()));
            }
        }
        let status = self.slot.record().status;
        self.slot.state().control = None;
        self.slot.hub.close(status);
    }
}

impl RunObserver for ServiceObserver {
    fn on_registered(&mut self, clients: &[ClientSummary]) {
        self.slot.record().clients = clients.to_vec();
        self.persist(
            "registration",
            self.store.append_event(&self.id, &Event::Registered { clients: clients.to_vec() }),
        );
    }

    fn on_metrics(&mut self, metrics: &RoundMetrics) {
        {
            let mut record = self.slot.record();
            record.metrics.push(metrics.clone());
            record.last_round = record.last_round.max(metrics.round);
        }
        self.persist("metrics", self.store.append_metrics(&self.id, metrics));
        self.slot.hub.publish(metrics.clone());
    }

    fn on_checkpoint(&mut self, checkpoint: &Checkpoint) {
        // the file lands before the round is listed, so readers never see a
        // checkpoint they cannot load
        self.persist("checkpoint", self.store.save_checkpoint(&self.id, checkpoint));
        let mut record = self.slot.record();
        if record.checkpoints.last().is_none_or(|&r| r < checkpoint.round) {
            record.checkpoints.push(checkpoint.round);
        }
    }

    fn on_initialized(&mut self, setup: &RunSetup) {
        self.persist("setup", self.store.save_setup(&self.id, setup));
        self.slot.state().setup = Some(Arc::new(setup.clone()));
    }

    fn on_paused(&mut self, reason: &str) {
        log::info!("run `{}` paused: {reason}", self.id);
        self.transition(RunStatus::Paused, None);
    }

    fn on_resumed(&mut self) {
        self.transition(RunStatus::Running, None);
    }
}

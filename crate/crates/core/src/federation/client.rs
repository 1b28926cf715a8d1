use std::collections::BTreeMap;

use super::attributes::{encode_upload, privacy_rng, protected_counts};
use super::config::Phase;
use super::protocol::{ClientUpdate, Control, Envelope, InitBundle, Message, Register, RowVector, RowWeights};
use super::transport::ClientTransport;
use crate::embedding::{EmbeddingModel, EmbeddingModelState, FeatureLayout, LocalTrainer, RandomProjection, Table};
use crate::error::{Error, Result};
use crate::graph::{local_attribute_stats, LocalGraph, TopologyMetricKind};
use crate::representation::{local_metric_ranges, LocalView};

/// One party's private data.
#[derive(Debug, Clone)]
pub struct ClientData {
    pub id: String,
    pub graph: LocalGraph,
    /// Seed stream label; the client id when absent.
    pub stream: Option<String>,
}

impl ClientData {
    pub fn new(id: impl Into<String>, graph: LocalGraph) -> Self {
        Self { id: id.into(), graph, stream: None }
    }

    pub fn stream(&self) -> &str {
        self.stream.as_deref().unwrap_or(&self.id)
    }

    /// The registration message: public ids and aggregate statistics only.
    pub fn register(&self) -> Result<Register> {
        let mut view = LocalView::new(&self.graph);
        Ok(Register {
            node_ids: self.graph.node_ids().to_vec(),
            schema: self.graph.schema().clone(),
            stats: local_attribute_stats(&self.graph, self.graph.schema())?,
            metric_ranges: local_metric_ranges(&mut view, &TopologyMetricKind::ALL),
            edge_count: self.graph.edge_count() as u64,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClientReport {
    pub rounds: usize,
    pub attribute_sessions: usize,
}

struct Session<'a> {
    data: &'a ClientData,
    init: InitBundle,
    run_id: String,
    trainers: BTreeMap<Phase, LocalTrainer>,
    states: BTreeMap<Phase, EmbeddingModelState>,
    report: ClientReport,
}

/// Run the party side of the protocol until the coordinator says finish.
/// On a local error the party says goodbye before returning it.
pub fn run_client<T: ClientTransport>(data: &ClientData, transport: &mut T) -> Result<ClientReport> {
    match drive(data, transport) {
        Ok(report) => Ok(report),
        Err(e) => {
            let _ = transport.send(Envelope {
                run_id: String::new(),
                round: 0,
                client_id: data.id.clone(),
                body: Message::Goodbye { reason: e.to_string() },
            });
            Err(e)
        }
    }
}

fn drive<T: ClientTransport>(data: &ClientData, transport: &mut T) -> Result<ClientReport> {
    transport.send(Envelope {
        run_id: String::new(),
        round: 0,
        client_id: data.id.clone(),
        body: Message::Register(data.register()?),
    })?;
    let first = transport.recv()?;
    let Message::Init(init) = first.body else {
        return Err(Error::Protocol(format!("expected init, got `{}`", first.body.kind())));
    };
    if init.rows.len() != data.graph.node_count() {
        return Err(Error::Protocol("init row map does not cover the local nodes".into()));
    }
    let mut session = Session {
        data,
        init: *init,
        run_id: first.run_id,
        trainers: BTreeMap::new(),
        states: BTreeMap::new(),
        report: ClientReport::default(),
    };
    transport.send(session.envelope(0, Message::FeatureUpload { rows: session.features()? }))?;

    loop {
        let env = transport.recv()?;
        let round = env.round;
        match env.body {
            Message::WeightsBroadcast { phase, input, output } => {
                let update = match session.train(phase, &input, &output) {
                    Ok(update) => update,
                    Err(e @ Error::NonFinite(_)) => {
                        log::warn!("client `{}` round {round}: {e}", data.id);
                        ClientUpdate::failed(phase, e.to_string())
                    }
                    Err(e) => return Err(e),
                };
                session.report.rounds += 1;
                transport.send(session.envelope(round, Message::ClientUpdate(update)))?;
            }
            Message::Control(Control::CollectAttributes { session: id, filter }) => {
                let run = &session.init.config;
                let mut rng = privacy_rng(run, data.stream(), id);
                let counts = protected_counts(
                    &data.graph,
                    &session.init.histograms,
                    session.init.sensitive.as_ref(),
                    &filter,
                    &run.privacy,
                    &mut rng,
                )?;
                let masked = encode_upload(&counts, &session.init.mask_seeds, id);
                session.report.attribute_sessions += 1;
                transport.send(session.envelope(round, Message::AttributeUpload { session: id, masked }))?;
            }
            Message::Control(Control::Finish) => return Ok(session.report),
            Message::Control(other) => log::info!("client `{}`: coordinator sent {other:?}", data.id),
            Message::RoundMetrics(m) => log::debug!("client `{}` round {} loss {:.5}", data.id, m.round, m.loss),
            other => return Err(Error::Protocol(format!("unexpected `{}` from coordinator", other.kind()))),
        }
    }
}

impl Session<'_> {
    fn envelope(&self, round: u64, body: Message) -> Envelope {
        Envelope { run_id: self.run_id.clone(), round, client_id: self.data.id.clone(), body }
    }

    /// Attribute feature vectors projected to the embedding dimension.
    fn features(&self) -> Result<Vec<RowVector>> {
        let graph = &self.data.graph;
        let layout = FeatureLayout::new(graph.schema(), &self.init.stats)?;
        let projection = RandomProjection::new(layout.len(), self.init.config.dimension(), self.init.projection_seed);
        (0..graph.node_count())
            .map(|v| {
                let features = layout.feature_vector(graph.attributes(v))?;
                Ok(RowVector { row: self.init.rows[v], values: projection.project(&features.values)? })
            })
            .collect()
    }

    fn train(&mut self, phase: Phase, input: &[RowWeights], output: &[RowWeights]) -> Result<ClientUpdate> {
        let run = &self.init.config;
        let rows = self.init.node_count as usize;
        let dim = run.dimension();
        if !self.trainers.contains_key(&phase) {
            let model = run.model(phase);
            let trainer = LocalTrainer::on_rows(
                &self.data.graph,
                &self.init.rows,
                &model.walk,
                model.skipgram.clone(),
                run.trainer_seed(phase, self.data.stream()),
                run.local_batches_per_round,
            )?;
            self.trainers.insert(phase, trainer);
        }
        let state = self
            .states
            .entry(phase)
            .or_insert_with(|| EmbeddingModelState { input: Table::zeros(rows, dim), output: Table::zeros(rows, dim) });
        for (table, received) in [(&mut state.input, input), (&mut state.output, output)] {
            for r in received {
                if r.row as usize >= rows || r.values.len() != dim {
                    return Err(Error::Protocol(format!("bad weights for row {}", r.row)));
                }
                table.row_mut(r.row as usize).copy_from_slice(&r.values);
            }
        }
        let trainer = self.trainers.get_mut(&phase).expect("inserted above");
        let stats = trainer.train_round(state)?;
        Ok(ClientUpdate {
            phase,
            samples: trainer.sample_count() as u64,
            loss: stats.loss,
            input: deltas(&state.input, input),
            output: deltas(&state.output, output),
            failure: None,
        })
    }
}

/// `W - W_init` over the received rows that changed, computed exactly in f64.
fn deltas(table: &Table, before: &[RowWeights]) -> Vec<RowVector> {
    before
        .iter()
        .filter_map(|r| {
            let now = table.row(r.row as usize);
            if now.iter().zip(&r.values).all(|(a, b)| a.to_bits() == b.to_bits()) {
                return None;
            }
            Some(RowVector {
                row: r.row,
                values: now.iter().zip(&r.values).map(|(a, b)| f64::from(*a) - f64::from(*b)).collect(),
            })
        })
        .collect()
}

use std::sync::mpsc;

use fedgraph::embedding::{EmbeddingModel, LocalTrainer, SkipGramConfig, WalkConfig};
use fedgraph::federation::{
    audit_transcript, simulate, ClientData, Command, GlobalIndex, ModelConfig, NoopObserver, Phase, RunConfig,
    RunObserver, Transcript,
};
use fedgraph::graph::LocalGraph;
use fedgraph::synth::{sbm, synthetic_parties, SbmConfig};

fn small_config(clients: usize, rounds: usize) -> RunConfig {
    RunConfig {
        clients,
        rounds,
        checkpoint_every: 5,
        embedding: ModelConfig {
            walk: WalkConfig { walks_per_node: 4, walk_length: 10, seed: 3 },
            skipgram: SkipGramConfig { dimension: 8, window: 3, batch_size: 32, ..Default::default() },
            ..Default::default()
        },
        local_batches_per_round: Some(4),
        ..Default::default()
    }
}

fn graph(nodes: usize) -> LocalGraph {
    sbm(&SbmConfig { nodes, ..Default::default() }).unwrap().0
}

#[test]
fn single_client_matches_local_sgd_bitwise() {
    let cfg = small_config(1, 6);
    let g = graph(60);
    let party = ClientData::new("solo", g.clone());
    let outcome = simulate(cfg.clone(), std::slice::from_ref(&party), &mut NoopObserver, None, None).unwrap();

    let index = GlobalIndex::unify([g.node_ids().iter()]).unwrap();
    let rows = index.rows_for(g.node_ids().iter()).unwrap();
    let m = cfg.model(Phase::Embedding);
    let mut trainer = LocalTrainer::on_rows(
        &g,
        &rows,
        &m.walk,
        m.skipgram.clone(),
        cfg.trainer_seed(Phase::Embedding, "solo"),
        cfg.local_batches_per_round,
    )
    .unwrap();
    let mut state = cfg.initial_state(Phase::Embedding, index.len());
    for _ in 0..cfg.rounds {
        trainer.train_round(&mut state).unwrap();
    }
    let fed = outcome.final_state();
    let bits = |t: &fedgraph::embedding::Table| t.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&fed.input), bits(&state.input));
    assert_eq!(bits(&fed.output), bits(&state.output));
}

#[test]
fn one_round_gives_two_checkpoints() {
    let cfg = small_config(1, 1);
    let party = ClientData::new("a", graph(30));
    let outcome = simulate(cfg, &[party], &mut NoopObserver, None, None).unwrap();
    let rounds: Vec<u64> = outcome.checkpoints.iter().map(|c| c.round).collect();
    assert_eq!(rounds, vec![0, 1]);
    assert_eq!(outcome.metrics.len(), 1);
}

#[test]
fn replicated_parties_follow_single_party() {
    let g = graph(50);
    let solo = {
        let mut p = ClientData::new("p0", g.clone());
        p.stream = Some("shared".into());
        p
    };
    let one = simulate(small_config(1, 4), std::slice::from_ref(&solo), &mut NoopObserver, None, None).unwrap();
    let parties: Vec<ClientData> =
        (0..4).map(|k| ClientData { id: format!("p{k}"), graph: g.clone(), stream: Some("shared".into()) }).collect();
    let four = simulate(small_config(4, 4), &parties, &mut NoopObserver, None, None).unwrap();
    for (a, b) in one.checkpoints.iter().zip(&four.checkpoints) {
        for (x, y) in a.tables.iter().zip(&b.tables) {
            let diff = x.as_slice().iter().zip(y.as_slice()).map(|(p, q)| (p - q).abs()).fold(0f32, f32::max);
            assert!(diff <= 1e-6, "round {}: {diff}", a.round);
        }
    }
}

#[test]
fn transcript_of_full_run_passes_audit() {
    let data = synthetic_parties(&SbmConfig { nodes: 80, ..Default::default() }, 3).unwrap();
    let parties: Vec<ClientData> = data.parties.into_iter().map(|(id, g)| ClientData::new(id, g)).collect();
    let transcript = Transcript::new();
    let outcome = simulate(small_config(3, 2), &parties, &mut NoopObserver, None, Some(transcript.clone())).unwrap();
    let report = audit_transcript(&transcript.messages());
    assert!(report.messages > 3 * 4);
    assert!(report.is_clean(), "{:?}", report.violations);
    assert!(!outcome.setup.histograms.is_empty());
}

#[test]
fn mismatched_schema_fails_the_run() {
    let data = synthetic_parties(&SbmConfig { nodes: 60, ..Default::default() }, 2).unwrap();
    let mut parties: Vec<ClientData> = data.parties.into_iter().map(|(id, g)| ClientData::new(id, g)).collect();
    parties[1].graph = LocalGraph::unattributed(&["x", "y"], [("x", "y")]).unwrap();
    assert!(simulate(small_config(2, 3), &parties, &mut NoopObserver, None, None).is_err());
}

struct Stopper {
    tx: mpsc::Sender<Command>,
    at: u64,
}

impl RunObserver for Stopper {
    fn on_metrics(&mut self, m: &fedgraph::federation::RoundMetrics) {
        if m.round == self.at {
            self.tx.send(Command::EarlyStop).unwrap();
        }
    }
}

#[test]
fn early_stop_assembles_from_the_stop_round() {
    let (tx, rx) = mpsc::channel();
    let mut stopper = Stopper { tx, at: 5 };
    let party = ClientData::new("a", graph(40));
    let outcome = simulate(small_config(1, 300), &[party], &mut stopper, Some(rx), None).unwrap();
    assert!(outcome.early_stopped);
    assert_eq!(outcome.last_round, 5);
    assert_eq!(outcome.representation().unwrap().round, 5);
}

struct Flaky {
    inner: fedgraph::federation::InProcessClient,
    sends_left: usize,
}

impl fedgraph::federation::ClientTransport for Flaky {
    fn send(&mut self, envelope: fedgraph::federation::Envelope) -> fedgraph::Result<()> {
        if self.sends_left == 0 {
            return Err(fedgraph::Error::Disconnected("link lost".into()));
        }
        self.sends_left -= 1;
        self.inner.send(envelope)
    }

    fn recv(&mut self) -> fedgraph::Result<fedgraph::federation::Envelope> {
        self.inner.recv()
    }
}

struct AutoResume {
    tx: mpsc::Sender<Command>,
    pauses: usize,
}

impl RunObserver for AutoResume {
    fn on_paused(&mut self, _reason: &str) {
        self.pauses += 1;
        self.tx.send(Command::Resume).unwrap();
    }
}

#[test]
fn disconnect_pauses_and_resume_drops_the_client() {
    use fedgraph::federation::{run_client, run_coordinator, CoordinatorOptions, InProcessServer};
    let data = synthetic_parties(&SbmConfig { nodes: 60, ..Default::default() }, 2).unwrap();
    let parties: Vec<ClientData> = data.parties.into_iter().map(|(id, g)| ClientData::new(id, g)).collect();
    let server = InProcessServer::new();
    let steady = server.connect(&parties[0].id);
    // register, features, attributes, two updates, then the link fails
    let flaky = Flaky { inner: server.connect(&parties[1].id), sends_left: 5 };
    let (tx, rx) = mpsc::channel();
    let mut observer = AutoResume { tx, pauses: 0 };
    let outcome = std::thread::scope(|s| {
        let (p0, p1) = (&parties[0], &parties[1]);
        s.spawn(move || {
            let mut t = steady;
            run_client(p0, &mut t)
        });
        s.spawn(move || {
            let mut t = flaky;
            run_client(p1, &mut t)
        });
        run_coordinator(small_config(2, 6), server, &mut observer, Some(rx), CoordinatorOptions::default())
    })
    .unwrap();
    assert_eq!(observer.pauses, 1);
    let rounds = |id: &str| outcome.metrics.iter().filter(|m| m.client_id == id).map(|m| m.round).collect::<Vec<_>>();
    assert_eq!(rounds(&parties[0].id), (1..=6).collect::<Vec<_>>());
    assert_eq!(rounds(&parties[1].id), vec![1, 2]);
}

#[test]
fn disconnect_without_control_fails() {
    use fedgraph::federation::{run_client, run_coordinator, CoordinatorOptions, InProcessServer};
    let data = synthetic_parties(&SbmConfig { nodes: 60, ..Default::default() }, 2).unwrap();
    let parties: Vec<ClientData> = data.parties.into_iter().map(|(id, g)| ClientData::new(id, g)).collect();
    let server = InProcessServer::new();
    let steady = server.connect(&parties[0].id);
    let flaky = Flaky { inner: server.connect(&parties[1].id), sends_left: 4 };
    let result = std::thread::scope(|s| {
        let (p0, p1) = (&parties[0], &parties[1]);
        s.spawn(move || {
            let mut t = steady;
            run_client(p0, &mut t)
        });
        s.spawn(move || {
            let mut t = flaky;
            run_client(p1, &mut t)
        });
        run_coordinator(small_config(2, 6), server, &mut NoopObserver, None, CoordinatorOptions::default())
    });
    assert!(matches!(result, Err(fedgraph::Error::Disconnected(_))), "{result:?}");
}

#[test]
fn reconstruction_stays_inside_communities_without_copying_the_union() {
    let data = synthetic_parties(&SbmConfig { nodes: 200, seed: 3, ..Default::default() }, 3).unwrap();
    let parties: Vec<ClientData> = data.parties.iter().map(|(id, g)| ClientData::new(id.clone(), g.clone())).collect();
    let mut cfg = small_config(3, 20);
    cfg.local_batches_per_round = Some(100);
    let rep = simulate(cfg, &parties, &mut NoopObserver, None, None).unwrap().representation().unwrap();
    let block = |row: u32| data.labels[data.graph.index_of(rep.node_ids[row as usize].as_str()).unwrap()];
    let inside = rep.structure.iter().filter(|&&(a, b)| block(a) == block(b)).count();
    assert!(inside as f64 >= 0.9 * rep.structure.len() as f64, "{inside} of {}", rep.structure.len());

    let union: std::collections::BTreeSet<(String, String)> = data
        .graph
        .edges()
        .into_iter()
        .map(|(a, b)| {
            let (a, b) = (data.graph.node_ids()[a].as_str(), data.graph.node_ids()[b].as_str());
            (a.min(b).to_string(), a.max(b).to_string())
        })
        .collect();
    let rebuilt: std::collections::BTreeSet<(String, String)> = rep
        .structure
        .iter()
        .map(|&(a, b)| {
            let (a, b) = (rep.node_ids[a as usize].as_str(), rep.node_ids[b as usize].as_str());
            (a.min(b).to_string(), a.max(b).to_string())
        })
        .collect();
    assert_ne!(rebuilt, union);
}

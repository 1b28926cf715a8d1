use std::collections::BTreeSet;
use std::path::Path;
use std::sync::mpsc::Receiver;
use std::thread;

use super::attributes::{decode_histograms, encode_upload, privacy_rng, protected_counts, vector_len};
use super::client::{run_client, ClientData};
use super::config::RunConfig;
use super::coordinator::{run_coordinator, AttributePlan, Command, CoordinatorOptions, RunObserver, RunOutcome};
use super::index::GlobalIndex;
use super::transport::{InProcessServer, Transcript};
use crate::error::{Error, Result};
use crate::graph::{load_graph, load_graph_files, AttributeSchema};
use crate::privacy::{pairwise_seeds, SecureAggregator};
use crate::representation::{AttributeHistogram, FilterCondition, LocalView};
use crate::synth::synthetic_parties;

/// Run the coordinator on this thread and every party on its own thread,
/// connected by in-process channels.
pub fn simulate(
    cfg: RunConfig,
    parties: &[ClientData],
    observer: &mut dyn RunObserver,
    control: Option<Receiver<Command>>,
    transcript: Option<Transcript>,
) -> Result<RunOutcome> {
    if parties.len() != cfg.clients {
        return Err(Error::Config(format!("{} parties given for a run of {} clients", parties.len(), cfg.clients)));
    }
    let mut server = InProcessServer::new();
    if let Some(t) = transcript {
        server = server.with_transcript(t);
    }
    let transports: Vec<_> = parties.iter().map(|p| server.connect(&p.id)).collect();
    thread::scope(|s| {
        let handles: Vec<_> = parties
            .iter()
            .zip(transports)
            .map(|(party, mut transport)| {
                s.spawn(move || {
                    let result = run_client(party, &mut transport);
                    if let Err(e) = &result {
                        log::warn!("client `{}` stopped: {e}", party.id);
                    }
                    result
                })
            })
            .collect();
        let outcome = run_coordinator(cfg, server, observer, control, CoordinatorOptions::default());
        for h in handles {
            // coordinator errors take precedence; client errors are logged
            let _ = h.join();
        }
        outcome
    })
}

/// The parties a configuration describes: files under `base`, or a
/// synthetic split.
pub fn load_parties(cfg: &RunConfig, base: &Path) -> Result<Vec<ClientData>> {
    if let Some(sbm) = &cfg.data.synthetic {
        let data = synthetic_parties(sbm, cfg.clients)?;
        return Ok(data.parties.into_iter().map(|(id, g)| ClientData::new(id, g)).collect());
    }
    if cfg.data.clients.len() != cfg.clients {
        return Err(Error::Config(format!(
            "data lists {} client sources for a run of {} clients",
            cfg.data.clients.len(),
            cfg.clients
        )));
    }
    let schema = cfg.data.schema.clone().unwrap_or_else(AttributeSchema::empty);
    cfg.data
        .clients
        .iter()
        .map(|src| {
            let edges = base.join(&src.edges);
            let (graph, report) = match &src.nodes {
                Some(nodes) => load_graph_files(&edges, &base.join(nodes), &schema)?,
                None => {
                    let text = std::fs::read_to_string(&edges)?;
                    load_graph(&text, &implied_nodes(&text, &schema)?, &schema)?
                }
            };
            if report.dropped() > 0 {
                log::info!(
                    "client `{}`: dropped {} self-loops and {} duplicate edges",
                    src.id,
                    report.self_loops_dropped,
                    report.duplicates_dropped
                );
            }
            Ok(ClientData { id: src.id.clone(), graph, stream: src.stream.clone() })
        })
        .collect()
}

/// A node table listing every edge endpoint with all attributes missing.
fn implied_nodes(edges: &str, schema: &AttributeSchema) -> Result<String> {
    let mut ids = BTreeSet::new();
    for line in edges.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        for f in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()) {
            ids.insert(f.to_string());
        }
    }
    let mut out = String::from("id");
    for a in schema.entries() {
        out.push(',');
        out.push_str(&a.name);
    }
    out.push('\n');
    let blanks = ",".repeat(schema.len());
    for id in ids {
        out.push_str(&id);
        out.push_str(&blanks);
        out.push('\n');
    }
    Ok(out)
}

/// One more attribute session run directly against in-process parties, as
/// the coordinator would: protect, mask, sum, unmask, average.
pub fn attribute_session(
    cfg: &RunConfig,
    plan: &AttributePlan,
    parties: &[ClientData],
    filter: &FilterCondition,
    session: u64,
) -> Result<Vec<AttributeHistogram>> {
    let mut sorted: Vec<&ClientData> = parties.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let ordinals: Vec<u32> = (0..sorted.len() as u32).collect();
    let mut seeds = pairwise_seeds(cfg.mask_seed(), &ordinals);
    let mut agg = SecureAggregator::new(ordinals.clone(), vector_len(&plan.specs));
    for (o, party) in sorted.iter().enumerate() {
        let mut rng = privacy_rng(cfg, party.stream(), session);
        let counts =
            protected_counts(&party.graph, &plan.specs, plan.sensitive.as_ref(), filter, &cfg.privacy, &mut rng)?;
        let seeds = seeds.remove(&(o as u32)).expect("seed per ordinal");
        agg.submit(o as u32, encode_upload(&counts, &seeds, session))?;
    }
    decode_histograms(&plan.specs, &agg.finish()?, sorted.len(), cfg.privacy.mechanism, filter)
}

/// Global rows of the parties' nodes that pass `filter`.
pub fn select_rows(parties: &[ClientData], index: &GlobalIndex, filter: &FilterCondition) -> Result<BTreeSet<u32>> {
    let mut rows = BTreeSet::new();
    for party in parties {
        let mut view = LocalView::new(&party.graph);
        let ids = party.graph.node_ids();
        for v in view.select(filter)? {
            rows.insert(index.rows_for([&ids[v]])?[0]);
        }
    }
    Ok(rows)
}

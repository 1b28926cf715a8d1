use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use fedgraph::analysis::{eval_classification, eval_link_auc, eval_precision_at_l, EvaluationConfig, EvaluationReport};
use fedgraph::embedding::{SkipGramConfig, WalkConfig};
use fedgraph::error::{Error, Result};
use fedgraph::federation::{
    load_parties, run_client, run_coordinator, simulate, ClientSource, CoordinatorOptions, DataConfig, ModelConfig,
    NoopObserver, RunConfig, RunOutcome, TcpClient, TcpServer,
};
use fedgraph::graph::AttrValue;
use fedgraph::representation::FederatedRepresentation;
use fedgraph::service::{self, ManagerOptions, RunManager, RunStore};
use fedgraph::synth::{synthetic_parties, synthetic_schema, SbmConfig};

#[derive(Parser)]
#[command(name = "fedgraph", version, about = "Federated graph representations")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a run end to end and export its representation.
    Run(RunArgs),
    /// Evaluate an exported representation against labels and held-out edges.
    Eval(EvalArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Connect one party to a coordinator.
    Client(ClientArgs),
    /// Write a synthetic block-model dataset split across parties.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Base for relative data paths; defaults to the config's directory.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Wait for parties over TCP on this address instead of simulating them.
    #[arg(long)]
    listen: Option<String>,
    /// Seconds to wait for every party to connect.
    #[arg(long, default_value_t = 600)]
    accept_timeout: u64,
}

#[derive(Args)]
struct EvalArgs {
    /// Export directory written by `run`.
    #[arg(long)]
    representation: PathBuf,
    /// CSV of `id,label`.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Edges to predict, one `a,b` pair per line.
    #[arg(long)]
    held_out: Option<PathBuf>,
    /// Edges known at training time; excluded from negatives and rankings.
    #[arg(long)]
    training: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    precision_l: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = service::BIND_ENV, default_value = service::DEFAULT_BIND)]
    bind: String,
    /// Directory holding run records.
    #[arg(long, default_value = "runs")]
    store: PathBuf,
    #[arg(long, default_value = ".")]
    data_dir: PathBuf,
    /// Where non-simulated runs accept their parties.
    #[arg(long, default_value = "127.0.0.1:7878")]
    coordinator: String,
}

#[derive(Args)]
struct ClientArgs {
    #[arg(long)]
    connect: String,
    /// Run configuration shared with the coordinator.
    #[arg(long)]
    config: PathBuf,
    /// Which of the configured parties this process is.
    #[arg(long)]
    party: String,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Seconds to keep retrying the connection.
    #[arg(long, default_value_t = 30)]
    patience: u64,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 400)]
    nodes: usize,
    #[arg(long, default_value_t = 2)]
    blocks: usize,
    #[arg(long, default_value_t = 3)]
    parties: usize,
    #[arg(long, default_value_t = 0.2)]
    shared: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rounds per phase in the written configuration.
    #[arg(long, default_value_t = 20)]
    rounds: usize,
}

fn config_base(config: &Path, data_dir: Option<PathBuf>) -> PathBuf {
    data_dir.unwrap_or_else(|| config.parent().map(Path::to_path_buf).unwrap_or_default())
}

fn read_config(path: &Path) -> Result<RunConfig> {
    RunConfig::from_toml(&fs::read_to_string(path)?)
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let cfg = read_config(&args.config)?;
    let outcome: RunOutcome = match &args.listen {
        Some(addr) => {
            let listener = TcpListener::bind(addr)?;
            log::info!("waiting for {} parties on {}", cfg.clients, listener.local_addr()?);
            let server = TcpServer::accept(&listener, cfg.clients, Some(Duration::from_secs(args.accept_timeout)))?;
            run_coordinator(cfg, server, &mut NoopObserver, None, CoordinatorOptions::default())?
        }
        None => {
            let parties = load_parties(&cfg, &config_base(&args.config, args.data_dir))?;
            simulate(cfg, &parties, &mut NoopObserver, None, None)?
        }
    };
    let rep = outcome.representation()?;
    rep.export(&args.out)?;
    outcome.final_checkpoint().save(&args.out.join("weights.fgck"))?;
    let summary = json!({
        "round": rep.round,
        "nodes": rep.node_ids.len(),
        "edges": rep.structure.len(),
        "checkpoints": outcome.checkpoints.iter().map(|c| c.round).collect::<Vec<_>>(),
        "early_stopped": outcome.early_stopped,
        "privacy": rep.privacy,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn read_pairs(path: &Path, rows: &HashMap<&str, usize>) -> Result<Vec<(usize, usize)>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let ids: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        let [a, b] = ids[..] else {
            return Err(Error::Malformed { line: n + 1, reason: "expected two ids".into() });
        };
        // pairs touching nodes outside the representation cannot be scored
        if let (Some(&a), Some(&b)) = (rows.get(a), rows.get(b)) {
            if a != b {
                out.push((a, b));
            }
        }
    }
    Ok(out)
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let rep = FederatedRepresentation::load(&args.representation)?;
    let x = rep.embedding.to_f64_rows();
    let rows: HashMap<&str, usize> = rep.node_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let config = EvaluationConfig {
        precision_l: args.precision_l,
        probe: fedgraph::analysis::ProbeConfig { seed: args.seed, ..Default::default() },
        ..Default::default()
    };
    let mut report = EvaluationReport { accuracy: None, link_auc: None, precision_at_l: None, config: config.clone() };

    if let Some(path) = &args.labels {
        let mut reader = csv::Reader::from_path(path)?;
        let mut classes = BTreeMap::new();
        let mut picked = Vec::new();
        for record in reader.records() {
            let record = record?;
            let (Some(id), Some(label)) = (record.get(0), record.get(1)) else { continue };
            if let Some(&r) = rows.get(id) {
                let next = classes.len();
                let class = *classes.entry(label.to_string()).or_insert(next);
                picked.push((r, class));
            }
        }
        let xs: Vec<Vec<f64>> = picked.iter().map(|&(r, _)| x[r].clone()).collect();
        let ys: Vec<usize> = picked.iter().map(|&(_, c)| c).collect();
        report.accuracy = Some(eval_classification(&xs, &ys, &config.probe)?);
    }
    if let Some(path) = &args.held_out {
        let held_out = read_pairs(path, &rows)?;
        let training = match &args.training {
            Some(t) => read_pairs(t, &rows)?,
            None => Vec::new(),
        };
        report.link_auc = Some(eval_link_auc(&x, &held_out, &training, config.auc_pairs, args.seed)?);
        report.precision_at_l = Some(eval_precision_at_l(&x, &training, &held_out, config.precision_l)?);
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_serve(args: ServeArgs) -> Result<()> {
    let options = ManagerOptions { data_dir: args.data_dir, coordinator_addr: args.coordinator, ..Default::default() };
    let manager = Arc::new(RunManager::open(RunStore::open(args.store)?, options)?);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(service::serve(manager, &args.bind))
}

fn cmd_client(args: ClientArgs) -> Result<()> {
    let cfg = read_config(&args.config)?;
    let parties = load_parties(&cfg, &config_base(&args.config, args.data_dir))?;
    let party = parties
        .iter()
        .find(|p| p.id == args.party)
        .ok_or_else(|| Error::Config(format!("party `{}` is not in the configuration", args.party)))?;
    let mut transport = TcpClient::connect(args.connect.as_str(), Duration::from_secs(args.patience))?;
    let report = run_client(party, &mut transport)?;
    println!(
        "{}",
        json!({ "party": party.id, "rounds": report.rounds, "attribute_sessions": report.attribute_sessions })
    );
    Ok(())
}

fn cell(v: &AttrValue) -> String {
    match v {
        AttrValue::Missing => String::new(),
        AttrValue::Numeric(x) => x.to_string(),
        AttrValue::Category(s) | AttrValue::Text(s) => s.clone(),
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let sbm = SbmConfig {
        nodes: args.nodes,
        blocks: args.blocks,
        shared_fraction: args.shared,
        seed: args.seed,
        ..Default::default()
    };
    let data = synthetic_parties(&sbm, args.parties)?;
    fs::create_dir_all(&args.out)?;
    let schema = synthetic_schema();
    let mut sources = Vec::new();
    for (id, g) in &data.parties {
        let ids = g.node_ids();
        let edges: String = g.edges().iter().map(|&(a, b)| format!("{},{}\n", ids[a], ids[b])).collect();
        fs::write(args.out.join(format!("{id}.edges")), edges)?;
        let mut w = csv::Writer::from_path(args.out.join(format!("{id}.nodes.csv")))?;
        let header: Vec<&str> = std::iter::once("id").chain(schema.entries().iter().map(|a| a.name.as_str())).collect();
        w.write_record(&header)?;
        for v in 0..g.node_count() {
            let row: Vec<String> =
                std::iter::once(ids[v].to_string()).chain(g.attributes(v).iter().map(cell)).collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        sources.push(ClientSource {
            id: id.clone(),
            edges: format!("{id}.edges").into(),
            nodes: Some(format!("{id}.nodes.csv").into()),
            stream: None,
        });
    }
    let mut labels = csv::Writer::from_path(args.out.join("labels.csv"))?;
    labels.write_record(["id", "label"])?;
    let ids = data.graph.node_ids();
    for (v, block) in data.labels.iter().enumerate() {
        labels.write_record([ids[v].to_string(), block.to_string()])?;
    }
    labels.flush()?;
    let union: String = data.graph.edges().iter().map(|&(a, b)| format!("{},{}\n", ids[a], ids[b])).collect();
    fs::write(args.out.join("union.edges"), union)?;

    let cfg = RunConfig {
        run_id: "synthetic".into(),
        seed: args.seed,
        clients: args.parties,
        rounds: args.rounds,
        checkpoint_every: 5,
        local_batches_per_round: Some(20),
        embedding: ModelConfig {
            walk: WalkConfig { walks_per_node: 10, walk_length: 20, seed: args.seed },
            skipgram: SkipGramConfig { dimension: 32, window: 5, ..Default::default() },
            ..Default::default()
        },
        data: DataConfig { schema: Some(schema), clients: sources, synthetic: None },
        ..Default::default()
    };
    fs::write(args.out.join("run.toml"), cfg.to_toml()?)?;
    println!("{}", json!({ "out": args.out, "nodes": data.graph.node_count(), "edges": data.graph.edge_count() }));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Serve(a) => cmd_serve(a),
        Cmd::Client(a) => cmd_client(a),
        Cmd::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

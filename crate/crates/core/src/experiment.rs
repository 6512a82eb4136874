//! Train / bench / report orchestration and the on-disk formats.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::{
    accuracies_from_trace, build_btgfl_streams, evaluate, format_table, read_summary_csv, read_trace_csv, summarize,
    write_summary_csv, write_trace_csv, BenchmarkStream, ShiftSet, StreamAccuracy, StreamTag, SummaryRow, TraceRecord,
};
use crate::config::ExperimentConfig;
use crate::error::{BtflError, Result};
use crate::fedsim::{generate_client_data, run_federation, Federation};
use crate::method::MethodSpec;
use crate::rng::SeedStream;

pub const STATE_FORMAT: u32 = 1;
pub const STATE_FILE: &str = "state.json";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TABLE_FILE: &str = "summary.txt";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything `bench` needs from `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentState {
    pub format: u32,
    pub config: ExperimentConfig,
    pub federation: Federation,
}

impl ExperimentState {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| BtflError::MissingInput(format!("state file {}: {e}", path.display())))?;
        let state: Self = serde_json::from_str(&text)?;
        if state.format != STATE_FORMAT {
            return Err(BtflError::Parse(format!(
                "state format {} is not supported (expected {STATE_FORMAT})",
                state.format
            )));
        }
        if state.federation.clients.is_empty() {
            return Err(BtflError::MissingInput("state file has no clients".into()));
        }
        Ok(state)
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| BtflError::config("workers", e.to_string()))
}

pub fn train(config: &ExperimentConfig) -> Result<ExperimentState> {
    config.validate()?;
    let federation = pool(config.bench.workers)?.install(|| {
        run_federation(&config.task, &config.federation, &config.training, config.seed)
    })?;
    Ok(ExperimentState {
        format: STATE_FORMAT,
        config: config.clone(),
        federation,
    })
}

/// Per-client accuracies of both heads on the training split and on a
/// fresh IND sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientTrainSummary {
    pub client_id: usize,
    pub personal_train: f64,
    pub global_train: f64,
    pub personal_ind: f64,
    pub global_ind: f64,
}

pub fn train_summary(state: &ExperimentState) -> Result<Vec<ClientTrainSummary>> {
    let fed = &state.federation;
    let probe = SeedStream::new(state.config.seed).named("ind_probe");
    fed.clients
        .iter()
        .map(|c| {
            let (f, y) = generate_client_data(
                &fed.task,
                &c.class_distribution,
                500.max(fed.task.n_classes),
                probe.indexed(c.client_id as u64).seed(),
            )?;
            Ok(ClientTrainSummary {
                client_id: c.client_id,
                personal_train: c.personal_head.accuracy(&c.train_features, &c.train_labels),
                global_train: c.global_head.accuracy(&c.train_features, &c.train_labels),
                personal_ind: c.personal_head.accuracy(&f, &y),
                global_ind: c.global_head.accuracy(&f, &y),
            })
        })
        .collect()
}

pub fn format_train_summary(rows: &[ClientTrainSummary]) -> String {
    let mut s = format!(
        "{:>6}  {:>14}  {:>12}  {:>12}  {:>10}\n",
        "client", "personal_train", "global_train", "personal_ind", "global_ind"
    );
    for r in rows {
        s.push_str(&format!(
            "{:>6}  {:>14.2}  {:>12.2}  {:>12.2}  {:>10.2}\n",
            r.client_id,
            100.0 * r.personal_train,
            100.0 * r.global_train,
            100.0 * r.personal_ind,
            100.0 * r.global_ind
        ));
    }
    s
}

/// Output of a benchmark run, in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutcome {
    pub methods: Vec<String>,
    pub n_clients: usize,
    pub summary: Vec<SummaryRow>,
    pub cells: Vec<StreamAccuracy>,
    /// Per method, sorted by (client, stream, sample).
    pub traces: BTreeMap<String, Vec<TraceRecord>>,
}

/// Streams for every client, indexed `[client][tag]`.
pub fn build_all_streams(state: &ExperimentState, config: &ExperimentConfig) -> Result<Vec<Vec<BenchmarkStream>>> {
    let fed = &state.federation;
    let seeds = SeedStream::new(config.seed).named("bench");
    let shifts = ShiftSet::generate(&fed.task, &config.bench, seeds.named("shifts").seed());
    fed.clients
        .par_iter()
        .map(|c| build_btgfl_streams(c, &fed.task, &shifts, config.bench.n_per_stream, seeds.named("streams").seed()))
        .collect()
}

/// Evaluates every configured method on every client's five streams.
/// `config` supplies the methods, adapter, and benchmark settings; the
/// federation comes from `state`.
pub fn run_bench(state: &ExperimentState, config: &ExperimentConfig) -> Result<BenchOutcome> {
    config.validate()?;
    let fed = &state.federation;
    if fed.clients.is_empty() {
        return Err(BtflError::MissingInput("state file has no clients".into()));
    }
    pool(config.bench.workers)?.install(|| {
        let streams = build_all_streams(state, config)?;
        let adapter_cfg = config.adapter.to_adapter_config();
        let methods: Vec<MethodSpec> = config.methods.clone();
        let jobs: Vec<(usize, usize, usize)> = (0..methods.len())
            .flat_map(|m| (0..fed.clients.len()).flat_map(move |c| (0..StreamTag::ALL.len()).map(move |t| (m, c, t))))
            .collect();
        let results = jobs
            .par_iter()
            .map(|&(m, c, t)| {
                let client = &fed.clients[c];
                let mut method = methods[m].instantiate(client, &adapter_cfg, &config.fedthe)?;
                evaluate(method.as_mut(), client, &streams[c][t])
            })
            .collect::<Result<Vec<_>>>()?;

        let names: Vec<String> = methods.iter().map(ToString::to_string).collect();
        let mut traces: BTreeMap<String, Vec<TraceRecord>> = BTreeMap::new();
        let mut cells = Vec::with_capacity(jobs.len());
        for (&(m, c, t), r) in jobs.iter().zip(results) {
            cells.push(StreamAccuracy {
                method: names[m].clone(),
                client_id: fed.clients[c].client_id,
                tag: StreamTag::ALL[t],
                accuracy: r.accuracy,
            });
            traces.entry(names[m].clone()).or_default().extend(r.records);
        }
        let summary = summarize(&names, fed.clients.len(), &cells)?;
        Ok(BenchOutcome {
            methods: names,
            n_clients: fed.clients.len(),
            summary,
            cells,
            traces,
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub methods: Vec<String>,
    pub n_clients: usize,
    /// Method name to trace file name.
    pub traces: BTreeMap<String, String>,
}

/// `fixed_mix(0.5)` becomes `trace_fixed_mix_0.5.csv`.
pub fn trace_file_name(method: &str) -> String {
    let clean: String = method
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '_' { c } else { '_' })
        .collect();
    format!("trace_{}.csv", clean.trim_end_matches('_'))
}

pub fn write_bench_outputs(outcome: &BenchOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut manifest = Manifest {
        methods: outcome.methods.clone(),
        n_clients: outcome.n_clients,
        traces: BTreeMap::new(),
    };
    for (method, records) in &outcome.traces {
        let name = trace_file_name(method);
        write_trace_csv(records, BufWriter::new(fs::File::create(dir.join(&name))?))?;
        manifest.traces.insert(method.clone(), name);
    }
    write_summary_csv(&outcome.summary, fs::File::create(dir.join(SUMMARY_FILE))?)?;
    fs::write(dir.join(TABLE_FILE), format_table(&outcome.summary))?;
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

/// Rebuilds the summary from the trace files in `dir` and checks it against
/// `summary.csv` when present.
pub fn report(dir: &Path) -> Result<Vec<SummaryRow>> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path)
        .map_err(|e| BtflError::MissingInput(format!("{}: {e}", manifest_path.display())))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let mut cells = Vec::new();
    for method in &manifest.methods {
        let file = manifest
            .traces
            .get(method)
            .ok_or_else(|| BtflError::IncompleteGrid(format!("no trace listed for method {method}")))?;
        let path: PathBuf = dir.join(file);
        let f = fs::File::open(&path).map_err(|e| BtflError::MissingInput(format!("{}: {e}", path.display())))?;
        cells.extend(accuracies_from_trace(method, &read_trace_csv(f)?));
    }
    let rows = summarize(&manifest.methods, manifest.n_clients, &cells)?;
    if let Ok(f) = fs::File::open(dir.join(SUMMARY_FILE)) {
        let stored = read_summary_csv(f)?;
        let consistent = stored.len() == rows.len()
            && stored.iter().zip(&rows).all(|(a, b)| {
                a.method == b.method
                    && a.columns.iter().zip(&b.columns).all(|(x, y)| (x - y).abs() < 1e-6)
            });
        if !consistent {
            log::warn!("summary.csv disagrees with the trace files; reporting the traces");
        }
    }
    Ok(rows)
}

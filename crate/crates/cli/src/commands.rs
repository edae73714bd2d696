//! The five subcommands. Each takes a resolved config and writes its outputs
//! under `out_dir`; nothing here draws random numbers except `synth`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cocoa_core::estimators::{RecordScorer, ScoreSettings};
use cocoa_core::evaluation::{self, PrrReport, ScoredInstance};
use cocoa_core::record::{read_all, write_records};
use cocoa_core::similarity::{ProviderClient, SimilarityCache};
use cocoa_core::{EstimatorId, EstimatorResult, GenerationRecord, SimilarityBackend, SimilarityContext, TargetStrategy};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::Resolved;
use crate::error::RunError;
use crate::synth::{self, SynthConfig};

/// Estimator name → PRR report, or why it is undefined.
pub type Reports = BTreeMap<String, Result<PrrReport, cocoa_core::Error>>;

pub fn scores_path(out_dir: &Path, dataset: &str) -> PathBuf {
    out_dir.join(format!("{dataset}.scores.jsonl"))
}

fn create_dir(dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|e| RunError::io(format!("cannot create {}", dir.display()), e))
}

fn create_file(path: &Path) -> Result<BufWriter<File>, RunError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| RunError::io(format!("cannot create {}", path.display()), e))
}

fn load_dataset(name: &str, path: &Path) -> Result<Vec<GenerationRecord>, RunError> {
    read_all(path).map_err(|e| RunError::data(format!("dataset `{name}` ({})", path.display()), e))
}

fn load_datasets(cfg: &Resolved) -> Result<BTreeMap<String, Vec<GenerationRecord>>, RunError> {
    if cfg.datasets.is_empty() {
        return Err(RunError::Config("no datasets configured".into()));
    }
    cfg.datasets.iter().map(|(name, path)| Ok((name.clone(), load_dataset(name, path)?))).collect()
}

/// Provider client plus the file its cache persists to.
struct Provider {
    client: ProviderClient,
    cache_path: Option<PathBuf>,
}

impl Provider {
    fn open(cfg: &Resolved) -> Result<Option<Self>, RunError> {
        let Some(endpoint) = &cfg.endpoint else { return Ok(None) };
        let cache = match &cfg.cache {
            Some(path) => SimilarityCache::load(path)
                .map_err(|e| RunError::data(format!("similarity cache {}", path.display()), e))?,
            None => SimilarityCache::new(),
        };
        let client = ProviderClient::http(endpoint, Arc::new(cache), cfg.provider.clone())
            .map_err(|e| RunError::Config(format!("endpoint `{endpoint}`: {e}")))?;
        Ok(Some(Self { client, cache_path: cfg.cache.clone() }))
    }

    fn save(&self) -> Result<(), RunError> {
        if let Some(path) = &self.cache_path {
            self.client
                .cache()
                .save(path)
                .map_err(|e| RunError::data(format!("similarity cache {}", path.display()), e))?;
        }
        Ok(())
    }
}

fn save_cache(provider: &Option<Provider>) -> Result<(), RunError> {
    provider.as_ref().map_or(Ok(()), Provider::save)
}

/// Rejects runs that would need a provider when none is configured, before
/// any scoring starts.
fn preflight(
    datasets: &BTreeMap<String, Vec<GenerationRecord>>,
    estimators: &[EstimatorId],
    backend: &SimilarityBackend,
    has_provider: bool,
) -> Result<(), RunError> {
    if has_provider {
        return Ok(());
    }
    let live = estimators.iter().any(|id| matches!(id, EstimatorId::TokenSar | EstimatorId::Sar));
    if live && !backend.is_lexical() {
        return Err(RunError::Config(format!(
            "token_sar/sar score ablated texts live; backend `{backend}` needs an endpoint"
        )));
    }
    let needs_block = estimators.iter().any(|&id| uses_block(id));
    let needs_nli = estimators.iter().any(|id| id.needs_nli());
    for (name, records) in datasets {
        for r in records {
            if needs_block && !backend.is_lexical() && r.precomputed(backend.wire_name()).is_none() {
                return Err(RunError::Config(format!(
                    "dataset `{name}`, record `{}`: backend `{backend}` has no precomputed block and no endpoint is set",
                    r.record_id
                )));
            }
            if needs_nli && (r.precomputed("nli_entail").is_none() || r.precomputed("nli_contra").is_none()) {
                return Err(RunError::Config(format!(
                    "dataset `{name}`, record `{}`: NLI-based estimators need precomputed nli_entail/nli_contra blocks or an endpoint",
                    r.record_id
                )));
            }
        }
    }
    Ok(())
}

fn uses_block(id: EstimatorId) -> bool {
    use EstimatorId::*;
    matches!(
        id,
        SentenceSar
            | Sar
            | DegMat
            | EigValLaplacian
            | AveDissimilarity
            | Cocoa(_)
            | AdditiveCocoa(_)
            | FullSampleCocoa(_)
            | ProbCocoa(_)
    )
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool, RunError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| RunError::Config(format!("cannot start {workers} workers: {e}")))
}

/// Scores every record with every estimator; results come back in record
/// order, estimators in configured order within a record.
pub fn score_records(
    dataset: &str,
    records: &[GenerationRecord],
    estimators: &[EstimatorId],
    settings: ScoreSettings,
    ctx: SimilarityContext<'_>,
    pool: &rayon::ThreadPool,
) -> Result<Vec<EstimatorResult>, RunError> {
    let per_record: Vec<Vec<EstimatorResult>> = pool.install(|| {
        records
            .par_iter()
            .map(|record| {
                let scorer = RecordScorer::new(record, settings, ctx);
                estimators
                    .iter()
                    .map(|&id| {
                        scorer.score(id).map_err(|source| RunError::Scoring {
                            dataset: dataset.to_string(),
                            record_id: record.record_id.clone(),
                            estimator: id.name(),
                            source: Box::new(source),
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(per_record.into_iter().flatten().collect())
}

fn write_scores(path: &Path, results: &[EstimatorResult]) -> Result<(), RunError> {
    let mut out = create_file(path)?;
    let ctx = || format!("cannot write {}", path.display());
    for r in results {
        serde_json::to_writer(&mut out, r).map_err(|e| RunError::io(ctx(), e.into()))?;
        out.write_all(b"\n").map_err(|e| RunError::io(ctx(), e))?;
    }
    out.flush().map_err(|e| RunError::io(ctx(), e))
}

pub fn read_scores(path: &Path) -> Result<Vec<EstimatorResult>, RunError> {
    let file = File::open(path).map_err(|e| RunError::io(format!("cannot open {}", path.display()), e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| RunError::io(format!("cannot read {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line).map_err(|e| {
            RunError::data(
                path.display().to_string(),
                cocoa_core::Error::MalformedJson { line: i + 1, message: e.to_string() },
            )
        })?;
        out.push(r);
    }
    Ok(out)
}

/// `score`: writes `{out_dir}/{dataset}.scores.jsonl` for every dataset.
pub fn cmd_score(cfg: &Resolved) -> Result<Vec<PathBuf>, RunError> {
    let datasets = load_datasets(cfg)?;
    let provider = Provider::open(cfg)?;
    preflight(&datasets, &cfg.estimators, &cfg.backend, provider.is_some())?;
    create_dir(&cfg.out_dir)?;
    let pool = thread_pool(cfg.workers)?;
    let ctx = SimilarityContext::new(&cfg.backend, provider.as_ref().map(|p| &p.client));
    let settings = ScoreSettings { strategy: cfg.strategy, temperature: cfg.temperature };

    let mut written = Vec::new();
    let outcome = datasets.iter().try_for_each(|(name, records)| {
        let results = score_records(name, records, &cfg.estimators, settings, ctx, &pool)?;
        let path = scores_path(&cfg.out_dir, name);
        write_scores(&path, &results)?;
        written.push(path);
        Ok(())
    });
    // Keep whatever the provider returned even when a later record failed.
    save_cache(&provider)?;
    outcome.map(|()| written)
}

/// PRR per estimator for one dataset. Undefined PRRs (constant quality) are
/// kept as errors so they can be reported rather than aborting the run.
pub fn evaluate_dataset(
    dataset: &str,
    records: &[GenerationRecord],
    scores: &[EstimatorResult],
    default_strategy: TargetStrategy,
    max_rejection: f64,
) -> Result<Reports, RunError> {
    let by_id: BTreeMap<&str, &GenerationRecord> = records.iter().map(|r| (r.record_id.as_str(), r)).collect();
    let mut grouped: BTreeMap<String, Vec<ScoredInstance>> = BTreeMap::new();
    for s in scores {
        let strategy = s.strategy.unwrap_or(default_strategy);
        let quality = by_id
            .get(s.record_id.as_str())
            .and_then(|r| r.quality.get(strategy.as_str()))
            .ok_or_else(|| RunError::MissingQuality {
                dataset: dataset.to_string(),
                record_id: s.record_id.clone(),
                strategy: strategy.as_str().to_string(),
            })?;
        grouped
            .entry(s.estimator.name())
            .or_default()
            .push(ScoredInstance::new(s.record_id.clone(), s.value, *quality));
    }
    Ok(grouped
        .into_iter()
        .map(|(name, instances)| {
            let report = evaluation::prr(&instances, max_rejection);
            (name, report)
        })
        .collect())
}

fn report_entry(report: &Result<PrrReport, cocoa_core::Error>) -> Value {
    match report {
        Ok(r) => json!({
            "n": r.n,
            "auc_unc": r.auc_unc,
            "auc_oracle": r.auc_oracle,
            "auc_rnd": r.auc_rnd,
            "prr": r.prr,
        }),
        Err(e) => json!({ "prr": Value::Null, "error": e.to_string() }),
    }
}

fn write_json(path: &Path, value: &Value) -> Result<(), RunError> {
    let mut out = create_file(path)?;
    let ctx = || format!("cannot write {}", path.display());
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| RunError::io(ctx(), e.into()))?;
    out.write_all(b"\n").map_err(|e| RunError::io(ctx(), e))?;
    out.flush().map_err(|e| RunError::io(ctx(), e))
}

/// `evaluate`: joins `{dataset}.scores.jsonl` with record qualities and
/// writes `report.json` plus one curve CSV per (dataset, estimator).
pub fn cmd_evaluate(cfg: &Resolved) -> Result<PathBuf, RunError> {
    let datasets = load_datasets(cfg)?;
    let curves_dir = cfg.out_dir.join("curves");
    create_dir(&curves_dir)?;

    let mut per_dataset: BTreeMap<String, Reports> = BTreeMap::new();
    for (name, records) in &datasets {
        let scores = read_scores(&scores_path(&cfg.out_dir, name))?;
        let reports = evaluate_dataset(name, records, &scores, cfg.strategy, cfg.max_rejection)?;
        for (estimator, report) in &reports {
            if let Ok(r) = report {
                let path = curves_dir.join(format!("{name}.{estimator}.csv"));
                r.write_curve_csv(create_file(&path)?)
                    .map_err(|e| RunError::data(format!("cannot write {}", path.display()), e))?;
            }
        }
        per_dataset.insert(name.clone(), reports);
    }

    let mut datasets_json = Map::new();
    for (name, reports) in &per_dataset {
        let entries = reports.iter().map(|(e, r)| (e.clone(), report_entry(r))).collect();
        datasets_json.insert(name.clone(), Value::Object(entries));
    }
    let groups_json = group_means(&per_dataset, &cfg.groups);
    let report = json!({
        "max_rejection": cfg.max_rejection,
        "strategy": cfg.strategy.as_str(),
        "datasets": datasets_json,
        "groups": groups_json,
    });
    let path = cfg.out_dir.join("report.json");
    write_json(&path, &report)?;
    Ok(path)
}

/// Group → estimator → mean PRR (null with an error when undefined).
fn group_means(
    per_dataset: &BTreeMap<String, Reports>,
    groups: &BTreeMap<String, Vec<String>>,
) -> Value {
    let estimators: std::collections::BTreeSet<&String> = per_dataset.values().flat_map(|m| m.keys()).collect();
    let mut out = Map::new();
    for (group, members) in groups {
        let mut entry = Map::new();
        for &estimator in &estimators {
            let prrs: BTreeMap<String, Option<f64>> = per_dataset
                .iter()
                .filter_map(|(d, m)| m.get(estimator).map(|r| (d.clone(), r.as_ref().ok().map(|r| r.prr))))
                .collect();
            let value = match evaluation::aggregate_group(group, members, &prrs) {
                Ok(v) => json!(v),
                Err(e) => json!({ "prr": Value::Null, "error": e.to_string() }),
            };
            entry.insert(estimator.clone(), value);
        }
        out.insert(group.clone(), Value::Object(entry));
    }
    Value::Object(out)
}

fn fmt_cell(report: Option<&Result<PrrReport, cocoa_core::Error>>) -> String {
    match report {
        Some(Ok(r)) => r.prr.to_string(),
        _ => "NA".to_string(),
    }
}

/// `ablate`: PRR for every (strategy, backend, estimator) cell, one CSV row
/// per cell and one column per dataset. A single provider cache is shared
/// across the whole grid.
pub fn cmd_ablate(cfg: &Resolved) -> Result<PathBuf, RunError> {
    if cfg.ablate_backends.is_empty() || cfg.ablate_strategies.is_empty() {
        return Err(RunError::Config("ablation grid needs at least one backend and one strategy".into()));
    }
    let datasets = load_datasets(cfg)?;
    let provider = Provider::open(cfg)?;
    for backend in &cfg.ablate_backends {
        preflight(&datasets, &cfg.estimators, backend, provider.is_some())?;
    }
    create_dir(&cfg.out_dir)?;
    let pool = thread_pool(cfg.workers)?;

    let mut rows = Vec::new();
    let outcome = (|| {
        for &strategy in &cfg.ablate_strategies {
            for backend in &cfg.ablate_backends {
                let ctx = SimilarityContext::new(backend, provider.as_ref().map(|p| &p.client));
                let settings = ScoreSettings { strategy, temperature: cfg.temperature };
                let mut cells: BTreeMap<&str, Reports> = BTreeMap::new();
                for (name, records) in &datasets {
                    let scores = score_records(name, records, &cfg.estimators, settings, ctx, &pool)?;
                    cells.insert(name, evaluate_dataset(name, records, &scores, strategy, cfg.max_rejection)?);
                }
                for id in &cfg.estimators {
                    let mut row = vec![id.name(), backend.name(), strategy.as_str().to_string()];
                    row.extend(datasets.keys().map(|d| fmt_cell(cells[d.as_str()].get(&id.name()))));
                    rows.push(row.join(","));
                }
            }
        }
        Ok::<(), RunError>(())
    })();
    save_cache(&provider)?;
    outcome?;

    let path = cfg.out_dir.join("ablation.csv");
    let mut out = create_file(&path)?;
    let mut header = vec!["estimator".to_string(), "backend".into(), "strategy".into()];
    header.extend(datasets.keys().cloned());
    let ctx = || format!("cannot write {}", path.display());
    writeln!(out, "{}", header.join(",")).map_err(|e| RunError::io(ctx(), e))?;
    for row in rows {
        writeln!(out, "{row}").map_err(|e| RunError::io(ctx(), e))?;
    }
    out.flush().map_err(|e| RunError::io(ctx(), e))?;
    Ok(path)
}

/// `synth`: writes generated records to `output`.
pub fn cmd_synth(synth_cfg: &SynthConfig, output: &Path) -> Result<(), RunError> {
    let records = synth::generate(synth_cfg)?;
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_records(create_file(output)?, &records)
        .map_err(|e| RunError::data(format!("cannot write {}", output.display()), e))
}

pub fn sim_path(out_dir: &Path, dataset: &str) -> PathBuf {
    out_dir.join(format!("{dataset}.sim.jsonl"))
}

/// `sim`: stores the raw similarity block of `cfg.backend` in every record
/// and writes `{out_dir}/{dataset}.sim.jsonl`.
pub fn cmd_sim(cfg: &Resolved) -> Result<Vec<PathBuf>, RunError> {
    let backend = &cfg.backend;
    if let SimilarityBackend::Precomputed(_) = backend {
        return Err(RunError::Config(format!("`{backend}` is already precomputed; pick a live backend")));
    }
    if backend.needs_provider() && cfg.endpoint.is_none() {
        return Err(RunError::Config(format!("backend `{backend}` needs an endpoint")));
    }
    let datasets = load_datasets(cfg)?;
    let provider = Provider::open(cfg)?;
    create_dir(&cfg.out_dir)?;
    let pool = thread_pool(cfg.workers)?;
    let ctx = SimilarityContext::new(backend, provider.as_ref().map(|p| &p.client));

    let mut written = Vec::new();
    let outcome = datasets.into_iter().try_for_each(|(name, mut records)| {
        pool.install(|| {
            records.par_iter_mut().try_for_each(|r| {
                let block = ctx.record_block(r).map_err(|e| RunError::data(format!("dataset `{name}`, record `{}`", r.record_id), e))?;
                r.precomputed_sim.get_or_insert_with(BTreeMap::new).insert(backend.wire_name().to_string(), block);
                Ok::<(), RunError>(())
            })
        })?;
        let path = sim_path(&cfg.out_dir, &name);
        write_records(create_file(&path)?, &records)
            .map_err(|e| RunError::data(format!("cannot write {}", path.display()), e))?;
        written.push(path);
        Ok::<(), RunError>(())
    });
    save_cache(&provider)?;
    outcome.map(|()| written)
}

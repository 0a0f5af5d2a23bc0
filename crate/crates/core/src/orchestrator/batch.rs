//! Batch runs over a gold file, with one artifact directory per query.
//!
//! Layout of `<output>/<method>/`:
//!
//! ```text
//! config.json
//! report.json
//! report.md
//! queries/000/query.json          the gold entry
//! queries/000/universe.json
//! queries/000/run.json            everything the method produced
//! queries/000/pairs.json          VerDICT extractions
//! queries/000/clusters.json       VerDICT cluster membership
//! queries/000/clarifications.json
//! queries/000/decisions.json      judge verdicts
//! queries/000/ledger.json         method call records
//! queries/000/error.json          only when the query failed
//! ```

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::Serialize;
use serde::de::DeserializeOwned;

use super::config::RunConfig;
use super::engine::{Engine, MethodRun};
use crate::diversify::CandidatePair;
use crate::error::{Error, Result};
use crate::eval::{evaluate_query, load_gold, render_table, EvalReport, GoldSet, Judge, QueryReport};
use crate::ledger::{summarize_ledger, CostLedger, LedgerSnapshot, LedgerSummary};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MD: &str = "report.md";

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut raw = serde_json::to_string_pretty(value)?;
    raw.push('\n');
    fs::write(path, raw).map_err(|e| Error::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&raw).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn query_dir(run_dir: &Path, i: usize) -> PathBuf {
    run_dir.join("queries").join(format!("{i:03}"))
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "panic".into())
}

/// Runs `f(i)` for `0..n` on up to `parallelism` threads; results keep
/// index order.
fn par_map<T: Send>(n: usize, parallelism: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let slots: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..parallelism.clamp(1, n.max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let out = f(i);
                *slots[i].lock().expect("slot poisoned") = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot poisoned").expect("slot filled"))
        .collect()
}

fn judge_query(
    engine: &Engine,
    gold: &GoldSet,
    run: &MethodRun,
) -> (crate::eval::QueryMetrics, Vec<crate::eval::JudgeDecision>, LedgerSummary) {
    let judge = Judge::new(engine.judge.with_ledger(Arc::new(CostLedger::new())));
    let pairs: Option<&[CandidatePair]> = run.diversification.as_ref().map(|d| d.pairs.as_slice());
    let metrics = evaluate_query(
        &run.clarifications,
        gold,
        run.fallback(),
        pairs,
        &engine.corpus,
        &judge,
        &engine.config.eval,
    );
    (metrics, judge.decisions(), judge.ledger().summary())
}

fn process_query(engine: &Engine, gold: &GoldSet, dir: &Path) -> Result<QueryReport> {
    create_dir(dir)?;
    write_json(&dir.join("query.json"), gold)?;
    let ledger = Arc::new(CostLedger::new());
    let method = engine.config.method;
    let outcome = catch_unwind(AssertUnwindSafe(|| engine.run_method(method, &gold.query, &ledger)))
        .unwrap_or_else(|p| Err(Error::Invalid(format!("method panicked: {}", panic_message(p)))));
    let snapshot = ledger.snapshot();
    write_json(&dir.join("ledger.json"), &snapshot)?;
    let cost = summarize_ledger(&snapshot);
    let run = match outcome {
        Ok(run) => run,
        Err(e) => {
            log::warn!("query `{}` failed: {e}", gold.query);
            write_json(&dir.join("error.json"), &serde_json::json!({ "error": e.to_string() }))?;
            return Ok(QueryReport {
                query: gold.query.clone(),
                metrics: None,
                error: Some(e.to_string()),
                cost,
                judge_cost: LedgerSummary::default(),
            });
        }
    };
    write_json(&dir.join("run.json"), &run)?;
    write_json(&dir.join("universe.json"), &run.universe)?;
    write_json(&dir.join("clarifications.json"), &run.clarifications)?;
    if let Some(d) = &run.diversification {
        write_json(&dir.join("pairs.json"), d)?;
    }
    if let Some(c) = &run.clusters {
        write_json(&dir.join("clusters.json"), c)?;
    }
    let judged = catch_unwind(AssertUnwindSafe(|| judge_query(engine, gold, &run)));
    let (metrics, decisions, judge_cost) = match judged {
        Ok(v) => v,
        Err(p) => {
            let message = format!("evaluation panicked: {}", panic_message(p));
            return Ok(QueryReport {
                query: gold.query.clone(),
                metrics: None,
                error: Some(message),
                cost,
                judge_cost: LedgerSummary::default(),
            });
        }
    };
    write_json(&dir.join("decisions.json"), &decisions)?;
    Ok(QueryReport {
        query: gold.query.clone(),
        metrics: Some(metrics),
        error: None,
        cost,
        judge_cost,
    })
}

fn write_report(run_dir: &Path, report: &EvalReport) -> Result<()> {
    write_json(&run_dir.join(REPORT_JSON), report)?;
    let md = render_table(std::slice::from_ref(report));
    fs::write(run_dir.join(REPORT_MD), md).map_err(|e| Error::io(run_dir.join(REPORT_MD), e))
}

/// Runs the configured method on every gold query and writes artifacts
/// under `engine.config.run_dir()`. Per-query failures are recorded in the
/// report; only I/O and configuration problems fail the run.
pub fn run_batch(engine: &Engine, gold: &[GoldSet]) -> Result<EvalReport> {
    let run_dir = engine.config.run_dir();
    let queries_dir = run_dir.join("queries");
    if queries_dir.exists() {
        fs::remove_dir_all(&queries_dir).map_err(|e| Error::io(&queries_dir, e))?;
    }
    create_dir(&queries_dir)?;
    write_json(&run_dir.join("config.json"), &engine.config)?;
    let rows = par_map(gold.len(), engine.config.parallelism, |i| {
        process_query(engine, &gold[i], &query_dir(&run_dir, i))
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let report = EvalReport::new(engine.config.method.as_str(), rows);
    write_report(&run_dir, &report)?;
    Ok(report)
}

/// Loads `config`, runs the batch and returns the report.
pub fn run_config(config: RunConfig) -> Result<EvalReport> {
    let gold_path = config
        .paths
        .gold
        .clone()
        .ok_or_else(|| Error::Config("batch runs need `paths.gold`".into()))?;
    let gold = load_gold(&gold_path)?;
    let engine = Engine::from_config(config)?;
    run_batch(&engine, &gold)
}

/// Re-judges an existing run directory from its stored clarifications and
/// rewrites the report. Method costs come from the stored ledgers.
pub fn evaluate_run_dir(run_dir: impl AsRef<Path>) -> Result<EvalReport> {
    let run_dir = run_dir.as_ref();
    let config: RunConfig = read_json(&run_dir.join("config.json"))?;
    config.validate()?;
    let engine = Engine::from_config(config)?;
    let mut rows = Vec::new();
    for i in 0.. {
        let dir = query_dir(run_dir, i);
        if !dir.exists() {
            break;
        }
        let gold: GoldSet = read_json(&dir.join("query.json"))?;
        let snapshot: LedgerSnapshot = read_json(&dir.join("ledger.json"))?;
        let cost = summarize_ledger(&snapshot);
        let run_path = dir.join("run.json");
        if !run_path.exists() {
            let error = read_json::<serde_json::Value>(&dir.join("error.json"))
                .ok()
                .and_then(|v| v["error"].as_str().map(String::from))
                .unwrap_or_else(|| "no run artifacts".into());
            rows.push(QueryReport {
                query: gold.query,
                metrics: None,
                error: Some(error),
                cost,
                judge_cost: LedgerSummary::default(),
            });
            continue;
        }
        let run: MethodRun = read_json(&run_path)?;
        let (metrics, decisions, judge_cost) = judge_query(&engine, &gold, &run);
        write_json(&dir.join("decisions.json"), &decisions)?;
        rows.push(QueryReport {
            query: gold.query,
            metrics: Some(metrics),
            error: None,
            cost,
            judge_cost,
        });
    }
    let report = EvalReport::new(engine.config.method.as_str(), rows);
    write_report(run_dir, &report)?;
    Ok(report)
}

/// Renders the table for a method directory, or for every method directory
/// under an output directory, and writes it to `report.md` there.
pub fn export_report(dir: impl AsRef<Path>) -> Result<String> {
    let dir = dir.as_ref();
    let mut reports: Vec<EvalReport> = Vec::new();
    if dir.join(REPORT_JSON).exists() {
        reports.push(read_json(&dir.join(REPORT_JSON))?);
    } else {
        let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut subdirs: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(REPORT_JSON).exists())
            .collect();
        subdirs.sort();
        for d in subdirs {
            reports.push(read_json(&d.join(REPORT_JSON))?);
        }
    }
    let table = render_table(&reports);
    fs::write(dir.join(REPORT_MD), &table).map_err(|e| Error::io(dir.join(REPORT_MD), e))?;
    Ok(table)
}

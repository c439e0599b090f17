//! Reproducible campaigns over a (β, q) grid.
//!
//! Every run is seeded from its (regime, β index, q index, rep) key alone, so
//! a campaign's output does not depend on scheduling: serial and parallel
//! execution write the same bytes, and an interrupted campaign resumes from
//! the last complete run block of each cell.

mod config;
mod dataset;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

pub use config::{standard_betas, standard_qs, ModeKind, SweepConfig};
pub use dataset::{
    cell_file_name, encode_run, Cell, CellEntry, Dataset, Manifest, Run, CELLS_DIR, FORMAT_VERSION,
    INITIAL_CONDITION, MANIFEST_FILE, SEEDING_RULE,
};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::sim::run_trajectory;
use crate::stats::{cross_run_summary, CrossRunSummary, StatRecord};
use dataset::{scan_cell_bytes, CellWriter};

/// Runs handed to the worker pool between two flushes to disk.
const BATCH: usize = 256;

fn simulate(config: &SweepConfig, beta_index: usize, q_index: usize, rep: u32) -> Result<Run> {
    let seed = config.run_seed(beta_index, q_index, rep);
    let tr = run_trajectory(
        &config.params(beta_index, q_index),
        config.num_a(),
        seed,
        &config.run_options(),
    )?;
    Ok(Run {
        rep,
        seed,
        summary: tr.summary,
        records: tr.records,
    })
}

/// Runs every rep of one cell in memory.
pub fn run_cell(
    config: &SweepConfig,
    beta_index: usize,
    q_index: usize,
    exec: Execution,
) -> Result<Cell> {
    config.validate()?;
    if beta_index >= config.betas.len() || q_index >= config.qs.len() {
        return Err(Error::Config(format!("no cell ({beta_index}, {q_index})")));
    }
    let runs = exec
        .map(config.runs as usize, |rep| {
            simulate(config, beta_index, q_index, rep as u32)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(Cell {
        beta_index,
        q_index,
        beta: config.betas[beta_index],
        q: config.qs[q_index],
        runs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepReport {
    pub cells: usize,
    pub total_runs: u64,
    /// Runs found intact on disk and kept.
    pub resumed_runs: u64,
    pub executed_runs: u64,
}

/// Executes the campaign into `out_dir`, resuming whatever is already there.
///
/// An existing manifest must describe the same configuration. Blocks after
/// the first damaged or truncated one in a cell file are discarded and rerun.
pub fn run_sweep(config: &SweepConfig, out_dir: &Path, exec: Execution) -> Result<SweepReport> {
    config.validate()?;
    let cells_dir = out_dir.join(CELLS_DIR);
    fs::create_dir_all(&cells_dir).map_err(|e| Error::io(&cells_dir, e))?;
    let manifest = Manifest::new(config);
    if out_dir.join(MANIFEST_FILE).exists() {
        let existing = Manifest::read(out_dir)?;
        if existing.config != *config {
            return Err(Error::Config(format!(
                "{} holds a dataset of a different configuration",
                out_dir.display()
            )));
        }
    } else {
        manifest.write(out_dir)?;
    }

    let cells: Vec<(usize, usize)> = config.cells().collect();
    let mut writers: Vec<Option<CellWriter>> = Vec::with_capacity(cells.len());
    let mut pending: Vec<(usize, u32)> = Vec::new();
    let mut resumed = 0u64;
    for (ci, &(bi, qi)) in cells.iter().enumerate() {
        let path = out_dir.join(cell_file_name(bi, qi));
        let scan = match fs::read(&path) {
            Ok(bytes) => Some(scan_cell_bytes(&bytes, bi, qi, config.household_size)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(Error::io(&path, e)),
        };
        let (done, valid_len, clean) = match &scan {
            Some(s) => (s.runs.len() as u32, s.valid_len, s.defect.is_none()),
            None => (0, 0, false),
        };
        if done > config.runs {
            return Err(Error::Format(format!(
                "{} holds {done} runs, the configuration asks for {}",
                path.display(),
                config.runs
            )));
        }
        resumed += u64::from(done);
        pending.extend((done..config.runs).map(|rep| (ci, rep)));
        let writer = if done < config.runs || !clean {
            Some(CellWriter::open(
                &path,
                valid_len,
                bi,
                qi,
                config.household_size,
            )?)
        } else {
            None
        };
        writers.push(writer);
    }

    for batch in pending.chunks(BATCH) {
        let runs = exec.map(batch.len(), |i| {
            let (ci, rep) = batch[i];
            let (bi, qi) = cells[ci];
            simulate(config, bi, qi, rep)
        });
        for (&(ci, _), run) in batch.iter().zip(runs) {
            writers[ci]
                .as_mut()
                .expect("cells with pending runs have a writer")
                .append(&run?)?;
        }
        for w in writers.iter_mut().flatten() {
            w.flush()?;
        }
    }
    for w in writers.into_iter().flatten() {
        w.finish()?;
    }

    Ok(SweepReport {
        cells: cells.len(),
        total_runs: config.total_runs(),
        resumed_runs: resumed,
        executed_runs: pending.len() as u64,
    })
}

/// Cross-run aggregates of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub beta_index: usize,
    pub q_index: usize,
    pub beta: f64,
    pub q: f64,
    pub summary: CrossRunSummary,
}

impl CellSummary {
    pub fn from_cell(cell: &Cell) -> Result<Self> {
        let summaries: Vec<_> = cell.runs.iter().map(|r| r.summary.clone()).collect();
        Ok(CellSummary {
            beta_index: cell.beta_index,
            q_index: cell.q_index,
            beta: cell.beta,
            q: cell.q,
            summary: cross_run_summary(&summaries)?,
        })
    }
}

/// Per-cell summaries of a stored dataset.
pub fn analyze(dataset: &Dataset) -> Result<Vec<CellSummary>> {
    dataset
        .config()
        .cells()
        .map(|(bi, qi)| CellSummary::from_cell(&dataset.cell(bi, qi)?))
        .collect()
}

/// Writes summaries as a tab-separated table with a header row.
pub fn write_summary_table<W: Write>(out: &mut W, rows: &[CellSummary]) -> std::io::Result<()> {
    let mut header = vec!["beta", "q"];
    header.extend(CrossRunSummary::COLUMNS);
    writeln!(out, "{}", header.join("\t"))?;
    for row in rows {
        let mut fields = vec![row.beta.to_string(), row.q.to_string()];
        fields.extend(row.summary.fields());
        writeln!(out, "{}", fields.join("\t"))?;
    }
    Ok(())
}

pub const RECORDS_TSV: &str = "records.tsv";
pub const RUNS_TSV: &str = "runs.tsv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExportReport {
    pub runs: u64,
    pub records: u64,
}

/// Lossless tab-separated export of a dataset into `out_dir`:
/// `records.tsv` (one row per run and timestep) and `runs.tsv` (one row per
/// run summary). Floats are written in shortest round-trip form, missing
/// first-passage times as `NA`, component sizes joined by `;`.
pub fn export_tsv(dataset: &Dataset, out_dir: &Path) -> Result<ExportReport> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let cfg = dataset.config();
    let open = |name: &str| -> Result<BufWriter<fs::File>> {
        let path = out_dir.join(name);
        fs::File::create(&path)
            .map(BufWriter::new)
            .map_err(|e| Error::io(&path, e))
    };
    let records_path = out_dir.join(RECORDS_TSV);
    let runs_path = out_dir.join(RUNS_TSV);
    let mut records = open(RECORDS_TSV)?;
    let mut runs = open(RUNS_TSV)?;
    let key_cols = [
        "regime",
        "beta_index",
        "q_index",
        "beta",
        "q",
        "rep",
        "seed",
    ];
    let mut rec_header: Vec<String> = key_cols.iter().map(|s| s.to_string()).collect();
    rec_header.push("t".into());
    rec_header.extend(StatRecord::column_names(cfg.household_size));
    let run_header = [
        "final_N_A",
        "steps",
        "absorbed",
        "tau_hh",
        "tau_wp",
        "homophily_hh",
        "homophily_wp",
        "size_overflow",
        "components",
    ];
    let io_rec = |e| Error::io(&records_path, e);
    let io_run = |e| Error::io(&runs_path, e);
    writeln!(records, "{}", rec_header.join("\t")).map_err(io_rec)?;
    writeln!(runs, "{}\t{}", key_cols.join("\t"), run_header.join("\t")).map_err(io_run)?;

    let mut report = ExportReport {
        runs: 0,
        records: 0,
    };
    for (bi, qi) in cfg.cells() {
        let cell = dataset.cell(bi, qi)?;
        for run in &cell.runs {
            let key = format!(
                "{}\t{bi}\t{qi}\t{}\t{}\t{}\t{}",
                cfg.regime, cell.beta, cell.q, run.rep, run.seed
            );
            let s = &run.summary;
            let tau = |t: Option<u32>| t.map_or("NA".to_string(), |t| t.to_string());
            let components: Vec<String> = s.component_sizes.iter().map(|c| c.to_string()).collect();
            writeln!(
                runs,
                "{key}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                s.final_n_a,
                s.steps,
                u8::from(s.absorbed),
                tau(s.tau_hh),
                tau(s.tau_wp),
                s.homophily_hh,
                s.homophily_wp,
                u8::from(s.size_overflow),
                components.join(";")
            )
            .map_err(io_run)?;
            for r in &run.records {
                let values: Vec<String> = r.values().iter().map(|v| v.to_string()).collect();
                writeln!(records, "{key}\t{}\t{}", r.t, values.join("\t")).map_err(io_rec)?;
            }
            report.runs += 1;
            report.records += run.records.len() as u64;
        }
    }
    records.flush().map_err(io_rec)?;
    runs.flush().map_err(io_run)?;
    Ok(report)
}

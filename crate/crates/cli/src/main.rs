//! Command-line front end.
//!
//! Exit status: 0 on success, 1 on a usage error, 2 on an I/O or validation error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hyperopinion::model::{ModelParams, Regime};
use hyperopinion::regression::{
    evaluate, write_report_table, FeatureSpec, SourceSet, SplitManifest, Target, DEFAULT_RIDGE,
};
use hyperopinion::sim::{run_trajectory, RunOptions};
use hyperopinion::stats::StatRecord;
use hyperopinion::sweep::{
    analyze, export_tsv, run_sweep, standard_betas, standard_qs, write_summary_table, Dataset,
    ModeKind, SweepConfig,
};
use hyperopinion::toy::{enumerate_absorbing, rate_grid, Archetype, Family};
use hyperopinion::{Error, Execution, Result};

#[derive(Parser)]
#[command(
    name = "hyperopinion",
    version,
    about = "Opinion dynamics on a two-layer adaptive hypergraph"
)]
struct Cli {
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    serial: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory and print its summary.
    Simulate(SimulateArgs),
    /// Run a (β, q) campaign into a dataset directory (resumes if interrupted).
    Sweep(SweepArgs),
    /// Enumerate the absorbing states of the ten-vertex system.
    ToyEnumerate(ToyEnumerateArgs),
    /// Monte-Carlo absorption rates of the ten-vertex system over a (β, q) grid.
    ToyRates(ToyRatesArgs),
    /// Per-cell cross-run summaries of a dataset.
    Analyze(AnalyzeArgs),
    /// Fit and score the regression estimator on a dataset.
    Estimate(EstimateArgs),
    /// Export a dataset and its train/test split as tab-separated text.
    ExportCsv(ExportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "linear")]
    regime: Regime,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    q: f64,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Initial number of A-opinions [default: n/2].
    #[arg(long)]
    num_a: Option<usize>,
    #[arg(long, default_value_t = ModelParams::DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Timesteps of n micro-steps each.
    #[arg(long, default_value_t = 300, conflicts_with = "step_cap")]
    timesteps: u32,
    /// Run until absorbed or this many micro-steps instead.
    #[arg(long)]
    step_cap: Option<u64>,
    /// Also record the initial state as t = 0.
    #[arg(long)]
    include_t0: bool,
    /// Write per-timestep records to this file.
    #[arg(long)]
    records: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML file with campaign settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output dataset directory.
    #[arg(long, short)]
    output: PathBuf,
    /// Start from the standard dataset or long-run preset before applying the file and flags.
    #[arg(long, value_parser = ["dataset", "long-run"])]
    preset: Option<String>,
    #[arg(long)]
    regime: Option<Regime>,
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    qs: Option<Vec<f64>>,
    #[arg(long)]
    runs: Option<u32>,
    #[arg(long, value_parser = ["dataset", "long-run"])]
    mode: Option<String>,
    #[arg(long)]
    timesteps: Option<u32>,
    #[arg(long)]
    step_cap: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    num_a: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    include_t0: Option<bool>,
    #[arg(long)]
    keep_records: Option<bool>,
    #[arg(long)]
    tau_threshold: Option<f64>,
}

#[derive(Args)]
struct ToyEnumerateArgs {
    /// Regime to enumerate [default: both].
    #[arg(long)]
    regime: Option<Regime>,
    #[arg(long, default_value_t = ModelParams::DEFAULT_LAMBDA)]
    lambda: f64,
    /// Print one row per family instead of one per canonical class.
    #[arg(long)]
    families: bool,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ToyRatesArgs {
    /// Regime [default: both].
    #[arg(long)]
    regime: Option<Regime>,
    #[arg(long, value_delimiter = ',', default_values_t = standard_betas())]
    betas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = standard_qs())]
    qs: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    runs: usize,
    #[arg(long, default_value_t = 1_000_000)]
    step_cap: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = ModelParams::DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long, short)]
    dataset: PathBuf,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long, short)]
    dataset: PathBuf,
    /// Targets to estimate.
    #[arg(long, value_delimiter = ',', default_value = "beta,q")]
    target: Vec<Target>,
    /// Observation horizons in timesteps.
    #[arg(long, value_delimiter = ';', default_value = "20")]
    horizons: Vec<String>,
    /// Feature sets: `all`, names joined by commas, or a six-digit mask over
    /// N_A D_hh D_wp S_wp M_wp N_ch. Repeat the flag for several sets.
    #[arg(long = "features", default_value = "all")]
    features: Vec<SourceSet>,
    /// Seed of the per-cell 80/20 split.
    #[arg(long, default_value_t = 0, conflicts_with = "split")]
    split_seed: u64,
    /// Read the split from a manifest file instead.
    #[arg(long)]
    split: Option<PathBuf>,
    /// Save the split manifest used.
    #[arg(long)]
    write_split: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_RIDGE)]
    ridge: f64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long, short)]
    dataset: PathBuf,
    /// Output directory for records.tsv, runs.tsv and split.tsv.
    #[arg(long, short)]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_error(p, e))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn io_error(path: &Path, source: io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn stdout_error(source: io::Error) -> Error {
    io_error(Path::new("<output>"), source)
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let params = ModelParams {
        lambda: args.lambda,
        ..ModelParams::new(args.regime, args.n, args.beta, args.q)
    };
    let mut opts = match args.step_cap {
        Some(cap) => RunOptions::long_run(cap),
        None => RunOptions::dataset(args.timesteps),
    };
    opts.include_t0 = args.include_t0;
    opts.keep_records = args.records.is_some();
    let tr = run_trajectory(&params, args.num_a.unwrap_or(args.n / 2), args.seed, &opts)?;
    if let Some(path) = &args.records {
        let mut out = open_output(Some(path))?;
        let mut header = vec!["t".to_string()];
        header.extend(StatRecord::column_names(params.household_size));
        let io = |e| io_error(path, e);
        writeln!(out, "{}", header.join("\t")).map_err(io)?;
        for r in &tr.records {
            let values: Vec<String> = r.values().iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}\t{}", r.t, values.join("\t")).map_err(io)?;
        }
        out.flush().map_err(io)?;
    }
    let s = &tr.summary;
    let na = |t: Option<u32>| t.map_or("NA".to_string(), |t| t.to_string());
    let components: Vec<String> = s.component_sizes.iter().map(|c| c.to_string()).collect();
    let mut out = open_output(None)?;
    let lines = [
        ("seed", tr.seed.to_string()),
        ("final_N_A", s.final_n_a.to_string()),
        ("steps", s.steps.to_string()),
        ("absorbed", s.absorbed.to_string()),
        ("tau_hh", na(s.tau_hh)),
        ("tau_wp", na(s.tau_wp)),
        ("homophily_hh", s.homophily_hh.to_string()),
        ("homophily_wp", s.homophily_wp.to_string()),
        ("components", components.join(";")),
        ("size_overflow", s.size_overflow.to_string()),
    ];
    for (k, v) in lines {
        writeln!(out, "{k}\t{v}").map_err(stdout_error)?;
    }
    out.flush().map_err(stdout_error)
}

fn mode_kind(s: &str) -> ModeKind {
    if s == "long-run" {
        ModeKind::LongRun
    } else {
        ModeKind::Dataset
    }
}

fn sweep_config(args: &SweepArgs) -> Result<SweepConfig> {
    let regime = args.regime.unwrap_or(Regime::Linear);
    let mut cfg = match (&args.config, args.preset.as_deref()) {
        (Some(path), _) => SweepConfig::from_file(path)?,
        (None, Some("long-run")) => SweepConfig::standard_long_run(regime),
        _ => SweepConfig::standard_dataset(regime),
    };
    if let Some(v) = args.regime {
        cfg.regime = v;
    }
    if let Some(v) = &args.betas {
        cfg.betas = v.clone();
    }
    if let Some(v) = &args.qs {
        cfg.qs = v.clone();
    }
    if let Some(v) = args.runs {
        cfg.runs = v;
    }
    if let Some(v) = &args.mode {
        cfg.mode = mode_kind(v);
    }
    if let Some(v) = args.timesteps {
        cfg.timesteps = v;
    }
    if let Some(v) = args.step_cap {
        cfg.step_cap = v;
    }
    if let Some(v) = args.n {
        cfg.n = v;
    }
    if args.num_a.is_some() {
        cfg.num_a = args.num_a;
    }
    if let Some(v) = args.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = args.master_seed {
        cfg.master_seed = v;
    }
    if let Some(v) = args.include_t0 {
        cfg.include_t0 = v;
    }
    if let Some(v) = args.keep_records {
        cfg.keep_records = v;
    }
    if let Some(v) = args.tau_threshold {
        cfg.tau_threshold = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sweep(args: SweepArgs, exec: Execution) -> Result<()> {
    let cfg = sweep_config(&args)?;
    let report = run_sweep(&cfg, &args.output, exec)?;
    println!(
        "{}: {} cells, {} runs ({} resumed, {} executed)",
        args.output.display(),
        report.cells,
        report.total_runs,
        report.resumed_runs,
        report.executed_runs
    );
    Ok(())
}

fn regimes(choice: Option<Regime>) -> Vec<Regime> {
    choice.map_or_else(|| vec![Regime::Linear, Regime::Nonlinear], |r| vec![r])
}

fn toy_enumerate(args: ToyEnumerateArgs, exec: Execution) -> Result<()> {
    let mut out = open_output(args.output.as_deref())?;
    let w = &mut out;
    if args.families {
        writeln!(
            w,
            "regime\tfamily\tclasses\tstructures\traw_count\treachable"
        )
        .map_err(stdout_error)?;
    } else {
        writeln!(
            w,
            "regime\tfamily\tkey\traw_count\treachable\topinions\tworkplaces"
        )
        .map_err(stdout_error)?;
    }
    for regime in regimes(args.regime) {
        let e = enumerate_absorbing(regime, args.lambda, exec);
        if args.families {
            for f in &e.families {
                writeln!(
                    w,
                    "{regime}\t{}\t{}\t{}\t{}\t{}",
                    f.family, f.classes, f.structures, f.raw_count, f.reachable
                )
                .map_err(stdout_error)?;
            }
        } else {
            for c in &e.classes {
                let (ops, wps) = c.representative.render();
                writeln!(
                    w,
                    "{regime}\t{}\t{}\t{}\t{}\t{ops}\t{wps}",
                    c.family, c.key, c.raw_count, c.reachable
                )
                .map_err(stdout_error)?;
            }
        }
        let extra = e.unlisted_reachable();
        if !extra.is_empty() {
            let names: Vec<String> = extra.iter().map(|f| f.family.to_string()).collect();
            eprintln!(
                "note: {regime}: reachable absorbing families not among the drawn (a)-(h): {}",
                names.join(", ")
            );
        }
    }
    out.flush().map_err(stdout_error)
}

fn toy_rates(args: ToyRatesArgs, exec: Execution) -> Result<()> {
    let mut out = open_output(args.output.as_deref())?;
    let mut header = vec![
        "regime".to_string(),
        "beta".into(),
        "q".into(),
        "runs".into(),
    ];
    header.extend(Archetype::ALL.iter().map(|f| format!("rate_{}", f.label())));
    header.extend(
        [
            "rate_unlisted",
            "non_absorbed",
            "homogeneous",
            "split_households",
            "mixed_households",
        ]
        .map(String::from),
    );
    writeln!(out, "{}", header.join("\t")).map_err(stdout_error)?;
    for regime in regimes(args.regime) {
        let grid = rate_grid(
            regime,
            args.lambda,
            &args.betas,
            &args.qs,
            args.runs,
            args.seed,
            args.step_cap,
            exec,
        )?;
        for pt in grid {
            let r = &pt.rates;
            let mut row = vec![
                regime.to_string(),
                pt.beta.to_string(),
                pt.q.to_string(),
                r.runs.to_string(),
            ];
            row.extend(
                Archetype::ALL
                    .iter()
                    .map(|&f| format!("{:.5}", r.rate(Family::Listed(f)))),
            );
            row.extend(
                [
                    r.unlisted(),
                    r.non_absorbed_fraction(),
                    r.homogeneous(),
                    r.split_households(),
                    r.mixed_households(),
                ]
                .map(|x| format!("{x:.5}")),
            );
            writeln!(out, "{}", row.join("\t")).map_err(stdout_error)?;
        }
    }
    out.flush().map_err(stdout_error)
}

fn analyze_cmd(args: AnalyzeArgs) -> Result<()> {
    let ds = Dataset::open(&args.dataset)?;
    let rows = analyze(&ds)?;
    let mut out = open_output(args.output.as_deref())?;
    write_summary_table(&mut out, &rows).map_err(stdout_error)?;
    out.flush().map_err(stdout_error)
}

fn estimate(args: EstimateArgs, exec: Execution) -> Result<()> {
    let ds = Dataset::open(&args.dataset)?;
    let split = match &args.split {
        Some(path) => SplitManifest::read_file(path)?,
        None => SplitManifest::new(ds.config(), args.split_seed)?,
    };
    if let Some(path) = &args.write_split {
        split.write_file(path)?;
    }
    let mut horizons = Vec::new();
    for h in args.horizons.iter().flat_map(|s| s.split(',')) {
        horizons.push(
            h.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("invalid horizon {h:?}")))?,
        );
    }
    let mut specs = Vec::new();
    for &h in &horizons {
        for &s in &args.features {
            specs.push(FeatureSpec::new(h, s)?);
        }
    }
    let reports = evaluate(&ds, &args.target, &specs, &split, args.ridge, exec)?;
    let mut out = open_output(args.output.as_deref())?;
    write_report_table(&mut out, &reports).map_err(stdout_error)?;
    out.flush().map_err(stdout_error)
}

fn export(args: ExportArgs) -> Result<()> {
    let ds = Dataset::open(&args.dataset)?;
    let report = export_tsv(&ds, &args.output)?;
    let split = SplitManifest::new(ds.config(), args.split_seed)?;
    split.write_file(&args.output.join("split.tsv"))?;
    println!(
        "{}: {} runs, {} records",
        args.output.display(),
        report.runs,
        report.records
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let exec = if cli.serial {
        Execution::Serial
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a, exec),
        Command::ToyEnumerate(a) => toy_enumerate(a, exec),
        Command::ToyRates(a) => toy_rates(a, exec),
        Command::Analyze(a) => analyze_cmd(a),
        Command::Estimate(a) => estimate(a, exec),
        Command::ExportCsv(a) => export(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

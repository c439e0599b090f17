use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::Regime;
use crate::seed::{derive_seed, rng_from_seed};
use crate::sweep::{Cell, Dataset, SweepConfig};

use super::features::{build_features, FeatureSpec, SourceSet};
use super::ols::fit_ols;

pub const TEST_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    Beta,
    Q,
}

impl Target {
    pub fn select(self, beta: f64, q: f64) -> f64 {
        match self {
            Target::Beta => beta,
            Target::Q => q,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Target::Beta => "beta",
            Target::Q => "q",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Target {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "beta" | "β" => Ok(Target::Beta),
            "q" => Ok(Target::Q),
            other => Err(Error::Config(format!(
                "unknown target {other:?} (expected beta or q)"
            ))),
        }
    }
}

/// Train/test assignment of every (cell, rep), shared with external estimators.
///
/// In each cell, `round(0.2 · runs)` reps are drawn for testing by shuffling
/// the rep indices with `derive_seed(split_seed, [beta_index, q_index])`.
/// The split does not depend on the regime, so both regimes' datasets of one
/// grid use the same partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitManifest {
    pub split_seed: u64,
    pub num_betas: usize,
    pub num_qs: usize,
    pub runs: u32,
    /// `test[cell][rep]`, cells in storage order.
    test: Vec<Vec<bool>>,
}

const SPLIT_HEADER: &str = "beta_index\tq_index\trep\tset";

impl SplitManifest {
    pub fn new(config: &SweepConfig, split_seed: u64) -> Result<Self> {
        let runs = config.runs as usize;
        let num_test = (runs as f64 * TEST_FRACTION).round() as usize;
        if num_test == 0 || num_test == runs {
            return Err(Error::Estimation(format!(
                "{runs} runs per cell cannot be split into nonempty train and test sets"
            )));
        }
        let test = config
            .cells()
            .map(|(bi, qi)| {
                let mut reps: Vec<usize> = (0..runs).collect();
                reps.shuffle(&mut rng_from_seed(derive_seed(
                    split_seed,
                    &[bi as u64, qi as u64],
                )));
                let mut flags = vec![false; runs];
                for &r in &reps[..num_test] {
                    flags[r] = true;
                }
                flags
            })
            .collect();
        Ok(SplitManifest {
            split_seed,
            num_betas: config.betas.len(),
            num_qs: config.qs.len(),
            runs: config.runs,
            test,
        })
    }

    fn cell_index(&self, beta_index: usize, q_index: usize) -> usize {
        beta_index * self.num_qs + q_index
    }

    pub fn is_test(&self, beta_index: usize, q_index: usize, rep: u32) -> bool {
        self.test[self.cell_index(beta_index, q_index)][rep as usize]
    }

    pub fn num_test(&self) -> usize {
        self.test.iter().flatten().filter(|&&t| t).count()
    }

    pub fn num_train(&self) -> usize {
        self.test.iter().flatten().filter(|&&t| !t).count()
    }

    /// Checks that the manifest covers exactly the dataset's grid and runs.
    pub fn check_matches(&self, config: &SweepConfig) -> Result<()> {
        if self.num_betas != config.betas.len()
            || self.num_qs != config.qs.len()
            || self.runs != config.runs
        {
            return Err(Error::Estimation(format!(
                "split manifest covers {}×{} cells with {} runs, dataset has {}×{} with {}",
                self.num_betas,
                self.num_qs,
                self.runs,
                config.betas.len(),
                config.qs.len(),
                config.runs
            )));
        }
        Ok(())
    }

    /// Tab-separated: a `#` line with the split parameters, a header, then one
    /// row per (cell, rep) with set `train` or `test`.
    pub fn write_tsv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(
            out,
            "# split_seed={} num_betas={} num_qs={} runs={} test_fraction={TEST_FRACTION}",
            self.split_seed, self.num_betas, self.num_qs, self.runs
        )?;
        writeln!(out, "{SPLIT_HEADER}")?;
        for bi in 0..self.num_betas {
            for qi in 0..self.num_qs {
                for rep in 0..self.runs {
                    let set = if self.is_test(bi, qi, rep) {
                        "test"
                    } else {
                        "train"
                    };
                    writeln!(out, "{bi}\t{qi}\t{rep}\t{set}")?;
                }
            }
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(input: R) -> Result<Self> {
        let bad = |what: String| Error::Format(format!("split manifest: {what}"));
        let mut lines = input.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| bad("unexpected end of file".into()))?
                .map_err(|e| bad(e.to_string()))
        };
        let meta = next()?;
        let mut fields = std::collections::HashMap::new();
        for kv in meta.trim_start_matches('#').split_whitespace() {
            if let Some((k, v)) = kv.split_once('=') {
                fields.insert(k.to_string(), v.to_string());
            }
        }
        let get = |k: &str| -> Result<u64> {
            fields
                .get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad(format!("missing {k}")))
        };
        let (split_seed, num_betas, num_qs, runs) = (
            get("split_seed")?,
            get("num_betas")? as usize,
            get("num_qs")? as usize,
            get("runs")? as u32,
        );
        if next()? != SPLIT_HEADER {
            return Err(bad("unexpected header".into()));
        }
        let mut test = vec![vec![false; runs as usize]; num_betas * num_qs];
        for bi in 0..num_betas {
            for qi in 0..num_qs {
                for rep in 0..runs {
                    let line = next()?;
                    let cols: Vec<&str> = line.split('\t').collect();
                    let expected = [bi.to_string(), qi.to_string(), rep.to_string()];
                    if cols.len() != 4 || cols[..3] != expected {
                        return Err(bad(format!("unexpected row {line:?}")));
                    }
                    test[bi * num_qs + qi][rep as usize] = match cols[3] {
                        "test" => true,
                        "train" => false,
                        other => return Err(bad(format!("unknown set {other:?}"))),
                    };
                }
            }
        }
        Ok(SplitManifest {
            split_seed,
            num_betas,
            num_qs,
            runs,
            test,
        })
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf).expect("writing to memory");
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_tsv(std::io::BufReader::new(f))
    }
}

/// Held-out performance of one pooled regression model.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorReport {
    pub target: Target,
    pub regime: Regime,
    pub spec: FeatureSpec,
    pub num_features: usize,
    pub train_runs: usize,
    pub test_runs: usize,
    pub train_rmse: f64,
    pub test_rmse: f64,
    /// Test RMSE of predicting every run by the training mean.
    pub baseline_rmse: f64,
}

impl EstimatorReport {
    pub const COLUMNS: [&'static str; 10] = [
        "target",
        "regime",
        "horizon",
        "sources",
        "features",
        "train_runs",
        "test_runs",
        "train_rmse",
        "test_rmse",
        "baseline_rmse",
    ];

    pub fn fields(&self) -> Vec<String> {
        vec![
            self.target.to_string(),
            self.regime.to_string(),
            self.spec.horizon.to_string(),
            self.spec.sources.to_string(),
            self.num_features.to_string(),
            self.train_runs.to_string(),
            self.test_runs.to_string(),
            format!("{:.6}", self.train_rmse),
            format!("{:.6}", self.test_rmse),
            format!("{:.6}", self.baseline_rmse),
        ]
    }
}

pub fn write_report_table<W: Write>(
    out: &mut W,
    reports: &[EstimatorReport],
) -> std::io::Result<()> {
    writeln!(out, "{}", EstimatorReport::COLUMNS.join("\t"))?;
    for r in reports {
        writeln!(out, "{}", r.fields().join("\t"))?;
    }
    Ok(())
}

fn rmse(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (sum, count) = pairs.fold((0.0, 0usize), |(s, c), (p, t)| (s + (p - t).powi(2), c + 1));
    (sum / count as f64).sqrt()
}

/// Feature rows of one spec, split by the manifest.
#[derive(Default)]
struct Design {
    train: Vec<Vec<f64>>,
    test: Vec<Vec<f64>>,
}

/// Fits one pooled model per (target, spec) on the training runs of all
/// cells and scores it on the test runs. Cells are pulled one at a time from
/// `load`, so only the feature rows are held in memory.
pub fn evaluate_with<F>(
    config: &SweepConfig,
    mut load: F,
    targets: &[Target],
    specs: &[FeatureSpec],
    split: &SplitManifest,
    ridge: f64,
    exec: Execution,
) -> Result<Vec<EstimatorReport>>
where
    F: FnMut(usize, usize) -> Result<Cell>,
{
    split.check_matches(config)?;
    if specs.is_empty() || targets.is_empty() {
        return Err(Error::Estimation("nothing to evaluate".into()));
    }
    let mut designs: Vec<Design> = specs.iter().map(|_| Design::default()).collect();
    // (β, q) of every row; the target picks one of them per report.
    let mut train_cells: Vec<(f64, f64)> = Vec::new();
    let mut test_cells: Vec<(f64, f64)> = Vec::new();
    for (bi, qi) in config.cells() {
        let cell = load(bi, qi)?;
        let rows = exec.map(cell.runs.len(), |i| -> Result<Vec<Vec<f64>>> {
            let run = &cell.runs[i];
            specs
                .iter()
                .map(|spec| build_features(run.prefix(spec.horizon)?, spec))
                .collect()
        });
        for (run, per_spec) in cell.runs.iter().zip(rows) {
            let test = split.is_test(bi, qi, run.rep);
            for (design, features) in designs.iter_mut().zip(per_spec?) {
                if test {
                    design.test.push(features);
                } else {
                    design.train.push(features);
                }
            }
            if test {
                test_cells.push((cell.beta, cell.q));
            } else {
                train_cells.push((cell.beta, cell.q));
            }
        }
    }

    let mut reports = Vec::new();
    for &target in targets {
        let train_y: Vec<f64> = train_cells
            .iter()
            .map(|&(b, q)| target.select(b, q))
            .collect();
        let test_y: Vec<f64> = test_cells
            .iter()
            .map(|&(b, q)| target.select(b, q))
            .collect();
        let train_mean = train_y.iter().sum::<f64>() / train_y.len() as f64;
        let baseline_rmse = rmse(test_y.iter().map(|&t| (train_mean, t)));
        for (spec, design) in specs.iter().zip(&designs) {
            let fit = fit_ols(&design.train, &train_y, ridge, exec)?;
            let train_rmse = rmse(
                design
                    .train
                    .iter()
                    .zip(&train_y)
                    .map(|(x, &t)| (fit.predict(x), t)),
            );
            let test_rmse = rmse(
                design
                    .test
                    .iter()
                    .zip(&test_y)
                    .map(|(x, &t)| (fit.predict(x), t)),
            );
            reports.push(EstimatorReport {
                target,
                regime: config.regime,
                spec: *spec,
                num_features: spec.num_features(),
                train_runs: design.train.len(),
                test_runs: design.test.len(),
                train_rmse,
                test_rmse,
                baseline_rmse,
            });
        }
    }
    Ok(reports)
}

/// [`evaluate_with`] over a stored dataset.
pub fn evaluate(
    dataset: &Dataset,
    targets: &[Target],
    specs: &[FeatureSpec],
    split: &SplitManifest,
    ridge: f64,
    exec: Execution,
) -> Result<Vec<EstimatorReport>> {
    evaluate_with(
        dataset.config(),
        |bi, qi| dataset.cell(bi, qi),
        targets,
        specs,
        split,
        ridge,
        exec,
    )
}

/// Full-information and single-source specs over the given horizons.
pub fn standard_specs(horizons: &[usize], sources: &[SourceSet]) -> Result<Vec<FeatureSpec>> {
    let mut out = Vec::new();
    for &h in horizons {
        for &s in sources {
            out.push(FeatureSpec::new(h, s)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(runs: u32) -> SweepConfig {
        SweepConfig {
            betas: vec![0.2, 0.5, 0.8],
            qs: vec![0.0, 0.5],
            runs,
            n: 20,
            timesteps: 5,
            ..SweepConfig::default()
        }
    }

    #[test]
    fn split_sizes_and_determinism() {
        let cfg = small_config(10);
        let s = SplitManifest::new(&cfg, 42).unwrap();
        assert_eq!(s.num_test(), 6 * 2);
        assert_eq!(s.num_train(), 6 * 8);
        assert_eq!(s, SplitManifest::new(&cfg, 42).unwrap());
        assert_ne!(s, SplitManifest::new(&cfg, 43).unwrap());
        for (bi, qi) in cfg.cells() {
            assert_eq!((0..10).filter(|&r| s.is_test(bi, qi, r)).count(), 2);
        }
    }

    #[test]
    fn split_round_trip() {
        let cfg = small_config(5);
        let s = SplitManifest::new(&cfg, 7).unwrap();
        let mut buf = Vec::new();
        s.write_tsv(&mut buf).unwrap();
        assert_eq!(SplitManifest::read_tsv(&buf[..]).unwrap(), s);
        let text = String::from_utf8(buf).unwrap().replace("train", "trian");
        assert!(SplitManifest::read_tsv(text.as_bytes()).is_err());
    }

    #[test]
    fn split_needs_enough_runs() {
        assert!(SplitManifest::new(&small_config(1), 0).is_err());
        assert!(SplitManifest::new(&small_config(2), 0).is_err());
        assert!(SplitManifest::new(&small_config(3), 0).is_ok());
    }

    #[test]
    fn mismatched_split_is_rejected() {
        let s = SplitManifest::new(&small_config(5), 0).unwrap();
        assert!(s.check_matches(&small_config(10)).is_err());
    }

    #[test]
    fn target_parsing() {
        assert_eq!("Beta".parse::<Target>().unwrap(), Target::Beta);
        assert_eq!("q".parse::<Target>().unwrap(), Target::Q);
        assert!("r1".parse::<Target>().is_err());
    }
}

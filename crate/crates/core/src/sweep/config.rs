use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, Regime};
use crate::seed::derive_seed;
use crate::sim::{RunMode, RunOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    /// Fixed-length trajectories.
    Dataset,
    /// Run until absorbed or `step_cap` micro-steps.
    LongRun,
}

/// A campaign over a (β, q) grid. Every field has a default, so a config
/// file only needs the keys it changes.
///
/// ```toml
/// regime = "nonlinear"
/// betas = [0.2, 0.8]
/// qs = [0.1, 0.8]
/// runs = 200
/// mode = "long-run"
/// step_cap = 200000
/// n = 200
/// master_seed = 7
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub regime: Regime,
    pub betas: Vec<f64>,
    pub qs: Vec<f64>,
    /// Runs per grid cell.
    pub runs: u32,
    pub mode: ModeKind,
    /// Trajectory length in dataset mode.
    pub timesteps: u32,
    /// Micro-step budget in long-run mode.
    pub step_cap: u64,
    pub n: usize,
    pub household_size: usize,
    /// Defaults to `n / household_size`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_workplaces: Option<usize>,
    pub lambda: f64,
    /// Initial A-count; defaults to `n / 2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_a: Option<usize>,
    pub master_seed: u64,
    /// Record the initial state as `t = 0`.
    pub include_t0: bool,
    /// Store per-timestep records (summaries are always stored).
    pub keep_records: bool,
    pub tau_threshold: f64,
}

pub fn standard_betas() -> Vec<f64> {
    (1..=9).map(|i| f64::from(i) / 10.0).collect()
}

pub fn standard_qs() -> Vec<f64> {
    (0..=9).map(|i| f64::from(i) / 10.0).collect()
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self::standard_dataset(Regime::Linear)
    }
}

impl SweepConfig {
    /// The estimation dataset: 90 cells, 500 runs of 300 timesteps, n = 1000.
    pub fn standard_dataset(regime: Regime) -> Self {
        SweepConfig {
            regime,
            betas: standard_betas(),
            qs: standard_qs(),
            runs: 500,
            mode: ModeKind::Dataset,
            timesteps: 300,
            step_cap: 1_000_000,
            n: 1000,
            household_size: ModelParams::DEFAULT_HOUSEHOLD_SIZE,
            num_workplaces: None,
            lambda: ModelParams::DEFAULT_LAMBDA,
            num_a: None,
            master_seed: 0,
            include_t0: false,
            keep_records: true,
            tau_threshold: RunOptions::DEFAULT_TAU_THRESHOLD,
        }
    }

    /// Runs stopped at absorption or after 10^6 micro-steps.
    pub fn standard_long_run(regime: Regime) -> Self {
        SweepConfig {
            mode: ModeKind::LongRun,
            keep_records: false,
            ..Self::standard_dataset(regime)
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn num_workplaces(&self) -> usize {
        self.num_workplaces
            .unwrap_or(self.n / self.household_size.max(1))
    }

    pub fn num_a(&self) -> usize {
        self.num_a.unwrap_or(self.n / 2)
    }

    pub fn num_cells(&self) -> usize {
        self.betas.len() * self.qs.len()
    }

    pub fn total_runs(&self) -> u64 {
        self.num_cells() as u64 * u64::from(self.runs)
    }

    /// Grid cells in storage order: β-major, then q.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.betas.len()).flat_map(move |bi| (0..self.qs.len()).map(move |qi| (bi, qi)))
    }

    pub fn params(&self, beta_index: usize, q_index: usize) -> ModelParams {
        let (r1, r2) = self.regime.thresholds();
        ModelParams {
            beta: self.betas[beta_index],
            q: self.qs[q_index],
            r1,
            r2,
            lambda: self.lambda,
            n: self.n,
            household_size: self.household_size,
            num_workplaces: self.num_workplaces(),
        }
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            mode: match self.mode {
                ModeKind::Dataset => RunMode::Dataset {
                    timesteps: self.timesteps,
                },
                ModeKind::LongRun => RunMode::LongRun {
                    step_cap: self.step_cap,
                },
            },
            include_t0: self.include_t0,
            keep_records: self.keep_records,
            tau_threshold: self.tau_threshold,
        }
    }

    /// Seed of run `rep` in cell `(beta_index, q_index)`.
    pub fn run_seed(&self, beta_index: usize, q_index: usize, rep: u32) -> u64 {
        derive_seed(
            self.master_seed,
            &[
                self.regime.id(),
                beta_index as u64,
                q_index as u64,
                u64::from(rep),
            ],
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.betas.is_empty() || self.qs.is_empty() {
            return Err(Error::Config("the β and q grids must be nonempty".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs per cell must be positive".into()));
        }
        if self.household_size == 0 {
            return Err(Error::Config("household_size must be positive".into()));
        }
        if self.num_a() > self.n {
            return Err(Error::Config(format!(
                "num_a = {} exceeds n = {}",
                self.num_a(),
                self.n
            )));
        }
        if !(self.tau_threshold > 0.0 && self.tau_threshold < 1.0) {
            return Err(Error::Config("tau_threshold must lie in (0, 1)".into()));
        }
        for (bi, qi) in self.cells() {
            self.params(bi, qi).validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_grid() {
        let c = SweepConfig::standard_dataset(Regime::Nonlinear);
        assert_eq!(c.num_cells(), 90);
        assert_eq!(c.total_runs(), 45_000);
        assert_eq!(c.num_workplaces(), 200);
        assert_eq!(c.num_a(), 500);
        assert_eq!(c.betas[8], 0.9);
        assert_eq!(c.qs[0], 0.0);
        c.validate().unwrap();
        assert!(matches!(
            SweepConfig::standard_long_run(Regime::Linear)
                .run_options()
                .mode,
            RunMode::LongRun {
                step_cap: 1_000_000
            }
        ));
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let c = SweepConfig::standard_dataset(Regime::Nonlinear);
        assert_eq!(SweepConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
        let partial =
            SweepConfig::from_toml_str("regime = \"nonlinear\"\nruns = 3\nn = 50\n").unwrap();
        assert_eq!(partial.runs, 3);
        assert_eq!(partial.regime, Regime::Nonlinear);
        assert_eq!(partial.timesteps, 300);
        assert!(SweepConfig::from_toml_str("runz = 3").is_err());
    }

    #[test]
    fn seeds_differ_across_every_key() {
        let c = SweepConfig::standard_dataset(Regime::Linear);
        let base = c.run_seed(1, 2, 3);
        assert_ne!(base, c.run_seed(2, 2, 3));
        assert_ne!(base, c.run_seed(1, 3, 3));
        assert_ne!(base, c.run_seed(1, 2, 4));
        let other = SweepConfig::standard_dataset(Regime::Nonlinear);
        assert_ne!(base, other.run_seed(1, 2, 3));
    }

    #[test]
    fn validation() {
        let mut c = SweepConfig::standard_dataset(Regime::Linear);
        c.qs.clear();
        assert!(c.validate().is_err());
        let mut c = SweepConfig::standard_dataset(Regime::Linear);
        c.n = 1001;
        assert!(c.validate().is_err());
        let mut c = SweepConfig::standard_dataset(Regime::Linear);
        c.betas = vec![0.0];
        assert!(c.validate().is_err());
    }
}

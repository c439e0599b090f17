//! Single trajectories.
//!
//! A timestep is `n` micro-steps. In dataset mode a run lasts a fixed number
//! of timesteps; in long-run mode it lasts up to a micro-step budget and stops
//! at the first timestep boundary where the state is absorbing. Because an
//! absorbing state never changes, the absorption step is recovered exactly as
//! the micro-step of the last change.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{ModelParams, SimState, StepKind};
use crate::seed::{rng_from_seed, SimRng};
use crate::stats::{components, first_passage, homophily_index, size_overflow, snapshot, Layer};
use crate::stats::{RunSummary, StatRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum RunMode {
    /// A fixed number of timesteps, no early stop.
    Dataset { timesteps: u32 },
    /// At most `step_cap` micro-steps, stopping once absorbed.
    LongRun { step_cap: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub mode: RunMode,
    /// Emit a record for the initial state (always done when `timesteps == 0`).
    pub include_t0: bool,
    /// Keep per-timestep records; summaries are produced either way.
    pub keep_records: bool,
    /// Homophily level whose first strict crossing defines `tau_hh` / `tau_wp`.
    pub tau_threshold: f64,
}

impl RunOptions {
    pub const DEFAULT_TAU_THRESHOLD: f64 = 0.4;

    pub fn dataset(timesteps: u32) -> Self {
        RunOptions {
            mode: RunMode::Dataset { timesteps },
            include_t0: false,
            keep_records: true,
            tau_threshold: Self::DEFAULT_TAU_THRESHOLD,
        }
    }

    pub fn long_run(step_cap: u64) -> Self {
        RunOptions {
            mode: RunMode::LongRun { step_cap },
            include_t0: false,
            keep_records: false,
            tau_threshold: Self::DEFAULT_TAU_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub seed: u64,
    pub records: Vec<StatRecord>,
    pub summary: RunSummary,
}

/// Builds a balanced-or-given initial state from `seed` and runs it.
pub fn run_trajectory(
    params: &ModelParams,
    num_a: usize,
    seed: u64,
    opts: &RunOptions,
) -> Result<Trajectory> {
    let mut rng = rng_from_seed(seed);
    let state = SimState::random(params, num_a, &mut rng)?;
    let (records, summary, _) = evolve(state, params, &mut rng, opts);
    Ok(Trajectory {
        seed,
        records,
        summary,
    })
}

/// Runs the dynamics from `state` and returns the records, the summary and
/// the final state.
pub fn evolve(
    mut state: SimState,
    params: &ModelParams,
    rng: &mut SimRng,
    opts: &RunOptions,
) -> (Vec<StatRecord>, RunSummary, SimState) {
    let n = state.n() as u64;
    let (budget, stop_early) = match opts.mode {
        RunMode::Dataset { timesteps } => (u64::from(timesteps) * n, false),
        RunMode::LongRun { step_cap } => (step_cap, true),
    };
    let want_t0 = opts.include_t0 || budget == 0;

    let mut records = Vec::new();
    let mut hom_hh = vec![homophily_index(&state, Layer::Households)];
    let mut hom_wp = vec![homophily_index(&state, Layer::Workplaces)];
    let mut overflow = size_overflow(&state);
    if opts.keep_records && want_t0 {
        records.push(snapshot(&state, 0, 0, 0));
    }

    let mut executed = 0u64;
    let mut last_change = 0u64;
    let mut absorbed = stop_early && state.is_absorbing(params);
    let mut t = 0u32;
    while !absorbed && executed < budget {
        let block = n.min(budget - executed);
        let (mut moves, mut flips) = (0u32, 0u32);
        for _ in 0..block {
            executed += 1;
            match state.micro_step(params, rng).kind {
                StepKind::NoChange => continue,
                StepKind::OpinionFlipped => flips += 1,
                StepKind::MovedWorkplace { .. } => moves += 1,
            }
            last_change = executed;
        }
        t += 1;
        hom_hh.push(homophily_index(&state, Layer::Households));
        hom_wp.push(homophily_index(&state, Layer::Workplaces));
        overflow |= size_overflow(&state);
        if opts.keep_records {
            records.push(snapshot(&state, t, moves, flips));
        }
        if stop_early {
            absorbed = state.is_absorbing(params);
        }
    }
    if !stop_early {
        absorbed = state.is_absorbing(params);
    }

    let summary = RunSummary {
        final_n_a: state.num_a() as u32,
        steps: if absorbed { last_change } else { executed },
        absorbed,
        tau_hh: first_passage(&hom_hh, opts.tau_threshold).map(|t| t as u32),
        tau_wp: first_passage(&hom_wp, opts.tau_threshold).map(|t| t as u32),
        homophily_hh: *hom_hh.last().expect("series holds the initial value"),
        homophily_wp: *hom_wp.last().expect("series holds the initial value"),
        component_sizes: components(&state).into_iter().map(|c| c as u32).collect(),
        size_overflow: overflow,
    };
    (records, summary, state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    #[test]
    fn zero_timesteps_gives_initial_snapshot() {
        let p = ModelParams::linear(100, 0.5, 0.5);
        let tr = run_trajectory(&p, 50, 1, &RunOptions::dataset(0)).unwrap();
        assert_eq!(tr.records.len(), 1);
        assert_eq!(tr.records[0].t, 0);
        assert_eq!(tr.records[0].n_a, 50);
    }

    #[test]
    fn dataset_mode_record_count() {
        let p = ModelParams::nonlinear(50, 0.5, 0.5);
        let tr = run_trajectory(&p, 25, 1, &RunOptions::dataset(30)).unwrap();
        assert_eq!(tr.records.len(), 30);
        assert_eq!(tr.records.first().unwrap().t, 1);
        assert_eq!(tr.records.last().unwrap().t, 30);
        let mut with_t0 = RunOptions::dataset(30);
        with_t0.include_t0 = true;
        let tr0 = run_trajectory(&p, 25, 1, &with_t0).unwrap();
        assert_eq!(tr0.records.len(), 31);
        assert_eq!(&tr0.records[1..], &tr.records[..]);
    }

    #[test]
    fn trajectories_are_deterministic() {
        let p = ModelParams::linear(100, 0.3, 0.6);
        let a = run_trajectory(&p, 50, 77, &RunOptions::dataset(20)).unwrap();
        let b = run_trajectory(&p, 50, 77, &RunOptions::dataset(20)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn counters_match_state_differences() {
        let p = ModelParams::linear(60, 0.4, 0.7);
        let mut rng = rng_from_seed(5);
        let mut state = SimState::random(&p, 30, &mut rng).unwrap();
        for t in 1..=20 {
            let before = state.clone();
            let opts = RunOptions::dataset(1);
            let (records, _, after) = evolve(state, &p, &mut rng, &opts);
            let flips = (0..60)
                .filter(|&v| before.opinion(v) != after.opinion(v))
                .count();
            let moved = (0..60)
                .filter(|&v| before.workplace_of(v) != after.workplace_of(v))
                .count();
            // A vertex may flip twice, or move and come back, within one timestep;
            // the counters bound the net differences and share their parity.
            let r = &records[0];
            assert!(
                r.n_ch as usize >= flips && (r.n_ch as usize - flips).is_multiple_of(2),
                "t={t}"
            );
            assert!(r.m_wp as usize >= moved, "t={t}");
            state = after;
        }
    }

    #[test]
    fn long_run_stops_at_absorption() {
        let p = ModelParams::nonlinear(20, 0.9, 0.9);
        let tr = run_trajectory(&p, 10, 3, &RunOptions::long_run(1_000_000)).unwrap();
        assert!(tr.summary.absorbed);
        assert!(tr.summary.steps < 1_000_000);
        assert!(tr.records.is_empty());
    }

    #[test]
    fn long_run_respects_cap() {
        let p = ModelParams::linear(200, 0.1, 0.0);
        let mut opts = RunOptions::long_run(1_050);
        opts.keep_records = true;
        let tr = run_trajectory(&p, 100, 3, &opts).unwrap();
        assert!(!tr.summary.absorbed);
        assert_eq!(tr.summary.steps, 1_050);
        // Five full timesteps plus a partial one.
        assert_eq!(tr.records.len(), 6);
    }

    #[test]
    fn absorbed_at_start() {
        let p = ModelParams::linear(20, 0.5, 0.5);
        let tr = run_trajectory(&p, 20, 3, &RunOptions::long_run(1000)).unwrap();
        assert!(tr.summary.absorbed);
        assert_eq!(tr.summary.steps, 0);
        assert_eq!(tr.summary.tau_hh, Some(0));
    }
}

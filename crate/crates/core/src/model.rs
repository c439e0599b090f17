//! The two-layer hypergraph state and its stochastic update rule.
//!
//! Households are the fixed consecutive blocks `[0, s), [s, 2s), …` of size
//! `s = household_size`; workplaces are a mutable partition of the vertices.
//! Per-group opinion counts are cached and updated incrementally.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// Slack used when comparing a group proportion against a threshold.
///
/// Proportions are ratios of small integers, so a value that equals a
/// threshold mathematically can land one ulp on either side in floating point.
/// Differences at or below this slack count as "not below the threshold".
pub const THRESHOLD_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Opinion {
    A,
    B,
}

impl Opinion {
    pub fn other(self) -> Opinion {
        match self {
            Opinion::A => Opinion::B,
            Opinion::B => Opinion::A,
        }
    }

    pub fn is_a(self) -> bool {
        self == Opinion::A
    }
}

impl fmt::Display for Opinion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Opinion::A => "A",
            Opinion::B => "B",
        })
    }
}

/// Threshold presets used throughout the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `r1 = r2 = 1`: change probabilities are linear in the proportions.
    Linear,
    /// `r1 = r2 = 0.5`: only minority vertices can change.
    Nonlinear,
}

impl Regime {
    pub fn thresholds(self) -> (f64, f64) {
        match self {
            Regime::Linear => (1.0, 1.0),
            Regime::Nonlinear => (0.5, 0.5),
        }
    }

    /// Stable numeric id used in seed derivation.
    pub fn id(self) -> u64 {
        match self {
            Regime::Linear => 0,
            Regime::Nonlinear => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::Linear => "linear",
            Regime::Nonlinear => "nonlinear",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" | "lin" => Ok(Regime::Linear),
            "nonlinear" | "nonlin" => Ok(Regime::Nonlinear),
            other => Err(Error::Config(format!("unknown regime `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Opinion change scale.
    pub beta: f64,
    /// Workplace change scale.
    pub q: f64,
    /// Opinion change threshold.
    pub r1: f64,
    /// Workplace change threshold.
    pub r2: f64,
    /// Weight of the workplace in the blended support.
    pub lambda: f64,
    pub n: usize,
    pub household_size: usize,
    pub num_workplaces: usize,
}

impl ModelParams {
    pub const DEFAULT_HOUSEHOLD_SIZE: usize = 5;
    pub const DEFAULT_LAMBDA: f64 = 0.5;

    /// Standard geometry (households and initial workplaces of five, `λ = 0.5`)
    /// with the regime's thresholds.
    pub fn new(regime: Regime, n: usize, beta: f64, q: f64) -> Self {
        let (r1, r2) = regime.thresholds();
        ModelParams {
            beta,
            q,
            r1,
            r2,
            lambda: Self::DEFAULT_LAMBDA,
            n,
            household_size: Self::DEFAULT_HOUSEHOLD_SIZE,
            num_workplaces: n / Self::DEFAULT_HOUSEHOLD_SIZE,
        }
    }

    pub fn linear(n: usize, beta: f64, q: f64) -> Self {
        Self::new(Regime::Linear, n, beta, q)
    }

    pub fn nonlinear(n: usize, beta: f64, q: f64) -> Self {
        Self::new(Regime::Nonlinear, n, beta, q)
    }

    pub fn num_households(&self) -> usize {
        self.n / self.household_size
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |x: f64| x.is_finite() && (0.0..=1.0).contains(&x);
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParams(what.to_string()))
            }
        };
        check(
            in_unit(self.beta) && self.beta > 0.0,
            "beta must lie in (0, 1]",
        )?;
        check(in_unit(self.q), "q must lie in [0, 1]")?;
        check(in_unit(self.r1) && self.r1 > 0.0, "r1 must lie in (0, 1]")?;
        check(in_unit(self.r2) && self.r2 > 0.0, "r2 must lie in (0, 1]")?;
        check(in_unit(self.lambda), "lambda must lie in [0, 1]")?;
        check(self.n > 0, "n must be positive")?;
        check(self.household_size > 0, "household size must be positive")?;
        check(
            self.n.is_multiple_of(self.household_size),
            "n must be divisible by the household size",
        )?;
        check(
            self.num_workplaces > 0,
            "number of workplaces must be positive",
        )?;
        check(
            self.n.is_multiple_of(self.num_workplaces),
            "n must be divisible by the number of workplaces",
        )
    }
}

/// Blended own-opinion support `(h + λ·w) / (1 + λ)`.
pub fn weighted_average(h: f64, w: f64, lambda: f64) -> f64 {
    (h + lambda * w) / (1.0 + lambda)
}

/// `threshold - value` when `value` is strictly below `threshold`.
fn shortfall(threshold: f64, value: f64) -> Option<f64> {
    let gap = threshold - value;
    (gap > THRESHOLD_SLACK).then_some(gap)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    OpinionFlipped,
    MovedWorkplace { from: usize, to: usize },
    NoChange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub vertex: usize,
    pub kind: StepKind,
}

/// Per-vertex change probabilities of one micro-step, given the vertex is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexRates {
    /// Probability of an opinion flip.
    pub flip: f64,
    /// Probability of a workplace move, conditional on no flip.
    pub relocate: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SimState {
    opinions: Vec<Opinion>,
    workplace_of: Vec<u32>,
    household_size: usize,
    household_a: Vec<u32>,
    workplace_a: Vec<u32>,
    workplace_size: Vec<u32>,
    num_a: usize,
}

impl SimState {
    /// Builds a state from explicit assignments. Households are the fixed
    /// consecutive blocks; workplaces may be of any size, including empty.
    pub fn from_assignment(
        household_size: usize,
        num_workplaces: usize,
        opinions: Vec<Opinion>,
        workplace_of: Vec<usize>,
    ) -> Result<Self> {
        let n = opinions.len();
        if household_size == 0 || n == 0 || !n.is_multiple_of(household_size) {
            return Err(Error::InvalidParams(format!(
                "{n} vertices cannot be split into households of {household_size}"
            )));
        }
        if workplace_of.len() != n {
            return Err(Error::InvalidParams(
                "workplace assignment length differs from vertex count".into(),
            ));
        }
        if num_workplaces == 0 || workplace_of.iter().any(|&w| w >= num_workplaces) {
            return Err(Error::InvalidParams("workplace index out of range".into()));
        }
        let mut household_a = vec![0u32; n / household_size];
        let mut workplace_a = vec![0u32; num_workplaces];
        let mut workplace_size = vec![0u32; num_workplaces];
        for (v, (&op, &wp)) in opinions.iter().zip(&workplace_of).enumerate() {
            workplace_size[wp] += 1;
            if op.is_a() {
                household_a[v / household_size] += 1;
                workplace_a[wp] += 1;
            }
        }
        let num_a = opinions.iter().filter(|o| o.is_a()).count();
        Ok(SimState {
            opinions,
            workplace_of: workplace_of.into_iter().map(|w| w as u32).collect(),
            household_size,
            household_a,
            workplace_a,
            workplace_size,
            num_a,
        })
    }

    /// Random initial state: `num_a` opinions placed uniformly without
    /// replacement, workplaces a uniformly random balanced partition.
    pub fn random<R: Rng + ?Sized>(
        params: &ModelParams,
        num_a: usize,
        rng: &mut R,
    ) -> Result<Self> {
        params.validate()?;
        let n = params.n;
        if num_a > n {
            return Err(Error::InvalidParams(format!(
                "cannot place {num_a} A-opinions on {n} vertices"
            )));
        }
        let mut opinions = vec![Opinion::B; n];
        for v in rand::seq::index::sample(rng, n, num_a) {
            opinions[v] = Opinion::A;
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let per_workplace = n / params.num_workplaces;
        let mut workplace_of = vec![0usize; n];
        for (slot, &v) in order.iter().enumerate() {
            workplace_of[v] = slot / per_workplace;
        }
        Self::from_assignment(
            params.household_size,
            params.num_workplaces,
            opinions,
            workplace_of,
        )
    }

    pub fn n(&self) -> usize {
        self.opinions.len()
    }

    pub fn household_size(&self) -> usize {
        self.household_size
    }

    pub fn num_households(&self) -> usize {
        self.household_a.len()
    }

    pub fn num_workplaces(&self) -> usize {
        self.workplace_size.len()
    }

    pub fn num_a(&self) -> usize {
        self.num_a
    }

    pub fn opinion(&self, v: usize) -> Opinion {
        self.opinions[v]
    }

    pub fn opinions(&self) -> &[Opinion] {
        &self.opinions
    }

    pub fn household_of(&self, v: usize) -> usize {
        v / self.household_size
    }

    pub fn workplace_of(&self, v: usize) -> usize {
        self.workplace_of[v] as usize
    }

    pub fn household_a(&self, h: usize) -> usize {
        self.household_a[h] as usize
    }

    pub fn workplace_a(&self, w: usize) -> usize {
        self.workplace_a[w] as usize
    }

    pub fn workplace_size(&self, w: usize) -> usize {
        self.workplace_size[w] as usize
    }

    pub fn workplace_sizes(&self) -> &[u32] {
        &self.workplace_size
    }

    /// Members of workplace `w`, in vertex order.
    pub fn workplace_members(&self, w: usize) -> Vec<usize> {
        (0..self.n())
            .filter(|&v| self.workplace_of(v) == w)
            .collect()
    }

    fn own_in_household(&self, v: usize) -> u32 {
        let a = self.household_a[self.household_of(v)];
        match self.opinions[v] {
            Opinion::A => a,
            Opinion::B => self.household_size as u32 - a,
        }
    }

    fn own_in_workplace(&self, opinion: Opinion, w: usize) -> u32 {
        match opinion {
            Opinion::A => self.workplace_a[w],
            Opinion::B => self.workplace_size[w] - self.workplace_a[w],
        }
    }

    /// Proportions `(h, w)` of the vertex's own opinion in its household and
    /// workplace, the vertex itself included.
    pub fn group_proportion(&self, v: usize) -> (f64, f64) {
        let wp = self.workplace_of(v);
        let h = f64::from(self.own_in_household(v)) / self.household_size as f64;
        let w = f64::from(self.own_in_workplace(self.opinions[v], wp))
            / f64::from(self.workplace_size[wp]);
        (h, w)
    }

    /// Workplaces `v` may move to: those other than its own where its opinion
    /// holds a strict majority before it joins, or every other workplace when
    /// there is none. Empty when only one workplace exists.
    pub fn candidate_workplaces(&self, v: usize) -> Vec<usize> {
        let current = self.workplace_of(v);
        let opinion = self.opinions[v];
        let others = (0..self.num_workplaces()).filter(|&w| w != current);
        let majority: Vec<usize> = others
            .clone()
            .filter(|&w| self.holds_majority(opinion, w))
            .collect();
        if majority.is_empty() {
            others.collect()
        } else {
            majority
        }
    }

    fn holds_majority(&self, opinion: Opinion, w: usize) -> bool {
        2 * self.own_in_workplace(opinion, w) > self.workplace_size[w]
    }

    /// Uniform draw from [`Self::candidate_workplaces`] without allocating.
    fn draw_target<R: Rng + ?Sized>(&self, v: usize, rng: &mut R) -> Option<usize> {
        let current = self.workplace_of(v);
        let opinion = self.opinions[v];
        let num_w = self.num_workplaces();
        if num_w < 2 {
            return None;
        }
        let count = (0..num_w)
            .filter(|&w| w != current && self.holds_majority(opinion, w))
            .count();
        if count > 0 {
            let k = rng.random_range(0..count);
            (0..num_w)
                .filter(|&w| w != current && self.holds_majority(opinion, w))
                .nth(k)
        } else {
            let k = rng.random_range(0..num_w - 1);
            Some(if k >= current { k + 1 } else { k })
        }
    }

    /// Exact flip and move probabilities of `v` if it is the chosen vertex.
    pub fn vertex_rates(&self, v: usize, params: &ModelParams) -> VertexRates {
        let (h, w) = self.group_proportion(v);
        let a = weighted_average(h, w, params.lambda);
        let flip = shortfall(params.r1, a).map_or(0.0, |gap| params.beta * gap);
        let relocate = if self.num_workplaces() > 1 {
            shortfall(params.r2, w).map_or(0.0, |gap| params.q * gap)
        } else {
            0.0
        };
        VertexRates { flip, relocate }
    }

    /// One micro-step: choose a vertex uniformly, try an opinion flip, and if
    /// the opinion did not change try a workplace move.
    pub fn micro_step<R: Rng + ?Sized>(
        &mut self,
        params: &ModelParams,
        rng: &mut R,
    ) -> StepOutcome {
        let v = rng.random_range(0..self.n());
        let (h, w) = self.group_proportion(v);
        let a = weighted_average(h, w, params.lambda);

        if let Some(gap) = shortfall(params.r1, a) {
            if rng.random::<f64>() < params.beta * gap {
                self.flip(v);
                return StepOutcome {
                    vertex: v,
                    kind: StepKind::OpinionFlipped,
                };
            }
        }

        if params.q > 0.0 {
            if let Some(gap) = shortfall(params.r2, w) {
                if rng.random::<f64>() < params.q * gap {
                    if let Some(to) = self.draw_target(v, rng) {
                        let from = self.workplace_of(v);
                        self.relocate(v, to);
                        return StepOutcome {
                            vertex: v,
                            kind: StepKind::MovedWorkplace { from, to },
                        };
                    }
                }
            }
        }

        StepOutcome {
            vertex: v,
            kind: StepKind::NoChange,
        }
    }

    fn flip(&mut self, v: usize) {
        let hh = self.household_of(v);
        let wp = self.workplace_of(v);
        match self.opinions[v] {
            Opinion::A => {
                self.household_a[hh] -= 1;
                self.workplace_a[wp] -= 1;
                self.num_a -= 1;
            }
            Opinion::B => {
                self.household_a[hh] += 1;
                self.workplace_a[wp] += 1;
                self.num_a += 1;
            }
        }
        self.opinions[v] = self.opinions[v].other();
    }

    fn relocate(&mut self, v: usize, to: usize) {
        let from = self.workplace_of(v);
        let is_a = u32::from(self.opinions[v].is_a());
        self.workplace_size[from] -= 1;
        self.workplace_a[from] -= is_a;
        self.workplace_size[to] += 1;
        self.workplace_a[to] += is_a;
        self.workplace_of[v] = to as u32;
    }

    /// True when no vertex can change: every blended support reaches `r1`,
    /// and, when moves are possible at all (`q > 0` and more than one
    /// workplace), every workplace proportion reaches `r2`.
    pub fn is_absorbing(&self, params: &ModelParams) -> bool {
        let moves_possible = params.q > 0.0 && self.num_workplaces() > 1;
        (0..self.n()).all(|v| {
            let (h, w) = self.group_proportion(v);
            let a = weighted_average(h, w, params.lambda);
            shortfall(params.r1, a).is_none()
                && !(moves_possible && shortfall(params.r2, w).is_some())
        })
    }

    /// Checks every cached count against a recount from the assignment vectors.
    pub fn counts_consistent(&self) -> bool {
        match Self::from_assignment(
            self.household_size,
            self.num_workplaces(),
            self.opinions.clone(),
            self.workplace_of.iter().map(|&w| w as usize).collect(),
        ) {
            Ok(fresh) => fresh == *self,
            Err(_) => false,
        }
    }

    /// The same structure with every opinion swapped.
    pub fn swapped(&self) -> SimState {
        Self::from_assignment(
            self.household_size,
            self.num_workplaces(),
            self.opinions.iter().map(|o| o.other()).collect(),
            self.workplace_of.iter().map(|&w| w as usize).collect(),
        )
        .expect("swapping opinions preserves validity")
    }
}

/// Seeded construction of a random initial state.
pub fn build_initial_state(params: &ModelParams, num_a: usize, seed: u64) -> Result<SimState> {
    SimState::random(params, num_a, &mut rng_from_seed(seed))
}

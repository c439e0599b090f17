//! Exhaustive analysis of the ten-vertex system: two households of five and
//! two workplaces.
//!
//! A [`ToyState`] packs the configuration into 20 bits: bit `v` (0..10) is set
//! when vertex `v` holds opinion A, bit `10 + v` is vertex `v`'s workplace.
//! Two states are identified when one is mapped onto the other by swapping the
//! opinions, swapping the households (vertex `v ↔ (v + 5) mod 10`) or
//! relabelling the workplaces; [`canonical_class`] picks the smallest encoding
//! of that 8-element orbit.
//!
//! Coarser than canonical classes are *structures*: the table of
//! (household, workplace, opinion) head counts, since vertices sharing all three
//! are interchangeable. Structures are grouped into the families of absorbing
//! configurations drawn as (a)–(h) in the reference drawings. Family (a) is every
//! single-opinion configuration, whatever its workplace layout; the others are
//! matched on structure. Any absorbing structure matching none of them is
//! reported as [`Family::Unlisted`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{ModelParams, Opinion, Regime, SimState};
use crate::seed::{derive_seed, rng_from_seed};
use crate::sim::{evolve, RunOptions};

pub const TOY_N: usize = 10;
pub const TOY_HOUSEHOLD_SIZE: usize = 5;
pub const TOY_WORKPLACES: usize = 2;

const OPINION_MASK: u32 = (1 << TOY_N) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ToyState(u32);

impl ToyState {
    /// Size of the raw configuration space.
    pub const SPACE: u32 = 1 << (2 * TOY_N);

    pub fn from_code(code: u32) -> Self {
        assert!(code < Self::SPACE, "toy state code out of range");
        ToyState(code)
    }

    pub fn code(self) -> u32 {
        self.0
    }

    /// Parses two ten-character strings: opinions (`A`/`B`) and workplaces (`0`/`1`).
    pub fn parse(opinions: &str, workplaces: &str) -> Option<Self> {
        let ops: Vec<char> = opinions.chars().collect();
        let wps: Vec<char> = workplaces.chars().collect();
        if ops.len() != TOY_N || wps.len() != TOY_N {
            return None;
        }
        let mut code = 0u32;
        for v in 0..TOY_N {
            match ops[v] {
                'A' => code |= 1 << v,
                'B' => {}
                _ => return None,
            }
            match wps[v] {
                '1' => code |= 1 << (TOY_N + v),
                '0' => {}
                _ => return None,
            }
        }
        Some(ToyState(code))
    }

    pub fn opinion(self, v: usize) -> Opinion {
        if self.0 >> v & 1 == 1 {
            Opinion::A
        } else {
            Opinion::B
        }
    }

    pub fn workplace(self, v: usize) -> usize {
        (self.0 >> (TOY_N + v) & 1) as usize
    }

    pub fn render(self) -> (String, String) {
        let ops = (0..TOY_N).map(|v| self.opinion(v).to_string()).collect();
        let wps = (0..TOY_N).map(|v| self.workplace(v).to_string()).collect();
        (ops, wps)
    }

    pub fn to_sim_state(self) -> SimState {
        SimState::from_assignment(
            TOY_HOUSEHOLD_SIZE,
            TOY_WORKPLACES,
            (0..TOY_N).map(|v| self.opinion(v)).collect(),
            (0..TOY_N).map(|v| self.workplace(v)).collect(),
        )
        .expect("every toy code is a valid assignment")
    }

    pub fn from_sim_state(state: &SimState) -> Option<Self> {
        if state.n() != TOY_N
            || state.household_size() != TOY_HOUSEHOLD_SIZE
            || state.num_workplaces() != TOY_WORKPLACES
        {
            return None;
        }
        let code = (0..TOY_N).fold(0u32, |acc, v| {
            acc | u32::from(state.opinion(v).is_a()) << v
                | (state.workplace_of(v) as u32) << (TOY_N + v)
        });
        Some(ToyState(code))
    }

    pub fn swap_opinions(self) -> Self {
        ToyState(self.0 ^ OPINION_MASK)
    }

    pub fn swap_workplaces(self) -> Self {
        ToyState(self.0 ^ (OPINION_MASK << TOY_N))
    }

    pub fn swap_households(self) -> Self {
        let rotate = |bits: u32| ((bits >> 5) | (bits << 5)) & OPINION_MASK;
        let ops = rotate(self.0 & OPINION_MASK);
        let wps = rotate(self.0 >> TOY_N);
        ToyState(ops | wps << TOY_N)
    }

    /// The eight images of the state under the symmetry group.
    pub fn orbit(self) -> [ToyState; 8] {
        let mut out = [self; 8];
        for (i, slot) in out.iter_mut().enumerate() {
            let mut s = self;
            if i & 1 != 0 {
                s = s.swap_opinions();
            }
            if i & 2 != 0 {
                s = s.swap_households();
            }
            if i & 4 != 0 {
                s = s.swap_workplaces();
            }
            *slot = s;
        }
        out
    }

    pub fn is_single_opinion(self) -> bool {
        let ops = self.0 & OPINION_MASK;
        ops == 0 || ops == OPINION_MASK
    }

    pub fn has_empty_workplace(self) -> bool {
        let wps = self.0 >> TOY_N;
        wps == 0 || wps == OPINION_MASK
    }

    /// Head counts `[household][workplace][opinion]`, opinion index 0 for A.
    fn table(self) -> [[[u8; 2]; 2]; 2] {
        let mut t = [[[0u8; 2]; 2]; 2];
        for v in 0..TOY_N {
            t[v / TOY_HOUSEHOLD_SIZE][self.workplace(v)][usize::from(!self.opinion(v).is_a())] += 1;
        }
        t
    }
}

/// Minimal encoding over the state's symmetry orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalKey(pub u32);

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:05x}", self.0)
    }
}

pub fn canonical_class(state: ToyState) -> CanonicalKey {
    CanonicalKey(
        state
            .orbit()
            .iter()
            .map(|s| s.code())
            .min()
            .expect("orbit is nonempty"),
    )
}

/// Canonical (household, workplace, opinion) head-count table, flattened.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StructureKey(pub [u8; 8]);

impl fmt::Display for StructureKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Rendered per household as workplace0 A/B, workplace1 A/B.
        let c = self.0;
        write!(
            f,
            "{}{}.{}{}|{}{}.{}{}",
            c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]
        )
    }
}

pub fn structure_key(state: ToyState) -> StructureKey {
    let t = state.table();
    let mut best = [u8::MAX; 8];
    for g in 0..8usize {
        let (so, sh, sw) = (g & 1, g >> 1 & 1, g >> 2 & 1);
        let mut flat = [0u8; 8];
        for h in 0..2 {
            for w in 0..2 {
                for o in 0..2 {
                    flat[h * 4 + w * 2 + o] = t[h ^ sh][w ^ sw][o ^ so];
                }
            }
        }
        best = best.min(flat);
    }
    StructureKey(best)
}

/// The eight drawn absorbing configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Archetype {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
}

impl Archetype {
    pub const ALL: [Archetype; 8] = [
        Archetype::A,
        Archetype::B,
        Archetype::C,
        Archetype::D,
        Archetype::E,
        Archetype::F,
        Archetype::G,
        Archetype::H,
    ];

    pub fn label(self) -> char {
        b"abcdefgh"[self as usize] as char
    }

    /// The configuration as drawn (opinions, workplaces).
    pub fn drawing(self) -> ToyState {
        let (ops, wps) = match self {
            Archetype::A => ("AAAAAAAAAA", "0101010101"),
            Archetype::B => ("AAAAABBBBB", "0000011111"),
            Archetype::C => ("AAAAABBBBB", "0001100011"),
            Archetype::D => ("AAAAABBBBB", "0000100001"),
            Archetype::E => ("AABBBAABBB", "0011100111"),
            Archetype::F => ("AAABBAABBB", "0001100111"),
            Archetype::G => ("AAAAAAABBB", "0000000111"),
            Archetype::H => ("AAAAAAAABB", "0000000011"),
        };
        ToyState::parse(ops, wps).expect("drawings are well formed")
    }

    /// Both households homogeneous with opposite opinions.
    pub fn is_split_households(self) -> bool {
        matches!(self, Archetype::B | Archetype::C | Archetype::D)
    }

    /// Homogeneous workplaces with at least one mixed household.
    pub fn is_mixed_households(self) -> bool {
        matches!(
            self,
            Archetype::E | Archetype::F | Archetype::G | Archetype::H
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Listed(Archetype),
    Unlisted(StructureKey),
}

impl Family {
    pub fn label(&self) -> String {
        match self {
            Family::Listed(f) => f.label().to_string(),
            Family::Unlisted(key) => format!("unlisted[{key}]"),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

pub fn family_of(state: ToyState) -> Family {
    if state.is_single_opinion() {
        return Family::Listed(Archetype::A);
    }
    let key = structure_key(state);
    Archetype::ALL[1..]
        .iter()
        .find(|f| structure_key(f.drawing()) == key)
        .map_or(Family::Unlisted(key), |&f| Family::Listed(f))
}

/// Parameters whose absorbing set is the regime's: moves enabled, `β = q = 1`.
pub fn toy_params(regime: Regime, lambda: f64) -> ModelParams {
    ModelParams {
        lambda,
        num_workplaces: TOY_WORKPLACES,
        ..ModelParams::new(regime, TOY_N, 1.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbsorbingClass {
    pub key: CanonicalKey,
    pub family: Family,
    /// The orbit's minimal encoding.
    pub representative: ToyState,
    /// Raw states in the orbit (all of them absorbing).
    pub raw_count: usize,
    /// False for configurations with an empty workplace, which the dynamics never produce.
    pub reachable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilySummary {
    pub family: Family,
    pub raw_count: usize,
    pub classes: usize,
    pub structures: usize,
    /// At least one member has no empty workplace.
    pub reachable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyEnumeration {
    pub regime: Regime,
    pub lambda: f64,
    /// Every absorbing raw state, in increasing code order.
    pub absorbing: Vec<ToyState>,
    pub classes: Vec<AbsorbingClass>,
    pub families: Vec<FamilySummary>,
}

impl ToyEnumeration {
    pub fn family(&self, family: Family) -> Option<&FamilySummary> {
        self.families.iter().find(|f| f.family == family)
    }

    /// Reachable families that match none of the drawn configurations.
    pub fn unlisted_reachable(&self) -> Vec<&FamilySummary> {
        self.families
            .iter()
            .filter(|f| matches!(f.family, Family::Unlisted(_)) && f.reachable)
            .collect()
    }
}

/// Sweeps all 2^20 configurations and groups the absorbing ones.
pub fn enumerate_absorbing(regime: Regime, lambda: f64, exec: Execution) -> ToyEnumeration {
    let params = toy_params(regime, lambda);
    const CHUNKS: usize = 64;
    let chunk = ToyState::SPACE as usize / CHUNKS;
    let absorbing: Vec<ToyState> = exec
        .map(CHUNKS, |c| {
            (c * chunk..(c + 1) * chunk)
                .map(|code| ToyState(code as u32))
                .filter(|s| s.to_sim_state().is_absorbing(&params))
                .collect::<Vec<_>>()
        })
        .into_iter()
        .flatten()
        .collect();

    let mut by_key: BTreeMap<CanonicalKey, (usize, bool)> = BTreeMap::new();
    for &s in &absorbing {
        let entry = by_key.entry(canonical_class(s)).or_insert((0, false));
        entry.0 += 1;
        entry.1 |= !s.has_empty_workplace();
    }
    let classes: Vec<AbsorbingClass> = by_key
        .into_iter()
        .map(|(key, (raw_count, reachable))| {
            let representative = ToyState(key.0);
            AbsorbingClass {
                key,
                family: family_of(representative),
                representative,
                raw_count,
                reachable,
            }
        })
        .collect();

    let mut families: BTreeMap<Family, (usize, usize, BTreeSet<StructureKey>, bool)> =
        BTreeMap::new();
    for c in &classes {
        let entry = families.entry(c.family).or_default();
        entry.0 += c.raw_count;
        entry.1 += 1;
        entry.2.insert(structure_key(c.representative));
        entry.3 |= c.reachable;
    }
    let families = families
        .into_iter()
        .map(
            |(family, (raw_count, classes, structures, reachable))| FamilySummary {
                family,
                raw_count,
                classes,
                structures: structures.len(),
                reachable,
            },
        )
        .collect();

    ToyEnumeration {
        regime,
        lambda,
        absorbing,
        classes,
        families,
    }
}

/// Terminal-family tallies of repeated runs from random balanced starts.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionRates {
    pub runs: usize,
    pub counts: BTreeMap<Family, usize>,
    pub non_absorbed: usize,
}

impl AbsorptionRates {
    fn fraction(&self, count: usize) -> f64 {
        count as f64 / self.runs as f64
    }

    fn sum_where(&self, pred: impl Fn(&Family) -> bool) -> f64 {
        self.fraction(
            self.counts
                .iter()
                .filter(|(f, _)| pred(f))
                .map(|(_, &c)| c)
                .sum(),
        )
    }

    pub fn rate(&self, family: Family) -> f64 {
        self.fraction(self.counts.get(&family).copied().unwrap_or(0))
    }

    /// Consensus: family (a).
    pub fn homogeneous(&self) -> f64 {
        self.rate(Family::Listed(Archetype::A))
    }

    /// Families (b)–(d).
    pub fn split_households(&self) -> f64 {
        self.sum_where(|f| matches!(f, Family::Listed(x) if x.is_split_households()))
    }

    /// Families (e)–(h).
    pub fn mixed_households(&self) -> f64 {
        self.sum_where(|f| matches!(f, Family::Listed(x) if x.is_mixed_households()))
    }

    pub fn unlisted(&self) -> f64 {
        self.sum_where(|f| matches!(f, Family::Unlisted(_)))
    }

    pub fn non_absorbed_fraction(&self) -> f64 {
        self.fraction(self.non_absorbed)
    }
}

/// Monte-Carlo absorption rates of the toy system from balanced random starts
/// (five A-opinions, balanced workplaces). Run `i` is seeded with
/// `derive_seed(master_seed, [i])`.
pub fn absorption_rates(
    params: &ModelParams,
    num_runs: usize,
    master_seed: u64,
    step_cap: u64,
    exec: Execution,
) -> Result<AbsorptionRates> {
    if params.n != TOY_N
        || params.household_size != TOY_HOUSEHOLD_SIZE
        || params.num_workplaces != TOY_WORKPLACES
    {
        return Err(Error::InvalidParams(
            "absorption rates need the ten-vertex toy geometry".into(),
        ));
    }
    params.validate()?;
    if num_runs == 0 {
        return Err(Error::InvalidParams("at least one run is required".into()));
    }
    let opts = RunOptions::long_run(step_cap);
    let outcomes: Vec<Option<Family>> = exec.map(num_runs, |i| {
        let mut rng = rng_from_seed(derive_seed(master_seed, &[i as u64]));
        let start = SimState::random(params, TOY_N / 2, &mut rng).expect("validated parameters");
        let (_, summary, end) = evolve(start, params, &mut rng, &opts);
        summary
            .absorbed
            .then(|| family_of(ToyState::from_sim_state(&end).expect("toy geometry")))
    });
    let mut counts = BTreeMap::new();
    let mut non_absorbed = 0;
    for o in outcomes {
        match o {
            Some(f) => *counts.entry(f).or_insert(0) += 1,
            None => non_absorbed += 1,
        }
    }
    Ok(AbsorptionRates {
        runs: num_runs,
        counts,
        non_absorbed,
    })
}

/// One grid point of a rate table.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub beta: f64,
    pub q: f64,
    pub rates: AbsorptionRates,
}

/// Absorption rates over a (β, q) grid; point `(i, j)` uses master seed
/// `derive_seed(master_seed, [regime, i, j])`.
#[allow(clippy::too_many_arguments)]
pub fn rate_grid(
    regime: Regime,
    lambda: f64,
    betas: &[f64],
    qs: &[f64],
    num_runs: usize,
    master_seed: u64,
    step_cap: u64,
    exec: Execution,
) -> Result<Vec<RatePoint>> {
    let mut out = Vec::with_capacity(betas.len() * qs.len());
    for (i, &beta) in betas.iter().enumerate() {
        for (j, &q) in qs.iter().enumerate() {
            let params = ModelParams {
                beta,
                q,
                ..toy_params(regime, lambda)
            };
            let seed = derive_seed(master_seed, &[regime.id(), i as u64, j as u64]);
            let rates = absorption_rates(&params, num_runs, seed, step_cap, exec)?;
            out.push(RatePoint { beta, q, rates });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoding_round_trips() {
        for code in [0u32, 1, 0x3ff, 0xfffff, 0x5a5a5] {
            let s = ToyState::from_code(code);
            assert_eq!(ToyState::from_sim_state(&s.to_sim_state()), Some(s));
            let (o, w) = s.render();
            assert_eq!(ToyState::parse(&o, &w), Some(s));
        }
    }

    #[test]
    fn symmetries_are_involutions() {
        let s = ToyState::from_code(0x3_1c_e5);
        assert_eq!(s.swap_opinions().swap_opinions(), s);
        assert_eq!(s.swap_households().swap_households(), s);
        assert_eq!(s.swap_workplaces().swap_workplaces(), s);
        let h = s.swap_households();
        for v in 0..TOY_N {
            assert_eq!(h.opinion(v), s.opinion((v + 5) % 10));
            assert_eq!(h.workplace(v), s.workplace((v + 5) % 10));
        }
    }

    #[test]
    fn canonical_key_is_orbit_invariant() {
        let s = Archetype::F.drawing();
        let k = canonical_class(s);
        assert_eq!(canonical_class(s.swap_opinions()), k);
        assert_eq!(canonical_class(s.swap_workplaces()), k);
        assert_eq!(canonical_class(s.swap_households().swap_opinions()), k);
        for image in s.orbit() {
            assert_eq!(canonical_class(image), k);
            assert_eq!(structure_key(image), structure_key(s));
        }
    }

    #[test]
    fn drawings_are_distinct_and_classified() {
        let keys: BTreeSet<_> = Archetype::ALL
            .iter()
            .map(|f| canonical_class(f.drawing()))
            .collect();
        assert_eq!(keys.len(), 8);
        for f in Archetype::ALL {
            assert_eq!(family_of(f.drawing()), Family::Listed(f));
        }
    }

    #[test]
    fn drawings_are_absorbing_in_the_right_regimes() {
        let lin = toy_params(Regime::Linear, 0.5);
        let nonlin = toy_params(Regime::Nonlinear, 0.5);
        for f in Archetype::ALL {
            let s = f.drawing().to_sim_state();
            assert!(s.is_absorbing(&nonlin), "({}) nonlinear", f.label());
            let linear_expected = matches!(f, Archetype::A | Archetype::B);
            assert_eq!(
                s.is_absorbing(&lin),
                linear_expected,
                "({}) linear",
                f.label()
            );
        }
    }

    #[test]
    fn single_opinion_states_collapse_into_a() {
        let s = ToyState::parse("BBBBBBBBBB", "0000000001").unwrap();
        assert_eq!(family_of(s), Family::Listed(Archetype::A));
    }

    #[test]
    fn rates_need_toy_geometry() {
        let p = ModelParams::linear(20, 0.5, 0.5);
        assert!(absorption_rates(&p, 10, 0, 100, Execution::Serial).is_err());
        let p = toy_params(Regime::Linear, 0.5);
        assert!(absorption_rates(&p, 0, 0, 100, Execution::Serial).is_err());
    }

    #[test]
    fn rates_are_fractions() {
        let p = ModelParams {
            beta: 0.5,
            q: 0.5,
            ..toy_params(Regime::Nonlinear, 0.5)
        };
        let r = absorption_rates(&p, 200, 1, 100_000, Execution::Parallel).unwrap();
        let total: usize = r.counts.values().sum::<usize>() + r.non_absorbed;
        assert_eq!(total, 200);
        let parts = r.homogeneous() + r.split_households() + r.mixed_households() + r.unlisted();
        assert!((parts + r.non_absorbed_fraction() - 1.0).abs() < 1e-12);
        assert_eq!(
            r,
            absorption_rates(&p, 200, 1, 100_000, Execution::Serial).unwrap()
        );
    }
}

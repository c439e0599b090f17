//! Observables of the process: the per-timestep statistic vector, homophily,
//! connected components, first-passage times and cross-run summaries.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::SimState;
use crate::unionfind::UnionFind;

/// Number of bins in the workplace A-share histogram.
pub const SHARE_BINS: usize = 10;
/// Number of bins in the workplace size histogram; larger sizes are clipped into the last.
pub const SIZE_BINS: usize = 14;

/// The statistic vector recorded once per timestep.
///
/// With households of five this is the 33-dimensional vector
/// `(N_A, D_hh[0..=5], D_wp[1..=10], S_wp[1..=14], M_wp, N_ch)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatRecord {
    pub t: u32,
    /// Number of A-opinions.
    pub n_a: u32,
    /// `d_hh[k]`: households with exactly `k` A-members.
    pub d_hh: Vec<u32>,
    /// `d_wp[k]`: workplaces whose A-share lies in `(k/10, (k+1)/10]`; share 0 goes to bin 0.
    pub d_wp: [u32; SHARE_BINS],
    /// `s_wp[k]`: workplaces of size `k + 1`, sizes above 14 clipped into the last bin.
    pub s_wp: [u32; SIZE_BINS],
    /// Workplace moves during the timestep.
    pub m_wp: u32,
    /// Opinion flips during the timestep.
    pub n_ch: u32,
}

/// Histogram bin of a workplace with `a` A-members out of `size`.
///
/// Bins are `[0, 0.1], (0.1, 0.2], …, (0.9, 1]`, computed in exact integer
/// arithmetic as `ceil(10·a/size) - 1` (floored at 0). Empty workplaces fall in bin 0.
pub fn share_bin(a: usize, size: usize) -> usize {
    if size == 0 || a == 0 {
        return 0;
    }
    (SHARE_BINS * a).div_ceil(size) - 1
}

/// Histogram bin of a workplace size; sizes 0 and 1 share bin 0.
pub fn size_bin(size: usize) -> usize {
    size.clamp(1, SIZE_BINS) - 1
}

impl StatRecord {
    /// Number of values per record for the given household size.
    pub fn width(household_size: usize) -> usize {
        1 + (household_size + 1) + SHARE_BINS + SIZE_BINS + 2
    }

    pub fn household_size(&self) -> usize {
        self.d_hh.len() - 1
    }

    /// Flat values in the documented column order (the timestep excluded).
    pub fn values(&self) -> Vec<i32> {
        let mut out = Vec::with_capacity(Self::width(self.household_size()));
        out.push(self.n_a as i32);
        out.extend(self.d_hh.iter().map(|&x| x as i32));
        out.extend(self.d_wp.iter().map(|&x| x as i32));
        out.extend(self.s_wp.iter().map(|&x| x as i32));
        out.push(self.m_wp as i32);
        out.push(self.n_ch as i32);
        out
    }

    pub fn from_values(t: u32, household_size: usize, values: &[i32]) -> Result<Self> {
        if values.len() != Self::width(household_size) {
            return Err(Error::Format(format!(
                "record has {} values, expected {}",
                values.len(),
                Self::width(household_size)
            )));
        }
        if values.iter().any(|&x| x < 0) {
            return Err(Error::Format("negative count in record".into()));
        }
        let v: Vec<u32> = values.iter().map(|&x| x as u32).collect();
        let hh_end = 1 + household_size + 1;
        let wp_end = hh_end + SHARE_BINS;
        let sz_end = wp_end + SIZE_BINS;
        Ok(StatRecord {
            t,
            n_a: v[0],
            d_hh: v[1..hh_end].to_vec(),
            d_wp: v[hh_end..wp_end].try_into().expect("slice length"),
            s_wp: v[wp_end..sz_end].try_into().expect("slice length"),
            m_wp: v[sz_end],
            n_ch: v[sz_end + 1],
        })
    }

    pub fn column_names(household_size: usize) -> Vec<String> {
        let mut names = vec!["N_A".to_string()];
        names.extend((0..=household_size).map(|k| format!("D_hh_{k}")));
        names.extend((1..=SHARE_BINS).map(|k| format!("D_wp_{k}")));
        names.extend((1..=SIZE_BINS).map(|k| format!("S_wp_{k}")));
        names.push("M_wp".into());
        names.push("N_ch".into());
        names
    }

    /// Checks the histogram totals against the population geometry.
    pub fn check_totals(&self, n: usize, num_workplaces: usize) -> Result<()> {
        let hs = self.household_size();
        let households: u32 = self.d_hh.iter().sum();
        let weighted: usize = self
            .d_hh
            .iter()
            .enumerate()
            .map(|(k, &c)| k * c as usize)
            .sum();
        let shares: u32 = self.d_wp.iter().sum();
        let sizes: u32 = self.s_wp.iter().sum();
        let fail = |what: &str| Err(Error::Format(format!("record t={}: {what}", self.t)));
        if households as usize * hs != n {
            return fail("household histogram does not cover the population");
        }
        if weighted != self.n_a as usize {
            return fail("N_A disagrees with the household histogram");
        }
        if shares as usize != num_workplaces || sizes as usize != num_workplaces {
            return fail("workplace histograms do not cover every workplace");
        }
        Ok(())
    }
}

/// Records the state after timestep `t`, with the move and flip counters
/// accumulated over that timestep's micro-steps.
pub fn snapshot(state: &SimState, t: u32, moves: u32, flips: u32) -> StatRecord {
    let hs = state.household_size();
    let mut d_hh = vec![0u32; hs + 1];
    for h in 0..state.num_households() {
        d_hh[state.household_a(h)] += 1;
    }
    let mut d_wp = [0u32; SHARE_BINS];
    let mut s_wp = [0u32; SIZE_BINS];
    for w in 0..state.num_workplaces() {
        let size = state.workplace_size(w);
        d_wp[share_bin(state.workplace_a(w), size)] += 1;
        s_wp[size_bin(size)] += 1;
    }
    StatRecord {
        t,
        n_a: state.num_a() as u32,
        d_hh,
        d_wp,
        s_wp,
        m_wp: moves,
        n_ch: flips,
    }
}

/// True when some workplace is larger than the size histogram can represent.
pub fn size_overflow(state: &SimState) -> bool {
    state
        .workplace_sizes()
        .iter()
        .any(|&s| s as usize > SIZE_BINS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layer {
    Households,
    Workplaces,
}

/// Fraction of vertices whose hyperedge in `layer` holds a single opinion.
pub fn homophily_index(state: &SimState, layer: Layer) -> f64 {
    let homogeneous: usize = match layer {
        Layer::Households => {
            let hs = state.household_size();
            (0..state.num_households())
                .filter(|&h| matches!(state.household_a(h), a if a == 0 || a == hs))
                .count()
                * hs
        }
        Layer::Workplaces => (0..state.num_workplaces())
            .map(|w| (state.workplace_a(w), state.workplace_size(w)))
            .filter(|&(a, size)| a == 0 || a == size)
            .map(|(_, size)| size)
            .sum(),
    };
    homogeneous as f64 / state.n() as f64
}

/// Sizes of the connected components of the graph joining vertices that
/// share a household or a workplace, largest first.
pub fn components(state: &SimState) -> Vec<usize> {
    let mut uf = UnionFind::new(state.n());
    let mut first_in_workplace = vec![usize::MAX; state.num_workplaces()];
    for v in 0..state.n() {
        let head = state.household_of(v) * state.household_size();
        uf.union(v, head);
        let w = state.workplace_of(v);
        if first_in_workplace[w] == usize::MAX {
            first_in_workplace[w] = v;
        } else {
            uf.union(v, first_in_workplace[w]);
        }
    }
    uf.set_sizes()
}

/// First index whose value strictly exceeds `threshold`.
pub fn first_passage(series: &[f64], threshold: f64) -> Option<usize> {
    series.iter().position(|&x| x > threshold)
}

/// Terminal observables of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub final_n_a: u32,
    /// Micro-steps until the run stopped: the absorption step when absorbed,
    /// the configured budget otherwise.
    pub steps: u64,
    pub absorbed: bool,
    /// First timestep with household homophily above the passage threshold.
    pub tau_hh: Option<u32>,
    /// Same for workplaces.
    pub tau_wp: Option<u32>,
    pub homophily_hh: f64,
    pub homophily_wp: f64,
    /// Connected component sizes at termination, largest first.
    pub component_sizes: Vec<u32>,
    /// Some workplace exceeded the size histogram's range at a snapshot.
    pub size_overflow: bool,
}

/// Mean of the defined first-passage times, and how many runs never passed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassageStats {
    pub mean: Option<f64>,
    pub defined: usize,
    pub missing: usize,
}

impl PassageStats {
    fn from_values(values: impl Iterator<Item = Option<u32>>) -> Self {
        let (mut sum, mut defined, mut missing) = (0.0, 0, 0);
        for v in values {
            match v {
                Some(t) => {
                    sum += f64::from(t);
                    defined += 1;
                }
                None => missing += 1,
            }
        }
        PassageStats {
            mean: (defined > 0).then(|| sum / defined as f64),
            defined,
            missing,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossRunSummary {
    pub runs: usize,
    pub mean_n_a: f64,
    /// Population standard deviation of the final A-count.
    pub sd_n_a: f64,
    pub absorbed_fraction: f64,
    pub mean_steps: f64,
    pub tau_hh: PassageStats,
    pub tau_wp: PassageStats,
    pub mean_homophily_hh: f64,
    pub mean_homophily_wp: f64,
    pub mean_components: f64,
    /// Number of runs ending with each component count.
    pub component_counts: BTreeMap<usize, usize>,
    /// Number of final components of each size, pooled over runs.
    pub component_sizes: BTreeMap<u32, usize>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    sum / count as f64
}

pub fn cross_run_summary(summaries: &[RunSummary]) -> Result<CrossRunSummary> {
    if summaries.is_empty() {
        return Err(Error::InvalidParams("no runs to summarize".into()));
    }
    let mean_n_a = mean(summaries.iter().map(|s| f64::from(s.final_n_a)));
    let var = mean(
        summaries
            .iter()
            .map(|s| (f64::from(s.final_n_a) - mean_n_a).powi(2)),
    );
    let mut component_counts = BTreeMap::new();
    let mut component_sizes = BTreeMap::new();
    for s in summaries {
        *component_counts.entry(s.component_sizes.len()).or_insert(0) += 1;
        for &size in &s.component_sizes {
            *component_sizes.entry(size).or_insert(0) += 1;
        }
    }
    Ok(CrossRunSummary {
        runs: summaries.len(),
        mean_n_a,
        sd_n_a: var.sqrt(),
        absorbed_fraction: mean(summaries.iter().map(|s| f64::from(u8::from(s.absorbed)))),
        mean_steps: mean(summaries.iter().map(|s| s.steps as f64)),
        tau_hh: PassageStats::from_values(summaries.iter().map(|s| s.tau_hh)),
        tau_wp: PassageStats::from_values(summaries.iter().map(|s| s.tau_wp)),
        mean_homophily_hh: mean(summaries.iter().map(|s| s.homophily_hh)),
        mean_homophily_wp: mean(summaries.iter().map(|s| s.homophily_wp)),
        mean_components: mean(summaries.iter().map(|s| s.component_sizes.len() as f64)),
        component_counts,
        component_sizes,
    })
}

impl CrossRunSummary {
    pub const COLUMNS: [&'static str; 14] = [
        "runs",
        "mean_N_A",
        "sd_N_A",
        "absorbed_frac",
        "mean_steps",
        "mean_tau_hh",
        "missing_tau_hh",
        "mean_tau_wp",
        "missing_tau_wp",
        "mean_homophily_hh",
        "mean_homophily_wp",
        "mean_components",
        "component_counts",
        "component_sizes",
    ];

    /// Field values aligned with [`Self::COLUMNS`]. Histograms are rendered
    /// as `key:count` pairs joined by `;`, missing means as `NA`.
    pub fn fields(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map_or("NA".to_string(), |v| format!("{v:.4}"));
        let hist = |m: Vec<(String, usize)>| {
            m.into_iter()
                .map(|(k, c)| format!("{k}:{c}"))
                .collect::<Vec<_>>()
                .join(";")
        };
        vec![
            self.runs.to_string(),
            format!("{:.4}", self.mean_n_a),
            format!("{:.4}", self.sd_n_a),
            format!("{:.4}", self.absorbed_fraction),
            format!("{:.1}", self.mean_steps),
            opt(self.tau_hh.mean),
            self.tau_hh.missing.to_string(),
            opt(self.tau_wp.mean),
            self.tau_wp.missing.to_string(),
            format!("{:.6}", self.mean_homophily_hh),
            format!("{:.6}", self.mean_homophily_wp),
            format!("{:.4}", self.mean_components),
            hist(
                self.component_counts
                    .iter()
                    .map(|(k, &c)| (k.to_string(), c))
                    .collect(),
            ),
            hist(
                self.component_sizes
                    .iter()
                    .map(|(k, &c)| (k.to_string(), c))
                    .collect(),
            ),
        ]
    }
}

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::stats::{StatRecord, SHARE_BINS};

/// One block of the statistic vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    NA,
    Dhh,
    Dwp,
    Swp,
    Mwp,
    Nch,
}

impl Source {
    /// Canonical order, also the order of features within a timestep.
    pub const ALL: [Source; 6] = [
        Source::NA,
        Source::Dhh,
        Source::Dwp,
        Source::Swp,
        Source::Mwp,
        Source::Nch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Source::NA => "N_A",
            Source::Dhh => "D_hh",
            Source::Dwp => "D_wp",
            Source::Swp => "S_wp",
            Source::Mwp => "M_wp",
            Source::Nch => "N_ch",
        }
    }

    /// Histogram sources contribute moments, scalars their raw value.
    pub fn is_distribution(self) -> bool {
        matches!(self, Source::Dhh | Source::Dwp | Source::Swp)
    }

    /// Features per timestep.
    pub fn width(self) -> usize {
        if self.is_distribution() {
            3
        } else {
            1
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Source {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "");
        Source::ALL
            .into_iter()
            .find(|src| src.name().to_ascii_lowercase().replace('_', "") == norm)
            .ok_or_else(|| Error::Config(format!("unknown statistic source {s:?}")))
    }
}

/// A subset of sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SourceSet(u8);

impl SourceSet {
    pub const EMPTY: SourceSet = SourceSet(0);
    pub const FULL: SourceSet = SourceSet(0b11_1111);

    pub fn only(source: Source) -> Self {
        SourceSet(source.bit())
    }

    pub fn with(self, source: Source) -> Self {
        SourceSet(self.0 | source.bit())
    }

    pub fn contains(self, source: Source) -> bool {
        self.0 & source.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Source> {
        Source::ALL.into_iter().filter(move |&s| self.contains(s))
    }

    /// Features per timestep.
    pub fn width(self) -> usize {
        self.iter().map(Source::width).sum()
    }
}

impl FromIterator<Source> for SourceSet {
    fn from_iter<I: IntoIterator<Item = Source>>(iter: I) -> Self {
        iter.into_iter().fold(SourceSet::EMPTY, SourceSet::with)
    }
}

impl fmt::Display for SourceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == SourceSet::FULL {
            return f.write_str("all");
        }
        let names: Vec<_> = self.iter().map(Source::name).collect();
        f.write_str(&names.join(","))
    }
}

/// Accepts `all`, a comma-separated list of source names, or a six-digit
/// binary mask in the order `N_A D_hh D_wp S_wp M_wp N_ch` (`110000` = N_A and D_hh).
impl FromStr for SourceSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let set = if s.eq_ignore_ascii_case("all") {
            SourceSet::FULL
        } else if s.len() == Source::ALL.len() && s.chars().all(|c| c == '0' || c == '1') {
            s.chars()
                .zip(Source::ALL)
                .filter(|&(c, _)| c == '1')
                .map(|(_, src)| src)
                .collect()
        } else {
            s.split(',')
                .map(str::parse)
                .collect::<Result<SourceSet>>()?
        };
        if set.is_empty() {
            return Err(Error::Config(format!(
                "feature set {s:?} selects no source"
            )));
        }
        Ok(set)
    }
}

/// Features from the first `horizon` timesteps of the selected sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureSpec {
    pub horizon: usize,
    pub sources: SourceSet,
}

impl FeatureSpec {
    pub fn new(horizon: usize, sources: SourceSet) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::Config("feature spec selects no source".into()));
        }
        if horizon == 0 {
            return Err(Error::Config("feature horizon must be positive".into()));
        }
        Ok(FeatureSpec { horizon, sources })
    }

    pub fn num_features(&self) -> usize {
        self.horizon * self.sources.width()
    }

    /// Names in feature order, e.g. `t3.D_wp.var`.
    pub fn column_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.num_features());
        for t in 1..=self.horizon {
            for src in self.sources.iter() {
                if src.is_distribution() {
                    for m in ["mean", "var", "var2"] {
                        out.push(format!("t{t}.{src}.{m}"));
                    }
                } else {
                    out.push(format!("t{t}.{src}"));
                }
            }
        }
        out
    }
}

/// Population mean and variance of a quantity taking `value(k)` on `counts[k]` groups.
fn histogram_moments(counts: &[u32], value: impl Fn(usize) -> f64) -> (f64, f64) {
    let total: f64 = counts.iter().map(|&c| f64::from(c)).sum();
    if total == 0.0 {
        return (0.0, 0.0);
    }
    let mean = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| f64::from(c) * value(k))
        .sum::<f64>()
        / total;
    let var = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| f64::from(c) * (value(k) - mean).powi(2))
        .sum::<f64>()
        / total;
    (mean, var)
}

/// Appends one timestep's features. Histogram sources give the mean, variance
/// and squared variance of: the household A-count; the workplace A-share,
/// represented by its bin midpoint; the workplace size.
pub fn timestep_features(record: &StatRecord, sources: SourceSet, out: &mut Vec<f64>) {
    for src in sources.iter() {
        let moments = match src {
            Source::NA => {
                out.push(f64::from(record.n_a));
                continue;
            }
            Source::Mwp => {
                out.push(f64::from(record.m_wp));
                continue;
            }
            Source::Nch => {
                out.push(f64::from(record.n_ch));
                continue;
            }
            Source::Dhh => histogram_moments(&record.d_hh, |k| k as f64),
            Source::Dwp => {
                histogram_moments(&record.d_wp, |k| (k as f64 + 0.5) / SHARE_BINS as f64)
            }
            Source::Swp => histogram_moments(&record.s_wp, |k| (k + 1) as f64),
        };
        out.extend([moments.0, moments.1, moments.1 * moments.1]);
    }
}

/// Feature vector of a trajectory prefix holding timesteps `1..=spec.horizon`.
pub fn build_features(prefix: &[StatRecord], spec: &FeatureSpec) -> Result<Vec<f64>> {
    if spec.sources.is_empty() {
        return Err(Error::Config("feature spec selects no source".into()));
    }
    if prefix.len() < spec.horizon {
        return Err(Error::Estimation(format!(
            "prefix of {} timesteps is shorter than the horizon {}",
            prefix.len(),
            spec.horizon
        )));
    }
    let mut out = Vec::with_capacity(spec.num_features());
    for record in &prefix[..spec.horizon] {
        timestep_features(record, spec.sources, &mut out);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths_follow_the_source_arithmetic() {
        assert_eq!(SourceSet::FULL.width(), 12);
        assert_eq!(SourceSet::only(Source::NA).width(), 1);
        assert_eq!(SourceSet::only(Source::Dhh).width(), 3);
        let full20 = FeatureSpec::new(20, SourceSet::FULL).unwrap();
        assert_eq!(full20.num_features(), 240);
        assert_eq!(full20.column_names().len(), 240);
        assert_eq!(
            FeatureSpec::new(300, SourceSet::FULL)
                .unwrap()
                .num_features(),
            3600
        );
        assert_eq!(
            FeatureSpec::new(20, SourceSet::only(Source::NA))
                .unwrap()
                .num_features(),
            20
        );
        assert_eq!(
            FeatureSpec::new(300, SourceSet::only(Source::NA))
                .unwrap()
                .num_features(),
            300
        );
    }

    #[test]
    fn parsing() {
        assert_eq!("all".parse::<SourceSet>().unwrap(), SourceSet::FULL);
        assert_eq!("111111".parse::<SourceSet>().unwrap(), SourceSet::FULL);
        let s: SourceSet = "N_A, d_hh".parse().unwrap();
        assert_eq!(s, SourceSet::only(Source::NA).with(Source::Dhh));
        assert_eq!("110000".parse::<SourceSet>().unwrap(), s);
        assert_eq!(s.to_string(), "N_A,D_hh");
        assert!("000000".parse::<SourceSet>().is_err());
        assert!("N_B".parse::<SourceSet>().is_err());
        assert!(FeatureSpec::new(10, SourceSet::EMPTY).is_err());
        assert!(FeatureSpec::new(0, SourceSet::FULL).is_err());
    }

    fn all_a_record(t: u32) -> StatRecord {
        let mut d_wp = [0; 10];
        d_wp[9] = 200;
        let mut s_wp = [0; 14];
        s_wp[4] = 200;
        StatRecord {
            t,
            n_a: 1000,
            d_hh: vec![0, 0, 0, 0, 0, 200],
            d_wp,
            s_wp,
            m_wp: 0,
            n_ch: 0,
        }
    }

    #[test]
    fn all_a_trajectory_moments() {
        let prefix: Vec<_> = (1..=4).map(all_a_record).collect();
        let spec = FeatureSpec::new(4, SourceSet::FULL).unwrap();
        let f = build_features(&prefix, &spec).unwrap();
        assert_eq!(f.len(), 48);
        for t in 0..4 {
            let row = &f[t * 12..(t + 1) * 12];
            assert_eq!(row[0], 1000.0);
            assert_eq!(&row[1..4], &[5.0, 0.0, 0.0]);
            assert_eq!(&row[4..7], &[0.95, 0.0, 0.0]);
            assert_eq!(&row[7..10], &[5.0, 0.0, 0.0]);
            assert_eq!(&row[10..], &[0.0, 0.0]);
        }
    }

    #[test]
    fn moments_of_a_split_histogram() {
        let mut r = all_a_record(1);
        r.d_hh = vec![100, 0, 0, 0, 0, 100];
        r.n_a = 500;
        let mut out = Vec::new();
        timestep_features(&r, SourceSet::only(Source::Dhh), &mut out);
        // Household counts 0 and 5 in equal numbers: mean 2.5, variance 6.25.
        assert_eq!(out, vec![2.5, 6.25, 6.25 * 6.25]);
    }

    #[test]
    fn short_prefix_is_rejected() {
        let prefix: Vec<_> = (1..=3).map(all_a_record).collect();
        let spec = FeatureSpec::new(4, SourceSet::FULL).unwrap();
        assert!(build_features(&prefix, &spec).is_err());
    }
}

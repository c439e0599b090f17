//! The linear-regression estimator of (β, q) from trajectory prefixes.
//!
//! Each timestep contributes the raw value of every selected scalar source
//! (`N_A`, `M_wp`, `N_ch`) and the mean, variance and squared variance of
//! every selected histogram source (`D_hh`, `D_wp`, `S_wp`), so a horizon
//! of `t` with all sources gives `12 t` features. One model per target is fit
//! on the pooled training runs of all grid cells and scored on the held-out
//! runs named by a [`SplitManifest`].

mod evaluate;
mod features;
mod ols;

pub use evaluate::{
    evaluate, evaluate_with, standard_specs, write_report_table, EstimatorReport, SplitManifest,
    Target, TEST_FRACTION,
};
pub use features::{build_features, timestep_features, FeatureSpec, Source, SourceSet};
pub use ols::{fit_ols, lstsq_qr, ColMatrix, LstsqSolution, OlsFit, DEFAULT_RIDGE};

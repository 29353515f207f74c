//! Comparison methods: the Mahalanobis family (MD, MDR, MDM, RDE) and
//! logistic error probes (linear and attention pooling).

mod gaussian;
mod io;
pub mod probe;
mod rde;

pub use gaussian::{
    fit_gaussian_stats, fit_gaussian_stats_from, md_score, mdm_score, mdr_score, GaussianStats,
    MahalanobisKind, DEFAULT_RIDGE,
};
pub use io::{
    read_gaussian_stats, read_probe, write_gaussian_stats, write_probe, ProbeManifest,
    StatsManifest, PROBE_MANIFEST, STATS_MANIFEST,
};
pub use probe::{
    fit_attention_probe, fit_linear_probe, fit_probe, select_probe, ProbeGradient, ProbeHead,
    ProbeKind, SequenceData, PROBE_INIT_STD, PROBE_LEARNING_RATES,
};
pub use rde::{rde_fit, RdeConfig, RdeModel};

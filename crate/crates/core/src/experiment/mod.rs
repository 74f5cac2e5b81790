//! Configuration and runner for the benchmark experiments.
//!
//! A run resolves an [`ExperimentConfig`] from layered sources (built-in
//! defaults, an experiment preset, a TOML file, `--key value` overrides),
//! echoes it to `config.toml` in the output directory and writes:
//!
//! * `chains/chain_NNN.csv` per replica: `step,x1,norm_sq,prox_iters,diverged`
//! * `summary.csv`: `method,scenario,moment_order,estimate,re,cv`
//! * for deconvolution, `images/*.pgm`, `images/*.raw` and `metrics.csv`
//! * for the theory experiment, `theory.csv`

mod bench;
mod config;
mod report;
mod run;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use bench::{prox_bench, BenchLevel, BenchReport};
pub use config::{
    parse_overrides, ConfigBuilder, ExperimentConfig, ExperimentKind, ImagingConfig, PotentialKind, ProxBenchConfig,
    ProxConfig, SamplerKind, Scenario, TheoryConfig, PROX_BENCH_DEFAULTS,
};
pub use report::{theory_report, TheoryRow};
pub use run::{build_potential, initial_point, run_experiment, run_prox_bench, RunOutcome, SummaryRow};
pub use run::{theory_csv, theory_table};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Config(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Run(String),
}

impl ExperimentError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit status: 2 for configuration errors, 3 for I/O errors,
    /// 1 for anything that fails while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Io { .. } => 3,
            ExperimentError::Run(_) => 1,
        }
    }
}

impl From<crate::imaging::ImagingError> for ExperimentError {
    fn from(e: crate::imaging::ImagingError) -> Self {
        match e {
            crate::imaging::ImagingError::Io { path, source } => ExperimentError::Io { path, source },
            other => ExperimentError::Run(other.to_string()),
        }
    }
}

macro_rules! run_error_from {
    ($($t:ty),*) => {
        $(impl From<$t> for ExperimentError {
            fn from(e: $t) -> Self {
                ExperimentError::Run(e.to_string())
            }
        })*
    };
}

run_error_from!(
    crate::samplers::SamplerError,
    crate::potentials::PotentialError,
    crate::prox::ProxError,
    crate::diagnostics::DiagnosticsError,
    crate::theory::TheoryError
);

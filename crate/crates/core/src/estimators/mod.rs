//! Pilot sounding and channel estimators.

mod linear;
mod omp;
mod pilots;
mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use linear::{lmmse_estimate, ls_estimate, sample_covariance};
pub use omp::{omp_run, reconstruct, OmpOptions, Reconstruction};
pub use pilots::{complex_gaussian, dft_pilot_matrix, make_pilot_matrix, sound, PilotFrame};
pub use report::{nmse, EstimateReport, PathEstimate, UserEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Ls,
    Lmmse,
    FfOmp,
    NfOmp,
    NbaOmp,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::Ls,
        EstimatorKind::Lmmse,
        EstimatorKind::FfOmp,
        EstimatorKind::NfOmp,
        EstimatorKind::NbaOmp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Ls => "ls",
            EstimatorKind::Lmmse => "lmmse",
            EstimatorKind::FfOmp => "ff-omp",
            EstimatorKind::NfOmp => "nf-omp",
            EstimatorKind::NbaOmp => "nba-omp",
        }
    }

    /// LS and LMMSE sound with a full `N x N` training sequence.
    pub fn uses_full_training(self) -> bool {
        matches!(self, EstimatorKind::Ls | EstimatorKind::Lmmse)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown estimator `{s}`")))
    }
}

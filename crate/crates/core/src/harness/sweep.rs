use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{normalize_for_snr, sample_scenario, synthesize_channel};
use crate::config::SystemConfig;
use crate::dictionary::{build_nba, build_physical_grid, build_si_farfield, build_si_nearfield, Dictionary};
use crate::error::Result;
use crate::estimators::{
    dft_pilot_matrix, lmmse_estimate, ls_estimate, make_pilot_matrix, nmse, omp_run, sample_covariance, sound,
    EstimatorKind, OmpOptions,
};
use crate::linalg::CMatrix;
use crate::seeding::{derive_seed, Stream};

use super::config::{AxisKind, ExperimentConfig};
use super::output::{write_csv_file, SCHEMA_NMSE_SUMMARY, SCHEMA_NMSE_TRIALS};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub axis: AxisKind,
    pub value: f64,
    pub trial: usize,
    pub estimator: EstimatorKind,
    pub nmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub axis: AxisKind,
    pub value: f64,
    pub estimator: EstimatorKind,
    pub mean_nmse: f64,
    pub mean_nmse_db: f64,
    /// Sample standard deviation over trials (0 for a single trial).
    pub std_nmse: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
}

impl SweepOutcome {
    /// Mean NMSE of `estimator` at the sweep point with axis value `value`.
    pub fn mean(&self, value: f64, estimator: EstimatorKind) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.value == value && r.estimator == estimator)
            .map(|r| r.mean_nmse)
    }

    pub fn write_to(&self, dir: &Path, config_hash: &str) -> Result<Vec<PathBuf>> {
        let summary = dir.join("nmse_sweep.csv");
        let trials = dir.join("nmse_trials.csv");
        write_csv_file(&summary, SCHEMA_NMSE_SUMMARY, config_hash, &self.summary)?;
        write_csv_file(&trials, SCHEMA_NMSE_TRIALS, config_hash, &self.records)?;
        Ok(vec![summary, trials])
    }
}

/// One sweep point: the system in force and its SNR.
struct Point {
    value: f64,
    system: SystemConfig,
    snr_db: f64,
}

fn sweep_points(cfg: &ExperimentConfig) -> Vec<Point> {
    let sw = &cfg.sweep;
    match sw.axis {
        AxisKind::Snr => sw
            .values
            .iter()
            .map(|&v| Point {
                value: v,
                system: cfg.system.clone(),
                snr_db: v,
            })
            .collect(),
        AxisKind::Bandwidth => sw
            .values
            .iter()
            .map(|&v| Point {
                value: v,
                system: cfg.system.clone().with_bandwidth_ratio(v),
                snr_db: sw.snr_db,
            })
            .collect(),
        AxisKind::None => vec![Point {
            value: sw.snr_db,
            system: cfg.system.clone(),
            snr_db: sw.snr_db,
        }],
    }
}

struct Dictionaries {
    nba: Option<Dictionary>,
    nf: Option<Dictionary>,
    ff: Option<Dictionary>,
}

impl Dictionaries {
    fn build(system: &SystemConfig, wanted: &[EstimatorKind]) -> Result<Self> {
        let needs = |k| wanted.contains(&k);
        let grid = if needs(EstimatorKind::NbaOmp) || needs(EstimatorKind::NfOmp) {
            Some(build_physical_grid(system, system.q_angle, system.q_range)?)
        } else {
            None
        };
        Ok(Self {
            nba: match &grid {
                Some(g) if needs(EstimatorKind::NbaOmp) => Some(build_nba(g, system)?),
                _ => None,
            },
            nf: match &grid {
                Some(g) if needs(EstimatorKind::NfOmp) => Some(build_si_nearfield(g, system)?),
                _ => None,
            },
            ff: if needs(EstimatorKind::FfOmp) {
                Some(build_si_farfield(system, system.q_angle)?)
            } else {
                None
            },
        })
    }

    fn get(&self, kind: EstimatorKind) -> &Dictionary {
        match kind {
            EstimatorKind::NbaOmp => self.nba.as_ref(),
            EstimatorKind::NfOmp => self.nf.as_ref(),
            EstimatorKind::FfOmp => self.ff.as_ref(),
            _ => None,
        }
        .expect("dictionary built for every requested OMP variant")
    }
}

/// Monte-Carlo NMSE over the configured sweep.
///
/// Trial `t` draws its scenario, pilot beams and noise from
/// `derive_seed(seed, 0, t, stream)`, so every estimator and every sweep point
/// sees the same realizations. The LMMSE covariance of sweep point `i` uses
/// `derive_seed(seed, i, 0, Covariance)` (point 0 whenever the axis leaves the
/// channel statistics unchanged).
pub fn run_nmse_sweep(cfg: &ExperimentConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let wanted = &cfg.estimators;
    let mut records = Vec::new();
    let mut summary = Vec::new();
    let mut shared_cov: Option<Vec<CMatrix>> = None;
    for (i, point) in sweep_points(cfg).into_iter().enumerate() {
        let sys = &point.system;
        sys.validate()?;
        let dicts = Dictionaries::build(sys, wanted)?;
        let cov = if wanted.contains(&EstimatorKind::Lmmse) {
            let draws = cfg.sweep.covariance_draws;
            if cfg.sweep.axis == AxisKind::Bandwidth {
                Some(sample_covariance(
                    sys,
                    draws,
                    derive_seed(cfg.seed, i as u64, 0, Stream::Covariance),
                )?)
            } else {
                if shared_cov.is_none() {
                    shared_cov = Some(sample_covariance(
                        sys,
                        draws,
                        derive_seed(cfg.seed, 0, 0, Stream::Covariance),
                    )?);
                }
                shared_cov.clone()
            }
        } else {
            None
        };
        let noise_var = 10f64.powf(-point.snr_db / 10.0);
        let full_training = dft_pilot_matrix(sys.n_antennas);
        let per_trial: Vec<Result<Vec<f64>>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let t64 = t as u64;
                let scenario = sample_scenario(sys, sys.paths, derive_seed(cfg.seed, 0, t64, Stream::Scenario))?;
                let (h, _) = normalize_for_snr(&synthesize_channel(&scenario, sys)?)?;
                let noise_seed = derive_seed(cfg.seed, 0, t64, Stream::Noise);
                let pilots = make_pilot_matrix(sys, derive_seed(cfg.seed, 0, t64, Stream::Pilots));
                let frame = sound(&h, &pilots, noise_var, noise_seed)?;
                let full = if wanted.iter().any(|k| k.uses_full_training()) {
                    Some(sound(&h, &full_training, noise_var, noise_seed)?)
                } else {
                    None
                };
                wanted
                    .iter()
                    .map(|&kind| {
                        let h_hat = match kind {
                            EstimatorKind::Ls => ls_estimate(full.as_ref().expect("full training"))?,
                            EstimatorKind::Lmmse => lmmse_estimate(
                                full.as_ref().expect("full training"),
                                cov.as_deref().expect("covariance"),
                            )?,
                            omp => omp_run(&frame, dicts.get(omp), &OmpOptions::new(sys.paths))?.h_hat,
                        };
                        Ok(nmse(&h, &h_hat))
                    })
                    .collect()
            })
            .collect();
        let per_trial = per_trial.into_iter().collect::<Result<Vec<_>>>()?;
        for (t, values) in per_trial.iter().enumerate() {
            for (&estimator, &v) in wanted.iter().zip(values) {
                records.push(TrialRecord {
                    axis: cfg.sweep.axis.clone(),
                    value: point.value,
                    trial: t,
                    estimator,
                    nmse: v,
                });
            }
        }
        for (e, &estimator) in wanted.iter().enumerate() {
            let xs: Vec<f64> = per_trial.iter().map(|v| v[e]).collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let std = if xs.len() > 1 {
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            summary.push(SummaryRow {
                axis: cfg.sweep.axis.clone(),
                value: point.value,
                estimator,
                mean_nmse: mean,
                mean_nmse_db: 10.0 * mean.log10(),
                std_nmse: std,
                trials: xs.len(),
            });
        }
    }
    Ok(SweepOutcome { records, summary })
}

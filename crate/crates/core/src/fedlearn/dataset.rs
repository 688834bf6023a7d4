//! Per-user training sets labeled by NBA-OMP.
//!
//! Each sample is one (scenario, subcarrier, SNR, noise draw) of one user.
//! The input is the received pilot vector as three stacked real channels
//! `[Re y; Im y; arg y]` (length `3P`), the label is `[Re h_hat; Im h_hat]`
//! (length `2N`) where `h_hat` comes from NBA-OMP on noiseless pilots. Noise
//! is applied to the inputs only, so every augmentation of a channel shares
//! its label.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{normalize_for_snr, sample_scenario_in_sectors, synthesize_channel};
use crate::config::SystemConfig;
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::estimators::{complex_gaussian, omp_run, sound, OmpOptions};
use crate::linalg::{CMatrix, CVector};
use crate::seeding::{self, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct LocalDataset {
    pub owner: usize,
    /// `D_k x 3P`, one sample per row.
    pub inputs: DMatrix<f64>,
    /// `D_k x 2N`.
    pub labels: DMatrix<f64>,
}

impl LocalDataset {
    pub fn count(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.nrows() != self.inputs.nrows() {
            return Err(Error::DimensionMismatch {
                what: "labels",
                expected: self.inputs.nrows(),
                got: self.labels.nrows(),
            });
        }
        if self.inputs.ncols() % 3 != 0 || self.labels.ncols() % 2 != 0 {
            return Err(Error::Format("input width must be 3P and label width 2N".into()));
        }
        Ok(())
    }

    /// Row-wise concatenation, e.g. to pool all users for a centralized baseline.
    pub fn concat(owner: usize, parts: &[&LocalDataset]) -> Result<Self> {
        let first = parts.first().ok_or(Error::Empty("datasets to concatenate"))?;
        let rows: usize = parts.iter().map(|p| p.count()).sum();
        let (ci, cl) = (first.inputs.ncols(), first.labels.ncols());
        let mut inputs = DMatrix::zeros(rows, ci);
        let mut labels = DMatrix::zeros(rows, cl);
        let mut r = 0;
        for p in parts {
            if p.inputs.ncols() != ci || p.labels.ncols() != cl {
                return Err(Error::DimensionMismatch {
                    what: "dataset width",
                    expected: ci,
                    got: p.inputs.ncols(),
                });
            }
            inputs.rows_mut(r, p.count()).copy_from(&p.inputs);
            labels.rows_mut(r, p.count()).copy_from(&p.labels);
            r += p.count();
        }
        Ok(Self { owner, inputs, labels })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    /// Independent channel realizations per user (V).
    pub scenarios: usize,
    pub snrs_db: Vec<f64>,
    /// Noise draws per (realization, SNR).
    pub augmentation: usize,
}

impl DatasetSpec {
    /// Samples per user: `|snrs| * M * V * augmentation`.
    pub fn samples_per_user(&self, cfg: &SystemConfig) -> usize {
        self.snrs_db.len() * cfg.subcarriers * self.scenarios * self.augmentation
    }

    fn validate(&self) -> Result<()> {
        if self.snrs_db.is_empty() {
            return Err(Error::Empty("training SNR list"));
        }
        if self.scenarios == 0 || self.augmentation == 0 {
            return Err(Error::InvalidConfig(
                "dataset needs at least one scenario and one noise draw".into(),
            ));
        }
        Ok(())
    }
}

/// User `k` (0-based) draws angles from `[-pi/2 + pi k/K, -pi/2 + pi (k+1)/K)`.
pub fn user_sectors(users: usize) -> Vec<(f64, f64)> {
    let width = PI / users as f64;
    (0..users)
        .map(|k| (-PI / 2.0 + width * k as f64, -PI / 2.0 + width * (k + 1) as f64))
        .collect()
}

/// A dataset together with the true channels behind every label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub data: LocalDataset,
    /// `[Re h; Im h]` of the true channel, row-aligned with `data`.
    pub truth: DMatrix<f64>,
}

pub fn build_dataset(
    cfg: &SystemConfig,
    spec: &DatasetSpec,
    pilots: &CMatrix,
    dict: &Dictionary,
    seed: u64,
) -> Result<Vec<LocalDataset>> {
    Ok(build_labeled_dataset(cfg, spec, pilots, dict, seed)?
        .into_iter()
        .map(|l| l.data)
        .collect())
}

pub fn build_labeled_dataset(
    cfg: &SystemConfig,
    spec: &DatasetSpec,
    pilots: &CMatrix,
    dict: &Dictionary,
    seed: u64,
) -> Result<Vec<LabeledDataset>> {
    spec.validate()?;
    if pilots.shape() != (cfg.pilots, cfg.n_antennas) {
        return Err(Error::DimensionMismatch {
            what: "pilot matrix rows",
            expected: cfg.pilots,
            got: pilots.nrows(),
        });
    }
    let (k_count, m_count, p, n) = (cfg.users, cfg.subcarriers, cfg.pilots, cfg.n_antennas);
    let rows = spec.samples_per_user(cfg);
    let mut out: Vec<LabeledDataset> = (0..k_count)
        .map(|k| LabeledDataset {
            data: LocalDataset {
                owner: k,
                inputs: DMatrix::zeros(rows, 3 * p),
                labels: DMatrix::zeros(rows, 2 * n),
            },
            truth: DMatrix::zeros(rows, 2 * n),
        })
        .collect();
    let sectors = user_sectors(k_count);
    let mut row = 0;
    for v in 0..spec.scenarios {
        let scenario = sample_scenario_in_sectors(
            cfg,
            cfg.paths,
            seeding::derive_seed(seed, 0, v as u64, Stream::Scenario),
            &sectors,
        )?;
        let (h, _) = normalize_for_snr(&synthesize_channel(&scenario, cfg)?)?;
        let clean = sound(&h, pilots, 0.0, 0)?;
        let label = omp_run(&clean, dict, &OmpOptions::new(cfg.paths))?.h_hat;
        for (si, &snr_db) in spec.snrs_db.iter().enumerate() {
            let noise_var = 10f64.powf(-snr_db / 10.0);
            for g in 0..spec.augmentation {
                let draw = (v * spec.augmentation + g) as u64;
                let mut rng = seeding::rng(seeding::derive_seed(seed, 1 + si as u64, draw, Stream::Noise));
                for m in 0..m_count {
                    for (k, set) in out.iter_mut().enumerate() {
                        let mut y = clean.y.vector(k, m);
                        for z in y.iter_mut() {
                            *z += complex_gaussian(&mut rng, noise_var);
                        }
                        write_input(&mut set.data.inputs, row, &y);
                        write_complex(&mut set.data.labels, row, label.get(k, m));
                        write_complex(&mut set.truth, row, h.get(k, m));
                    }
                    row += 1;
                }
            }
        }
    }
    debug_assert_eq!(row, rows);
    Ok(out)
}

/// `[Re y; Im y; arg y]` with the phase mapped into `(-pi, pi]`.
pub fn pilot_features(y: &CVector) -> Vec<f64> {
    let p = y.len();
    let mut out = vec![0.0; 3 * p];
    for (i, z) in y.iter().enumerate() {
        out[i] = z.re;
        out[p + i] = z.im;
        let a = z.arg();
        out[2 * p + i] = if a <= -PI { PI } else { a };
    }
    out
}

fn write_input(dst: &mut DMatrix<f64>, row: usize, y: &CVector) {
    for (j, v) in pilot_features(y).into_iter().enumerate() {
        dst[(row, j)] = v;
    }
}

fn write_complex(dst: &mut DMatrix<f64>, row: usize, h: &[Complex64]) {
    let n = h.len();
    for (i, z) in h.iter().enumerate() {
        dst[(row, i)] = z.re;
        dst[(row, n + i)] = z.im;
    }
}

/// Per-channel (Re, Im, arg) mean and standard deviation of a dataset's inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl Standardizer {
    pub fn fit(inputs: &DMatrix<f64>) -> Result<Self> {
        if inputs.nrows() == 0 {
            return Err(Error::Empty("inputs to standardize"));
        }
        let p = inputs.ncols() / 3;
        let mut mean = [0.0; 3];
        let mut std = [0.0; 3];
        for c in 0..3 {
            let block = inputs.columns(c * p, p);
            let count = block.len() as f64;
            let mu = block.sum() / count;
            let var = block.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / count;
            mean[c] = mu;
            // Constant channels are only centred.
            std[c] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, inputs: &DMatrix<f64>) -> DMatrix<f64> {
        let p = inputs.ncols() / 3;
        DMatrix::from_fn(inputs.nrows(), inputs.ncols(), |r, c| {
            let ch = c / p;
            (inputs[(r, c)] - self.mean[ch]) / self.std[ch]
        })
    }

    pub fn apply_dataset(&self, ds: &LocalDataset) -> LocalDataset {
        LocalDataset {
            owner: ds.owner,
            inputs: self.apply(&ds.inputs),
            labels: ds.labels.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::{build_nba, build_physical_grid};
    use crate::estimators::make_pilot_matrix;

    fn small() -> (SystemConfig, CMatrix, Dictionary) {
        let cfg = SystemConfig {
            n_antennas: 32,
            subcarriers: 4,
            users: 4,
            pilots: 8,
            q_angle: 64,
            q_range: 2,
            range_min_m: 0.2,
            range_max_m: 0.45,
            grid_range_min_m: 0.15,
            ..SystemConfig::desk()
        };
        let grid = build_physical_grid(&cfg, cfg.q_angle, cfg.q_range).unwrap();
        let dict = build_nba(&grid, &cfg).unwrap();
        let f = make_pilot_matrix(&cfg, 4);
        (cfg, f, dict)
    }

    #[test]
    fn sample_counts() {
        let (cfg, f, dict) = small();
        let one = SystemConfig {
            subcarriers: 1,
            bandwidth_hz: 0.0,
            ..cfg.clone()
        };
        let d1 = build_nba(&build_physical_grid(&one, 64, 2).unwrap(), &one).unwrap();
        let spec = DatasetSpec {
            scenarios: 1,
            snrs_db: vec![20.0],
            augmentation: 1,
        };
        let sets = build_dataset(&one, &spec, &f, &d1, 1).unwrap();
        assert!(sets.iter().all(|s| s.count() == 1));

        let spec = DatasetSpec {
            scenarios: 2,
            snrs_db: vec![15.0, 20.0, 25.0],
            augmentation: 2,
        };
        let sets = build_dataset(&cfg, &spec, &f, &dict, 1).unwrap();
        assert_eq!(sets.len(), 4);
        for (k, s) in sets.iter().enumerate() {
            assert_eq!(s.owner, k);
            assert_eq!(s.count(), 3 * 4 * 2 * 2);
            assert_eq!(s.inputs.ncols(), 24);
            assert_eq!(s.labels.ncols(), 64);
            s.validate().unwrap();
            let p = 8;
            assert!(s.inputs.columns(2 * p, p).iter().all(|a| *a > -PI && *a <= PI));
        }
        let again = build_dataset(&cfg, &spec, &f, &dict, 1).unwrap();
        assert_eq!(sets, again);
    }

    #[test]
    fn empty_snr_list_is_rejected() {
        let (cfg, f, dict) = small();
        let spec = DatasetSpec {
            scenarios: 1,
            snrs_db: vec![],
            augmentation: 1,
        };
        assert!(matches!(build_dataset(&cfg, &spec, &f, &dict, 0), Err(Error::Empty(_))));
    }

    #[test]
    fn sectors_partition_the_half_plane() {
        let s = user_sectors(8);
        assert_eq!(s[0].0, -PI / 2.0);
        assert!((s[7].1 - PI / 2.0).abs() < 1e-15);
        for w in s.windows(2) {
            assert_eq!(w[0].1, w[1].0);
        }
        let cfg = SystemConfig::desk();
        let sc = sample_scenario_in_sectors(&cfg, 3, 5, &s).unwrap();
        for (k, paths) in sc.users.iter().enumerate() {
            for p in paths {
                let angle = p.point.sin_doa.asin();
                let (lo, hi) = s[k];
                // Endfire clamping only pulls angles inwards.
                assert!(angle >= lo - 1e-12 && angle < hi);
            }
        }
    }

    #[test]
    fn labels_share_across_noise_draws() {
        let (cfg, f, dict) = small();
        let spec = DatasetSpec {
            scenarios: 1,
            snrs_db: vec![10.0, 30.0],
            augmentation: 1,
        };
        let sets = build_labeled_dataset(&cfg, &spec, &f, &dict, 2).unwrap();
        let m = cfg.subcarriers;
        for s in &sets {
            for r in 0..m {
                assert_eq!(s.data.labels.row(r), s.data.labels.row(r + m));
                assert_eq!(s.truth.row(r), s.truth.row(r + m));
                assert_ne!(s.data.inputs.row(r), s.data.inputs.row(r + m));
            }
        }
    }

    #[test]
    fn standardizer_centres_and_scales() {
        let x = DMatrix::from_fn(50, 6, |r, c| (r as f64) * (1.0 + c as f64) + 3.0);
        let s = Standardizer::fit(&x).unwrap();
        let z = s.apply(&x);
        for ch in 0..3 {
            let block = z.columns(ch * 2, 2);
            let mean = block.sum() / block.len() as f64;
            let var = block.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / block.len() as f64;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-12);
        }
    }
}

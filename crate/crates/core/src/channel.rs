//! Multi-user scenario generation and wideband spherical-wave channel synthesis.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{SystemConfig, MAX_SIN_DOA};
use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::seeding;
use crate::wavefield::{fraunhofer_distance, steering_vector, PolarPoint, WavefrontModel, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub point: PolarPoint,
    pub delay_s: f64,
    /// Complex gain per subcarrier.
    pub gains: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    /// `users[k]` holds the paths of user `k`.
    pub users: Vec<Vec<PathSpec>>,
}

impl Scenario {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Channel vectors `h_k[m]` for every user and subcarrier, stored user-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelTensor {
    users: usize,
    subcarriers: usize,
    antennas: usize,
    data: Vec<Complex64>,
}

impl ChannelTensor {
    pub fn zeros(users: usize, subcarriers: usize, antennas: usize) -> Self {
        Self {
            users,
            subcarriers,
            antennas,
            data: vec![Complex64::new(0.0, 0.0); users * subcarriers * antennas],
        }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.users, self.subcarriers, self.antennas)
    }

    fn offset(&self, k: usize, m: usize) -> usize {
        assert!(k < self.users && m < self.subcarriers);
        (k * self.subcarriers + m) * self.antennas
    }

    pub fn get(&self, k: usize, m: usize) -> &[Complex64] {
        let o = self.offset(k, m);
        &self.data[o..o + self.antennas]
    }

    pub fn get_mut(&mut self, k: usize, m: usize) -> &mut [Complex64] {
        let o = self.offset(k, m);
        &mut self.data[o..o + self.antennas]
    }

    pub fn vector(&self, k: usize, m: usize) -> CVector {
        DVector::from_column_slice(self.get(k, m))
    }

    pub fn set(&mut self, k: usize, m: usize, v: &CVector) {
        self.get_mut(k, m).copy_from_slice(v.as_slice());
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn mean_element_power(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.data.len() as f64
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|z| *z *= s);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// RMS path gain `sqrt(E|alpha|^2) = c0 / (4 pi f r) * exp(-k_abs r / 2)`.
pub fn path_gain_magnitude(freq_hz: f64, range_m: f64, k_abs_per_m: f64) -> f64 {
    SPEED_OF_LIGHT / (4.0 * PI * freq_hz * range_m) * (-0.5 * k_abs_per_m * range_m).exp()
}

/// Draw `paths` paths per user with directions uniform in angle.
pub fn sample_scenario(cfg: &SystemConfig, paths: usize, seed: u64) -> Result<Scenario> {
    let sectors = vec![(-FRAC_PI_2, FRAC_PI_2); cfg.users];
    sample_scenario_in_sectors(cfg, paths, seed, &sectors)
}

/// Like [`sample_scenario`], but user `k` draws its angles (radians) from `sectors[k]`.
pub fn sample_scenario_in_sectors(
    cfg: &SystemConfig,
    paths: usize,
    seed: u64,
    sectors: &[(f64, f64)],
) -> Result<Scenario> {
    if paths == 0 {
        return Err(Error::InvalidConfig("at least one path per user".into()));
    }
    cfg.validate()?;
    let far = fraunhofer_distance(&cfg.geometry());
    if cfg.range_max_m > far {
        return Err(Error::InvalidConfig(format!(
            "range_max_m = {} exceeds the Fraunhofer distance {far:.4} m",
            cfg.range_max_m
        )));
    }
    if sectors.len() != cfg.users {
        return Err(Error::DimensionMismatch {
            what: "angular sectors",
            expected: cfg.users,
            got: sectors.len(),
        });
    }
    let freqs = cfg.subcarrier_grid().freqs_hz;
    let mut rng = seeding::rng(seed);
    let users = sectors
        .iter()
        .map(|&(lo, hi)| {
            (0..paths)
                .map(|l| {
                    let angle = rng.random_range(lo..hi);
                    let sin_doa = angle.sin().clamp(-MAX_SIN_DOA, MAX_SIN_DOA);
                    let range_m = rng.random_range(cfg.range_min_m..=cfg.range_max_m);
                    let mut delay_s = range_m / SPEED_OF_LIGHT;
                    if l > 0 {
                        delay_s += rng.random_range(0.0..=cfg.nlos_jitter_s);
                    }
                    let phase = rng.random_range(0.0..2.0 * PI);
                    let gains = freqs
                        .iter()
                        .map(|&f| Complex64::from_polar(path_gain_magnitude(f, range_m, cfg.k_abs_per_m), phase))
                        .collect();
                    PathSpec {
                        point: PolarPoint { sin_doa, range_m },
                        delay_s,
                        gains,
                    }
                })
                .collect()
        })
        .collect();
    Ok(Scenario { seed, users })
}

/// `h_k[m] = sqrt(N/L) sum_l alpha_{k,m,l} a_m(phi, r) exp(-j 2 pi tau f_m)`,
/// with exact spherical steering evaluated at each subcarrier frequency.
pub fn synthesize_channel(scenario: &Scenario, cfg: &SystemConfig) -> Result<ChannelTensor> {
    synthesize_with_model(scenario, cfg, WavefrontModel::Exact)
}

pub fn synthesize_with_model(scenario: &Scenario, cfg: &SystemConfig, model: WavefrontModel) -> Result<ChannelTensor> {
    let geom = cfg.geometry();
    let grid = cfg.subcarrier_grid();
    let n = cfg.n_antennas;
    let mut out = ChannelTensor::zeros(scenario.num_users(), grid.len(), n);
    for (k, paths) in scenario.users.iter().enumerate() {
        if paths.is_empty() {
            return Err(Error::Empty("user without paths"));
        }
        let amp = (n as f64 / paths.len() as f64).sqrt();
        for path in paths {
            if path.gains.len() != grid.len() {
                return Err(Error::DimensionMismatch {
                    what: "per-subcarrier path gains",
                    expected: grid.len(),
                    got: path.gains.len(),
                });
            }
            path.point.validate()?;
            if !(path.delay_s >= 0.0) {
                return Err(Error::InvalidConfig("path delay must be >= 0".into()));
            }
        }
        for (m, &f) in grid.freqs_hz.iter().enumerate() {
            let mut h = CVector::zeros(n);
            for path in paths {
                let cycles = (path.delay_s * f).fract();
                let coef = path.gains[m] * Complex64::from_polar(amp, -2.0 * PI * cycles);
                h.axpy(
                    coef,
                    &steering_vector(path.point, f, &geom, model),
                    Complex64::new(1.0, 0.0),
                );
            }
            out.set(k, m, &h);
        }
    }
    Ok(out)
}

/// Scale to unit mean element power; returns the applied scale factor.
pub fn normalize_for_snr(tensor: &ChannelTensor) -> Result<(ChannelTensor, f64)> {
    let p = tensor.mean_element_power();
    if !(p > 0.0) {
        return Err(Error::Empty("all-zero channel tensor"));
    }
    let scale = 1.0 / p.sqrt();
    Ok((tensor.scaled(scale), scale))
}

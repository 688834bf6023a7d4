//! Experiment configuration files (TOML).
//!
//! Every key is optional except `seed`, which may instead come from the
//! command line. Unknown keys are rejected. Example:
//!
//! ```toml
//! profile = "desk"          # desk | paper base system parameters
//! seed = 7
//! trials = 100
//! estimators = ["lmmse", "ff-omp", "nf-omp", "nba-omp"]
//!
//! [system]                  # overrides of individual system parameters
//! bandwidth_hz = 30e9
//!
//! [sweep]
//! axis = "bandwidth"        # snr | bandwidth | none
//! values = [0.017, 0.1, 0.233]
//! snr_db = 10.0             # used when the axis is not snr
//! covariance_draws = 2000
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Profile, SystemConfig};
use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisKind {
    Snr,
    Bandwidth,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub axis: AxisKind,
    /// SNRs in dB or bandwidth ratios `B / f_c`, depending on the axis.
    pub values: Vec<f64>,
    /// SNR used when the axis is not SNR; `inf` means noiseless.
    pub snr_db: f64,
    /// Channel draws behind each LMMSE covariance estimate.
    pub covariance_draws: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: AxisKind::Snr,
            values: default_values(&AxisKind::Snr),
            snr_db: 10.0,
            covariance_draws: 2000,
        }
    }
}

fn default_values(axis: &AxisKind) -> Vec<f64> {
    match axis {
        AxisKind::Snr => vec![0.0, 5.0, 10.0, 15.0, 20.0],
        AxisKind::Bandwidth => vec![0.017, 0.05, 0.1, 0.166, 0.233],
        AxisKind::None => Vec::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridAxis {
    pub fn step(&self) -> f64 {
        if self.count > 1 {
            (self.max - self.min) / (self.count - 1) as f64
        } else {
            0.0
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        self.min + self.step() * i as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainMapConfig {
    pub user_doa_deg: f64,
    pub user_range_m: f64,
    /// Subcarrier indices to map; all when empty.
    pub subcarriers: Vec<usize>,
    /// Broadside coordinate.
    pub x: GridAxis,
    /// Coordinate along the array.
    pub y: GridAxis,
}

impl Default for GainMapConfig {
    fn default() -> Self {
        Self {
            user_doa_deg: 45.0,
            user_range_m: 6.0,
            subcarriers: Vec::new(),
            x: GridAxis {
                min: 0.5,
                max: 12.0,
                count: 231,
            },
            y: GridAxis {
                min: -2.0,
                max: 12.0,
                count: 281,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlConfig {
    /// Channel realizations per user (V).
    pub scenarios: usize,
    pub train_snrs_db: Vec<f64>,
    /// Noise draws per realization and SNR.
    pub augmentation: usize,
    pub hidden: Vec<usize>,
    pub rounds: usize,
    pub lr: f64,
    /// Mini-batch size; full batch when absent.
    pub batch: Option<usize>,
    pub dropout: f64,
    pub eval_scenarios: usize,
    pub eval_snr_db: f64,
    /// Held-out samples scored (taken from the pooled evaluation set).
    pub eval_samples: usize,
}

impl Default for FlConfig {
    fn default() -> Self {
        Self {
            scenarios: 100,
            train_snrs_db: vec![15.0, 20.0, 25.0],
            augmentation: 10,
            hidden: vec![1024, 1024],
            rounds: 100,
            lr: 0.001,
            batch: None,
            dropout: 0.0,
            eval_scenarios: 2,
            eval_snr_db: 20.0,
            eval_samples: 200,
        }
    }
}

/// Inputs of the overhead report that are not system parameters. Absent
/// entries are taken from the federated-learning setup.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverheadConfig {
    pub samples_per_user: Option<u64>,
    pub params: Option<u64>,
    pub rounds: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub profile: Profile,
    pub system: SystemConfig,
    pub seed: u64,
    pub trials: usize,
    pub estimators: Vec<EstimatorKind>,
    /// Output directory; not part of the configuration hash.
    #[serde(skip)]
    pub output: Option<PathBuf>,
    pub sweep: SweepConfig,
    pub gain_map: GainMapConfig,
    pub fl: FlConfig,
    pub overhead: OverheadConfig,
}

/// Settings given on the command line, which win over the file.
#[derive(Debug, Clone, Default)]
pub struct CliOverrides {
    pub profile: Option<Profile>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    /// Seed used when neither the command line nor the file gives one.
    pub fallback_seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    profile: Option<Profile>,
    seed: Option<u64>,
    trials: Option<usize>,
    estimators: Option<Vec<EstimatorKind>>,
    output: Option<PathBuf>,
    system: Option<SystemOverrides>,
    sweep: Option<SweepFile>,
    gain_map: Option<GainMapFile>,
    fl: Option<FlFile>,
    overhead: Option<OverheadConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemOverrides {
    n_antennas: Option<usize>,
    carrier_hz: Option<f64>,
    bandwidth_hz: Option<f64>,
    /// Alternative to `bandwidth_hz`.
    bandwidth_ratio: Option<f64>,
    subcarriers: Option<usize>,
    pilots: Option<usize>,
    rf_chains: Option<usize>,
    users: Option<usize>,
    paths: Option<usize>,
    range_min_m: Option<f64>,
    range_max_m: Option<f64>,
    grid_range_min_m: Option<f64>,
    q_angle: Option<usize>,
    q_range: Option<usize>,
    k_abs_per_m: Option<f64>,
    nlos_jitter_s: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    axis: Option<AxisKind>,
    values: Option<Vec<f64>>,
    snr_db: Option<f64>,
    covariance_draws: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GainMapFile {
    user_doa_deg: Option<f64>,
    user_range_m: Option<f64>,
    subcarriers: Option<Vec<usize>>,
    x: Option<GridAxis>,
    y: Option<GridAxis>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlFile {
    scenarios: Option<usize>,
    train_snrs_db: Option<Vec<f64>>,
    augmentation: Option<usize>,
    hidden: Option<Vec<usize>>,
    rounds: Option<usize>,
    lr: Option<f64>,
    batch: Option<usize>,
    dropout: Option<f64>,
    eval_scenarios: Option<usize>,
    eval_snr_db: Option<f64>,
    eval_samples: Option<usize>,
}

macro_rules! take {
    ($dst:expr, $src:expr, $($field:ident),+) => {
        $(if let Some(v) = $src.$field { $dst.$field = v; })+
    };
}

impl ExperimentConfig {
    /// Profile defaults with the given seed.
    pub fn defaults(profile: Profile, seed: u64) -> Self {
        Self {
            profile,
            system: SystemConfig::profile(profile),
            seed,
            trials: 100,
            estimators: EstimatorKind::ALL.to_vec(),
            output: None,
            sweep: SweepConfig::default(),
            gain_map: GainMapConfig::default(),
            fl: FlConfig::default(),
            overhead: OverheadConfig::default(),
        }
    }

    pub fn from_toml_str(src: &str, cli: &CliOverrides) -> Result<Self> {
        let file: FileConfig = toml::from_str(src).map_err(|e| {
            let line = e.span().map(|s| line_at(src, s.start));
            located(line, e.message())
        })?;
        let profile = cli.profile.or(file.profile).unwrap_or(Profile::Desk);
        let seed = cli
            .seed
            .or(file.seed)
            .or(cli.fallback_seed)
            .ok_or_else(|| Error::InvalidConfig("a seed is required (config `seed` or --seed)".into()))?;
        let mut cfg = Self::defaults(profile, seed);
        cfg.output = cli.output.clone().or(file.output);
        take!(cfg, file, trials, estimators);
        if let Some(s) = file.system {
            let sys = &mut cfg.system;
            take!(
                sys,
                s,
                n_antennas,
                carrier_hz,
                bandwidth_hz,
                subcarriers,
                pilots,
                rf_chains,
                users,
                paths,
                range_min_m,
                range_max_m,
                grid_range_min_m,
                q_angle,
                q_range,
                k_abs_per_m,
                nlos_jitter_s
            );
            if let Some(ratio) = s.bandwidth_ratio {
                if s.bandwidth_hz.is_some() {
                    return Err(located(
                        find_key(src, Some("system"), "bandwidth_ratio"),
                        "give either bandwidth_hz or bandwidth_ratio, not both",
                    ));
                }
                sys.bandwidth_hz = ratio * sys.carrier_hz;
            }
        }
        if let Some(s) = file.sweep {
            if let Some(axis) = s.axis {
                cfg.sweep.values = default_values(&axis);
                cfg.sweep.axis = axis;
            }
            take!(cfg.sweep, s, values, snr_db, covariance_draws);
        }
        if let Some(g) = file.gain_map {
            take!(cfg.gain_map, g, user_doa_deg, user_range_m, subcarriers, x, y);
        }
        if let Some(f) = file.fl {
            take!(
                cfg.fl,
                f,
                scenarios,
                train_snrs_db,
                augmentation,
                hidden,
                rounds,
                lr,
                dropout,
                eval_scenarios,
                eval_snr_db,
                eval_samples
            );
            if f.batch.is_some() {
                cfg.fl.batch = f.batch;
            }
        }
        if let Some(o) = file.overhead {
            cfg.overhead = o;
        }
        cfg.validate_in(src)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>, cli: &CliOverrides) -> Result<Self> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path)?;
        Self::from_toml_str(&src, cli).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_in("")
    }

    /// Checks value ranges, pointing at the offending line of `src` when found.
    fn validate_in(&self, src: &str) -> Result<()> {
        let fail = |section: Option<&str>, key: &str, msg: &str| -> Result<()> {
            Err(located(find_key(src, section, key), &format!("`{key}` {msg}")))
        };
        if let Err(Error::InvalidConfig(msg)) = self.system.validate() {
            return Err(located(find_section(src, "system"), &msg));
        }
        if self.trials == 0 {
            return fail(None, "trials", "must be >= 1");
        }
        if self.estimators.is_empty() {
            return fail(None, "estimators", "must list at least one estimator");
        }
        let sw = &self.sweep;
        if sw.axis != AxisKind::None && sw.values.is_empty() {
            return fail(Some("sweep"), "values", "must not be empty for this axis");
        }
        // An infinite SNR is a noiseless run.
        if sw.values.iter().any(|v| v.is_nan()) || sw.snr_db.is_nan() {
            return fail(Some("sweep"), "values", "must be numbers");
        }
        if sw.axis == AxisKind::Bandwidth && sw.values.iter().any(|v| v.is_infinite()) {
            return fail(Some("sweep"), "values", "bandwidth ratios must be finite");
        }
        if sw.axis == AxisKind::Bandwidth && sw.values.iter().any(|&r| !(0.0..=0.33).contains(&r)) {
            return fail(Some("sweep"), "values", "bandwidth ratios must lie in [0, 0.33]");
        }
        if sw.covariance_draws == 0 && self.estimators.contains(&EstimatorKind::Lmmse) {
            return fail(Some("sweep"), "covariance_draws", "must be >= 1 when LMMSE runs");
        }
        let g = &self.gain_map;
        if !(g.user_doa_deg.abs() < 85.0) || !(g.user_range_m > 0.0) {
            return fail(
                Some("gain_map"),
                "user_doa_deg",
                "user must lie within +-85 deg at positive range",
            );
        }
        for (key, axis) in [("x", g.x), ("y", g.y)] {
            if axis.count == 0 || !(axis.max >= axis.min) {
                return fail(Some("gain_map"), key, "needs count >= 1 and max >= min");
            }
        }
        if g.x.min <= 0.0 {
            return fail(Some("gain_map"), "x", "must stay in front of the array (min > 0)");
        }
        if let Some(&m) = g.subcarriers.iter().find(|&&m| m >= self.system.subcarriers) {
            return fail(
                Some("gain_map"),
                "subcarriers",
                &format!("index {m} exceeds the {} subcarriers", self.system.subcarriers),
            );
        }
        let f = &self.fl;
        if f.scenarios == 0 || f.augmentation == 0 || f.eval_scenarios == 0 || f.eval_samples == 0 {
            return fail(
                Some("fl"),
                "scenarios",
                "scenario, augmentation and evaluation counts must be >= 1",
            );
        }
        if f.train_snrs_db.is_empty() {
            return fail(Some("fl"), "train_snrs_db", "must not be empty");
        }
        if !(f.lr >= 0.0) {
            return fail(Some("fl"), "lr", "must be >= 0");
        }
        if !(0.0..1.0).contains(&f.dropout) {
            return fail(Some("fl"), "dropout", "must lie in [0, 1)");
        }
        if f.batch == Some(0) || f.hidden.contains(&0) {
            return fail(Some("fl"), "hidden", "layer widths and batch size must be >= 1");
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form of the resolved configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("configuration serializes");
        hex::encode(Sha256::digest(&json))
    }
}

fn located(line: Option<usize>, msg: &str) -> Error {
    match line {
        Some(l) => Error::InvalidConfig(format!("line {l}: {msg}")),
        None => Error::InvalidConfig(msg.to_string()),
    }
}

fn line_at(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

fn section_of(line: &str) -> Option<&str> {
    let t = line.trim();
    t.strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .map(|s| s.trim_matches(['[', ']', ' ']))
}

fn find_section(src: &str, section: &str) -> Option<usize> {
    src.lines().position(|l| section_of(l) == Some(section)).map(|i| i + 1)
}

/// 1-based line where `key` is assigned inside `section` (top level when `None`).
fn find_key(src: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<&str> = None;
    for (i, line) in src.lines().enumerate() {
        if let Some(s) = section_of(line) {
            current = Some(s);
            continue;
        }
        let t = line.trim_start();
        if current == section
            && t.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        {
            return Some(i + 1);
        }
    }
    None
}

//! System parameters shared by every stage of the pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wavefield::{ArrayGeometry, SubcarrierGrid};

/// Largest |sin(DoA)| ever sampled or gridded (sin 85°).
pub const MAX_SIN_DOA: f64 = 0.996_194_698_091_745_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Number of ULA elements (N).
    pub n_antennas: usize,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    /// Number of subcarriers (M).
    pub subcarriers: usize,
    /// Pilot beams per subcarrier (P).
    pub pilots: usize,
    pub rf_chains: usize,
    pub users: usize,
    /// Propagation paths per user (L).
    pub paths: usize,
    /// User ranges are drawn uniformly in `[range_min_m, range_max_m]`.
    pub range_min_m: f64,
    pub range_max_m: f64,
    /// Closest range covered by the dictionary grid.
    pub grid_range_min_m: f64,
    /// Dictionary factorization, Q = q_angle * q_range.
    pub q_angle: usize,
    pub q_range: usize,
    /// Molecular absorption coefficient in 1/m.
    pub k_abs_per_m: f64,
    /// Upper bound of the uniform excess delay added to NLoS paths.
    pub nlos_jitter_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Desk,
    Paper,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(Error::InvalidConfig(format!(
                "unknown profile `{other}` (expected desk|paper)"
            ))),
        }
    }
}

impl SystemConfig {
    /// Full-size setting: N=256, M=128, f_c=300 GHz, B=30 GHz, K=N_RF=P=8, L=3.
    pub fn paper() -> Self {
        Self {
            n_antennas: 256,
            carrier_hz: 300e9,
            bandwidth_hz: 30e9,
            subcarriers: 128,
            pilots: 8,
            rf_chains: 8,
            users: 8,
            paths: 3,
            range_min_m: 5.0,
            range_max_m: 30.0,
            grid_range_min_m: 3.0,
            q_angle: 256,
            q_range: 10,
            k_abs_per_m: 0.0033,
            nlos_jitter_s: 10e-9,
        }
    }

    /// Laptop-scale setting: N=64, M=16 with the same carrier and relative bandwidth.
    ///
    /// User ranges are the full-size ones scaled by the ratio of Fraunhofer
    /// distances (1/16), so `r/F` and hence the wavefront curvature across the
    /// aperture match. The grid uses 160 x 4 points (still Q = 10N): with 64
    /// elements adjacent range cells of a 10-deep grid are closer than the
    /// Fresnel model error and cannot be told apart.
    pub fn desk() -> Self {
        Self {
            n_antennas: 64,
            subcarriers: 16,
            range_min_m: 0.3125,
            range_max_m: 1.875,
            grid_range_min_m: 0.35,
            q_angle: 160,
            q_range: 4,
            ..Self::paper()
        }
    }

    pub fn profile(profile: Profile) -> Self {
        match profile {
            Profile::Desk => Self::desk(),
            Profile::Paper => Self::paper(),
        }
    }

    pub fn with_bandwidth_ratio(mut self, ratio: f64) -> Self {
        self.bandwidth_hz = ratio * self.carrier_hz;
        self
    }

    pub fn geometry(&self) -> ArrayGeometry {
        ArrayGeometry::new(self.n_antennas, self.carrier_hz)
    }

    pub fn subcarrier_grid(&self) -> SubcarrierGrid {
        SubcarrierGrid::new(self.carrier_hz, self.bandwidth_hz, self.subcarriers)
    }

    pub fn dictionary_size(&self) -> usize {
        self.q_angle * self.q_range
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_antennas", self.n_antennas),
            ("subcarriers", self.subcarriers),
            ("pilots", self.pilots),
            ("rf_chains", self.rf_chains),
            ("users", self.users),
            ("paths", self.paths),
            ("q_angle", self.q_angle),
            ("q_range", self.q_range),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        if !(self.carrier_hz > 0.0) {
            return Err(Error::InvalidConfig("carrier_hz must be > 0".into()));
        }
        if !(self.bandwidth_hz >= 0.0) || self.bandwidth_hz >= 2.0 * self.carrier_hz {
            return Err(Error::InvalidConfig(
                "bandwidth_hz must lie in [0, 2 * carrier_hz)".into(),
            ));
        }
        if !(self.range_min_m > 0.0 && self.range_min_m <= self.range_max_m) {
            return Err(Error::InvalidConfig(
                "range bounds must satisfy 0 < range_min_m <= range_max_m".into(),
            ));
        }
        if !(self.grid_range_min_m > 0.0) {
            return Err(Error::InvalidConfig("grid_range_min_m must be > 0".into()));
        }
        if !(self.k_abs_per_m >= 0.0) || !(self.nlos_jitter_s >= 0.0) {
            return Err(Error::InvalidConfig(
                "k_abs_per_m and nlos_jitter_s must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

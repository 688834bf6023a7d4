use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelTensor;
use crate::error::Result;
use crate::wavefield::PolarPoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEstimate {
    /// Selected dictionary column.
    pub grid_index: usize,
    pub sin_doa: f64,
    /// `None` for plane-wave (far-field) atoms.
    pub range_m: Option<f64>,
    /// Per-subcarrier beam-split offsets; zero for beam-split unaware dictionaries.
    pub delta_doa: Vec<f64>,
    pub delta_range: Vec<f64>,
}

impl PathEstimate {
    pub fn point(&self) -> Option<PolarPoint> {
        self.range_m.map(|range_m| PolarPoint {
            sin_doa: self.sin_doa,
            range_m,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserEstimate {
    /// Selected indices in selection order.
    pub support: Vec<usize>,
    pub paths: Vec<PathEstimate>,
    /// `residual_norms[l][m]`: residual norm after `l` selections.
    pub residual_norms: Vec<Vec<f64>>,
    pub nmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimator: String,
    pub h_hat: ChannelTensor,
    pub users: Vec<UserEstimate>,
    /// Largest condition number met while inverting the sensing columns.
    pub max_condition: f64,
}

impl EstimateReport {
    /// Fill in per-user NMSE against the true channels.
    pub fn score(&mut self, h_true: &ChannelTensor) {
        for (k, user) in self.users.iter_mut().enumerate() {
            user.nmse = Some(user_nmse(h_true, &self.h_hat, k));
        }
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

pub(crate) fn user_nmse(h_true: &ChannelTensor, h_hat: &ChannelTensor, k: usize) -> f64 {
    let mut err = 0.0;
    let mut power = 0.0;
    for m in 0..h_true.subcarriers() {
        for (a, b) in h_hat.get(k, m).iter().zip(h_true.get(k, m)) {
            err += (a - b).norm_sqr();
            power += b.norm_sqr();
        }
    }
    err / power
}

/// Mean over users of `sum_m ||h_hat - h||^2 / sum_m ||h||^2`.
pub fn nmse(h_true: &ChannelTensor, h_hat: &ChannelTensor) -> f64 {
    assert_eq!(h_true.shape(), h_hat.shape(), "tensor shapes differ");
    let k_count = h_true.users();
    (0..k_count).map(|k| user_nmse(h_true, h_hat, k)).sum::<f64>() / k_count as f64
}

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelTensor;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::seeding;

/// Received pilots `y_k[m] = F h_k[m] + w_k[m]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotFrame {
    /// `P x N` sounding matrix.
    pub f_matrix: CMatrix,
    pub noise_var: f64,
    /// Observations, shape `(K, M, P)`.
    pub y: ChannelTensor,
}

impl PilotFrame {
    pub fn pilots(&self) -> usize {
        self.f_matrix.nrows()
    }

    pub fn antennas(&self) -> usize {
        self.f_matrix.ncols()
    }
}

/// Random-phase sounding beams with element modulus `1/sqrt(N)`.
pub fn make_pilot_matrix(cfg: &SystemConfig, seed: u64) -> CMatrix {
    let mut rng = seeding::rng(seed);
    let scale = 1.0 / (cfg.n_antennas as f64).sqrt();
    CMatrix::from_fn(cfg.pilots, cfg.n_antennas, |_, _| {
        Complex64::from_polar(scale, rng.random_range(0.0..2.0 * PI))
    })
}

/// Unitary `N x N` DFT sounding matrix (element modulus `1/sqrt(N)`), used by
/// the full-training LS and LMMSE baselines.
pub fn dft_pilot_matrix(n: usize) -> CMatrix {
    let scale = 1.0 / (n as f64).sqrt();
    CMatrix::from_fn(n, n, |p, i| {
        let cycles = ((p * i) % n) as f64 / n as f64;
        Complex64::from_polar(scale, -2.0 * PI * cycles)
    })
}

/// Circularly-symmetric complex Gaussian sample with variance `var`.
pub fn complex_gaussian<R: Rng>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

pub fn sound(h: &ChannelTensor, f_matrix: &CMatrix, noise_var: f64, seed: u64) -> Result<PilotFrame> {
    if f_matrix.ncols() != h.antennas() {
        return Err(Error::DimensionMismatch {
            what: "sounding matrix columns",
            expected: h.antennas(),
            got: f_matrix.ncols(),
        });
    }
    if !(noise_var >= 0.0) {
        return Err(Error::InvalidConfig("noise variance must be >= 0".into()));
    }
    let (k_count, m_count, _) = h.shape();
    let p = f_matrix.nrows();
    let mut rng = seeding::rng(seed);
    let mut y = ChannelTensor::zeros(k_count, m_count, p);
    for k in 0..k_count {
        for m in 0..m_count {
            let mut obs = f_matrix * h.vector(k, m);
            if noise_var > 0.0 {
                for z in obs.iter_mut() {
                    *z += complex_gaussian(&mut rng, noise_var);
                }
            }
            y.set(k, m, &obs);
        }
    }
    Ok(PilotFrame {
        f_matrix: f_matrix.clone(),
        noise_var,
        y,
    })
}

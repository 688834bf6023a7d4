//! Full-training linear baselines: least squares and linear MMSE.

use num_complex::Complex64;

use crate::channel::{normalize_for_snr, sample_scenario, synthesize_channel, ChannelTensor};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{pinv, solve_hpd, CMatrix};
use crate::seeding;

use super::pilots::PilotFrame;

/// `(F^H F)^{-1} F^H y` per user and subcarrier.
pub fn ls_estimate(frame: &PilotFrame) -> Result<ChannelTensor> {
    let (p, n) = frame.f_matrix.shape();
    if p < n {
        return Err(Error::RankDeficient(format!(
            "least squares needs P >= N, got P = {p}, N = {n}"
        )));
    }
    let (f_pinv, cond) = pinv(&frame.f_matrix);
    if !cond.is_finite() {
        return Err(Error::RankDeficient("F^H F is singular".into()));
    }
    let (k_count, m_count, _) = frame.y.shape();
    let mut out = ChannelTensor::zeros(k_count, m_count, n);
    for k in 0..k_count {
        for m in 0..m_count {
            out.set(k, m, &(&f_pinv * frame.y.vector(k, m)));
        }
    }
    Ok(out)
}

/// `R F^H (F R F^H + sigma^2 I)^{-1} y` with one covariance per subcarrier,
/// shared by all users.
pub fn lmmse_estimate(frame: &PilotFrame, covariances: &[CMatrix]) -> Result<ChannelTensor> {
    let (k_count, m_count, _) = frame.y.shape();
    if covariances.len() != m_count {
        return Err(Error::DimensionMismatch {
            what: "per-subcarrier covariances",
            expected: m_count,
            got: covariances.len(),
        });
    }
    let f = &frame.f_matrix;
    let (p, n) = f.shape();
    let mut out = ChannelTensor::zeros(k_count, m_count, n);
    for (m, r) in covariances.iter().enumerate() {
        if r.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                what: "covariance order",
                expected: n,
                got: r.nrows(),
            });
        }
        let rfh = r * f.adjoint();
        let mut gram = f * &rfh;
        for i in 0..p {
            gram[(i, i)] += Complex64::new(frame.noise_var, 0.0);
        }
        // W^H = gram^{-1} (R F^H)^H, gram Hermitian.
        let w_h = solve_hpd(&gram, &rfh.adjoint())?;
        if w_h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Singular(format!("F R F^H + sigma^2 I at subcarrier {m}")));
        }
        let w = w_h.adjoint();
        for k in 0..k_count {
            out.set(k, m, &(&w * frame.y.vector(k, m)));
        }
    }
    Ok(out)
}

/// Per-subcarrier sample covariance of unit-power-normalized channels from
/// at least `draws` independent user realizations.
pub fn sample_covariance(cfg: &SystemConfig, draws: usize, seed: u64) -> Result<Vec<CMatrix>> {
    if draws == 0 {
        return Err(Error::Empty("covariance draws"));
    }
    let n = cfg.n_antennas;
    let mut acc = vec![CMatrix::zeros(n, n); cfg.subcarriers];
    let mut count = 0usize;
    let mut batch = 0u64;
    while count < draws {
        let s = sample_scenario(
            cfg,
            cfg.paths,
            seeding::derive_seed(seed, batch, 0, seeding::Stream::Covariance),
        )?;
        let (h, _) = normalize_for_snr(&synthesize_channel(&s, cfg)?)?;
        for k in 0..h.users() {
            for (m, r) in acc.iter_mut().enumerate() {
                let v = h.vector(k, m);
                r.gerc(Complex64::new(1.0, 0.0), &v, &v, Complex64::new(1.0, 0.0));
            }
        }
        count += h.users();
        batch += 1;
    }
    let inv = Complex64::new(1.0 / count as f64, 0.0);
    Ok(acc.into_iter().map(|r| r * inv).collect())
}

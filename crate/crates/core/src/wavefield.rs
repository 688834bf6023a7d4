//! Array geometry, subcarrier layout and near-field wavefront models.
//!
//! Directions are carried as `sin(DoA)` throughout. Per-antenna ranges are
//! measured from the user to element `n` of a half-wavelength ULA whose first
//! element sits at the origin. Steering vectors use the phase convention
//! `exp(-j 2 pi f r_n / c0) / sqrt(N)`; the common range term is split off
//! before evaluation so that relative element phases stay accurate even for
//! ranges of many kilometres.
//!
//! The beam-split map relates a physical location `(phi, r)` to the spatial
//! location where a beam designed at the carrier `f_c` actually focuses when
//! radiated at subcarrier `f_m`, with `eta_m = f_c / f_m`:
//!
//! ```text
//! phi_bar = eta_m * phi
//! r_bar   = r * (1 - eta_m^2 phi^2) / (eta_m * (1 - phi^2))
//! ```

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light used for every wavelength computation (rounded, so that
/// a 300 GHz carrier has a wavelength of exactly 1 mm).
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub n_antennas: usize,
    pub carrier_hz: f64,
    pub spacing_m: f64,
    /// Aperture, taken as `N * d`.
    pub aperture_m: f64,
}

impl ArrayGeometry {
    pub fn new(n_antennas: usize, carrier_hz: f64) -> Self {
        let spacing_m = SPEED_OF_LIGHT / (2.0 * carrier_hz);
        Self {
            n_antennas,
            carrier_hz,
            spacing_m,
            aperture_m: n_antennas as f64 * spacing_m,
        }
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubcarrierGrid {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub freqs_hz: Vec<f64>,
    /// `f_c / f_m` per subcarrier.
    pub etas: Vec<f64>,
}

impl SubcarrierGrid {
    pub fn new(carrier_hz: f64, bandwidth_hz: f64, m_count: usize) -> Self {
        let step = bandwidth_hz / m_count as f64;
        let mid = (m_count as f64 - 1.0) / 2.0;
        let freqs_hz: Vec<f64> = (0..m_count).map(|i| carrier_hz + step * (i as f64 - mid)).collect();
        let etas = freqs_hz.iter().map(|f| carrier_hz / f).collect();
        Self {
            carrier_hz,
            bandwidth_hz,
            freqs_hz,
            etas,
        }
    }

    pub fn len(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs_hz.is_empty()
    }

    /// Index closest to the carrier (exact for odd M).
    pub fn center_index(&self) -> usize {
        (self.len() - 1) / 2
    }
}

/// A user location in polar coordinates: `sin(DoA)` and range to the array origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPoint {
    pub sin_doa: f64,
    pub range_m: f64,
}

impl PolarPoint {
    pub fn new(sin_doa: f64, range_m: f64) -> Result<Self> {
        let p = Self { sin_doa, range_m };
        p.validate()?;
        Ok(p)
    }

    pub fn from_degrees(doa_deg: f64, range_m: f64) -> Result<Self> {
        Self::new(doa_deg.to_radians().sin(), range_m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sin_doa.abs() <= 1.0) {
            return Err(Error::Domain(format!("|sin_doa| = {} exceeds 1", self.sin_doa.abs())));
        }
        if !(self.range_m > 0.0) || !self.range_m.is_finite() {
            return Err(Error::Domain(format!(
                "range must be finite and positive, got {}",
                self.range_m
            )));
        }
        Ok(())
    }

    /// Curvature term `(1 - phi^2) / (2 r)` of the Fresnel expansion.
    pub fn curvature(&self) -> f64 {
        (1.0 - self.sin_doa * self.sin_doa) / (2.0 * self.range_m)
    }

    /// Cartesian coordinates with the array on the y-axis and broadside along +x.
    pub fn to_cartesian(&self) -> (f64, f64) {
        let cos_doa = (1.0 - self.sin_doa * self.sin_doa).max(0.0).sqrt();
        (self.range_m * cos_doa, self.range_m * self.sin_doa)
    }

    pub fn from_cartesian(x: f64, y: f64) -> Result<Self> {
        let range_m = x.hypot(y);
        if range_m == 0.0 {
            return Err(Error::Domain("cartesian origin has no direction".into()));
        }
        Self::new(y / range_m, range_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WavefrontModel {
    /// Spherical wavefront with exact element ranges.
    Exact,
    /// Second-order (Fresnel) expansion of the element ranges.
    Fresnel,
}

pub fn fraunhofer_distance(geom: &ArrayGeometry) -> f64 {
    2.0 * geom.aperture_m * geom.aperture_m / geom.wavelength_m()
}

/// Distance from `p` to element `n` (1-based).
pub fn exact_antenna_range(p: PolarPoint, n: usize, geom: &ArrayGeometry) -> f64 {
    let x = element_offset(n, geom);
    (p.range_m * p.range_m + x * x - 2.0 * p.range_m * x * p.sin_doa).sqrt()
}

/// Fresnel approximation of [`exact_antenna_range`].
pub fn fresnel_antenna_range(p: PolarPoint, n: usize, geom: &ArrayGeometry) -> f64 {
    p.range_m + range_excess(p, element_offset(n, geom), WavefrontModel::Fresnel)
}

fn element_offset(n: usize, geom: &ArrayGeometry) -> f64 {
    debug_assert!(n >= 1, "antenna index is 1-based");
    (n - 1) as f64 * geom.spacing_m
}

/// `r_n - r` for an element at offset `x`, evaluated without cancellation.
fn range_excess(p: PolarPoint, x: f64, model: WavefrontModel) -> f64 {
    let (r, phi) = (p.range_m, p.sin_doa);
    match model {
        WavefrontModel::Exact => {
            let num = x * x - 2.0 * r * x * phi;
            let rn = (r * r + num).sqrt();
            num / (rn + r)
        }
        WavefrontModel::Fresnel => -x * phi + x * x * p.curvature(),
    }
}

/// Near-field steering vector at `freq_hz`, unit norm.
pub fn steering_vector(p: PolarPoint, freq_hz: f64, geom: &ArrayGeometry, model: WavefrontModel) -> DVector<Complex64> {
    let cycles_per_m = freq_hz / SPEED_OF_LIGHT;
    // Common phase reduced modulo one cycle before adding element terms.
    let common = (cycles_per_m * p.range_m).fract();
    let scale = 1.0 / (geom.n_antennas as f64).sqrt();
    DVector::from_iterator(
        geom.n_antennas,
        (0..geom.n_antennas).map(|i| {
            let x = i as f64 * geom.spacing_m;
            let cycles = common + cycles_per_m * range_excess(p, x, model);
            Complex64::from_polar(scale, -2.0 * PI * cycles)
        }),
    )
}

/// Plane-wave steering vector `exp(j 2 pi f x phi / c0) / sqrt(N)`.
pub fn farfield_steering_vector(sin_doa: f64, freq_hz: f64, geom: &ArrayGeometry) -> DVector<Complex64> {
    let cycles_per_m = freq_hz / SPEED_OF_LIGHT;
    let scale = 1.0 / (geom.n_antennas as f64).sqrt();
    DVector::from_iterator(
        geom.n_antennas,
        (0..geom.n_antennas).map(|i| {
            let x = i as f64 * geom.spacing_m;
            Complex64::from_polar(scale, 2.0 * PI * cycles_per_m * x * sin_doa)
        }),
    )
}

fn check_eta(eta_m: f64) -> Result<()> {
    if eta_m > 0.0 && eta_m.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("eta must be positive, got {eta_m}")))
    }
}

/// Where a carrier-designed beam toward `p` focuses at the subcarrier with ratio `eta_m`.
pub fn spatial_from_physical(p: PolarPoint, eta_m: f64) -> Result<PolarPoint> {
    check_eta(eta_m)?;
    p.validate()?;
    let phi = p.sin_doa;
    let phi_bar = eta_m * phi;
    if phi_bar.abs() >= 1.0 {
        return Err(Error::Domain(format!(
            "spatial direction {phi_bar} leaves the visible region"
        )));
    }
    if phi.abs() >= 1.0 {
        return Err(Error::Domain("endfire direction has no range map".into()));
    }
    let range = p.range_m * (1.0 - phi_bar * phi_bar) / (eta_m * (1.0 - phi * phi));
    PolarPoint::new(phi_bar, range)
}

/// Inverse of [`spatial_from_physical`].
pub fn physical_from_spatial(p_bar: PolarPoint, eta_m: f64) -> Result<PolarPoint> {
    check_eta(eta_m)?;
    p_bar.validate()?;
    let phi_bar = p_bar.sin_doa;
    let phi = phi_bar / eta_m;
    if phi.abs() >= 1.0 || phi_bar.abs() >= 1.0 {
        return Err(Error::Domain(format!(
            "spatial direction {phi_bar} has no physical pre-image at eta {eta_m}"
        )));
    }
    let range = eta_m * (1.0 - phi * phi) / (1.0 - phi_bar * phi_bar) * p_bar.range_m;
    PolarPoint::new(phi, range)
}

/// Beam-split offsets `(phi_bar - phi, r_bar - r)`.
pub fn nb_deltas(p: PolarPoint, eta_m: f64) -> (f64, f64) {
    let phi = p.sin_doa;
    let delta_doa = (eta_m - 1.0) * phi;
    let ratio = (1.0 - eta_m * eta_m * phi * phi) / (eta_m * (1.0 - phi * phi));
    (delta_doa, (ratio - 1.0) * p.range_m)
}

/// Normalized gain `|u^H v_m|^2` of a carrier beam `u` toward `p_physical`
/// observed through the subcarrier-`m` response `v_m` at `p_spatial`.
pub fn array_gain(
    p_physical: PolarPoint,
    p_spatial: PolarPoint,
    m: usize,
    grid: &SubcarrierGrid,
    geom: &ArrayGeometry,
) -> f64 {
    let u = steering_vector(p_physical, grid.carrier_hz, geom, WavefrontModel::Fresnel);
    let v = steering_vector(p_spatial, grid.freqs_hz[m], geom, WavefrontModel::Fresnel);
    u.dotc(&v).norm_sqr()
}

/// Dirichlet kernel `sin(pi N x) / (N sin(pi x))`.
pub fn dirichlet_sinc(x: f64, n: usize) -> f64 {
    let nf = n as f64;
    let den = nf * (PI * x).sin();
    if den.abs() < 1e-9 * nf {
        // Limit at integer x is (-1)^{k (N - 1)}.
        let k = x.round() as i64;
        return if (k * (n as i64 - 1)).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        };
    }
    (PI * nf * x).sin() / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn paper_geom() -> ArrayGeometry {
        ArrayGeometry::new(256, 300e9)
    }

    #[test]
    fn fraunhofer_golden_values() {
        assert!((fraunhofer_distance(&paper_geom()) - 32.76).abs() < 0.05);
        // 2 (128 * 0.5 mm)^2 / 1 mm
        assert_relative_eq!(
            fraunhofer_distance(&ArrayGeometry::new(128, 300e9)),
            8.192,
            max_relative = 1e-12
        );
        let g = ArrayGeometry::new(1, 140e9);
        assert_relative_eq!(fraunhofer_distance(&g), g.wavelength_m() / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn antenna_ranges() {
        let g = paper_geom();
        let p = PolarPoint::new(0.3, 7.0).unwrap();
        assert_eq!(exact_antenna_range(p, 1, &g), 7.0);
        assert_eq!(fresnel_antenna_range(p, 1, &g), 7.0);

        let broadside = PolarPoint::new(0.0, 4.0).unwrap();
        let d = g.spacing_m;
        assert_relative_eq!(
            exact_antenna_range(broadside, 2, &g),
            (16.0 + d * d).sqrt(),
            max_relative = 1e-15
        );

        // Independent evaluation: phi = 0.5, r = 10 m, d = 0.5 mm, n = 100 gives
        // x = 0.0495 m and r_n^2 = 100 + 0.00245025 - 0.495.
        let p = PolarPoint::new(0.5, 10.0).unwrap();
        assert_relative_eq!(
            exact_antenna_range(p, 100, &g),
            99.507_450_25_f64.sqrt(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn fresnel_tracks_exact_range() {
        let g = paper_geom();
        let mut worst: f64 = 0.0;
        for r in [5.0, 7.5, 12.0, 30.0] {
            for k in -20..=20 {
                let p = PolarPoint::new(k as f64 * 0.049, r).unwrap();
                for n in 1..=g.n_antennas {
                    let e = exact_antenna_range(p, n, &g);
                    let f = fresnel_antenna_range(p, n, &g);
                    worst = worst.max((e - f).abs() / e);
                }
            }
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn endfire_fresnel_is_affine() {
        let g = paper_geom();
        for phi in [1.0, -1.0] {
            let p = PolarPoint::new(phi, 3.0).unwrap();
            assert_eq!(p.curvature(), 0.0);
            let r1 = fresnel_antenna_range(p, 1, &g);
            let r2 = fresnel_antenna_range(p, 2, &g);
            let r9 = fresnel_antenna_range(p, 9, &g);
            assert_relative_eq!(r9 - r1, 8.0 * (r2 - r1), max_relative = 1e-9);
        }
    }

    #[test]
    fn steering_norm_and_self_coherence() {
        let g = paper_geom();
        for model in [WavefrontModel::Exact, WavefrontModel::Fresnel] {
            let p = PolarPoint::new(-0.42, 9.3).unwrap();
            let a = steering_vector(p, 310e9, &g, model);
            assert_relative_eq!(a.norm(), 1.0, max_relative = 1e-12);
            assert_relative_eq!(a.dotc(&a).re, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn fresnel_steering_reaches_farfield_limit() {
        let g = paper_geom();
        let f = 300e9;
        let p = PolarPoint::new(0.37, 1e9).unwrap();
        let a = steering_vector(p, f, &g, WavefrontModel::Fresnel);
        // Separately coded plane wave.
        let k = 2.0 * PI * f / SPEED_OF_LIGHT;
        let reference: Vec<f64> = (0..g.n_antennas).map(|i| k * i as f64 * g.spacing_m * 0.37).collect();
        let global = a[0].arg();
        for (i, r) in reference.iter().enumerate() {
            let diff = (a[i].arg() - global - r).rem_euclid(2.0 * PI);
            let diff = diff.min(2.0 * PI - diff);
            assert!(diff < 1e-6, "entry {i} deviates by {diff} rad");
        }
    }

    #[test]
    fn exact_and_fresnel_vectors_agree_beyond_five_metres() {
        let g = paper_geom();
        for r in [5.0, 10.0, 30.0] {
            for k in -9..=9 {
                let p = PolarPoint::new(k as f64 * 0.11, r).unwrap();
                let a = steering_vector(p, 300e9, &g, WavefrontModel::Exact);
                let b = steering_vector(p, 300e9, &g, WavefrontModel::Fresnel);
                assert!(a.dotc(&b).norm() >= 0.99);
            }
        }
    }

    #[test]
    fn subcarrier_grid_layout() {
        let grid = SubcarrierGrid::new(300e9, 30e9, 3);
        assert_eq!(grid.freqs_hz, vec![290e9, 300e9, 310e9]);
        assert_eq!(grid.etas[grid.center_index()], 1.0);
        let grid = SubcarrierGrid::new(300e9, 30e9, 128);
        assert!(grid.etas.windows(2).all(|w| w[0] > w[1]));
        assert_relative_eq!(grid.freqs_hz[1] - grid.freqs_hz[0], 30e9 / 128.0, max_relative = 1e-9);
    }

    #[test]
    fn beam_split_map_special_cases() {
        let p = PolarPoint::new(0.6, 8.0).unwrap();
        assert_eq!(spatial_from_physical(p, 1.0).unwrap(), p);
        assert_eq!(physical_from_spatial(p, 1.0).unwrap(), p);

        let b = PolarPoint::new(0.0, 8.0).unwrap();
        let s = spatial_from_physical(b, 1.05).unwrap();
        assert_eq!(s.sin_doa, 0.0);
        assert_relative_eq!(s.range_m, 8.0 / 1.05, max_relative = 1e-15);
        let q = physical_from_spatial(b, 1.05).unwrap();
        assert_relative_eq!(q.range_m, 8.0 * 1.05, max_relative = 1e-15);

        assert!(spatial_from_physical(PolarPoint::new(0.97, 5.0).unwrap(), 1.04).is_err());
        assert!(spatial_from_physical(PolarPoint::new(1.0, 5.0).unwrap(), 0.9).is_err());
        assert!(spatial_from_physical(p, 0.0).is_err());
    }

    #[test]
    fn nb_deltas_values() {
        let p = PolarPoint::new(0.7, 6.0).unwrap();
        assert_eq!(nb_deltas(p, 1.0), (0.0, 0.0));

        let (dphi, dr) = nb_deltas(PolarPoint::new(0.0, 6.0).unwrap(), 1.1);
        assert_eq!(dphi, 0.0);
        assert_relative_eq!(dr, 6.0 * (1.0 / 1.1 - 1.0), max_relative = 1e-14);

        // Hand arithmetic: eta = 300/285 = 1.052631578947..., eta - 1 = 0.052631578947...
        let p = PolarPoint::new(0.70711, 6.0).unwrap();
        let (dphi, _) = nb_deltas(p, 300.0 / 285.0);
        assert_relative_eq!(dphi, 0.037_216_315_789_473_7, max_relative = 1e-12);

        // Consistency with the spatial map.
        let eta = 300.0 / 315.0;
        let s = spatial_from_physical(p, eta).unwrap();
        let (dphi, dr) = nb_deltas(p, eta);
        assert_relative_eq!(s.sin_doa - p.sin_doa, dphi, epsilon = 1e-15);
        assert_relative_eq!(s.range_m - p.range_m, dr, epsilon = 1e-13);
    }

    #[test]
    fn dirichlet_sinc_values() {
        assert_eq!(dirichlet_sinc(0.0, 64), 1.0);
        assert!(dirichlet_sinc(1.0 / 64.0, 64).abs() < 1e-12);
        assert_eq!(dirichlet_sinc(1.0, 64), -1.0);
        assert_eq!(dirichlet_sinc(1.0, 65), 1.0);
        assert_eq!(dirichlet_sinc(0.3, 1), 1.0);
    }

    #[test]
    fn array_gain_reduces_to_dirichlet_in_farfield() {
        let g = ArrayGeometry::new(64, 300e9);
        let grid = SubcarrierGrid::new(300e9, 30e9, 5);
        let phys = PolarPoint::new(0.4, 1e9).unwrap();
        for m in 0..grid.len() {
            for phi_bar in [0.35, 0.4, 0.41, 0.5, -0.2] {
                let spat = PolarPoint::new(phi_bar, 1e9).unwrap();
                let gain = array_gain(phys, spat, m, &grid, &g);
                // Per-element phase step pi (f_m phi_bar - f_c phi) / f_c.
                let a = (grid.freqs_hz[m] * phi_bar - grid.carrier_hz * 0.4) / (2.0 * grid.carrier_hz);
                let ds = dirichlet_sinc(a, g.n_antennas);
                assert_relative_eq!(gain, ds * ds, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn array_gain_peaks_at_spatial_focus() {
        let grid = SubcarrierGrid::new(300e9, 30e9, 3);
        for n in [16, 64, 256, 512] {
            let g = ArrayGeometry::new(n, 300e9);
            let p = PolarPoint::from_degrees(45.0, 6.0).unwrap();
            for m in 0..3 {
                let s = spatial_from_physical(p, grid.etas[m]).unwrap();
                assert!(array_gain(p, s, m, &grid, &g) >= 0.99);
            }
            let c = grid.center_index();
            assert_relative_eq!(array_gain(p, p, c, &grid, &g), 1.0, epsilon = 1e-12);
        }
    }
}

//! Sparse-recovery dictionaries over a shared physical (angle, range) grid.
//!
//! Three families are provided:
//!
//! - **NBA** (near-field beam-split aware): one atom matrix per subcarrier.
//!   Atom `(q, m)` is the Fresnel response at `f_m` of physical grid point
//!   `q`. Seen from the carrier, this is the beam whose split at subcarrier
//!   `m` lands exactly on the grid point, so one support index describes the
//!   same physical location on every subcarrier.
//! - **SI near-field**: carrier-frequency Fresnel atoms shared by all subcarriers.
//! - **SI far-field**: carrier-frequency plane-wave atoms shared by all subcarriers.

use std::borrow::Cow;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{SystemConfig, MAX_SIN_DOA};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::wavefield::{
    farfield_steering_vector, fraunhofer_distance, spatial_from_physical, steering_vector, ArrayGeometry, PolarPoint,
    SubcarrierGrid, WavefrontModel,
};

/// Above this many stored complex entries atoms are generated on demand.
pub const EAGER_ENTRY_LIMIT: usize = 1 << 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalGrid {
    /// Angle-major: `points[ia * q_range + ir]`.
    pub points: Vec<PolarPoint>,
    pub q_angle: usize,
    pub q_range: usize,
}

impl PhysicalGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn angle_index(&self, q: usize) -> usize {
        q / self.q_range
    }

    pub fn range_index(&self, q: usize) -> usize {
        q % self.q_range
    }

    /// Grid angles in sine domain.
    pub fn sines(&self) -> Vec<f64> {
        (0..self.q_angle)
            .map(|ia| self.points[ia * self.q_range].sin_doa)
            .collect()
    }
}

/// Angles uniform in sine over `[-sin 85°, sin 85°]`, ranges uniform in `1/r`
/// between `1/F` and `1/cfg.grid_range_min_m`.
pub fn build_physical_grid(cfg: &SystemConfig, q_angle: usize, q_range: usize) -> Result<PhysicalGrid> {
    if q_angle < 2 || q_range < 1 {
        return Err(Error::InvalidConfig(format!(
            "grid factorization {q_angle} x {q_range} needs q_angle >= 2 and q_range >= 1"
        )));
    }
    let far = fraunhofer_distance(&cfg.geometry());
    if !(cfg.grid_range_min_m > 0.0 && cfg.grid_range_min_m < far) {
        return Err(Error::InvalidConfig(format!(
            "grid_range_min_m = {} must lie in (0, {far:.4})",
            cfg.grid_range_min_m
        )));
    }
    let sines = linspace(-MAX_SIN_DOA, MAX_SIN_DOA, q_angle);
    let inv_ranges = if q_range == 1 {
        vec![0.5 * (1.0 / far + 1.0 / cfg.grid_range_min_m)]
    } else {
        linspace(1.0 / far, 1.0 / cfg.grid_range_min_m, q_range)
    };
    let mut points = Vec::with_capacity(q_angle * q_range);
    for &s in &sines {
        for &inv in &inv_ranges {
            // 1/(1/F) can round just above F.
            let range_m = (1.0 / inv).min(far);
            points.push(PolarPoint::new(s, range_m)?);
        }
    }
    Ok(PhysicalGrid {
        points,
        q_angle,
        q_range,
    })
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + step * i as f64 })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DictionaryKind {
    Nba,
    NearFieldSi,
    FarFieldSi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Storage {
    Eager,
    Lazy,
}

#[derive(Debug, Clone)]
enum Sampling {
    NearField(PhysicalGrid),
    FarField(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct Dictionary {
    kind: DictionaryKind,
    geom: ArrayGeometry,
    subcarriers: SubcarrierGrid,
    sampling: Sampling,
    /// One matrix per subcarrier for NBA, one shared matrix otherwise; empty when lazy.
    atoms: Vec<CMatrix>,
}

pub fn build_nba(grid: &PhysicalGrid, cfg: &SystemConfig) -> Result<Dictionary> {
    build_nba_with(grid, cfg, default_storage(cfg, grid.len(), true))
}

pub fn build_nba_with(grid: &PhysicalGrid, cfg: &SystemConfig, storage: Storage) -> Result<Dictionary> {
    Dictionary::new(DictionaryKind::Nba, Sampling::NearField(grid.clone()), cfg, storage)
}

pub fn build_si_nearfield(grid: &PhysicalGrid, cfg: &SystemConfig) -> Result<Dictionary> {
    Dictionary::new(
        DictionaryKind::NearFieldSi,
        Sampling::NearField(grid.clone()),
        cfg,
        default_storage(cfg, grid.len(), false),
    )
}

pub fn build_si_farfield(cfg: &SystemConfig, q_angle: usize) -> Result<Dictionary> {
    if q_angle < 2 {
        return Err(Error::InvalidConfig("far-field dictionary needs q_angle >= 2".into()));
    }
    Dictionary::new(
        DictionaryKind::FarFieldSi,
        Sampling::FarField(linspace(-MAX_SIN_DOA, MAX_SIN_DOA, q_angle)),
        cfg,
        default_storage(cfg, q_angle, false),
    )
}

fn default_storage(cfg: &SystemConfig, q: usize, per_subcarrier: bool) -> Storage {
    let copies = if per_subcarrier { cfg.subcarriers } else { 1 };
    if copies * q * cfg.n_antennas <= EAGER_ENTRY_LIMIT {
        Storage::Eager
    } else {
        Storage::Lazy
    }
}

impl Dictionary {
    fn new(kind: DictionaryKind, sampling: Sampling, cfg: &SystemConfig, storage: Storage) -> Result<Self> {
        cfg.validate()?;
        let mut dict = Self {
            kind,
            geom: cfg.geometry(),
            subcarriers: cfg.subcarrier_grid(),
            sampling,
            atoms: Vec::new(),
        };
        if storage == Storage::Eager {
            let copies = if dict.is_subcarrier_dependent() {
                dict.subcarriers.len()
            } else {
                1
            };
            dict.atoms = (0..copies).map(|m| dict.generate(m)).collect();
        }
        Ok(dict)
    }

    pub fn kind(&self) -> DictionaryKind {
        self.kind
    }

    pub fn storage(&self) -> Storage {
        if self.atoms.is_empty() {
            Storage::Lazy
        } else {
            Storage::Eager
        }
    }

    pub fn is_subcarrier_dependent(&self) -> bool {
        self.kind == DictionaryKind::Nba
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geom
    }

    pub fn subcarrier_grid(&self) -> &SubcarrierGrid {
        &self.subcarriers
    }

    pub fn etas(&self) -> &[f64] {
        &self.subcarriers.etas
    }

    pub fn num_subcarriers(&self) -> usize {
        self.subcarriers.len()
    }

    pub fn num_atoms(&self) -> usize {
        match &self.sampling {
            Sampling::NearField(g) => g.len(),
            Sampling::FarField(s) => s.len(),
        }
    }

    pub fn physical_grid(&self) -> Option<&PhysicalGrid> {
        match &self.sampling {
            Sampling::NearField(g) => Some(g),
            Sampling::FarField(_) => None,
        }
    }

    /// Direction (sine) of atom `q`.
    pub fn sin_doa(&self, q: usize) -> f64 {
        match &self.sampling {
            Sampling::NearField(g) => g.points[q].sin_doa,
            Sampling::FarField(s) => s[q],
        }
    }

    /// Physical location of atom `q`, `None` for plane-wave atoms.
    pub fn physical_point(&self, q: usize) -> Option<PolarPoint> {
        self.physical_grid().map(|g| g.points[q])
    }

    /// Location on which the carrier beam toward atom `q` focuses at subcarrier `m`.
    pub fn spatial_point(&self, m: usize, q: usize) -> Result<PolarPoint> {
        let p = self
            .physical_point(q)
            .ok_or_else(|| Error::Domain("plane-wave atoms have no focal point".into()))?;
        spatial_from_physical(p, self.subcarriers.etas[m])
    }

    fn atom_frequency(&self, m: usize) -> f64 {
        match self.kind {
            DictionaryKind::Nba => self.subcarriers.freqs_hz[m],
            _ => self.subcarriers.carrier_hz,
        }
    }

    /// Column `q` of `C_m`, unit norm.
    pub fn atom(&self, m: usize, q: usize) -> CVector {
        if !self.atoms.is_empty() {
            let slot = if self.is_subcarrier_dependent() { m } else { 0 };
            return self.atoms[slot].column(q).clone_owned();
        }
        self.generate_atom(m, q)
    }

    fn generate_atom(&self, m: usize, q: usize) -> CVector {
        let f = self.atom_frequency(m);
        match &self.sampling {
            Sampling::NearField(g) => steering_vector(g.points[q], f, &self.geom, WavefrontModel::Fresnel),
            Sampling::FarField(s) => farfield_steering_vector(s[q], f, &self.geom),
        }
    }

    fn generate(&self, m: usize) -> CMatrix {
        let q = self.num_atoms();
        let mut c = DMatrix::<Complex64>::zeros(self.geom.n_antennas, q);
        for j in 0..q {
            c.set_column(j, &self.generate_atom(m, j));
        }
        c
    }

    /// The full `N x Q` atom matrix of subcarrier `m`.
    pub fn matrix(&self, m: usize) -> Cow<'_, CMatrix> {
        if self.atoms.is_empty() {
            Cow::Owned(self.generate(m))
        } else {
            let slot = if self.is_subcarrier_dependent() { m } else { 0 };
            Cow::Borrowed(&self.atoms[slot])
        }
    }

    /// `C_m[:, idx]`.
    pub fn columns(&self, m: usize, idx: &[usize]) -> CMatrix {
        let mut c = CMatrix::zeros(self.geom.n_antennas, idx.len());
        for (j, &q) in idx.iter().enumerate() {
            c.set_column(j, &self.atom(m, q));
        }
        c
    }
}

/// `|c_i^H c_j|` within the atom set of subcarrier `m`.
pub fn coherence(dict: &Dictionary, m: usize, i: usize, j: usize) -> f64 {
    dict.atom(m, i).dotc(&dict.atom(m, j)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{synthesize_channel, PathSpec, Scenario};
    use approx::assert_relative_eq;

    fn cfg(n: usize) -> SystemConfig {
        SystemConfig {
            n_antennas: n,
            q_angle: n,
            ..SystemConfig::desk()
        }
    }

    #[test]
    fn three_angle_grid() {
        let g = build_physical_grid(&cfg(64), 3, 1).unwrap();
        let s = g.sines();
        assert_eq!(s, vec![-MAX_SIN_DOA, 0.0, MAX_SIN_DOA]);
        assert!(g.points.windows(2).all(|w| w[0].range_m == w[1].range_m));
    }

    #[test]
    fn paper_grid_size_and_bounds() {
        let c = SystemConfig::paper();
        let g = build_physical_grid(&c, c.q_angle, c.q_range).unwrap();
        assert_eq!(g.len(), 10 * c.n_antennas);
        let far = fraunhofer_distance(&c.geometry());
        assert!(g
            .points
            .iter()
            .all(|p| p.range_m <= far && p.range_m >= c.grid_range_min_m - 1e-12));
        let sines = g.sines();
        assert!(sines.windows(2).all(|w| w[0] < w[1]));
        let inv: Vec<f64> = g.points[..c.q_range].iter().map(|p| 1.0 / p.range_m).collect();
        let step = inv[1] - inv[0];
        assert!(inv.windows(2).all(|w| ((w[1] - w[0]) - step).abs() < 1e-9));
    }

    #[test]
    fn infeasible_grids_are_rejected() {
        let c = cfg(64);
        assert!(build_physical_grid(&c, 1, 10).is_err());
        assert!(build_physical_grid(&c, 8, 0).is_err());
        let bad = SystemConfig {
            grid_range_min_m: 5.0,
            ..c
        };
        assert!(build_physical_grid(&bad, 8, 4).is_err());
    }

    #[test]
    fn atoms_are_unit_norm_and_center_matches_si() {
        let c = SystemConfig {
            subcarriers: 5,
            ..cfg(32)
        };
        let g = build_physical_grid(&c, 32, 4).unwrap();
        let nba = build_nba(&g, &c).unwrap();
        let si = build_si_nearfield(&g, &c).unwrap();
        let ff = build_si_farfield(&c, 40).unwrap();
        for m in 0..5 {
            for q in (0..g.len()).step_by(7) {
                assert_relative_eq!(nba.atom(m, q).norm_squared(), 1.0, epsilon = 1e-12);
            }
        }
        assert_relative_eq!(ff.atom(0, 3).norm_squared(), 1.0, epsilon = 1e-12);
        let center = c.subcarrier_grid().center_index();
        assert_eq!(*nba.matrix(center), *si.matrix(center));
        assert_eq!(nba.matrix(0).shape(), (32, 128));
    }

    #[test]
    fn lazy_and_eager_agree() {
        let c = SystemConfig {
            subcarriers: 3,
            grid_range_min_m: 0.05,
            ..cfg(16)
        };
        let g = build_physical_grid(&c, 16, 3).unwrap();
        let eager = build_nba_with(&g, &c, Storage::Eager).unwrap();
        let lazy = build_nba_with(&g, &c, Storage::Lazy).unwrap();
        assert_eq!(lazy.storage(), Storage::Lazy);
        for m in 0..3 {
            assert_eq!(*eager.matrix(m), *lazy.matrix(m));
        }
    }

    #[test]
    fn zero_bandwidth_collapses_to_si() {
        let c = SystemConfig {
            bandwidth_hz: 0.0,
            subcarriers: 4,
            ..cfg(32)
        };
        let g = build_physical_grid(&c, 32, 5).unwrap();
        let nba = build_nba(&g, &c).unwrap();
        let si = build_si_nearfield(&g, &c).unwrap();
        for m in 0..4 {
            let diff = (nba.matrix(m).into_owned() - si.matrix(m).into_owned()).camax();
            assert!(diff < 1e-9);
        }
    }

    #[test]
    fn on_grid_path_matches_its_atom() {
        let c = SystemConfig::desk();
        let g = build_physical_grid(&c, c.q_angle, c.q_range).unwrap();
        let nba = build_nba(&g, &c).unwrap();
        for q in [5, 131, 322, 500, 633] {
            let s = Scenario {
                seed: 0,
                users: vec![vec![PathSpec {
                    point: g.points[q],
                    delay_s: 0.0,
                    gains: vec![Complex64::new(1.0, 0.0); c.subcarriers],
                }]],
            };
            let h = synthesize_channel(&s, &c).unwrap();
            for m in 0..c.subcarriers {
                let hv = h.vector(0, m);
                assert!(nba.atom(m, q).dotc(&hv).norm() >= 0.98 * hv.norm());
                // Matched-filter dominance over the whole subcarrier dictionary.
                let cm = nba.matrix(m);
                let scores = cm.ad_mul(&hv);
                let best = (0..scores.len())
                    .max_by(|&a, &b| scores[a].norm().total_cmp(&scores[b].norm()))
                    .unwrap();
                assert_eq!(best, q);
            }
        }
    }

    #[test]
    fn coherence_properties() {
        let c = cfg(64);
        let g = build_physical_grid(&c, 64, 10).unwrap();
        let d = build_nba(&g, &c).unwrap();
        assert_relative_eq!(coherence(&d, 0, 17, 17), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn coherence_decreases_with_array_size() {
        // Points four angle bins apart on the coarsest (N = 32) grid, so the
        // pair exists on every grid of the sweep.
        let bin = 2.0 * MAX_SIN_DOA / 31.0;
        for (r1, r2) in [(4.0, 6.0), (1.0, 2.0), (10.0, 20.0)] {
            let p = PolarPoint::new(0.1, r1).unwrap();
            let q = PolarPoint::new(0.1 + 4.0 * bin, r2).unwrap();
            let mut last = f64::INFINITY;
            for n in [32, 64, 128, 256] {
                let geom = ArrayGeometry::new(n, 300e9);
                let a = steering_vector(p, 300e9, &geom, WavefrontModel::Fresnel);
                let b = steering_vector(q, 300e9, &geom, WavefrontModel::Fresnel);
                let mu = a.dotc(&b).norm();
                assert!(mu <= last + 1e-12, "coherence rose to {mu} at N = {n}");
                last = mu;
            }
            assert!(last < 0.3);
        }
    }

    #[test]
    fn mean_off_diagonal_coherence_is_moderate() {
        let c = SystemConfig { q_angle: 16, ..cfg(64) };
        let g = build_physical_grid(&c, 16, 10).unwrap();
        let d = build_nba(&g, &c).unwrap();
        let center = c.subcarrier_grid().center_index();
        let cm = d.matrix(center);
        let gram = cm.ad_mul(&cm);
        let q = gram.nrows();
        let mut sum = 0.0;
        for i in 0..q {
            for j in 0..q {
                if i != j {
                    sum += gram[(i, j)].norm();
                }
            }
        }
        let mean = sum / (q * (q - 1)) as f64;
        assert!(mean < 0.5, "mean coherence {mean}");
    }
}

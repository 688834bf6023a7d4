//! Multi-subcarrier OMP with a common support across subcarriers.
//!
//! For every user the selector accumulates the correlation of each atom with
//! the current residual over all subcarriers, picks the best unused atom,
//! and re-projects the observations onto the orthogonal complement of the
//! selected sensing columns `Psi_m = F C_m(I)`. Because every dictionary in
//! [`crate::dictionary`] indexes the same physical grid on all subcarriers,
//! the selected index directly yields the user's (DoA, range).

use serde::{Deserialize, Serialize};

use crate::channel::ChannelTensor;
use crate::dictionary::{Dictionary, DictionaryKind};
use crate::error::{Error, Result};
use crate::linalg::{column_basis, pinv, project_out, CMatrix, CVector};
use crate::wavefield::{farfield_steering_vector, nb_deltas, steering_vector, WavefrontModel};

use super::pilots::PilotFrame;
use super::report::{EstimateReport, PathEstimate, UserEstimate};

/// Basis `Xi` used to rebuild channels from the recovered support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reconstruction {
    /// Exact spherical steering at each subcarrier frequency.
    SubcarrierDependent,
    /// Exact spherical steering at the carrier for every subcarrier.
    SubcarrierIndependent,
    /// The selected dictionary atoms themselves.
    Atoms,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmpOptions {
    /// Number of atoms (paths) to select per user.
    pub paths: usize,
    /// Divide each correlation by `||F c_{m,q}||` before accumulating.
    pub normalize_selection: bool,
    pub reconstruction: Reconstruction,
}

impl OmpOptions {
    pub fn new(paths: usize) -> Self {
        Self {
            paths,
            normalize_selection: true,
            reconstruction: Reconstruction::SubcarrierDependent,
        }
    }
}

/// Sensing matrices `F C_m` and their column norms.
struct Projected {
    per_subcarrier: Vec<CMatrix>,
    col_norms: Vec<Vec<f64>>,
    shared: bool,
}

impl Projected {
    fn new(frame: &PilotFrame, dict: &Dictionary) -> Self {
        let copies = if dict.is_subcarrier_dependent() {
            dict.num_subcarriers()
        } else {
            1
        };
        let per_subcarrier: Vec<CMatrix> = (0..copies).map(|m| &frame.f_matrix * dict.matrix(m).as_ref()).collect();
        let col_norms = per_subcarrier
            .iter()
            .map(|g| g.column_iter().map(|c| c.norm()).collect())
            .collect();
        Self {
            per_subcarrier,
            col_norms,
            shared: copies == 1,
        }
    }

    fn slot(&self, m: usize) -> usize {
        if self.shared {
            0
        } else {
            m
        }
    }

    fn matrix(&self, m: usize) -> &CMatrix {
        &self.per_subcarrier[self.slot(m)]
    }

    fn norms(&self, m: usize) -> &[f64] {
        &self.col_norms[self.slot(m)]
    }

    fn columns(&self, m: usize, idx: &[usize]) -> CMatrix {
        let g = self.matrix(m);
        CMatrix::from_fn(g.nrows(), idx.len(), |r, c| g[(r, idx[c])])
    }
}

fn check_inputs(frame: &PilotFrame, dict: &Dictionary, opts: &OmpOptions) -> Result<()> {
    if opts.paths == 0 {
        return Err(Error::InvalidConfig("OMP needs at least one path".into()));
    }
    if opts.paths > dict.num_atoms() {
        return Err(Error::InvalidConfig(format!(
            "cannot select {} atoms from a dictionary of {}",
            opts.paths,
            dict.num_atoms()
        )));
    }
    if frame.antennas() != dict.geometry().n_antennas {
        return Err(Error::DimensionMismatch {
            what: "antennas",
            expected: dict.geometry().n_antennas,
            got: frame.antennas(),
        });
    }
    if frame.y.subcarriers() != dict.num_subcarriers() {
        return Err(Error::DimensionMismatch {
            what: "subcarriers",
            expected: dict.num_subcarriers(),
            got: frame.y.subcarriers(),
        });
    }
    Ok(())
}

/// Run greedy support recovery for every user and rebuild the channels.
pub fn omp_run(frame: &PilotFrame, dict: &Dictionary, opts: &OmpOptions) -> Result<EstimateReport> {
    check_inputs(frame, dict, opts)?;
    let projected = Projected::new(frame, dict);
    let users = (0..frame.y.users())
        .map(|k| recover_user(frame, dict, &projected, opts, k))
        .collect::<Vec<_>>();
    let mut report = EstimateReport {
        estimator: format!("{:?}", dict.kind()),
        h_hat: ChannelTensor::zeros(0, 0, 0),
        users,
        max_condition: 1.0,
    };
    let (h_hat, cond) = reconstruct_with_condition(&report, frame, dict, opts.reconstruction)?;
    report.h_hat = h_hat;
    report.max_condition = cond;
    Ok(report)
}

fn recover_user(
    frame: &PilotFrame,
    dict: &Dictionary,
    projected: &Projected,
    opts: &OmpOptions,
    k: usize,
) -> UserEstimate {
    let m_count = dict.num_subcarriers();
    let q_count = dict.num_atoms();
    let observations: Vec<CVector> = (0..m_count).map(|m| frame.y.vector(k, m)).collect();
    let mut residuals = observations.clone();
    let mut support: Vec<usize> = Vec::with_capacity(opts.paths);
    let mut residual_norms = vec![residuals.iter().map(|r| r.norm()).collect::<Vec<_>>()];
    let mut scores = vec![0.0f64; q_count];

    for _ in 0..opts.paths {
        scores.iter_mut().for_each(|s| *s = 0.0);
        for (m, r) in residuals.iter().enumerate() {
            let corr = projected.matrix(m).ad_mul(r);
            let norms = projected.norms(m);
            for (q, s) in scores.iter_mut().enumerate() {
                let c = corr[q].norm();
                *s += if opts.normalize_selection {
                    if norms[q] > 0.0 {
                        c / norms[q]
                    } else {
                        0.0
                    }
                } else {
                    c
                };
            }
        }
        // Previously selected atoms are masked; ties resolve to the lowest index.
        let best = scores
            .iter()
            .enumerate()
            .filter(|(q, _)| !support.contains(q))
            .fold(None::<(usize, f64)>, |acc, (q, &s)| match acc {
                Some((_, bs)) if bs >= s => acc,
                _ => Some((q, s)),
            })
            .map(|(q, _)| q)
            .expect("dictionary larger than support");
        support.push(best);
        for (m, r) in residuals.iter_mut().enumerate() {
            let basis = column_basis(&projected.columns(m, &support));
            *r = project_out(&basis, &observations[m]);
        }
        residual_norms.push(residuals.iter().map(|r| r.norm()).collect());
    }

    let paths = support.iter().map(|&q| path_estimate(dict, q)).collect();
    UserEstimate {
        support,
        paths,
        residual_norms,
        nmse: None,
    }
}

fn path_estimate(dict: &Dictionary, q: usize) -> PathEstimate {
    let etas = dict.etas();
    match (dict.kind(), dict.physical_point(q)) {
        (DictionaryKind::Nba, Some(p)) => {
            let (delta_doa, delta_range): (Vec<f64>, Vec<f64>) = etas.iter().map(|&eta| nb_deltas(p, eta)).unzip();
            PathEstimate {
                grid_index: q,
                sin_doa: p.sin_doa,
                range_m: Some(p.range_m),
                delta_doa,
                delta_range,
            }
        }
        (_, point) => PathEstimate {
            grid_index: q,
            sin_doa: dict.sin_doa(q),
            range_m: point.map(|p| p.range_m),
            delta_doa: vec![0.0; etas.len()],
            delta_range: vec![0.0; etas.len()],
        },
    }
}

/// `h_hat_k[m] = Xi_{k,m} u_k[m]` with `u_k[m] = (F Xi_{k,m})^+ y_k[m]`.
///
/// With [`Reconstruction::Atoms`] this is exactly `u = Psi_m^+ y` on the
/// selected sensing columns.
pub fn reconstruct(
    report: &EstimateReport,
    frame: &PilotFrame,
    dict: &Dictionary,
    basis: Reconstruction,
) -> Result<ChannelTensor> {
    reconstruct_with_condition(report, frame, dict, basis).map(|(h, _)| h)
}

fn reconstruct_with_condition(
    report: &EstimateReport,
    frame: &PilotFrame,
    dict: &Dictionary,
    basis: Reconstruction,
) -> Result<(ChannelTensor, f64)> {
    let geom = dict.geometry();
    let grid = dict.subcarrier_grid();
    let (k_count, m_count, _) = frame.y.shape();
    if report.users.len() != k_count {
        return Err(Error::DimensionMismatch {
            what: "users in report",
            expected: k_count,
            got: report.users.len(),
        });
    }
    let mut out = ChannelTensor::zeros(k_count, m_count, geom.n_antennas);
    let mut worst: f64 = 1.0;
    for (k, user) in report.users.iter().enumerate() {
        for m in 0..m_count {
            let xi = match basis {
                Reconstruction::Atoms => dict.columns(m, &user.support),
                Reconstruction::SubcarrierDependent | Reconstruction::SubcarrierIndependent => {
                    let f = if basis == Reconstruction::SubcarrierDependent {
                        grid.freqs_hz[m]
                    } else {
                        grid.carrier_hz
                    };
                    let mut xi = CMatrix::zeros(geom.n_antennas, user.paths.len());
                    for (j, path) in user.paths.iter().enumerate() {
                        let col = match path.point() {
                            Some(p) => steering_vector(p, f, geom, WavefrontModel::Exact),
                            None => farfield_steering_vector(path.sin_doa, f, geom),
                        };
                        xi.set_column(j, &col);
                    }
                    xi
                }
            };
            let psi = &frame.f_matrix * &xi;
            let (psi_pinv, cond) = pinv(&psi);
            worst = worst.max(cond);
            let u = psi_pinv * frame.y.vector(k, m);
            out.set(k, m, &(xi * u));
        }
    }
    Ok((out, worst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{normalize_for_snr, synthesize_with_model, PathSpec, Scenario};
    use crate::config::SystemConfig;
    use crate::dictionary::{build_nba, build_physical_grid, build_si_nearfield, PhysicalGrid};
    use crate::estimators::nmse;
    use crate::estimators::pilots::{dft_pilot_matrix, make_pilot_matrix, sound};
    use crate::linalg::squared_norm;
    use num_complex::Complex64;

    fn on_grid(cfg: &SystemConfig, grid: &PhysicalGrid, per_user: &[Vec<usize>]) -> ChannelTensor {
        on_grid_with(cfg, grid, per_user, WavefrontModel::Exact)
    }

    fn on_grid_with(
        cfg: &SystemConfig,
        grid: &PhysicalGrid,
        per_user: &[Vec<usize>],
        model: WavefrontModel,
    ) -> ChannelTensor {
        let users = per_user
            .iter()
            .map(|qs| {
                qs.iter()
                    .enumerate()
                    .map(|(i, &q)| PathSpec {
                        point: grid.points[q],
                        delay_s: 1e-9 * i as f64,
                        gains: vec![Complex64::from_polar(1.0, 0.3 + i as f64); cfg.subcarriers],
                    })
                    .collect()
            })
            .collect();
        let s = Scenario { seed: 0, users };
        normalize_for_snr(&synthesize_with_model(&s, cfg, model).unwrap())
            .unwrap()
            .0
    }

    fn setup() -> (SystemConfig, PhysicalGrid, Dictionary) {
        let cfg = SystemConfig {
            users: 1,
            ..SystemConfig::desk()
        };
        let grid = build_physical_grid(&cfg, cfg.q_angle, cfg.q_range).unwrap();
        let dict = build_nba(&grid, &cfg).unwrap();
        (cfg, grid, dict)
    }

    /// Exhaustive oracle: the atom maximizing the summed normalized correlation.
    fn brute_force_best(frame: &PilotFrame, dict: &Dictionary) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for q in 0..dict.num_atoms() {
            let mut total = 0.0;
            for m in 0..dict.num_subcarriers() {
                let g = &frame.f_matrix * dict.atom(m, q);
                total += g.dotc(&frame.y.vector(0, m)).norm() / g.norm();
            }
            if total > best.1 {
                best = (q, total);
            }
        }
        best.0
    }

    #[test]
    fn single_on_grid_path_is_recovered() {
        let (cfg, grid, dict) = setup();
        for (i, q) in [17usize, 201, 388, 455, 610].into_iter().enumerate() {
            let h = on_grid(&cfg, &grid, &[vec![q]]);
            let f = make_pilot_matrix(&cfg, i as u64);
            let frame = sound(&h, &f, 0.0, 0).unwrap();
            let report = omp_run(&frame, &dict, &OmpOptions::new(1)).unwrap();
            assert_eq!(report.users[0].support, vec![q]);
            assert_eq!(brute_force_best(&frame, &dict), q);
            assert!(nmse(&h, &report.h_hat) < 1e-6);
            // Recovered beam-split offsets equal the analytic ones.
            let p = grid.points[q];
            for (m, &eta) in cfg.subcarrier_grid().etas.iter().enumerate() {
                let (dphi, dr) = nb_deltas(p, eta);
                let path = &report.users[0].paths[0];
                assert!((path.delta_doa[m] - dphi).abs() < 1e-9);
                assert!((path.delta_range[m] - dr).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn si_dictionary_drifts_at_edge_subcarriers() {
        // Odd M puts one subcarrier exactly on the carrier.
        let cfg = SystemConfig {
            users: 1,
            subcarriers: 17,
            ..SystemConfig::desk().with_bandwidth_ratio(0.1)
        };
        let grid = build_physical_grid(&cfg, cfg.q_angle, cfg.q_range).unwrap();
        let si = build_si_nearfield(&grid, &cfg).unwrap();
        // A direction far from broadside, where the angular split is largest.
        let q = (cfg.q_angle - 8) * cfg.q_range + 2;
        // Fresnel wavefronts isolate the split from the model error.
        let h = on_grid_with(&cfg, &grid, &[vec![q]], WavefrontModel::Fresnel);
        let frame = sound(&h, &dft_pilot_matrix(cfg.n_antennas), 0.0, 0).unwrap();
        let per_subcarrier_best = |m: usize| {
            let g = &frame.f_matrix * si.matrix(m).as_ref();
            let corr = g.ad_mul(&frame.y.vector(0, m));
            (0..corr.len())
                .max_by(|&a, &b| corr[a].norm().total_cmp(&corr[b].norm()))
                .unwrap()
        };
        let center = cfg.subcarrier_grid().center_index();
        assert_eq!(per_subcarrier_best(center), q);
        assert_ne!(per_subcarrier_best(0), q);
        assert_ne!(per_subcarrier_best(cfg.subcarriers - 1), q);
    }

    #[test]
    fn multiple_separated_paths_are_recovered() {
        let (cfg, grid, dict) = setup();
        // Directions a multiple of 2/N apart in sine are mutually orthogonal
        // beams at a common range.
        let step = 2.0 / cfg.n_antennas as f64;
        let spacing = 2.0 * crate::config::MAX_SIN_DOA / (cfg.q_angle - 1) as f64;
        let offset = (8.0 * step / spacing).round() as usize;
        let base = 40;
        let planted: Vec<usize> = (0..3).map(|i| (base + i * offset) * cfg.q_range + 1).collect();
        // Planted in the dictionary's own wavefront model so that y lies in
        // the span of the selected sensing columns.
        let h = on_grid_with(&cfg, &grid, &[planted.clone()], WavefrontModel::Fresnel);
        let frame = sound(&h, &make_pilot_matrix(&cfg, 3), 0.0, 0).unwrap();
        let report = omp_run(&frame, &dict, &OmpOptions::new(3)).unwrap();
        let mut got = report.users[0].support.clone();
        got.sort();
        assert_eq!(got, planted);
        let y_norm: f64 = (0..cfg.subcarriers)
            .map(|m| squared_norm(frame.y.get(0, m)))
            .sum::<f64>()
            .sqrt();
        let last = report.users[0].residual_norms.last().unwrap();
        let res = last.iter().map(|r| r * r).sum::<f64>().sqrt();
        assert!(res < 1e-6 * y_norm, "residual {res} vs {y_norm}");
    }

    #[test]
    fn residuals_never_grow_and_selection_is_scale_invariant() {
        let (cfg, grid, dict) = setup();
        let h = on_grid(&cfg, &grid, &[vec![40, 300, 520]]);
        let f = make_pilot_matrix(&cfg, 5);
        let frame = sound(&h, &f, 0.05, 6).unwrap();
        let a = omp_run(&frame, &dict, &OmpOptions::new(3)).unwrap();
        for w in a.users[0].residual_norms.windows(2) {
            for (prev, next) in w[0].iter().zip(&w[1]) {
                assert!(*next <= *prev + 1e-12);
            }
        }
        let mut scaled = frame.clone();
        scaled.y = frame.y.scaled(7.5);
        let b = omp_run(&scaled, &dict, &OmpOptions::new(3)).unwrap();
        assert_eq!(a.users[0].support, b.users[0].support);
    }

    #[test]
    fn zero_bandwidth_nba_equals_nf() {
        let cfg = SystemConfig {
            users: 2,
            bandwidth_hz: 0.0,
            subcarriers: 4,
            ..SystemConfig::desk()
        };
        let grid = build_physical_grid(&cfg, cfg.q_angle, cfg.q_range).unwrap();
        let nba = build_nba(&grid, &cfg).unwrap();
        let si = build_si_nearfield(&grid, &cfg).unwrap();
        let h = on_grid(&cfg, &grid, &[vec![3, 99, 400], vec![250, 251, 630]]);
        let frame = sound(&h, &make_pilot_matrix(&cfg, 1), 0.1, 2).unwrap();
        let opts = OmpOptions::new(3);
        let a = omp_run(&frame, &nba, &opts).unwrap();
        let b = omp_run(&frame, &si, &opts).unwrap();
        assert_eq!(a.users, b.users);
        assert_eq!(a.h_hat, b.h_hat);
    }

    #[test]
    fn reconstruction_lies_in_span_of_basis() {
        let (cfg, grid, dict) = setup();
        let h = on_grid(&cfg, &grid, &[vec![77, 480]]);
        let frame = sound(&h, &make_pilot_matrix(&cfg, 8), 0.2, 1).unwrap();
        let report = omp_run(&frame, &dict, &OmpOptions::new(2)).unwrap();
        for basis in [
            Reconstruction::SubcarrierDependent,
            Reconstruction::SubcarrierIndependent,
            Reconstruction::Atoms,
        ] {
            let hh = reconstruct(&report, &frame, &dict, basis).unwrap();
            for m in 0..cfg.subcarriers {
                let xi = match basis {
                    Reconstruction::Atoms => dict.columns(m, &report.users[0].support),
                    _ => {
                        let f = if basis == Reconstruction::SubcarrierDependent {
                            cfg.subcarrier_grid().freqs_hz[m]
                        } else {
                            cfg.carrier_hz
                        };
                        let mut xi = CMatrix::zeros(cfg.n_antennas, 2);
                        for (j, p) in report.users[0].paths.iter().enumerate() {
                            xi.set_column(
                                j,
                                &steering_vector(p.point().unwrap(), f, &cfg.geometry(), WavefrontModel::Exact),
                            );
                        }
                        xi
                    }
                };
                let v = hh.vector(0, m);
                let q = column_basis(&xi);
                assert!(project_out(&q, &v).norm() < 1e-10 * (1.0 + v.norm()));
            }
        }
    }

    #[test]
    fn rejects_inconsistent_inputs() {
        let (cfg, grid, dict) = setup();
        let h = on_grid(&cfg, &grid, &[vec![1]]);
        let frame = sound(&h, &make_pilot_matrix(&cfg, 0), 0.0, 0).unwrap();
        assert!(omp_run(&frame, &dict, &OmpOptions::new(0)).is_err());
        let other = SystemConfig {
            subcarriers: 3,
            ..cfg.clone()
        };
        let small = build_nba(&build_physical_grid(&other, 64, 2).unwrap(), &other).unwrap();
        assert!(omp_run(&frame, &small, &OmpOptions::new(1)).is_err());
    }
}

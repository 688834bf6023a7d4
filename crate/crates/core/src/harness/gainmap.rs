use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::wavefield::{
    farfield_steering_vector, fraunhofer_distance, spatial_from_physical, steering_vector, PolarPoint, WavefrontModel,
};

use super::config::GainMapConfig;
use super::output::{write_csv_file, SCHEMA_GAIN_MAP, SCHEMA_GAIN_MARKERS};

/// Label of the layer summing all mapped subcarriers.
pub const COMPOSITE_LAYER: &str = "sum";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GainMode {
    /// Spherical wavefronts; beams focus in angle and range.
    Near,
    /// Plane waves; gain depends on direction only.
    Far,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainCell {
    /// Subcarrier index, or [`COMPOSITE_LAYER`].
    pub m: String,
    pub x_m: f64,
    pub y_m: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkerKind {
    /// Physical user location.
    User,
    /// Predicted focus of a subcarrier beam.
    Spatial,
    /// Raster cell with the largest gain in a layer.
    Peak,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Marker {
    pub kind: MarkerKind,
    /// Empty for the user marker.
    pub m: String,
    pub x_m: f64,
    pub y_m: f64,
    pub sin_doa: f64,
    /// Absent for far-field spatial predictions, which have no focus in range.
    pub range_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainMap {
    pub mode: GainMode,
    pub cells: Vec<GainCell>,
    pub markers: Vec<Marker>,
}

impl GainMap {
    pub fn layer<'a>(&'a self, m: &'a str) -> impl Iterator<Item = &'a GainCell> + 'a {
        self.cells.iter().filter(move |c| c.m == m)
    }

    pub fn peak(&self, m: &str) -> Option<&Marker> {
        self.markers.iter().find(|k| k.kind == MarkerKind::Peak && k.m == m)
    }

    pub fn spatial(&self, m: &str) -> Option<&Marker> {
        self.markers.iter().find(|k| k.kind == MarkerKind::Spatial && k.m == m)
    }

    pub fn write_to(&self, dir: &Path, config_hash: &str) -> Result<Vec<PathBuf>> {
        let raster = dir.join("gain_map.csv");
        let markers = dir.join("gain_map_markers.csv");
        write_csv_file(&raster, SCHEMA_GAIN_MAP, config_hash, &self.cells)?;
        write_csv_file(&markers, SCHEMA_GAIN_MARKERS, config_hash, &self.markers)?;
        Ok(vec![raster, markers])
    }
}

/// Users at or beyond the Fraunhofer distance are treated with plane waves.
pub fn gain_mode(system: &SystemConfig, user: PolarPoint) -> GainMode {
    if user.range_m >= fraunhofer_distance(&system.geometry()) {
        GainMode::Far
    } else {
        GainMode::Near
    }
}

/// Array gain of carrier beams toward `user` observed at every raster cell,
/// per requested subcarrier and summed.
pub fn run_gain_map(system: &SystemConfig, map: &GainMapConfig) -> Result<GainMap> {
    system.validate()?;
    let geom = system.geometry();
    let grid = system.subcarrier_grid();
    let user = PolarPoint::from_degrees(map.user_doa_deg, map.user_range_m)?;
    let mode = gain_mode(system, user);
    let subs: Vec<usize> = if map.subcarriers.is_empty() {
        (0..grid.len()).collect()
    } else {
        map.subcarriers.clone()
    };
    if let Some(&m) = subs.iter().find(|&&m| m >= grid.len()) {
        return Err(Error::InvalidConfig(format!("subcarrier {m} out of range")));
    }
    let beam = match mode {
        GainMode::Near => steering_vector(user, grid.carrier_hz, &geom, WavefrontModel::Fresnel),
        GainMode::Far => farfield_steering_vector(user.sin_doa, grid.carrier_hz, &geom),
    };
    let coords: Vec<(f64, f64)> = (0..map.y.count)
        .flat_map(|iy| (0..map.x.count).map(move |ix| (ix, iy)))
        .map(|(ix, iy)| (map.x.value(ix), map.y.value(iy)))
        .collect();
    let gains: Vec<Result<Vec<f64>>> = coords
        .par_iter()
        .map(|&(x, y)| {
            let cell = PolarPoint::from_cartesian(x, y)?;
            Ok(subs
                .iter()
                .map(|&m| {
                    let f = grid.freqs_hz[m];
                    let response = match mode {
                        GainMode::Near => steering_vector(cell, f, &geom, WavefrontModel::Fresnel),
                        GainMode::Far => farfield_steering_vector(cell.sin_doa, f, &geom),
                    };
                    beam.dotc(&response).norm_sqr()
                })
                .collect())
        })
        .collect();
    let gains = gains.into_iter().collect::<Result<Vec<_>>>()?;

    let labels: Vec<String> = subs.iter().map(|m| m.to_string()).collect();
    let mut cells = Vec::with_capacity(coords.len() * (subs.len() + 1));
    let mut best = vec![(f64::NEG_INFINITY, 0usize); subs.len() + 1];
    for (c, (&(x, y), g)) in coords.iter().zip(&gains).enumerate() {
        let total: f64 = g.iter().sum();
        for (j, (label, &v)) in labels
            .iter()
            .zip(g)
            .chain(std::iter::once((&COMPOSITE_LAYER.to_string(), &total)))
            .enumerate()
        {
            cells.push(GainCell {
                m: label.clone(),
                x_m: x,
                y_m: y,
                gain: v,
            });
            if v > best[j].0 {
                best[j] = (v, c);
            }
        }
    }

    let (ux, uy) = user.to_cartesian();
    let mut markers = vec![Marker {
        kind: MarkerKind::User,
        m: String::new(),
        x_m: ux,
        y_m: uy,
        sin_doa: user.sin_doa,
        range_m: Some(user.range_m),
    }];
    for (label, &m) in labels.iter().zip(&subs) {
        let eta = grid.carrier_hz / grid.freqs_hz[m];
        let marker = match mode {
            GainMode::Near => {
                let p = spatial_from_physical(user, eta)?;
                let (x, y) = p.to_cartesian();
                Marker {
                    kind: MarkerKind::Spatial,
                    m: label.clone(),
                    x_m: x,
                    y_m: y,
                    sin_doa: p.sin_doa,
                    range_m: Some(p.range_m),
                }
            }
            GainMode::Far => {
                // Drawn on the user's range circle.
                let p = PolarPoint::new(eta * user.sin_doa, user.range_m)?;
                let (x, y) = p.to_cartesian();
                Marker {
                    kind: MarkerKind::Spatial,
                    m: label.clone(),
                    x_m: x,
                    y_m: y,
                    sin_doa: p.sin_doa,
                    range_m: None,
                }
            }
        };
        markers.push(marker);
    }
    for (j, label) in labels
        .iter()
        .chain(std::iter::once(&COMPOSITE_LAYER.to_string()))
        .enumerate()
    {
        let (x, y) = coords[best[j].1];
        let p = PolarPoint::from_cartesian(x, y)?;
        markers.push(Marker {
            kind: MarkerKind::Peak,
            m: label.clone(),
            x_m: x,
            y_m: y,
            sin_doa: p.sin_doa,
            range_m: Some(p.range_m),
        });
    }
    Ok(GainMap { mode, cells, markers })
}

//! Flat binary files for datasets and trained parameters.
//!
//! Dataset: `b"NFBSDATA"`, then little-endian u64 `owner, rows, input_cols,
//! label_cols`, then inputs and labels as row-major little-endian f64.
//!
//! Parameters: `b"NFBSPARM"`, u64 layer count, one u64 per layer width,
//! u64 parameter count, then the parameters as little-endian f64.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::dataset::LocalDataset;
use super::mlp::{MlpSpec, ModelParams};

const DATASET_MAGIC: &[u8; 8] = b"NFBSDATA";
const PARAMS_MAGIC: &[u8; 8] = b"NFBSPARM";
/// Guards against allocating absurd sizes from a corrupt header.
const MAX_ELEMENTS: u64 = 1 << 34;

fn put_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn put_f64s<'a>(w: &mut impl Write, values: impl Iterator<Item = &'a f64>) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn get_f64s(r: &mut impl Read, count: u64) -> Result<Vec<f64>> {
    if count > MAX_ELEMENTS {
        return Err(Error::Format(format!("implausible element count {count}")));
    }
    let mut bytes = vec![0u8; count as usize * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

fn expect_magic(r: &mut impl Read, magic: &[u8; 8]) -> Result<()> {
    let mut got = [0u8; 8];
    r.read_exact(&mut got)?;
    if &got != magic {
        return Err(Error::Format(format!(
            "bad magic tag {:?}, expected {:?}",
            String::from_utf8_lossy(&got),
            String::from_utf8_lossy(magic)
        )));
    }
    Ok(())
}

fn put_matrix_rows(w: &mut impl Write, m: &DMatrix<f64>) -> Result<()> {
    put_f64s(w, m.transpose().as_slice().iter())
}

fn get_matrix_rows(r: &mut impl Read, rows: u64, cols: u64) -> Result<DMatrix<f64>> {
    let values = get_f64s(r, rows.saturating_mul(cols))?;
    Ok(DMatrix::from_row_slice(rows as usize, cols as usize, &values))
}

pub fn write_dataset(w: &mut impl Write, ds: &LocalDataset) -> Result<()> {
    ds.validate()?;
    w.write_all(DATASET_MAGIC)?;
    for v in [ds.owner, ds.count(), ds.inputs.ncols(), ds.labels.ncols()] {
        put_u64(w, v as u64)?;
    }
    put_matrix_rows(w, &ds.inputs)?;
    put_matrix_rows(w, &ds.labels)
}

pub fn read_dataset(r: &mut impl Read) -> Result<LocalDataset> {
    expect_magic(r, DATASET_MAGIC)?;
    let owner = get_u64(r)? as usize;
    let rows = get_u64(r)?;
    let ci = get_u64(r)?;
    let cl = get_u64(r)?;
    let inputs = get_matrix_rows(r, rows, ci)?;
    let labels = get_matrix_rows(r, rows, cl)?;
    let ds = LocalDataset { owner, inputs, labels };
    ds.validate()?;
    Ok(ds)
}

pub fn write_params(w: &mut impl Write, params: &ModelParams) -> Result<()> {
    params.validate()?;
    w.write_all(PARAMS_MAGIC)?;
    put_u64(w, params.spec.layers.len() as u64)?;
    for &l in &params.spec.layers {
        put_u64(w, l as u64)?;
    }
    put_u64(w, params.theta.len() as u64)?;
    put_f64s(w, params.theta.iter())
}

pub fn read_params(r: &mut impl Read) -> Result<ModelParams> {
    expect_magic(r, PARAMS_MAGIC)?;
    let n_layers = get_u64(r)?;
    if n_layers > 1024 {
        return Err(Error::Format(format!("implausible layer count {n_layers}")));
    }
    let layers = (0..n_layers)
        .map(|_| get_u64(r).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let z = get_u64(r)?;
    let theta = get_f64s(r, z)?;
    let params = ModelParams {
        spec: MlpSpec { layers },
        theta,
    };
    params.validate()?;
    Ok(params)
}

pub fn save_dataset(path: impl AsRef<Path>, ds: &LocalDataset) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_dataset(&mut w, ds)?;
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<LocalDataset> {
    read_dataset(&mut std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn save_params(path: impl AsRef<Path>, params: &ModelParams) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_params(&mut w, params)?;
    w.flush()?;
    Ok(())
}

pub fn load_params(path: impl AsRef<Path>) -> Result<ModelParams> {
    read_params(&mut std::io::BufReader::new(std::fs::File::open(path)?))
}

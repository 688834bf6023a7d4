use nalgebra::DMatrix;
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::{self, Stream};

use super::dataset::LocalDataset;
use super::mlp::{forward_batch, loss_and_gradient, MlpSpec};

/// Loss above this multiple of the initial loss aborts training.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Batch {
    Full,
    /// Uniformly sampled mini-batch without replacement.
    Size(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalStep {
    pub batch: Batch,
    pub dropout: f64,
}

impl Default for LocalStep {
    fn default() -> Self {
        Self {
            batch: Batch::Full,
            dropout: 0.0,
        }
    }
}

/// Loss and gradient of `(1/D_k) sum_i ||f(X_i) - Y_i||^2` on user `k`'s data.
pub fn local_gradient(
    spec: &MlpSpec,
    theta: &[f64],
    data: &LocalDataset,
    step: &LocalStep,
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    if data.count() == 0 {
        return Err(Error::Empty("local dataset"));
    }
    let mut rng = seeding::rng(seed);
    match step.batch {
        Batch::Size(b) if b < data.count() => {
            if b == 0 {
                return Err(Error::InvalidConfig("batch size must be >= 1".into()));
            }
            let rows: Vec<usize> = sample(&mut rng, data.count(), b).into_vec();
            let x = data.inputs.select_rows(&rows);
            let y = data.labels.select_rows(&rows);
            loss_and_gradient(spec, theta, &x, &y, step.dropout, &mut rng)
        }
        _ => loss_and_gradient(spec, theta, &data.inputs, &data.labels, step.dropout, &mut rng),
    }
}

/// `theta - lr * (1/K) sum_k g_k`.
pub fn fedavg_round(theta: &[f64], gradients: &[Vec<f64>], lr: f64) -> Result<Vec<f64>> {
    if gradients.is_empty() {
        return Err(Error::Empty("user gradients"));
    }
    let scale = lr / gradients.len() as f64;
    let mut next = theta.to_vec();
    for g in gradients {
        if g.len() != theta.len() {
            return Err(Error::DimensionMismatch {
                what: "gradient length",
                expected: theta.len(),
                got: g.len(),
            });
        }
        for (t, gi) in next.iter_mut().zip(g) {
            *t -= scale * gi;
        }
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub rounds: usize,
    pub lr: f64,
    pub step: LocalStep,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            rounds: 100,
            lr: 0.001,
            step: LocalStep::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub theta: Vec<f64>,
    /// `losses[t]`: user-averaged loss at the parameters entering round `t`;
    /// the last entry is measured after the final round.
    pub losses: Vec<f64>,
}

/// Federated averaging: every round each user computes a local gradient at
/// the shared parameters and the server averages them.
pub fn train(
    spec: &MlpSpec,
    theta0: &[f64],
    datasets: &[LocalDataset],
    opts: &TrainOptions,
    seed: u64,
) -> Result<TrainOutcome> {
    train_observed(spec, theta0, datasets, opts, seed, |_, _, _| Ok(()))
}

/// [`train`] that reports `(round, theta_round, loss_round)` for rounds
/// `0..=T`, the last one after the final update.
pub fn train_observed<F>(
    spec: &MlpSpec,
    theta0: &[f64],
    datasets: &[LocalDataset],
    opts: &TrainOptions,
    seed: u64,
    mut observe: F,
) -> Result<TrainOutcome>
where
    F: FnMut(usize, &[f64], f64) -> Result<()>,
{
    if datasets.is_empty() {
        return Err(Error::Empty("user datasets"));
    }
    if !(opts.lr >= 0.0) {
        return Err(Error::InvalidConfig("learning rate must be >= 0".into()));
    }
    let mut theta = theta0.to_vec();
    let mut losses = Vec::with_capacity(opts.rounds + 1);
    let mut limit = f64::INFINITY;
    for round in 0..opts.rounds {
        let results: Vec<Result<(f64, Vec<f64>)>> = datasets
            .par_iter()
            .enumerate()
            .map(|(k, ds)| {
                let s = seeding::derive_seed(seed, round as u64, k as u64, Stream::Model);
                local_gradient(spec, &theta, ds, &opts.step, s)
            })
            .collect();
        let mut grads = Vec::with_capacity(datasets.len());
        let mut loss = 0.0;
        for r in results {
            let (l, g) = r?;
            loss += l;
            grads.push(g);
        }
        loss /= datasets.len() as f64;
        check_divergence(round, loss, &mut limit)?;
        observe(round, &theta, loss)?;
        losses.push(loss);
        theta = fedavg_round(&theta, &grads, opts.lr)?;
    }
    let final_loss = mean_loss(spec, &theta, datasets)?;
    check_divergence(opts.rounds, final_loss, &mut limit)?;
    observe(opts.rounds, &theta, final_loss)?;
    losses.push(final_loss);
    Ok(TrainOutcome { theta, losses })
}

fn check_divergence(round: usize, loss: f64, limit: &mut f64) -> Result<()> {
    if limit.is_infinite() {
        *limit = DIVERGENCE_FACTOR * loss.max(f64::MIN_POSITIVE);
    }
    if !loss.is_finite() || loss > *limit {
        return Err(Error::Divergence {
            round,
            loss,
            limit: *limit,
        });
    }
    Ok(())
}

/// User-averaged full-batch loss without dropout.
pub fn mean_loss(spec: &MlpSpec, theta: &[f64], datasets: &[LocalDataset]) -> Result<f64> {
    let per_user: Vec<Result<f64>> = datasets
        .par_iter()
        .map(|ds| {
            let out = forward_batch(spec, theta, &ds.inputs)?;
            Ok((out - &ds.labels).norm_squared() / ds.count() as f64)
        })
        .collect();
    let mut total = 0.0;
    for l in per_user {
        total += l?;
    }
    Ok(total / datasets.len() as f64)
}

/// Mean over samples of `||f(x) - h||^2 / ||h||^2` against reference rows.
pub fn prediction_nmse(spec: &MlpSpec, theta: &[f64], inputs: &DMatrix<f64>, reference: &DMatrix<f64>) -> Result<f64> {
    let out = forward_batch(spec, theta, inputs)?;
    rowwise_nmse(&out, reference)
}

pub fn rowwise_nmse(estimate: &DMatrix<f64>, reference: &DMatrix<f64>) -> Result<f64> {
    if estimate.shape() != reference.shape() {
        return Err(Error::DimensionMismatch {
            what: "rows to compare",
            expected: reference.nrows(),
            got: estimate.nrows(),
        });
    }
    if reference.nrows() == 0 {
        return Err(Error::Empty("evaluation samples"));
    }
    let total: f64 = (0..reference.nrows())
        .map(|r| (estimate.row(r) - reference.row(r)).norm_squared() / reference.row(r).norm_squared())
        .sum();
    Ok(total / reference.nrows() as f64)
}

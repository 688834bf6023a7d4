use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dictionary::{build_nba, build_physical_grid};
use crate::error::{Error, Result};
use crate::estimators::make_pilot_matrix;
use crate::fedlearn::{
    build_dataset, build_labeled_dataset, io, overhead_cl, overhead_fl, overhead_ratio, prediction_nmse, rowwise_nmse,
    train_observed, Batch, DatasetSpec, LocalDataset, LocalStep, MlpSpec, ModelParams, OverheadInputs, Standardizer,
    TrainOptions,
};
use crate::seeding::{derive_seed, Stream};

use super::config::ExperimentConfig;
use super::output::{write_csv_file, SCHEMA_FL_TRAIN, SCHEMA_OVERHEAD};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlRound {
    pub round: usize,
    /// User-averaged training loss at the parameters entering this round.
    pub train_loss: f64,
    /// Held-out NMSE of the model against the true channels.
    pub eval_nmse: f64,
    /// Held-out NMSE of the NBA-OMP labels against the true channels.
    pub label_nmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverheadRow {
    pub xi: u8,
    pub users: u64,
    pub samples_per_user: u64,
    pub rf_chains: u64,
    pub antennas: u64,
    pub params: u64,
    pub rounds: u64,
    pub t_cl: u128,
    pub t_fl: u128,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlOutcome {
    pub rounds: Vec<FlRound>,
    pub overhead: Vec<OverheadRow>,
    pub model: ModelParams,
    pub standardizer: Standardizer,
    /// Held-out samples behind `eval_nmse`.
    pub eval_samples: usize,
}

impl FlOutcome {
    pub fn label_nmse(&self) -> f64 {
        self.rounds[0].label_nmse
    }

    pub fn final_eval_nmse(&self) -> f64 {
        self.rounds.last().expect("at least the initial round").eval_nmse
    }

    pub fn write_to(&self, dir: &Path, config_hash: &str) -> Result<Vec<PathBuf>> {
        let train = dir.join("fl_train.csv");
        let overhead = dir.join("fl_overhead.csv");
        let model = dir.join("fl_model.bin");
        write_csv_file(&train, SCHEMA_FL_TRAIN, config_hash, &self.rounds)?;
        write_csv_file(&overhead, SCHEMA_OVERHEAD, config_hash, &self.overhead)?;
        io::save_params(&model, &self.model)?;
        Ok(vec![train, overhead, model])
    }
}

pub fn model_spec(cfg: &ExperimentConfig) -> Result<MlpSpec> {
    MlpSpec::new(3 * cfg.system.pilots, &cfg.fl.hidden, 2 * cfg.system.n_antennas)
}

fn dataset_spec(cfg: &ExperimentConfig) -> DatasetSpec {
    DatasetSpec {
        scenarios: cfg.fl.scenarios,
        snrs_db: cfg.fl.train_snrs_db.clone(),
        augmentation: cfg.fl.augmentation,
    }
}

/// Overhead lines for xi = 0 and xi = 1. Inputs missing from the
/// `overhead` section come from the configured training setup.
pub fn overhead_report(cfg: &ExperimentConfig) -> Result<Vec<OverheadRow>> {
    let sys = &cfg.system;
    let d_k = match cfg.overhead.samples_per_user {
        Some(d) => d,
        None => dataset_spec(cfg).samples_per_user(sys) as u64,
    };
    let z = match cfg.overhead.params {
        Some(z) => z,
        None => model_spec(cfg)?.param_count() as u64,
    };
    let t = cfg.overhead.rounds.unwrap_or(cfg.fl.rounds as u64);
    [false, true]
        .into_iter()
        .map(|xi| {
            let inputs = OverheadInputs {
                samples_per_user: vec![d_k; sys.users],
                rf_chains: sys.rf_chains as u64,
                antennas: sys.n_antennas as u64,
                labels_sent: xi,
                params: z,
                rounds: t,
            };
            Ok(OverheadRow {
                xi: xi as u8,
                users: sys.users as u64,
                samples_per_user: d_k,
                rf_chains: inputs.rf_chains,
                antennas: inputs.antennas,
                params: z,
                rounds: t,
                t_cl: overhead_cl(&inputs)?,
                t_fl: overhead_fl(&inputs)?,
                ratio: overhead_ratio(&inputs)?,
            })
        })
        .collect()
}

fn stack_rows(parts: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let cols = parts.first().map_or(0, |m| m.ncols());
    let rows: usize = parts.iter().map(|m| m.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for m in parts {
        out.rows_mut(r, m.nrows()).copy_from(m);
        r += m.nrows();
    }
    out
}

/// Builds per-user datasets labelled by NBA-OMP, trains by federated
/// averaging and scores every round on held-out scenarios.
///
/// Pilot beams come from `derive_seed(seed, 0, 0, Pilots)`, training data
/// from the `Dataset` stream, held-out data from `Evaluation` and the initial
/// weights from `Model`.
pub fn run_fl_experiment(cfg: &ExperimentConfig) -> Result<FlOutcome> {
    cfg.validate()?;
    let sys = &cfg.system;
    let fl = &cfg.fl;
    let seed = cfg.seed;
    let pilots = make_pilot_matrix(sys, derive_seed(seed, 0, 0, Stream::Pilots));
    let grid = build_physical_grid(sys, sys.q_angle, sys.q_range)?;
    let dict = build_nba(&grid, sys)?;

    let raw = build_dataset(
        sys,
        &dataset_spec(cfg),
        &pilots,
        &dict,
        derive_seed(seed, 0, 0, Stream::Dataset),
    )?;
    let pooled = LocalDataset::concat(0, &raw.iter().collect::<Vec<_>>())?;
    let standardizer = Standardizer::fit(&pooled.inputs)?;
    let train_sets: Vec<LocalDataset> = raw.iter().map(|d| standardizer.apply_dataset(d)).collect();

    let eval_spec = DatasetSpec {
        scenarios: fl.eval_scenarios,
        snrs_db: vec![fl.eval_snr_db],
        augmentation: 1,
    };
    let held_out = build_labeled_dataset(
        sys,
        &eval_spec,
        &pilots,
        &dict,
        derive_seed(seed, 0, 0, Stream::Evaluation),
    )?;
    let available: usize = held_out.iter().map(|l| l.data.count()).sum();
    if available < fl.eval_samples {
        return Err(Error::InvalidConfig(format!(
            "held-out set holds {available} samples, fewer than eval_samples = {}",
            fl.eval_samples
        )));
    }
    let take = |f: &dyn Fn(&crate::fedlearn::LabeledDataset) -> &DMatrix<f64>| {
        stack_rows(&held_out.iter().map(f).collect::<Vec<_>>())
            .rows(0, fl.eval_samples)
            .into_owned()
    };
    let eval_inputs = standardizer.apply(&take(&|l| &l.data.inputs));
    let eval_labels = take(&|l| &l.data.labels);
    let eval_truth = take(&|l| &l.truth);
    let label_nmse = rowwise_nmse(&eval_labels, &eval_truth)?;

    let spec = model_spec(cfg)?;
    let theta0 = ModelParams::init(spec.clone(), derive_seed(seed, 0, 0, Stream::Model));
    let opts = TrainOptions {
        rounds: fl.rounds,
        lr: fl.lr,
        step: LocalStep {
            batch: fl.batch.map_or(Batch::Full, Batch::Size),
            dropout: fl.dropout,
        },
    };
    let mut rounds = Vec::with_capacity(fl.rounds + 1);
    let outcome = train_observed(&spec, &theta0.theta, &train_sets, &opts, seed, |round, theta, loss| {
        rounds.push(FlRound {
            round,
            train_loss: loss,
            eval_nmse: prediction_nmse(&spec, theta, &eval_inputs, &eval_truth)?,
            label_nmse,
        });
        Ok(())
    })?;
    Ok(FlOutcome {
        rounds,
        overhead: overhead_report(cfg)?,
        model: ModelParams {
            spec,
            theta: outcome.theta,
        },
        standardizer,
        eval_samples: fl.eval_samples,
    })
}

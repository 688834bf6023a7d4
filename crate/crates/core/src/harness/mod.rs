//! Seeded Monte-Carlo experiments: NMSE sweeps, array-gain maps and
//! federated training runs, all written as CSV.

mod config;
mod fl;
mod gainmap;
pub mod output;
mod sweep;

pub use config::{
    AxisKind, CliOverrides, ExperimentConfig, FlConfig, GainMapConfig, GridAxis, OverheadConfig, SweepConfig,
};
pub use fl::{model_spec, overhead_report, run_fl_experiment, FlOutcome, FlRound, OverheadRow};
pub use gainmap::{gain_mode, run_gain_map, GainCell, GainMap, GainMode, Marker, MarkerKind, COMPOSITE_LAYER};
pub use sweep::{run_nmse_sweep, SummaryRow, SweepOutcome, TrialRecord};

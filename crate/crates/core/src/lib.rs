//! Wideband near-field THz channel estimation under beam-split.
//!
//! The crate is organised as a pipeline:
//!
//! - [`wavefield`]: array geometry, steering vectors and the beam-split map
//! - [`channel`]: random multi-user scenarios and exact spherical-wave channels
//! - [`dictionary`]: beam-split aware (NBA) and subcarrier-independent dictionaries
//! - [`estimators`]: pilot sounding, LS/LMMSE baselines and OMP variants
//! - [`fedlearn`]: model-free estimation trained by federated averaging
//! - [`harness`]: seeded Monte-Carlo experiments emitting CSV

pub mod channel;
pub mod config;
pub mod dictionary;
pub mod error;
pub mod estimators;
pub mod fedlearn;
pub mod harness;
pub mod linalg;
pub mod seeding;
pub mod wavefield;

pub use config::{Profile, SystemConfig};
pub use error::{Error, Result};
pub use num_complex::Complex64;

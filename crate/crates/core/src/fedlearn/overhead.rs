//! Symbol counts for centralized versus federated training.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadInputs {
    /// `D_k` for each user; its length is K.
    pub samples_per_user: Vec<u64>,
    pub rf_chains: u64,
    pub antennas: u64,
    /// Whether labels are shipped along with the inputs (xi).
    pub labels_sent: bool,
    /// Model size Z.
    pub params: u64,
    /// Training rounds T.
    pub rounds: u64,
}

impl OverheadInputs {
    pub fn users(&self) -> u64 {
        self.samples_per_user.len() as u64
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_user.is_empty() {
            return Err(Error::Empty("users"));
        }
        if self.samples_per_user.contains(&0) || self.rf_chains == 0 || self.antennas == 0 || self.params == 0 {
            return Err(Error::InvalidConfig(
                "dataset sizes, RF chains, antennas and Z must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `T_CL = sum_k D_k (3 N_RF + 2 xi N)`.
pub fn overhead_cl(inputs: &OverheadInputs) -> Result<u128> {
    inputs.validate()?;
    let xi = u128::from(inputs.labels_sent);
    let per_sample = 3 * inputs.rf_chains as u128 + 2 * xi * inputs.antennas as u128;
    Ok(inputs.samples_per_user.iter().map(|&d| d as u128 * per_sample).sum())
}

/// `T_FL = 2 Z T K` (parameters travel up and down every round).
pub fn overhead_fl(inputs: &OverheadInputs) -> Result<u128> {
    inputs.validate()?;
    Ok(2 * inputs.params as u128 * inputs.rounds as u128 * inputs.users() as u128)
}

/// `T_CL / T_FL`; infinite when no rounds are run.
pub fn overhead_ratio(inputs: &OverheadInputs) -> Result<f64> {
    let fl = overhead_fl(inputs)?;
    let cl = overhead_cl(inputs)?;
    Ok(if fl == 0 { f64::INFINITY } else { cl as f64 / fl as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(k: usize, d: u64, n_rf: u64, n: u64, xi: bool, z: u64, t: u64) -> OverheadInputs {
        OverheadInputs {
            samples_per_user: vec![d; k],
            rf_chains: n_rf,
            antennas: n,
            labels_sent: xi,
            params: z,
            rounds: t,
        }
    }

    #[test]
    fn small_cases() {
        assert_eq!(overhead_cl(&inputs(1, 1, 1, 1, true, 1, 1)).unwrap(), 5);
        let a = overhead_cl(&inputs(3, 10, 4, 16, false, 1, 1)).unwrap();
        let b = overhead_cl(&inputs(3, 10, 4, 256, false, 1, 1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(overhead_fl(&inputs(8, 1, 1, 1, false, 100, 0)).unwrap(), 0);
        assert!(overhead_ratio(&inputs(8, 1, 1, 1, false, 100, 0))
            .unwrap()
            .is_infinite());
    }

    #[test]
    fn fl_is_linear_in_each_factor() {
        let base = overhead_fl(&inputs(2, 1, 1, 1, false, 7, 3)).unwrap();
        assert_eq!(overhead_fl(&inputs(4, 1, 1, 1, false, 7, 3)).unwrap(), 2 * base);
        assert_eq!(overhead_fl(&inputs(2, 1, 1, 1, false, 21, 3)).unwrap(), 3 * base);
        assert_eq!(overhead_fl(&inputs(2, 1, 1, 1, false, 7, 15)).unwrap(), 5 * base);
    }

    #[test]
    fn unequal_dataset_sizes_sum() {
        let mut i = inputs(2, 1, 2, 4, true, 1, 1);
        i.samples_per_user = vec![3, 5];
        assert_eq!(overhead_cl(&i).unwrap(), 8 * (6 + 8));
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(overhead_cl(&inputs(0, 1, 1, 1, false, 1, 1)).is_err());
        assert!(overhead_fl(&inputs(2, 1, 0, 1, false, 1, 1)).is_err());
    }
}

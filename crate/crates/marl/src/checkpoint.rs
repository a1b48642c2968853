//! Versioned parameter checkpoints: named tensors with shape headers.

use serde::{Deserialize, Serialize};

use evshunt_core::error::{CoreError, Result};

use crate::net::ParamTensors;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointTensor {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub algorithm: String,
    pub tensors: Vec<CheckpointTensor>,
}

impl Checkpoint {
    pub fn from_params(algorithm: &str, params: &impl ParamTensors) -> Self {
        Self {
            format_version: CHECKPOINT_VERSION,
            algorithm: algorithm.to_string(),
            tensors: params
                .tensors()
                .into_iter()
                .map(|(name, shape, data)| CheckpointTensor {
                    name,
                    shape,
                    data: data.to_vec(),
                })
                .collect(),
        }
    }

    /// Restores tensors into a parameter set of identical architecture.
    pub fn apply_to(&self, params: &mut impl ParamTensors) -> Result<()> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(CoreError::Config(format!(
                "unsupported checkpoint version {}",
                self.format_version
            )));
        }
        let mut targets = params.tensors_mut();
        if targets.len() != self.tensors.len() {
            return Err(CoreError::Config(format!(
                "checkpoint holds {} tensors, parameters expect {}",
                self.tensors.len(),
                targets.len()
            )));
        }
        for (stored, (name, shape, data)) in self.tensors.iter().zip(targets.iter_mut()) {
            if stored.name != *name || stored.shape != *shape {
                return Err(CoreError::Config(format!(
                    "checkpoint tensor {} {:?} does not match architecture tensor {} {:?}",
                    stored.name, stored.shape, name, shape
                )));
            }
            if stored.data.len() != data.len() {
                return Err(CoreError::Config(format!(
                    "checkpoint tensor {} has {} values, expected {}",
                    stored.name,
                    stored.data.len(),
                    data.len()
                )));
            }
            data.copy_from_slice(&stored.data);
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json)
            .map_err(|e| CoreError::Config(format!("invalid checkpoint: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::MlpQNet;
    use evshunt_core::rng::{seeded_rng, streams};

    #[test]
    fn checkpoint_round_trips_exactly() {
        let mut rng = seeded_rng(21, streams::NET_INIT, 0);
        let net = MlpQNet::init(4, 8, 3, &mut rng);
        let ck = Checkpoint::from_params("vdn", &net);
        let json = ck.to_json();
        let restored_ck = Checkpoint::from_json(&json).unwrap();
        let mut restored = MlpQNet::zeros(4, 8, 3);
        restored_ck.apply_to(&mut restored).unwrap();
        assert_eq!(net, restored);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut rng = seeded_rng(22, streams::NET_INIT, 0);
        let net = MlpQNet::init(4, 8, 3, &mut rng);
        let ck = Checkpoint::from_params("vdn", &net);
        let mut other = MlpQNet::zeros(4, 16, 3);
        assert!(ck.apply_to(&mut other).is_err());
    }
}

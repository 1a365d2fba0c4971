//! Versioned JSON dump of all network tensors.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Architecture, PolicyNetwork};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "qflip-policy";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub architecture: Architecture,
    pub hidden: usize,
    pub depth: usize,
    /// Fingerprint of the run configuration that produced the weights.
    pub config_fingerprint: String,
    pub tensors: Vec<TensorRecord>,
}

impl Checkpoint {
    pub fn from_network(net: &PolicyNetwork, config_fingerprint: &str) -> Self {
        let p = net.params();
        let tensors = net
            .tensors()
            .into_iter()
            .map(|(name, shape, offset)| TensorRecord {
                name,
                shape,
                data: p[offset..offset + shape[0] * shape[1]].to_vec(),
            })
            .collect();
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            architecture: net.architecture(),
            hidden: net.hidden(),
            depth: net.depth(),
            config_fingerprint: config_fingerprint.to_string(),
            tensors,
        }
    }

    pub fn to_network(&self) -> Result<PolicyNetwork> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        let template = PolicyNetwork::zeros(self.architecture, self.hidden, self.depth)?;
        let expected = template.tensors();
        if expected.len() != self.tensors.len() {
            return Err(Error::Config("checkpoint tensor count mismatch".into()));
        }
        let mut params = vec![0.0; template.num_params()];
        for ((name, shape, offset), t) in expected.iter().zip(&self.tensors) {
            if *name != t.name || *shape != t.shape || t.data.len() != shape[0] * shape[1] {
                return Err(Error::Config(format!(
                    "checkpoint tensor {} has shape {:?}, expected {name} {shape:?}",
                    t.name, t.shape
                )));
            }
            params[*offset..offset + t.data.len()].copy_from_slice(&t.data);
        }
        PolicyNetwork::from_parts(self.architecture, self.hidden, self.depth, params)
    }
}

pub fn save_checkpoint(path: &Path, net: &PolicyNetwork, config_fingerprint: &str) -> Result<()> {
    let ck = Checkpoint::from_network(net, config_fingerprint);
    let text = serde_json::to_string_pretty(&ck).expect("checkpoint serializes");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(PolicyNetwork, Checkpoint)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        row: e.line(),
        message: e.to_string(),
    })?;
    Ok((ck.to_network()?, ck))
}

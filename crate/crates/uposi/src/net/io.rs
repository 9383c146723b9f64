//! Network persistence.
//!
//! Versioned JSON container; parameters are stored as base64 of the raw
//! little-endian `f64` bytes, so round-trips are bit-exact. See
//! `docs/formats.md` in the repository root for the documented schema.

use super::DenseNetwork;
use crate::error::Error;
use crate::Result;
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub(crate) const NET_FORMAT: &str = "uposi-net";
pub(crate) const NET_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct NetworkFile {
    format: String,
    version: u32,
    layer_dims: Vec<usize>,
    hidden_activation: String,
    output_activation: String,
    dropout_rate: f64,
    /// base64 of little-endian f64 parameter bytes, layout of `DenseNetwork::params`.
    params_le64: String,
}

pub fn network_to_json(net: &DenseNetwork) -> serde_json::Value {
    let params = net.params();
    let mut bytes = Vec::with_capacity(params.len() * 8);
    for p in &params {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    serde_json::to_value(NetworkFile {
        format: NET_FORMAT.to_string(),
        version: NET_VERSION,
        layer_dims: net.dims().to_vec(),
        hidden_activation: "tanh".to_string(),
        output_activation: "identity".to_string(),
        dropout_rate: net.dropout_rate(),
        params_le64: B64.encode(&bytes),
    })
    .expect("network file serializes")
}

pub fn network_from_json(value: serde_json::Value, path: &str) -> Result<DenseNetwork> {
    let file: NetworkFile =
        serde_json::from_value(value).map_err(|e| Error::MalformedFile {
            path: path.to_string(),
            reason: e.to_string(),
        })?;
    if file.format != NET_FORMAT {
        return Err(Error::MalformedFile {
            path: path.to_string(),
            reason: format!("unexpected format tag `{}`", file.format),
        });
    }
    if file.version != NET_VERSION {
        return Err(Error::VersionMismatch {
            path: path.to_string(),
            found: file.version,
            expected: NET_VERSION,
        });
    }
    if file.hidden_activation != "tanh" || file.output_activation != "identity" {
        return Err(Error::MalformedFile {
            path: path.to_string(),
            reason: format!(
                "unsupported activations `{}`/`{}`",
                file.hidden_activation, file.output_activation
            ),
        });
    }
    let bytes = B64.decode(&file.params_le64).map_err(|e| Error::MalformedFile {
        path: path.to_string(),
        reason: format!("bad base64 payload: {e}"),
    })?;
    if bytes.len() % 8 != 0 {
        return Err(Error::MalformedFile {
            path: path.to_string(),
            reason: format!("parameter payload of {} bytes is not 8-aligned", bytes.len()),
        });
    }
    let params: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();

    let mut net = DenseNetwork::zeros(&file.layer_dims, file.dropout_rate)?;
    if params.len() != net.n_params() {
        return Err(Error::MalformedFile {
            path: path.to_string(),
            reason: format!(
                "layer_dims {:?} expect {} parameters, payload has {}",
                file.layer_dims,
                net.n_params(),
                params.len()
            ),
        });
    }
    net.set_params(&params)?;
    Ok(net)
}

/// Write `net` to `path` (pretty JSON).
pub fn save_network(net: &DenseNetwork, path: &Path) -> Result<()> {
    let json = network_to_json(net);
    let text = serde_json::to_string_pretty(&json).expect("json prints");
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Read a network back from `path`.
pub fn load_network(path: &Path) -> Result<DenseNetwork> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(display.clone(), e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::MalformedFile {
            path: display.clone(),
            reason: e.to_string(),
        })?;
    network_from_json(value, &display)
}

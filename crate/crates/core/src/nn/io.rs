//! Parameter persistence: a flat little-endian `f64` blob plus a JSON shape
//! manifest next to it.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, Mlp};
use crate::error::invalid;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpManifest {
    pub layer_sizes: Vec<usize>,
    pub activations: Vec<Activation>,
    pub num_params: usize,
}

impl MlpManifest {
    pub fn of(net: &Mlp) -> Self {
        Self {
            layer_sizes: net.sizes().to_vec(),
            activations: net.activations().to_vec(),
            num_params: net.num_params(),
        }
    }
}

pub fn encode_blob(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode_blob(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return Err(invalid!("blob length {} is not a multiple of 8", bytes.len()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn write_blob(path: impl AsRef<Path>, values: &[f64]) -> Result<()> {
    fs::write(path, encode_blob(values))?;
    Ok(())
}

pub fn read_blob(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    decode_blob(&fs::read(path)?)
}

/// Writes `<stem>.bin` and `<stem>.json` into `dir`.
pub fn save_mlp(net: &Mlp, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
    let dir = dir.as_ref();
    write_blob(dir.join(format!("{stem}.bin")), net.params())?;
    fs::write(
        dir.join(format!("{stem}.json")),
        serde_json::to_string_pretty(&MlpManifest::of(net))?,
    )?;
    Ok(())
}

pub fn load_mlp(dir: impl AsRef<Path>, stem: &str) -> Result<Mlp> {
    let dir = dir.as_ref();
    let manifest: MlpManifest = serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
    let params = read_blob(dir.join(format!("{stem}.bin")))?;
    if params.len() != manifest.num_params {
        return Err(invalid!(
            "manifest declares {} parameters but blob holds {}",
            manifest.num_params,
            params.len()
        ));
    }
    Mlp::from_params(&manifest.layer_sizes, &manifest.activations, params)
}

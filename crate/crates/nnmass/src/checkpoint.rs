//! Model checkpoints: `NNMCKPT1`, a little-endian `u64` header length, a
//! JSON header with the spec, wiring, seeds and init scheme, then every
//! parameter as a little-endian `f64` in [`MlpModel::parameters`] order.

use std::fs;
use std::path::Path;

use nnmass_core::network::{InitScheme, MlpModel};
use nnmass_core::{ArchitectureSpec, TopologyRealization};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"NNMCKPT1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub spec: ArchitectureSpec,
    pub realization: TopologyRealization,
    pub topo_seed: u64,
    pub init_seed: u64,
    pub init: InitScheme,
    pub parameters: usize,
}

pub fn encode(model: &MlpModel) -> Vec<u8> {
    let params = model.parameters();
    let header = Header {
        spec: model.spec().clone(),
        realization: model.realization().clone(),
        topo_seed: model.topo_seed(),
        init_seed: model.init_seed(),
        init: model.init_scheme(),
        parameters: params.len(),
    };
    let json = serde_json::to_vec(&header).expect("checkpoint header serializes");
    let mut out = Vec::with_capacity(16 + json.len() + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<MlpModel> {
    let bad = |reason: String| Error::Checkpoint {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint (bad magic)".into()));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let header_end = usize::try_from(len)
        .ok()
        .and_then(|l| l.checked_add(16))
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| bad(format!("header length {len} exceeds file size")))?;
    let header: Header = serde_json::from_slice(&bytes[16..header_end]).map_err(|e| Error::json(path, e))?;
    let blob = &bytes[header_end..];
    if blob.len() != 8 * header.parameters {
        return Err(bad(format!(
            "expected {} parameter bytes, found {}",
            8 * header.parameters,
            blob.len()
        )));
    }
    let params: Vec<f64> = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mut model = MlpModel::from_realization(&header.spec, header.realization, header.init_seed, header.init)
        .map_err(|e| Error::in_file(path, e))?;
    model.set_parameters(&params).map_err(|e| Error::in_file(path, e))?;
    Ok(model)
}

pub fn save(model: &MlpModel, path: &Path) -> Result<()> {
    fs::write(path, encode(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<MlpModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

use std::fs;
use std::path::Path;

use arim_core::fcn::{ArchKind, FcnModel};

use crate::error::{core_at, io, Result};
use crate::write_atomic;

pub fn save_model(path: &Path, model: &FcnModel) -> Result<()> {
    write_atomic(path, &model.encode())
}

pub fn load_model(path: &Path) -> Result<FcnModel> {
    let bytes = fs::read(path).map_err(io(path))?;
    FcnModel::decode(&bytes).map_err(core_at(path))
}

/// Loads a model and rejects files of a different architecture.
pub fn load_model_expecting(path: &Path, kind: ArchKind) -> Result<FcnModel> {
    let bytes = fs::read(path).map_err(io(path))?;
    FcnModel::decode_expecting(&bytes, kind).map_err(core_at(path))
}

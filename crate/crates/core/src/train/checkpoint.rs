//! JSON checkpoints. Floats are written in shortest round-trip form, so a
//! reloaded model reproduces forward outputs bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cells::{Model, Params, StackConfig};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "d2rnn-model";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointDoc {
    format: String,
    version: u32,
    seed: u64,
    config: StackConfig,
    params: Params,
}

#[derive(Deserialize)]
struct VersionProbe {
    format: Option<String>,
    version: Option<u32>,
}

pub fn checkpoint_to_string(model: &Model) -> Result<String> {
    let doc = CheckpointDoc {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        seed: model.seed,
        config: model.config.clone(),
        params: model.params.clone(),
    };
    serde_json::to_string_pretty(&doc).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn checkpoint_from_str(text: &str) -> Result<Model> {
    let probe: VersionProbe =
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("malformed checkpoint: {e}")))?;
    if probe.format.as_deref() != Some(CHECKPOINT_FORMAT) {
        return Err(Error::Checkpoint(format!(
            "not a model checkpoint (format {:?})",
            probe.format
        )));
    }
    match probe.version {
        Some(CHECKPOINT_VERSION) => {}
        v => {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {v:?} (expected {CHECKPOINT_VERSION})"
            )))
        }
    }
    let doc: CheckpointDoc =
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("malformed checkpoint: {e}")))?;
    let model = Model {
        config: doc.config,
        seed: doc.seed,
        params: doc.params,
    };
    model
        .validate()
        .map_err(|e| Error::Checkpoint(format!("inconsistent checkpoint: {e}")))?;
    if !model.params.is_finite() {
        return Err(Error::Checkpoint("checkpoint holds non-finite parameters".into()));
    }
    Ok(model)
}

/// Writes via a temporary sibling file and rename.
pub fn checkpoint_save(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = checkpoint_to_string(model)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn checkpoint_load(path: impl AsRef<Path>) -> Result<Model> {
    checkpoint_from_str(&fs::read_to_string(path)?)
}

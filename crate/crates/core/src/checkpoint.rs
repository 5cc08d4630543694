//! Versioned run snapshots.
//!
//! A checkpoint is a JSON container holding the full trainer state (every
//! parameter tensor, EMA targets, queue contents), the positions of the
//! consumed random streams, and the step counter. Floats are printed in
//! shortest round-trip form, so save followed by load is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::ssl::{ByolRun, ByolState, NceRun, NceState};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Position of one named random stream, as the 128-bit word counter split
/// into low and high halves.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStreamState {
    pub name: String,
    pub word_lo: u64,
    pub word_hi: u64,
}

impl RngStreamState {
    pub fn new(name: &str, pos: (u64, u64)) -> Self {
        RngStreamState { name: name.to_string(), word_lo: pos.0, word_hi: pos.1 }
    }
}

/// The trainer state held by a checkpoint.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub enum ModelState<S: Scalar = f64> {
    Byol(ByolState<S>),
    Nce(NceState<S>),
}

impl<S: Scalar> ModelState<S> {
    pub fn step(&self) -> usize {
        match self {
            ModelState::Byol(s) => s.step,
            ModelState::Nce(s) => s.step,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Checkpoint<S: Scalar = f64> {
    pub version: u32,
    pub model: ModelState<S>,
    pub rng: Vec<RngStreamState>,
    pub step: usize,
}

impl<S: Scalar> Checkpoint<S> {
    pub fn from_byol(run: &ByolRun<S>) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            step: run.state.step,
            rng: vec![
                RngStreamState::new(crate::rng::DATA, run.data_pos),
                RngStreamState::new(crate::rng::AUGMENT, run.augment_pos),
            ],
            model: ModelState::Byol(run.state.clone()),
        }
    }

    pub fn from_nce(run: &NceRun<S>) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            step: run.state.step,
            rng: vec![
                RngStreamState::new(crate::rng::DATA, run.data_pos),
                RngStreamState::new(crate::rng::AUGMENT, run.augment_pos),
            ],
            model: ModelState::Nce(run.state.clone()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::format(format!("checkpoint serialization failed: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint<S> = serde_json::from_str(text)
            .map_err(|e| Error::format(format!("checkpoint parse failed: {e}")))?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::format(format!(
                "checkpoint version {} is not the supported {CHECKPOINT_VERSION}",
                ck.version
            )));
        }
        Ok(ck)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

// ---------------------------------------------------------------------------

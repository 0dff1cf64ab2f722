//! Versioned binary model files.
//!
//! Layout: 8-byte magic, little-endian `u32` format version, then the
//! bincode-encoded [`ModelFile`] body.

use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{CdeError, Result};
use crate::forest::Forest;

pub const MAGIC: &[u8; 8] = b"CDEFRST\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub forest: Forest,
    pub covariate_names: Vec<String>,
    pub response_names: Vec<String>,
}

impl ModelFile {
    pub fn write_to<W: Write>(&self, mut writer: W) -> Result<()> {
        writer.write_all(MAGIC)?;
        writer.write_all(&FORMAT_VERSION.to_le_bytes())?;
        bincode::serialize_into(&mut writer, self).map_err(|e| CdeError::Format(e.to_string()))?;
        writer.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut reader: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        reader
            .read_exact(&mut magic)
            .map_err(|_| CdeError::Format("file too short for a model header".into()))?;
        if &magic != MAGIC {
            return Err(CdeError::Format("not a model file (bad magic)".into()));
        }
        let mut version = [0u8; 4];
        reader
            .read_exact(&mut version)
            .map_err(|_| CdeError::Format("truncated model header".into()))?;
        let version = u32::from_le_bytes(version);
        if version > FORMAT_VERSION || version == 0 {
            return Err(CdeError::Version {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        let model: ModelFile = bincode::deserialize_from(reader).map_err(|e| CdeError::Format(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let n = self.forest.n_training();
        if self.forest.trees.len() != self.forest.config.n_trees {
            return Err(CdeError::Format("tree count does not match config".into()));
        }
        for tree in &self.forest.trees {
            tree.validate(n)?;
        }
        if self.covariate_names.len() != self.forest.n_scalar
            || self.response_names.len() != self.forest.response_dims()
        {
            return Err(CdeError::Format("column names do not match the model layout".into()));
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

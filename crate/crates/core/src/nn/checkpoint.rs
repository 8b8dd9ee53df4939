use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layers::LayerKind;
use super::model::Model;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "tagcn-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Architecture summary stored next to the raw parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerInfo {
    pub kind: LayerKind,
    pub in_width: usize,
    pub out_width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub architecture: Vec<LayerInfo>,
    pub model: Model,
}

impl Checkpoint {
    pub fn new(model: Model) -> Self {
        let architecture = model
            .layers()
            .iter()
            .map(|l| LayerInfo {
                kind: l.kind(),
                in_width: l.in_width(),
                out_width: l.out_width(),
            })
            .collect();
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            architecture,
            model,
        }
    }

    fn validate(self) -> Result<Model> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        if self.model.layers().iter().any(|l| l.params().iter().any(|p| p.iter().any(|v| !v.is_finite()))) {
            return Err(Error::InvalidArgument("checkpoint contains non-finite parameters".into()));
        }
        // rebuild to re-check width chaining
        let model = Model::new(self.model.layers().to_vec(), self.model.dropout_rate())?;
        if Checkpoint::new(model.clone()).architecture != self.architecture {
            return Err(Error::InvalidArgument("checkpoint architecture does not match its parameters".into()));
        }
        Ok(model)
    }
}

pub fn save_checkpoint(path: &Path, model: &Model) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &Checkpoint::new(model.clone()))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    let ck: Checkpoint = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    ck.validate()
}

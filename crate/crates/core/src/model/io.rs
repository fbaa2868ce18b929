//! Checkpoints and pretrained word vectors.
//!
//! Checkpoint layout: the 8 bytes `DPMODEL1`, a little-endian `u64` byte
//! length, a JSON header `{"config": .., "vocab": ..}`, then the tensor
//! container written by [`ParamStore::write_to`].

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig, Vocabulary};
use crate::autodiff::ParamStore;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"DPMODEL1";

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocab: Vocabulary,
}

/// Word vectors read from a whitespace-separated text file.
#[derive(Clone, Debug, Default)]
pub struct Pretrained {
    pub dim: usize,
    pub vectors: Vec<(String, Vec<f64>)>,
}

/// Read `word v1 .. vd` lines. Every line must have the same width.
pub fn load_pretrained<R: BufRead>(reader: R) -> Result<Pretrained> {
    let mut out = Pretrained::default();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let vector = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::format(0, format!("bad number: {e}")).at_line(k + 1))?;
        if out.vectors.is_empty() {
            out.dim = vector.len();
        } else if vector.len() != out.dim {
            return Err(Error::format(
                0,
                format!("expected {} values, found {}", out.dim, vector.len()),
            )
            .at_line(k + 1));
        }
        out.vectors.push((word.to_string(), vector));
    }
    Ok(out)
}

impl Model {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = serde_json::to_vec(&Header {
            config: self.config.clone(),
            vocab: self.vocab.clone(),
        })
        .map_err(|e| Error::Argument(e.to_string()))?;
        w.write_all(MAGIC)?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        self.params.write_to(&mut w)
    }

    /// Rebuild a model from a checkpoint. Every tensor of the fresh layout
    /// must be present with the same shape.
    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::format(0, "not a model checkpoint"));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let mut header = vec![0u8; u64::from_le_bytes(len) as usize];
        r.read_exact(&mut header)?;
        let header: Header = serde_json::from_slice(&header)
            .map_err(|e| Error::format(0, format!("bad checkpoint header: {e}")))?;
        let stored = ParamStore::read_from(r)?;
        let mut model = Model::new(header.config, header.vocab, 0)?;
        if stored.len() != model.params.len() {
            return Err(Error::Structure(format!(
                "checkpoint has {} tensors, model expects {}",
                stored.len(),
                model.params.len()
            )));
        }
        for (_, name, tensor) in stored.iter() {
            let id = model
                .params
                .id(name)
                .ok_or_else(|| Error::Structure(format!("unexpected tensor {name}")))?;
            let target = model.params.get_mut(id);
            if target.shape() != tensor.shape() {
                return Err(Error::Dimension {
                    op: "load checkpoint",
                    left: target.shape().to_vec(),
                    right: tensor.shape().to_vec(),
                });
            }
            target.data_mut().copy_from_slice(tensor.data());
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

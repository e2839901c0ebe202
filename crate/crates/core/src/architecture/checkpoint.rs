//! Checkpoint container: `"RRCK"`, a `u32` length-prefixed JSON header, a
//! `u32` record count, then records of `u32` name length, UTF-8 name and a
//! `.rten` tensor. All integers are little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::{read_tensor_from, write_tensor_to};
use crate::error::{Error, Result};
use crate::tensorkernels::{ParamStore, Tensor};

use super::config::ModelConfig;
use super::model::{build_model, RridModel};

const MAGIC: &[u8; 4] = b"RRCK";
const MAX_NAME: usize = 4096;
const MAX_HEADER: usize = 1 << 24;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub model: ModelConfig,
    /// Opaque training state (step, schedule, best score, ...).
    #[serde(default)]
    pub train_state: Option<serde_json::Value>,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub tensors: Vec<(String, Tensor<f32>)>,
}

impl Checkpoint {
    pub fn from_model(model: &RridModel, train_state: Option<serde_json::Value>) -> Self {
        Self {
            header: CheckpointHeader { model: model.config.clone(), train_state },
            tensors: model.params.iter().map(|p| (p.name.clone(), p.value.clone())).collect(),
        }
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor<f32>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Rebuilds the model from the header and loads every parameter.
    pub fn into_model(&self) -> Result<RridModel> {
        let mut model = build_model(&self.header.model, 0)?;
        load_params(&mut model.params, self, "")?;
        Ok(model)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = serde_json::to_vec(&self.header)?;
        w.write_all(MAGIC)?;
        w.write_all(&u32_len(header.len())?.to_le_bytes())?;
        w.write_all(&header)?;
        w.write_all(&u32_len(self.tensors.len())?.to_le_bytes())?;
        for (name, t) in &self.tensors {
            w.write_all(&u32_len(name.len())?.to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            write_tensor_to(&mut w, t)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, "magic")?;
        if &magic != MAGIC {
            return Err(Error::Format("not a checkpoint (bad magic)".into()));
        }
        let len = read_u32(&mut r, "header length")?;
        if len > MAX_HEADER {
            return Err(Error::Format(format!("header length {len} too large")));
        }
        let mut header = vec![0u8; len];
        read_exact(&mut r, &mut header, "header")?;
        let header: CheckpointHeader =
            serde_json::from_slice(&header).map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
        let count = read_u32(&mut r, "record count")?;
        let mut tensors = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let n = read_u32(&mut r, "name length")?;
            if n > MAX_NAME {
                return Err(Error::Format(format!("record name length {n} too large")));
            }
            let mut name = vec![0u8; n];
            read_exact(&mut r, &mut name, "name")?;
            let name = String::from_utf8(name).map_err(|_| Error::Format("record name is not UTF-8".into()))?;
            tensors.push((name, read_tensor_from(&mut r)?));
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after last record".into()));
        }
        Ok(Self { header, tensors })
    }

    /// Writes to a temporary sibling and renames, so readers never see a partial file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        {
            let mut w = BufWriter::new(File::create(&tmp)?);
            self.write_to(&mut w)?;
            w.flush()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

/// Copies records named `prefix + param name` into `store`. Every parameter
/// must be present with matching dims.
pub fn load_params(store: &mut ParamStore<f32>, ck: &Checkpoint, prefix: &str) -> Result<()> {
    let names: Vec<String> = store.names().map(str::to_string).collect();
    for name in names {
        let key = format!("{prefix}{name}");
        let t = ck
            .tensor(&key)
            .ok_or_else(|| Error::Format(format!("checkpoint lacks tensor {key:?}")))?;
        if store.by_name(&name).map(|p| p.value.dims()) != Some(t.dims()) {
            return Err(Error::Format(format!("tensor {key:?} has dims {:?}, model expects {:?}", t.dims(), store.by_name(&name).unwrap().value.dims())));
        }
        store.set_value(&name, t.clone())?;
    }
    Ok(())
}

fn u32_len(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Format(format!("length {n} exceeds u32")))
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated checkpoint ({what})")),
        _ => Error::Io(e),
    })
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b) as usize)
}

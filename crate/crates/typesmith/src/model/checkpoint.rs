//! Versioned model checkpoints.
//!
//! One file holds both trained models (argument and return), the
//! architecture description, and the hash of the type vocabulary they were
//! trained against. Loading refuses a checkpoint whose vocabulary hash does
//! not match the supplied vocabulary.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::classifier::ModelParameters;
use super::{ModelError, ModelHyper};
use crate::vocab::TypeVocabulary;

#[derive(Debug, Clone, PartialEq)]
pub struct TwinModels {
    pub argument: ModelParameters,
    pub ret: ModelParameters,
}

const MAGIC: &[u8; 4] = b"TMDL";
const VERSION: u32 = 1;

pub fn save_models(path: &Path, models: &TwinModels, vocab: &TypeVocabulary) -> Result<(), ModelError> {
    let io_err = |source| ModelError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    w.write_all(MAGIC).map_err(io_err)?;
    w.write_u32::<LittleEndian>(VERSION).map_err(io_err)?;
    w.write_all(&vocab.hash()).map_err(io_err)?;
    let hyper = serde_json::to_string(&models.argument.hyper).expect("hyper serializes");
    w.write_u32::<LittleEndian>(hyper.len() as u32).map_err(io_err)?;
    w.write_all(hyper.as_bytes()).map_err(io_err)?;
    for model in [&models.argument, &models.ret] {
        let flat = model.flatten();
        w.write_u64::<LittleEndian>(flat.len() as u64).map_err(io_err)?;
        for v in flat {
            w.write_f64::<LittleEndian>(v).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn load_models(path: &Path, vocab: &TypeVocabulary) -> Result<TwinModels, ModelError> {
    let io_err = |source| ModelError::Io {
        path: path.display().to_string(),
        source,
    };
    let fmt = |reason: &str| ModelError::Format {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    let mut r = std::io::BufReader::new(std::fs::File::open(path).map_err(io_err)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(fmt("bad magic"));
    }
    if r.read_u32::<LittleEndian>().map_err(io_err)? != VERSION {
        return Err(fmt("unsupported version"));
    }
    let mut hash = [0u8; 32];
    r.read_exact(&mut hash).map_err(io_err)?;
    if hash != vocab.hash() {
        return Err(ModelError::VocabularyHashMismatch);
    }
    let hyper_len = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
    let mut buf = vec![0u8; hyper_len];
    r.read_exact(&mut buf).map_err(io_err)?;
    let hyper: ModelHyper =
        serde_json::from_slice(&buf).map_err(|_| fmt("unreadable hyperparameters"))?;
    if hyper.vocab_size != vocab.len() {
        return Err(ModelError::VocabularyHashMismatch);
    }
    let read_model = |r: &mut dyn Read| -> Result<ModelParameters, ModelError> {
        let mut model = ModelParameters::zeros(&hyper);
        let n = model.n_params();
        let reader = r;
        let len = reader.read_u64::<LittleEndian>().map_err(io_err)? as usize;
        if len != n {
            return Err(fmt("parameter count does not match the architecture"));
        }
        let mut flat = vec![0.0f64; n];
        for v in flat.iter_mut() {
            *v = reader.read_f64::<LittleEndian>().map_err(io_err)?;
        }
        model.assign_flat(&flat);
        Ok(model)
    };
    let argument = read_model(&mut r)?;
    let ret = read_model(&mut r)?;
    Ok(TwinModels { argument, ret })
}

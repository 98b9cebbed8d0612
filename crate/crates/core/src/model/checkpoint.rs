//! Self-describing model checkpoints: a JSON header (architecture,
//! provenance, encoding parameters, tensor table) followed by raw
//! little-endian f32 weight data.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use super::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, ModelError};
use crate::codec::EncodingParams;

const MAGIC: &[u8; 8] = b"C2THCKPT";
const VERSION: u32 = 1;

/// Where a trained model came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Condition set the model was trained on (e.g. "winter4").
    pub condition: String,
    /// Condition of the checkpoint this model was fine-tuned from.
    pub fine_tuned_from: Option<String>,
    pub epochs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub generator: Generator<f32>,
    pub discriminator: Discriminator<f32>,
    pub encoding: EncodingParams,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Offset into the data section, in f32 elements.
    offset: usize,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    generator: GeneratorConfig,
    discriminator: DiscriminatorConfig,
    /// Normalization layer kind baked into the architecture.
    norm: String,
    encoding: EncodingParams,
    provenance: Provenance,
    tensors: Vec<TensorEntry>,
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), ModelError> {
    let mut tensors = Vec::new();
    let mut data: Vec<f32> = Vec::new();
    let mut push_params = |descs: Vec<crate::nn::ParamDesc>, params: Vec<&[f32]>| {
        for (d, p) in descs.into_iter().zip(params) {
            tensors.push(TensorEntry {
                name: d.name,
                shape: d.shape,
                offset: data.len(),
                len: p.len(),
            });
            data.extend_from_slice(p);
        }
    };
    push_params(ckpt.generator.param_descs(), ckpt.generator.params());
    push_params(
        ckpt.discriminator.param_descs(),
        ckpt.discriminator.params(),
    );

    let header = Header {
        version: VERSION,
        generator: *ckpt.generator.config(),
        discriminator: *ckpt.discriminator.config(),
        norm: "instance".to_string(),
        encoding: ckpt.encoding,
        provenance: ckpt.provenance.clone(),
        tensors,
    };
    let header_json =
        serde_json::to_vec(&header).map_err(|e| ModelError::BadCheckpoint(e.to_string()))?;

    let mut bytes = Vec::with_capacity(16 + header_json.len() + data.len() * 4);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&header_json);
    for v in &data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, ModelError> {
    let bytes =
        fs::read(path).map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))?;
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(ModelError::BadCheckpoint(format!(
            "{}: not a checkpoint file",
            path.display()
        )));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if bytes.len() < 12 + header_len {
        return Err(ModelError::BadCheckpoint("truncated header".into()));
    }
    let header: Header = serde_json::from_slice(&bytes[12..12 + header_len])
        .map_err(|e| ModelError::BadCheckpoint(e.to_string()))?;
    if header.version != VERSION {
        return Err(ModelError::BadCheckpoint(format!(
            "unsupported version {}",
            header.version
        )));
    }
    let data_bytes = &bytes[12 + header_len..];
    if data_bytes.len() % 4 != 0 {
        return Err(ModelError::BadCheckpoint("odd data section".into()));
    }
    let data: Vec<f32> = data_bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();

    let mut generator = Generator::<f32>::new(&header.generator, 0)?;
    let mut discriminator = Discriminator::<f32>::new(&header.discriminator, 0)?;
    let descs: Vec<_> = generator
        .param_descs()
        .into_iter()
        .chain(discriminator.param_descs())
        .collect();
    if descs.len() != header.tensors.len() {
        return Err(ModelError::ShapeMismatch(format!(
            "checkpoint has {} tensors, architecture needs {}",
            header.tensors.len(),
            descs.len()
        )));
    }
    {
        let mut slots: Vec<&mut [f32]> = generator.params_mut();
        slots.extend(discriminator.params_mut());
        for ((desc, entry), slot) in descs.iter().zip(&header.tensors).zip(slots) {
            if desc.name != entry.name || desc.shape != entry.shape || slot.len() != entry.len {
                return Err(ModelError::ShapeMismatch(format!(
                    "tensor {} ({:?}) does not match architecture {} ({:?})",
                    entry.name, entry.shape, desc.name, desc.shape
                )));
            }
            let end = entry.offset + entry.len;
            if end > data.len() {
                return Err(ModelError::BadCheckpoint(format!(
                    "tensor {} overruns data section",
                    entry.name
                )));
            }
            slot.copy_from_slice(&data[entry.offset..end]);
        }
    }
    Ok(Checkpoint {
        generator,
        discriminator,
        encoding: header.encoding,
        provenance: header.provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let gen_cfg = GeneratorConfig {
            size: 32,
            scale: 0.1,
            ..GeneratorConfig::default()
        };
        let disc_cfg = DiscriminatorConfig {
            scale: 0.1,
            in_channels: 4,
        };
        let ckpt = Checkpoint {
            generator: Generator::new(&gen_cfg, 17).unwrap(),
            discriminator: Discriminator::new(&disc_cfg, 18).unwrap(),
            encoding: EncodingParams::for_outdoor(-4.0),
            provenance: Provenance {
                condition: "winter4".into(),
                fine_tuned_from: None,
                epochs: 5,
                seed: 17,
            },
        };
        save_checkpoint(&path, &ckpt).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.generator.params(), ckpt.generator.params());
        assert_eq!(back.discriminator.params(), ckpt.discriminator.params());
        assert_eq!(back.encoding, ckpt.encoding);
        assert_eq!(back.provenance, ckpt.provenance);
        assert_eq!(back.generator.config(), ckpt.generator.config());
    }

    #[test]
    fn garbage_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.ckpt");
        std::fs::write(&path, b"not a checkpoint at all").unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(ModelError::BadCheckpoint(_))
        ));
    }
}

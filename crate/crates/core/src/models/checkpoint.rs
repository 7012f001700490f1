//! Versioned binary checkpoint container: config snapshot, all parameter
//! arrays with shapes, optimizer state, and the epoch counter. Parameters
//! are stored as little-endian f64 bits, so a save/load cycle is
//! bit-exact.

use super::config::{EncoderKind, RunConfig};
use super::{AutoEncoderModel, TrainOutput};
use crate::adam::AdamState;
use crate::divergence::LatentDiscriminator;
use crate::nn::{Activation, DenseLayer, Mlp};
use crate::tensor::Tensor;
use std::path::Path;
use thiserror::Error;

const MAGIC: &[u8; 4] = b"WAEC";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error for {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub epoch: u64,
    pub model: AutoEncoderModel,
    pub disc: Option<LatentDiscriminator>,
    pub adam: AdamState,
    pub disc_adam: Option<AdamState>,
}

impl Checkpoint {
    pub fn from_train_output(cfg: &RunConfig, out: &TrainOutput) -> Self {
        Self {
            config: cfg.clone(),
            epoch: out.epochs_done as u64,
            model: out.model.clone(),
            disc: out.disc.clone(),
            adam: out.adam.clone(),
            disc_adam: out.disc_adam.clone(),
        }
    }
}

struct Writer {
    bytes: Vec<u8>,
}

impl Writer {
    fn u32(&mut self, v: u32) {
        self.bytes.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.bytes.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.bytes.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        self.u64(vs.len() as u64);
        for &v in vs {
            self.f64(v);
        }
    }
    fn mlp(&mut self, m: &Mlp) {
        self.u32(m.layers.len() as u32);
        for layer in &m.layers {
            self.u32(match layer.activation {
                Activation::Identity => 0,
                Activation::Relu => 1,
                Activation::Tanh => 2,
                Activation::Sigmoid => 3,
            });
            self.u32(layer.out_dim() as u32);
            self.u32(layer.in_dim() as u32);
            self.f64s(layer.weights.values());
            self.f64s(layer.bias.values());
        }
    }
    fn adam(&mut self, a: &AdamState) {
        self.u64(a.step);
        self.f64(a.alpha);
        self.f64(a.beta1);
        self.f64(a.beta2);
        self.f64(a.epsilon);
        self.f64s(&a.m);
        self.f64s(&a.v);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.bytes.len() {
            return Err(CheckpointError::Corrupt(format!(
                "unexpected end at byte {}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self) -> Result<Vec<f64>, CheckpointError> {
        let n = self.u64()? as usize;
        if n > 1 << 30 {
            return Err(CheckpointError::Corrupt(format!("array length {n}")));
        }
        (0..n).map(|_| self.f64()).collect()
    }
    fn mlp(&mut self) -> Result<Mlp, CheckpointError> {
        let n_layers = self.u32()? as usize;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let activation = match self.u32()? {
                0 => Activation::Identity,
                1 => Activation::Relu,
                2 => Activation::Tanh,
                3 => Activation::Sigmoid,
                other => {
                    return Err(CheckpointError::Corrupt(format!(
                        "unknown activation tag {other}"
                    )))
                }
            };
            let out_dim = self.u32()? as usize;
            let in_dim = self.u32()? as usize;
            let w = self.f64s()?;
            let b = self.f64s()?;
            if w.len() != out_dim * in_dim || b.len() != out_dim {
                return Err(CheckpointError::Corrupt("layer shape mismatch".into()));
            }
            layers.push(DenseLayer {
                weights: Tensor::matrix(out_dim, in_dim, w)
                    .map_err(|e| CheckpointError::Corrupt(e.to_string()))?,
                bias: Tensor::vector(b),
                activation,
            });
        }
        Ok(Mlp { layers })
    }
    fn adam(&mut self) -> Result<AdamState, CheckpointError> {
        let step = self.u64()?;
        let alpha = self.f64()?;
        let beta1 = self.f64()?;
        let beta2 = self.f64()?;
        let epsilon = self.f64()?;
        let m = self.f64s()?;
        let v = self.f64s()?;
        if m.len() != v.len() {
            return Err(CheckpointError::Corrupt("optimizer moment lengths".into()));
        }
        Ok(AdamState {
            step,
            m,
            v,
            alpha,
            beta1,
            beta2,
            epsilon,
        })
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), CheckpointError> {
    let mut w = Writer { bytes: Vec::new() };
    w.bytes.extend_from_slice(MAGIC);
    w.u32(VERSION);
    let config_text = ckpt.config.to_toml();
    w.u32(config_text.len() as u32);
    w.bytes.extend_from_slice(config_text.as_bytes());
    w.u64(ckpt.epoch);
    w.mlp(&ckpt.model.encoder);
    w.mlp(&ckpt.model.decoder);
    match &ckpt.disc {
        Some(d) => {
            w.bytes.push(1);
            w.mlp(&d.network);
        }
        None => w.bytes.push(0),
    }
    w.adam(&ckpt.adam);
    match &ckpt.disc_adam {
        Some(a) => {
            w.bytes.push(1);
            w.adam(a);
        }
        None => w.bytes.push(0),
    }
    std::fs::write(path, w.bytes).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
    };
    if r.take(4)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let config_len = r.u32()? as usize;
    let config_text = std::str::from_utf8(r.take(config_len)?)
        .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    let config = RunConfig::from_toml(config_text)
        .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    let epoch = r.u64()?;
    let encoder = r.mlp()?;
    let decoder = r.mlp()?;
    let disc = match r.take(1)?[0] {
        0 => None,
        1 => Some(LatentDiscriminator {
            network: r.mlp()?,
            add_log_prior: config.gan.add_log_prior,
        }),
        other => {
            return Err(CheckpointError::Corrupt(format!(
                "bad adversary flag {other}"
            )))
        }
    };
    let adam = r.adam()?;
    let disc_adam = match r.take(1)?[0] {
        0 => None,
        1 => Some(r.adam()?),
        other => {
            return Err(CheckpointError::Corrupt(format!(
                "bad optimizer flag {other}"
            )))
        }
    };
    let model = AutoEncoderModel {
        encoder,
        decoder,
        encoder_kind: config.model.encoder_kind,
        d_z: config.model.d_z,
        d_x: config.model.d_x,
    };
    if model.encoder.in_dim() != config.model.d_x {
        return Err(CheckpointError::Corrupt(
            "encoder input dim disagrees with config".into(),
        ));
    }
    let expected_out = match config.model.encoder_kind {
        EncoderKind::Deterministic => config.model.d_z,
        EncoderKind::Gaussian => 2 * config.model.d_z,
    };
    if model.encoder.out_dim() != expected_out {
        return Err(CheckpointError::Corrupt(
            "encoder output dim disagrees with config".into(),
        ));
    }
    Ok(Checkpoint {
        config,
        epoch,
        model,
        disc,
        adam,
        disc_adam,
    })
}

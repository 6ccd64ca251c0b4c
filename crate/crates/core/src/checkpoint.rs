//! Binary model checkpoints.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! b"FGCK"  u32 version  u64 header_len  header (JSON, UTF-8)
//! f64 * n  sender layers, each weights then biases
//! f64 * m  receiver layers, same order
//! ```
//!
//! The header holds both configs and every layer's shape and activation, so
//! the float section is read without any further framing. Floats are stored
//! bit-for-bit.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::{SignalingModel, TrainConfig};
use crate::error::{Error, Result};
use crate::game::GameConfig;
use crate::nn::{Activation, DenseLayer, Mlp};

const MAGIC: &[u8; 4] = b"FGCK";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerShape {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    game: GameConfig,
    train: TrainConfig,
    sender: Vec<LayerShape>,
    receiver: Vec<LayerShape>,
}

fn shapes(net: &Mlp) -> Vec<LayerShape> {
    net.layers()
        .iter()
        .map(|l| LayerShape {
            in_dim: l.in_dim(),
            out_dim: l.out_dim(),
            activation: l.activation(),
        })
        .collect()
}

pub fn encode(model: &SignalingModel, train: &TrainConfig) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&Header {
        game: *model.game(),
        train: *train,
        sender: shapes(model.sender()),
        receiver: shapes(model.receiver()),
    })?;
    let n_floats = model.sender().n_params() + model.receiver().n_params();
    let mut out = Vec::with_capacity(16 + header.len() + 8 * n_floats);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for net in [model.sender(), model.receiver()] {
        for layer in net.layers() {
            for v in layer.weights().iter().chain(layer.biases()) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("truncated checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Format("layer too large".into()))?,
        )?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

fn read_net(cur: &mut Cursor, shapes: &[LayerShape]) -> Result<Mlp> {
    let layers = shapes
        .iter()
        .map(|s| {
            let w = cur.floats(s.in_dim * s.out_dim)?;
            let b = cur.floats(s.out_dim)?;
            DenseLayer::from_parts(s.in_dim, s.out_dim, s.activation, w, b)
        })
        .collect::<Result<Vec<_>>>()?;
    Mlp::new(layers)
}

pub fn decode(bytes: &[u8]) -> Result<(SignalingModel, TrainConfig)> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(cur.take(4)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let header_len = u64::from_le_bytes(cur.take(8)?.try_into().expect("8 bytes"));
    let header_len = usize::try_from(header_len).map_err(|_| Error::Format("header too large".into()))?;
    let header: Header = serde_json::from_slice(cur.take(header_len)?)?;
    let sender = read_net(&mut cur, &header.sender)?;
    let receiver = read_net(&mut cur, &header.receiver)?;
    if cur.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    Ok((SignalingModel::from_parts(header.game, sender, receiver)?, header.train))
}

pub fn save(path: &Path, model: &SignalingModel, train: &TrainConfig) -> Result<()> {
    let bytes = encode(model, train)?;
    crate::report::write_atomic(path, &bytes)
}

pub fn load(path: &Path) -> Result<(SignalingModel, TrainConfig)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

//! Binary network checkpoints.
//!
//! Layout (little-endian): magic `SITHQNET`, format version `u32`, activation
//! tag `u8`, layer count `u32`, layer sizes as `u64`, then per layer the
//! weights, biases, weight accumulators and bias accumulators as `f32`, and a
//! trailing SHA-256 of everything before it.

use std::path::Path;

use ndarray::{Array1, Array2};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::qnet::{Activation, Dense, QNetwork};

const MAGIC: &[u8; 8] = b"SITHQNET";
pub const CHECKPOINT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;
// Refuse layer sizes that could not fit in memory rather than attempt the allocation.
const MAX_LAYER_WIDTH: u64 = 1 << 20;

pub fn encode_checkpoint(net: &QNetwork<f32>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.push(match net.activation() {
        Activation::Relu => 0,
    });
    let sizes = net.layer_sizes();
    out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
    for s in &sizes {
        out.extend_from_slice(&(*s as u64).to_le_bytes());
    }
    for layer in net.layers() {
        let (acc_w, acc_b) = layer.accumulators();
        let values = layer.weights.iter().chain(&layer.bias).chain(acc_w).chain(acc_b);
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated checkpoint".into()))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<QNetwork<f32>> {
    if bytes.len() < MAGIC.len() + DIGEST_LEN || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Checkpoint("not a network checkpoint".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Checkpoint("checksum mismatch".into()));
    }
    let mut r = Reader {
        bytes: body,
        pos: MAGIC.len(),
    };
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }
    let activation = r.take(1)?[0];
    if activation != 0 {
        return Err(Error::Checkpoint(format!("unknown activation tag {activation}")));
    }
    let n_sizes = r.u32()? as usize;
    if n_sizes < 2 {
        return Err(Error::Checkpoint("fewer than two layer sizes".into()));
    }
    let mut sizes = Vec::with_capacity(n_sizes.min(64));
    for _ in 0..n_sizes {
        let s = r.u64()?;
        if s == 0 || s > MAX_LAYER_WIDTH {
            return Err(Error::Checkpoint(format!("implausible layer size {s}")));
        }
        sizes.push(s as usize);
    }
    let mut layers = Vec::with_capacity(n_sizes - 1);
    for w in sizes.windows(2) {
        let (n_in, n_out) = (w[0], w[1]);
        let weights = Array2::from_shape_vec((n_in, n_out), r.f32s(n_in * n_out)?).expect("shape");
        let bias = Array1::from_vec(r.f32s(n_out)?);
        let acc_weights = Array2::from_shape_vec((n_in, n_out), r.f32s(n_in * n_out)?).expect("shape");
        let acc_bias = Array1::from_vec(r.f32s(n_out)?);
        layers.push(Dense {
            weights,
            bias,
            acc_weights,
            acc_bias,
        });
    }
    if r.pos != body.len() {
        return Err(Error::Checkpoint("trailing bytes after last layer".into()));
    }
    QNetwork::from_layers(layers)
}

pub fn save_checkpoint(net: &QNetwork<f32>, path: &Path) -> Result<()> {
    std::fs::write(path, encode_checkpoint(net))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<QNetwork<f32>> {
    decode_checkpoint(&std::fs::read(path)?)
}

//! `EPCKPT1` checkpoints: magic, u32 length and JSON network config, a shape
//! table (u32 layer count, then per layer u32 name length, name, u64
//! outputs, u64 inputs), u64 parameter count and the parameters as f64.
//! Integers and floats are little-endian.

use std::path::Path;

use super::{NetConfig, Network};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 7] = b"EPCKPT1";

pub fn checkpoint_bytes(net: &Network) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 8 * net.num_params());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    let cfg = serde_json::to_vec(&net.config).expect("config serializes");
    out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    out.extend_from_slice(&cfg);
    let layers = net.layers();
    out.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    for l in layers {
        out.extend_from_slice(&(l.name.len() as u32).to_le_bytes());
        out.extend_from_slice(l.name.as_bytes());
        out.extend_from_slice(&(l.outputs as u64).to_le_bytes());
        out.extend_from_slice(&(l.inputs as u64).to_le_bytes());
    }
    out.extend_from_slice(&(net.num_params() as u64).to_le_bytes());
    for p in &net.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let s = self
            .bytes
            .get(self.at..self.at + n)
            .ok_or_else(|| format!("truncated checkpoint at byte {}", self.at))?;
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<usize, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> std::result::Result<usize, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()) as usize)
    }
}

pub fn network_from_bytes(bytes: &[u8]) -> std::result::Result<Network, String> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(7)? != CHECKPOINT_MAGIC {
        return Err("missing EPCKPT1 header".into());
    }
    let len = r.u32()?;
    let config: NetConfig = serde_json::from_slice(r.take(len)?).map_err(|e| format!("bad config: {e}"))?;
    let count = r.u32()?;
    let mut shapes = Vec::with_capacity(count);
    for _ in 0..count {
        let n = r.u32()?;
        let name = String::from_utf8(r.take(n)?.to_vec()).map_err(|_| "layer name is not UTF-8")?;
        shapes.push((name, r.u64()?, r.u64()?));
    }
    let n = r.u64()?;
    let params: Vec<f64> = r
        .take(8 * n)?
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if r.at != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.at));
    }
    let net = Network::from_params(config, params).map_err(|e| e.to_string())?;
    let expected: Vec<(String, usize, usize)> =
        net.layers().iter().map(|l| (l.name.clone(), l.outputs, l.inputs)).collect();
    if expected != shapes {
        return Err("shape table does not match the stored config".into());
    }
    Ok(net)
}

pub fn save_checkpoint(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, checkpoint_bytes(net)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    network_from_bytes(&bytes).map_err(|m| Error::format(path, m))
}

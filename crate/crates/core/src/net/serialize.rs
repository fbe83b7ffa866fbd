//! Binary model container.
//!
//! ```text
//! offset  size        field
//! 0       4           magic "INSG"
//! 4       4           version (u32) = 1
//! 8       4           input channels (u32)
//! 12      4           module count (u32) = 3
//! 16      3 × 7 × 4   per-module filter counts (u32): c_1x1, c_3x3_reduce,
//!                     c_3x3, c_5x5_reduce, c_5x5, c_pool_proj, c_avg
//! 100     4 × P       parameters (f32): for each kernel in pathway order
//!                     (a, b-reduce, b, c-reduce, c, d, e per module, then the
//!                     final projection) its weights then its biases
//! ```
//!
//! All integers and floats are little-endian.

use std::path::Path;

use super::{count_params, InceptionConfig, Network, INPUT_CHANNELS, MODULE_COUNT};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"INSG";
pub const MODEL_VERSION: u32 = 1;
const HEADER_LEN: usize = 16 + MODULE_COUNT * 7 * 4;

impl Network {
    pub fn to_bytes(&self) -> Vec<u8> {
        let params = self.params();
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * params.len());
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.input_channels as u32).to_le_bytes());
        out.extend_from_slice(&(self.modules.len() as u32).to_le_bytes());
        for cfg in self.configs() {
            for count in cfg.as_array() {
                out.extend_from_slice(&(count as u32).to_le_bytes());
            }
        }
        for p in params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Truncated { expected: HEADER_LEN, found: bytes.len() });
        }
        if &bytes[0..4] != MODEL_MAGIC {
            return Err(Error::Format("bad model magic, expected INSG".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let version = word(4);
        if version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported model version {version}")));
        }
        if word(8) as usize != INPUT_CHANNELS {
            return Err(Error::Format(format!("model has {} input channels", word(8))));
        }
        if word(12) as usize != MODULE_COUNT {
            return Err(Error::Format(format!("model has {} modules", word(12))));
        }
        let mut configs = [InceptionConfig::MINIMAL; MODULE_COUNT];
        for (m, cfg) in configs.iter_mut().enumerate() {
            let mut counts = [0usize; 7];
            for (j, c) in counts.iter_mut().enumerate() {
                *c = word(16 + (m * 7 + j) * 4) as usize;
            }
            *cfg = InceptionConfig::from_array(counts);
        }
        let mut net = Network::zeros(&configs).map_err(|e| Error::Format(e.to_string()))?;
        let expected = HEADER_LEN + 4 * count_params(&net);
        if bytes.len() < expected {
            return Err(Error::Truncated { expected, found: bytes.len() });
        }
        if bytes.len() > expected {
            return Err(Error::Format(format!(
                "{} trailing bytes after model parameters",
                bytes.len() - expected
            )));
        }
        let params: Vec<f32> = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        net.set_params(&params)?;
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

//! Binary model container.
//!
//! Layout (all integers little-endian):
//!
//! | field | type |
//! |---|---|
//! | magic `GSNSNET\0` | 8 bytes |
//! | format version (1) | u32 |
//! | input channels, height, width | 3 × u32 |
//! | training seed | u64 |
//! | epochs trained | u32 |
//! | layer count (4) | u32 |
//! | per layer: kind (1 = conv 3×3, 2 = dense), inputs, outputs | 3 × u32 |
//! | per layer: weight count, bias count | 2 × u64 |
//! | payload: per layer, weights then biases | f64 LE |
//!
//! Conv weights are ordered `[out][in][ky][kx]`, dense weights `[out][in]`.

use std::path::Path;

use super::net::Network;
use super::train::ModelParams;
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"GSNSNET\0";
pub const FORMAT_VERSION: u32 = 1;
const KIND_CONV: u32 = 1;
const KIND_DENSE: u32 = 2;

impl ModelParams {
    pub fn to_bytes(&self) -> Vec<u8> {
        let net = &self.network;
        let mut out = Vec::with_capacity(64 + 8 * net.param_count());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        for d in [net.input.0, net.input.1, net.input.2] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.epochs.to_le_bytes());
        out.extend_from_slice(&4u32.to_le_bytes());
        for (kind, inputs, outputs) in layer_table(net) {
            for v in [kind, inputs as u32, outputs as u32] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let slices = net.slices();
        for pair in slices.chunks(2) {
            out.extend_from_slice(&(pair[0].len() as u64).to_le_bytes());
            out.extend_from_slice(&(pair[1].len() as u64).to_le_bytes());
        }
        for s in slices {
            for v in s {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |msg: String| Error::Decode {
            path: path.to_path_buf(),
            message: msg,
        };
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8).map_err(&bad)? != MAGIC {
            return Err(bad("not a model file (bad magic)".into()));
        }
        let version = r.u32().map_err(&bad)?;
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {version}")));
        }
        let (c, h, w) = (
            r.u32().map_err(&bad)?,
            r.u32().map_err(&bad)?,
            r.u32().map_err(&bad)?,
        );
        let seed = r.u64().map_err(&bad)?;
        let epochs = r.u32().map_err(&bad)?;
        let mut net =
            Network::zeros(c as usize, h as usize, w as usize).map_err(|e| bad(e.to_string()))?;
        let layers = r.u32().map_err(&bad)?;
        if layers != 4 {
            return Err(bad(format!("expected 4 layers, found {layers}")));
        }
        for (i, expected) in layer_table(&net).into_iter().enumerate() {
            let got = (
                r.u32().map_err(&bad)?,
                r.u32().map_err(&bad)? as usize,
                r.u32().map_err(&bad)? as usize,
            );
            if got != expected {
                return Err(bad(format!(
                    "layer {i} is {got:?}, expected {expected:?} for this input size"
                )));
            }
        }
        let lens: Vec<usize> = net.slices().iter().map(|s| s.len()).collect();
        for (i, &len) in lens.iter().enumerate() {
            let got = r.u64().map_err(&bad)? as usize;
            if got != len {
                return Err(bad(format!(
                    "parameter block {i} holds {got} values, expected {len}"
                )));
            }
        }
        for s in net.slices_mut() {
            for v in s.iter_mut() {
                *v = f64::from_le_bytes(r.take(8).map_err(&bad)?.try_into().expect("8 bytes"));
            }
        }
        if r.pos != bytes.len() {
            return Err(bad(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        if !net.is_finite() {
            return Err(bad("non-finite weights".into()));
        }
        Ok(ModelParams {
            network: net,
            seed,
            epochs,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

fn layer_table(net: &Network) -> [(u32, usize, usize); 4] {
    [
        (KIND_CONV, net.conv1.in_channels, net.conv1.out_channels),
        (KIND_CONV, net.conv2.in_channels, net.conv2.out_channels),
        (KIND_DENSE, net.fc1.inputs, net.fc1.outputs),
        (KIND_DENSE, net.fc2.inputs, net.fc2.outputs),
    ]
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(format!("truncated at byte {}", self.bytes.len()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> ModelParams {
        ModelParams {
            network: Network::init(3, 16, 12, 4).unwrap(),
            seed: 4,
            epochs: 7,
        }
    }

    #[test]
    fn round_trip() {
        let m = model();
        let bytes = m.to_bytes();
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(
            bytes.len(),
            8 + 4 + 12 + 8 + 4 + 4 + 4 * 12 + 8 * 8 + 8 * m.network.param_count()
        );
        assert_eq!(ModelParams::from_bytes(&bytes, Path::new("m")).unwrap(), m);
    }

    #[test]
    fn corruption_detected() {
        let bytes = model().to_bytes();
        let p = Path::new("m.bin");
        assert!(ModelParams::from_bytes(&bytes[..bytes.len() - 1], p).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            ModelParams::from_bytes(&bad, p),
            Err(Error::Decode { .. })
        ));
        let mut nan = bytes.clone();
        let n = nan.len();
        nan[n - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(ModelParams::from_bytes(&nan, p).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(ModelParams::from_bytes(&extra, p).is_err());
    }
}

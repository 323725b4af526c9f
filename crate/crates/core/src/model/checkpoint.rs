//! Binary checkpoint layout:
//!
//! ```text
//! b"CPIBCKPT" | u32 LE version | u32 LE header length | header JSON | payload
//! ```
//!
//! The header holds the model spec, the payload float type and the name and
//! shape of every parameter. The payload is every parameter's data as raw
//! little-endian floats, in header order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autograd::Tensor;
use crate::scalar::Scalar;

use super::params::{ParamInfo, Params};
use super::{Model, ModelError, ModelSpec};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CPIBCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    spec: ModelSpec,
    dtype: String,
    params: Vec<ParamInfo>,
}

impl<T: Scalar> Model<T> {
    pub fn to_bytes(&self) -> Result<Vec<u8>, ModelError> {
        let header = Header {
            spec: self.spec().clone(),
            dtype: T::DTYPE.to_string(),
            params: self.params().info().to_vec(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        let payload = self.params().count() * T::BYTES;
        let mut out = Vec::with_capacity(16 + json.len() + payload);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for t in self.params().values() {
            for &v in t.data() {
                v.write_le(&mut out);
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let mut r = bytes;
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|_| ModelError::Checkpoint("file shorter than the magic bytes".into()))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(ModelError::Checkpoint("bad magic bytes".into()));
        }
        let version = read_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(ModelError::CheckpointVersion {
                found: version,
                supported: CHECKPOINT_VERSION,
            });
        }
        let len = read_u32(&mut r)? as usize;
        if r.len() < len {
            return Err(ModelError::Checkpoint("truncated header".into()));
        }
        let header: Header = serde_json::from_slice(&r[..len])
            .map_err(|e| ModelError::Checkpoint(format!("header: {e}")))?;
        r = &r[len..];
        let width = match header.dtype.as_str() {
            "f32" => 4,
            "f64" => 8,
            other => return Err(ModelError::Checkpoint(format!("unknown dtype {other}"))),
        };
        let total: usize = header.params.iter().map(|p| p.shape.iter().product::<usize>()).sum();
        if r.len() != total * width {
            return Err(ModelError::Checkpoint(format!(
                "payload has {} bytes, header describes {}",
                r.len(),
                total * width
            )));
        }
        let mut params = Params::<T>::default();
        for info in &header.params {
            let n: usize = info.shape.iter().product();
            let (chunk, rest) = r.split_at(n * width);
            r = rest;
            let data: Vec<T> = chunk
                .chunks_exact(width)
                .map(|c| {
                    if width == 4 {
                        T::of(f32::read_le(c) as f64)
                    } else {
                        T::of(f64::read_le(c))
                    }
                })
                .collect();
            params.push(info.name.clone(), Tensor::new(info.shape.clone(), data)?);
        }
        Model::from_params(header.spec, params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let bytes = self.to_bytes()?;
        let mut f = fs::File::create(path)?;
        f.write_all(&bytes)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn read_u32(r: &mut &[u8]) -> Result<u32, ModelError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| ModelError::Checkpoint("truncated preamble".into()))?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Variant;

    fn spec() -> ModelSpec {
        ModelSpec {
            k: 4,
            encoder_hidden: vec![5],
            decoder_hidden: vec![3],
            input_dim: 6,
            num_classes: 3,
            ..ModelSpec::new(Variant::CpibCompound)
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let m = Model::<f32>::new(spec(), 3).unwrap();
        let back = Model::<f32>::from_bytes(&m.to_bytes().unwrap()).unwrap();
        assert_eq!(back.params(), m.params());
        assert_eq!(back.spec(), m.spec());
        let wide = Model::<f64>::from_bytes(&m.to_bytes().unwrap()).unwrap();
        assert_eq!(wide.params().values()[0].data()[0], m.params().values()[0].data()[0] as f64);
    }

    #[test]
    fn rejects_corruption() {
        let m = Model::<f32>::new(spec(), 3).unwrap();
        let bytes = m.to_bytes().unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Model::<f32>::from_bytes(&bad), Err(ModelError::Checkpoint(_))));
        let mut v2 = bytes.clone();
        v2[8..12].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(
            Model::<f32>::from_bytes(&v2),
            Err(ModelError::CheckpointVersion { found: 2, supported: 1 })
        ));
        assert!(Model::<f32>::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }
}

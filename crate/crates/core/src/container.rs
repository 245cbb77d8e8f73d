//! The `FQS1` binary container.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic   46 51 53 31 ("FQS1")
//! kind    u8            0 = tensor, 1 = trajectory
//!
//! tensor:      u32 H, u32 W, u32 C, then H*W*C f32 values, channel-outermost
//! trajectory:  u32 T, u32 H, u32 W, u32 C, u32 metadata_len,
//!              metadata_len bytes of UTF-8 JSON (object of string -> string),
//!              T records of:
//!                u32 step_index, f64 timestep, u8 presence
//!                (bit0 x_t, bit1 eps_cond, bit2 eps_uncond),
//!                then the present tensors' raw f32 payloads in bit order
//! ```
//!
//! A trajectory with no tensors at all stores `H = W = C = 0`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{LatentTensor, Shape, Trajectory, TrajectoryRecord};

pub const MAGIC: [u8; 4] = *b"FQS1";
pub const KIND_TENSOR: u8 = 0;
pub const KIND_TRAJECTORY: u8 = 1;

/// magic + kind + H, W, C
pub const TENSOR_HEADER_LEN: usize = 4 + 1 + 3 * 4;
/// magic + kind + T, H, W, C, metadata_len (metadata bytes follow)
pub const TRAJECTORY_HEADER_LEN: usize = 4 + 1 + 5 * 4;
/// step_index + timestep + presence
pub const RECORD_HEADER_LEN: usize = 4 + 8 + 1;

const PRESENT_X: u8 = 1 << 0;
const PRESENT_COND: u8 = 1 << 1;
const PRESENT_UNCOND: u8 = 1 << 2;

#[derive(Debug, Clone, PartialEq)]
pub enum Container {
    Tensor(LatentTensor),
    Trajectory(Trajectory),
}

impl Container {
    fn kind_name(&self) -> &'static str {
        match self {
            Container::Tensor(_) => "tensor",
            Container::Trajectory(_) => "trajectory",
        }
    }

    pub fn into_tensor(self) -> Result<LatentTensor> {
        match self {
            Container::Tensor(t) => Ok(t),
            other => Err(Error::WrongKind {
                expected: "tensor",
                found: other.kind_name(),
            }),
        }
    }

    pub fn into_trajectory(self) -> Result<Trajectory> {
        match self {
            Container::Trajectory(t) => Ok(t),
            other => Err(Error::WrongKind {
                expected: "trajectory",
                found: other.kind_name(),
            }),
        }
    }
}

impl From<LatentTensor> for Container {
    fn from(t: LatentTensor) -> Self {
        Container::Tensor(t)
    }
}

impl From<Trajectory> for Container {
    fn from(t: Trajectory) -> Self {
        Container::Trajectory(t)
    }
}

fn dim_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::DimensionOverflow)
}

fn put_payload(out: &mut Vec<u8>, tensor: &LatentTensor) -> Result<()> {
    for (index, &v) in tensor.data().iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { index });
        }
        let narrow = v as f32;
        if !narrow.is_finite() {
            return Err(Error::F32Overflow { index });
        }
        out.extend_from_slice(&narrow.to_le_bytes());
    }
    Ok(())
}

fn put_shape(out: &mut Vec<u8>, shape: Shape) -> Result<()> {
    for d in [shape.height, shape.width, shape.channels] {
        out.extend_from_slice(&dim_u32(d)?.to_le_bytes());
    }
    Ok(())
}

/// Serializes a tensor or trajectory to bytes.
pub fn encode(value: &Container) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    match value {
        Container::Tensor(t) => {
            out.reserve(TENSOR_HEADER_LEN + 4 * t.shape().len());
            out.push(KIND_TENSOR);
            put_shape(&mut out, t.shape())?;
            put_payload(&mut out, t)?;
        }
        Container::Trajectory(traj) => {
            out.push(KIND_TRAJECTORY);
            out.extend_from_slice(&dim_u32(traj.len())?.to_le_bytes());
            put_shape(&mut out, traj.shape().unwrap_or(Shape::new(0, 0, 0)))?;
            let meta = serde_json::to_vec(&traj.metadata).map_err(|e| Error::BadMetadata(e.to_string()))?;
            out.extend_from_slice(&dim_u32(meta.len())?.to_le_bytes());
            out.extend_from_slice(&meta);
            for rec in traj.records() {
                out.extend_from_slice(&dim_u32(rec.step_index)?.to_le_bytes());
                out.extend_from_slice(&rec.timestep.to_le_bytes());
                let mut presence = 0u8;
                for (bit, slot) in [
                    (PRESENT_X, &rec.x_t),
                    (PRESENT_COND, &rec.eps_cond),
                    (PRESENT_UNCOND, &rec.eps_uncond),
                ] {
                    if slot.is_some() {
                        presence |= bit;
                    }
                }
                out.push(presence);
                for t in rec.tensors() {
                    put_payload(&mut out, t)?;
                }
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
        let end = self.pos.checked_add(n).ok_or(Error::DimensionOverflow)?;
        let slice = self.bytes.get(self.pos..end).ok_or(Error::TruncatedPayload)?;
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn payload(&mut self, shape: Shape) -> Result<LatentTensor> {
        let raw = self.take(shape.len() * 4)?;
        let mut data = Vec::with_capacity(shape.len());
        for (index, chunk) in raw.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::NonFinite { index });
            }
            data.push(v as f64);
        }
        Ok(LatentTensor::from_parts(shape, data))
    }
}

fn read_shape(cur: &mut Cursor<'_>) -> Result<Shape> {
    let h = cur.u32()? as usize;
    let w = cur.u32()? as usize;
    let c = cur.u32()? as usize;
    Ok(Shape::new(h, w, c))
}

/// Bytes needed for one tensor payload, with overflow checking.
fn payload_bytes(shape: Shape) -> Result<u64> {
    (shape.height as u64)
        .checked_mul(shape.width as u64)
        .and_then(|n| n.checked_mul(shape.channels as u64))
        .and_then(|n| n.checked_mul(4))
        .ok_or(Error::DimensionOverflow)
}

/// Parses a container, rejecting anything malformed.
pub fn decode(bytes: &[u8]) -> Result<Container> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4).map_err(|_| Error::BadMagic)?;
    if magic[..3] != MAGIC[..3] {
        return Err(Error::BadMagic);
    }
    if magic[3] != MAGIC[3] {
        return Err(Error::VersionMismatch(magic[3]));
    }
    let value = match cur.u8()? {
        KIND_TENSOR => {
            let shape = read_shape(&mut cur)?;
            if shape.height == 0 || shape.width == 0 || shape.channels == 0 {
                return Err(Error::ZeroDimension(shape));
            }
            let need = payload_bytes(shape)?;
            if need > cur.remaining() as u64 {
                return Err(Error::TruncatedPayload);
            }
            Container::Tensor(cur.payload(shape)?)
        }
        KIND_TRAJECTORY => Container::Trajectory(decode_trajectory(&mut cur)?),
        other => return Err(Error::UnknownKind(other)),
    };
    if cur.remaining() != 0 {
        return Err(Error::TrailingBytes(cur.remaining()));
    }
    Ok(value)
}

fn decode_trajectory(cur: &mut Cursor<'_>) -> Result<Trajectory> {
    let count = cur.u32()? as usize;
    let shape = read_shape(cur)?;
    let meta_len = cur.u32()? as usize;
    let meta_bytes = cur.take(meta_len)?;
    let metadata: BTreeMap<String, String> = if meta_bytes.is_empty() {
        BTreeMap::new()
    } else {
        let text = std::str::from_utf8(meta_bytes).map_err(|e| Error::BadMetadata(e.to_string()))?;
        serde_json::from_str(text).map_err(|e| Error::BadMetadata(e.to_string()))?
    };

    let zero_dims = shape.height == 0 || shape.width == 0 || shape.channels == 0;
    let tensor_bytes = payload_bytes(shape)?;
    // Every record needs at least its header; refuse absurd counts before allocating.
    if (count as u64).saturating_mul(RECORD_HEADER_LEN as u64) > cur.remaining() as u64 {
        return Err(Error::TruncatedPayload);
    }

    let mut records = Vec::with_capacity(count);
    for expected in 0..count {
        let step_index = cur.u32()? as usize;
        if step_index != expected {
            return Err(Error::StepOrder {
                expected,
                found: step_index,
            });
        }
        let timestep = cur.f64()?;
        if !timestep.is_finite() {
            return Err(Error::NonFinite { index: expected });
        }
        let presence = cur.u8()?;
        if presence & !(PRESENT_X | PRESENT_COND | PRESENT_UNCOND) != 0 {
            return Err(Error::InvalidPresence(presence));
        }
        if presence != 0 && zero_dims {
            return Err(Error::ZeroDimension(shape));
        }
        let present = presence.count_ones() as u64;
        if present * tensor_bytes > cur.remaining() as u64 {
            return Err(Error::TruncatedPayload);
        }
        let mut slot = |bit: u8| -> Result<Option<LatentTensor>> {
            if presence & bit != 0 {
                cur.payload(shape).map(Some)
            } else {
                Ok(None)
            }
        };
        let x_t = slot(PRESENT_X)?;
        let eps_cond = slot(PRESENT_COND)?;
        let eps_uncond = slot(PRESENT_UNCOND)?;
        records.push(TrajectoryRecord {
            step_index,
            timestep,
            x_t,
            eps_cond,
            eps_uncond,
        });
    }
    Trajectory::new(records, metadata)
}

/// Writes `value` to `destination` atomically (temp file in the same
/// directory, then rename). Returns the number of bytes written.
pub fn write_container(value: impl Into<Container>, destination: impl AsRef<Path>) -> Result<usize> {
    let bytes = encode(&value.into())?;
    write_atomic(destination.as_ref(), &bytes)?;
    Ok(bytes.len())
}

pub fn read_container(source: impl AsRef<Path>) -> Result<Container> {
    let path = source.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn read_tensor(source: impl AsRef<Path>) -> Result<LatentTensor> {
    read_container(source)?.into_tensor()
}

pub fn read_trajectory(source: impl AsRef<Path>) -> Result<Trajectory> {
    read_container(source)?.into_trajectory()
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut builder = tempfile::Builder::new();
    // Temp files default to owner-only; outputs should look like plain writes.
    #[cfg(unix)]
    builder.permissions(std::os::unix::fs::PermissionsExt::from_mode(0o644));
    let mut tmp = builder.tempfile_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor(h: usize, w: usize, c: usize, data: Vec<f64>) -> LatentTensor {
        LatentTensor::new(Shape::new(h, w, c), data).unwrap()
    }

    #[test]
    fn minimal_tensor_layout() {
        let bytes = encode(&tensor(1, 1, 1, vec![0.0]).into()).unwrap();
        assert_eq!(
            bytes,
            [0x46, 0x51, 0x53, 0x31, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0]
        );
        assert_eq!(bytes.len(), TENSOR_HEADER_LEN + 4);
        let back = decode(&bytes).unwrap().into_tensor().unwrap();
        assert_eq!(back.data(), &[0.0]);
    }

    #[test]
    fn small_tensor_round_trips() {
        let t = tensor(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]);
        let back = decode(&encode(&t.clone().into()).unwrap()).unwrap();
        assert_eq!(back, Container::Tensor(t));
    }

    #[test]
    fn trajectory_size_matches_layout() {
        let shape = Shape::new(16, 16, 4);
        let records = (0..50)
            .map(|i| TrajectoryRecord {
                step_index: i,
                timestep: 999.0 - i as f64,
                x_t: Some(LatentTensor::filled(shape, 0.5)),
                eps_cond: Some(LatentTensor::filled(shape, 1.0)),
                eps_uncond: Some(LatentTensor::filled(shape, -1.0)),
            })
            .collect();
        let traj = Trajectory::new(records, BTreeMap::new()).unwrap();
        let bytes = encode(&traj.into()).unwrap();
        // 25-byte header + "{}" metadata + 50 * (13 + 3 * 4096)
        assert_eq!(bytes.len(), 25 + 2 + 50 * (13 + 3 * 16 * 16 * 4 * 4));
        assert_eq!(bytes.len(), 615_077);
    }

    #[test]
    fn refuses_values_that_do_not_fit_f32() {
        let t = tensor(1, 1, 1, vec![1e300]);
        assert!(matches!(encode(&t.into()), Err(Error::F32Overflow { index: 0 })));
    }

    #[test]
    fn malformed_inputs_get_designated_errors() {
        let good = encode(&tensor(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]).into()).unwrap();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert_eq!(decode(&bad).unwrap_err().to_string(), "bad magic");
        assert!(matches!(decode(b"FQ"), Err(Error::BadMagic)));

        let mut v2 = good.clone();
        v2[3] = b'2';
        assert!(matches!(decode(&v2), Err(Error::VersionMismatch(b'2'))));

        let cut = &good[..good.len() - 3];
        assert_eq!(decode(cut).unwrap_err().to_string(), "truncated payload");
        assert!(matches!(decode(&good[..9]), Err(Error::TruncatedPayload)));

        let mut nan = good.clone();
        nan[TENSOR_HEADER_LEN + 4..TENSOR_HEADER_LEN + 8].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode(&nan), Err(Error::NonFinite { index: 1 })));

        let mut huge = good.clone();
        for i in 0..3 {
            huge[5 + 4 * i..9 + 4 * i].copy_from_slice(&u32::MAX.to_le_bytes());
        }
        assert!(matches!(decode(&huge), Err(Error::DimensionOverflow)));

        let mut kind = good.clone();
        kind[4] = 7;
        assert!(matches!(decode(&kind), Err(Error::UnknownKind(7))));

        let mut trailing = good.clone();
        trailing.push(0);
        assert!(matches!(decode(&trailing), Err(Error::TrailingBytes(1))));
    }
}

//! Dataset container: `CSMD0001` magic, little-endian `u32` header length,
//! UTF-8 JSON header, then the raw little-endian payload.
//!
//! Complex values are stored as interleaved `f32` pairs (`"c64"`), flow
//! fields as `f32` and masks as `u8`. Loading re-validates every invariant of
//! the decoded type.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::types::{
    CoilMaps, FlowField, ImageSequence, KSpaceData, SamplingMask, MAX_DIM, SOS_STORAGE_TOLERANCE,
};

pub const MAGIC: &[u8; 8] = b"CSMD0001";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dtype {
    #[serde(rename = "c64")]
    C64,
    #[serde(rename = "f32")]
    F32,
    #[serde(rename = "u8")]
    U8,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::C64 => 8,
            Dtype::F32 => 4,
            Dtype::U8 => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub kind: String,
    pub dtype: Dtype,
    pub shape: Vec<u64>,
    #[serde(default)]
    pub extras: Map<String, Value>,
}

/// Anything that can be stored in a container file.
#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Image(ImageSequence),
    KSpace(KSpaceData),
    Mask(SamplingMask),
    Flow(FlowField),
    Coils(CoilMaps),
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Image(_) => "image",
            Payload::KSpace(_) => "kspace",
            Payload::Mask(_) => "mask",
            Payload::Flow(_) => "flow",
            Payload::Coils(_) => "coils",
        }
    }
}

pub fn save_dataset(path: impl AsRef<Path>, payload: &Payload) -> Result<()> {
    save_dataset_with_extras(path, payload, Map::new())
}

/// Saves `payload`, merging caller-supplied metadata into the header extras.
pub fn save_dataset_with_extras(
    path: impl AsRef<Path>,
    payload: &Payload,
    extras: Map<String, Value>,
) -> Result<()> {
    let bytes = encode(payload, extras)?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Payload> {
    Ok(load_dataset_with_header(path)?.0)
}

pub fn load_dataset_with_header(path: impl AsRef<Path>) -> Result<(Payload, Header)> {
    let bytes = fs::read(path)?;
    decode(&bytes)
}

fn mask_extras(mask: &SamplingMask) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("seed".into(), Value::from(mask.seed()));
    m.insert(
        "accel_requested".into(),
        Value::from(mask.accel_requested()),
    );
    m.insert(
        "center_lines".into(),
        Value::from(mask.center_lines() as u64),
    );
    m
}

fn pack_bits(bits: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        out[i / 8] |= (b & 1) << (i % 8);
    }
    out
}

fn unpack_bits(bytes: &[u8], n: usize) -> Result<Vec<u8>> {
    if bytes.len() != n.div_ceil(8) {
        return Err(Error::Format(format!(
            "packed mask holds {} bytes, expected {}",
            bytes.len(),
            n.div_ceil(8)
        )));
    }
    Ok((0..n).map(|i| (bytes[i / 8] >> (i % 8)) & 1).collect())
}

fn push_c64(out: &mut Vec<u8>, data: &[Complex64]) {
    out.reserve(data.len() * 8);
    for z in data {
        out.extend_from_slice(&(z.re as f32).to_le_bytes());
        out.extend_from_slice(&(z.im as f32).to_le_bytes());
    }
}

fn read_c64(raw: &[u8]) -> Vec<Complex64> {
    raw.chunks_exact(8)
        .map(|b| {
            let re = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
            let im = f32::from_le_bytes([b[4], b[5], b[6], b[7]]);
            Complex64::new(re as f64, im as f64)
        })
        .collect()
}

fn read_f32(raw: &[u8]) -> Vec<f64> {
    raw.chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect()
}

/// Serialises a payload into container bytes.
pub fn encode(payload: &Payload, mut extras: Map<String, Value>) -> Result<Vec<u8>> {
    let (dtype, shape, raw): (Dtype, Vec<usize>, Vec<u8>) = match payload {
        Payload::Image(u) => {
            let mut raw = Vec::new();
            push_c64(&mut raw, u.data());
            (Dtype::C64, vec![u.frames(), u.height(), u.width()], raw)
        }
        Payload::KSpace(y) => {
            let mut raw = Vec::new();
            push_c64(&mut raw, y.data());
            extras.insert("noise_sigma".into(), Value::from(y.noise_sigma()));
            let mut m = mask_extras(y.mask());
            m.insert(
                "bits".into(),
                Value::from(BASE64.encode(pack_bits(y.mask().data()))),
            );
            extras.insert("mask".into(), Value::Object(m));
            (
                Dtype::C64,
                vec![y.frames(), y.coils(), y.height(), y.width()],
                raw,
            )
        }
        Payload::Mask(m) => {
            extras.extend(mask_extras(m));
            (
                Dtype::U8,
                vec![m.frames(), m.height(), m.width()],
                m.data().to_vec(),
            )
        }
        Payload::Flow(v) => {
            let raw = v
                .data()
                .iter()
                .flat_map(|&x| (x as f32).to_le_bytes())
                .collect();
            (Dtype::F32, vec![v.pairs(), v.height(), v.width(), 2], raw)
        }
        Payload::Coils(c) => {
            let mut raw = Vec::new();
            push_c64(&mut raw, c.data());
            (Dtype::C64, vec![c.coils(), c.height(), c.width()], raw)
        }
    };
    if shape.iter().any(|&d| d > MAX_DIM) {
        return Err(Error::Dimension(format!("shape {shape:?} exceeds 2^31-1")));
    }
    let header = Header {
        kind: payload.kind().to_string(),
        dtype,
        shape: shape.iter().map(|&d| d as u64).collect(),
        extras,
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
    let json_len =
        u32::try_from(json.len()).map_err(|_| Error::Format("header longer than 4 GiB".into()))?;
    let mut out = Vec::with_capacity(12 + json.len() + raw.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&json_len.to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&raw);
    Ok(out)
}

fn extra_f64(extras: &Map<String, Value>, key: &str) -> Result<f64> {
    extras
        .get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::Format(format!("header extras missing numeric `{key}`")))
}

fn extra_u64(extras: &Map<String, Value>, key: &str) -> Result<u64> {
    extras
        .get(key)
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Format(format!("header extras missing integer `{key}`")))
}

fn expect_shape(header: &Header, dtype: Dtype, rank: usize) -> Result<Vec<usize>> {
    if header.dtype != dtype {
        return Err(Error::Format(format!(
            "kind `{}` requires dtype {:?}, found {:?}",
            header.kind, dtype, header.dtype
        )));
    }
    if header.shape.len() != rank {
        return Err(Error::Format(format!(
            "kind `{}` requires rank {rank}, found shape {:?}",
            header.kind, header.shape
        )));
    }
    header
        .shape
        .iter()
        .map(|&d| {
            usize::try_from(d)
                .ok()
                .filter(|&d| d <= MAX_DIM)
                .ok_or_else(|| Error::Dimension(format!("dimension {d} exceeds 2^31-1")))
        })
        .collect()
}

fn mask_from_extras(
    m: &Map<String, Value>,
    frames: usize,
    height: usize,
    width: usize,
    data: Vec<u8>,
) -> Result<SamplingMask> {
    SamplingMask::new(
        frames,
        height,
        width,
        data,
        extra_f64(m, "accel_requested")?,
        extra_u64(m, "seed")?,
        extra_u64(m, "center_lines")? as usize,
    )
}

/// Parses container bytes, re-validating the decoded payload.
pub fn decode(bytes: &[u8]) -> Result<(Payload, Header)> {
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(Error::Format("missing CSMD0001 magic".into()));
    }
    let json_len = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize;
    let json = bytes
        .get(12..12 + json_len)
        .ok_or_else(|| Error::Format("header length exceeds file size".into()))?;
    let header: Header =
        serde_json::from_slice(json).map_err(|e| Error::Format(format!("header JSON: {e}")))?;
    let raw = &bytes[12 + json_len..];

    let count = header
        .shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(usize::try_from(d).ok()?))
        .ok_or_else(|| Error::Dimension("shape product overflows".into()))?;
    let expected = count
        .checked_mul(header.dtype.size())
        .ok_or_else(|| Error::Dimension("payload size overflows".into()))?;
    if raw.len() != expected {
        return Err(Error::SizeMismatch {
            expected,
            actual: raw.len(),
        });
    }

    let payload = match header.kind.as_str() {
        "image" => {
            let s = expect_shape(&header, Dtype::C64, 3)?;
            Payload::Image(ImageSequence::new(s[0], s[1], s[2], read_c64(raw))?)
        }
        "kspace" => {
            let s = expect_shape(&header, Dtype::C64, 4)?;
            let m = header
                .extras
                .get("mask")
                .and_then(Value::as_object)
                .ok_or_else(|| Error::Format("k-space header lacks `mask`".into()))?;
            let bits = m
                .get("bits")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::Format("k-space mask lacks `bits`".into()))?;
            let packed = BASE64
                .decode(bits)
                .map_err(|e| Error::Format(format!("mask bits: {e}")))?;
            let mdata = unpack_bits(&packed, s[0] * s[2] * s[3])?;
            let mask = mask_from_extras(m, s[0], s[2], s[3], mdata)?;
            let sigma = extra_f64(&header.extras, "noise_sigma")?;
            Payload::KSpace(KSpaceData::new(s[1], read_c64(raw), mask, sigma)?)
        }
        "mask" => {
            let s = expect_shape(&header, Dtype::U8, 3)?;
            Payload::Mask(mask_from_extras(
                &header.extras,
                s[0],
                s[1],
                s[2],
                raw.to_vec(),
            )?)
        }
        "flow" => {
            let s = expect_shape(&header, Dtype::F32, 4)?;
            if s[3] != 2 {
                return Err(Error::Format("flow fields have 2 components".into()));
            }
            Payload::Flow(FlowField::new(s[0], s[1], s[2], read_f32(raw))?)
        }
        "coils" => {
            let s = expect_shape(&header, Dtype::C64, 3)?;
            Payload::Coils(CoilMaps::with_tolerance(
                s[0],
                s[1],
                s[2],
                read_c64(raw),
                SOS_STORAGE_TOLERANCE,
            )?)
        }
        other => return Err(Error::Format(format!("unknown kind `{other}`"))),
    };
    Ok((payload, header))
}

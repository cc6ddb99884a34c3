//! On-disk formats.
//!
//! Weight matrix (`WMAT`):
//!
//! ```text
//! "WMAT" | version u8 = 1 | rows u32 | cols u32 | rows*cols f32, row-major
//! ```
//!
//! Container (`WTLS`):
//!
//! ```text
//! "WTLS" | version u8 = 1 | layer_count u16
//! per layer:
//!   name_len u16 | name (UTF-8) | rows u32 | cols u32 | k u16 | t u8
//!   | shard_count u8 | seed_base u64 | codec u8 | k * f32 centroids
//!   per shard: n u32 | m u32 | retries u8 | payload_len u32 | payload
//! CRC-32 (IEEE) of everything above, u32
//! ```
//!
//! All integers are little-endian.

use super::EncodedLayer;
use crate::bloomier::BloomierFilter;
use crate::entropy::{pack_cells_coded, pack_cells_raw, unpack_cells_coded, unpack_cells_raw};
use crate::simplify::{ClusterModel, WeightMatrix};
use crate::{Error, Result};

const WMAT_MAGIC: &[u8; 4] = b"WMAT";
const WTLS_MAGIC: &[u8; 4] = b"WTLS";
const VERSION: u8 = 1;

/// rows, cols, k, t, shard_count, seed_base, codec.
pub(crate) const LAYER_FIXED_BYTES: usize = 4 + 4 + 2 + 1 + 1 + 8 + 1;
/// n, m, retries, payload length.
pub(crate) const SHARD_FIXED_BYTES: usize = 13;
/// Magic, version, layer count and CRC.
pub const EMPTY_CONTAINER_LEN: usize = 4 + 1 + 2 + 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Codec {
    /// Cells packed at `t` bits each.
    Raw = 0,
    /// Cells range coded.
    Arithmetic = 1,
}

impl TryFrom<u8> for Codec {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Codec::Raw),
            1 => Ok(Codec::Arithmetic),
            _ => Err(Error::CorruptFile(format!("unknown codec {v}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerRecord {
    pub layer: EncodedLayer,
    pub codec: Codec,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::CorruptFile(msg.into())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| bad("file truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        self.array().map(u16::from_le_bytes)
    }

    fn u32(&mut self) -> Result<u32> {
        self.array().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64> {
        self.array().map(u64::from_le_bytes)
    }

    fn f32(&mut self) -> Result<f32> {
        self.array().map(f32::from_le_bytes)
    }
}

fn check_magic(r: &mut Reader<'_>, magic: &[u8; 4]) -> Result<()> {
    if r.take(4)? != magic {
        return Err(bad(format!("missing {} magic", String::from_utf8_lossy(magic))));
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    Ok(())
}

fn u32_field(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::input(format!("{what} {v} does not fit in 32 bits")))
}

pub fn write_wmat(w: &WeightMatrix) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(13 + 4 * w.len());
    out.extend_from_slice(WMAT_MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&u32_field(w.rows(), "row count")?.to_le_bytes());
    out.extend_from_slice(&u32_field(w.cols(), "column count")?.to_le_bytes());
    for &v in w.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn read_wmat(bytes: &[u8]) -> Result<WeightMatrix> {
    let mut r = Reader { bytes, pos: 0 };
    check_magic(&mut r, WMAT_MAGIC)?;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let count = rows.checked_mul(cols).ok_or_else(|| bad("matrix shape overflows"))?;
    if bytes.len() - r.pos != count.saturating_mul(4) {
        return Err(bad(format!(
            "{rows}x{cols} matrix needs {} value bytes, found {}",
            count.saturating_mul(4),
            bytes.len() - r.pos
        )));
    }
    let values = (0..count).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
    WeightMatrix::new(rows, cols, values)
}

/// One matrix row per line, values separated by commas; blank lines are skipped.
pub fn parse_csv(text: &str) -> Result<WeightMatrix> {
    let mut values = Vec::new();
    let mut rows = 0usize;
    let mut cols = None;
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = values.len();
        for field in line.split(',') {
            let v: f32 = field
                .trim()
                .parse()
                .map_err(|_| Error::input(format!("line {}: cannot parse {:?}", line_no + 1, field.trim())))?;
            values.push(v);
        }
        let width = values.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(Error::ShapeMismatch(format!(
                    "line {} has {width} values, expected {c}",
                    line_no + 1
                )))
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::input("CSV contains no rows"))?;
    WeightMatrix::new(rows, cols, values)
}

pub fn pack(layers: &[LayerRecord]) -> Result<Vec<u8>> {
    let count = u16::try_from(layers.len()).map_err(|_| Error::input("more than 65535 layers"))?;
    let mut out = Vec::new();
    out.extend_from_slice(WTLS_MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&count.to_le_bytes());
    for rec in layers {
        let l = &rec.layer;
        let name = l.name().as_bytes();
        let name_len = u16::try_from(name.len()).map_err(|_| Error::input("layer name longer than 65535 bytes"))?;
        let k = u16::try_from(l.k()).map_err(|_| Error::input("k does not fit in 16 bits"))?;
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(name);
        out.extend_from_slice(&u32_field(l.rows(), "row count")?.to_le_bytes());
        out.extend_from_slice(&u32_field(l.cols(), "column count")?.to_le_bytes());
        out.extend_from_slice(&k.to_le_bytes());
        out.push(l.t() as u8);
        out.push(u8::try_from(l.shards().len()).map_err(|_| Error::input("more than 255 shards"))?);
        out.extend_from_slice(&l.seed_base().to_le_bytes());
        out.push(rec.codec as u8);
        for &c in l.model().centroids() {
            out.extend_from_slice(&c.to_le_bytes());
        }
        for (i, s) in l.shards().iter().enumerate() {
            let payload = match rec.codec {
                Codec::Raw => pack_cells_raw(s.cells(), s.t())?,
                Codec::Arithmetic => pack_cells_coded(s.cells(), s.t())?,
            };
            out.extend_from_slice(&u32_field(s.n(), "key count")?.to_le_bytes());
            out.extend_from_slice(&u32_field(s.m(), "cell count")?.to_le_bytes());
            out.push(l.shard_retries(i));
            out.extend_from_slice(&u32_field(payload.len(), "payload length")?.to_le_bytes());
            out.extend_from_slice(&payload);
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

pub fn unpack(bytes: &[u8]) -> Result<Vec<LayerRecord>> {
    if bytes.len() < EMPTY_CONTAINER_LEN {
        return Err(bad("file shorter than the container header"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("four bytes"));
    if crc32fast::hash(body) != stored {
        return Err(bad("CRC mismatch"));
    }
    let mut r = Reader { bytes: body, pos: 0 };
    check_magic(&mut r, WTLS_MAGIC)?;
    let count = r.u16()?;
    let mut layers = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let name_len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| bad("layer name is not UTF-8"))?
            .to_owned();
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let k = r.u16()? as u32;
        let t = r.u8()? as u32;
        let shard_count = r.u8()? as usize;
        let seed_base = r.u64()?;
        let codec = Codec::try_from(r.u8()?)?;
        let centroids = (0..k).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
        let model = ClusterModel::new(centroids).map_err(|e| bad(e.to_string()))?;
        let mut shards = Vec::with_capacity(shard_count);
        for i in 0..shard_count {
            let n = r.u32()? as usize;
            let m = r.u32()? as usize;
            let retries = r.u8()?;
            let len = r.u32()? as usize;
            let payload = r.take(len)?;
            let cells = match codec {
                Codec::Raw => unpack_cells_raw(payload, t, m),
                Codec::Arithmetic => unpack_cells_coded(payload, t, m),
            }
            .map_err(|e| bad(format!("shard {i}: {e}")))?;
            let seed = seed_base.wrapping_add(i as u64).wrapping_add(retries as u64);
            shards.push(BloomierFilter::from_parts(n, k, t, seed, cells).map_err(|e| bad(format!("shard {i}: {e}")))?);
        }
        let layer = EncodedLayer::from_parts(name, rows, cols, seed_base, shards, model).map_err(|e| bad(e.to_string()))?;
        layers.push(LayerRecord { layer, codec });
    }
    if r.pos != body.len() {
        return Err(bad(format!("{} trailing bytes before the CRC", body.len() - r.pos)));
    }
    Ok(layers)
}

use crate::{Error, Result};

/// Occurrence counts over an alphabet `[0, alphabet_size)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolHistogram {
    counts: Vec<u64>,
    total: u64,
}

impl SymbolHistogram {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::input("histogram alphabet is empty"));
        }
        let total = counts
            .iter()
            .try_fold(0u64, |acc, &c| acc.checked_add(c))
            .ok_or_else(|| Error::input("histogram total overflows"))?;
        if total == 0 {
            return Err(Error::input("histogram has no occurrences"));
        }
        Ok(Self { counts, total })
    }

    /// Counts `symbols` over `[0, alphabet_size)`.
    pub fn from_symbols(symbols: &[u32], alphabet_size: usize) -> Result<Self> {
        let mut counts = vec![0u64; alphabet_size];
        for &s in symbols {
            let slot = counts
                .get_mut(s as usize)
                .ok_or_else(|| Error::input(format!("symbol {s} outside alphabet of {alphabet_size}")))?;
            *slot += 1;
        }
        Self::new(counts)
    }

    pub fn alphabet_size(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, symbol: u32) -> u64 {
        self.counts.get(symbol as usize).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Serialized form: alphabet size as u16 LE, then each count as a LEB128 varint.
    pub fn to_header(&self) -> Result<Vec<u8>> {
        let size = u16::try_from(self.counts.len())
            .map_err(|_| Error::input(format!("alphabet of {} symbols exceeds u16", self.counts.len())))?;
        let mut out = Vec::with_capacity(2 + self.counts.len());
        out.extend_from_slice(&size.to_le_bytes());
        for &c in &self.counts {
            write_varint(&mut out, c);
        }
        Ok(out)
    }

    /// Parses a header written by [`to_header`](Self::to_header); returns the histogram and bytes consumed.
    pub fn from_header(bytes: &[u8]) -> Result<(Self, usize)> {
        if bytes.len() < 2 {
            return Err(Error::corrupt("histogram header truncated"));
        }
        let size = u16::from_le_bytes([bytes[0], bytes[1]]) as usize;
        let mut pos = 2;
        let mut counts = Vec::with_capacity(size);
        for _ in 0..size {
            counts.push(read_varint(bytes, &mut pos)?);
        }
        let hist = Self::new(counts).map_err(|e| Error::corrupt(e.to_string()))?;
        Ok((hist, pos))
    }
}

/// Shannon information of the histogram's own distribution, in bits:
/// `sum_s count_s * -log2(count_s / total)`.
pub fn entropy_bits(hist: &SymbolHistogram) -> f64 {
    let total = hist.total as f64;
    hist.counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| c as f64 * (total / c as f64).log2())
        .sum()
}

pub(crate) fn write_varint(out: &mut Vec<u8>, mut v: u64) {
    while v >= 0x80 {
        out.push((v as u8 & 0x7f) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

pub(crate) fn read_varint(bytes: &[u8], pos: &mut usize) -> Result<u64> {
    let mut value = 0u64;
    for shift in (0..64).step_by(7) {
        let byte = *bytes.get(*pos).ok_or_else(|| Error::corrupt("varint truncated"))?;
        *pos += 1;
        value |= ((byte & 0x7f) as u64) << shift;
        if byte & 0x80 == 0 {
            return Ok(value);
        }
    }
    Err(Error::corrupt("varint longer than 64 bits"))
}

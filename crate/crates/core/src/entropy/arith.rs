//! Static-model range coder with carry propagation.
//!
//! The state is a 56-bit window: `range` is renormalized byte-wise whenever
//! it drops below 2^48 and `low` carries one extra bit above the window.
//! Model totals are capped at 2^34, so every symbol interval is at least
//! 2^14 units wide and the integer-division loss stays below 1e-4 bits per
//! symbol. Streams end with a full flush of the window (7 bytes), which lets
//! the decoder reject any truncated stream.

use super::{Bitstream, SymbolHistogram};
use crate::{Error, Result};

const WINDOW_BITS: u32 = 56;
const WINDOW_MASK: u64 = (1 << WINDOW_BITS) - 1;
const BOTTOM: u64 = 1 << (WINDOW_BITS - 8);
const SHIFT: u32 = WINDOW_BITS - 8;
const STATE_BYTES: usize = (WINDOW_BITS / 8) as usize;

/// Largest model total the coder accepts.
pub const MAX_TOTAL: u64 = 1 << 34;
/// Histograms above this total are rescaled before coding.
const HISTOGRAM_SCALE_TARGET: u64 = 1 << 32;

/// A static frequency model over `[0, alphabet)`.
pub trait FrequencyModel {
    fn total(&self) -> u64;
    /// `(cumulative, frequency)` for a symbol, or `None` if it cannot be coded.
    fn interval(&self, symbol: u32) -> Option<(u64, u64)>;
    /// The symbol whose interval contains `target < total()`.
    fn locate(&self, target: u64) -> (u32, u64, u64);
}

/// Cumulative table built from a histogram.
#[derive(Debug, Clone)]
pub struct CumulativeModel {
    cum: Vec<u64>,
}

impl CumulativeModel {
    pub fn new(hist: &SymbolHistogram) -> Self {
        let counts = hist.counts();
        let scale = hist.total() > HISTOGRAM_SCALE_TARGET;
        let mut cum = Vec::with_capacity(counts.len() + 1);
        let mut acc = 0u64;
        cum.push(0);
        for &c in counts {
            let f = if scale && c > 0 {
                ((c as u128 * HISTOGRAM_SCALE_TARGET as u128 / hist.total() as u128) as u64).max(1)
            } else {
                c
            };
            acc += f;
            cum.push(acc);
        }
        Self { cum }
    }
}

impl FrequencyModel for CumulativeModel {
    fn total(&self) -> u64 {
        *self.cum.last().expect("nonempty")
    }

    fn interval(&self, symbol: u32) -> Option<(u64, u64)> {
        let s = symbol as usize;
        if s + 1 >= self.cum.len() {
            return None;
        }
        let (lo, hi) = (self.cum[s], self.cum[s + 1]);
        (hi > lo).then_some((lo, hi - lo))
    }

    fn locate(&self, target: u64) -> (u32, u64, u64) {
        let s = self.cum[1..].partition_point(|&c| c <= target);
        (s as u32, self.cum[s], self.cum[s + 1] - self.cum[s])
    }
}

/// A point mass at symbol 0 plus a flat distribution over `[1, alphabet)`.
///
/// Matches filter tables, whose unassigned cells are zero and whose
/// assigned cells are uniform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpikeModel {
    alphabet: u64,
    zero_freq: u64,
    other_freq: u64,
}

impl SpikeModel {
    /// Model for `len` symbols over `2^bits` values of which `zeros` are 0.
    pub fn for_table(bits: u32, len: u64, zeros: u64) -> Result<Self> {
        if !(1..=32).contains(&bits) {
            return Err(Error::param(format!("cell width must be in 1..=32 bits, got {bits}")));
        }
        if zeros > len {
            return Err(Error::input(format!("{zeros} zero cells in a table of {len}")));
        }
        let alphabet = 1u64 << bits;
        let others = alphabet - 1;
        let other_freq = (HISTOGRAM_SCALE_TARGET / 2 / alphabet).max(1);
        let rest = others * other_freq;
        let nonzero = len - zeros;
        let ideal = if nonzero == 0 {
            MAX_TOTAL - rest
        } else {
            ((zeros as u128 * rest as u128 + nonzero as u128 / 2) / nonzero as u128) as u64
        };
        Ok(Self {
            alphabet,
            zero_freq: ideal.clamp(1, MAX_TOTAL - rest),
            other_freq,
        })
    }
}

impl FrequencyModel for SpikeModel {
    fn total(&self) -> u64 {
        self.zero_freq + (self.alphabet - 1) * self.other_freq
    }

    fn interval(&self, symbol: u32) -> Option<(u64, u64)> {
        let s = symbol as u64;
        match s {
            0 => Some((0, self.zero_freq)),
            _ if s < self.alphabet => Some((self.zero_freq + (s - 1) * self.other_freq, self.other_freq)),
            _ => None,
        }
    }

    fn locate(&self, target: u64) -> (u32, u64, u64) {
        if target < self.zero_freq {
            return (0, 0, self.zero_freq);
        }
        let s = 1 + (target - self.zero_freq) / self.other_freq;
        (s as u32, self.zero_freq + (s - 1) * self.other_freq, self.other_freq)
    }
}

struct Encoder {
    low: u64,
    range: u64,
    cache: u8,
    pending: u64,
    skip_first: bool,
    out: Vec<u8>,
}

impl Encoder {
    fn new() -> Self {
        Self {
            low: 0,
            range: WINDOW_MASK,
            cache: 0,
            pending: 1,
            skip_first: true,
            out: Vec::new(),
        }
    }

    fn encode(&mut self, cum: u64, freq: u64, total: u64) {
        let r = self.range / total;
        self.low += r * cum;
        self.range = r * freq;
        while self.range < BOTTOM {
            self.range <<= 8;
            self.shift_low();
        }
    }

    fn shift_low(&mut self) {
        if (self.low & WINDOW_MASK) < (0xFF << SHIFT) || self.low > WINDOW_MASK {
            let carry = (self.low >> WINDOW_BITS) as u8;
            let mut byte = self.cache;
            loop {
                // the very first byte is always zero and is not written
                if !std::mem::take(&mut self.skip_first) {
                    self.out.push(byte.wrapping_add(carry));
                }
                byte = 0xFF;
                self.pending -= 1;
                if self.pending == 0 {
                    break;
                }
            }
            self.cache = ((self.low >> SHIFT) & 0xFF) as u8;
        }
        self.pending += 1;
        self.low = (self.low & (BOTTOM - 1)) << 8;
    }

    fn finish(mut self) -> Vec<u8> {
        for _ in 0..=STATE_BYTES {
            self.shift_low();
        }
        self.out
    }
}

struct Decoder<'a> {
    bytes: &'a [u8],
    pos: usize,
    code: u64,
    range: u64,
}

impl<'a> Decoder<'a> {
    fn new(bytes: &'a [u8]) -> Result<Self> {
        let mut dec = Self {
            bytes,
            pos: 0,
            code: 0,
            range: WINDOW_MASK,
        };
        for _ in 0..STATE_BYTES {
            dec.code = (dec.code << 8) | dec.next_byte()? as u64;
        }
        Ok(dec)
    }

    fn next_byte(&mut self) -> Result<u8> {
        let b = *self
            .bytes
            .get(self.pos)
            .ok_or_else(|| Error::corrupt("range-coded stream ended early"))?;
        self.pos += 1;
        Ok(b)
    }

    fn decode<M: FrequencyModel>(&mut self, model: &M) -> Result<u32> {
        let total = model.total();
        let r = self.range / total;
        let target = self.code / r;
        if target >= total {
            return Err(Error::corrupt("range-coded value outside the model"));
        }
        let (symbol, cum, freq) = model.locate(target);
        self.code -= r * cum;
        self.range = r * freq;
        while self.range < BOTTOM {
            self.code = (self.code << 8) | self.next_byte()? as u64;
            self.range <<= 8;
        }
        Ok(symbol)
    }
}

fn check_total(total: u64) -> Result<()> {
    if total == 0 || total > MAX_TOTAL {
        return Err(Error::input(format!("model total {total} outside 1..=2^34")));
    }
    Ok(())
}

/// Range codes `symbols` under `model`. An empty sequence encodes to no bytes.
pub fn encode_with<M: FrequencyModel>(symbols: &[u32], model: &M) -> Result<Vec<u8>> {
    if symbols.is_empty() {
        return Ok(Vec::new());
    }
    let total = model.total();
    check_total(total)?;
    let mut enc = Encoder::new();
    for &s in symbols {
        let (cum, freq) = model
            .interval(s)
            .ok_or_else(|| Error::input(format!("symbol {s} has no probability under the model")))?;
        enc.encode(cum, freq, total);
    }
    Ok(enc.finish())
}

/// Decodes `count` symbols written by [`encode_with`] under the same model.
pub fn decode_with<M: FrequencyModel>(bytes: &[u8], model: &M, count: usize) -> Result<Vec<u32>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    check_total(model.total())?;
    let mut dec = Decoder::new(bytes)?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(dec.decode(model)?);
    }
    if dec.pos != bytes.len() {
        return Err(Error::corrupt(format!(
            "{} trailing bytes after range-coded stream",
            bytes.len() - dec.pos
        )));
    }
    Ok(out)
}

/// Range codes `symbols` with probabilities taken from `hist`.
///
/// Every symbol must lie inside the alphabet and have a nonzero count. The
/// output is at most the histogram's entropy plus 56 bits of flush.
pub fn arithmetic_encode(symbols: &[u32], hist: &SymbolHistogram) -> Result<Bitstream> {
    if let Some(&s) = symbols.iter().find(|&&s| s as usize >= hist.alphabet_size()) {
        return Err(Error::input(format!(
            "symbol {s} outside alphabet of {}",
            hist.alphabet_size()
        )));
    }
    encode_with(symbols, &CumulativeModel::new(hist)).map(Bitstream::from_bytes)
}

pub fn arithmetic_decode(stream: &Bitstream, hist: &SymbolHistogram, count: usize) -> Result<Vec<u32>> {
    decode_with(stream.as_bytes(), &CumulativeModel::new(hist), count)
}

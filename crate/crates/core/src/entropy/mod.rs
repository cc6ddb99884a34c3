//! Entropy coders and the cell-table codecs built on them.

mod arith;
mod bitstream;
mod histogram;
mod huffman;

pub use arith::{
    arithmetic_decode, arithmetic_encode, decode_with, encode_with, CumulativeModel, FrequencyModel,
    SpikeModel, MAX_TOTAL,
};
pub use bitstream::{BitReader, Bitstream};
pub use histogram::{entropy_bits, SymbolHistogram};
pub use huffman::{huffman_code, huffman_decode, huffman_encode, HuffmanCode};

pub(crate) use histogram::{read_varint, write_varint};

use crate::{Error, Result};

const TAG_HISTOGRAM: u8 = 0;
const TAG_SPIKE: u8 = 1;

fn check_width(t: u32) -> Result<()> {
    if !(1..=32).contains(&t) {
        return Err(Error::param(format!("cell width must be in 1..=32 bits, got {t}")));
    }
    Ok(())
}

/// Packs `t`-bit cells back to back, least significant bit first.
pub fn pack_cells_raw(cells: &[u32], t: u32) -> Result<Vec<u8>> {
    check_width(t)?;
    let mut bs = Bitstream::new();
    for &c in cells {
        if t < 32 && c >> t != 0 {
            return Err(Error::input(format!("cell value {c} does not fit in {t} bits")));
        }
        bs.push_bits(c as u64, t);
    }
    Ok(bs.into_bytes())
}

pub fn unpack_cells_raw(bytes: &[u8], t: u32, m: usize) -> Result<Vec<u32>> {
    check_width(t)?;
    let bits = m as u64 * t as u64;
    if bytes.len() as u64 != bits.div_ceil(8) {
        return Err(Error::corrupt(format!(
            "{m} cells of {t} bits need {} bytes, got {}",
            bits.div_ceil(8),
            bytes.len()
        )));
    }
    let bs = Bitstream::from_raw(bytes.to_vec(), bits)?;
    let mut reader = bs.reader();
    (0..m).map(|_| reader.read_bits(t).map(|v| v as u32)).collect()
}

/// Arithmetic codes a table of `t`-bit cells.
///
/// Two static models are tried and the smaller result kept. Tag 0 stores the
/// full histogram over `2^t` symbols (only for `t <= 15`); tag 1 stores just
/// the number of zero cells and models the rest as uniform.
pub fn pack_cells_coded(cells: &[u32], t: u32) -> Result<Vec<u8>> {
    check_width(t)?;
    if t < 32 {
        if let Some(&c) = cells.iter().find(|&&c| c >> t != 0) {
            return Err(Error::input(format!("cell value {c} does not fit in {t} bits")));
        }
    }
    if cells.is_empty() {
        return Ok(vec![TAG_SPIKE, 0]);
    }
    let zeros = cells.iter().filter(|&&c| c == 0).count() as u64;
    let spike = SpikeModel::for_table(t, cells.len() as u64, zeros)?;
    let mut best = vec![TAG_SPIKE];
    write_varint(&mut best, zeros);
    best.extend(encode_with(cells, &spike)?);

    if t <= 15 {
        let hist = SymbolHistogram::from_symbols(cells, 1 << t)?;
        let mut explicit = vec![TAG_HISTOGRAM];
        explicit.extend(hist.to_header()?);
        if explicit.len() < best.len() {
            explicit.extend(encode_with(cells, &CumulativeModel::new(&hist))?);
            if explicit.len() <= best.len() {
                best = explicit;
            }
        }
    }
    Ok(best)
}

/// Inverse of [`pack_cells_coded`] for a table of `m` cells.
pub fn unpack_cells_coded(bytes: &[u8], t: u32, m: usize) -> Result<Vec<u32>> {
    check_width(t)?;
    let (&tag, rest) = bytes
        .split_first()
        .ok_or_else(|| Error::corrupt("coded cell table is empty"))?;
    match tag {
        TAG_SPIKE => {
            let mut pos = 0;
            let zeros = read_varint(rest, &mut pos)?;
            if zeros > m as u64 {
                return Err(Error::corrupt(format!("{zeros} zero cells in a table of {m}")));
            }
            if m == 0 {
                return if pos == rest.len() {
                    Ok(Vec::new())
                } else {
                    Err(Error::corrupt("trailing bytes after empty table"))
                };
            }
            let model = SpikeModel::for_table(t, m as u64, zeros)?;
            decode_with(&rest[pos..], &model, m)
        }
        TAG_HISTOGRAM => {
            let (hist, used) = SymbolHistogram::from_header(rest)?;
            if hist.alphabet_size() != 1usize << t.min(31) || t > 15 {
                return Err(Error::corrupt("histogram alphabet does not match the cell width"));
            }
            if hist.total() != m as u64 {
                return Err(Error::corrupt("histogram total does not match the cell count"));
            }
            decode_with(&rest[used..], &CumulativeModel::new(&hist), m)
        }
        other => Err(Error::corrupt(format!("unknown cell model tag {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table(m: usize, t: u32, fill: f64, seed: u64) -> Vec<u32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let max = if t == 32 { u32::MAX } else { (1 << t) - 1 };
        (0..m)
            .map(|_| if rng.random_bool(fill) { rng.random_range(1..=max) } else { 0 })
            .collect()
    }

    #[test]
    fn raw_round_trip() {
        for t in [1, 3, 8, 13, 32] {
            let cells = table(1001, t, 0.7, t as u64);
            let bytes = pack_cells_raw(&cells, t).unwrap();
            assert_eq!(bytes.len(), (1001 * t as usize).div_ceil(8));
            assert_eq!(unpack_cells_raw(&bytes, t, 1001).unwrap(), cells);
            assert!(unpack_cells_raw(&bytes[1..], t, 1001).is_err());
        }
        assert!(pack_cells_raw(&[4], 2).is_err());
    }

    #[test]
    fn coded_round_trip() {
        for (t, fill) in [(1, 0.5), (4, 0.8), (8, 0.8), (8, 0.0), (8, 1.0), (20, 0.8), (32, 0.8)] {
            let cells = table(3000, t, fill, 5);
            let bytes = pack_cells_coded(&cells, t).unwrap();
            assert_eq!(unpack_cells_coded(&bytes, t, cells.len()).unwrap(), cells, "t={t}");
        }
        let empty = pack_cells_coded(&[], 6).unwrap();
        assert_eq!(unpack_cells_coded(&empty, 6, 0).unwrap(), Vec::<u32>::new());
    }

    #[test]
    fn skewed_tables_use_the_histogram() {
        let cells: Vec<u32> = (0..5000).map(|i| [0, 0, 0, 1, 2][i % 5]).collect();
        assert_eq!(pack_cells_coded(&cells, 8).unwrap()[0], TAG_HISTOGRAM);
        let filter_like = table(5000, 8, 0.8, 1);
        assert_eq!(pack_cells_coded(&filter_like, 8).unwrap()[0], TAG_SPIKE);
    }

    #[test]
    fn coded_beats_raw_on_filter_tables() {
        // 80% of cells assigned, uniform in [1, 256)
        let cells = table(3650, 8, 0.8, 2);
        let raw = pack_cells_raw(&cells, 8).unwrap().len();
        let coded = pack_cells_coded(&cells, 8).unwrap().len();
        assert!(coded < raw, "{coded} vs {raw}");
    }

    #[test]
    fn corrupt_tables_rejected() {
        let cells = table(500, 8, 0.8, 3);
        let bytes = pack_cells_coded(&cells, 8).unwrap();
        assert!(unpack_cells_coded(&bytes[..bytes.len() - 1], 8, 500).is_err());
        assert!(unpack_cells_coded(&[9], 8, 500).is_err());
        assert!(unpack_cells_coded(&[], 8, 500).is_err());
    }
}

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{Bitstream, SymbolHistogram};
use crate::{Error, Result};

const MAX_CODE_LEN: u8 = 64;

/// A canonical prefix code; symbols with zero count have length 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanCode {
    lengths: Vec<u8>,
    codes: Vec<u64>,
}

/// Builds the canonical Huffman code for `hist`.
///
/// Merges always take the two lightest nodes, ties broken by node creation
/// order with leaves created in symbol order.
pub fn huffman_code(hist: &SymbolHistogram) -> Result<HuffmanCode> {
    let counts = hist.counts();
    let used: Vec<usize> = (0..counts.len()).filter(|&s| counts[s] > 0).collect();
    let mut lengths = vec![0u8; counts.len()];
    if used.len() == 1 {
        lengths[used[0]] = 1;
        return HuffmanCode::from_lengths(lengths);
    }

    let mut parent: Vec<usize> = vec![usize::MAX; used.len()];
    let mut heap: BinaryHeap<Reverse<(u128, usize)>> = used
        .iter()
        .enumerate()
        .map(|(id, &s)| Reverse((counts[s] as u128, id)))
        .collect();
    while heap.len() > 1 {
        let Reverse((wa, a)) = heap.pop().expect("two nodes");
        let Reverse((wb, b)) = heap.pop().expect("two nodes");
        let id = parent.len();
        parent.push(usize::MAX);
        parent[a] = id;
        parent[b] = id;
        heap.push(Reverse((wa + wb, id)));
    }
    // parents are created after their children, so a reverse walk sees each parent's depth first
    let mut depth = vec![0u32; parent.len()];
    for id in (0..parent.len()).rev() {
        if parent[id] != usize::MAX {
            depth[id] = depth[parent[id]] + 1;
        }
    }
    for (leaf, &s) in used.iter().enumerate() {
        if depth[leaf] > MAX_CODE_LEN as u32 {
            return Err(Error::input(format!("Huffman code length {} exceeds 64 bits", depth[leaf])));
        }
        lengths[s] = depth[leaf] as u8;
    }
    HuffmanCode::from_lengths(lengths)
}

impl HuffmanCode {
    /// Assigns canonical codes: shorter codes first, then by symbol.
    pub fn from_lengths(lengths: Vec<u8>) -> Result<Self> {
        if lengths.iter().all(|&l| l == 0) {
            return Err(Error::input("Huffman code has no symbols"));
        }
        if lengths.iter().any(|&l| l > MAX_CODE_LEN) {
            return Err(Error::input("Huffman code length exceeds 64 bits"));
        }
        let kraft: f64 = lengths.iter().filter(|&&l| l > 0).map(|&l| (-(l as f64)).exp2()).sum();
        if kraft > 1.0 + 1e-12 {
            return Err(Error::input("code lengths violate the Kraft inequality"));
        }
        let mut codes = vec![0u64; lengths.len()];
        let mut code = 0u64;
        let mut prev_len: Option<u8> = None;
        for (s, len) in canonical_order(&lengths) {
            if let Some(prev) = prev_len {
                code = (code + 1) << (len - prev);
            }
            codes[s] = code;
            prev_len = Some(len);
        }
        Ok(Self { lengths, codes })
    }

    pub fn alphabet_size(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[u8] {
        &self.lengths
    }

    pub fn code(&self, symbol: u32) -> Option<(u64, u8)> {
        let s = symbol as usize;
        match self.lengths.get(s) {
            Some(&l) if l > 0 => Some((self.codes[s], l)),
            _ => None,
        }
    }

    /// Bits needed to code every occurrence in `hist`.
    pub fn encoded_bits(&self, hist: &SymbolHistogram) -> u64 {
        hist.counts()
            .iter()
            .zip(&self.lengths)
            .map(|(&c, &l)| c * l as u64)
            .sum()
    }

    /// Table bytes: alphabet size as u16 LE, then one length byte per symbol.
    pub fn to_table_bytes(&self) -> Result<Vec<u8>> {
        let size = u16::try_from(self.lengths.len())
            .map_err(|_| Error::input(format!("alphabet of {} symbols exceeds u16", self.lengths.len())))?;
        let mut out = size.to_le_bytes().to_vec();
        out.extend_from_slice(&self.lengths);
        Ok(out)
    }

    pub fn from_table_bytes(bytes: &[u8]) -> Result<(Self, usize)> {
        if bytes.len() < 2 {
            return Err(Error::corrupt("Huffman table truncated"));
        }
        let size = u16::from_le_bytes([bytes[0], bytes[1]]) as usize;
        let lengths = bytes
            .get(2..2 + size)
            .ok_or_else(|| Error::corrupt("Huffman table truncated"))?
            .to_vec();
        let code = Self::from_lengths(lengths).map_err(|e| Error::corrupt(e.to_string()))?;
        Ok((code, 2 + size))
    }
}

fn canonical_order(lengths: &[u8]) -> Vec<(usize, u8)> {
    let mut order: Vec<(usize, u8)> = lengths
        .iter()
        .enumerate()
        .filter(|&(_, &l)| l > 0)
        .map(|(s, &l)| (s, l))
        .collect();
    order.sort_by_key(|&(s, l)| (l, s));
    order
}

/// Writes each symbol's code most significant bit first.
pub fn huffman_encode(symbols: &[u32], code: &HuffmanCode) -> Result<Bitstream> {
    let mut out = Bitstream::new();
    for &s in symbols {
        let (bits, len) = code
            .code(s)
            .ok_or_else(|| Error::input(format!("symbol {s} has no Huffman code")))?;
        for i in (0..len).rev() {
            out.push_bit((bits >> i) & 1 == 1);
        }
    }
    Ok(out)
}

pub fn huffman_decode(stream: &Bitstream, code: &HuffmanCode, count: usize) -> Result<Vec<u32>> {
    let order = canonical_order(&code.lengths);
    let max_len = order.last().map_or(0, |&(_, l)| l) as usize;
    // first code and first canonical rank for each length
    let mut first = vec![0u64; max_len + 1];
    let mut rank = vec![0usize; max_len + 1];
    let mut per_len = vec![0usize; max_len + 1];
    for &(_, l) in &order {
        per_len[l as usize] += 1;
    }
    let mut c = 0u64;
    let mut r = 0usize;
    for len in 1..=max_len {
        first[len] = c;
        rank[len] = r;
        c = (c + per_len[len] as u64) << 1;
        r += per_len[len];
    }

    let mut reader = stream.reader();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut value = 0u64;
        let mut len = 0usize;
        loop {
            value = (value << 1) | reader.read_bit()? as u64;
            len += 1;
            if len > max_len {
                return Err(Error::corrupt("invalid Huffman code in stream"));
            }
            if value >= first[len] && value - first[len] < per_len[len] as u64 {
                out.push(order[rank[len] + (value - first[len]) as usize].0 as u32);
                break;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::entropy_bits;
    use proptest::prelude::*;

    /// Minimum total cost over every length assignment satisfying Kraft.
    fn optimal_cost(counts: &[u64]) -> u64 {
        fn go(counts: &[u64], i: usize, kraft: f64, cost: u64, best: &mut u64) {
            if kraft > 1.0 + 1e-12 || cost >= *best {
                return;
            }
            if i == counts.len() {
                *best = cost;
                return;
            }
            for len in 1..=counts.len().max(2) as u32 {
                go(counts, i + 1, kraft + (-(len as f64)).exp2(), cost + counts[i] * len as u64, best);
            }
        }
        let used: Vec<u64> = counts.iter().copied().filter(|&c| c > 0).collect();
        if used.len() == 1 {
            return used[0];
        }
        let mut best = u64::MAX;
        go(&used, 0, 0.0, 0, &mut best);
        best
    }

    #[test]
    fn two_symbols() {
        let h = SymbolHistogram::new(vec![1, 1]).unwrap();
        assert_eq!(huffman_code(&h).unwrap().lengths(), &[1, 1]);
    }

    #[test]
    fn textbook_lengths() {
        let h = SymbolHistogram::new(vec![5, 2, 1, 1]).unwrap();
        let code = huffman_code(&h).unwrap();
        assert_eq!(code.lengths(), &[1, 2, 3, 3]);
        assert_eq!(code.encoded_bits(&h), 15);
        assert_eq!(optimal_cost(h.counts()), 15);
        assert_eq!(code.code(0), Some((0b0, 1)));
        assert_eq!(code.code(1), Some((0b10, 2)));
        assert_eq!(code.code(2), Some((0b110, 3)));
        assert_eq!(code.code(3), Some((0b111, 3)));
    }

    #[test]
    fn single_symbol_gets_one_bit() {
        let h = SymbolHistogram::new(vec![0, 0, 7]).unwrap();
        let code = huffman_code(&h).unwrap();
        assert_eq!(code.lengths(), &[0, 0, 1]);
        let bs = huffman_encode(&[2; 7], &code).unwrap();
        assert_eq!(bs.bit_len(), 7);
        assert_eq!(huffman_decode(&bs, &code, 7).unwrap(), vec![2; 7]);
    }

    #[test]
    fn table_bytes_reproducible() {
        let h = SymbolHistogram::new(vec![3, 0, 9, 1, 1, 4]).unwrap();
        let a = huffman_code(&h).unwrap().to_table_bytes().unwrap();
        let b = huffman_code(&h.clone()).unwrap().to_table_bytes().unwrap();
        assert_eq!(a, b);
        let (code, used) = HuffmanCode::from_table_bytes(&a).unwrap();
        assert_eq!(used, a.len());
        assert_eq!(code, huffman_code(&h).unwrap());
    }

    #[test]
    fn errors() {
        let h = SymbolHistogram::new(vec![1, 0]).unwrap();
        let code = huffman_code(&h).unwrap();
        assert!(matches!(huffman_encode(&[1], &code), Err(Error::InvalidInput(_))));
        assert!(HuffmanCode::from_lengths(vec![0, 0]).is_err());
        assert!(HuffmanCode::from_lengths(vec![1, 1, 1]).is_err());
        let bs = huffman_encode(&[0, 0], &code).unwrap();
        assert!(matches!(huffman_decode(&bs, &code, 3), Err(Error::CorruptData(_))));
    }

    proptest! {
        #[test]
        fn matches_exhaustive_oracle(counts in proptest::collection::vec(0u64..50, 2..6)) {
            prop_assume!(counts.iter().any(|&c| c > 0));
            let h = SymbolHistogram::new(counts.clone()).unwrap();
            let code = huffman_code(&h).unwrap();
            prop_assert_eq!(code.encoded_bits(&h), optimal_cost(&counts));
        }

        #[test]
        fn round_trip_and_bound(symbols in proptest::collection::vec(0u32..30, 1..3000)) {
            let h = SymbolHistogram::from_symbols(&symbols, 30).unwrap();
            let code = huffman_code(&h).unwrap();
            let bs = huffman_encode(&symbols, &code).unwrap();
            prop_assert_eq!(bs.bit_len(), code.encoded_bits(&h));
            prop_assert!(bs.bit_len() as f64 <= entropy_bits(&h) + symbols.len() as f64);
            prop_assert_eq!(huffman_decode(&bs, &code, symbols.len()).unwrap(), symbols);
        }
    }
}

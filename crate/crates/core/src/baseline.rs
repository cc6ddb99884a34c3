//! Compressed sparse row encoding with fixed-width relative column indices.
//!
//! Each retained weight becomes a record `(gap, label)` where `gap` is the
//! distance from the previous retained column in the row (the first gap is
//! measured from column -1). Gaps wider than the index field are bridged by
//! padding records `(2^index_bits - 1, k)`, which advance the column without
//! producing a weight.

use crate::entropy::{huffman_code, huffman_decode, huffman_encode, Bitstream, HuffmanCode, SymbolHistogram};
use crate::simplify::{ClusterModel, SimplifiedLayer};
use crate::{Error, Result};

pub const DEFAULT_INDEX_BITS: u32 = 4;
/// rows u32, cols u32, k u16, index_bits u8, label_bits u8.
pub const HEADER_BITS: u64 = 96;
pub const ROW_PTR_BITS: u64 = 32;
pub const CENTROID_BITS: u64 = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrLayer {
    rows: usize,
    cols: usize,
    index_bits: u32,
    label_bits: u32,
    payload: Bitstream,
    row_ptr: Vec<u32>,
    model: ClusterModel,
}

/// Bits needed to write the padding label `k`.
pub fn label_bits_for(k: u32) -> u32 {
    32 - k.leading_zeros()
}

pub fn csr_encode(layer: &SimplifiedLayer, index_bits: u32) -> Result<CsrLayer> {
    if !(1..=16).contains(&index_bits) {
        return Err(Error::param(format!("index_bits must be in 1..=16, got {index_bits}")));
    }
    let k = layer.k();
    let label_bits = label_bits_for(k);
    let max_gap = (1u64 << index_bits) - 1;
    let cols = layer.cols() as u64;
    let mut payload = Bitstream::new();
    let mut row_ptr = vec![0u32; layer.rows()];

    let mut records_in_row = 0u32;
    let mut row = 0usize;
    let mut prev: i64 = -1;
    for (&p, &label) in layer.positions().iter().zip(layer.labels()) {
        let r = (p / cols) as usize;
        let c = (p % cols) as i64;
        if r != row {
            row_ptr[row] = records_in_row;
            row = r;
            records_in_row = 0;
            prev = -1;
        }
        let mut gap = (c - prev) as u64;
        while gap > max_gap {
            payload.push_bits(max_gap, index_bits);
            payload.push_bits(k as u64, label_bits);
            records_in_row += 1;
            gap -= max_gap;
        }
        payload.push_bits(gap, index_bits);
        payload.push_bits(label as u64, label_bits);
        records_in_row += 1;
        prev = c;
    }
    if layer.rows() > 0 {
        row_ptr[row] = records_in_row;
    }
    Ok(CsrLayer {
        rows: layer.rows(),
        cols: layer.cols(),
        index_bits,
        label_bits,
        payload,
        row_ptr,
        model: layer.model().clone(),
    })
}

pub fn csr_decode(csr: &CsrLayer) -> Result<SimplifiedLayer> {
    let k = csr.k();
    let mut reader = csr.payload.reader();
    let mut positions = Vec::new();
    let mut labels = Vec::new();
    for (r, &count) in csr.row_ptr.iter().enumerate() {
        let mut col: i64 = -1;
        for _ in 0..count {
            let gap = reader.read_bits(csr.index_bits)? as i64;
            let label = reader.read_bits(csr.label_bits)? as u32;
            if gap == 0 {
                return Err(Error::corrupt(format!("zero gap in row {r}")));
            }
            col += gap;
            if col >= csr.cols as i64 {
                return Err(Error::corrupt(format!("record overruns row {r} of width {}", csr.cols)));
            }
            if label > k {
                return Err(Error::corrupt(format!("label {label} above padding symbol {k}")));
            }
            if label < k {
                positions.push(r as u64 * csr.cols as u64 + col as u64);
                labels.push(label);
            }
        }
    }
    if reader.remaining() != 0 {
        return Err(Error::corrupt(format!("{} unread payload bits", reader.remaining())));
    }
    SimplifiedLayer::new(csr.rows, csr.cols, positions, labels, csr.model.clone())
}

impl CsrLayer {
    /// Reassembles a layer from stored parts.
    pub fn from_parts(
        rows: usize,
        cols: usize,
        index_bits: u32,
        payload: Bitstream,
        row_ptr: Vec<u32>,
        model: ClusterModel,
    ) -> Result<Self> {
        if !(1..=16).contains(&index_bits) {
            return Err(Error::param(format!("index_bits must be in 1..=16, got {index_bits}")));
        }
        if row_ptr.len() != rows {
            return Err(Error::input(format!("{} row counts for {rows} rows", row_ptr.len())));
        }
        Ok(Self {
            rows,
            cols,
            index_bits,
            label_bits: label_bits_for(model.k()),
            payload,
            row_ptr,
            model,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn k(&self) -> u32 {
        self.model.k()
    }

    pub fn index_bits(&self) -> u32 {
        self.index_bits
    }

    pub fn label_bits(&self) -> u32 {
        self.label_bits
    }

    pub fn payload(&self) -> &Bitstream {
        &self.payload
    }

    pub fn row_ptr(&self) -> &[u32] {
        &self.row_ptr
    }

    pub fn model(&self) -> &ClusterModel {
        &self.model
    }

    pub fn record_count(&self) -> u64 {
        self.row_ptr.iter().map(|&c| c as u64).sum()
    }

    /// The `(gap, label)` records in payload order.
    pub fn records(&self) -> Result<Vec<(u32, u32)>> {
        let mut reader = self.payload.reader();
        (0..self.record_count())
            .map(|_| {
                let gap = reader.read_bits(self.index_bits)? as u32;
                let label = reader.read_bits(self.label_bits)? as u32;
                Ok((gap, label))
            })
            .collect()
    }

    /// Bits outside the record payload: header, row counts and centroids.
    pub fn overhead_bits(&self) -> u64 {
        HEADER_BITS + ROW_PTR_BITS * self.rows as u64 + CENTROID_BITS * self.k() as u64
    }
}

/// Payload + 32 bits per row + header + centroid table.
pub fn csr_size_bits(csr: &CsrLayer) -> u64 {
    csr.payload.bit_len() + csr.overhead_bits()
}

/// CSR records with the gap and label fields Huffman coded as two streams.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrHuffman {
    pub index_code: HuffmanCode,
    pub label_code: HuffmanCode,
    pub indices: Bitstream,
    pub labels: Bitstream,
    pub records: usize,
}

impl CsrHuffman {
    /// Coded streams, both code tables, and the plain CSR overhead.
    pub fn size_bits(&self, csr: &CsrLayer) -> Result<u64> {
        let tables = self.index_code.to_table_bytes()?.len() + self.label_code.to_table_bytes()?.len();
        Ok(self.indices.bit_len() + self.labels.bit_len() + 8 * tables as u64 + csr.overhead_bits())
    }

    pub fn decode_records(&self) -> Result<Vec<(u32, u32)>> {
        let gaps = huffman_decode(&self.indices, &self.index_code, self.records)?;
        let labels = huffman_decode(&self.labels, &self.label_code, self.records)?;
        Ok(gaps.into_iter().map(|g| g + 1).zip(labels).collect())
    }
}

pub fn csr_huffman(csr: &CsrLayer) -> Result<CsrHuffman> {
    let records = csr.records()?;
    // gaps are never zero, so `gap - 1` fits an alphabet of 2^index_bits - 1
    let gaps: Vec<u32> = records.iter().map(|r| r.0 - 1).collect();
    let labels: Vec<u32> = records.iter().map(|r| r.1).collect();
    // an empty stream still gets a valid one-symbol code
    let index_hist = if gaps.is_empty() {
        SymbolHistogram::new(vec![1])?
    } else {
        SymbolHistogram::from_symbols(&gaps, (1 << csr.index_bits) - 1)?
    };
    let label_hist = if labels.is_empty() {
        SymbolHistogram::new(vec![1])?
    } else {
        SymbolHistogram::from_symbols(&labels, csr.k() as usize + 1)?
    };
    let index_code = huffman_code(&index_hist)?;
    let label_code = huffman_code(&label_hist)?;
    Ok(CsrHuffman {
        indices: huffman_encode(&gaps, &index_code)?,
        labels: huffman_encode(&labels, &label_code)?,
        index_code,
        label_code,
        records: records.len(),
    })
}

pub fn csr_huffman_bits(csr: &CsrLayer) -> Result<u64> {
    csr_huffman(csr)?.size_bits(csr)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexBitsPoint {
    pub index_bits: u32,
    pub csr_bits: u64,
    pub csr_huffman_bits: u64,
}

/// CSR sizes for every index width in 1..=16.
pub fn sweep_index_bits(layer: &SimplifiedLayer) -> Result<Vec<IndexBitsPoint>> {
    (1..=16)
        .map(|b| {
            let csr = csr_encode(layer, b)?;
            Ok(IndexBitsPoint {
                index_bits: b,
                csr_bits: csr_size_bits(&csr),
                csr_huffman_bits: csr_huffman_bits(&csr)?,
            })
        })
        .collect()
}

/// The sweep point with the smallest Huffman-coded size (lowest width on ties).
pub fn best_index_bits(layer: &SimplifiedLayer) -> Result<IndexBitsPoint> {
    let sweep = sweep_index_bits(layer)?;
    Ok(*sweep
        .iter()
        .min_by_key(|p| (p.csr_huffman_bits, p.index_bits))
        .expect("sixteen points"))
}

use super::*;
use crate::baseline::csr_encode;
use crate::synth::random_layer;

fn kb(bits: u64) -> f64 {
    bits as f64 / 8.0 / 1024.0
}

#[test]
fn one_shard_is_identity() {
    let sets = shard_keys(&[1, 4, 9], &[0, 2, 1], 3, 1).unwrap();
    assert_eq!(sets.len(), 1);
    assert_eq!(sets[0].entries(), &[(1, 0), (4, 2), (9, 1)]);
}

#[test]
fn modular_split() {
    let keys: Vec<u64> = (0..10).collect();
    let labels = vec![0u32; 10];
    let sets = shard_keys(&keys, &labels, 1, 2).unwrap();
    assert_eq!(sets[0].keys().collect::<Vec<_>>(), vec![0, 2, 4, 6, 8]);
    assert_eq!(sets[1].keys().collect::<Vec<_>>(), vec![1, 3, 5, 7, 9]);
    assert!(shard_keys(&keys, &labels, 1, 0).is_err());
}

#[test]
fn encode_reconstruct_exact_on_positions() {
    let layer = random_layer(60, 50, 0.1, 6, 1).unwrap();
    let enc = encode_layer(&layer, &EncodeParams::new(5, 3).with_shards(3)).unwrap();
    assert_eq!(enc.nnz(), layer.nnz());
    let w = reconstruct(&enc);
    let dense = layer.to_dense();
    for &p in layer.positions() {
        assert_eq!(w.values()[p as usize], dense.values()[p as usize]);
    }
    // false positives are exactly the extra nonzeros
    let fp = count_false_positives(&enc, layer.positions(), 2);
    assert_eq!(fp as usize, w.count_nonzero() - layer.nnz());
}

#[test]
fn wide_cells_reconstruct_exactly() {
    let layer = random_layer(30, 20, 0.2, 5, 2).unwrap();
    let enc = encode_layer(&layer, &EncodeParams::new(24, 1)).unwrap();
    assert_eq!(reconstruct(&enc), layer.to_dense());
}

#[test]
fn deterministic_and_parallel_agree() {
    let layer = random_layer(200, 100, 0.05, 9, 4).unwrap();
    let p = EncodeParams::new(8, 9).with_shards(4);
    let a = encode_layer(&layer, &p).unwrap();
    let b = encode_layer(&layer, &p.with_jobs(4)).unwrap();
    assert_eq!(a, b);
    assert_eq!(reconstruct(&a), reconstruct_with(&b, 3));
}

#[test]
fn empty_layer_rejected() {
    let model = ClusterModel::new(vec![1.0]).unwrap();
    let empty = SimplifiedLayer::new(2, 2, vec![], vec![], model).unwrap();
    assert!(matches!(encode_layer(&empty, &EncodeParams::new(4, 0)), Err(Error::InvalidInput(_))));
}

#[test]
fn magnitude_fc1_size() {
    let layer = random_layer(300, 100, 0.05, 9, 5).unwrap();
    assert_eq!(layer.nnz(), 1500);
    let enc = encode_layer(&layer, &EncodeParams::new(9, 1)).unwrap();
    assert_eq!(enc.filter_bits(), 16_875);
    assert!((kb(enc.filter_bits()) - 2.09).abs() / 2.09 < 0.05);
}

#[test]
fn dns_fc0_size() {
    let layer = random_layer(784, 300, 0.018, 9, 6).unwrap();
    let enc = encode_layer(&layer, &EncodeParams::new(9, 1)).unwrap();
    assert!((kb(enc.filter_bits()) - 6.04).abs() / 6.04 < 0.04, "{}", kb(enc.filter_bits()));
}

#[test]
fn size_law_per_shard() {
    let layer = random_layer(500, 300, 0.03, 4, 7).unwrap();
    let enc = encode_layer(&layer, &EncodeParams::new(6, 1).with_shards(10)).unwrap();
    let expect: u64 = enc.shards().iter().map(|s| (1.25 * s.n() as f64).ceil() as u64 * 6).sum();
    assert_eq!(enc.filter_bits(), expect);
}

#[test]
fn factor_scales_with_t() {
    let layer = random_layer(300, 100, 0.05, 9, 8).unwrap();
    let e8 = encode_layer(&layer, &EncodeParams::new(8, 1)).unwrap();
    let e9 = encode_layer(&layer, &EncodeParams::new(9, 1)).unwrap();
    assert_eq!(e8.filter_bits() * 9, e9.filter_bits() * 8);
}

#[test]
fn report_fields() {
    let layer = random_layer(800, 500, 0.0073, 10, 9).unwrap();
    let enc = encode_layer(&layer, &EncodeParams::new(8, 1)).unwrap();
    let csr = csr_encode(&layer, 4).unwrap();
    let r = size_report(&layer, &enc, &csr).unwrap();
    assert_eq!(r.original_bits, 32 * 400_000);
    assert_eq!(r.simplified_nnz, 2920);
    assert_eq!(r.centroid_bits, 320);
    assert!(r.packed_bits < r.filter_bits);
    assert!(r.packed_compression_factor > r.compression_factor);
    assert!(r.csr_huffman_bits < r.csr_bits);
}

#[test]
fn sweep_halves() {
    let layer = random_layer(400, 250, 0.05, 9, 10).unwrap();
    let pts = sweep_t(&layer, 4..=10, &EncodeParams::new(4, 2).with_jobs(2)).unwrap();
    for w in pts.windows(2) {
        let ratio = w[1].fp_count as f64 / w[0].fp_count as f64;
        assert!((0.4..=0.6).contains(&ratio), "t={} ratio {ratio}", w[1].t);
        assert!(w[1].fp_count < w[0].fp_count);
    }
    // t = ceil(log2 9) = 4: rate close to 9/16
    let non_keys = (layer.size() - layer.nnz() as u64) as f64;
    let rate = pts[0].fp_count as f64 / non_keys;
    assert!((rate - 9.0 / 16.0).abs() < 0.01, "{rate}");
}

#[test]
fn t_policy() {
    assert_eq!(TPolicy::AboveLog2K(0).resolve(9), 4);
    assert_eq!(TPolicy::AboveLog2K(1).resolve(8), 4);
    assert_eq!(TPolicy::AboveLog2K(1).resolve(1), 1);
    assert_eq!(TPolicy::Fixed(7).resolve(3), 7);
}

#[test]
fn scaling_is_linear() {
    let ratios = [0.01, 0.02, 0.03, 0.04, 0.05];
    let pts = sparsity_scaling_experiment(800, 500, &ratios, 10, TPolicy::Fixed(8), &EncodeParams::new(8, 1)).unwrap();
    let r = pts[0].filter_bits as f64 / pts[4].filter_bits as f64;
    assert!((r - 0.2).abs() < 0.01, "{r}");
    for p in &pts[..3] {
        assert!(p.weightless_packed_bits < p.csr_huffman_bits, "{p:?}");
    }
    assert!(sparsity_scaling_experiment(10, 10, &[1.0], 2, TPolicy::Fixed(4), &EncodeParams::new(4, 1)).is_err());
}

#[test]
fn container_round_trip() {
    let layer = random_layer(100, 80, 0.05, 7, 11).unwrap();
    let mut a = encode_layer(&layer, &EncodeParams::new(6, 1).with_shards(3)).unwrap();
    a.set_name("fc0");
    let mut b = encode_layer(&layer, &EncodeParams::new(12, 5)).unwrap();
    b.set_name("fc1");
    let recs = vec![
        LayerRecord { layer: a, codec: Codec::Raw },
        LayerRecord { layer: b, codec: Codec::Arithmetic },
    ];
    let bytes = pack(&recs).unwrap();
    let back = unpack(&bytes).unwrap();
    assert_eq!(back, recs);
    assert_eq!(pack(&back).unwrap(), bytes);
}

#[test]
fn empty_container_and_corruption() {
    let empty = pack(&[]).unwrap();
    assert_eq!(empty.len(), EMPTY_CONTAINER_LEN);
    assert!(unpack(&empty).unwrap().is_empty());

    let layer = random_layer(20, 20, 0.1, 3, 12).unwrap();
    let enc = encode_layer(&layer, &EncodeParams::new(4, 1)).unwrap();
    let bytes = pack(&[LayerRecord { layer: enc, codec: Codec::Arithmetic }]).unwrap();
    for i in 0..bytes.len() {
        let mut bad = bytes.clone();
        bad[i] ^= 0x40;
        assert!(matches!(unpack(&bad), Err(Error::CorruptFile(_))), "byte {i}");
    }
    assert!(matches!(unpack(&bytes[..bytes.len() - 1]), Err(Error::CorruptFile(_))));
}

#[test]
fn wmat_and_csv() {
    let w = crate::synth::gaussian_matrix(3, 4, 1.0, 1);
    let bytes = write_wmat(&w).unwrap();
    assert_eq!(bytes.len(), 13 + 48);
    assert_eq!(read_wmat(&bytes).unwrap(), w);
    assert!(matches!(read_wmat(&bytes[..20]), Err(Error::CorruptFile(_))));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(read_wmat(&bad), Err(Error::CorruptFile(_))));

    let m = parse_csv("1, 2,3\n\n-4,5.5,0\n").unwrap();
    assert_eq!((m.rows(), m.cols()), (2, 3));
    assert_eq!(m.values(), &[1.0, 2.0, 3.0, -4.0, 5.5, 0.0]);
    assert!(matches!(parse_csv("1,2\n3\n"), Err(Error::ShapeMismatch(_))));
    assert!(parse_csv("a,b").is_err());
    assert!(parse_csv("").is_err());
}

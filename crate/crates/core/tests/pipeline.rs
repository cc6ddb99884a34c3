use weightless::container::reconstruct;
use weightless::toynet::{
    make_synthetic_dataset, train, weightless_pipeline, Dataset, LayerSpec, Stage, ToyNet, TrainConfig,
};

fn setup(seed: u64) -> (Dataset, ToyNet, TrainConfig) {
    let data = make_synthetic_dataset(seed, 5, 16, 2000).unwrap();
    let mut net = ToyNet::new(&[16, 40, 20, 5], seed).unwrap();
    let cfg = TrainConfig {
        epochs: 4,
        seed,
        ..Default::default()
    };
    train(&mut net, &data, &cfg).unwrap();
    (data, net, cfg)
}

#[test]
fn wide_cells_change_nothing() {
    let (data, net, cfg) = setup(1);
    let spec = LayerSpec {
        nnz_ratio: 0.2,
        k: 8,
        t: 30,
    };
    let out = weightless_pipeline(net, &data, &[spec], &cfg, 1).unwrap();
    let clustered = out.accuracy_at(Stage::Cluster, 0).unwrap();
    assert_eq!(out.accuracy_at(Stage::Encode, 0).unwrap(), clustered);
    let last = out.accuracy_at(Stage::RetrainSubsequent, 0).unwrap();
    assert!((last - clustered).abs() <= 0.03, "{clustered} -> {last}");
}

#[test]
fn narrow_cells_hurt_then_recover() {
    let (data, net, cfg) = setup(2);
    let spec = LayerSpec {
        nnz_ratio: 0.1,
        k: 8,
        t: 4,
    };
    let out = weightless_pipeline(net, &data, &[spec], &cfg, 2).unwrap();
    let clustered = out.accuracy_at(Stage::Cluster, 0).unwrap();
    let encoded = out.accuracy_at(Stage::Encode, 0).unwrap();
    let last = out.accuracy_at(Stage::RetrainSubsequent, 0).unwrap();
    assert!(encoded < clustered);
    assert!(last > encoded);
}

#[test]
fn frozen_layers_keep_their_false_positives() {
    let (data, net, cfg) = setup(3);
    let specs = [
        LayerSpec {
            nnz_ratio: 0.1,
            k: 4,
            t: 3,
        },
        LayerSpec {
            nnz_ratio: 0.2,
            k: 4,
            t: 3,
        },
    ];
    let out = weightless_pipeline(net, &data, &specs, &cfg, 3).unwrap();
    assert_eq!(out.encoded.len(), 2);
    for (layer, enc) in out.net.layers.iter().zip(&out.encoded) {
        assert!(layer.frozen);
        assert_eq!(layer.weight_matrix(), reconstruct(enc));
    }
    assert!(!out.net.layers[2].frozen);
    assert_eq!(out.trace.len(), 10);
}

#[test]
fn same_seed_same_trace() {
    let spec = LayerSpec {
        nnz_ratio: 0.1,
        k: 8,
        t: 4,
    };
    let run = || {
        let (data, net, cfg) = setup(4);
        weightless_pipeline(net, &data, &[spec], &cfg, 4).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.trace_csv(), b.trace_csv());
    assert_eq!(a.encoded, b.encoded);
}

#[test]
fn too_many_specs() {
    let (data, net, cfg) = setup(5);
    let spec = LayerSpec {
        nnz_ratio: 0.1,
        k: 4,
        t: 4,
    };
    assert!(weightless_pipeline(net, &data, &[spec; 4], &cfg, 5).is_err());
}

//! Command-line front end: one subcommand per pipeline step or experiment.

use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use weightless::baseline::{csr_encode, csr_huffman_bits, csr_size_bits, sweep_index_bits, DEFAULT_INDEX_BITS};
use weightless::bloomier::DEFAULT_TABLE_MULTIPLIER;
use weightless::container::{
    encode_layer, pack, packed_bits, parse_csv, read_wmat, reconstruct_with, size_report, sparsity_scaling_experiment,
    sweep_t, unpack, write_wmat, Codec, EncodeParams, EncodedLayer, LayerRecord, TPolicy,
};
use weightless::entropy::{pack_cells_coded, pack_cells_raw};
use weightless::simplify::{prune_to_sparsity, simplify_layer, SimplifiedLayer, WeightMatrix};
use weightless::toynet::{
    make_synthetic_dataset, read_idx_images, read_idx_labels, train, weightless_pipeline, Dataset, LayerSpec,
    ToyNet, TrainConfig, DEFAULT_ARCHITECTURE, DEFAULT_EPOCHS, DEFAULT_LAYER_SPEC, DEFAULT_LR,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Usage(#[from] clap::Error),
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Lib(#[from] weightless::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(e) => e.exit_code(),
            _ => 1,
        }
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Parser)]
#[command(name = "weightless", version, about = "Encode sparse clustered weight matrices in Bloomier filters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Prune, cluster and encode a weight matrix into a container.
    Compress(CompressArgs),
    /// Rebuild the dense matrix from a container layer.
    Reconstruct(ReconstructArgs),
    /// Print size accounting for a container or a weight matrix.
    Stats(StatsArgs),
    /// False positives and sizes for a range of cell widths (CSV).
    Sweep(SweepArgs),
    /// Weightless vs CSR+Huffman sizes across nonzero ratios (CSV).
    ScaleExp(ScaleArgs),
    /// CSR baseline sizes for a weight matrix.
    Csr(CsrArgs),
    /// Raw vs arithmetic-coded payload sizes for a container (CSV).
    PackCompare(PackCompareArgs),
    /// Train the toy classifier and report loss and accuracy per epoch (CSV).
    ToyTrain(ToyTrainArgs),
    /// Run the freeze-and-retrain pipeline on the toy classifier (CSV trace).
    ToyPipeline(ToyPipelineArgs),
    /// Convert a CSV matrix to the binary matrix format.
    ImportCsv(ImportCsvArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CodecArg {
    Raw,
    Arith,
}

impl From<CodecArg> for Codec {
    fn from(c: CodecArg) -> Self {
        match c {
            CodecArg::Raw => Codec::Raw,
            CodecArg::Arith => Codec::Arithmetic,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimplifyArgs {
    /// Fraction of weights kept by magnitude pruning.
    #[arg(long)]
    pub nnz: f64,
    /// Number of clusters.
    #[arg(long)]
    pub k: u32,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Table-size multiplier.
    #[arg(long, default_value_t = DEFAULT_TABLE_MULTIPLIER)]
    pub c: f64,
    #[arg(long, default_value_t = 1)]
    pub shards: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

impl FilterArgs {
    fn params(&self, t: u32) -> EncodeParams {
        EncodeParams::new(t, self.seed)
            .with_c(self.c)
            .with_shards(self.shards)
            .with_jobs(self.jobs)
    }
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    /// Weight matrix (WMAT, or CSV with a .csv extension).
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub simplify: SimplifyArgs,
    /// Bits per filter cell.
    #[arg(long)]
    pub t: u32,
    #[command(flatten)]
    pub filter: FilterArgs,
    #[arg(long, value_enum, default_value = "arith")]
    pub codec: CodecArg,
    #[arg(long, default_value = "layer0")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Layer index within the container.
    #[arg(long, default_value_t = 0)]
    pub layer: usize,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Container, or a weight matrix together with --nnz, --k and --t.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub nnz: Option<f64>,
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub t: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_INDEX_BITS)]
    pub index_bits: u32,
    #[command(flatten)]
    pub filter: FilterArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub simplify: SimplifyArgs,
    #[arg(long)]
    pub t_min: u32,
    #[arg(long)]
    pub t_max: u32,
    #[command(flatten)]
    pub filter: FilterArgs,
}

#[derive(Debug, Args)]
pub struct ScaleArgs {
    #[arg(long, default_value_t = 800)]
    pub rows: usize,
    #[arg(long, default_value_t = 500)]
    pub cols: usize,
    /// Comma-separated nonzero ratios.
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.02, 0.03, 0.04, 0.05])]
    pub nnz: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub k: u32,
    /// Fixed cell width; defaults to ceil(log2 k) + 4.
    #[arg(long)]
    pub t: Option<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub filter: FilterArgs,
}

#[derive(Debug, Args)]
pub struct CsrArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub simplify: SimplifyArgs,
    /// Relative-index width; omit to sweep 1..=16.
    #[arg(long)]
    pub index_bits: Option<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PackCompareArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Also write the container re-packed with the smaller codec per layer.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    pub epochs: usize,
    #[arg(long, default_value_t = DEFAULT_LR)]
    pub lr: f64,
    /// Samples in the synthetic dataset.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Directory holding MNIST-style IDX files to use instead of synthetic data.
    #[arg(long)]
    pub idx_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ToyTrainArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ToyPipelineArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value_t = DEFAULT_LAYER_SPEC.nnz_ratio)]
    pub nnz: f64,
    #[arg(long, default_value_t = DEFAULT_LAYER_SPEC.k)]
    pub k: u32,
    #[arg(long, default_value_t = DEFAULT_LAYER_SPEC.t)]
    pub t: u32,
    /// Number of leading layers to encode.
    #[arg(long, default_value_t = 1)]
    pub layers: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ImportCsvArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| CliError::File {
        path: path.to_owned(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| CliError::File {
        path: path.to_owned(),
        source,
    })
}

fn invalid(msg: impl Display) -> CliError {
    CliError::Invalid(msg.to_string())
}

/// Reads WMAT by magic, or CSV when the extension says so.
fn load_matrix(path: &Path) -> Result<WeightMatrix> {
    let bytes = read_file(path)?;
    if bytes.starts_with(b"WMAT") {
        return Ok(read_wmat(&bytes)?);
    }
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let text = String::from_utf8(bytes).map_err(|_| invalid(format!("{}: not UTF-8 text", path.display())))?;
        return Ok(parse_csv(&text)?);
    }
    Err(invalid(format!("{}: neither a WMAT file nor a .csv file", path.display())))
}

fn load_container(path: &Path) -> Result<Vec<LayerRecord>> {
    Ok(unpack(&read_file(path)?)?)
}

fn simplify(w: &WeightMatrix, args: &SimplifyArgs) -> Result<SimplifiedLayer> {
    let mask = prune_to_sparsity(w, args.nnz)?;
    Ok(simplify_layer(w, &mask, args.k)?)
}

/// Sends `text` to `--out` if given, else to `out`.
fn emit(text: &str, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => write_file(p, text.as_bytes()),
        None => Ok(out.write_all(text.as_bytes())?),
    }
}

fn validate_filter(f: &FilterArgs, t: u32, k: u32) -> Result<()> {
    if !(f.c > 1.0) {
        return Err(invalid("--c must be above 1"));
    }
    if f.shards == 0 || f.shards > 255 {
        return Err(invalid("--shards must be in 1..=255"));
    }
    if !(1..=32).contains(&t) || k as u64 >= 1u64 << t {
        return Err(invalid(format!("--t {t} cannot hold k = {k} values")));
    }
    Ok(())
}

fn validate_ratio(nnz: f64) -> Result<()> {
    if !(nnz > 0.0 && nnz <= 1.0) {
        return Err(invalid("--nnz must be in (0, 1]"));
    }
    Ok(())
}

pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    match cli.command {
        Command::Compress(a) => compress(a, out),
        Command::Reconstruct(a) => reconstruct_cmd(a, out),
        Command::Stats(a) => stats(a, out),
        Command::Sweep(a) => sweep(a, out),
        Command::ScaleExp(a) => scale_exp(a, out),
        Command::Csr(a) => csr(a, out),
        Command::PackCompare(a) => pack_compare(a, out),
        Command::ToyTrain(a) => toy_train(a, out),
        Command::ToyPipeline(a) => toy_pipeline(a, out),
        Command::ImportCsv(a) => import_csv(a, out),
    }
}

fn compress(a: CompressArgs, out: &mut dyn Write) -> Result<()> {
    validate_ratio(a.simplify.nnz)?;
    validate_filter(&a.filter, a.t, a.simplify.k)?;
    let w = load_matrix(&a.input)?;
    let layer = simplify(&w, &a.simplify)?;
    let mut enc = encode_layer(&layer, &a.filter.params(a.t))?;
    enc.set_name(a.name);
    let bytes = pack(&[LayerRecord {
        layer: enc.clone(),
        codec: a.codec.into(),
    }])?;
    write_file(&a.out, &bytes)?;
    writeln!(
        out,
        "encoded {}x{} layer: {} nonzeros, {} shards, {} filter bits, {} file bytes",
        enc.rows(),
        enc.cols(),
        enc.nnz(),
        enc.shards().len(),
        enc.filter_bits(),
        bytes.len()
    )?;
    Ok(())
}

fn reconstruct_cmd(a: ReconstructArgs, out: &mut dyn Write) -> Result<()> {
    let layers = load_container(&a.input)?;
    let rec = layers
        .get(a.layer)
        .ok_or_else(|| invalid(format!("container has {} layers, asked for {}", layers.len(), a.layer)))?;
    let w = reconstruct_with(&rec.layer, a.jobs);
    write_file(&a.out, &write_wmat(&w)?)?;
    writeln!(out, "wrote {}x{} matrix with {} nonzeros", w.rows(), w.cols(), w.count_nonzero())?;
    Ok(())
}

fn layer_stats(enc: &EncodedLayer, out: &mut dyn Write) -> Result<()> {
    let original_bits = 32 * enc.size();
    let extra = enc.centroid_bits() + enc.metadata_bits();
    let packed = packed_bits(enc)?;
    writeln!(out, "layer: {}", enc.name())?;
    writeln!(out, "shape: {}x{}", enc.rows(), enc.cols())?;
    writeln!(out, "k: {}", enc.k())?;
    writeln!(out, "t: {}", enc.t())?;
    writeln!(out, "shards: {}", enc.shards().len())?;
    writeln!(out, "original_bits: {original_bits}")?;
    writeln!(out, "simplified_nnz: {}", enc.nnz())?;
    writeln!(out, "filter_bits: {}", enc.filter_bits())?;
    writeln!(out, "centroid_bits: {}", enc.centroid_bits())?;
    writeln!(out, "metadata_bits: {}", enc.metadata_bits())?;
    writeln!(out, "packed_bits: {packed}")?;
    writeln!(
        out,
        "compression_factor: {:.3}",
        original_bits as f64 / (enc.filter_bits() + extra) as f64
    )?;
    writeln!(
        out,
        "packed_compression_factor: {:.3}",
        original_bits as f64 / (packed + extra) as f64
    )?;
    Ok(())
}

fn stats(a: StatsArgs, out: &mut dyn Write) -> Result<()> {
    let bytes = read_file(&a.input)?;
    if bytes.starts_with(b"WTLS") {
        for rec in unpack(&bytes)? {
            layer_stats(&rec.layer, out)?;
        }
        return Ok(());
    }
    let (Some(nnz), Some(k), Some(t)) = (a.nnz, a.k, a.t) else {
        return Err(invalid("stats on a weight matrix needs --nnz, --k and --t"));
    };
    validate_ratio(nnz)?;
    validate_filter(&a.filter, t, k)?;
    let w = load_matrix(&a.input)?;
    let layer = simplify(&w, &SimplifyArgs { nnz, k })?;
    let enc = encode_layer(&layer, &a.filter.params(t))?;
    let csr = csr_encode(&layer, a.index_bits)?;
    let r = size_report(&layer, &enc, &csr)?;
    writeln!(out, "original_bits: {}", r.original_bits)?;
    writeln!(out, "simplified_nnz: {}", r.simplified_nnz)?;
    writeln!(out, "filter_bits: {}", r.filter_bits)?;
    writeln!(out, "centroid_bits: {}", r.centroid_bits)?;
    writeln!(out, "metadata_bits: {}", r.metadata_bits)?;
    writeln!(out, "packed_bits: {}", r.packed_bits)?;
    writeln!(out, "csr_bits: {}", r.csr_bits)?;
    writeln!(out, "csr_huffman_bits: {}", r.csr_huffman_bits)?;
    writeln!(out, "compression_factor: {:.3}", r.compression_factor)?;
    writeln!(out, "packed_compression_factor: {:.3}", r.packed_compression_factor)?;
    writeln!(out, "csr_compression_factor: {:.3}", r.csr_compression_factor)?;
    writeln!(out, "csr_huffman_compression_factor: {:.3}", r.csr_huffman_compression_factor)?;
    Ok(())
}

fn sweep(a: SweepArgs, out: &mut dyn Write) -> Result<()> {
    validate_ratio(a.simplify.nnz)?;
    if a.t_min > a.t_max {
        return Err(invalid("--t-min must not exceed --t-max"));
    }
    validate_filter(&a.filter, a.t_min, a.simplify.k)?;
    validate_filter(&a.filter, a.t_max, a.simplify.k)?;
    let w = load_matrix(&a.input)?;
    let layer = simplify(&w, &a.simplify)?;
    let points = sweep_t(&layer, a.t_min..=a.t_max, &a.filter.params(a.t_min))?;
    let mut text = String::from("t,fp_count,filter_bits,packed_bits\n");
    for p in points {
        text += &format!("{},{},{},{}\n", p.t, p.fp_count, p.filter_bits, p.packed_bits);
    }
    emit(&text, a.out.as_deref(), out)
}

fn scale_exp(a: ScaleArgs, out: &mut dyn Write) -> Result<()> {
    if a.nnz.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
        return Err(invalid("--nnz ratios must be in (0, 1)"));
    }
    let policy = a.t.map_or(TPolicy::AboveLog2K(4), TPolicy::Fixed);
    let t = policy.resolve(a.k);
    validate_filter(&a.filter, t, a.k)?;
    let points = sparsity_scaling_experiment(a.rows, a.cols, &a.nnz, a.k, policy, &a.filter.params(t))?;
    let mut text = String::from("nnz_ratio,nnz,t,filter_bits,weightless_packed_bits,csr_index_bits,csr_huffman_bits\n");
    for p in points {
        text += &format!(
            "{},{},{},{},{},{},{}\n",
            p.nnz_ratio, p.nnz, p.t, p.filter_bits, p.weightless_packed_bits, p.csr_index_bits, p.csr_huffman_bits
        );
    }
    emit(&text, a.out.as_deref(), out)
}

fn csr(a: CsrArgs, out: &mut dyn Write) -> Result<()> {
    validate_ratio(a.simplify.nnz)?;
    if a.index_bits.is_some_and(|b| !(1..=16).contains(&b)) {
        return Err(invalid("--index-bits must be in 1..=16"));
    }
    let w = load_matrix(&a.input)?;
    let layer = simplify(&w, &a.simplify)?;
    let mut text = String::from("index_bits,csr_bits,csr_huffman_bits\n");
    match a.index_bits {
        Some(b) => {
            let c = csr_encode(&layer, b)?;
            text += &format!("{b},{},{}\n", csr_size_bits(&c), csr_huffman_bits(&c)?);
        }
        None => {
            for p in sweep_index_bits(&layer)? {
                text += &format!("{},{},{}\n", p.index_bits, p.csr_bits, p.csr_huffman_bits);
            }
        }
    }
    emit(&text, a.out.as_deref(), out)
}

fn pack_compare(a: PackCompareArgs, out: &mut dyn Write) -> Result<()> {
    let layers = load_container(&a.input)?;
    let mut text = String::from("layer,raw_bytes,coded_bytes,ratio\n");
    let mut repacked = Vec::with_capacity(layers.len());
    for rec in layers {
        let enc = &rec.layer;
        let mut raw = 0usize;
        let mut coded = 0usize;
        for s in enc.shards() {
            raw += pack_cells_raw(s.cells(), s.t())?.len();
            coded += pack_cells_coded(s.cells(), s.t())?.len();
        }
        text += &format!("{},{raw},{coded},{:.4}\n", enc.name(), coded as f64 / raw as f64);
        let codec = if coded < raw { Codec::Arithmetic } else { Codec::Raw };
        repacked.push(LayerRecord { codec, ..rec });
    }
    out.write_all(text.as_bytes())?;
    if let Some(p) = a.out {
        write_file(&p, &pack(&repacked)?)?;
    }
    Ok(())
}

fn load_dataset(a: &TrainArgs) -> Result<Dataset> {
    let Some(dir) = &a.idx_dir else {
        return Ok(make_synthetic_dataset(a.seed, 10, DEFAULT_ARCHITECTURE[0], a.samples)?);
    };
    let images = |name: &str| -> Result<_> { Ok(read_idx_images(&read_file(&dir.join(name))?)?) };
    let labels = |name: &str| -> Result<_> { Ok(read_idx_labels(&read_file(&dir.join(name))?)?) };
    Ok(Dataset::new(
        images("train-images-idx3-ubyte")?,
        labels("train-labels-idx1-ubyte")?,
        images("t10k-images-idx3-ubyte")?,
        labels("t10k-labels-idx1-ubyte")?,
        10,
    )?)
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig> {
    if !(a.lr > 0.0) {
        return Err(invalid("--lr must be positive"));
    }
    Ok(TrainConfig {
        epochs: a.epochs,
        lr: a.lr,
        seed: a.seed,
        ..Default::default()
    })
}

fn new_net(data: &Dataset, seed: u64) -> Result<ToyNet> {
    let mut sizes = DEFAULT_ARCHITECTURE;
    sizes[0] = data.dim();
    Ok(ToyNet::new(&sizes, seed)?)
}

fn toy_train(a: ToyTrainArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = train_config(&a.train)?;
    let data = load_dataset(&a.train)?;
    let mut net = new_net(&data, a.train.seed)?;
    let mut text = String::from("epoch,train_loss,test_accuracy\n");
    for epoch in 0..cfg.epochs {
        let one = TrainConfig {
            epochs: 1,
            seed: cfg.seed.wrapping_add(epoch as u64),
            ..cfg
        };
        let loss = train(&mut net, &data, &one)?[0];
        text += &format!("{},{loss:.6},{:.6}\n", epoch + 1, net.test_accuracy(&data)?);
    }
    emit(&text, a.out.as_deref(), out)
}

fn toy_pipeline(a: ToyPipelineArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = train_config(&a.train)?;
    validate_ratio(a.nnz)?;
    if !(1..=32).contains(&a.t) || a.k as u64 >= 1u64 << a.t {
        return Err(invalid(format!("--t {} cannot hold k = {} values", a.t, a.k)));
    }
    let data = load_dataset(&a.train)?;
    let mut net = new_net(&data, a.train.seed)?;
    if a.layers == 0 || a.layers >= net.layers.len() {
        return Err(invalid(format!("--layers must be in 1..{}", net.layers.len())));
    }
    train(&mut net, &data, &cfg)?;
    let spec = LayerSpec {
        nnz_ratio: a.nnz,
        k: a.k,
        t: a.t,
    };
    let specs = vec![spec; a.layers];
    let outcome = weightless_pipeline(net, &data, &specs, &cfg, a.train.seed)?;
    let mut text = outcome.trace_csv();
    text.insert_str(
        "stage,layer,accuracy\n".len(),
        &format!("trained,-,{:.6}\n", outcome.initial_accuracy),
    );
    emit(&text, a.out.as_deref(), out)
}

fn import_csv(a: ImportCsvArgs, out: &mut dyn Write) -> Result<()> {
    let text = String::from_utf8(read_file(&a.input)?).map_err(|_| invalid("CSV input is not UTF-8"))?;
    let w = parse_csv(&text)?;
    write_file(&a.out, &write_wmat(&w)?)?;
    writeln!(out, "wrote {}x{} matrix", w.rows(), w.cols())?;
    Ok(())
}

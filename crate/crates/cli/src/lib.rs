//! `infoplane` command-line front end.
//!
//! Every subcommand reads and writes files only; diagnostics go to standard
//! error. Exit status is 0 on success, 1 for usage and validation errors and 2
//! for filesystem errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use infoplane_core::conductance::{
    conductance_all_layers, ConductanceMethod, IgConfig, DEFAULT_IG_STEPS,
};
use infoplane_core::dump::{ite_csv, plane_csv};
use infoplane_core::estimators::{BinningConfig, DEFAULT_BINS, DEFAULT_LABEL_K};
use infoplane_core::plane::representation_plane;
use infoplane_core::synth::{
    gen_blobs, markov_samples, train_sgd, BlobsSpec, MarkovChainCase, TrainConfig,
};
use infoplane_core::{
    ite_profile, plane_dpi, read_dump, write_dump, Activation, Basis, Dump, DumpContents, Error,
    ITEConfig, LayerTrace, Network, NetworkSpec, PlaneConfig, PlaneEstimator, PlaneRow,
    Representation, Result, Units, DEFAULT_DPI_TOLERANCE,
};

pub const NET_FILE: &str = "net.json";
pub const PLANE_FILE: &str = "plane.csv";
pub const ITE_FILE: &str = "ite.csv";
pub const DPI_FILE: &str = "dpi.json";

#[derive(Debug, Parser)]
#[command(
    name = "infoplane",
    version,
    about = "Information-plane analysis of feed-forward networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset dump, plus a trained network for blobs.
    Gen(GenArgs),
    /// Forward a dataset through a network and dump activations and conductances.
    Conduct(ConductArgs),
    /// Information-plane coordinates as CSV.
    Plane(PlaneArgs),
    /// Per-layer transfer-efficiency metrics as CSV.
    Ite(IteArgs),
    /// Data-processing-inequality report as JSON.
    Dpi(DpiArgs),
    /// Plane, ITE and DPI outputs for one dump in a single pass.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Blobs,
    Markov,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ActivationArg {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl From<ActivationArg> for Activation {
    fn from(a: ActivationArg) -> Self {
        match a {
            ActivationArg::Identity => Activation::Identity,
            ActivationArg::Relu => Activation::Relu,
            ActivationArg::Tanh => Activation::Tanh,
            ActivationArg::Sigmoid => Activation::Sigmoid,
        }
    }
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// Output dump directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = 100)]
    per_class: usize,
    #[arg(long, default_value_t = 4.0)]
    radius: f64,
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "16,16")]
    hidden: Vec<usize>,
    #[arg(long, value_enum, default_value_t = ActivationArg::Tanh)]
    activation: ActivationArg,
    /// Training epochs; 0 keeps the initialization.
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    /// Copies of each input symbol in the exact Markov dataset.
    #[arg(long, default_value_t = 25)]
    repeats: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Gradient,
    Integrated,
}

#[derive(Debug, Args)]
struct ConductArgs {
    /// Dataset dump holding the network input.
    #[arg(long)]
    data: PathBuf,
    /// Network JSON; defaults to `net.json` inside the data directory.
    #[arg(long)]
    net: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Gradient)]
    method: MethodArg,
    /// Riemann steps for the integrated method.
    #[arg(long)]
    ig_steps: Option<usize>,
    /// `zero`, or a JSON file holding the baseline vector.
    #[arg(long)]
    baseline: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BasisArg {
    Activation,
    Conductance,
    /// Both bases when the dump holds conductances, otherwise activation only.
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Binning,
    Ksg,
    Kde,
    Gaussian,
}

impl From<EstimatorArg> for PlaneEstimator {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Binning => PlaneEstimator::Binning,
            EstimatorArg::Ksg => PlaneEstimator::Ksg,
            EstimatorArg::Kde => PlaneEstimator::Kde,
            EstimatorArg::Gaussian => PlaneEstimator::Gaussian,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum UnitsArg {
    Nats,
    Bits,
}

impl From<UnitsArg> for Units {
    fn from(u: UnitsArg) -> Self {
        match u {
            UnitsArg::Nats => Units::Nats,
            UnitsArg::Bits => Units::Bits,
        }
    }
}

#[derive(Debug, Args)]
struct CommonOpts {
    /// Dump directory to analyze.
    #[arg(long)]
    dump: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
    /// Neighbors for the label posterior and KSG.
    #[arg(long, default_value_t = DEFAULT_LABEL_K)]
    k: usize,
    #[arg(long, value_enum, default_value_t = UnitsArg::Nats)]
    units: UnitsArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct PlaneOpts {
    #[arg(long, value_enum, default_value_t = BasisArg::Both)]
    basis: BasisArg,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Binning)]
    estimator: EstimatorArg,
    /// Bootstrap resamples for error bars; 0 disables them.
    #[arg(long, default_value_t = 0)]
    bootstrap: usize,
}

#[derive(Debug, Args)]
struct IteOpts {
    #[arg(long, default_value_t = 1.0 / 3.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    gamma: f64,
}

#[derive(Debug, Args)]
struct DpiOpts {
    #[arg(long, default_value_t = DEFAULT_DPI_TOLERANCE)]
    tolerance: f64,
}

#[derive(Debug, Args)]
struct PlaneArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[command(flatten)]
    plane: PlaneOpts,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IteArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[command(flatten)]
    ite: IteOpts,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DpiArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[command(flatten)]
    plane: PlaneOpts,
    #[command(flatten)]
    dpi: DpiOpts,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[command(flatten)]
    plane: PlaneOpts,
    #[command(flatten)]
    ite: IteOpts,
    #[command(flatten)]
    dpi: DpiOpts,
    /// Output directory for `plane.csv`, `ite.csv` and `dpi.json`.
    #[arg(long)]
    out: PathBuf,
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("infoplane: {e}");
            exit_code(&e)
        }
    }
}

/// 2 for filesystem failures, 1 for everything else.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_io() {
        2
    } else {
        1
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Gen(a) => gen(&a),
        Command::Conduct(a) => conduct(&a),
        Command::Plane(a) => {
            let plane = plane_config(&a.common, &a.plane)?;
            let dump = read_dump(&a.common.dump)?;
            let rows = plane_rows(&dump, a.plane.basis, &plane)?;
            emit(a.out.as_deref(), &plane_csv(&rows, a.common.units.into())?)
        }
        Command::Ite(a) => {
            let cfg = ite_config(&a.common, &a.ite)?;
            let dump = read_dump(&a.common.dump)?;
            emit(
                a.out.as_deref(),
                &ite_csv(&ite_rows(&dump, &cfg)?, a.common.units.into())?,
            )
        }
        Command::Dpi(a) => {
            let plane = plane_config(&a.common, &a.plane)?;
            check_tolerance(a.dpi.tolerance)?;
            let dump = read_dump(&a.common.dump)?;
            let rows = plane_rows(&dump, a.plane.basis, &plane)?;
            emit(
                a.out.as_deref(),
                &dpi_json(&dump, &rows, &plane, a.dpi.tolerance)?,
            )
        }
        Command::Analyze(a) => analyze(&a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_text(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|source| Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

fn check_tolerance(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(validation(format!("--tolerance must be >= 0, got {t}")))
    }
}

fn plane_config(common: &CommonOpts, opts: &PlaneOpts) -> Result<PlaneConfig> {
    let binning = BinningConfig::with_bins(common.bins);
    binning.validate()?;
    if common.k == 0 {
        return Err(validation("--k must be at least 1"));
    }
    Ok(PlaneConfig {
        estimator: opts.estimator.into(),
        binning,
        k: common.k,
        bootstrap: opts.bootstrap,
        seed: common.seed,
        ..PlaneConfig::default()
    })
}

fn ite_config(common: &CommonOpts, opts: &IteOpts) -> Result<ITEConfig> {
    let cfg = ITEConfig {
        binning: BinningConfig::with_bins(common.bins),
        k: common.k,
        ..ITEConfig::with_weights(opts.alpha, opts.beta, opts.gamma)
    };
    cfg.validate()?;
    cfg.binning.validate()?;
    Ok(cfg)
}

/// Selected bases in output order: activation first.
fn bases(dump: &Dump, basis: BasisArg) -> Result<Vec<Basis>> {
    let has_cond = !dump.conductances.is_empty();
    match basis {
        BasisArg::Activation => Ok(vec![Basis::Activation]),
        BasisArg::Conductance if has_cond => Ok(vec![Basis::Conductance]),
        BasisArg::Conductance => Err(validation("dump holds no conductance layers")),
        BasisArg::Both if has_cond => Ok(vec![Basis::Activation, Basis::Conductance]),
        BasisArg::Both => Ok(vec![Basis::Activation]),
    }
}

fn layers_of(dump: &Dump, basis: Basis) -> Result<&[LayerTrace]> {
    let layers = match basis {
        Basis::Activation => &dump.activations,
        Basis::Conductance => &dump.conductances,
    };
    if layers.is_empty() {
        return Err(validation(format!(
            "dump holds no {basis} layers beyond the input"
        )));
    }
    Ok(layers)
}

fn plane_for(dump: &Dump, basis: Basis, cfg: &PlaneConfig) -> Result<Vec<PlaneRow>> {
    let reps: Vec<Representation<'_>> = layers_of(dump, basis)?.iter().map(Into::into).collect();
    representation_plane(basis, &reps, dump.input.as_ref(), &dump.labels, cfg)
}

fn plane_rows(dump: &Dump, basis: BasisArg, cfg: &PlaneConfig) -> Result<Vec<PlaneRow>> {
    let mut rows = Vec::new();
    for b in bases(dump, basis)? {
        rows.extend(plane_for(dump, b, cfg)?);
    }
    Ok(rows)
}

fn ite_rows(dump: &Dump, cfg: &ITEConfig) -> Result<Vec<infoplane_core::ITERow>> {
    let x = dump.input.as_ref().ok_or_else(|| {
        validation("ITE needs the network input (activation layer 0) in the dump")
    })?;
    ite_profile(layers_of(dump, Basis::Activation)?, x, &dump.labels, cfg)
}

fn dpi_json(dump: &Dump, rows: &[PlaneRow], cfg: &PlaneConfig, tolerance: f64) -> Result<String> {
    let mut reports = Vec::new();
    for basis in [Basis::Activation, Basis::Conductance] {
        let chain: Vec<PlaneRow> = rows.iter().filter(|r| r.basis == basis).cloned().collect();
        if !chain.is_empty() {
            reports.extend(plane_dpi(
                &chain,
                dump.input.as_ref(),
                &dump.labels,
                &cfg.binning,
                tolerance,
            )?);
        }
    }
    let total: usize = reports.iter().map(|r| r.violations.len()).sum();
    if total > 0 {
        eprintln!("infoplane: {total} DPI violation(s) above tolerance {tolerance}");
    }
    let mut json = serde_json::to_string_pretty(&reports).expect("reports serialize");
    json.push('\n');
    Ok(json)
}

fn analyze(a: &AnalyzeArgs) -> Result<()> {
    let plane = plane_config(&a.common, &a.plane)?;
    let ite = ite_config(&a.common, &a.ite)?;
    check_tolerance(a.dpi.tolerance)?;
    let dump = read_dump(&a.common.dump)?;
    let units: Units = a.common.units.into();
    let rows = plane_rows(&dump, a.plane.basis, &plane)?;
    let plane_text = plane_csv(&rows, units)?;
    let ite_text = ite_csv(&ite_rows(&dump, &ite)?, units)?;
    let dpi_text = dpi_json(&dump, &rows, &plane, a.dpi.tolerance)?;
    fs::create_dir_all(&a.out).map_err(|source| Error::Io {
        path: a.out.clone(),
        source,
    })?;
    write_text(&a.out.join(PLANE_FILE), &plane_text)?;
    write_text(&a.out.join(ITE_FILE), &ite_text)?;
    write_text(&a.out.join(DPI_FILE), &dpi_text)
}

fn gen(a: &GenArgs) -> Result<()> {
    match a.kind {
        Kind::Blobs => {
            if a.classes < 2 {
                return Err(validation("--classes must be at least 2"));
            }
            let mut dims = vec![2];
            dims.extend(&a.hidden);
            dims.push(a.classes);
            let mut acts = vec![Activation::from(a.activation); a.hidden.len()];
            acts.push(Activation::Softmax);
            let spec = NetworkSpec::new(dims, acts, a.seed)?;
            let blobs = BlobsSpec::on_circle(a.classes, a.per_class, a.radius, a.spread, a.seed);
            let (x, labels) = gen_blobs(&blobs)?;
            let out = train_sgd(
                &Network::init(spec)?,
                &x,
                &labels,
                &TrainConfig::new(a.epochs, a.lr, a.seed),
            )?;
            eprintln!(
                "trained {} epochs: loss {:.6}, accuracy {:.4}",
                a.epochs, out.final_loss, out.accuracy
            );
            write_dump(
                &a.out,
                &DumpContents {
                    model_name: "blobs-mlp",
                    input: Some(&x),
                    activations: &[],
                    conductances: &[],
                    labels: &labels,
                },
            )?;
            let mut json = serde_json::to_string_pretty(&out.network).expect("network serializes");
            json.push('\n');
            write_text(&a.out.join(NET_FILE), &json)
        }
        Kind::Markov => {
            let (x, stages, labels) =
                markov_samples(&MarkovChainCase::mod_floor_example(), a.repeats)?;
            let traces: Vec<LayerTrace> = stages
                .into_iter()
                .enumerate()
                .map(|(i, activations)| LayerTrace {
                    layer_index: i + 1,
                    layer_name: format!("stage{}", i + 1),
                    activations,
                })
                .collect();
            write_dump(
                &a.out,
                &DumpContents {
                    model_name: "markov-chain",
                    input: Some(&x),
                    activations: &traces,
                    conductances: &[],
                    labels: &labels,
                },
            )?;
            Ok(())
        }
    }
}

fn read_baseline(spec: &str, d: usize) -> Result<Vec<f64>> {
    if spec == "zero" {
        return Ok(vec![0.0; d]);
    }
    let path = Path::new(spec);
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn conduct(a: &ConductArgs) -> Result<()> {
    let method = match a.method {
        MethodArg::Gradient => {
            if a.ig_steps.is_some() || a.baseline.is_some() {
                return Err(validation(
                    "--ig-steps and --baseline require --method integrated",
                ));
            }
            ConductanceMethod::Gradient
        }
        MethodArg::Integrated => ConductanceMethod::Integrated,
    };
    if a.ig_steps == Some(0) {
        return Err(validation("--ig-steps must be at least 1"));
    }
    let net_path = a.net.clone().unwrap_or_else(|| a.data.join(NET_FILE));
    let text = fs::read_to_string(&net_path).map_err(|source| Error::Io {
        path: net_path.clone(),
        source,
    })?;
    let net: Network = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: net_path.clone(),
        source,
    })?;
    let data = read_dump(&a.data)?;
    let x = data
        .input
        .as_ref()
        .ok_or_else(|| validation("data dump holds no input layer"))?;
    let ig = match method {
        ConductanceMethod::Gradient => None,
        ConductanceMethod::Integrated => {
            let baseline = read_baseline(a.baseline.as_deref().unwrap_or("zero"), net.input_dim())?;
            let cfg = IgConfig {
                baseline,
                ..IgConfig::zero(net.input_dim()).with_steps(a.ig_steps.unwrap_or(DEFAULT_IG_STEPS))
            };
            cfg.validate(net.input_dim())?;
            Some(cfg)
        }
    };
    let traces = net.forward_collect(x)?;
    let records = conductance_all_layers(&net, x, method, ig.as_ref())?;
    let conductances: Vec<LayerTrace> = records.iter().map(Into::into).collect();
    write_dump(
        &a.out,
        &DumpContents {
            model_name: &data.manifest.model_name,
            input: Some(x),
            activations: &traces,
            conductances: &conductances,
            labels: &data.labels,
        },
    )?;
    Ok(())
}

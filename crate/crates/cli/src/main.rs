use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;

use qag_core::circuits::{build_architecture, Architecture};
use qag_core::codec::{generate_images, EncodingConfig};
use qag_core::data::{
    csv_string, default_synthetic, load_dataset, load_dataset_with, split, synth_generate, ShowerDataset, SynthParams,
    DEFAULT_DATA_SEED, DEFAULT_TEST_SIZE, DEFAULT_TRAIN_SIZE, N_PIXELS,
};
use qag_core::eval::evaluate;
use qag_core::experiments::{
    inference_sweep, sweep_csv, training_sweep, InferenceSweep, NoiseConfig, TrainingSweep, DEFAULT_LEVELS,
};
use qag_core::metrics::{circuit_report, MetricsConfig};
use qag_core::sim::NoiseModel;
use qag_core::train::{history_csv, Checkpoint, NoiseChange, TrainConfig, TrainState, Trainer};

mod output;
use output::OutDir;

#[derive(Parser)]
#[command(name = "qag", version, about = "Quantum Angle Generator experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// JSON config for this subcommand; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic shower dataset and its train/test split.
    DataGen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_samples: Option<usize>,
    },
    /// Train a circuit with SPSA; writes checkpoint.json and loss.csv.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: TrainFlags,
    },
    /// Generate images from a checkpoint.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        /// Noise model JSON used during sampling.
        #[arg(long)]
        noise: Option<PathBuf>,
    },
    /// Compare generated images with reference images.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        gen: Option<PathBuf>,
        #[arg(long = "ref")]
        reference: Option<PathBuf>,
    },
    /// Parameter count, expressibility and entanglement of every architecture.
    CircuitReport {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_qubits: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        /// Skip the Monte-Carlo metrics.
        #[arg(long)]
        counts_only: bool,
    },
    /// MSE as a function of noise level.
    NoiseSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: Option<SweepMode>,
        /// Trained checkpoint (inference mode).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Comma-separated subset of readout,cnot,combined.
        #[arg(long, value_delimiter = ',')]
        configs: Option<Vec<String>>,
        /// Extra fixed noise models, one point each.
        #[arg(long = "noise-file")]
        noise_files: Vec<PathBuf>,
        /// Comma-separated noise levels as fractions.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        shots: Option<u64>,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        train: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct TrainFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    arch: Option<Architecture>,
    /// Noise model JSON active from epoch 0.
    #[arg(long)]
    noise: Option<PathBuf>,
    /// Swap the noise model at an epoch, as EPOCH:FILE.json. Repeatable.
    #[arg(long = "noise-change")]
    noise_change: Vec<String>,
    /// Training CSV; the built-in synthetic split when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Resume from a checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "snake_case")]
enum SweepMode {
    #[default]
    Inference,
    Training,
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let start = Instant::now();
    let name = match cli.command {
        Command::DataGen { common, n_samples } => data_gen(common, n_samples)?,
        Command::Train { common, flags } => train(common, flags)?,
        Command::Generate { common, checkpoint, n, noise } => generate(common, checkpoint, n, noise)?,
        Command::Evaluate { common, gen, reference } => evaluate_cmd(common, gen, reference)?,
        Command::CircuitReport { common, n_qubits, samples, counts_only } => {
            report(common, n_qubits, samples, counts_only)?
        }
        Command::NoiseSweep { common, mode, checkpoint, configs, noise_files, levels, trials, epochs, shots, test, train } => {
            sweep(common, SweepFlags { mode, checkpoint, configs, noise_files, levels, trials, epochs, shots, test, train })?
        }
    };
    log::info!("{name} finished in {:.2?}", start.elapsed());
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct DataGenRun {
    synth: SynthParams,
    seed: u64,
    train_size: usize,
    test_size: usize,
}

impl Default for DataGenRun {
    fn default() -> Self {
        DataGenRun {
            synth: SynthParams::default(),
            seed: DEFAULT_DATA_SEED,
            train_size: DEFAULT_TRAIN_SIZE,
            test_size: DEFAULT_TEST_SIZE,
        }
    }
}

fn data_gen(common: Common, n_samples: Option<usize>) -> Result<&'static str> {
    let mut run: DataGenRun = load_config(common.config.as_deref())?;
    set(&mut run.seed, common.seed);
    set(&mut run.synth.n_samples, n_samples);
    let ds = synth_generate(&run.synth, run.seed)?;
    let (train, test) = split(&ds, run.train_size, run.test_size, run.seed)?;
    let mut out = OutDir::create(&common.out)?;
    out.write("dataset.csv", csv_string(&ds.samples)?)?;
    out.write("train.csv", csv_string(&train.samples)?)?;
    out.write("test.csv", csv_string(&test.samples)?)?;
    out.write_json("stats.json", &train.stats)?;
    out.finish("data-gen", run.seed, &run)?;
    Ok("data-gen")
}

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct TrainRun {
    arch: Architecture,
    n_qubits: usize,
    /// Training CSV; `None` uses the built-in synthetic split.
    data: Option<PathBuf>,
    e_max: f64,
    train: TrainConfig,
}

impl Default for TrainRun {
    fn default() -> Self {
        TrainRun { arch: Architecture::MERA_UP, n_qubits: N_PIXELS, data: None, e_max: 0.6, train: TrainConfig::default() }
    }
}

fn parse_noise_change(s: &str, n_qubits: usize) -> Result<NoiseChange> {
    let (epoch, file) = s.split_once(':').with_context(|| format!("--noise-change {s:?} is not EPOCH:FILE"))?;
    let epoch = epoch.trim().parse().with_context(|| format!("bad epoch in {s:?}"))?;
    let model = NoiseModel::load(file, n_qubits).with_context(|| format!("loading noise model {file}"))?;
    Ok(NoiseChange { epoch, model })
}

fn training_data(path: Option<&Path>, n_qubits: usize, e_max: f64) -> Result<ShowerDataset> {
    Ok(match path {
        Some(p) => load_dataset_with(p, n_qubits, e_max).with_context(|| format!("loading {}", p.display()))?,
        None => default_synthetic(DEFAULT_DATA_SEED)?.0,
    })
}

fn train(common: Common, flags: TrainFlags) -> Result<&'static str> {
    let mut run: TrainRun = load_config(common.config.as_deref())?;
    set(&mut run.arch, flags.arch);
    set(&mut run.train.epochs, flags.epochs);
    set(&mut run.train.shots, flags.shots);
    set(&mut run.train.seed, common.seed);
    if flags.data.is_some() {
        run.data = flags.data;
    }
    if let Some(p) = &flags.noise {
        run.train.noise = Some(NoiseModel::load(p, run.n_qubits).with_context(|| format!("loading {}", p.display()))?);
    }
    for s in &flags.noise_change {
        run.train.noise_schedule.push(parse_noise_change(s, run.n_qubits)?);
    }

    let spec = build_architecture(run.arch, run.n_qubits)?;
    let data = training_data(run.data.as_deref(), run.n_qubits, run.e_max)?;
    let trainer = Trainer::new(&spec, &data, &run.train)?;
    let state = match &flags.resume {
        Some(p) => {
            let ck = Checkpoint::load(p)?;
            if ck.architecture != run.arch {
                bail!("checkpoint is for {}, not {}", ck.architecture.name(), run.arch.name());
            }
            ck.state()
        }
        None => TrainState::initial(spec.n_params, run.train.seed),
    };
    let state = trainer.run(state)?;

    let mut out = OutDir::create(&common.out)?;
    let ck = Checkpoint::new(run.arch, &run.train, &state).with_encoding(trainer.encoding().clone());
    out.write_json("checkpoint.json", &ck)?;
    out.write("loss.csv", history_csv(&state.history))?;
    out.finish("train", run.train.seed, &run)?;
    Ok("train")
}

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct GenerateRun {
    checkpoint: PathBuf,
    n_images: usize,
    noise: Option<PathBuf>,
    seed: u64,
}

impl Default for GenerateRun {
    fn default() -> Self {
        GenerateRun { checkpoint: PathBuf::from("out/checkpoint.json"), n_images: DEFAULT_TEST_SIZE, noise: None, seed: 0 }
    }
}

#[derive(Serialize)]
struct BatchMeta<'a> {
    architecture: Architecture,
    n_images: usize,
    seed: u64,
    shots: u64,
    noise_label: &'a str,
}

fn checkpoint_encoding(ck: &Checkpoint) -> Result<EncodingConfig> {
    ck.encoding.clone().context("checkpoint has no encoding config; retrain with this version")
}

fn generate(common: Common, checkpoint: Option<PathBuf>, n: Option<usize>, noise: Option<PathBuf>) -> Result<&'static str> {
    let mut run: GenerateRun = load_config(common.config.as_deref())?;
    set(&mut run.checkpoint, checkpoint);
    set(&mut run.n_images, n);
    set(&mut run.seed, common.seed);
    if noise.is_some() {
        run.noise = noise;
    }
    let ck = Checkpoint::load(&run.checkpoint).with_context(|| format!("loading {}", run.checkpoint.display()))?;
    let encoding = checkpoint_encoding(&ck)?;
    let spec = build_architecture(ck.architecture, encoding.n_pixels)?;
    let model = match &run.noise {
        Some(p) => NoiseModel::load(p, spec.n_qubits)?,
        None => NoiseModel::noiseless(spec.n_qubits),
    };
    let images = generate_images(&spec.circuit, &ck.params, &encoding, run.n_images, &model, run.seed)?;
    let mut out = OutDir::create(&common.out)?;
    out.write("images.csv", csv_string(&images)?)?;
    let meta = BatchMeta {
        architecture: ck.architecture,
        n_images: run.n_images,
        seed: run.seed,
        shots: encoding.shots,
        noise_label: &model.label,
    };
    out.write_json("batch.json", &meta)?;
    out.finish("generate", run.seed, &run)?;
    Ok("generate")
}

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct EvaluateRun {
    gen: PathBuf,
    reference: PathBuf,
    e_max: f64,
    seed: u64,
}

impl Default for EvaluateRun {
    fn default() -> Self {
        EvaluateRun { gen: PathBuf::from("out/images.csv"), reference: PathBuf::from("out/test.csv"), e_max: 0.6, seed: 0 }
    }
}

fn evaluate_cmd(common: Common, gen: Option<PathBuf>, reference: Option<PathBuf>) -> Result<&'static str> {
    let mut run: EvaluateRun = load_config(common.config.as_deref())?;
    set(&mut run.gen, gen);
    set(&mut run.reference, reference);
    set(&mut run.seed, common.seed);
    let g = load_dataset(&run.gen).with_context(|| format!("loading {}", run.gen.display()))?;
    let r = load_dataset(&run.reference).with_context(|| format!("loading {}", run.reference.display()))?;
    let report = evaluate(&g.samples, &r.samples, run.e_max, run.seed)?;
    let mut out = OutDir::create(&common.out)?;
    out.write_json("report.json", &report)?;
    for (name, table) in report.csv_tables() {
        out.write(name, table)?;
    }
    out.finish("evaluate", run.seed, &run)?;
    Ok("evaluate")
}

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct ReportRun {
    n_qubits: usize,
    metrics: MetricsConfig,
    counts_only: bool,
}

impl Default for ReportRun {
    fn default() -> Self {
        ReportRun { n_qubits: N_PIXELS, metrics: MetricsConfig::default(), counts_only: false }
    }
}

#[derive(Serialize)]
struct ReportEntry {
    name: Architecture,
    n_params: usize,
    expr_score: Option<f64>,
    expr_std_error: Option<f64>,
    ent_capability: Option<f64>,
    ent_std_error: Option<f64>,
    gates: Vec<qag_core::sim::Instruction>,
}

fn report(common: Common, n_qubits: Option<usize>, samples: Option<usize>, counts_only: bool) -> Result<&'static str> {
    let mut run: ReportRun = load_config(common.config.as_deref())?;
    set(&mut run.n_qubits, n_qubits);
    set(&mut run.metrics.seed, common.seed);
    if let Some(s) = samples {
        run.metrics.n_pairs = s;
        run.metrics.n_samples = s;
    }
    run.counts_only |= counts_only;

    let mut entries = Vec::new();
    let mut csv = String::from("name,n_params,expr_score,expr_std_error,ent_capability,ent_std_error\n");
    for arch in Architecture::ALL {
        let spec = build_architecture(arch, run.n_qubits)?;
        let metrics = if run.counts_only { None } else { Some(circuit_report(&spec, &run.metrics)?) };
        let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            arch.name(),
            spec.n_params,
            f(metrics.as_ref().map(|m| m.expr_score)),
            f(metrics.as_ref().map(|m| m.expr_std_error)),
            f(metrics.as_ref().map(|m| m.ent_capability)),
            f(metrics.as_ref().map(|m| m.ent_std_error)),
        ));
        entries.push(ReportEntry {
            name: arch,
            n_params: spec.n_params,
            expr_score: metrics.as_ref().map(|m| m.expr_score),
            expr_std_error: metrics.as_ref().map(|m| m.expr_std_error),
            ent_capability: metrics.as_ref().map(|m| m.ent_capability),
            ent_std_error: metrics.as_ref().map(|m| m.ent_std_error),
            gates: spec.gates().to_vec(),
        });
    }
    let mut out = OutDir::create(&common.out)?;
    out.write_json("circuit_report.json", &entries)?;
    out.write("circuit_report.csv", csv)?;
    out.finish("circuit-report", run.metrics.seed, &run)?;
    Ok("circuit-report")
}

struct SweepFlags {
    mode: Option<SweepMode>,
    checkpoint: Option<PathBuf>,
    configs: Option<Vec<String>>,
    noise_files: Vec<PathBuf>,
    levels: Option<Vec<f64>>,
    trials: Option<usize>,
    epochs: Option<usize>,
    shots: Option<u64>,
    test: Option<PathBuf>,
    train: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct SweepRun {
    mode: SweepMode,
    checkpoint: Option<PathBuf>,
    configs: Vec<String>,
    noise_files: Vec<PathBuf>,
    levels: Vec<f64>,
    /// Test CSV; built-in synthetic test split when absent.
    test: Option<PathBuf>,
    /// Training CSV for training mode; built-in split when absent.
    train_data: Option<PathBuf>,
    arch: Architecture,
    inference: InferenceSweep,
    training: TrainingSweep,
    train: TrainConfig,
    seed: u64,
}

impl Default for SweepRun {
    fn default() -> Self {
        SweepRun {
            mode: SweepMode::Inference,
            checkpoint: None,
            configs: vec!["readout".into(), "cnot".into(), "combined".into()],
            noise_files: Vec::new(),
            levels: DEFAULT_LEVELS.to_vec(),
            test: None,
            train_data: None,
            arch: Architecture::MERA_UP,
            inference: InferenceSweep::default(),
            training: TrainingSweep::default(),
            train: TrainConfig::default(),
            seed: 0,
        }
    }
}

fn noise_configs(run: &SweepRun, n_qubits: usize) -> Result<Vec<NoiseConfig>> {
    let mut out = Vec::new();
    for c in &run.configs {
        out.push(match c.as_str() {
            "readout" => NoiseConfig::Readout,
            "cnot" => NoiseConfig::Cnot,
            "combined" => NoiseConfig::Combined,
            other => bail!("unknown noise config {other:?} (expected readout, cnot or combined)"),
        });
    }
    for p in &run.noise_files {
        let model = NoiseModel::load(p, n_qubits).with_context(|| format!("loading {}", p.display()))?;
        let label = if model.label.is_empty() {
            p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "file".into())
        } else {
            model.label.clone()
        };
        out.push(NoiseConfig::FromFile { label, model });
    }
    Ok(out)
}

fn sweep(common: Common, flags: SweepFlags) -> Result<&'static str> {
    let mut run: SweepRun = load_config(common.config.as_deref())?;
    set(&mut run.mode, flags.mode);
    set(&mut run.configs, flags.configs);
    set(&mut run.levels, flags.levels);
    set(&mut run.seed, common.seed);
    set(&mut run.training.trials, flags.trials);
    set(&mut run.train.epochs, flags.epochs);
    set(&mut run.train.shots, flags.shots);
    run.noise_files.extend(flags.noise_files);
    if flags.checkpoint.is_some() {
        run.checkpoint = flags.checkpoint;
    }
    if flags.test.is_some() {
        run.test = flags.test;
    }
    if flags.train.is_some() {
        run.train_data = flags.train;
    }
    run.inference.seed = run.seed;
    run.training.seed = run.seed;

    let (default_train, default_test) = default_synthetic(DEFAULT_DATA_SEED)?;
    let test = match &run.test {
        Some(p) => load_dataset(p).with_context(|| format!("loading {}", p.display()))?,
        None => default_test,
    };
    let rows = match run.mode {
        SweepMode::Inference => {
            let path = run.checkpoint.as_ref().context("inference sweep needs --checkpoint")?;
            let ck = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
            let encoding = checkpoint_encoding(&ck)?;
            let spec = build_architecture(ck.architecture, encoding.n_pixels)?;
            let configs = noise_configs(&run, spec.n_qubits)?;
            inference_sweep(&spec, &ck.params, &encoding, &test, &configs, &run.levels, &run.inference)?
        }
        SweepMode::Training => {
            let spec = build_architecture(run.arch, test.n_pixels())?;
            let train_set = match &run.train_data {
                Some(p) => load_dataset(p).with_context(|| format!("loading {}", p.display()))?,
                None => default_train,
            };
            let configs = noise_configs(&run, spec.n_qubits)?;
            training_sweep(&spec, &train_set, &test, &run.train, &configs, &run.levels, &run.training)?
        }
    };
    let mut out = OutDir::create(&common.out)?;
    out.write("sweep.csv", sweep_csv(&rows))?;
    out.finish("noise-sweep", run.seed, &run)?;
    Ok("noise-sweep")
}

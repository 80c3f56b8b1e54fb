//! `shiftlens` command-line interface.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage error, 3 shift detected
//! (`detect` only).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use shiftlens::datagen::{generate_dataset, load_dataset, save_dataset, split, SchemaKind, SplitRatios};
use shiftlens::detector::{detect, DetectOptions, DetectionReport, Provenance};
use shiftlens::harness::{emit_reports, load_results, run_experiment, save_results, ExperimentConfig};
use shiftlens::models::{
    fit_pca, fit_srp, load_model, save_model, train_cbm, train_task_classifier, Geometry, Method, PcaDims,
    SavedModel, TrainConfig,
};
use shiftlens::shifts::{apply_shift, ShiftSpec};
use shiftlens::stattests::TestKind;

const EXIT_RUNTIME: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_SHIFT: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "shiftlens", version, about = "Explainable dataset-shift detection")]
struct Cli {
    /// Seed for every random choice the subcommand makes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Schema {
    Sprites,
    Rooms,
}

impl From<Schema> for SchemaKind {
    fn from(s: Schema) -> Self {
        match s {
            Schema::Sprites => SchemaKind::Sprites,
            Schema::Rooms => SchemaKind::Rooms,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelKind {
    Cbm,
    Task,
    Pca,
    Srp,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TestArg {
    Ks,
    Mmd,
    Chi2,
}

impl From<TestArg> for TestKind {
    fn from(t: TestArg) -> Self {
        match t {
            TestArg::Ks => TestKind::Ks,
            TestArg::Mmd => TestKind::Mmd,
            TestArg::Chi2 => TestKind::Chi2,
        }
    }
}

#[derive(clap::Args, Debug)]
struct DetectArgs {
    /// Source dataset directory.
    #[arg(long)]
    source: PathBuf,
    /// Target dataset directory.
    #[arg(long)]
    target: PathBuf,
    /// Model directory written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// PCA, SRP, BBSDs, BBSDh, CBSDs or CBSDh; inferred from the model when omitted.
    #[arg(long)]
    method: Option<Method>,
    /// Test for continuous representations; hard methods always use chi2.
    #[arg(long, value_enum, default_value = "ks")]
    test: TestArg,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Shift applied to the target first: inline JSON or a path to a JSON file.
    #[arg(long)]
    shift: Option<String>,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
    /// Use raw chi-squared statistics for the concept shift score.
    #[arg(long)]
    raw_chi2: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset.
    GenData {
        #[arg(long, value_enum)]
        schema: Schema,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a reducer model on the training split of a dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum)]
        method: ModelKind,
        #[arg(long)]
        out: PathBuf,
        /// Maximum training epochs.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        epochs: Option<u64>,
        /// Hidden layer widths, comma separated.
        #[arg(long, value_delimiter = ',')]
        hidden: Option<Vec<usize>>,
        /// PCA explained-variance target.
        #[arg(long, default_value_t = 0.8)]
        pca_variance: f64,
        /// SRP output dimension.
        #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
        srp_dims: u64,
    },
    /// Test whether target differs from source.
    Detect(DetectArgs),
    /// Rank concepts by concept shift score.
    Explain(DetectArgs),
    /// Run an experiment grid from a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; falls back to SHIFTLENS_THREADS, then the core count.
        #[arg(long, env = "SHIFTLENS_THREADS", value_parser = clap::value_parser!(u64).range(1..))]
        threads: Option<u64>,
    },
    /// Regenerate CSV tables and charts from saved results.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_shift(arg: &str) -> shiftlens::Result<ShiftSpec> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| shiftlens::Error::InvalidArgument(format!("--shift {arg}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| shiftlens::Error::InvalidArgument(format!("--shift: {e}")))
}

fn default_method(model: &SavedModel) -> Method {
    match model.kind_name() {
        "pca" => Method::Pca,
        "srp" => Method::Srp,
        "task" => Method::BbsdSoft,
        _ => Method::CbsdHard,
    }
}

fn run_detection(args: &DetectArgs, seed: u64, explain: bool) -> shiftlens::Result<DetectionReport> {
    let model = load_model(&args.model)?;
    let method = match args.method {
        Some(m) => m,
        None if explain => Method::CbsdHard,
        None => default_method(&model),
    };
    if explain && !method.is_concept() {
        return Err(shiftlens::Error::InvalidArgument(format!("explain needs CBSDs or CBSDh, not {method}")));
    }
    let reducer = model.reducer(method)?;
    let source = load_dataset(&args.source)?;
    let mut target = load_dataset(&args.target)?;
    let shift = args.shift.as_deref().map(parse_shift).transpose()?;
    if let Some(spec) = &shift {
        let spec = spec.clone().with_seed(shiftlens::rng::derive_seed(seed, &[spec.seed]));
        target = apply_shift(&target, &spec)?;
    }
    let src = reducer.reduce(&source)?;
    let tgt = reducer.reduce(&target)?;
    let opts = DetectOptions {
        df_normalize: !args.raw_chi2,
        ..DetectOptions::default()
    }
    .with_test(args.test.into())
    .with_alpha(args.alpha)
    .with_seed(seed);
    let mut report = detect(&src, &tgt, &opts)?;
    report.provenance = Provenance {
        reducer_checksum: Some(model.checksum()),
        shift,
        seed: Some(seed),
        source: Some(args.source.display().to_string()),
        target: Some(args.target.display().to_string()),
    };
    Ok(report)
}

fn print_summary(r: &DetectionReport) {
    println!("method: {}", r.method);
    println!("test: {}", r.test.name());
    println!("samples: source {} target {}", r.sample_sizes.source, r.sample_sizes.target);
    println!("p-value: {:.6}", r.p_value);
    println!("shift detected: {} (alpha {})", if r.shift_detected { "yes" } else { "no" }, r.alpha);
}

fn print_table(r: &DetectionReport) {
    println!("{:<5} {:<14} {:>8} {:>12} {:>12} {:>9}", "rank", "concept", "css", "statistic", "p_value", "rejected");
    for (i, c) in r.per_concept.iter().flatten().enumerate() {
        println!(
            "{:<5} {:<14} {:>8.4} {:>12.4} {:>12.4e} {:>9}",
            i + 1,
            c.concept,
            c.css,
            c.statistic,
            c.p_value,
            if c.rejected { "yes" } else { "no" }
        );
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> shiftlens::Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| shiftlens::Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn train(
    dataset: &Path,
    method: ModelKind,
    out: &Path,
    seed: u64,
    epochs: Option<u64>,
    hidden: Option<Vec<usize>>,
    pca_variance: f64,
    srp_dims: u64,
) -> shiftlens::Result<()> {
    let ds = load_dataset(dataset)?;
    let sp = split(ds.len(), SplitRatios::default(), seed)?;
    let mut config = TrainConfig { seed, ..TrainConfig::default() };
    if let Some(e) = epochs {
        config.sgd.max_epochs = e as usize;
        config.label_sgd.max_epochs = e as usize;
    }
    if let Some(h) = hidden {
        config.hidden = h;
    }
    let model = match method {
        ModelKind::Pca => {
            if !(pca_variance > 0.0 && pca_variance <= 1.0) {
                return Err(shiftlens::Error::InvalidArgument(format!("--pca-variance {pca_variance} outside (0, 1]")));
            }
            let p = fit_pca(&ds, &sp.train, PcaDims::VarianceFraction(pca_variance), config.pool)?;
            eprintln!("PCA keeps {} components", p.dims());
            SavedModel::Pca(p)
        }
        ModelKind::Srp => {
            let g = Geometry::of(&ds, config.pool);
            SavedModel::Srp(fit_srp(g.input_dim(), srp_dims as usize, seed, g)?)
        }
        ModelKind::Task => {
            let m = train_task_classifier(&ds, &sp, &config)?;
            eprintln!("task validation accuracy {:.4}", m.report.val_accuracy[0]);
            SavedModel::Classifier(m)
        }
        ModelKind::Cbm => {
            let m = train_cbm(&ds, &sp, &config)?;
            for (name, acc) in m.head_names.iter().zip(&m.report.val_accuracy) {
                eprintln!("concept {name} validation accuracy {acc:.4}");
            }
            if let Some(a) = m.report.label_val_accuracy {
                eprintln!("label validation accuracy {a:.4}");
            }
            SavedModel::Classifier(m)
        }
    };
    save_model(&model, out)
}

fn run(cli: Cli) -> shiftlens::Result<u8> {
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::GenData { schema, n, out } => {
            let ds = in_pool(1, || generate_dataset(schema.into(), n as usize, seed))??;
            save_dataset(&ds, &out)?;
            eprintln!("wrote {} {} images to {}", ds.len(), ds.kind().name(), out.display());
            Ok(0)
        }
        Command::Train { dataset, method, out, epochs, hidden, pca_variance, srp_dims } => {
            in_pool(1, || train(&dataset, method, &out, seed, epochs, hidden, pca_variance, srp_dims))??;
            eprintln!("wrote model to {}", out.display());
            Ok(0)
        }
        Command::Detect(args) => {
            let report = in_pool(1, || run_detection(&args, seed, false))??;
            if args.json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print_summary(&report);
                if report.per_concept.is_some() {
                    print_table(&report);
                }
            }
            Ok(if report.shift_detected { EXIT_SHIFT } else { 0 })
        }
        Command::Explain(args) => {
            let report = in_pool(1, || run_detection(&args, seed, true))??;
            if args.json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print_table(&report);
                println!();
                print_summary(&report);
            }
            Ok(0)
        }
        Command::Experiment { config, out, threads } => {
            let mut cfg = ExperimentConfig::from_json_file(&config)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            let threads = threads.map(|t| t as usize).unwrap_or_else(|| {
                std::thread::available_parallelism().map(usize::from).unwrap_or(1)
            });
            let results = in_pool(threads, || run_experiment(&cfg))??;
            save_results(&results, &cfg.output_dir)?;
            let files = emit_reports(&results, &cfg.output_dir)?;
            eprintln!("{} cells; wrote {} files to {}", results.cells.len(), files.len() + 1, cfg.output_dir.display());
            Ok(0)
        }
        Command::Report { results, out } => {
            let res = load_results(&results)?;
            let dir = out.unwrap_or_else(|| if results.is_dir() { results.clone() } else { PathBuf::from(".") });
            let files = emit_reports(&res, &dir)?;
            eprintln!("wrote {} files to {}", files.len(), dir.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

//! The `mindgrab` command-line tool.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use mindgrab::bench::{bench, bench_csv, BenchOptions};
use mindgrab::error::CliError;
use mindgrab::pipeline::{strip, StripRequest};
use mindgrab::report;
use mindgrab::weights;
use mindgrab_core::net::NetworkSpec;
use mindgrab_core::spectral::{
    context_aggregation_schedule, discussion_schedules, kernel_spectrum, schedule_csv,
    schedule_report, NamedSchedule,
};
use mindgrab_core::train::{train_toy, SphereTask, TrainConfig};
use mindgrab_core::volume::{DEFAULT_CROP_MARGIN, DEFAULT_CROP_THRESHOLD};

const EXIT_CODE_HELP: &str = "Exit codes:
  0  success
  2  usage error
  3  file I/O or NIfTI format error
  4  weight manifest error
  5  processing error (geometry, engine, metrics, training)";

#[derive(Parser)]
#[command(
    name = "mindgrab",
    version,
    about = "Skull stripping for volumetric brain scans with a compact dilated-convolution network",
    after_help = EXIT_CODE_HELP
)]
struct Cli {
    /// Worker threads (overrides MINDGRAB_THREADS; default: logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Strip a volume: write the brain-extracted image and/or brain mask.
    Strip(StripArgs),
    /// Dilation-schedule receptive fields and kernel spectra.
    Analyze(AnalyzeArgs),
    /// Compare predicted and ground-truth masks.
    Eval(EvalArgs),
    /// Time and memory-profile the strip pipeline.
    Bench(BenchArgs),
    /// Train a small network on synthetic shapes.
    TrainToy(TrainToyArgs),
    /// Weight-file utilities.
    Weights(WeightsArgs),
}

#[derive(Args)]
struct StripArgs {
    /// Input volume (.nii or .nii.gz).
    input: PathBuf,
    /// Output path: the brain-extracted image, or the mask with --mask-only.
    #[arg(short, long)]
    output: PathBuf,
    /// Weight manifest (model.json with its model.bin sibling).
    #[arg(short, long)]
    weights: PathBuf,
    /// Also write the brain mask here.
    #[arg(short, long)]
    mask: Option<PathBuf>,
    /// Write only the mask to --output.
    #[arg(long)]
    mask_only: bool,
    /// Run inference on a head-tight crop of the conformed volume.
    #[arg(long)]
    crop: bool,
    /// Foreground threshold for the crop box, on normalized intensities.
    #[arg(long, default_value_t = DEFAULT_CROP_THRESHOLD)]
    crop_threshold: f32,
    /// Margin in voxels added around the crop box.
    #[arg(long, default_value_t = DEFAULT_CROP_MARGIN)]
    crop_margin: usize,
    /// Compute normalization percentiles over nonzero voxels only.
    #[arg(long)]
    nonzero_percentiles: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Named schedule set: `mindgrab` (the four block configurations) or
    /// `context-agg`.
    #[arg(long)]
    preset: Option<String>,
    /// Extra schedule as comma-separated dilations (repeatable).
    #[arg(long = "schedule", value_name = "D,D,...")]
    schedules: Vec<String>,
    /// Kernel size per layer.
    #[arg(long, default_value_t = 3)]
    kernel: u64,
    /// Emit a spectrum magnitude matrix for these comma-separated taps
    /// instead of the schedule table.
    #[arg(long, value_name = "T,T,...")]
    spectrum_taps: Option<String>,
    /// Dilations to tabulate in the spectrum matrix.
    #[arg(long, value_name = "D,D,...", default_value = "1,2,4,8,16")]
    spectrum_dilations: String,
    /// DFT window length.
    #[arg(long, default_value_t = 128)]
    fft_size: usize,
    /// Emit the separable 2D envelope (outer product) for the first
    /// requested dilation instead of 1D profiles.
    #[arg(long)]
    two_d: bool,
    /// Output file (default: stdout).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted mask.
    pred: Option<PathBuf>,
    /// Ground-truth mask.
    gt: Option<PathBuf>,
    /// TSV batch list: group<TAB>pred<TAB>gt per line; aggregates
    /// mean ± SD per group.
    #[arg(long)]
    batch: Option<PathBuf>,
    /// Output file (default: stdout).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Input volumes.
    inputs: Vec<PathBuf>,
    #[arg(short, long)]
    weights: PathBuf,
    /// Benchmark the cropped path.
    #[arg(long)]
    crop: bool,
    /// Benchmark both the full and cropped paths per input.
    #[arg(long)]
    compare_crop: bool,
    #[arg(long, default_value_t = DEFAULT_CROP_THRESHOLD)]
    crop_threshold: f32,
    #[arg(long, default_value_t = DEFAULT_CROP_MARGIN)]
    crop_margin: usize,
    #[arg(long)]
    nonzero_percentiles: bool,
    /// Output file (default: stdout).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct TrainToyArgs {
    /// Network preset to train (see `weights` docs; `toy` is the small
    /// single-block net).
    #[arg(long, default_value = "toy")]
    spec: String,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Manifest output path; the blob is written alongside as .bin.
    #[arg(long)]
    out: PathBuf,
    /// Synthetic grid extent per axis.
    #[arg(long, default_value_t = 24)]
    grid: usize,
    #[arg(long, default_value_t = 0.02)]
    max_lr: f64,
    #[arg(long, default_value_t = 5)]
    cycles: usize,
    #[arg(long, default_value_t = 0.3)]
    warmup: f64,
    #[arg(long, default_value_t = 1)]
    batch: usize,
    /// Per-step CSV log (default: stdout).
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct WeightsArgs {
    #[command(subcommand)]
    command: WeightsCommand,
}

#[derive(Subcommand)]
enum WeightsCommand {
    /// Summarize a weight manifest: layers, parameter count, fingerprint.
    Inspect { manifest: PathBuf },
}

fn init_threads(flag: Option<usize>) {
    let n = flag
        .or_else(|| {
            std::env::var("MINDGRAB_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0); // 0: rayon default (logical cores)
    if n > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn emit(output: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        }),
        None => {
            print!("{text}");
            std::io::stdout().flush().map_err(|source| CliError::Io {
                path: PathBuf::from("<stdout>"),
                source,
            })
        }
    }
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| CliError::Usage(format!("bad {what} entry {s:?}")))
        })
        .collect()
}

fn cmd_strip(args: StripArgs) -> Result<(), CliError> {
    let mut req = StripRequest::new(args.input, args.output, args.weights);
    req.mask_output = args.mask;
    req.mask_only = args.mask_only;
    req.crop = args.crop;
    req.crop_threshold = args.crop_threshold;
    req.crop_margin = args.crop_margin;
    req.nonzero_percentiles = args.nonzero_percentiles;
    let outcome = strip(&req)?;
    eprintln!(
        "mask: {} foreground voxels; peak activation {} bytes{}",
        outcome.mask.volume_voxels(),
        outcome.stats.peak_bytes,
        outcome
            .crop_bbox
            .map(|b| format!("; crop box {:?}", b.shape()))
            .unwrap_or_default()
    );
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    if let Some(taps_text) = &args.spectrum_taps {
        let taps: Vec<f64> = parse_list(taps_text, "tap")?;
        let dilations: Vec<usize> = parse_list(&args.spectrum_dilations, "dilation")?;
        if dilations.is_empty() {
            return Err(CliError::Usage("no spectrum dilations given".into()));
        }
        let mut out = String::new();
        if args.two_d {
            let env = kernel_spectrum(&taps, dilations[0], args.fft_size)?;
            let grid = env.grid2d();
            out.push_str(&format!(
                "# 2D spectrum magnitudes, taps [{taps_text}], dilation {}, {n}x{n}\n",
                dilations[0],
                n = args.fft_size
            ));
            for row in grid.chunks(args.fft_size) {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.9}")).collect();
                out.push_str(&cells.join(" "));
                out.push('\n');
            }
        } else {
            out.push_str(&format!(
                "# spectrum magnitudes, taps [{taps_text}], window {}; one row per dilation\n",
                args.fft_size
            ));
            for &d in &dilations {
                let env = kernel_spectrum(&taps, d, args.fft_size)?;
                let cells: Vec<String> =
                    env.magnitudes.iter().map(|v| format!("{v:.9}")).collect();
                out.push_str(&format!("d={d} {}\n", cells.join(" ")));
            }
        }
        return emit(args.output.as_ref(), &out);
    }

    let mut schedules: Vec<NamedSchedule> = Vec::new();
    match args.preset.as_deref() {
        Some("mindgrab") => schedules.extend(discussion_schedules()),
        Some("context-agg") => schedules.push(context_aggregation_schedule()),
        Some(other) => {
            return Err(CliError::Usage(format!(
                "unknown preset {other:?} (expected mindgrab or context-agg)"
            )))
        }
        None if args.schedules.is_empty() => schedules.extend(discussion_schedules()),
        None => {}
    }
    for (i, text) in args.schedules.iter().enumerate() {
        let dilations: Vec<usize> = parse_list(text, "dilation")?;
        let schedule = mindgrab_core::net::DilationSchedule::new(dilations)?;
        schedules.push(NamedSchedule::new(&format!("user{i}"), schedule));
    }
    let rows = schedule_report(&schedules, args.kernel);
    emit(args.output.as_ref(), &schedule_csv(&rows))
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    if let Some(batch) = &args.batch {
        let entries = report::parse_batch_list(batch)?;
        if entries.is_empty() {
            return Err(CliError::Usage(format!(
                "{}: no entries",
                batch.display()
            )));
        }
        let groups = report::eval_batch(&entries)?;
        return emit(args.output.as_ref(), &report::batch_csv(&groups));
    }
    let (Some(pred), Some(gt)) = (&args.pred, &args.gt) else {
        return Err(CliError::Usage(
            "eval needs PRED and GT paths (or --batch LIST)".into(),
        ));
    };
    let row = report::eval_pair(pred, gt)?;
    emit(args.output.as_ref(), &report::eval_csv(&[row]))
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let opts = BenchOptions {
        weights: args.weights,
        crop: args.crop,
        compare_crop: args.compare_crop,
        crop_threshold: args.crop_threshold,
        crop_margin: args.crop_margin,
        nonzero_percentiles: args.nonzero_percentiles,
    };
    let records = bench(&args.inputs, &opts)?;
    emit(args.output.as_ref(), &bench_csv(&records))
}

fn cmd_train_toy(args: TrainToyArgs) -> Result<(), CliError> {
    let spec = NetworkSpec::preset(&args.spec).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown spec preset {:?} (available: {})",
            args.spec,
            NetworkSpec::preset_names().join(", ")
        ))
    })?;
    let cfg = TrainConfig {
        max_lr: args.max_lr,
        total_steps: args.steps,
        cycles: args.cycles,
        pct_warmup: args.warmup,
        batch_size: args.batch,
        seed: args.seed,
        ..Default::default()
    };
    let task = SphereTask::new([args.grid; 3]);
    let (store, records) = train_toy(&spec, &cfg, &task)?;

    let mut log = String::from("step,lr,loss,dice\n");
    for r in &records {
        log.push_str(&format!(
            "{},{:.8},{:.8},{:.6}\n",
            r.step, r.lr, r.loss, r.dice
        ));
    }
    emit(args.log.as_ref(), &log)?;

    weights::save_weight_files(&spec, &store, &args.out).map_err(|source| {
        CliError::Weights {
            path: args.out.clone(),
            source,
        }
    })?;
    if let Some(last) = records.last() {
        eprintln!(
            "trained {} steps; final loss {:.6}, dice {:.4}; weights at {}",
            last.step,
            last.loss,
            last.dice,
            args.out.display()
        );
    }
    Ok(())
}

fn cmd_weights(args: WeightsArgs) -> Result<(), CliError> {
    match args.command {
        WeightsCommand::Inspect { manifest } => {
            let (man, spec, store) =
                weights::load_weight_files(&manifest).map_err(|source| CliError::Weights {
                    path: manifest.clone(),
                    source,
                })?;
            println!("format:      {}", man.format);
            println!("fingerprint: {}", man.fingerprint);
            println!("epsilon:     {}", man.epsilon);
            println!("blob:        {} ({} bytes)", man.blob_file, man.blob_bytes);
            println!("layers:      {}", spec.layers.len());
            println!("parameters:  {}", spec.count_params());
            println!("schedule:    {}", spec.dilation_schedule());
            println!();
            println!("layer  kernel  dilation  channels      bias  norm                  activation");
            for (i, l) in spec.layers.iter().enumerate() {
                println!(
                    "{:<6} {:<7} {:<9} {:>3} -> {:<3}  {:<5} {:<21} {:?}",
                    i,
                    l.kernel_size,
                    l.dilation,
                    l.in_channels,
                    l.out_channels,
                    l.has_bias,
                    format!("{:?}", l.norm),
                    l.activation
                );
            }
            let _ = store;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Strip(args) => cmd_strip(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Bench(args) => cmd_bench(args),
        Command::TrainToy(args) => cmd_train_toy(args),
        Command::Weights(args) => cmd_weights(args),
    }
}

fn main() {
    let cli = Cli::parse();
    init_threads(cli.threads);
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

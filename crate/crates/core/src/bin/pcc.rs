use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pcc_core::error::{Error, Result};
use pcc_core::harness::{self, GtVariant, OutputFormat, RunConfig, SEED_ENV};
use pcc_core::io::report;
use pcc_core::metrics::DEFAULT_IOU_THRESHOLD;
use pcc_core::synth::SyntheticSceneSpec;
use pcc_core::CorruptionKind;

/// Point-cloud corruption and detector robustness toolkit.
#[derive(Parser)]
#[command(name = "pcc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Corrupt every scene of a dataset at the configured severity levels.
    Corrupt(CorruptArgs),
    /// Score detections against ground truth for the clean and corrupted sets.
    Evaluate(EvaluateArgs),
    /// Compute CE and mCE from evaluation grids.
    Report(ReportArgs),
    /// Generate synthetic scenes with annotations.
    GenSynthetic(GenArgs),
}

#[derive(Args)]
struct CorruptArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides PCC_SEED and the config's global_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated corruption names.
    #[arg(long, value_delimiter = ',')]
    kinds: Option<Vec<CorruptionKind>>,
    /// Levels as `a-b` or a comma list.
    #[arg(long, value_parser = parse_levels)]
    levels: Option<LevelList>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    det: PathBuf,
    #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
    iou: f64,
    /// Method name recorded in the output; defaults to the detection
    /// directory name.
    #[arg(long)]
    method: Option<String>,
    /// `amodal` or `updated`.
    #[arg(long, default_value = "amodal")]
    gt_variant: GtVariant,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, num_args = 1.., required = true)]
    grids: Vec<PathBuf>,
    #[arg(long)]
    baseline: String,
    /// Corruptions averaged into mCE; defaults to all the baseline covers.
    #[arg(long, value_delimiter = ',')]
    corruptions: Option<Vec<String>>,
    #[arg(long)]
    svg: bool,
    #[arg(long)]
    csv: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    ascii: bool,
}

#[derive(Clone)]
struct LevelList(Vec<u8>);

fn parse_levels(s: &str) -> std::result::Result<LevelList, String> {
    let bad = || format!("invalid level list `{s}`");
    let mut out = Vec::new();
    for part in s.split(',') {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u8 = a.trim().parse().map_err(|_| bad())?;
                let b: u8 = b.trim().parse().map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.trim().parse().map_err(|_| bad())?),
        }
    }
    Ok(LevelList(out))
}

/// Exit status 2 for content that failed validation.
struct ValidationFailure;

fn run_corrupt(args: CorruptArgs) -> Result<Option<ValidationFailure>> {
    let mut cfg = RunConfig::load(&args.config)?;
    let env = std::env::var(SEED_ENV).ok();
    cfg.global_seed = harness::resolve_seed(args.seed, env.as_deref(), cfg.global_seed)?;
    if let Some(w) = args.workers {
        cfg.worker_count = w;
    }
    if args.kinds.is_some() || args.levels.is_some() {
        cfg.restrict(args.kinds.as_deref(), args.levels.as_ref().map(|l| l.0.as_slice()))?;
    }
    let manifest = harness::run_corrupt(&cfg)?;
    log::info!(
        "{} scenes, {} outputs, {} skipped, seed {}",
        manifest.scenes.len(),
        manifest.entries.len(),
        manifest.skipped.len(),
        manifest.global_seed
    );
    Ok((!manifest.skipped.is_empty()).then_some(ValidationFailure))
}

fn run_evaluate(args: EvaluateArgs) -> Result<Option<ValidationFailure>> {
    let method = args.method.unwrap_or_else(|| {
        args.det
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "method".into())
    });
    let result = harness::run_evaluate(&args.gt, &args.det, args.iou, &method, args.gt_variant)?;
    let text = serde_json::to_string_pretty(&result).expect("serializable") + "\n";
    match args.out {
        Some(p) => std::fs::write(&p, text).map_err(|e| Error::Io { path: p, source: e })?,
        None => print!("{text}"),
    }
    Ok(None)
}

fn run_report(args: ReportArgs) -> Result<Option<ValidationFailure>> {
    let rep = harness::build_report_from_files(&args.grids, &args.baseline, args.corruptions.as_deref())?;
    let out = args.out;
    std::fs::create_dir_all(&out).map_err(|e| Error::Io { path: out.clone(), source: e })?;
    let csv = args.csv.then(|| out.join("report.csv"));
    report::write_report(&rep, &out.join("report.json"), csv.as_deref())?;
    if args.svg {
        report::save_report_svg(&rep, &out.join("report.svg"))?;
    }
    for m in &rep.methods {
        println!("{}\tmCE {}", m.method, report::format_sig6(m.mce));
    }
    Ok(None)
}

fn run_gen(args: GenArgs) -> Result<Option<ValidationFailure>> {
    let spec: SyntheticSceneSpec = load_spec(&args.spec)?;
    let format = if args.ascii { OutputFormat::Ascii } else { OutputFormat::Binary };
    let ids = harness::gen_synthetic(&spec, &args.out, format)?;
    log::info!("wrote {} scenes to {}", ids.len(), args.out.display());
    Ok(None)
}

fn load_spec(path: &Path) -> Result<SyntheticSceneSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Corrupt(a) => run_corrupt(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Report(a) => run_report(a),
        Command::GenSynthetic(a) => run_gen(a),
    };
    match outcome {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(ValidationFailure)) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand, ValueEnum};
use keytrack::dataio::{generate_synthetic, read_boxes, SynthSpec, GROUNDTRUTH_FILE};
use keytrack::eval::{aggregate, export, score, write_result};
use keytrack::{load_sequence, run_sequence, ErrorKind, RunManifest, Sequence, TrackResult, TrackerConfig};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "keytrack", version, about = "Correlation filter tracking with keyfilter restriction and context learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track one or more sequences and write results plus a run manifest.
    Track(TrackArgs),
    /// Score result files against ground truth.
    Eval(EvalArgs),
    /// Write a synthetic fixture sequence to disk.
    Synth(SynthArgs),
    /// Track over a grid of stepsizes (and optionally gamma / s values).
    Sweep(SweepArgs),
}

#[derive(Args, Clone)]
struct Overrides {
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Keyfilter stepsize T.
    #[arg(long)]
    stepsize: Option<usize>,
    /// Keyfilter weight.
    #[arg(long)]
    gamma: Option<f64>,
    /// Context base score s; 0 disables context learning.
    #[arg(long = "base-score")]
    base_score: Option<f64>,
}

impl Overrides {
    fn resolve(&self) -> anyhow::Result<TrackerConfig> {
        let mut cfg = match &self.config {
            Some(path) => TrackerConfig::from_file(path)?,
            None => TrackerConfig::default(),
        };
        if let Some(t) = self.stepsize {
            cfg.stepsize = t;
        }
        if let Some(g) = self.gamma {
            cfg.gamma = g;
        }
        if let Some(s) = self.base_score {
            cfg.base_score = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrackArgs {
    /// Sequence directory (repeatable).
    #[arg(long = "seq", required = true)]
    seqs: Vec<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    /// Output directory.
    #[arg(long, env = "KEYTRACK_OUT", default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory holding `<name>.txt` result files.
    #[arg(long)]
    results: PathBuf,
    /// Ground truth: a directory of sequence directories, or one sequence.
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, env = "KEYTRACK_OUT", default_value = "out")]
    out: PathBuf,
    /// Also render precision and success plots.
    #[arg(long)]
    plots: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Static,
    Moving,
    BlurDistractor,
    Context,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    preset: Preset,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Override the preset's frame count.
    #[arg(long)]
    frames: Option<usize>,
    /// Destination sequence directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long = "seq", required = true)]
    seqs: Vec<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Stepsizes to try, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8")]
    stepsizes: Vec<usize>,
    /// Keyfilter weights to try; defaults to the configured value.
    #[arg(long, value_delimiter = ',')]
    gammas: Vec<f64>,
    /// Context base scores to try; defaults to the configured value.
    #[arg(long = "base-scores", value_delimiter = ',')]
    base_scores: Vec<f64>,
    #[arg(long, env = "KEYTRACK_OUT", default_value = "out")]
    out: PathBuf,
}

/// Bad invocation detected after argument parsing.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn load_all(paths: &[PathBuf]) -> anyhow::Result<Vec<Sequence>> {
    paths.iter().map(|p| Ok(load_sequence(p)?)).collect()
}

/// Tracks every sequence in parallel and writes the result files.
fn track_into(seqs: &[Sequence], cfg: &TrackerConfig, out: &Path) -> anyhow::Result<Vec<TrackResult>> {
    let results = seqs
        .par_iter()
        .map(|s| run_sequence(s, cfg))
        .collect::<keytrack::Result<Vec<_>>>()?;
    for r in &results {
        write_result(out, r)?;
    }
    Ok(results)
}

fn write_manifest(cfg: &TrackerConfig, paths: &[PathBuf], out: &Path) -> anyhow::Result<()> {
    RunManifest {
        config: cfg.clone(),
        sequences: paths.to_vec(),
        output: out.to_path_buf(),
        seed: 0,
    }
    .write(out)?;
    Ok(())
}

fn cmd_track(args: TrackArgs) -> anyhow::Result<()> {
    let cfg = args.overrides.resolve()?;
    let seqs = load_all(&args.seqs)?;
    let results = track_into(&seqs, &cfg, &args.out)?;
    write_manifest(&cfg, &args.seqs, &args.out)?;
    for r in &results {
        println!("{}: {} frames, {:.1} fps", r.name, r.boxes.len(), r.fps());
    }
    Ok(())
}

fn read_times(path: &Path) -> anyhow::Result<Vec<f64>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .with_context(|| format!("{}: bad timing {l:?}", path.display()))
        })
        .collect()
}

fn groundtruth_for(gt: &Path, name: &str) -> PathBuf {
    let nested = gt.join(name).join(GROUNDTRUTH_FILE);
    if nested.exists() {
        nested
    } else {
        gt.join(GROUNDTRUTH_FILE)
    }
}

fn cmd_eval(args: EvalArgs) -> anyhow::Result<()> {
    if !args.gt.is_dir() {
        return Err(keytrack::Error::MissingDirectory(args.gt).into());
    }
    let entries = fs::read_dir(&args.results)
        .map_err(|_| keytrack::Error::MissingDirectory(args.results.clone()))?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter_map(|f| f.strip_suffix(".txt").map(str::to_string))
        .filter(|n| !n.ends_with("_time") && n != "manifest")
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(keytrack::Error::EmptyResults.into());
    }
    let mut scores = Vec::new();
    for name in &names {
        let result = TrackResult {
            name: name.clone(),
            boxes: read_boxes(&args.results.join(format!("{name}.txt")))?,
            times: read_times(&args.results.join(format!("{name}_time.txt")))?,
        };
        let gt = read_boxes(&groundtruth_for(&args.gt, name))?;
        scores.push(score(&result, &gt)?);
    }
    let eval = aggregate(scores)?;
    export(&[], &eval, &args.out, args.plots)?;
    for s in eval.sequences.iter().chain(std::iter::once(&eval.overall)) {
        println!("{}: precision@20 {:.3}, AUC {:.3}", s.name, s.precision_20(), s.auc());
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> anyhow::Result<()> {
    let mut spec = match args.preset {
        Preset::Static => SynthSpec::static_target(args.seed),
        Preset::Moving => SynthSpec::moving_target(args.seed),
        Preset::BlurDistractor => SynthSpec::blur_distractor(args.seed),
        Preset::Context => SynthSpec::context_instance(args.seed),
    };
    if let Some(n) = args.frames {
        spec.frames = n;
    }
    let seq = generate_synthetic(&spec)?;
    seq.save(&args.out)?;
    println!("wrote {} frames to {}", seq.len(), args.out.display());
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> anyhow::Result<()> {
    if args.stepsizes.is_empty() {
        return Err(usage("sweep needs at least one stepsize"));
    }
    let base = Overrides {
        config: args.config.clone(),
        stepsize: None,
        gamma: None,
        base_score: None,
    }
    .resolve()?;
    let gammas = if args.gammas.is_empty() { vec![base.gamma] } else { args.gammas.clone() };
    let scores = if args.base_scores.is_empty() { vec![base.base_score] } else { args.base_scores.clone() };
    let seqs = load_all(&args.seqs)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let summary_path = args.out.join("sweep.csv");
    let mut summary = csv::Writer::from_path(&summary_path)?;
    summary.write_record(["stepsize", "gamma", "base_score", "sequence", "frames", "precision_20", "auc", "fps"])?;
    for &t in &args.stepsizes {
        for &g in &gammas {
            for &s in &scores {
                let cfg = TrackerConfig {
                    stepsize: t,
                    gamma: g,
                    base_score: s,
                    ..base.clone()
                };
                cfg.validate()?;
                let dir = args.out.join(format!("T{t}_gamma{g}_s{s}"));
                // one sequence at a time so fps is not skewed by sharing cores
                for seq in &seqs {
                    let results = track_into(std::slice::from_ref(seq), &cfg, &dir)?;
                    let r = &results[0];
                    let sc = score(r, &seq.groundtruth)?;
                    let fps = r.fps();
                    summary.write_record([
                        t.to_string(),
                        g.to_string(),
                        s.to_string(),
                        r.name.clone(),
                        r.boxes.len().to_string(),
                        sc.precision_20().to_string(),
                        sc.auc().to_string(),
                        format!("{fps:.3}"),
                    ])?;
                    println!("T={t} gamma={g} s={s} {}: precision@20 {:.3}, {fps:.1} fps", r.name, sc.precision_20());
                }
                write_manifest(&cfg, &args.seqs, &dir)?;
            }
        }
    }
    summary.flush()?;
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<keytrack::Error>().map(|e| e.kind()) {
        Some(ErrorKind::Usage) => 1,
        Some(ErrorKind::Numeric) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Track(a) => cmd_track(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

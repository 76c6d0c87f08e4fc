mod plots;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use highlights::config::{parse_modalities, PipelineConfig};
use highlights::evalbench::{
    generate_synthetic_stream, highlights_over_time, load_annotations, read_count_rows, read_durations, render_ablation_table,
    render_fraction_table, run_ablation, summarize_categories, AblationSpec, AblationTruth, FractionRow,
};
use highlights::ingest::RegionSpec;
use highlights::pipeline::{load_inputs, load_synthetic_spec, run_pipeline};
use highlights::{Error, Result};
use log::info;

/// Unsupervised highlight detection for game live streams.
#[derive(Parser)]
#[command(name = "highlights", version)]
struct Cli {
    /// Log more (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline on one recording or synthetic stream.
    Run(RunArgs),
    /// Repeat the pipeline on modality subsets and tabulate the results.
    Ablate(AblateArgs),
    /// Category totals, fractions and temporal distribution of annotated clips.
    Summarize(SummarizeArgs),
    /// Render the error series of a finished run as SVG.
    Plot(PlotArgs),
    /// Write a synthetic recording with planted events.
    Synth(SynthArgs),
}

#[derive(Args)]
struct PipelineArgs {
    /// TOML config of dotted keys.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Video container or directory of frame images.
    #[arg(long)]
    video: Option<PathBuf>,
    /// Separate audio file.
    #[arg(long)]
    audio: Option<PathBuf>,
    /// Frame rate of an image-sequence directory.
    #[arg(long)]
    fps: Option<f64>,
    /// Synthetic stream spec used instead of a recording.
    #[arg(long, conflicts_with = "video")]
    synthetic: Option<PathBuf>,
    /// Face-cam rectangle as x,y,width,height.
    #[arg(long, value_parser = parse_region)]
    region: Option<RegionSpec>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of face,game,audio.
    #[arg(long)]
    modalities: Option<String>,
    /// Fraction of timesteps taken as apexes.
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override any config key, e.g. `--set fusion.epochs=20`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Skip the SVG plots.
    #[arg(long)]
    no_plots: bool,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Subsets separated by `;`, e.g. `face,game,audio;face;audio`.
    #[arg(long)]
    subsets: Option<String>,
    /// Annotation CSV used to label the clips of each subset.
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// CSV with a `time_s` column of ground-truth events.
    #[arg(long)]
    events: Option<PathBuf>,
    /// Matching tolerance in seconds for event scoring.
    #[arg(long, default_value_t = 2.0)]
    tolerance: f64,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Annotation CSV (video_id,start_s,end_s,category).
    #[arg(long)]
    annotations: PathBuf,
    /// CSV of video_id,duration_s for the temporal histogram.
    #[arg(long)]
    durations: Option<PathBuf>,
    /// Per-subset category counts (label,funny,action,interaction,none).
    #[arg(long)]
    counts: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    bins: usize,
    /// Directory for the CSV reports.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Output directory of a previous `run`.
    run_dir: PathBuf,
    /// Where to write the SVGs (defaults to RUN_DIR/plots).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Stream spec (TOML); defaults to the built-in four-event stream.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Length in seconds.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long, default_value = "synthetic")]
    out: PathBuf,
}

fn parse_region(s: &str) -> std::result::Result<RegionSpec, String> {
    let v = s
        .split(',')
        .map(|p| p.trim().parse::<u32>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    match v[..] {
        [x, y, width, height] => Ok(RegionSpec { x, y, width, height }),
        _ => Err("expected x,y,width,height".into()),
    }
}

impl PipelineArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        for pair in &self.overrides {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{pair}`")))?;
            config.set(key.trim(), value.trim())?;
        }
        if let Some(v) = &self.video {
            config.input.video = Some(v.clone());
            config.input.synthetic = None;
        }
        if let Some(s) = &self.synthetic {
            config.input.synthetic = Some(s.clone());
            config.input.video = None;
        }
        if self.audio.is_some() {
            config.input.audio = self.audio.clone();
        }
        if self.fps.is_some() {
            config.input.fps = self.fps;
        }
        if self.region.is_some() {
            config.ingest.region = self.region;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(list) = &self.modalities {
            config.modalities = parse_modalities(list)?;
        }
        if let Some(f) = self.fraction {
            config.clipper.fraction = f;
        }
        if let Some(out) = &self.out {
            config.out = out.clone();
        }
        Ok(config)
    }
}

fn run(args: RunArgs) -> Result<()> {
    let config = args.pipeline.config().map_err(|e| e.in_stage("config"))?;
    let outcome = run_pipeline(&config)?;
    println!("video:    {}", outcome.manifest.video_id);
    println!("apexes:   {}", outcome.apexes.indices.len());
    println!("clips:    {}", outcome.clips.clips.len());
    for clip in &outcome.clips.clips {
        println!("  {:>9.2} - {:>9.2} s  ({} apexes)", clip.start, clip.end, clip.apexes.len());
    }
    if !args.no_plots {
        let report = plots::emit_plots(&outcome.dir, &outcome.dir.join("plots")).map_err(|e| e.in_stage("plot"))?;
        info!("{} plots written", report.written.len());
    }
    println!("output:   {}", outcome.dir.display());
    Ok(())
}

fn read_event_times(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::Reader::from_path(path)?;
    let col = reader
        .headers()?
        .iter()
        .position(|h| h == "time_s")
        .ok_or_else(|| Error::Parse(format!("{}: no time_s column", path.display())))?;
    let mut times = Vec::new();
    for record in reader.records() {
        let record = record?;
        let v = &record[col];
        times.push(v.parse().map_err(|e| Error::Parse(format!("`{v}`: {e}")))?);
    }
    Ok(times)
}

fn ablate(args: AblateArgs) -> Result<()> {
    let config = args.pipeline.config().map_err(|e| e.in_stage("config"))?;
    config.validate().map_err(|e| e.in_stage("config"))?;
    let subsets = match &args.subsets {
        Some(list) => list
            .split(';')
            .map(|s| parse_modalities(s).map(|m| AblationSpec::new(&m)))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.in_stage("config"))?,
        None => AblationSpec::standard(),
    };
    let mut all = config.clone();
    all.modalities = subsets.iter().flat_map(|s| s.modalities.iter().copied()).collect();
    all.modalities.sort();
    all.modalities.dedup();
    let inputs = load_inputs(&all).map_err(|e| e.in_stage("ingest"))?;
    let events = match (&args.events, &config.input.synthetic) {
        (Some(path), _) => Some(read_event_times(path).map_err(|e| e.in_stage("ablate"))?),
        (None, Some(spec)) => Some(load_synthetic_spec(spec)?.event_times()),
        (None, None) => None,
    };
    let annotations = args
        .annotations
        .as_deref()
        .map(load_annotations)
        .transpose()
        .map_err(|e| e.in_stage("ablate"))?;
    let truth = AblationTruth {
        events,
        tolerance: args.tolerance,
        annotations,
    };
    let rows = run_ablation(&inputs, &config, &subsets, &truth)?;
    let table = render_ablation_table(&rows);
    std::fs::create_dir_all(&config.out)?;
    let path = config.out.join("ablation.csv");
    std::fs::write(&path, &table)?;
    print!("{table}");
    println!("written to {}", path.display());
    Ok(())
}

fn summarize(args: SummarizeArgs) -> Result<()> {
    let annotations = load_annotations(&args.annotations)?;
    let summary = summarize_categories(&annotations);
    let categories = summary.to_csv();
    println!("{categories}");
    let mut rows = vec![FractionRow::from_counts("annotated", &summary.total)];
    if let Some(path) = &args.counts {
        let counted = read_count_rows(std::fs::File::open(path)?)?;
        rows.extend(counted.iter().map(|(label, c)| FractionRow::from_counts(label.clone(), c)));
    }
    let fractions = render_fraction_table(&rows);
    println!("{fractions}");
    let histogram = match &args.durations {
        Some(path) => {
            let durations = read_durations(std::fs::File::open(path)?)?;
            let clips: Vec<_> = annotations.iter().map(|a| (a.video_id.clone(), a.to_clip())).collect();
            let h = highlights_over_time(&clips, &durations, args.bins)?.to_csv();
            println!("{h}");
            Some(h)
        }
        None => None,
    };
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out)?;
        std::fs::write(out.join("categories.csv"), categories)?;
        std::fs::write(out.join("fractions.csv"), fractions)?;
        if let Some(h) = histogram {
            std::fs::write(out.join("histogram.csv"), h)?;
        }
    }
    Ok(())
}

fn plot(args: PlotArgs) -> Result<()> {
    let out = args.out.unwrap_or_else(|| args.run_dir.join("plots"));
    let report = plots::emit_plots(&args.run_dir, &out).map_err(|e| e.in_stage("plot"))?;
    for p in &report.written {
        println!("{}", p.display());
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut spec = match &args.spec {
        Some(path) => load_synthetic_spec(path)?,
        None => Default::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(d) = args.duration {
        spec.duration_s = d;
        spec.events.retain(|e| e.time_s < d);
    }
    let stream = generate_synthetic_stream(&spec).map_err(|e| e.in_stage("synth"))?;
    let files = stream.write_recording(&args.out).map_err(|e| e.in_stage("synth"))?;
    let r = files.region;
    println!("frames: {}", files.frames.display());
    println!("audio:  {}", files.audio.display());
    println!("events: {}", files.events.display());
    println!(
        "try: highlights run --video {} --fps {} --audio {} --region {},{},{},{} --set ingest.frame_size={} --set vision.architecture=\"compact\"",
        files.frames.display(),
        spec.rate,
        files.audio.display(),
        r.x,
        r.y,
        r.width,
        r.height,
        spec.frame_size
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Ablate(a) => ablate(a),
        Command::Summarize(a) => summarize(a).map_err(|e| e.in_stage("summarize")),
        Command::Plot(a) => plot(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use homview_core::association::TrackerConfig;
use homview_core::fhe::{DeriveMode, HomographyGraph, HomographySource};
use homview_core::io::{self, RunConfig};
use homview_core::metrics::evaluate;
use homview_core::pipeline::{ablate_h, build_graph, run_tracker, AblationRow};
use homview_core::simulator::{generate_sequence, Scenario};
use homview_core::Execution;

#[derive(Parser)]
#[command(name = "homview", version, about = "Homography-driven multi-object tracking for moving cameras")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic sequence bundle.
    Simulate(SimulateArgs),
    /// Estimate or query homography caches.
    #[command(subcommand)]
    Homog(HomogCommand),
    /// Track detections and write MOT-format results.
    Track(TrackArgs),
    /// Evaluate predictions against ground truth.
    Eval(EvalArgs),
    /// Sweep the keyframe interval on a simulated sequence.
    #[command(name = "ablate-h")]
    AblateH(AblateArgs),
}

#[derive(Args)]
struct SceneArgs {
    #[arg(long, value_parser = parse_scenario)]
    scenario: Option<Scenario>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    objects: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-corner detection noise in pixels.
    #[arg(long)]
    det_noise: Option<f64>,
    /// Probability a visible object is missed.
    #[arg(long)]
    dropout: Option<f64>,
    /// Expected false positives per frame.
    #[arg(long)]
    fp_rate: Option<f64>,
    /// Keypoint pairs per frame pair.
    #[arg(long)]
    corr_count: Option<usize>,
    #[arg(long)]
    corr_outliers: Option<f64>,
    #[arg(long)]
    emb_noise: Option<f64>,
    /// Config file applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Intervals whose correspondence pairs are written, e.g. 1,10.
    #[arg(long, value_parser = parse_list)]
    corr_intervals: Option<IntervalList>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum HomogCommand {
    /// Build the keyframe graph from correspondence files and write a cache.
    Estimate(EstimateArgs),
    /// Print H(a, b) from a cache.
    Derive(DeriveArgs),
}

#[derive(Args)]
struct FheArgs {
    /// Keyframe interval.
    #[arg(long)]
    h: Option<usize>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<DeriveMode>,
    /// RANSAC seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    corr: PathBuf,
    #[command(flatten)]
    fhe: FheArgs,
    /// Number of frames; defaults to the highest frame with correspondences.
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DeriveArgs {
    #[arg(long)]
    cache: PathBuf,
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pair: Vec<usize>,
}

#[derive(Args)]
struct TrackArgs {
    #[arg(long)]
    det: PathBuf,
    #[arg(long)]
    emb: Option<PathBuf>,
    /// Precomputed homography cache; wins over --corr.
    #[arg(long)]
    homog: Option<PathBuf>,
    /// Correspondence directory for on-the-fly estimation.
    #[arg(long)]
    corr: Option<PathBuf>,
    #[command(flatten)]
    fhe: FheArgs,
    #[arg(long)]
    vcil: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    scene: SceneArgs,
    #[arg(long, value_parser = parse_list, default_value = "1,5,10,20,40")]
    h_list: IntervalList,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<DeriveMode>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse().map_err(|e: homview_core::Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<DeriveMode, String> {
    s.parse()
}

/// Comma-separated keyframe intervals.
#[derive(Clone, Debug)]
struct IntervalList(Vec<usize>);

fn parse_list(s: &str) -> Result<IntervalList, String> {
    let v: Vec<usize> = s
        .split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| x.trim().parse::<usize>().map_err(|_| format!("invalid interval `{x}`")))
        .collect::<Result<_, _>>()?;
    if v.is_empty() {
        return Err("list is empty".into());
    }
    if v.contains(&0) {
        return Err("intervals must be >= 1".into());
    }
    Ok(IntervalList(v))
}

enum Failure {
    Usage(String),
    Data(homview_core::Error),
}

impl From<homview_core::Error> for Failure {
    fn from(e: homview_core::Error) -> Self {
        Failure::Data(e)
    }
}

type CliResult = Result<(), Failure>;

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    Ok(match path {
        Some(p) => io::read_config(p)?,
        None => RunConfig::default(),
    })
}

impl SceneArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<(), Failure> {
        let s = &mut cfg.scenario;
        if let Some(v) = self.scenario {
            s.scenario = v;
        }
        if let Some(v) = self.frames {
            s.frames = v;
        }
        if let Some(v) = self.objects {
            s.objects = v;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.det_noise {
            s.det_noise_sigma = v;
        }
        if let Some(v) = self.dropout {
            s.det_dropout = v;
        }
        if let Some(v) = self.fp_rate {
            s.false_positive_rate = v;
        }
        if let Some(v) = self.corr_count {
            s.correspondence_count = v;
        }
        if let Some(v) = self.corr_outliers {
            s.correspondence_outlier_rate = v;
        }
        if let Some(v) = self.emb_noise {
            s.embedding_view_noise = v;
        }
        s.validate().map_err(|e| Failure::Usage(e.to_string()))
    }
}

impl FheArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(h) = self.h {
            cfg.fhe.interval = h;
        }
        if let Some(m) = self.mode {
            cfg.fhe.mode = m;
        }
        if let Some(s) = self.seed {
            cfg.fhe.ransac.seed = s;
        }
    }
}

fn simulate(args: SimulateArgs) -> CliResult {
    let mut cfg = load_config(args.scene.config.as_deref())?;
    if let Some(list) = args.corr_intervals {
        cfg.scenario.corr_intervals = list.0;
    }
    args.scene.apply(&mut cfg)?;
    let bundle = generate_sequence(&cfg.scenario)?;
    io::write_bundle(&bundle, &args.out)?;
    let dets: usize = bundle.detections.values().map(Vec::len).sum();
    let gt: usize = bundle.gt.values().map(Vec::len).sum();
    emit(&format!(
        "simulated {} frames={} objects={} gt_boxes={gt} detections={dets} corr_pairs={} seed={} -> {}\n",
        bundle.config.scenario,
        bundle.frame_count(),
        bundle.config.objects,
        bundle.correspondences.len(),
        bundle.config.seed,
        args.out.display()
    ));
    Ok(())
}

fn estimate(args: EstimateArgs) -> CliResult {
    let mut cfg = load_config(args.config.as_deref())?;
    args.fhe.apply(&mut cfg);
    let corr = io::read_correspondence_dir(&args.corr)?;
    let frames = match args.frames {
        Some(f) => f,
        None => corr.keys().map(|&(a, b)| a.max(b)).max().unwrap_or(0),
    };
    let start = Instant::now();
    let graph = HomographyGraph::estimate(frames, &cfg.fhe, &corr)?;
    io::write_homography_cache(&graph.export_entries(&[])?, &args.out)?;
    emit(&format!(
        "estimated frames={frames} h={} mode={} keyframes={} in {:.1} ms -> {}\n",
        cfg.fhe.interval,
        cfg.fhe.mode,
        graph.direct_entries().len() + 1,
        start.elapsed().as_secs_f64() * 1e3,
        args.out.display()
    ));
    Ok(())
}

fn derive(args: DeriveArgs) -> CliResult {
    let graph = io::read_homography_cache(&args.cache)?;
    let h = graph.between(args.pair[0], args.pair[1])?;
    let cells: Vec<String> = h.to_row_major().iter().map(|v| v.to_string()).collect();
    emit(&format!("{}\n", cells.join(" ")));
    Ok(())
}

fn track(args: TrackArgs) -> CliResult {
    if args.homog.is_none() && args.corr.is_none() {
        return Err(Failure::Usage("one of --homog or --corr is required".into()));
    }
    let mut cfg = load_config(args.config.as_deref())?;
    args.fhe.apply(&mut cfg);
    if args.vcil {
        cfg.tracker.use_vcil = true;
    }
    let embeddings = match &args.emb {
        Some(p) => Some(io::read_embeddings(p)?),
        None => {
            log::warn!("no --emb given: tracking on HMF cost alone (iou_weight = 1.0)");
            cfg.tracker.iou_weight = 1.0;
            None
        }
    };
    let records = io::read_mot(&args.det)?;
    let detections = io::detections_from_records(&records, embeddings.as_ref())?;
    let mut frames = detections.keys().next_back().copied().unwrap_or(0);

    let hom_start = Instant::now();
    let graph: Box<dyn HomographySource> = match (&args.homog, &args.corr) {
        (Some(cache), corr) => {
            if corr.is_some() {
                log::warn!("both --homog and --corr given: using the cache");
            }
            let g = io::read_homography_cache(cache)?;
            frames = frames.max(g.frame_count());
            Box::new(g)
        }
        (None, Some(dir)) => {
            let corr = io::read_correspondence_dir(dir)?;
            frames = frames.max(corr.keys().map(|&(a, b)| a.max(b)).max().unwrap_or(0));
            let (g, _) = build_graph(frames, &cfg.fhe, &corr, Execution::default())?;
            Box::new(g)
        }
        (None, None) => unreachable!("checked above"),
    };
    let homography_ms = hom_start.elapsed().as_secs_f64() * 1e3;
    if frames == 0 {
        return Err(Failure::Data(homview_core::Error::InvalidFrameCount(0)));
    }
    let tracker_cfg: TrackerConfig = cfg.tracker.clone();
    let (pred, assoc_ms) = run_tracker(frames, &detections, graph.as_ref(), &tracker_cfg, Execution::default())?;
    io::write_mot(&io::records_from_boxes(&pred), &args.out)?;
    let ids: std::collections::BTreeSet<i64> = pred.values().flatten().map(|b| b.id).collect();
    let total_ms = hom_start.elapsed().as_secs_f64() * 1e3;
    emit(&format!(
        "tracked frames={frames} tracks={} fps={:.1} homography_ms={homography_ms:.1} association_ms={assoc_ms:.1} total_ms={total_ms:.1} -> {}\n",
        ids.len(),
        frames as f64 / (assoc_ms / 1e3).max(1e-9),
        args.out.display()
    ));
    Ok(())
}

fn eval(args: EvalArgs) -> CliResult {
    if !(args.iou > 0.0 && args.iou <= 1.0) {
        return Err(Failure::Usage(format!("--iou must be in (0, 1], got {}", args.iou)));
    }
    let gt = io::records_to_boxes(&io::read_mot(&args.gt)?)?;
    let pred = io::records_to_boxes(&io::read_mot(&args.pred)?)?;
    let report = evaluate(&gt, &pred, args.iou)?;
    emit(&report.table());
    emit(&report.key_values());
    Ok(())
}

fn ablate(args: AblateArgs) -> CliResult {
    let mut cfg = load_config(args.scene.config.as_deref())?;
    if args.scene.scenario.is_none() && args.scene.config.is_none() {
        cfg.scenario.scenario = Scenario::Mixed;
    }
    args.scene.apply(&mut cfg)?;
    if let Some(m) = args.mode {
        cfg.fhe.mode = m;
    }
    // Pairs are generated on demand by the sweep itself.
    cfg.scenario.corr_intervals = vec![args.h_list.0[0]];
    let bundle = generate_sequence(&cfg.scenario)?;
    let rows = ablate_h(&bundle, &args.h_list.0, &cfg.fhe, &cfg.tracker, cfg.eval_iou)?;
    let mut csv = String::from(AblationRow::CSV_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.csv());
        csv.push('\n');
    }
    std::fs::write(&args.out, &csv)
        .map_err(|e| Failure::Data(homview_core::Error::Io { path: args.out.clone(), source: e }))?;
    emit(&csv);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Homog(HomogCommand::Estimate(a)) => estimate(a),
        Command::Homog(HomogCommand::Derive(a)) => derive(a),
        Command::Track(a) => track(a),
        Command::Eval(a) => eval(a),
        Command::AblateH(a) => ablate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use clipcurate::catalog::{scan, stats, Stage};
use clipcurate::corpus::write_corpus;
use clipcurate::model::{AnnotationMode, GoodnessMatrix, Validate};
use clipcurate::pipeline::{run_stages, PipelineConfig, PipelineError, RunOptions, RunSummary, MANIFEST_FILE};
use clipcurate::teacher_pick::pick_report;
use clipcurate_server::{system_clock, ServiceOptions, ServiceState};

#[derive(Parser)]
#[command(name = "clipcurate", version, about = "Split, caption and curate video clips")]
struct Cli {
    /// Pipeline configuration (TOML). Without one, mock backends are used.
    #[arg(long, global = true, env = "CLIPCURATE_CONFIG")]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Per-run overrides of configuration keys, named after the keys.
#[derive(Args, Default)]
struct Overrides {
    #[arg(
        long = "cutscene_threshold",
        alias = "cutscene-threshold",
        global = true,
        env = "CLIPCURATE_CUTSCENE_THRESHOLD"
    )]
    cutscene_threshold: Option<f64>,
    #[arg(
        long = "min_scene_len_frames",
        alias = "min-scene-len-frames",
        global = true,
        env = "CLIPCURATE_MIN_SCENE_LEN_FRAMES"
    )]
    min_scene_len_frames: Option<u32>,
    #[arg(
        long = "artificial_cut_seconds",
        alias = "artificial-cut-seconds",
        global = true,
        env = "CLIPCURATE_ARTIFICIAL_CUT_SECONDS"
    )]
    artificial_cut_seconds: Option<f64>,
    #[arg(long = "consistency_max", alias = "consistency-max", global = true, env = "CLIPCURATE_CONSISTENCY_MAX")]
    consistency_max: Option<f64>,
    #[arg(long = "stitch_max", alias = "stitch-max", global = true, env = "CLIPCURATE_STITCH_MAX")]
    stitch_max: Option<f64>,
    #[arg(long = "motion_min", alias = "motion-min", global = true, env = "CLIPCURATE_MOTION_MIN")]
    motion_min: Option<f64>,
    #[arg(long = "dedup_min", alias = "dedup-min", global = true, env = "CLIPCURATE_DEDUP_MIN")]
    dedup_min: Option<f64>,
    #[arg(long = "min_clip_seconds", alias = "min-clip-seconds", global = true, env = "CLIPCURATE_MIN_CLIP_SECONDS")]
    min_clip_seconds: Option<f64>,
    #[arg(long = "max_clip_seconds", alias = "max-clip-seconds", global = true, env = "CLIPCURATE_MAX_CLIP_SECONDS")]
    max_clip_seconds: Option<f64>,
    #[arg(long = "trim_fraction", alias = "trim-fraction", global = true, env = "CLIPCURATE_TRIM_FRACTION")]
    trim_fraction: Option<f64>,
    #[arg(long, global = true, env = "CLIPCURATE_GATE")]
    gate: Option<f64>,
    #[arg(long, global = true, env = "CLIPCURATE_SEED")]
    seed: Option<u64>,
    #[arg(long = "job_id", alias = "job-id", global = true, env = "CLIPCURATE_JOB_ID")]
    job_id: Option<String>,
}

#[derive(Args)]
struct JobArgs {
    /// Job directory holding stage outputs and the checkpoint.
    #[arg(long, env = "CLIPCURATE_JOB")]
    job: PathBuf,
    /// Source containers or directories of them.
    inputs: Vec<PathBuf>,
    /// Sources processed concurrently; 0 uses every core.
    #[arg(long, default_value_t = 0, env = "CLIPCURATE_WORKERS")]
    workers: usize,
    #[arg(long)]
    skip_health: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    EveryGood,
    BestCaption,
}

#[derive(Subcommand)]
enum Command {
    /// Sources to clip records.
    Split(JobArgs),
    /// Kept clips to caption candidates.
    Caption(JobArgs),
    /// Candidates to the manifest.
    Select(JobArgs),
    /// Split, caption and select with checkpoints.
    RunAll(JobArgs),
    /// Greedy teacher subset from a goodness matrix (JSON).
    PickTeachers {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Manifest statistics.
    Stats {
        /// A manifest file or a job directory.
        manifest: PathBuf,
        #[arg(long, default_value_t = 20)]
        top_k: usize,
        /// One JSON object per metric instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Annotation service over a captioned job.
    Serve {
        #[command(flatten)]
        job: JobArgs,
        #[arg(long, default_value = "127.0.0.1:8080", env = "CLIPCURATE_ADDR")]
        addr: String,
        #[arg(long, value_enum, default_value_t = Mode::BestCaption)]
        mode: Mode,
        #[arg(long, default_value_t = 11)]
        page_size: usize,
        #[arg(long, default_value_t = 1)]
        annotators_per_task: usize,
        #[arg(long, default_value_t = clipcurate::annotation::DEFAULT_LEASE_TTL_MS)]
        lease_ttl_ms: u64,
    },
    /// Writes the synthetic source corpus.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[arg(long = "fixture_seed", default_value_t = 7)]
        fixture_seed: u64,
    },
    /// Prints the effective configuration.
    Config,
}

struct Failure {
    kind: &'static str,
    message: String,
    code: u8,
}

impl Failure {
    fn new(kind: &'static str, message: impl ToString) -> Self {
        Self { kind, message: message.to_string(), code: 2 }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let kind = match &e {
            PipelineError::Config(_) => "config",
            PipelineError::Unhealthy(_) => "unhealthy_backends",
            PipelineError::NoSources => "missing_inputs",
            PipelineError::Ingest { .. } | PipelineError::Sidecar { .. } => "ingest",
            PipelineError::Catalog(_) => "catalog",
            _ => "pipeline",
        };
        Failure::new(kind, e)
    }
}

fn effective_config(cli: &Cli) -> Result<PipelineConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p).map_err(|e| Failure::new("config", e))?,
        None => PipelineConfig::mock(),
    };
    let o = &cli.overrides;
    let s = &mut cfg.splitter;
    macro_rules! set {
        ($($f:ident),*) => { $( if let Some(v) = o.$f { s.$f = v; } )* };
    }
    set!(
        cutscene_threshold,
        min_scene_len_frames,
        artificial_cut_seconds,
        consistency_max,
        stitch_max,
        motion_min,
        dedup_min,
        min_clip_seconds,
        max_clip_seconds,
        trim_fraction
    );
    if let Some(g) = o.gate {
        cfg.gate = g;
    }
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(id) = &o.job_id {
        cfg.job_id = id.clone();
    }
    cfg.validate().map_err(|e| Failure::new("config", e))?;
    Ok(cfg)
}

fn dump_config(cfg: &PipelineConfig) {
    eprintln!("# effective configuration (hash {})", cfg.config_hash());
    for line in cfg.to_toml_string().lines() {
        eprintln!("#   {line}");
    }
}

fn run_job(cfg: &PipelineConfig, args: &JobArgs, stages: &[Stage]) -> Result<RunSummary, Failure> {
    if args.inputs.is_empty() {
        return Err(Failure::new("missing_inputs", "no input sources given"));
    }
    let opts = RunOptions { workers: args.workers, skip_health: args.skip_health, ..Default::default() };
    Ok(run_stages(cfg, &args.inputs, &args.job, stages, &opts)?)
}

fn manifest_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(MANIFEST_FILE)
    } else {
        p.to_owned()
    }
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    match &cli.command {
        Command::Fixtures { out, count, fixture_seed } => {
            let paths = write_corpus(out, *count, *fixture_seed).map_err(|e| Failure::new("io", e))?;
            println!("{}", json!({ "written": paths.len(), "dir": out }));
            Ok(0)
        }
        Command::PickTeachers { matrix, k } => {
            let text = std::fs::read_to_string(matrix).map_err(|e| Failure::new("missing_inputs", e))?;
            let m: GoodnessMatrix = serde_json::from_str(&text).map_err(|e| Failure::new("bad_matrix", e))?;
            let k = match k {
                Some(k) => *k,
                None => effective_config(cli)?.k,
            };
            let report = pick_report(&m, k).map_err(|e| Failure::new("bad_matrix", e))?;
            println!("{}", serde_json::to_string(&report).expect("report serializes"));
            Ok(0)
        }
        Command::Stats { manifest, top_k, json } => {
            let records = scan(&manifest_path(manifest)).map_err(|e| Failure::new("catalog", e))?;
            let bad: Vec<_> = records.iter().filter(|r| !r.validate().is_empty()).map(|r| r.clip_id.clone()).collect();
            let roster: Vec<String> = effective_config(cli)?.roster.into_iter().map(|t| t.backend_id).collect();
            let report = stats(&records, *top_k, &roster).map_err(|e| Failure::new("catalog", e))?;
            if *json {
                for line in report.machine_lines() {
                    println!("{line}");
                }
            } else {
                print!("{}", report.render_text());
            }
            if bad.is_empty() {
                Ok(0)
            } else {
                Err(Failure { kind: "validation", message: format!("invalid records: {bad:?}"), code: 1 })
            }
        }
        Command::Config => {
            let cfg = effective_config(cli)?;
            print!("{}", cfg.to_toml_string());
            Ok(0)
        }
        Command::Serve { job, addr, mode, page_size, annotators_per_task, lease_ttl_ms } => {
            let cfg = effective_config(cli)?;
            dump_config(&cfg);
            let opts = ServiceOptions {
                mode: match mode {
                    Mode::EveryGood => AnnotationMode::EveryGood,
                    Mode::BestCaption => AnnotationMode::BestCaption,
                },
                page_size: *page_size,
                annotators_per_task: *annotators_per_task,
                lease_ttl_ms: *lease_ttl_ms,
                seed: cfg.seed,
            };
            let roster = cfg.roster.iter().map(|t| t.backend_id.clone()).collect();
            let state = ServiceState::from_job(&job.job, &job.inputs, roster, opts, system_clock())
                .map_err(|e| Failure::new("serve", e))?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::new("io", e))?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                eprintln!("listening on {}", listener.local_addr()?);
                clipcurate_server::serve(listener, std::sync::Arc::new(state)).await
            })
            .map_err(|e| Failure::new("io", e))?;
            Ok(0)
        }
        Command::Split(a) | Command::Caption(a) | Command::Select(a) | Command::RunAll(a) => {
            let stages: &[Stage] = match &cli.command {
                Command::Split(_) => &[Stage::Split],
                Command::Caption(_) => &[Stage::Fanout],
                Command::Select(_) => &[Stage::Select],
                _ => &[Stage::Split, Stage::Fanout, Stage::Select],
            };
            let cfg = effective_config(cli)?;
            dump_config(&cfg);
            let summary = run_job(&cfg, a, stages)?;
            let invalid = scan(&a.job.join(MANIFEST_FILE))
                .map_err(|e| Failure::new("catalog", e))?
                .iter()
                .filter(|r| !r.validate().is_empty())
                .count();
            let ok = summary.parked == 0 && invalid == 0;
            let mut out = serde_json::to_value(&summary).expect("summary serializes");
            out["invalid_records"] = json!(invalid);
            out["ok"] = json!(ok);
            println!("{out}");
            Ok(if ok { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            println!("{}", json!({ "ok": false, "error": f.kind, "message": f.message }));
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

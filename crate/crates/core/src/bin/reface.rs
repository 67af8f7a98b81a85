use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use reface::cluster::{KMeansParams, DEFAULT_MAX_ITER};
use reface::enrichment::ThresholdPreset;
use reface::evaluation::{ClothesMode, SetMode, SweepGrid};
use reface::io::write_jsonl_to;
use reface::pipeline::{
    self, annotate_dataset, build_galleries, evaluate_predictions, evaluate_retrieval,
    gallery_identities, gallery_lines, load_predictions, Dataset, Granularity, RunConfig,
    DEFAULT_SWEEP_GRID,
};
use reface::synth::{generate_synthetic, SyntheticSpec};
use reface::{Error, Result};

#[derive(Parser)]
#[command(
    name = "reface",
    version,
    about = "Clothes-changing re-identification with face-based gallery enrichment"
)]
struct Cli {
    /// TOML run configuration; command-line flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the face and enriched galleries and emit per-query decisions.
    Enrich {
        #[command(flatten)]
        inputs: InputArgs,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Decision records (JSONL); standard output when omitted.
        #[arg(long, value_name = "PATH")]
        decisions: Option<PathBuf>,
        /// Enriched gallery listing (JSONL).
        #[arg(long, value_name = "PATH")]
        gallery_out: Option<PathBuf>,
    },
    /// Label every query track and write the prediction file.
    Annotate {
        #[command(flatten)]
        inputs: InputArgs,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        setting: SettingArgs,
        /// Prediction file (JSONL); standard output when omitted.
        #[arg(long, short, value_name = "PATH")]
        out: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        decisions: Option<PathBuf>,
    },
    /// Score predictions against ground truth, or run retrieval evaluation
    /// from a metadata file when no predictions are given.
    Evaluate {
        #[command(flatten)]
        inputs: InputArgs,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        setting: SettingArgs,
        /// Prediction file produced by `annotate`.
        #[arg(long, value_name = "PATH")]
        predictions: Option<PathBuf>,
        #[arg(long, short, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Evaluate face labeling accuracy over a grid of thresholds.
    Sweep {
        #[command(flatten)]
        inputs: InputArgs,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        /// `det=START:END:STEP,sim=START:END:STEP`; either axis may be a single value.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// K-means over face embeddings for manual labeling.
    Cluster {
        #[arg(long = "face", value_name = "PATH")]
        face_embeddings: Option<PathBuf>,
        #[arg(long, short)]
        k: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
        #[arg(long, short, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic dataset with known ground truth.
    Synth {
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
        #[command(flatten)]
        spec: SynthArgs,
    },
    /// Load every configured input through its validator.
    Validate {
        #[command(flatten)]
        inputs: InputArgs,
    },
}

#[derive(Args)]
struct InputArgs {
    #[arg(long, value_name = "PATH")]
    gallery_manifest: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    query_manifest: Option<PathBuf>,
    #[arg(long = "reid", value_name = "PATH")]
    reid_embeddings: Option<PathBuf>,
    #[arg(long = "face", value_name = "PATH")]
    face_embeddings: Option<PathBuf>,
    #[arg(long = "faces", value_name = "PATH")]
    face_observations: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    metadata: Option<PathBuf>,
}

#[derive(Args)]
struct ThresholdArgs {
    /// 42street, ccvid, ltcc, prcc or last.
    #[arg(long)]
    preset: Option<ThresholdPreset>,
    #[arg(long)]
    det_enrich: Option<f64>,
    #[arg(long)]
    det_inference: Option<f64>,
    #[arg(long)]
    sim_min: Option<f64>,
    #[arg(long)]
    rank_diff_min: Option<f64>,
    #[arg(long)]
    unknown_sim_max: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fraction of query crops considered for enrichment.
    #[arg(long)]
    enrichment_fraction: Option<f64>,
    /// Enable or disable gallery enrichment.
    #[arg(long, value_name = "BOOL")]
    enrichment: Option<bool>,
    /// track or image.
    #[arg(long)]
    granularity: Option<String>,
}

#[derive(Args)]
struct SettingArgs {
    /// general, sc (same clothes) or cc (clothes changing).
    #[arg(long)]
    setting: Option<ClothesMode>,
    /// open or closed.
    #[arg(long)]
    set_mode: Option<SetMode>,
    #[arg(long)]
    min_track_len: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    n_identities: Option<usize>,
    #[arg(long)]
    n_unknown_identities: Option<usize>,
    #[arg(long)]
    n_clothes_per_identity: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    face_noise_sigma: Option<f64>,
    #[arg(long)]
    reid_clothes_weight: Option<f64>,
    #[arg(long)]
    face_visibility_rate: Option<f64>,
    #[arg(long)]
    crops_per_track: Option<usize>,
    #[arg(long)]
    tracks_per_identity: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reid_noise_sigma: Option<f64>,
    #[arg(long)]
    noisy_face_rate: Option<f64>,
    #[arg(long)]
    distractor_face_rate: Option<f64>,
}

fn set<T>(field: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *field = v;
    }
}

impl InputArgs {
    fn apply(self, cfg: &mut RunConfig) {
        let i = &mut cfg.inputs;
        let pairs = [
            (&mut i.gallery_manifest, self.gallery_manifest),
            (&mut i.query_manifest, self.query_manifest),
            (&mut i.reid_embeddings, self.reid_embeddings),
            (&mut i.face_embeddings, self.face_embeddings),
            (&mut i.face_observations, self.face_observations),
            (&mut i.metadata, self.metadata),
        ];
        for (field, flag) in pairs {
            if flag.is_some() {
                *field = flag;
            }
        }
    }
}

impl ThresholdArgs {
    fn apply(self, cfg: &mut RunConfig) {
        set(&mut cfg.preset, self.preset);
        let t = &mut cfg.thresholds;
        let pairs = [
            (&mut t.det_enrich, self.det_enrich),
            (&mut t.det_inference, self.det_inference),
            (&mut t.sim_min, self.sim_min),
            (&mut t.rank_diff_min, self.rank_diff_min),
            (&mut t.unknown_sim_max, self.unknown_sim_max),
        ];
        for (field, flag) in pairs {
            if flag.is_some() {
                *field = flag;
            }
        }
    }
}

impl RunArgs {
    fn apply(self, cfg: &mut RunConfig) -> Result<()> {
        set(&mut cfg.alpha, self.alpha);
        set(&mut cfg.seed, self.seed);
        set(&mut cfg.enrichment_fraction, self.enrichment_fraction);
        set(&mut cfg.enrichment, self.enrichment);
        if let Some(g) = self.granularity {
            cfg.granularity = match g.as_str() {
                "track" => Granularity::Track,
                "image" => Granularity::Image,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown granularity `{other}`"
                    )))
                }
            };
        }
        Ok(())
    }
}

impl SettingArgs {
    fn apply(self, cfg: &mut RunConfig) {
        set(&mut cfg.setting.clothes_mode, self.setting);
        set(&mut cfg.setting.set_mode, self.set_mode);
        set(&mut cfg.setting.min_track_len, self.min_track_len);
    }
}

impl SynthArgs {
    fn apply(self, spec: &mut SyntheticSpec) {
        set(&mut spec.n_identities, self.n_identities);
        set(&mut spec.n_unknown_identities, self.n_unknown_identities);
        set(
            &mut spec.n_clothes_per_identity,
            self.n_clothes_per_identity,
        );
        set(&mut spec.dim, self.dim);
        set(&mut spec.face_noise_sigma, self.face_noise_sigma);
        set(&mut spec.reid_clothes_weight, self.reid_clothes_weight);
        set(&mut spec.face_visibility_rate, self.face_visibility_rate);
        set(&mut spec.crops_per_track, self.crops_per_track);
        set(&mut spec.tracks_per_identity, self.tracks_per_identity);
        set(&mut spec.seed, self.seed);
        set(&mut spec.reid_noise_sigma, self.reid_noise_sigma);
        set(&mut spec.noisy_face_rate, self.noisy_face_rate);
        set(&mut spec.distractor_face_rate, self.distractor_face_rate);
    }
}

/// A file, or standard output when no path is given.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_error(p, e))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn io_error(path: &Path, source: io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_lines<T: Serialize>(
    path: Option<&Path>,
    items: impl IntoIterator<Item = T>,
) -> Result<()> {
    let mut w = output(path)?;
    let target = path.unwrap_or(Path::new("<stdout>"));
    write_jsonl_to(&mut w, items)
        .and_then(|_| w.flush())
        .map_err(|e| io_error(target, e))
}

fn write_object<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string(value).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut w = output(path)?;
    let target = path.unwrap_or(Path::new("<stdout>"));
    writeln!(w, "{text}")
        .and_then(|_| w.flush())
        .map_err(|e| io_error(target, e))
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Enrich {
            inputs,
            thresholds,
            run,
            decisions,
            gallery_out,
        } => {
            inputs.apply(&mut cfg);
            thresholds.apply(&mut cfg);
            run.apply(&mut cfg)?;
            cfg.validate()?;
            let ds = Dataset::load(&cfg)?;
            let galleries = build_galleries(&ds, &cfg)?;
            if let Some(path) = gallery_out {
                write_lines(Some(&path), gallery_lines(&galleries.g_enriched))?;
            }
            write_lines(decisions.as_deref(), &galleries.decisions)
        }
        Command::Annotate {
            inputs,
            thresholds,
            run,
            setting,
            out,
            decisions,
        } => {
            inputs.apply(&mut cfg);
            thresholds.apply(&mut cfg);
            run.apply(&mut cfg)?;
            setting.apply(&mut cfg);
            cfg.validate()?;
            let ds = Dataset::load(&cfg)?;
            let predictions = annotate_dataset(&ds, &cfg)?;
            if let Some(path) = decisions {
                write_lines(Some(&path), &predictions.decisions)?;
            }
            write_lines(out.as_deref(), predictions.lines())
        }
        Command::Evaluate {
            inputs,
            thresholds,
            run,
            setting,
            predictions,
            out,
        } => {
            inputs.apply(&mut cfg);
            thresholds.apply(&mut cfg);
            run.apply(&mut cfg)?;
            setting.apply(&mut cfg);
            cfg.validate()?;
            let report = match predictions {
                Some(path) => {
                    let query = cfg.inputs.query_manifest.as_deref().ok_or_else(|| {
                        Error::Config("evaluating predictions needs a query manifest".into())
                    })?;
                    let gallery = cfg.inputs.gallery_manifest.as_deref().ok_or_else(|| {
                        Error::Config("evaluating predictions needs a gallery manifest".into())
                    })?;
                    let query = reface::model::load_crop_manifest(query)?;
                    let gallery = reface::model::load_crop_manifest(gallery)?;
                    evaluate_predictions(
                        &load_predictions(&path)?,
                        &query,
                        &gallery_identities(&gallery),
                        &cfg.setting,
                    )?
                }
                None => evaluate_retrieval(&cfg)?,
            };
            write_object(out.as_deref(), &report)
        }
        Command::Sweep {
            inputs,
            thresholds,
            grid,
            seed,
            out,
        } => {
            inputs.apply(&mut cfg);
            thresholds.apply(&mut cfg);
            set(&mut cfg.seed, seed);
            if grid.is_some() {
                cfg.grid = grid;
            }
            cfg.validate()?;
            let grid: SweepGrid = cfg.grid.as_deref().unwrap_or(DEFAULT_SWEEP_GRID).parse()?;
            write_lines(out.as_deref(), pipeline::sweep(&cfg, &grid)?)
        }
        Command::Cluster {
            face_embeddings,
            k,
            seed,
            max_iter,
            out,
        } => {
            let path = face_embeddings
                .or(cfg.inputs.face_embeddings)
                .ok_or_else(|| Error::Config("cluster needs face embeddings (--face)".into()))?;
            let params = KMeansParams {
                k,
                seed: seed.unwrap_or(cfg.seed),
                max_iter,
            };
            let (ids, report) = pipeline::cluster_faces(&path, &params)?;
            let ids: Vec<&str> = ids.iter().map(String::as_str).collect();
            log::info!(
                "k-means: {} iterations, sse {}",
                report.iterations,
                report.sse()
            );
            write_lines(out.as_deref(), report.records(&ids))
        }
        Command::Synth { out_dir, spec } => {
            let mut s = cfg.synthetic.unwrap_or_default();
            spec.apply(&mut s);
            let ds = generate_synthetic(&s, &out_dir)?;
            println!("{}", ds.config_path.display());
            Ok(())
        }
        Command::Validate { inputs } => {
            inputs.apply(&mut cfg);
            cfg.validate()?;
            let summary = pipeline::validate_inputs(&cfg)?;
            write_object(None, &summary)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // A closed downstream pipe is a normal end of output.
        Err(reface::Error::Io { source, .. })
            if source.kind() == std::io::ErrorKind::BrokenPipe =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

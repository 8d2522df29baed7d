//! `vtrack` command line: synthetic data, model training, detection,
//! tracking and evaluation.
//!
//! Exit status is 0 on success, 1 on a usage error and 2 when an input,
//! model or configuration file cannot be used.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use vtrack::classifier::{cross_validate, EvalReport};
use vtrack::config::PipelineConfig;
use vtrack::frame_io::{generate_synthetic, preset_scene, read_sequence, to_grayscale, truth_from_jsonl, write_atomic, write_synthetic, FrameTruth, TRUTH_FILE};
use vtrack::metrics::{evaluate_detection, evaluate_tracks, MetricsReport};
use vtrack::pipeline::{detect_motion, hypotheses_jsonl, run_pipeline, track_with_recognition, truth_frames, write_motion, write_pipeline, write_tracks, HYPOTHESES_FILE, METRICS_FILE};
use vtrack::tracker::tracks_from_jsonl;
use vtrack::training::{image_descriptors, labeled_features, load_codebook, load_recognizer, save_recognizer, synthetic_dataset, train_codebook, train_with_codebook, CODEBOOK_FILE};
use vtrack::{BinaryMask, BoxF, Error, GrayFrame, Result};

#[derive(Parser)]
#[command(name = "vtrack", version, about = "Video motion detection, object recognition and swarm tracking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic scene to PPM frames plus truth.jsonl.
    Generate {
        #[arg(long)]
        out: PathBuf,
        /// One of static, single, cross2, shadow.
        #[arg(long, default_value = "cross2")]
        scene: String,
        #[arg(long, default_value_t = 100)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Cluster descriptors of the synthetic training set into a codebook.
    TrainVocab(Common),
    /// Train the verifier SVM, occurrence table and part models on a codebook.
    TrainSvm {
        #[command(flatten)]
        common: Common,
        /// Directory for the cross-validation report; defaults to the model directory.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Motion masks and blobs for a frame sequence.
    Detect(Io),
    /// Recognition-seeded tracking of a frame sequence.
    Track(Io),
    /// Score a track file against truth.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Write the metrics CSV here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Motion detection, recognition and tracking, with metrics when the
    /// input holds truth.jsonl.
    Pipeline(Io),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the model directory.
    #[arg(long)]
    models: Option<PathBuf>,
}

#[derive(Args)]
struct Io {
    #[command(flatten)]
    common: Common,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

struct Loaded {
    cfg: PipelineConfig,
    models: PathBuf,
}

impl Common {
    /// Configuration with the seed override applied; a relative model path
    /// is taken from the configuration file's directory.
    fn load(&self) -> Result<Loaded> {
        let mut cfg = PipelineConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg = cfg.with_seed(seed);
        }
        let models = match &self.models {
            Some(m) => m.clone(),
            None if cfg.paths.models.is_relative() => self.config.parent().unwrap_or(Path::new("")).join(&cfg.paths.models),
            None => cfg.paths.models.clone(),
        };
        Ok(Loaded { cfg, models })
    }
}

fn read_truth(dir: &Path) -> Result<Option<Vec<FrameTruth>>> {
    let path = dir.join(TRUTH_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    truth_from_jsonl(&text).map(Some).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn write_report(dir: &Path, report: &EvalReport) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_atomic(&dir.join("confusion.csv"), report.confusion_csv().as_bytes())?;
    write_atomic(&dir.join("roc.csv"), report.roc_csv().as_bytes())?;
    let m = MetricsReport {
        classifier: Some((report.accuracy, report.auc.clone())),
        ..MetricsReport::default()
    };
    write_atomic(&dir.join(METRICS_FILE), m.to_csv().as_bytes())
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate { out, scene, frames, seed } => {
            let (rgb, truth) = generate_synthetic(&preset_scene(&scene, frames, seed)?, frames)?;
            write_synthetic(&out, &rgb, &truth)?;
            println!("wrote {} frames of `{scene}` to {}", rgb.len(), out.display());
        }
        Command::TrainVocab(common) => {
            let Loaded { cfg, models } = common.load()?;
            let params = cfg.train_params();
            let images = synthetic_dataset(&cfg.dataset, cfg.seed)?;
            let descs = image_descriptors(&images, &params.recognition)?;
            let cb = train_codebook(&descs, &params)?;
            std::fs::create_dir_all(&models).map_err(|e| Error::io(&models, e))?;
            write_atomic(&models.join(CODEBOOK_FILE), cb.to_text().as_bytes())?;
            println!("codebook of {} words from {} images written to {}", cb.k(), images.len(), models.display());
        }
        Command::TrainSvm { common, report } => {
            let Loaded { cfg, models } = common.load()?;
            let params = cfg.train_params();
            let cb = load_codebook(&models)?;
            let images = synthetic_dataset(&cfg.dataset, cfg.seed)?;
            let descs = image_descriptors(&images, &params.recognition)?;
            let data = labeled_features(&images, &descs, &cb, &params.recognition, true)?;
            let cv = cross_validate(&data, cfg.classifier.folds, &params.svm, cfg.seed)?;
            write_report(report.as_deref().unwrap_or(&models), &cv)?;
            let rec = train_with_codebook(&images, &descs, cb, &params)?;
            save_recognizer(&models, &rec)?;
            println!("{}-fold accuracy {:.4}; models written to {}", cfg.classifier.folds, cv.accuracy, models.display());
        }
        Command::Detect(io) => {
            let Loaded { cfg, .. } = io.common.load()?;
            let frames = read_sequence(&io.input, &cfg.paths.pattern)?;
            let motion = detect_motion(&frames, &cfg)?;
            write_motion(&io.out, &motion)?;
            if let Some(truth) = read_truth(&io.input)? {
                let rows: Vec<(&BinaryMask, &[BoxF], &BinaryMask, Vec<BoxF>)> = truth
                    .iter()
                    .filter(|t| t.frame < motion.len())
                    .map(|t| (&motion[t.frame].mask, motion[t.frame].blobs.as_slice(), &t.motion, t.boxes.iter().map(|b| b.1).collect()))
                    .collect();
                let rows: Vec<(&BinaryMask, &[BoxF], &BinaryMask, &[BoxF])> = rows.iter().map(|r| (r.0, r.1, r.2, r.3.as_slice())).collect();
                let m = MetricsReport {
                    detection: Some(evaluate_detection(&rows)?),
                    ..MetricsReport::default()
                };
                write_atomic(&io.out.join(METRICS_FILE), m.to_csv().as_bytes())?;
            }
            println!("motion masks for {} frames written to {}", frames.len(), io.out.display());
        }
        Command::Track(io) => {
            let Loaded { cfg, models } = io.common.load()?;
            let rec = load_recognizer(&models, &cfg.recognition)?;
            let frames = read_sequence(&io.input, &cfg.paths.pattern)?;
            let gray: Vec<GrayFrame> = frames.iter().map(to_grayscale).collect();
            let (detections, tracks, _) = track_with_recognition(&gray, &rec, &cfg)?;
            write_tracks(&io.out, &frames, &tracks, cfg.pipeline.annotate)?;
            write_atomic(&io.out.join(HYPOTHESES_FILE), hypotheses_jsonl(&detections)?.as_bytes())?;
            println!("{} track records written to {}", tracks.len(), io.out.display());
        }
        Command::Eval { common, tracks, truth, out } => {
            common.load()?;
            let text = std::fs::read_to_string(&tracks).map_err(|e| Error::io(&tracks, e))?;
            let records = tracks_from_jsonl(&text).map_err(|e| Error::Parse(format!("{}: {e}", tracks.display())))?;
            let truth_text = std::fs::read_to_string(&truth).map_err(|e| Error::io(&truth, e))?;
            let truth = truth_from_jsonl(&truth_text).map_err(|e| Error::Parse(format!("{}: {e}", truth.display())))?;
            let m = MetricsReport {
                tracking: Some(evaluate_tracks(&records, &truth_frames(&truth))?),
                ..MetricsReport::default()
            };
            match out {
                Some(path) => write_atomic(&path, m.to_csv().as_bytes())?,
                None => print!("{}", m.to_csv()),
            }
        }
        Command::Pipeline(io) => {
            let Loaded { cfg, models } = io.common.load()?;
            let rec = load_recognizer(&models, &cfg.recognition)?;
            let frames = read_sequence(&io.input, &cfg.paths.pattern)?;
            let truth = read_truth(&io.input)?;
            let out = run_pipeline(&frames, &rec, &cfg, truth.as_deref())?;
            write_pipeline(&io.out, &frames, &out, &cfg)?;
            match out.metrics.as_ref().and_then(|m| m.tracking.as_ref()) {
                Some(t) => println!(
                    "success rate {:.3}, false positives per frame {:.3}, identity switches {}",
                    t.success_rate, t.fp_per_frame, t.identity_switches
                ),
                None => println!("{} track records written to {}", out.tracks.len(), io.out.display()),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

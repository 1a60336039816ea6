use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ssp_core::dataio::{DEFAULT_STRIDE, DEFAULT_TRAIN_FRACTION, DEFAULT_WINDOW};
use ssp_core::eval::{HEATMAP_BIN, HEATMAP_EXTENT};
use ssp_core::tasks::Task;

/// Social-signal prediction pipeline: synthetic scenes, preprocessing,
/// training, evaluation and analysis.
///
/// Every command writes its outputs into the directory given by `--out`
/// together with a `manifest.json` recording the effective configuration,
/// its hash, the seed, crate versions and input/output digests. Outputs are
/// staged and only moved into place once complete.
///
/// Exit codes: 0 success, 1 user error (bad flag, missing file, task
/// mismatch, invalid config), 2 internal error or failed gradient check.
#[derive(Debug, Parser)]
#[command(name = "ssp", version)]
pub struct Cli {
    /// Base directory for relative input and output paths (config files
    /// excepted).
    #[arg(long, global = true, env = "SSP_OUTPUT_ROOT")]
    pub output_root: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic scenes.
    Synth(SynthArgs),
    /// Crop, split and window a scene directory into train/test clips.
    Preprocess(PreprocessArgs),
    /// Train one task model and write its checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test clips of a preprocessed dataset.
    Eval(EvalArgs),
    /// Test-time channel masking of a speaking checkpoint.
    Ablate(AblateArgs),
    /// Pairwise inter-person distance statistics of a scene directory.
    Proxemics(ProxemicsArgs),
    /// Buyer-centric histogram of seller positions.
    Heatmap(HeatmapArgs),
    /// Finite-difference gradient checks of every layer and task model.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// TOML generator config; flags below override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Number of scenes. Scene i uses seed + i.
    #[arg(long, default_value_t = 50)]
    pub count: usize,
    /// Base seed [config default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Frames per scene [config default: 1800].
    #[arg(long)]
    pub duration: Option<usize>,
    /// Gesture amplitude in cm [config default: 12].
    #[arg(long)]
    pub gesture_amp: Option<f64>,
    /// Probability of a clean seller turn boundary [config default: 0.8].
    #[arg(long)]
    pub turn_taking: Option<f64>,
    /// Positional noise sigma in cm [config default: 2].
    #[arg(long)]
    pub noise_pos: Option<f64>,
    /// Orientation noise sigma in radians [config default: 0.05].
    #[arg(long)]
    pub noise_orient: Option<f64>,
    /// Frames between formation redraws, 0 for one per scene [config default: 300].
    #[arg(long)]
    pub reform_every: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Directory of `.scene` files.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window: usize,
    /// Stride of training windows. Test windows never overlap.
    #[arg(long, default_value_t = DEFAULT_STRIDE)]
    pub stride: usize,
    /// Add the mirrored copy of every training clip.
    #[arg(long)]
    pub flip: bool,
    #[arg(long, default_value_t = DEFAULT_TRAIN_FRACTION)]
    pub train_fraction: f64,
    /// Seed of the scene-level train/test split.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_parser = parse_task)]
    pub task: Task,
    /// Speaking: self-face, self-body, self-face-body, other-face, other-body,
    /// other-face-body, random-person. Formation: pos-only, pos-face,
    /// pos-body, full.
    #[arg(long)]
    pub input_spec: Option<String>,
    /// Output directory of `preprocess`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// TOML training config; flags below override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Motion autoencoder checkpoint, required by traj2body and body2body.
    #[arg(long)]
    pub ae: Option<PathBuf>,
    /// [config default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// [config default: 10]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// [config default: 32]
    #[arg(long)]
    pub batch: Option<usize>,
    /// [config default: 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Cosine-decay the learning rate to this value.
    #[arg(long)]
    pub lr_final: Option<f64>,
    /// Stop after this many optimizer steps.
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// l1 strength [default: 0.001 speaking, 0.1 formation, 0 otherwise].
    #[arg(long)]
    pub lambda_l1: Option<f64>,
    /// Dropout of the speaking and formation nets [default: 0.25].
    #[arg(long)]
    pub dropout: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Output directory of `preprocess`; its test clips are evaluated.
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Formation checkpoint: adds the formation-driven body row to
    /// traj2body and body2body evaluations.
    #[arg(long)]
    pub formation_ckpt: Option<PathBuf>,
    /// Traj2body checkpoint: with `--formation-ckpt`, adds the hybrid row to
    /// a body2body evaluation.
    #[arg(long)]
    pub traj_ckpt: Option<PathBuf>,
    /// Seed for unrelated-person pairing.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Speaking checkpoint.
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ProxemicsArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Bin size in cm.
    #[arg(long, default_value_t = HEATMAP_BIN)]
    pub bin: f64,
    /// Half-width of the square window in cm.
    #[arg(long, default_value_t = HEATMAP_EXTENT)]
    pub extent: f64,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse().map_err(|e: ssp_core::CoreError| e.to_string())
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use shadowcone::cones::ConeFamily;
use shadowcone::objective::{EnergyKind, LossKind};
use shadowcone::optim::OptimizerKind;
use shadowcone::trainer::TrainConfig;

pub const SUBCOMMANDS: [&str; 6] = ["preprocess", "split", "train", "eval", "export", "plot"];

#[derive(Debug, Parser)]
#[command(name = "shadowcone", version, about = "Hyperbolic shadow-cone embeddings of partial orders")]
#[command(args_override_self = true)]
pub struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Prune cycles, then write the transitive closure and reduction.
    Preprocess(PreprocessArgs),
    /// Split a preprocessed graph into train/valid/test with negatives.
    Split(SplitArgs),
    /// Train embeddings on a split.
    Train(TrainArgs),
    /// Score a checkpoint on the test pairs of a split.
    Eval(EvalArgs),
    /// Dump checkpoint coordinates.
    Export(ExportArgs),
    /// Draw a 2-D checkpoint as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct PreprocessArgs {
    /// Edge TSV: `parent<TAB>child[<TAB>confidence]`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Keep only the N most confident edges.
    #[arg(long)]
    pub top_n: Option<usize>,
    /// Seed for cycle breaking; falls back to SHADOWCONE_SEED, then 0.
    #[arg(long, env = "SHADOWCONE_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SplitArgs {
    /// Directory written by `preprocess`.
    #[arg(long)]
    pub input: PathBuf,
    /// Percentage of non-basic edges added to training, in [0, 90].
    #[arg(long, default_value_t = 0.0)]
    pub p: f64,
    #[arg(long, default_value_t = 10)]
    pub neg_ratio: usize,
    #[arg(long, env = "SHADOWCONE_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Cone {
    UmbralInfinity,
    UmbralOrigin,
    PenumbralBall,
    PenumbralHorosphere,
}

impl From<Cone> for ConeFamily {
    fn from(c: Cone) -> Self {
        match c {
            Cone::UmbralInfinity => ConeFamily::UmbralInfinity,
            Cone::UmbralOrigin => ConeFamily::UmbralOrigin,
            Cone::PenumbralBall => ConeFamily::PenumbralBall,
            Cone::PenumbralHorosphere => ConeFamily::PenumbralHorosphere,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Loss {
    MaxMargin,
    Contrastive,
    Shadow,
}

impl From<Loss> for LossKind {
    fn from(l: Loss) -> Self {
        match l {
            Loss::MaxMargin => LossKind::MaxMargin,
            Loss::Contrastive => LossKind::Contrastive,
            Loss::Shadow => LossKind::Shadow,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Energy {
    Distance,
    Angle,
}

impl From<Energy> for EnergyKind {
    fn from(e: Energy) -> Self {
        match e {
            Energy::Distance => EnergyKind::Distance,
            Energy::Angle => EnergyKind::Angle,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Optimizer {
    Rsgd,
    Radam,
}

impl From<Optimizer> for OptimizerKind {
    fn from(o: Optimizer) -> Self {
        match o {
            Optimizer::Rsgd => OptimizerKind::Rsgd,
            Optimizer::Radam => OptimizerKind::Radam,
        }
    }
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct TrainArgs {
    /// Directory written by `split`.
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "umbral-infinity")]
    pub cone: Cone,
    #[arg(long, default_value_t = 5)]
    pub dim: usize,
    /// Curvature magnitude (the space has curvature -k).
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    /// Training radius: object radius for umbral cones, source radius for
    /// the penumbral ball.
    #[arg(long, default_value_t = 0.05)]
    pub r: f64,
    /// Exponentiated horosphere height of the penumbral-horosphere source.
    #[arg(long, default_value_t = 20.0)]
    pub height: f64,
    /// Umbral radius used when scoring.
    #[arg(long, default_value_t = 0.1)]
    pub eval_radius: f64,
    #[arg(long, default_value_t = shadowcone::cones::DEFAULT_GAMMA3)]
    pub gamma3: f64,
    #[arg(long, value_enum, default_value = "shadow")]
    pub loss: Loss,
    #[arg(long, value_enum, default_value = "distance")]
    pub energy: Energy,
    /// Margin of the max-margin loss.
    #[arg(long, default_value_t = 0.01)]
    pub gamma: f64,
    /// Negative margin of the shadow loss.
    #[arg(long, default_value_t = 0.01)]
    pub gamma1: f64,
    /// Positive slack of the shadow loss.
    #[arg(long, default_value_t = 0.0)]
    pub gamma2: f64,
    /// Defaults to rsgd for half-space cones and radam for ball cones.
    #[arg(long, value_enum)]
    pub optimizer: Option<Optimizer>,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 400)]
    pub epochs: usize,
    #[arg(long, default_value_t = 20)]
    pub burnin: usize,
    #[arg(long, default_value_t = 0.01)]
    pub burnin_multiplier: f64,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 10)]
    pub neg_ratio: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub init_eps: f64,
    #[arg(long, default_value_t = 10)]
    pub eval_every: usize,
    #[arg(long, env = "SHADOWCONE_SEED", default_value_t = 0)]
    pub seed: u64,
}

impl TrainArgs {
    pub fn config(&self) -> TrainConfig {
        TrainConfig {
            family: self.cone.into(),
            dim: self.dim,
            k: self.k,
            r: self.r,
            height: self.height,
            gamma3: self.gamma3,
            eval_radius: self.eval_radius,
            loss: self.loss.into(),
            energy: self.energy.into(),
            gamma: self.gamma,
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            optimizer: self.optimizer.map(Into::into),
            lr: self.lr,
            epochs: self.epochs,
            burnin_epochs: self.burnin,
            burnin_multiplier: self.burnin_multiplier,
            batch_size: self.batch_size,
            neg_ratio: self.neg_ratio,
            init_eps: self.init_eps,
            seed: self.seed,
            eval_every: self.eval_every,
        }
    }
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Directory written by `split`.
    #[arg(long)]
    pub split: PathBuf,
    /// Override the umbral radius stored in the checkpoint.
    #[arg(long)]
    pub eval_radius: Option<f64>,
    /// Report directory; defaults to the checkpoint's directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Csv,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ExportArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: ExportFormat,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct PlotArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Directory written by `split` (or `preprocess`); supplies the edges
    /// drawn between embeddings.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Labels whose cones are drawn. Repeatable.
    #[arg(long = "cone-for")]
    pub cone_for: Vec<String>,
    #[arg(long, default_value_t = 800)]
    pub size: u32,
    #[arg(long)]
    pub out: PathBuf,
}

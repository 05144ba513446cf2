use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pvdefect::classifiers::ClassifierKind;
use pvdefect::eval::{Averaging, ReportFormat};
use pvdefect::fusion::FeatureCombo;

/// Photovoltaic panel defect classification pipeline.
#[derive(Debug, Parser)]
#[command(name = "pvdefect", version, propagate_version = true)]
pub struct Cli {
    /// Seed for every random draw; overrides any seed in a config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for per-image and per-cell work.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: Option<u64>,
    /// Raise log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a manifest from one directory per class.
    Ingest(IngestArgs),
    /// Write a seeded synthetic corpus laid out like a real one.
    SynthImages(SynthImagesArgs),
    /// Add rotated, flipped and shifted copies of every image.
    Augment(AugmentArgs),
    /// Resize, denoise and enhance every image.
    Preprocess(PreprocessArgs),
    /// Extract handcrafted feature blocks into a feature store.
    Extract(ExtractArgs),
    /// Write synthetic deep embeddings for a manifest.
    SynthEmbed(SynthEmbedArgs),
    /// Join feature stores and embedding files column-wise.
    Fuse(FuseArgs),
    /// Train one classifier.
    Train(TrainArgs),
    /// Label a single image or every entry of a manifest.
    Predict(PredictArgs),
    /// Score a trained model on labelled data.
    Evaluate(EvaluateArgs),
    /// Run every feature combination against every classifier.
    Grid(GridArgs),
    /// Convert a JSON report to CSV or markdown.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory holding one subdirectory per class.
    #[arg(long)]
    pub root: PathBuf,
    /// Manifest to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also assign a stratified train/test split with this test fraction.
    #[arg(long)]
    pub test_frac: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SynthImagesArgs {
    /// Output directory; images go to `<out-dir>/<class>/`.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Manifest to write.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    /// Side length in pixels.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory for the new images.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Expanded manifest to write.
    #[arg(long)]
    pub out: PathBuf,
    /// AugmentConfig JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Manifest pointing at the processed images.
    #[arg(long)]
    pub out: PathBuf,
    /// PreprocessConfig JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output size as WIDTHxHEIGHT.
    #[arg(long, value_parser = parse_size)]
    pub size: Option<(usize, usize)>,
    #[arg(long)]
    pub no_clahe: bool,
    #[arg(long)]
    pub no_gamma: bool,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Feature store to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Handcrafted blocks, e.g. LBP+HOG+GABOR.
    #[arg(long, default_value = "LBP+HOG+GABOR")]
    pub blocks: FeatureCombo,
    /// HandcraftedConfig JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthEmbedArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Embedding file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    /// Distance of each class mean from the origin.
    #[arg(long, default_value_t = 6.0)]
    pub separation: f64,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// Feature stores or embedding files; rows follow the first input.
    #[arg(long, num_args = 2.., required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Where features come from for commands that consume them.
#[derive(Debug, Args)]
pub struct FeatureInputs {
    /// Feature stores or embedding files, joined column-wise.
    #[arg(long = "features", num_args = 1..)]
    pub features: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub inputs: FeatureInputs,
    #[arg(long, default_value = "svm")]
    pub classifier: ClassifierKind,
    /// Blocks to train on; defaults to every block in the inputs.
    #[arg(long)]
    pub blocks: Option<FeatureCombo>,
    /// TrainParams JSON.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// HandcraftedConfig used at extraction, recorded for prediction.
    #[arg(long)]
    pub handcrafted: Option<PathBuf>,
    /// PreprocessConfig applied before extraction, recorded for prediction.
    #[arg(long)]
    pub preprocess: Option<PathBuf>,
    #[arg(long)]
    pub no_standardize: bool,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
    pub image: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Sample id used to look up deep features for `--image`; defaults to the file stem.
    #[arg(long, requires = "image")]
    pub id: Option<String>,
    #[command(flatten)]
    pub inputs: FeatureInputs,
    /// Write predictions here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitChoice {
    Train,
    Test,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AveragingChoice {
    Macro,
    Weighted,
}

impl From<AveragingChoice> for Averaging {
    fn from(a: AveragingChoice) -> Self {
        match a {
            AveragingChoice::Macro => Averaging::Macro,
            AveragingChoice::Weighted => Averaging::Weighted,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub inputs: FeatureInputs,
    /// Entries to score; defaults to the test split, or everything when no split is set.
    #[arg(long, value_enum)]
    pub split: Option<SplitChoice>,
    #[arg(long, value_enum, default_value = "macro")]
    pub averaging: AveragingChoice,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report format; defaults to the output extension, else CSV.
    #[arg(long)]
    pub format: Option<ReportFormat>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// GridConfig JSON. Relative paths inside it resolve against its directory.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub format: Option<ReportFormat>,
    /// Overrides `paths.manifest`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Overrides `paths.features` and `paths.embeddings`.
    #[arg(long, num_args = 1..)]
    pub features: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// JSON report written by `grid` or `evaluate`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<ReportFormat>,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    let dim = |v: &str| v.trim().parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| format!("bad dimension {v:?}"));
    Ok((dim(w)?, dim(h)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definitions_are_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn size_parsing() {
        assert_eq!(parse_size("640x480"), Ok((640, 480)));
        assert!(parse_size("640").is_err());
        assert!(parse_size("0x4").is_err());
    }

    #[test]
    fn global_flags_after_subcommand() {
        let cli = Cli::try_parse_from(["pvdefect", "report", "--input", "r.json", "--seed", "7", "--jobs", "2", "-vv"]).unwrap();
        assert_eq!((cli.seed, cli.jobs, cli.verbose), (Some(7), Some(2), 2));
    }

    #[test]
    fn predict_needs_exactly_one_source() {
        assert!(Cli::try_parse_from(["pvdefect", "predict", "--model", "m.pvml"]).is_err());
        assert!(
            Cli::try_parse_from(["pvdefect", "predict", "--model", "m", "--image", "a.png", "--manifest", "m.jsonl"]).is_err()
        );
    }
}

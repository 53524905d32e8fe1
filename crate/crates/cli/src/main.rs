//! `glyphgan` command-line tool.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Stroke-aware glyph translation: data preparation, training, generation and evaluation.
#[derive(Debug, Parser)]
#[command(name = "glyphgan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rasterize a font (or synthesize a font pair) into `<out>/<font_id>/U+XXXX.png`.
    BuildData(BuildDataArgs),
    /// Print the 32-bit stroke encodings of characters.
    Encode(EncodeArgs),
    /// Train a generator/discriminator pair.
    Train(TrainArgs),
    /// Translate source glyphs with a trained checkpoint.
    Generate(GenerateArgs),
    /// Score a checkpoint on paired test glyphs.
    Evaluate(EvaluateArgs),
    /// Run a family of reduced-scale training variants and tabulate them.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Dataset root holding one directory per font.
    #[arg(long, env = "GLYPHGAN_DATA_ROOT")]
    data_root: PathBuf,
    #[arg(long, default_value = "synthetic-source")]
    source_font: String,
    #[arg(long, default_value = "synthetic-target")]
    target_font: String,
    /// Stroke table; defaults to `<data-root>/strokes.txt`.
    #[arg(long)]
    strokes: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable. Applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_steps: Option<u64>,
}

#[derive(Debug, Args)]
struct BuildDataArgs {
    /// Output dataset root.
    #[arg(long)]
    out: PathBuf,
    /// TrueType/OpenType font to rasterize.
    #[arg(long, conflicts_with = "synthetic", requires_all = ["font_id", "codepoints"])]
    font: Option<PathBuf>,
    #[arg(long)]
    font_id: Option<String>,
    /// Codepoint list, one `U+XXXX` per line.
    #[arg(long)]
    codepoints: Option<PathBuf>,
    /// Generate a synthetic source/target pair of this many characters instead.
    #[arg(long, required_unless_present = "font")]
    synthetic: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 128)]
    resolution: usize,
}

#[derive(Debug, Args)]
struct EncodeArgs {
    /// Stroke table file.
    #[arg(long)]
    strokes: PathBuf,
    /// Characters, literal or `U+XXXX`; all table entries when omitted.
    chars: Vec<String>,
    /// Also list groups of characters sharing an encoding.
    #[arg(long)]
    collisions: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Run directory.
    #[arg(long)]
    out: PathBuf,
    /// Continue from `<out>/checkpoint.ckpt`.
    #[arg(long)]
    resume: bool,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Characters to translate, literal or `U+XXXX`, comma or space separated.
    #[arg(long, conflicts_with = "codepoints")]
    chars: Option<String>,
    /// Codepoint list file.
    #[arg(long)]
    codepoints: Option<PathBuf>,
    /// Source glyph directory root (with `--source-font`).
    #[arg(long, env = "GLYPHGAN_DATA_ROOT")]
    data_root: Option<PathBuf>,
    #[arg(long, default_value = "synthetic-source")]
    source_font: String,
    /// Render source glyphs from this font file instead of the glyph directory.
    #[arg(long)]
    font: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Evaluate these characters instead of the run's test split.
    #[arg(long)]
    codepoints: Option<PathBuf>,
    /// Precomputed feature file for FID and perceptual distance.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Seed of the built-in random-convolution embedder.
    #[arg(long, default_value_t = 0)]
    embed_seed: u64,
    /// Rows in the sample grid.
    #[arg(long, default_value_t = 16)]
    samples: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AblateMode {
    FewshotSweep,
    CopyAugment,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[arg(long, value_enum)]
    mode: AblateMode,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Paired fractions for the sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.7, 1.0])]
    percentages: Vec<f64>,
    /// Copy fraction for the copy-augment variant.
    #[arg(long, default_value_t = 1.0)]
    copy_fraction: f64,
    #[arg(long, default_value_t = 0)]
    embed_seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::BuildData(a) => commands::build_data(a),
        Command::Encode(a) => commands::encode(a),
        Command::Train(a) => commands::train(a),
        Command::Generate(a) => commands::generate(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Ablate(a) => commands::ablate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

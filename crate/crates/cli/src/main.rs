//! `trajart`: demonstration trajectories to generalized curves, generated
//! letterforms and simplified vector drawings.

mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "trajart", version, about)]
pub struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Directory all outputs are written into.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    /// Suppress progress messages.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic dataset: letter strokes and 3D paths.
    Demo(DemoArgs),
    /// Fit a mixture to a directory of demonstrations and extract the curve.
    Generalize(GeneralizeArgs),
    /// Build the ordered letter-pair dataset.
    Pairs(PairsArgs),
    /// Train the network and generate the held-out letter.
    Train(TrainArgs),
    /// Run a trained network on one letter.
    Generate(GenerateArgs),
    /// Spline, project and simplify a 3D path.
    Biopsy(BiopsyArgs),
    /// Rerun a recorded command and check its outputs are identical.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Number of letter strokes.
    #[arg(long, default_value_t = trajart_core::demo::DEFAULT_LETTER_COUNT)]
    pub count: usize,
}

#[derive(Debug, Args)]
pub struct GeneralizeArgs {
    /// A letter file, or a directory of `.csv` letter files.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Points per demonstration after arc-length resampling.
    #[arg(long, default_value_t = 100)]
    pub resample: usize,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value = "model.gmm")]
    pub out: PathBuf,
    #[arg(long, default_value = "curve.csv")]
    pub curve: PathBuf,
    #[arg(long, default_value = "curve.svg")]
    pub svg: PathBuf,
    /// Bézier fit tolerance; defaults to 0.5% of the curve's bounding-box diagonal.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PairsArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Common number of points per letter.
    #[arg(long, default_value_t = 64)]
    pub m: usize,
    /// Use only the first N letters (file-name order); 0 uses all.
    #[arg(long, default_value_t = 8)]
    pub max_letters: usize,
    #[arg(long, default_value = "pairs.json")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    /// Weights U[0,1], biases U[0,0.1].
    Positive,
    /// Weights U[-1,1], biases U[-0.1,0.1].
    Symmetric,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["pairs", "input"]))]
pub struct TrainArgs {
    /// A pairs file written by `pairs`.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// A directory of letter files; pairs are built on the fly.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub m: usize,
    #[arg(long, default_value_t = 8)]
    pub max_letters: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 100)]
    pub log_every: usize,
    #[arg(long, value_enum, default_value_t = InitArg::Positive)]
    pub init: InitArg,
    /// Seed for choosing the held-out pair; defaults to `--seed`.
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long, default_value = "model.mlp")]
    pub out: PathBuf,
    #[arg(long, default_value = "cost.csv")]
    pub report: PathBuf,
    #[arg(long, default_value = "test_input.csv")]
    pub test_input: PathBuf,
    #[arg(long, default_value = "test_target.csv")]
    pub test_target: PathBuf,
    #[arg(long, default_value = "test_generated.csv")]
    pub test_output: PathBuf,
    #[arg(long, default_value = "test_generated.svg")]
    pub svg: PathBuf,
    #[arg(long, default_value_t = 0.004)]
    pub dot_radius: f64,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value = "gen.csv")]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Resample the input to this many points first; 0 keeps it as is.
    #[arg(long, default_value_t = 64)]
    pub m: usize,
    /// Add a random z coordinate to every generated point.
    #[arg(long)]
    pub extrude: bool,
    #[arg(long, default_value_t = -0.1, allow_negative_numbers = true)]
    pub zlo: f64,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub zhi: f64,
    #[arg(long, default_value_t = 0.004)]
    pub dot_radius: f64,
}

/// Simplification threshold: a distance, or `auto` for 1% of the projected
/// bounding-box diagonal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Epsilon {
    Auto,
    Value(f64),
}

impl FromStr for Epsilon {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Self::Auto);
        }
        s.parse::<f64>()
            .map(Self::Value)
            .map_err(|_| format!("expected `auto` or a number, got `{s}`"))
    }
}

#[derive(Debug, Args)]
pub struct BiopsyArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// xy, xz, yz or fit.
    #[arg(long, default_value = "fit")]
    pub plane: trajart_core::ProjectionPlane,
    #[arg(long, default_value = "auto")]
    pub epsilon: Epsilon,
    /// Points sampled along the spline.
    #[arg(long, default_value_t = 400)]
    pub samples: usize,
    #[arg(long, default_value = "simplified.csv")]
    pub out: PathBuf,
    #[arg(long, default_value = "curve3d.csv")]
    pub curve: PathBuf,
    #[arg(long, default_value = "projected.csv")]
    pub projected: PathBuf,
    #[arg(long, default_value = "biopsy.svg")]
    pub svg: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn epsilon_values() {
        assert_eq!("auto".parse::<Epsilon>().unwrap(), Epsilon::Auto);
        assert_eq!("0".parse::<Epsilon>().unwrap(), Epsilon::Value(0.0));
        assert!("wide".parse::<Epsilon>().is_err());
    }

    #[test]
    fn defaults_mirror_the_method() {
        let cli = Cli::try_parse_from(["trajart", "train", "--in", "letters"]).unwrap();
        let Command::Train(t) = cli.command else {
            panic!()
        };
        assert_eq!(
            (t.lr, t.iters, t.m, t.init),
            (1e-4, 10_000, 64, InitArg::Positive)
        );
        let cli = Cli::try_parse_from(["trajart", "generalize", "--in", "letters"]).unwrap();
        let Command::Generalize(g) = cli.command else {
            panic!()
        };
        assert_eq!(g.k, 10);
    }
}

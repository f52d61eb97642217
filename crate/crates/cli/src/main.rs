mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::Failure;

/// Recover specular reflectance maps and a renderable surface light field
/// from a mesh and posed color frames.
#[derive(Debug, Parser)]
#[command(name = "speclight", version)]
struct Cli {
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the seed of the optimizer and of synthetic geometry noise.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic dataset with ground truth.
    Synth(SynthArgs),
    /// Estimate per-vertex diffuse albedo as a robust minimum over views.
    EstimateDiffuse(DiffuseArgs),
    /// Optimize basis SRMs and per-vertex material weights.
    EstimateSrm(SrmArgs),
    /// Render frames from a finished run.
    Render(RenderArgs),
    /// Compare renders of the test frames against the captured images.
    Eval(EvalArgs),
    /// Dump per-frame component images.
    Components(ComponentsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FrameFormatArg {
    Pfm,
    Png,
    Both,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Scene description (TOML).
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    format: FrameFormatArg,
}

#[derive(Debug, Args)]
struct DatasetArgs {
    /// `scene.toml` or the directory holding it.
    #[arg(long)]
    scene: PathBuf,
    /// Overrides the frames directory named in `scene.toml`.
    #[arg(long)]
    frames: Option<PathBuf>,
    /// Train-frame subsampling stride (default from `scene.toml`, else 10).
    #[arg(long)]
    stride: Option<usize>,
}

#[derive(Debug, Args)]
struct DiffuseArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SrmArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Optimizer settings (TOML); flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Mesh whose vertex colors hold the diffuse albedo. Estimated from
    /// the train frames when absent.
    #[arg(long)]
    albedo: Option<PathBuf>,
    /// Number of basis materials.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr_srm: Option<f64>,
    #[arg(long)]
    lr_logits: Option<f64>,
    /// Specular sparsity weight.
    #[arg(long)]
    lambda_s: Option<f64>,
    /// Material-weight smoothness weight.
    #[arg(long)]
    lambda_w: Option<f64>,
    /// SRM width in texels; the height is half of it.
    #[arg(long)]
    srm_width: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitArg {
    Train,
    Test,
    All,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Output directory of `estimate-srm`.
    #[arg(long)]
    run: PathBuf,
    /// Modulate the specular image by Schlick's term with this base
    /// reflectance instead of adding it unchanged.
    #[arg(long)]
    fresnel: Option<f64>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum, default_value = "all")]
    split: SplitArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Write the full report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ComponentsArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    /// Only these frame ids.
    #[arg(long, value_delimiter = ',')]
    ids: Vec<usize>,
    #[arg(long)]
    out: PathBuf,
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
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .parse_default_env()
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Synth(a) => commands::synth(&a, cli.seed),
        Command::EstimateDiffuse(a) => commands::estimate_diffuse(&a),
        Command::EstimateSrm(a) => commands::estimate_srm(&a, cli.seed),
        Command::Render(a) => commands::render(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Components(a) => commands::components(&a),
    }
}

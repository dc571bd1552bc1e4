use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mather_cli::config::OUT_DIR_ENV;
use mather_cli::{run, CliError, Command, RunConfig, Settings};

/// Stable norms, beta-functions and rigidity checks on the 2-torus.
#[derive(Parser)]
#[command(name = "mather", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Stable norm and beta of each class.
    Beta(Common),
    /// Boundary of the stable-norm unit ball.
    NormBall {
        #[command(flatten)]
        common: Common,
        /// Number of boundary directions.
        #[arg(long)]
        dirs: Option<usize>,
    },
    /// Compares the beta-functions of two metrics against their distortion.
    Compare(Common),
    /// Decides whether a conformally flat metric is flat.
    FlatRigidity(Common),
    /// Beta of a kinetic Lagrangian with a potential.
    Mane {
        #[command(flatten)]
        common: Common,
        /// Largest cover multiplicity tried per class.
        #[arg(long)]
        m_max: Option<u32>,
    },
    /// Analytic gradients against finite differences.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        /// Number of random fixtures.
        #[arg(long)]
        fixtures: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Metric (or Lagrangian) document.
    #[arg(long)]
    metric: Option<PathBuf>,
    /// Second metric for `compare`.
    #[arg(long)]
    metric2: Option<PathBuf>,
    /// Classes as "p,q;p,q;...".
    #[arg(long, allow_hyphen_values = true)]
    classes: Option<String>,
    /// All classes with |p|, |q| <= B, one per sign pair.
    #[arg(long = "box", value_name = "B")]
    box_size: Option<i64>,
    #[arg(long)]
    starts: Option<usize>,
    /// Initial node count per loop.
    #[arg(long)]
    nodes: Option<usize>,
    /// Mesh doublings after the initial level.
    #[arg(long)]
    levels: Option<usize>,
    /// Relative tolerance of the equality flag.
    #[arg(long)]
    tol_rel: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
    /// Worker threads (default: number of processors).
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn settings(self) -> Result<Settings, CliError> {
        let file = match &self.config {
            Some(p) => Settings::load(p)?,
            None => Settings::default(),
        };
        let flags = Settings {
            metric: self.metric,
            metric2: self.metric2,
            classes: self.classes,
            box_size: self.box_size,
            starts: self.starts,
            nodes: self.nodes,
            levels: self.levels,
            tol_rel: self.tol_rel,
            seed: self.seed,
            out_dir: self.out_dir,
            workers: self.workers,
            ..Settings::default()
        };
        Ok(flags.over(file))
    }
}

fn resolve(sub: Sub) -> Result<RunConfig, CliError> {
    let (command, common, extra) = match sub {
        Sub::Beta(c) => (Command::Beta, c, Settings::default()),
        Sub::NormBall { common, dirs } => (
            Command::NormBall,
            common,
            Settings {
                dirs,
                ..Settings::default()
            },
        ),
        Sub::Compare(c) => (Command::Compare, c, Settings::default()),
        Sub::FlatRigidity(c) => (Command::FlatRigidity, c, Settings::default()),
        Sub::Mane { common, m_max } => (
            Command::Mane,
            common,
            Settings {
                m_max,
                ..Settings::default()
            },
        ),
        Sub::Gradcheck { common, fixtures } => (
            Command::Gradcheck,
            common,
            Settings {
                fixtures,
                ..Settings::default()
            },
        ),
    };
    RunConfig::resolve(command, extra.over(common.settings()?))
}

fn execute(cfg: &RunConfig) -> Result<mather_cli::Outcome, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| run(cfg))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = resolve(cli.command).and_then(|cfg| execute(&cfg));
    match outcome {
        Ok(o) => {
            println!("{}", o.summary);
            for f in &o.files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(o.exit_code as u8)
        }
        Err(e) => {
            eprintln!("mather: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

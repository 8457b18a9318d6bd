use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use hflc_cli::{
    cmd_count_rules, cmd_curve, cmd_gait, cmd_surface, cmd_train, exit_code, usage, RunConfig,
    SurfaceRequest, EXIT_USAGE,
};
use hflc_core::controller::RightLegData;

/// Hierarchical fuzzy controllers for a planar biped walk cycle.
#[derive(Parser, Debug)]
#[command(name = "hflc", version)]
struct Cli {
    #[command(flatten)]
    global: Global,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Frames per gait cycle.
    #[arg(long, global = true, value_name = "N")]
    frames: Option<usize>,

    /// Training epochs per unit.
    #[arg(long, global = true, value_name = "N")]
    epochs: Option<usize>,

    /// Train units concurrently (identical results).
    #[arg(long, global = true)]
    parallel: bool,

    /// Train right-leg units on left-leg data reflected about x = 0.
    #[arg(long, global = true)]
    mirrored_right: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the reference gait and write gait.csv.
    Gait,
    /// Train all sub-controllers and write assembly.json plus epoch traces.
    Train {
        /// Samples per unit; defaults to the largest configured size.
        #[arg(long)]
        size: Option<usize>,
    },
    /// Held-out SSE per unit for each training size; writes curve.csv.
    Curve {
        /// Comma-separated training sizes.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
    /// Evaluate one unit over a grid of two of its inputs.
    Surface {
        #[arg(long)]
        controller: String,
        #[arg(long)]
        output: String,
        /// Two comma-separated input signals spanning the grid.
        #[arg(long, value_delimiter = ',', required = true)]
        free: Vec<String>,
        /// Values for the other inputs as signal=value; default midpoints.
        #[arg(long, value_delimiter = ',')]
        fixed: Vec<String>,
        #[arg(long, default_value_t = 31)]
        resolution: usize,
        /// Assembly bundle; defaults to <out>/assembly.json.
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
    /// Compare flat and hierarchical rule counts.
    CountRules {
        #[arg(short, long)]
        n: usize,
        #[arg(short, long, default_value_t = 3)]
        m: usize,
        /// raju, jellali or joo; all when omitted.
        #[arg(long)]
        topology: Option<String>,
    },
}

fn config(g: &Global) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(o) = &g.out {
        cfg.out = o.clone();
    }
    if let Some(f) = g.frames {
        cfg.gait.frames = f;
    }
    if let Some(e) = g.epochs {
        cfg.training.epochs = e;
    }
    cfg.parallel |= g.parallel;
    if g.mirrored_right {
        cfg.right_leg = RightLegData::Mirrored { axis: 0.0 };
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<String> {
    if let Command::CountRules { n, m, topology } = &cli.command {
        let (text, err) = cmd_count_rules(*n, *m, topology.as_deref())?;
        print!("{text}");
        return match err {
            Some(e) => Err(e),
            None => Ok(String::new()),
        };
    }
    let mut cfg = config(&cli.global)?;
    match cli.command {
        Command::Gait => cmd_gait(&cfg),
        Command::Train { size } => cmd_train(&cfg, size),
        Command::Curve { sizes } => {
            if let Some(s) = sizes {
                cfg.sizes = s;
            }
            cmd_curve(&cfg)
        }
        Command::Surface {
            controller,
            output,
            free,
            fixed,
            resolution,
            bundle,
        } => {
            let [a, b]: [String; 2] = free
                .try_into()
                .map_err(|_| usage("--free takes two signals"))?;
            cmd_surface(
                &cfg,
                &SurfaceRequest {
                    controller,
                    output,
                    free: [a, b],
                    fixed,
                    resolution,
                    bundle,
                },
            )
        }
        Command::CountRules { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

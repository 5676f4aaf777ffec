//! Reproducible command-line pipelines over the `crowdtrack` core.

pub mod commands;
pub mod config;
pub mod formats;
pub mod output;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use crowdtrack::sparsegrid::Topology;

#[derive(Debug, Parser)]
#[command(name = "crowdtrack", version, about = "Crowded-pedestrian 3D tracking workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; must be absent or empty.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides every seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate ground truth and corrupted detections.
    Gen {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Heatmaps, density weights and offset targets from ground truth.
    Targets {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        gt: PathBuf,
        /// Cell size as `dx,dy` in meters.
        #[arg(long, value_parser = parse_pair)]
        grid: Option<(f64, f64)>,
        /// Only this frame.
        #[arg(long)]
        frame: Option<usize>,
        /// Also write grayscale PGM images.
        #[arg(long)]
        dump_pgm: bool,
    },
    /// Link detections into trajectories.
    Track {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        det: PathBuf,
    },
    /// CLEAR-MOT metrics of trajectories against ground truth.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        iou_th: Option<f64>,
        /// Density statistic radius in meters.
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Mean neighbor count within one or more radii.
    Density {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        gt: PathBuf,
        /// Comma-separated radii in meters.
        #[arg(long, value_delimiter = ',')]
        radius: Vec<f64>,
    },
    /// Sparse-grid stride, resolution and occupancy per encoder topology.
    Voxelshapes {
        #[command(flatten)]
        common: CommonArgs,
        /// Sample the point cloud from these boxes instead of a simulated scene.
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        frame: Option<usize>,
        /// Comma-separated topologies (a, b, c).
        #[arg(long, value_delimiter = ',', default_value = "a,b,c")]
        topology: Vec<Topology>,
    },
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected dx,dy, got '{s}'"))?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("'{v}': {e}"));
    Ok((parse(a)?, parse(b)?))
}

fn common(c: &CommonArgs) -> commands::Common<'_> {
    commands::Common {
        config: c.config.as_deref(),
        out: &c.out,
        seed: c.seed,
    }
}

/// Runs one command and returns the output directory.
pub fn run(cli: &Cli) -> Result<PathBuf> {
    match &cli.command {
        Command::Gen { common: c } => commands::gen(&common(c)),
        Command::Targets {
            common: c,
            gt,
            grid,
            frame,
            dump_pgm,
        } => commands::targets(
            &common(c),
            &commands::TargetsOpts {
                gt,
                grid: *grid,
                frame: *frame,
                dump_pgm: *dump_pgm,
            },
        ),
        Command::Track { common: c, det } => commands::track(&common(c), det),
        Command::Eval {
            common: c,
            gt,
            traj,
            iou_th,
            radius,
        } => commands::eval(
            &common(c),
            &commands::EvalOpts {
                gt,
                traj,
                iou_th: *iou_th,
                radius: *radius,
            },
        ),
        Command::Density { common: c, gt, radius } => commands::density(&common(c), gt, radius),
        Command::Voxelshapes {
            common: c,
            gt,
            frame,
            topology,
        } => commands::voxelshapes(
            &common(c),
            &commands::VoxelOpts {
                gt: gt.as_deref(),
                frame: *frame,
                topologies: topology.clone(),
            },
        ),
    }
    .with_context(|| format!("{} failed", command_name(&cli.command)))
}

pub fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Gen { .. } => "gen",
        Command::Targets { .. } => "targets",
        Command::Track { .. } => "track",
        Command::Eval { .. } => "eval",
        Command::Density { .. } => "density",
        Command::Voxelshapes { .. } => "voxelshapes",
    }
}

/// Parses arguments (including the program name) and runs the command.
pub fn run_args<I, S>(args: I) -> Result<PathBuf>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    run(&cli)
}

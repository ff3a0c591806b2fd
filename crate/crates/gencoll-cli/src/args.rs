use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Collision-channel toolkit: schedule construction, throughput simulation,
/// offset sweeps, and throughput-region analysis.
#[derive(Debug, Parser)]
#[command(name = "gencoll", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a schedule matrix whose throughput is offset-independent.
    Construct(ConstructArgs),
    /// Evaluate per-link throughput under one offset assignment.
    Simulate(SimulateArgs),
    /// Enumerate offset assignments and report the per-link worst case.
    Sweep(SweepArgs),
    /// Throughput-region queries on a collision profile.
    #[command(subcommand)]
    Region(RegionCommand),
}

/// Offset model for simulation and sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Integer offsets; packets align slot by slot.
    Sync,
    /// Arbitrary rational offsets; partial overlap also collides.
    Nonsync,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Sync => "sync",
            Mode::Nonsync => "nonsync",
        }
    }
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    /// Number of links.
    #[arg(long)]
    pub links: usize,
    /// Radix of the construction; also the duty-factor denominator.
    #[arg(long)]
    pub q: u64,
    /// Duty numerators q_1,...,q_M, each between 0 and q.
    #[arg(long, value_delimiter = ',', required = true)]
    pub duty: Vec<u64>,
    /// Expand every slot into k sub-slots (k at least 2).
    #[arg(long)]
    pub expand: Option<usize>,
    /// Output path for the matrix file.
    #[arg(long)]
    pub out: PathBuf,
    /// Collision profile; when given, the report predicts the guaranteed
    /// throughput point of the constructed duty factors.
    #[arg(long)]
    pub profile: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Matrix file.
    #[arg(long)]
    pub matrix: PathBuf,
    /// Collision profile file.
    #[arg(long)]
    pub profile: PathBuf,
    /// Offsets file, one `<receiver> <transmitter> <value>` line per pair.
    #[arg(long)]
    pub offsets: PathBuf,
    /// Force the evaluation mode; by default it is inferred from the offsets.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Matrix file.
    #[arg(long)]
    pub matrix: PathBuf,
    /// Collision profile file.
    #[arg(long)]
    pub profile: PathBuf,
    /// Offset model to enumerate; defaults to sync.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Cap on the number of offset combinations; overrides GENCOLL_MAX_SPACE.
    #[arg(long)]
    pub max_space: Option<u64>,
    /// Worker threads for the sweep; defaults to the available cores.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum RegionCommand {
    /// Guaranteed throughput point of a duty-factor vector.
    Point(PointArgs),
    /// Test whether a target throughput vector is achievable.
    Member(MemberArgs),
    /// Certify whether duty factors lie on the outer region boundary.
    Boundary(BoundaryArgs),
    /// Scale duty factors onto the outer region boundary.
    Project(ProjectArgs),
    /// Maximize link 1's throughput subject to floors on links 2..M.
    Solve(SolveArgs),
}

#[derive(Debug, Args)]
pub struct PointArgs {
    /// Duty factors f_1,...,f_M as rationals or decimals.
    #[arg(long, value_delimiter = ',', required = true)]
    pub duty: Vec<String>,
    /// Collision profile file.
    #[arg(long)]
    pub profile: PathBuf,
}

#[derive(Debug, Args)]
pub struct MemberArgs {
    /// Target throughputs T_1,...,T_M as rationals or decimals.
    #[arg(long, value_delimiter = ',', required = true)]
    pub target: Vec<String>,
    /// Collision profile file.
    #[arg(long)]
    pub profile: PathBuf,
}

#[derive(Debug, Args)]
pub struct BoundaryArgs {
    /// Duty factors f_1,...,f_M as rationals or decimals.
    #[arg(long, value_delimiter = ',', required = true)]
    pub duty: Vec<String>,
    /// Collision profile file.
    #[arg(long)]
    pub profile: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    /// Duty factors f_1,...,f_M as rationals or decimals.
    #[arg(long, value_delimiter = ',', required = true)]
    pub duty: Vec<String>,
    /// Collision profile file.
    #[arg(long)]
    pub profile: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Floor targets T_2,...,T_M for every link except link 1.
    #[arg(long, value_delimiter = ',', required = true)]
    pub targets: Vec<String>,
    /// Collision profile file.
    #[arg(long)]
    pub profile: PathBuf,
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "assouad", version, about = "Nested cubes, doubling measures and Assouad/lower dimensions on finite metric spaces")]
pub struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Output format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Keep every evidence entry in dimension reports.
    #[arg(long, global = true)]
    pub emit_evidence: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Emit a tree spec or a point set.
    Gen {
        #[command(subcommand)]
        what: GenCommand,
        /// Write to a file instead of stdout.
        #[arg(long, global = true)]
        out: Option<PathBuf>,
    },
    /// Build or validate cube trees.
    Tree {
        #[command(subcommand)]
        action: TreeCommand,
    },
    /// Build mass assignments.
    Measure {
        #[command(subcommand)]
        action: MeasureCommand,
    },
    /// Dimension estimates and exact values.
    Dim {
        #[command(subcommand)]
        action: DimCommand,
    },
    /// Quantitative checks.
    Check {
        #[command(subcommand)]
        action: CheckCommand,
    },
    /// Exact dimensions over a grid of p.
    Sweep(SweepArgs),
    /// Find p (and eta) realizing a target dimension.
    Solve(SolveArgs),
}

#[derive(Subcommand, Debug)]
pub enum GenCommand {
    /// Triadic spec: three children, the middle one central, delta = 1/3.
    Triadic,
    /// Every cube has m children, j of them central.
    Uniform {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        delta: String,
        #[arg(long, default_value_t = 1)]
        j: usize,
    },
    /// Cyclic spec whose chains have boundary fraction at most beta_num/beta_den.
    BoundaryRich {
        #[arg(long)]
        beta_num: usize,
        #[arg(long)]
        beta_den: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        delta: String,
    },
    /// Left endpoints of the depth-level middle-thirds Cantor intervals.
    Cantor {
        #[arg(long)]
        depth: usize,
    },
    /// n^d grid points in the unit cube.
    Grid {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        n: usize,
        /// Metric for coordinate input.
        #[arg(long, default_value = "euclidean")]
        metric: String,
    },
    /// n uniform random points in the unit cube.
    Random {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        n: usize,
        /// Metric for coordinate input.
        #[arg(long, default_value = "euclidean")]
        metric: String,
    },
    /// Triadic interval midpoints; `--tree` also writes their interval tree.
    TriadicGrid {
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        tree: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct PointsArg {
    /// Point CSV (`id,x1,..` or `id_row,id_col,dist`).
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Metric for coordinate input.
    #[arg(long, default_value = "euclidean")]
    pub metric: String,
}

#[derive(Subcommand, Debug)]
pub enum TreeCommand {
    /// Build from a point set, or unfold a spec.
    Build {
        #[command(flatten)]
        points: PointsArg,
        #[arg(long, conflicts_with = "points")]
        spec: Option<PathBuf>,
        #[arg(long)]
        delta: Option<String>,
        /// Number of levels (default: until leaves are singletons).
        #[arg(long)]
        levels: Option<usize>,
        /// Depth of a spec unfolding.
        #[arg(long)]
        depth: Option<usize>,
        /// Origin point id (default: first point).
        #[arg(long)]
        origin: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the structural properties; exit 1 on failure.
    Validate {
        #[arg(long)]
        tree: PathBuf,
        #[command(flatten)]
        points: PointsArg,
    },
}

#[derive(Subcommand, Debug)]
pub enum MeasureCommand {
    /// Masses of mu_p (or mu_{p,eta}) on a tree.
    Build {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        p: String,
        /// Comma-separated weights of the central slots.
        #[arg(long)]
        eta: Option<String>,
        /// Relabel j central children per cube before building (needs --points).
        #[arg(long)]
        select_central: Option<usize>,
        /// Where the relabelled tree is written.
        #[arg(long, requires = "select_central")]
        tree_out: Option<PathBuf>,
        #[command(flatten)]
        points: PointsArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Assouad,
    Lower,
    SetAssouad,
    SetLower,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MeasureMethod {
    Chain,
    Ball,
}

#[derive(Args, Debug)]
pub struct WindowArgs {
    #[arg(long)]
    pub r_min: Option<f64>,
    #[arg(long)]
    pub r_max: Option<f64>,
    /// Maximum number of centers visited.
    #[arg(long, default_value_t = 256)]
    pub budget: usize,
}

#[derive(Subcommand, Debug)]
pub enum DimCommand {
    /// Set dimension estimate from covering numbers.
    Set {
        #[command(flatten)]
        points: PointsArg,
        #[arg(long, value_enum, default_value = "assouad")]
        kind: KindArg,
        #[command(flatten)]
        window: WindowArgs,
    },
    /// Measure dimension estimate from chains or balls.
    Measure {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        mass: PathBuf,
        #[arg(long, value_enum, default_value = "chain")]
        method: MeasureMethod,
        #[arg(long, value_enum, default_value = "assouad")]
        kind: KindArg,
        #[arg(long, default_value_t = 1)]
        m_min: usize,
        #[command(flatten)]
        points: PointsArg,
        #[command(flatten)]
        window: WindowArgs,
    },
    /// Exact dimension of a spec (spec read from stdin without --spec).
    Exact {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value = "1")]
        p: String,
        #[arg(long)]
        eta: Option<String>,
        #[arg(long, value_enum, default_value = "assouad")]
        kind: KindArg,
    },
}

#[derive(Args, Debug)]
pub struct SpecArg {
    /// Spec JSON (stdin when absent).
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum CheckCommand {
    /// Key ratio estimate over every chain of a tree.
    KeyEstimate {
        #[arg(long)]
        tree: Option<PathBuf>,
        #[arg(long, conflicts_with = "tree")]
        spec: Option<PathBuf>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        p: String,
        #[arg(long)]
        p2: String,
    },
    /// Dimension gaps against the continuity modulus.
    Continuity {
        #[command(flatten)]
        spec: SpecArg,
        /// Pairs `p:p2`, comma-separated.
        #[arg(long)]
        pairs: Option<String>,
        /// Number of seeded random pairs.
        #[arg(long, default_value_t = 0)]
        random: usize,
    },
    /// Offspring count against the binomial bound.
    Binom {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long)]
        beta: String,
        #[arg(long)]
        n: usize,
        /// Refuse specs whose chains exceed the boundary cap.
        #[arg(long)]
        strict: bool,
    },
    /// Lower bound and growth of dim_A mu_p as p decreases.
    Blowup {
        #[command(flatten)]
        spec: SpecArg,
        /// Comma-separated values of p.
        #[arg(long)]
        p: String,
    },
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub spec: SpecArg,
    /// Comma-separated values of p.
    #[arg(long)]
    pub p: String,
    #[arg(long)]
    pub eta: Option<String>,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub spec: SpecArg,
    #[arg(long)]
    pub target: f64,
    #[arg(long, value_enum, default_value = "assouad")]
    pub kind: KindArg,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

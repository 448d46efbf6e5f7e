//! Command-line surface. Vertex lists are separated by `;` because element
//! names such as `(1,2)` contain commas.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "harmlab", version, about = "Exact harmonic functions, Garden of Eden duality and random walks")]
pub struct Cli {
    /// Worker threads for Monte Carlo runs; results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Seed for Monte Carlo runs (required by every sampling command).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<std::path::PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Enumerate a ball of a weighted Cayley graph.
    Cayley(CayleyArgs),
    /// Solve a Dirichlet problem exactly.
    Dirichlet(DirichletArgs),
    /// Dimension of restrictions of harmonic functions to a window.
    Harmdim(HarmdimArgs),
    /// Harmonic extension vs. finitely supported transpose-harmonic witness.
    Duality(DualityArgs),
    /// Ball surjectivity, pre-injectivity witnesses and preimages of a local linear map.
    Gofe(GofeArgs),
    /// Rank ratios of a local linear map over boxes.
    Mdim(MdimArgs),
    /// Random walk computations.
    #[command(subcommand)]
    Walk(WalkCommand),
    /// The lamplighter functions h_R.
    #[command(subcommand)]
    Ll(LlCommand),
    /// Harmonic functions of linear growth on virtually abelian groups.
    Linharm(LinharmArgs),
}

/// Where a graph comes from: a gallery id or JSON file, or a group with a
/// measure.
#[derive(Args, Debug, Clone, Serialize)]
pub struct Source {
    /// `gallery:trofimov[:<cells>]`, `gallery:asym[:<depth>]`, `gallery:c<k>`,
    /// `gallery:path:<a>:<b>`, or a graph JSON file.
    #[arg(long, conflicts_with = "group")]
    pub graph: Option<String>,
    /// `z`, `z2`, `z3`, `zd<k>`, `zmod<m>`, `dihedral`, `lamplighter`, or a
    /// group JSON file.
    #[arg(long)]
    pub group: Option<String>,
    /// `standard` or `uniform:<tok>,...` (e.g. `uniform:pm1,pm2`).
    #[arg(long, requires = "group")]
    pub measure: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct CayleyArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub radius: usize,
    /// Include the loaded graph in the report.
    #[arg(long)]
    pub emit_graph: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct DirichletArgs {
    #[command(flatten)]
    pub source: Source,
    /// Radius of the ball loaded from an infinite family.
    #[arg(long, default_value_t = 6)]
    pub radius: usize,
    /// Region: `;`-separated vertices, or `ball:<r>`.
    #[arg(long)]
    pub region: String,
    /// Boundary data `v=p/q;w=p/q`.
    #[arg(long, default_value = "")]
    pub boundary: String,
    /// Value on boundary vertices not listed.
    #[arg(long)]
    pub default: Option<String>,
    /// Value credited to weight leaving the loaded graph.
    #[arg(long)]
    pub frontier: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct HarmdimArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub window: usize,
    #[arg(long, default_value_t = 30)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 4)]
    pub stall: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct DualityArgs {
    #[command(flatten)]
    pub source: Source,
    /// The set X, `;`-separated.
    #[arg(long)]
    pub x: String,
    #[arg(long, default_value_t = 12)]
    pub depth: usize,
}

/// A local linear map: a JSON specification, or the Laplacian of a source.
#[derive(Args, Debug, Clone, Serialize)]
pub struct MapSource {
    #[arg(long, conflicts_with_all = ["graph", "group"])]
    pub automaton: Option<String>,
    #[command(flatten)]
    pub source: Source,
    /// `Q` or `GF(p)`, for Laplacians given by a source.
    #[arg(long, default_value = "Q")]
    pub field: String,
    /// Use the transpose of the map.
    #[arg(long)]
    pub transpose: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct GofeArgs {
    #[command(flatten)]
    pub map: MapSource,
    #[arg(long)]
    pub radius: usize,
    /// Also construct a preimage on B(depth) of the target.
    #[arg(long)]
    pub preimage_depth: Option<usize>,
    /// Target as JSON `{"vertex": ["p/q", ...]}`; defaults to δ at the base.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub stall: usize,
    #[arg(long, default_value_t = 40)]
    pub max_depth: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct MdimArgs {
    #[command(flatten)]
    pub map: MapSource,
    #[arg(long)]
    pub nmax: usize,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WalkCommand {
    /// Exact distribution of X_n.
    Nstep(NstepArgs),
    /// Exact P_x[T_y = n] for n ≤ nmax.
    Hitdist(HitdistArgs),
    /// P[T_A < T_B] exactly, or level-crossing races on a group.
    Race(RaceArgs),
    /// P_x[T_y = n] = P_y[T_x = n] over pairs, or the asymmetry certificate.
    Symcheck(SymcheckArgs),
    /// P_x[X_n = y] ≤ P_e[X_n = e] over pairs of a ball.
    Offdiag(OffdiagArgs),
    /// Symmetry of loop and crossing probabilities avoiding the other point.
    Taboo(TabooArgs),
    /// Return probabilities, partial sums and hitting bounds.
    Transience(TransienceArgs),
    /// First-hit decompositions with sound interval bounds.
    Hitsfirst(HitsfirstArgs),
    /// Spread of conditioned race probabilities over spheres.
    Critscan(CritscanArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct NstepArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, default_value = "identity")]
    pub start: String,
    #[arg(long)]
    pub n: usize,
    /// Absorbing vertices, `;`-separated.
    #[arg(long, default_value = "")]
    pub absorbing: String,
    /// `error` or `absorb`.
    #[arg(long, default_value = "error")]
    pub policy: String,
}

#[derive(Args, Debug, Serialize)]
pub struct HitdistArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub x: String,
    #[arg(long)]
    pub y: String,
    #[arg(long)]
    pub nmax: usize,
    #[arg(long, default_value = "error")]
    pub policy: String,
}

#[derive(Args, Debug, Serialize)]
pub struct RaceArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub start: String,
    /// Target set A (value 1), `;`-separated.
    #[arg(long, conflicts_with = "level")]
    pub a: Option<String>,
    /// Target set B (value 0), `;`-separated.
    #[arg(long, requires = "a")]
    pub b: Option<String>,
    /// Race the cyclic coordinate from level m up to m + R instead.
    #[arg(long)]
    pub level: Option<i64>,
    /// Comma-separated list of R for level races.
    #[arg(long = "R", requires = "level")]
    pub radii: Option<String>,
    /// Radius of the ball loaded for set races on infinite families.
    #[arg(long, default_value_t = 30)]
    pub radius: usize,
    /// Largest number of transient states in a level race.
    #[arg(long, default_value_t = 200_000)]
    pub cap: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct SymcheckArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub nmax: usize,
    /// Pairs are taken from the ball of this radius (infinite families).
    #[arg(long, default_value_t = 2)]
    pub pairs_radius: usize,
    /// Certify P_x[T_y<∞] > P_y[T_x<∞] on the asymmetric graph instead.
    #[arg(long)]
    pub asymmetry: bool,
    /// Loaded tree depth for the asymmetry certificate.
    #[arg(long, default_value_t = 8)]
    pub depth: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct OffdiagArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub radius: usize,
    #[arg(long)]
    pub nmax: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct TabooArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub x: String,
    #[arg(long)]
    pub y: String,
    #[arg(long)]
    pub nmax: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct TransienceArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long = "N")]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub dmax: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct HitsfirstArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub x: String,
    #[arg(long)]
    pub y: String,
    #[arg(long, default_value_t = 12)]
    pub depth: usize,
    #[arg(long, default_value_t = 20_000)]
    pub sweeps: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct CritscanArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub x: String,
    #[arg(long)]
    pub y: String,
    /// Comma-separated sphere radii.
    #[arg(long)]
    pub radii: String,
    #[arg(long, default_value_t = 12)]
    pub depth: usize,
    #[arg(long, default_value_t = 20_000)]
    pub sweeps: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Mc,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LlCommand {
    /// h_R(g) exactly or by Monte Carlo.
    H(HArgs),
    /// Harmonicity, positivity and growth bounds across radii.
    Props(PropsArgs),
    /// Table of R·h_R(g) across R.
    Limit(LimitArgs),
    /// Conditioned coset-escape probabilities against the minimum level.
    Decay(DecayArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct HArgs {
    #[arg(long = "R")]
    pub r: i64,
    /// Lamplighter element: `identity`, `(m,{l1,l2})`, or a word.
    #[arg(long, default_value = "identity")]
    pub g: String,
    #[arg(long, value_enum, default_value_t = Method::Exact)]
    pub method: Method,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct PropsArgs {
    /// Comma-separated radii.
    #[arg(long, default_value = "4,6,8")]
    pub radii: String,
    /// Sample elements, `;`-separated; a default set is used when absent.
    #[arg(long)]
    pub elements: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct LimitArgs {
    /// Elements, `;`-separated.
    #[arg(long, default_value = "identity;(0,{-1})")]
    pub g: String,
    #[arg(long, default_value = "4,6,8,10")]
    pub radii: String,
    #[arg(long, value_enum, default_value_t = Method::Exact)]
    pub method: Method,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct DecayArgs {
    /// Comma-separated minimum depths n.
    #[arg(long, default_value = "0,4,8")]
    pub n: String,
    #[arg(long = "R", default_value_t = 10)]
    pub r: i64,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct LinharmArgs {
    #[command(flatten)]
    pub source: Source,
    /// Coordinate of the cyclic part (0-based).
    #[arg(long, default_value_t = 0)]
    pub coordinate: usize,
    #[arg(long, default_value_t = 6)]
    pub verify_radius: usize,
}

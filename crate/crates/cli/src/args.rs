use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Flags accepted anywhere on the command line and kept out of manifests.
pub(crate) const GLOBAL_FLAGS: &[&str] = &["--out", "--seed", "--jobs", "--manifest"];

#[derive(Clone, Debug, Parser)]
#[command(name = "carnot-lift", version, about = "Batch driver for Carnot group lifting experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,

    /// Re-run the subcommand recorded in a manifest.json.
    #[arg(long, global = true, value_name = "FILE")]
    pub manifest: Option<PathBuf>,

    /// Artifact directory; CARNOT_LIFT_OUT takes precedence.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Seed for every random choice (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Clone, Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Check antisymmetry, Jacobi and grading of a group definition.
    ValidateAlgebra(GroupArgs),
    /// Group product p*q.
    Mul(MulArgs),
    /// Left quotient p^-1 q, the inverse of p and the quasi-distance.
    Quotient(PairArgs),
    /// Dilation delta_lambda(p).
    Dilate(DilateArgs),
    /// Left-invariant frame at p (column j is X_j).
    Frame(PointArgs),
    /// Coframe at p (row k is omega_k).
    Coframe(PointArgs),
    /// Build and check a central extension.
    BuildExtension(ExtensionArgs),
    /// Potential 1-form of an extension at sample points.
    Potential(PotentialArgs),
    /// Obstruction to extending graded linear data to a homomorphism.
    Obstruction(ObstructionArgs),
    /// Integrate a horizontal control from a start point.
    Endpoint(EndpointArgs),
    /// Horizontal lift of a base curve.
    LiftCurve(LiftCurveArgs),
    /// Probe a base map for a contact lift.
    CheckLift(CheckLiftArgs),
    /// Construct the contact lift of a base map.
    LiftMap(LiftMapArgs),
    /// Fiber homomorphism of a lifted map.
    FiberHom(LiftMapArgs),
    /// Finite-scale Pansu quotient matrix of a lifted map.
    Pansu(PansuArgs),
    /// Optionally mollify, then Moser-correct a map to the standard form.
    MoserCorrect(MoserArgs),
    /// Jacobian determinant and probe area ratios of a planar map.
    AreaCheck(AreaArgs),
    /// Quaternionic forms and the rigidity check on matrices.
    QuaternionicCheck(QuaternionicArgs),
    /// Decay of pulled-back coframe coefficients under mollification.
    DecayExperiment(DecayArgs),
    /// Sampled Hölder seminorm.
    Seminorm(SeminormArgs),
    /// Dyadic Riemann-Stieltjes sums of a Young integral.
    Young(YoungArgs),
    /// Partial Weierstrass sums.
    Weierstrass(WeierstrassArgs),
    /// Contact generator constraints on the step-3 filiform group.
    FiliformGenerator(GeneratorArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::ValidateAlgebra(_) => "validate-algebra",
            Command::Mul(_) => "mul",
            Command::Quotient(_) => "quotient",
            Command::Dilate(_) => "dilate",
            Command::Frame(_) => "frame",
            Command::Coframe(_) => "coframe",
            Command::BuildExtension(_) => "build-extension",
            Command::Potential(_) => "potential",
            Command::Obstruction(_) => "obstruction",
            Command::Endpoint(_) => "endpoint",
            Command::LiftCurve(_) => "lift-curve",
            Command::CheckLift(_) => "check-lift",
            Command::LiftMap(_) => "lift-map",
            Command::FiberHom(_) => "fiber-hom",
            Command::Pansu(_) => "pansu",
            Command::MoserCorrect(_) => "moser-correct",
            Command::AreaCheck(_) => "area-check",
            Command::QuaternionicCheck(_) => "quaternionic-check",
            Command::DecayExperiment(_) => "decay-experiment",
            Command::Seminorm(_) => "seminorm",
            Command::Young(_) => "young",
            Command::Weierstrass(_) => "weierstrass",
            Command::FiliformGenerator(_) => "filiform-generator",
        }
    }
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct GroupArgs {
    /// Built-in name (heisenberg:n, filiform:3, quaternionic-heisenberg:n,
    /// abelian:n) or a group-definition JSON file.
    #[arg(long, default_value = "heisenberg:1")]
    pub group: String,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Law {
    /// Closed forms up to step 3, series beyond.
    #[default]
    Closed,
    /// Truncated Dynkin series.
    Bch,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct MulArgs {
    #[command(flatten)]
    pub group: GroupArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub p: String,
    #[arg(long, allow_hyphen_values = true)]
    pub q: String,
    #[arg(long, value_enum, default_value_t)]
    pub law: Law,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct PairArgs {
    #[command(flatten)]
    pub group: GroupArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub p: String,
    #[arg(long, allow_hyphen_values = true)]
    pub q: String,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct DilateArgs {
    #[command(flatten)]
    pub group: GroupArgs,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub p: String,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct PointArgs {
    #[command(flatten)]
    pub group: GroupArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub p: String,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct ExtensionArgs {
    /// Extension-definition JSON file, or a group name whose top layer
    /// becomes the fiber.
    #[arg(long, default_value = "heisenberg:1")]
    pub extension: String,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct PotentialArgs {
    #[command(flatten)]
    pub extension: ExtensionArgs,
    /// Base points separated by ';'; defaults to a small grid.
    #[arg(long, allow_hyphen_values = true)]
    pub at: Option<String>,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct ObstructionArgs {
    #[command(flatten)]
    pub extension: ExtensionArgs,
    /// Target extension; defaults to the source.
    #[arg(long)]
    pub target_extension: Option<String>,
    /// Base map L, rows separated by ';' or a CSV file.
    #[arg(long, allow_hyphen_values = true)]
    pub l: String,
    /// Fiber map phi, same format.
    #[arg(long, allow_hyphen_values = true)]
    pub phi: String,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct EndpointArgs {
    #[command(flatten)]
    pub group: GroupArgs,
    /// Control CSV `t,u1,...,um` with node values, linear in between.
    #[arg(long, conflicts_with = "constant")]
    pub control: Option<PathBuf>,
    /// Constant first-layer control.
    #[arg(long, allow_hyphen_values = true)]
    pub constant: Option<String>,
    /// Time nodes for a constant control.
    #[arg(long, default_value_t = 65)]
    pub nodes: usize,
    /// Start point; defaults to the identity.
    #[arg(long, allow_hyphen_values = true)]
    pub start: Option<String>,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct LiftCurveArgs {
    #[command(flatten)]
    pub extension: ExtensionArgs,
    /// Curve CSV `t,x1,...,xn` in the base, or `circle:N` for the unit
    /// circle with N segments.
    #[arg(long)]
    pub curve: String,
    /// Start point in the extended group; defaults to the curve start with
    /// zero fiber.
    #[arg(long, allow_hyphen_values = true)]
    pub start: Option<String>,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct MapArgs {
    /// Map-grid JSON file, or a named map: identity, shear (x1 + x2^2),
    /// square (x1^2), linear (needs --matrix).
    #[arg(long, default_value = "identity")]
    pub map: String,
    /// Nodes per axis for named maps.
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Domain `lo,hi` of every axis for named maps.
    #[arg(long, default_value = "-1,1", allow_hyphen_values = true)]
    pub domain: String,
    /// Matrix of the linear map, rows separated by ';'.
    #[arg(long, allow_hyphen_values = true)]
    pub matrix: Option<String>,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct LiftArgs {
    /// Extension of the source (file or group name).
    #[arg(long)]
    pub extension: Option<String>,
    /// Group whose top-layer extension is used when --extension is absent.
    #[arg(long, default_value = "heisenberg:1")]
    pub group: String,
    /// Extension of the target; defaults to the source.
    #[arg(long)]
    pub target_extension: Option<String>,
    #[command(flatten)]
    pub map: MapArgs,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct CheckLiftArgs {
    #[command(flatten)]
    pub lift: LiftArgs,
    /// Allowed defect per unit loop length.
    #[arg(long, default_value_t = carnot_lift::DEFAULT_TOL)]
    pub tol: f64,
    /// Basepoint for the fiber map; defaults to the chart center.
    #[arg(long, allow_hyphen_values = true)]
    pub basepoint: Option<String>,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct LiftMapArgs {
    #[command(flatten)]
    pub lift: LiftArgs,
    #[arg(long, default_value_t = carnot_lift::DEFAULT_TOL)]
    pub tol: f64,
    /// Fiber axis of the lifted chart, `lo,hi,nodes`.
    #[arg(long, default_value = "-1,1,5", allow_hyphen_values = true)]
    pub fiber: String,
    /// Point of the source extended group; defaults to the origin.
    #[arg(long, allow_hyphen_values = true)]
    pub start: Option<String>,
    /// Its image; defaults to f(base of start) with zero fiber.
    #[arg(long, allow_hyphen_values = true)]
    pub target: Option<String>,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct PansuArgs {
    #[command(flatten)]
    pub lift: LiftMapArgs,
    #[arg(long, default_value_t = 1e-3)]
    pub lambda: f64,
    /// Point of the extended group; defaults to the chart center.
    #[arg(long, allow_hyphen_values = true)]
    pub at: Option<String>,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct MoserArgs {
    #[command(flatten)]
    pub map: MapArgs,
    /// Mollify with this scale before correcting.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Allowed max |Df^T J Df - J| after correction.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 32)]
    pub steps: usize,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct AreaArgs {
    #[command(flatten)]
    pub map: MapArgs,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct QuaternionicArgs {
    /// Quaternionic dimension; matrices are 4n x 4n.
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    /// Random unit quaternions to test.
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    /// Test this matrix (CSV file or rows separated by ';') instead.
    #[arg(long, allow_hyphen_values = true)]
    pub matrix: Option<String>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// Partial Weierstrass sum.
    Weierstrass,
    /// y^2.
    Square,
    /// |y|.
    Kink,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct DecayArgs {
    /// Shear profile g of f(x, y) = (x + g(y), y).
    #[arg(long, value_enum, default_value = "weierstrass")]
    pub profile: Profile,
    /// Last Weierstrass term N.
    #[arg(long, default_value_t = 6)]
    pub terms: usize,
    /// Claimed Hölder exponent; defaults to the profile's.
    #[arg(long)]
    pub beta: Option<f64>,
    /// `lo..hi` for eps = 2^-k, or an explicit comma list.
    #[arg(long, default_value = "4..10")]
    pub eps_grid: String,
    /// Coframe row (0-based).
    #[arg(long, default_value_t = 2)]
    pub omega: usize,
    /// Frame column (0-based).
    #[arg(long, default_value_t = 1)]
    pub field: usize,
    #[arg(long, default_value_t = 65)]
    pub probes: usize,
    /// Fail unless the slope lies in `lo,hi`.
    #[arg(long, allow_hyphen_values = true)]
    pub expect: Option<String>,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct SeminormArgs {
    /// Map-grid JSON file, or `weierstrass` for g_N on [0, 1].
    #[arg(long, default_value = "weierstrass")]
    pub map: String,
    #[arg(long, default_value_t = 6)]
    pub terms: usize,
    /// Source group; defaults to Euclidean space of the map's dimension.
    #[arg(long)]
    pub group: Option<String>,
    #[arg(long, default_value_t = 2.0 / 3.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 4096)]
    pub budget: usize,
    /// Largest sampled separation.
    #[arg(long)]
    pub eps: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    LeftPoint,
    Trapezoid,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct YoungArgs {
    /// Integrand CSV (one value per row, 2^L + 1 rows); defaults to g_N.
    #[arg(long)]
    pub f: Option<PathBuf>,
    /// Integrator CSV; defaults to g_N.
    #[arg(long)]
    pub g: Option<PathBuf>,
    #[arg(long, default_value_t = 6)]
    pub terms: usize,
    /// Dyadic levels `lo..hi`.
    #[arg(long, default_value = "4..14")]
    pub levels: String,
    #[arg(long, default_value_t = 2.0 / 3.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2.0 / 3.0)]
    pub beta: f64,
    #[arg(long, value_enum, default_value = "trapezoid")]
    pub rule: Rule,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct WeierstrassArgs {
    #[arg(long, default_value_t = 6)]
    pub terms: usize,
    /// Points to evaluate, comma separated; otherwise a uniform grid on [0, 1].
    #[arg(long, allow_hyphen_values = true)]
    pub y: Option<String>,
    #[arg(long, default_value_t = 1025)]
    pub samples: usize,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct GeneratorArgs {
    /// Polynomial in x1..x4, e.g. `x3 + x1*x2` or `2*x1^2 - x4`.
    #[arg(long, default_value = "x3 + x1*x2", allow_hyphen_values = true)]
    pub p4: String,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub p2: String,
    /// Stencil step.
    #[arg(long, default_value_t = 1e-2)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Stencil centers per axis on [-1, 1]^4.
    #[arg(long, default_value_t = 3)]
    pub centers: usize,
}

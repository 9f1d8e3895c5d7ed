//! Command-line front end. `run` returns the process exit code: 0 on success,
//! 2 on configuration errors, 1 on runtime errors.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qgrf_core::features::SamplingStrategy;
use qgrf_core::graph::{load_edge_list, Graph};
use qgrf_core::theory::{adjacency_spectrum, TheoryParams};

use crate::experiments::{
    run_clustering, run_frobenius, run_regression, run_theory_check, simulate_diffusion, ClusterParams, DiffusionParams,
    FrobeniusParams, RegressParams, SchemeChoice,
};
use crate::genspec::GeneratorSpec;
use crate::mesh::{load_obj, Mesh};
use crate::{BenchError, Result};

pub const DEFAULT_LAMBDAS: [f64; 5] = [-0.9, -0.5, 0.0, 0.5, 0.9];

#[derive(Debug, Parser)]
#[command(name = "qgrf", version, about = "Graph random feature experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Relative Frobenius error of the K^(2) estimate.
    Frobenius(FrobeniusArgs),
    /// Diffusion with the estimated kernel against backward Euler.
    Diffuse(DiffuseArgs),
    /// Kernel k-means against the exact-kernel clustering.
    Cluster(ClusterArgs),
    /// Mesh-normal kernel regression.
    Regress(RegressArgs),
    /// Definiteness of the closed-form correlation matrices.
    TheoryCheck(TheoryArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeName {
    Iid,
    Antithetic,
    Ensemble,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyName {
    Uniform,
    Weighted,
}

#[derive(Debug, Args)]
pub struct GraphSource {
    /// Edge-list file (`u v [w]` per line, 0-indexed).
    #[arg(long, conflicts_with = "generator")]
    pub graph: Option<PathBuf>,
    /// er:<n>:<p>, tree:<depth>, ladder:<rungs>, path:<n>, complete:<n>, torus:<major>:<minor>.
    #[arg(long)]
    pub generator: Option<String>,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    #[arg(long, value_delimiter = ',', value_enum, default_values_t = [SchemeName::Iid, SchemeName::Antithetic])]
    pub scheme: Vec<SchemeName>,
    /// Offset for the ensemble scheme.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Walkers per ensemble group; defaults to the largest size fitting `delta` and dividing m.
    #[arg(long)]
    pub group_size: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct FrobeniusArgs {
    #[command(flatten)]
    pub source: GraphSource,
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 4, 8, 16])]
    pub walks: Vec<usize>,
    #[arg(long, value_enum, default_value_t = StrategyName::Uniform)]
    pub strategy: StrategyName,
    /// Estimate the diagonal from two independent ensembles.
    #[arg(long)]
    pub two_ensemble_diagonal: bool,
}

#[derive(Debug, Args)]
pub struct DiffuseArgs {
    #[command(flatten)]
    pub source: GraphSource,
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 10)]
    pub walks: usize,
    /// Node holding the initial unit of heat.
    #[arg(long, default_value_t = 0)]
    pub source_node: usize,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub source: GraphSource,
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long, default_value_t = 16)]
    pub walks: usize,
    #[arg(long, default_value_t = 2)]
    pub clusters: usize,
}

#[derive(Debug, Args)]
pub struct RegressArgs {
    /// Triangle mesh in OBJ format.
    #[arg(long, conflicts_with = "generator")]
    pub mesh: Option<PathBuf>,
    /// Mesh generator, torus:<major>:<minor>.
    #[arg(long, default_value = "torus:87:50")]
    pub generator: String,
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long, default_value_t = 6)]
    pub walks: usize,
    #[arg(long, default_value_t = 0.05)]
    pub test_fraction: f64,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    /// Uniform edge weight.
    #[arg(long, default_value_t = 0.1)]
    pub w: f64,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Adjacency eigenvalues; taken from the graph's spectrum when a graph is given.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with_all = ["graph", "generator"])]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long, conflicts_with = "generator")]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub generator: Option<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

fn config(msg: impl Into<String>) -> BenchError {
    BenchError::Config(msg.into())
}

impl GraphSource {
    fn load(&self, seed: u64) -> Result<(Graph, String)> {
        load_graph(self.graph.as_ref(), self.generator.as_deref(), seed)?
            .ok_or_else(|| config("one of --graph or --generator is required"))
    }
}

fn load_graph(path: Option<&PathBuf>, generator: Option<&str>, seed: u64) -> Result<Option<(Graph, String)>> {
    match (path, generator) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)?;
            Ok(Some((load_edge_list(&text)?, path.display().to_string())))
        }
        (None, Some(spec)) => {
            let spec: GeneratorSpec = spec.parse()?;
            Ok(Some((spec.graph(seed)?, spec.to_string())))
        }
        (None, None) => Ok(None),
    }
}

impl Common {
    fn schemes(&self) -> Result<Vec<SchemeChoice>> {
        let wants_ensemble = self.scheme.contains(&SchemeName::Ensemble);
        if !wants_ensemble && (self.delta.is_some() || self.group_size.is_some()) {
            return Err(config("--delta and --group-size need --scheme ensemble"));
        }
        let mut out = Vec::new();
        for s in &self.scheme {
            let choice = match s {
                SchemeName::Iid => SchemeChoice::Iid,
                SchemeName::Antithetic => SchemeChoice::Antithetic,
                SchemeName::Ensemble => SchemeChoice::Ensemble {
                    delta: self.delta.ok_or_else(|| config("--scheme ensemble needs --delta"))?,
                    group_size: self.group_size,
                },
            };
            if !out.contains(&choice) {
                out.push(choice);
            }
        }
        Ok(out)
    }

    fn repeats_or(&self, default: usize) -> usize {
        self.repeats.unwrap_or(default)
    }
}

fn emit(text: &str, output: Option<&PathBuf>) -> Result<()> {
    match output {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_mesh(args: &RegressArgs) -> Result<(Mesh, String)> {
    match &args.mesh {
        Some(path) => Ok((load_obj(&fs::read_to_string(path)?)?, path.display().to_string())),
        None => {
            let spec: GeneratorSpec = args.generator.parse()?;
            Ok((spec.mesh()?, spec.to_string()))
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Frobenius(a) => {
            let (g, label) = a.source.load(a.common.seed)?;
            let params = FrobeniusParams {
                sigma: a.sigma,
                p: a.common.p,
                walks: a.walks.clone(),
                schemes: a.common.schemes()?,
                repeats: a.common.repeats_or(100),
                seed: a.common.seed,
                strategy: match a.strategy {
                    StrategyName::Uniform => SamplingStrategy::UniformNeighbor,
                    StrategyName::Weighted => SamplingStrategy::WeightProportional,
                },
                two_ensemble_diagonal: a.two_ensemble_diagonal,
            };
            let report = run_frobenius(&g, &label, &params)?;
            emit_report(&report, &a.common)
        }
        Command::Diffuse(a) => {
            let (g, label) = a.source.load(a.common.seed)?;
            let params = DiffusionParams {
                t: a.t,
                n_steps: a.steps,
                m: a.walks,
                p: a.common.p,
                schemes: a.common.schemes()?,
                repeats: a.common.repeats_or(100),
                seed: a.common.seed,
                source: a.source_node,
            };
            let report = simulate_diffusion(&g, &label, &params)?;
            emit_report(&report, &a.common)
        }
        Command::Cluster(a) => {
            let (g, label) = a.source.load(a.common.seed)?;
            let params = ClusterParams {
                sigma: a.sigma,
                p: a.common.p,
                m: a.walks,
                schemes: a.common.schemes()?,
                repeats: a.common.repeats_or(20),
                n_clusters: a.clusters,
                seed: a.common.seed,
            };
            let report = run_clustering(&g, &label, &params)?;
            emit_report(&report, &a.common)
        }
        Command::Regress(a) => {
            let (mesh, label) = load_mesh(a)?;
            let params = RegressParams {
                test_fraction: a.test_fraction,
                sigma: a.sigma,
                m: a.walks,
                p: a.common.p,
                schemes: a.common.schemes()?,
                repeats: a.common.repeats_or(50),
                seed: a.common.seed,
            };
            let report = run_regression(&mesh, &label, &params)?;
            emit_report(&report, &a.common)
        }
        Command::TheoryCheck(a) => {
            let lambdas = match (&a.lambdas, load_graph(a.graph.as_ref(), a.generator.as_deref(), 0)?) {
                (Some(l), _) => l.clone(),
                (None, Some((g, _))) => adjacency_spectrum(&g)?,
                (None, None) => DEFAULT_LAMBDAS.to_vec(),
            };
            let mut params = TheoryParams::new(a.p, a.w, lambdas);
            if let Some(d) = a.delta {
                params = params.with_delta(d);
            }
            params.validate().map_err(|e| config(e.to_string()))?;
            let report = run_theory_check(&params)?;
            let text = match a.format {
                Format::Csv => report.to_csv(),
                Format::Json => report.to_json()?,
            };
            emit(&text, a.output.as_ref())
        }
    }
}

fn emit_report(report: &crate::report::ExperimentReport, common: &Common) -> Result<()> {
    let text = match common.format {
        Format::Csv => report.to_csv(),
        Format::Json => report.to_json()?,
    };
    emit(&text, common.output.as_ref())
}

/// Configuration errors, including invalid parameters rejected by the core
/// library before any work is done, map to exit code 2.
pub fn exit_code(err: &BenchError) -> i32 {
    match err {
        BenchError::Config(_) => 2,
        BenchError::Core(qgrf_core::Error::InvalidParameter(_)) => 2,
        _ => 1,
    }
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use gselab::arrays::{LayeredInteraction, LayeredRArray, RArray, StateDistribution};
use gselab::csp::{estimate_max_csp, max_csp_exact};
use gselab::cutnorm::{cut_decompose, cut_norm_exact, cut_norm_heuristic, CutOracle, CutSource};
use gselab::experiment::{beta_curve, run_concentration, Estimator, ExperimentConfig};
use gselab::gse::{kernel_gse, GseCertificate, GseProblem, GseResult};
use gselab::homdensity::{density_estimate, hom, inj, t_hom, t_hom_kernel, t_inj, DensitySource};
use gselab::io::{read_instance, to_canonical_json, CsvCell, CsvTable, Instance};
use gselab::qap::{ac_exact, estimate_qap, qap_exact, CostFunction, FitMethod};
use gselab::sampling::{graphon_of_graph, sample_g, sample_h, Graphon, StepKernel};
use gselab::{par, Error, Result};

/// Ground-state energies, cut decompositions and sampling estimators for
/// weighted r-uniform hypergraphs.
#[derive(Parser)]
#[command(name = "gselab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ground-state energy of an array or step-kernel instance.
    Gse(GseArgs),
    /// Ground-state energy with prescribed class masses.
    MicroGse(MicroArgs),
    /// MAX-CSP density of a formula, exact or from samples.
    MaxCsp(EstimateArgs),
    /// Quadratic assignment value, exact or through the sampling reduction.
    Qap(QapArgs),
    /// Maximum acyclic subgraph density, exact or through the sampling reduction.
    Ac(QapArgs),
    /// Cut norm of an array or step kernel.
    Cutnorm(CutArgs),
    /// Greedy cut decomposition.
    Cutdecomp(DecompArgs),
    /// Homomorphism densities of a decorated template in a host.
    Homdensity(EstimateArgs),
    /// Draw G(k, W) or H(k, W) and write it as an rarray instance.
    Sample(SampleArgs),
    /// Concentration trials against a reference oracle.
    Concentration(ExperimentArgs),
    /// Empirical sample complexity k*(eps) over a doubling schedule.
    BetaCurve(ExperimentArgs),
}

#[derive(Args, Serialize)]
struct Io {
    /// Instance file (JSON).
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Result file; standard output when omitted.
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Mode {
    Exact,
    Local,
    Ascent,
}

#[derive(Args, Serialize)]
struct GseArgs {
    #[command(flatten)]
    io: Io,
    /// Exhaustive enumeration (default for arrays).
    #[arg(long, conflicts_with_all = ["local", "ascent"])]
    exact: bool,
    /// Multi-restart local search.
    #[arg(long, conflicts_with = "ascent")]
    local: bool,
    /// Fractional coordinate ascent (default for step kernels).
    #[arg(long)]
    ascent: bool,
    #[arg(long, default_value_t = 16)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl GseArgs {
    fn mode(&self) -> Option<Mode> {
        if self.exact {
            Some(Mode::Exact)
        } else if self.local {
            Some(Mode::Local)
        } else if self.ascent {
            Some(Mode::Ascent)
        } else {
            None
        }
    }
}

#[derive(Args, Serialize)]
struct MicroArgs {
    #[command(flatten)]
    io: Io,
    /// Class masses, comma separated; must sum to 1.
    #[arg(long, value_delimiter = ',', required = true)]
    masses: Vec<f64>,
    /// Multi-restart local search instead of enumeration.
    #[arg(long)]
    local: bool,
    #[arg(long, default_value_t = 16)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct EstimateArgs {
    #[command(flatten)]
    io: Io,
    /// Estimate from samples of this size instead of computing exactly.
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct QapArgs {
    #[command(flatten)]
    io: Io,
    /// Estimate through the microcanonical reduction with samples of size k.
    #[arg(long)]
    estimate: Option<usize>,
    /// Cluster-fit accuracy.
    #[arg(long, default_value_t = 0.25)]
    eps: f64,
    /// Step budget for generic cluster fits.
    #[arg(long, default_value_t = 8)]
    fit_steps: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct CutArgs {
    #[command(flatten)]
    io: Io,
    /// Alternating-maximization heuristic (a lower bound).
    #[arg(long)]
    heuristic: bool,
    #[arg(long, default_value_t = 16)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct DecompArgs {
    #[command(flatten)]
    io: Io,
    #[arg(long)]
    eps: f64,
    /// Heuristic cut oracle instead of enumeration.
    #[arg(long)]
    heuristic: bool,
    #[arg(long, default_value_t = 16)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum SampleKind {
    G,
    H,
}

#[derive(Args, Serialize)]
struct SampleArgs {
    #[command(flatten)]
    io: Io,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value = "g")]
    kind: SampleKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    io: Io,
    /// Experiment configuration (JSON); flags given explicitly override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    estimator: Option<EstimatorArg>,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long)]
    trials: Option<usize>,
    /// Tolerances, comma separated.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    fit_eps: Option<f64>,
    #[arg(long)]
    fit_steps: Option<usize>,
    /// Plot data as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Gse,
    MaxCsp,
    Density,
    Cutnorm,
    Qap,
    Ac,
}

impl From<EstimatorArg> for Estimator {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Gse => Estimator::Gse,
            EstimatorArg::MaxCsp => Estimator::MaxCsp,
            EstimatorArg::Density => Estimator::Density,
            EstimatorArg::Cutnorm => Estimator::Cutnorm,
            EstimatorArg::Qap => Estimator::Qap,
            EstimatorArg::Ac => Estimator::Ac,
        }
    }
}

fn load(io: &Io) -> Result<Instance> {
    let path = io.instance.as_ref().ok_or_else(|| Error::Config("--instance is required".into()))?;
    read_instance(path)
}

fn emit<T: Serialize>(out: &Option<PathBuf>, value: &T) -> Result<()> {
    let text = to_canonical_json(value)?;
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn echo<T: Serialize>(args: &T) -> Value {
    serde_json::to_value(args).unwrap_or(Value::Null)
}

fn wrong_kind(cmd: &str, inst: &Instance) -> Error {
    Error::Argument(format!("{cmd} does not accept a {} instance", inst.kind()))
}

fn single_layer<'a>(cmd: &str, inst: &'a Instance) -> Result<&'a RArray> {
    match inst {
        Instance::Array { w, .. } if w.layers().len() == 1 => Ok(&w.layers()[0]),
        other => Err(wrong_kind(cmd, other)),
    }
}

fn array_problem<'a>(cmd: &str, inst: &'a Instance) -> Result<(&'a LayeredRArray, &'a LayeredInteraction)> {
    match inst {
        Instance::Array { w, j: Some(j) } => Ok((w, j)),
        Instance::Array { j: None, .. } => Err(Error::Argument(format!("{cmd} needs an \"interaction\""))),
        other => Err(wrong_kind(cmd, other)),
    }
}

fn oracle_of(r: &GseResult) -> &'static str {
    match (r.certificate, r.solver) {
        (GseCertificate::Exact, _) => "exact",
        (_, gselab::gse::Solver::Ascent) => "derived:ascent",
        _ => "heuristic:local",
    }
}

fn gse_output(args: Value, seed: u64, r: &GseResult) -> Value {
    json!({
        "value": r.value,
        "oracle": oracle_of(r),
        "solver": r.solver,
        "restarts": r.restarts,
        "argmax": r.argmax,
        "config_echo": args,
        "seed": seed,
    })
}

fn run_gse(a: &GseArgs) -> Result<()> {
    let inst = load(&a.io)?;
    let result = match &inst {
        Instance::Kernel { w, j } => {
            let j = j.as_ref().ok_or_else(|| Error::Argument("gse needs an \"interaction\"".into()))?;
            match a.mode() {
                None | Some(Mode::Ascent) => kernel_gse(w, j, a.restarts, a.seed)?,
                Some(_) => return Err(Error::Config("step kernels support only --ascent (continuum energy)".into())),
            }
        }
        _ => {
            let (w, j) = array_problem("gse", &inst)?;
            let p = GseProblem::new(w, j)?;
            match a.mode().unwrap_or(Mode::Exact) {
                Mode::Exact => p.exact(None)?,
                Mode::Local => p.local(a.restarts, a.seed, None)?,
                Mode::Ascent => p.fractional_ascent(a.restarts, a.seed)?,
            }
        }
    };
    emit(&a.io.out, &gse_output(echo(a), a.seed, &result))
}

fn run_micro(a: &MicroArgs) -> Result<()> {
    let inst = load(&a.io)?;
    let (w, j) = array_problem("micro-gse", &inst)?;
    let masses = StateDistribution::new(a.masses.clone())?;
    let p = GseProblem::new(w, j)?;
    let r = if a.local { p.local(a.restarts, a.seed, Some(&masses))? } else { p.exact(Some(&masses))? };
    emit(&a.io.out, &gse_output(echo(a), a.seed, &r))
}

fn run_max_csp(a: &EstimateArgs) -> Result<()> {
    let Instance::Formula(f) = load(&a.io)? else {
        return Err(Error::Argument("max-csp needs a formula instance".into()));
    };
    let out = match a.sample {
        None => json!({"value": max_csp_exact(&f)?, "oracle": "exact", "config_echo": echo(a), "seed": a.seed}),
        Some(k) => {
            let e = estimate_max_csp(&f, k, a.trials, a.seed)?;
            json!({"trials": e.estimates, "summary": e.summary, "k": k, "oracle": "exact", "config_echo": echo(a), "seed": a.seed})
        }
    };
    emit(&a.io.out, &out)
}

fn fit_method(cost: &CostFunction, steps: usize) -> FitMethod {
    match cost {
        CostFunction::Triangular => FitMethod::Triangular,
        CostFunction::Geometric { .. } => FitMethod::GeometricGrid,
        CostFunction::Step(_) => FitMethod::Generic { max_steps: steps },
    }
}

fn estimate_output(a: &QapArgs, w: &StepKernel, cost: &CostFunction, k: usize) -> Result<Value> {
    let e = estimate_qap(w, cost, fit_method(cost, a.fit_steps), k, a.eps, a.trials, a.seed)?;
    Ok(json!({
        "trials": e.estimates,
        "summary": e.summary,
        "k": k,
        "fit": {"q": e.fit.q(), "masses": e.fit.masses(), "certified_error": e.fit.certified_error, "target": e.fit.target, "method": e.fit.method},
        "oracle": "exact",
        "config_echo": echo(a),
        "seed": a.seed,
    }))
}

fn run_qap(a: &QapArgs) -> Result<()> {
    let Instance::Qap { g, kernel, j, cost } = load(&a.io)? else {
        return Err(Error::Argument("qap needs a qap instance".into()));
    };
    let out = match a.estimate {
        None => {
            let (g, j) = g.zip(j).ok_or_else(|| Error::Argument("exact qap needs arrays \"g\" and \"j\"".into()))?;
            json!({"value": qap_exact(&g, &j)?, "oracle": "exact", "config_echo": echo(a), "seed": a.seed})
        }
        Some(k) => {
            let cost = cost.ok_or_else(|| Error::Argument("qap --estimate needs a \"cost\"".into()))?;
            let w = match (kernel, g) {
                (Some(w), _) => w,
                (None, Some(g)) => graphon_of_graph(&g),
                _ => return Err(Error::Argument("qap --estimate needs \"kernel\" or \"g\"".into())),
            };
            estimate_output(a, &w, &cost, k)?
        }
    };
    emit(&a.io.out, &out)
}

fn run_ac(a: &QapArgs) -> Result<()> {
    let inst = load(&a.io)?;
    let g = single_layer("ac", &inst)?;
    let out = match a.estimate {
        None => json!({"value": ac_exact(g)?, "oracle": "exact", "config_echo": echo(a), "seed": a.seed}),
        Some(k) => estimate_output(a, &graphon_of_graph(g), &CostFunction::Triangular, k)?,
    };
    emit(&a.io.out, &out)
}

fn cut_source<'a>(cmd: &str, inst: &'a Instance) -> Result<CutSource<'a>> {
    match inst {
        Instance::Kernel { w, .. } => Ok(CutSource::from(w)),
        other => Ok(CutSource::from(single_layer(cmd, other)?)),
    }
}

fn run_cutnorm(a: &CutArgs) -> Result<()> {
    let inst = load(&a.io)?;
    let src = cut_source("cutnorm", &inst)?;
    let (w, oracle) = if a.heuristic {
        (cut_norm_heuristic(src, a.restarts, a.seed), "heuristic:alternating")
    } else {
        (cut_norm_exact(src)?, "exact")
    };
    let normalized = match &inst {
        Instance::Array { w: g, .. } => w.value / (g.k() as f64).powi(g.r() as i32),
        _ => w.value,
    };
    emit(
        &a.io.out,
        &json!({"value": w.value, "normalized": normalized, "signed_sum": w.signed_sum, "sets": w.sets,
                "oracle": oracle, "config_echo": echo(a), "seed": a.seed}),
    )
}

fn run_cutdecomp(a: &DecompArgs) -> Result<()> {
    let inst = load(&a.io)?;
    let src = cut_source("cutdecomp", &inst)?;
    let oracle = if a.heuristic { CutOracle::Heuristic { restarts: a.restarts } } else { CutOracle::Exact };
    let d = cut_decompose(src, a.eps, oracle, a.seed)?;
    emit(
        &a.io.out,
        &json!({"s": d.terms.len(), "coefficient_sum": d.coefficient_sum(), "term_bound": d.term_bound(),
                "decomposition": d, "oracle": if a.heuristic { "heuristic:alternating" } else { "exact" },
                "config_echo": echo(a), "seed": a.seed}),
    )
}

fn run_homdensity(a: &EstimateArgs) -> Result<()> {
    let Instance::Template { f, graph, kernel } = load(&a.io)? else {
        return Err(Error::Argument("homdensity needs a template instance".into()));
    };
    let out = match (a.sample, &graph, &kernel) {
        (None, Some(g), _) => {
            let injective = if f.k() <= g.k() { Some(t_inj(&f, g)?) } else { None };
            json!({"value": t_hom(&f, g)?, "t_inj": injective, "hom": hom(&f, g)?, "inj": inj(&f, g)?,
                   "oracle": "exact", "config_echo": echo(a), "seed": a.seed})
        }
        (None, _, Some(w)) => {
            json!({"value": t_hom_kernel(&f, w)?, "oracle": "exact", "config_echo": echo(a), "seed": a.seed})
        }
        (Some(k), _, _) => {
            let source = match (&graph, &kernel) {
                (Some(g), _) => DensitySource::Graph(g),
                (_, Some(w)) => DensitySource::Kernel(w),
                _ => unreachable!("validated instance has a host"),
            };
            let r = density_estimate(&f, source, k, a.trials, a.seed)?;
            json!({"trials": r.estimates, "truth": r.truth, "deviations": r.deviations, "k": k,
                   "oracle": "exact", "config_echo": echo(a), "seed": a.seed})
        }
        _ => unreachable!("validated instance has a host"),
    };
    emit(&a.io.out, &out)
}

fn run_sample(a: &SampleArgs) -> Result<()> {
    let inst = load(&a.io)?;
    let kernel;
    let w: &dyn Graphon = match &inst {
        Instance::Kernel { w, .. } => w,
        Instance::FullGraphon(f) => f,
        other => {
            kernel = graphon_of_graph(single_layer("sample", other)?);
            &kernel
        }
    };
    let s = match a.kind {
        SampleKind::G => sample_g(w, a.k, a.seed)?,
        SampleKind::H => sample_h(w, a.k, a.seed)?,
    };
    let array = s.array;
    emit(&a.io.out, &json!({"kind": "rarray", "r": array.r(), "k": array.k(), "values": array.values()}))
}

fn experiment_config(a: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut c = match &a.config {
        Some(p) => serde_json::from_str::<ExperimentConfig>(&std::fs::read_to_string(p)?)?,
        None => {
            let e = a.estimator.ok_or_else(|| Error::Config("--estimator or --config is required".into()))?;
            ExperimentConfig::new(e.into(), 0)
        }
    };
    if let Some(e) = a.estimator {
        c.estimator = e.into();
    }
    if let Some(p) = &a.io.instance {
        c.instance = p.display().to_string();
    }
    if let Some(v) = &a.k {
        c.k = v.clone();
    }
    if let Some(v) = a.trials {
        c.trials = v;
    }
    if let Some(v) = &a.eps {
        c.eps = v.clone();
    }
    if let Some(v) = a.seed {
        c.seed = v;
    }
    if let Some(v) = a.restarts {
        c.restarts = v;
    }
    if let Some(v) = a.k_max {
        c.k_max = v;
    }
    if let Some(v) = a.fit_eps {
        c.fit_eps = v;
    }
    if let Some(v) = a.fit_steps {
        c.fit_steps = v;
    }
    if c.instance.is_empty() {
        return Err(Error::Config("no instance given (--instance or \"instance\" in the config)".into()));
    }
    Ok(c)
}

fn run_concentration_cmd(a: &ExperimentArgs) -> Result<()> {
    let config = experiment_config(a)?;
    let inst = read_instance(Path::new(&config.instance))?;
    let report = run_concentration(&config, &inst)?;
    if let Some(path) = &a.csv {
        let mut header = vec!["k".to_string(), "median".into(), "q95".into(), "mean".into()];
        header.extend(config.eps.iter().map(|e| format!("failure_rate_eps_{e}")));
        header.push("heuristic_trials".into());
        let rows = report
            .trials
            .iter()
            .map(|t| {
                let mut row = vec![
                    CsvCell::Int(t.k as i64),
                    CsvCell::Float(t.deviations.median),
                    CsvCell::Float(t.deviations.q95),
                    CsvCell::Float(t.deviations.mean),
                ];
                row.extend(t.failure.iter().map(|f| CsvCell::Float(f.rate)));
                row.push(CsvCell::Int(t.heuristic_trials as i64));
                row
            })
            .collect();
        CsvTable { header, rows }.write(path)?;
    }
    emit(&a.io.out, &report)
}

fn run_beta_curve_cmd(a: &ExperimentArgs) -> Result<()> {
    let config = experiment_config(a)?;
    let inst = read_instance(Path::new(&config.instance))?;
    let curve = beta_curve(&config, &inst)?;
    if let Some(path) = &a.csv {
        curve.to_csv().write(path)?;
    }
    emit(&a.io.out, &curve)
}

fn run(cli: Cli) -> Result<()> {
    par::init_from_env()?;
    let start = Instant::now();
    let result = match &cli.command {
        Command::Gse(a) => run_gse(a),
        Command::MicroGse(a) => run_micro(a),
        Command::MaxCsp(a) => run_max_csp(a),
        Command::Qap(a) => run_qap(a),
        Command::Ac(a) => run_ac(a),
        Command::Cutnorm(a) => run_cutnorm(a),
        Command::Cutdecomp(a) => run_cutdecomp(a),
        Command::Homdensity(a) => run_homdensity(a),
        Command::Sample(a) => run_sample(a),
        Command::Concentration(a) => run_concentration_cmd(a),
        Command::BetaCurve(a) => run_beta_curve_cmd(a),
    };
    if matches!(cli.command, Command::Concentration(_) | Command::BetaCurve(_)) {
        eprintln!("elapsed: {:.3}s on {} threads", start.elapsed().as_secs_f64(), par::current_threads());
    }
    result
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Concentration trials and empirical sample-complexity curves.
//!
//! Every run is a pure function of its [`ExperimentConfig`] and instance:
//! trial `i` draws from `derive_seed(seed, estimator tag, i)` and trial
//! results are collected in trial order, so output does not depend on the
//! number of worker threads.

use serde::{Deserialize, Serialize};

use crate::arrays::{checked_pow, LayeredInteraction, LayeredRArray, RArray};
use crate::csp::{csp_gse_instance, estimate_max_csp, max_csp_exact};
use crate::cutnorm::{cut_norm_exact, normalized_cut_norm, CutOracle, EXACT_BITS_LIMIT};
use crate::error::{ensure, Error, Result};
use crate::gse::{kernel_gse, GseCertificate, GseProblem, GseResult};
use crate::homdensity::{density_estimate, DensitySource};
use crate::io::{CsvCell, CsvTable, Instance};
use crate::par;
use crate::qap::{ac_exact, estimate_qap, qap_exact, CostFunction, FitMethod};
use crate::rng::derive_seed;
use crate::sampling::{graphon_of_graph, sample_g, sample_h, sample_vertices, Graphon, StepKernel};
use crate::stats::Summary;

/// Largest `q^k` solved exactly inside a trial; bigger samples use local search.
pub const TRIAL_EXACT_LIMIT: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Ground-state energy of a sample.
    Gse,
    /// MAX-CSP density of an induced subformula.
    MaxCsp,
    /// Homomorphism density of a sample.
    Density,
    /// Normalized cut norm of `H(k, W)`.
    Cutnorm,
    /// QAP through the microcanonical reduction.
    Qap,
    /// Acyclic subgraph density through the microcanonical reduction.
    Ac,
}

impl Estimator {
    pub fn tag(self) -> &'static str {
        match self {
            Estimator::Gse => "gse",
            Estimator::MaxCsp => "max-csp",
            Estimator::Density => "density",
            Estimator::Cutnorm => "cutnorm",
            Estimator::Qap => "qap",
            Estimator::Ac => "ac",
        }
    }
}

fn default_trials() -> usize {
    100
}
fn default_k() -> Vec<usize> {
    vec![16]
}
fn default_eps() -> Vec<f64> {
    vec![0.15]
}
fn default_restarts() -> usize {
    16
}
fn default_k_max() -> usize {
    256
}
fn default_fit_eps() -> f64 {
    0.25
}
fn default_fit_steps() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub estimator: Estimator,
    /// Instance reference, echoed into results.
    #[serde(default)]
    pub instance: String,
    /// Sample sizes; `beta_curve` starts its doubling schedule at the first.
    #[serde(default = "default_k")]
    pub k: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Deviation tolerances, relative to the instance scale.
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    /// Local-search restarts per sample, and starts of the reference ascent.
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Budget of the doubling schedule.
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Cluster-fit accuracy for the QAP estimators.
    #[serde(default = "default_fit_eps")]
    pub fit_eps: f64,
    /// Step budget for generic cluster fits.
    #[serde(default = "default_fit_steps")]
    pub fit_steps: usize,
}

impl ExperimentConfig {
    pub fn new(estimator: Estimator, seed: u64) -> Self {
        ExperimentConfig {
            seed,
            estimator,
            instance: String::new(),
            k: default_k(),
            trials: default_trials(),
            eps: default_eps(),
            restarts: default_restarts(),
            k_max: default_k_max(),
            fit_eps: default_fit_eps(),
            fit_steps: default_fit_steps(),
        }
    }

    fn validate(&self) -> Result<()> {
        ensure!(!self.k.is_empty(), Config, "k grid is empty");
        ensure!(self.k.iter().all(|&k| k >= 1), Config, "sample sizes must be positive");
        ensure!(self.trials >= 1, Config, "trials must be positive");
        ensure!(!self.eps.is_empty(), Config, "eps grid is empty");
        ensure!(self.eps.iter().all(|e| *e > 0.0 && e.is_finite()), Config, "eps values must be positive");
        Ok(())
    }
}

/// Where a reference value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Oracle {
    /// Exhaustive enumeration.
    #[serde(rename = "exact")]
    Exact,
    /// Multi-start ascent on a refined simplex grid (a lower bound).
    #[serde(rename = "derived:ascent")]
    DerivedAscent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub value: f64,
    pub oracle: Oracle,
    /// Deviations are compared against `eps * scale`.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRate {
    pub eps: f64,
    pub threshold: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub k: usize,
    pub estimates: Vec<f64>,
    pub deviations: Summary,
    pub failure: Vec<FailureRate>,
    /// Trials whose sample was solved heuristically.
    pub heuristic_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub config_echo: ExperimentConfig,
    pub oracle: Oracle,
    pub reference: f64,
    pub scale: f64,
    pub seed: u64,
    pub trials: Vec<TrialReport>,
}

/// A prepared experiment: the reference is computed once.
struct Prepared<'a> {
    config: &'a ExperimentConfig,
    instance: &'a Instance,
    reference: Reference,
    fit: Option<(CostFunction, FitMethod, StepKernel)>,
}

fn scale_of(w: &LayeredRArray, j: &LayeredInteraction) -> f64 {
    w.layers().len() as f64 * w.inf_norm() * j.inf_norm()
}

fn solve_sample(p: &GseProblem, restarts: usize, seed: u64) -> Result<GseResult> {
    match checked_pow(p.q(), p.k()) {
        Some(n) if n <= TRIAL_EXACT_LIMIT => p.exact(None),
        _ => p.local(restarts, seed, None),
    }
}

fn missing_oracle(config: &ExperimentConfig, instance: &Instance) -> Error {
    Error::Config(format!(
        "no reference oracle for estimator {} on a {} instance",
        config.estimator.tag(),
        instance.kind()
    ))
}

impl<'a> Prepared<'a> {
    fn new(config: &'a ExperimentConfig, instance: &'a Instance) -> Result<Self> {
        config.validate()?;
        let ref_seed = derive_seed(config.seed, "reference", 0);
        let mut fit = None;
        let reference = match (config.estimator, instance) {
            (Estimator::Gse, Instance::Array { w, j: Some(j) }) => {
                let p = GseProblem::new(w, j)?;
                let within = checked_pow(p.q(), p.k()).is_some_and(|n| n <= crate::gse::EXACT_LIMIT);
                let (value, oracle) = if within {
                    (p.exact(None)?.value, Oracle::Exact)
                } else {
                    (p.fractional_ascent(config.restarts, ref_seed)?.value, Oracle::DerivedAscent)
                };
                Reference { value, oracle, scale: scale_of(w, j) }
            }
            (Estimator::Gse, Instance::Kernel { w, j: Some(j) }) => Reference {
                value: kernel_gse(w, j, config.restarts, ref_seed)?.value,
                oracle: Oracle::DerivedAscent,
                scale: w.inf_norm() * j.inf_norm(),
            },
            (Estimator::MaxCsp, Instance::Formula(f)) => {
                let (w, j) = csp_gse_instance(f)?;
                Reference { value: max_csp_exact(f)?, oracle: Oracle::Exact, scale: scale_of(&w, &j) }
            }
            (Estimator::Density, Instance::Template { f, graph, kernel }) => {
                let (truth, values) = match (graph, kernel) {
                    (Some(g), _) => (crate::homdensity::t_hom(f, g)?, g.values()),
                    (_, Some(w)) => (crate::homdensity::t_hom_kernel(f, w)?, w.values()),
                    _ => return Err(missing_oracle(config, instance)),
                };
                Reference { value: truth, oracle: Oracle::Exact, scale: f.sup_norm_on(values)? }
            }
            (Estimator::Cutnorm, Instance::Array { w, .. }) if w.layers().len() == 1 => {
                let g = &w.layers()[0];
                Reference {
                    value: cut_norm_exact(&graphon_of_graph(g))?.value,
                    oracle: Oracle::Exact,
                    scale: g.inf_norm(),
                }
            }
            (Estimator::Cutnorm, Instance::Kernel { w, .. }) => {
                Reference { value: cut_norm_exact(w)?.value, oracle: Oracle::Exact, scale: w.inf_norm() }
            }
            (Estimator::Ac, Instance::Array { w, .. }) if w.layers().len() == 1 => {
                let g = &w.layers()[0];
                fit = Some((CostFunction::Triangular, FitMethod::Triangular, graphon_of_graph(g)));
                Reference { value: ac_exact(g)?, oracle: Oracle::Exact, scale: g.inf_norm() }
            }
            (Estimator::Qap, Instance::Qap { g: Some(g), j, cost: Some(cost), .. }) => {
                let (value, method) = match (cost, j) {
                    (CostFunction::Triangular, _) => (ac_exact(g)?, FitMethod::Triangular),
                    (CostFunction::Geometric { .. }, Some(j)) => (qap_exact(g, j)?, FitMethod::GeometricGrid),
                    (CostFunction::Step(_), Some(j)) => {
                        (qap_exact(g, j)?, FitMethod::Generic { max_steps: config.fit_steps })
                    }
                    _ => return Err(missing_oracle(config, instance)),
                };
                let scale = g.inf_norm() * cost.inf_norm()?;
                fit = Some((cost.clone(), method, graphon_of_graph(g)));
                Reference { value, oracle: Oracle::Exact, scale }
            }
            _ => return Err(missing_oracle(config, instance)),
        };
        Ok(Prepared { config, instance, reference, fit })
    }

    /// Per-trial estimates at sample size `k` and the number solved heuristically.
    fn estimates(&self, k: usize) -> Result<(Vec<f64>, usize)> {
        let c = self.config;
        let tag = c.estimator.tag();
        let trial_seed = |t: usize| derive_seed(c.seed, tag, t as u64);
        let collect = |results: Vec<Result<GseResult>>| -> Result<(Vec<f64>, usize)> {
            let results = results.into_iter().collect::<Result<Vec<_>>>()?;
            let heuristic = results.iter().filter(|r| r.certificate == GseCertificate::Heuristic).count();
            Ok((results.into_iter().map(|r| r.value).collect(), heuristic))
        };
        match (c.estimator, self.instance) {
            (Estimator::Gse, Instance::Array { w, j: Some(j) }) => collect(par::map_range(c.trials, |t| {
                let s = trial_seed(t);
                let chosen = sample_vertices(w.k(), k, s)?;
                let layers = w.layers().iter().map(|g| induced(g, &chosen)).collect();
                let sample = LayeredRArray::new(w.labels().to_vec(), layers)?;
                solve_sample(&GseProblem::new(&sample, j)?, c.restarts, s)
            })),
            (Estimator::Gse, Instance::Kernel { w, j: Some(j) }) => collect(par::map_range(c.trials, |t| {
                let s = trial_seed(t);
                let sample = sample_g(w as &dyn Graphon, k, s)?;
                solve_sample(&GseProblem::single(&sample.array, j)?, c.restarts, s)
            })),
            (Estimator::MaxCsp, Instance::Formula(f)) => {
                Ok((estimate_max_csp(f, k.min(f.n()), c.trials, c.seed)?.estimates, 0))
            }
            (Estimator::Density, Instance::Template { f, graph, kernel }) => {
                let source = match (graph, kernel) {
                    (Some(g), _) => DensitySource::Graph(g),
                    (_, Some(w)) => DensitySource::Kernel(w),
                    _ => unreachable!("checked when preparing"),
                };
                Ok((density_estimate(f, source, k, c.trials, c.seed)?.estimates, 0))
            }
            (Estimator::Cutnorm, _) => {
                let kernel;
                let w = match self.instance {
                    Instance::Kernel { w, .. } => w,
                    Instance::Array { w, .. } => {
                        kernel = graphon_of_graph(&w.layers()[0]);
                        &kernel
                    }
                    _ => unreachable!("checked when preparing"),
                };
                let exact = (w.r() - 1) * k <= EXACT_BITS_LIMIT;
                let oracle = if exact { CutOracle::Exact } else { CutOracle::Heuristic { restarts: c.restarts } };
                let values = par::map_range(c.trials, |t| -> Result<f64> {
                    let s = trial_seed(t);
                    normalized_cut_norm(&sample_h(w, k, s)?.array, oracle, s)
                })
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
                Ok((values, if exact { 0 } else { c.trials }))
            }
            (Estimator::Ac | Estimator::Qap, _) => {
                let (cost, method, w) = self.fit.as_ref().expect("fit prepared");
                Ok((estimate_qap(w, cost, *method, k, c.fit_eps, c.trials, c.seed)?.estimates, 0))
            }
            _ => Err(missing_oracle(c, self.instance)),
        }
    }

    fn report(&self, k: usize) -> Result<TrialReport> {
        let (estimates, heuristic_trials) = self.estimates(k)?;
        let devs: Vec<f64> = estimates.iter().map(|e| (e - self.reference.value).abs()).collect();
        let failure = self
            .config
            .eps
            .iter()
            .map(|&eps| {
                let threshold = eps * self.reference.scale;
                let rate = devs.iter().filter(|&&d| d > threshold).count() as f64 / devs.len() as f64;
                FailureRate { eps, threshold, rate }
            })
            .collect();
        Ok(TrialReport { k, deviations: Summary::of(&devs), estimates, failure, heuristic_trials })
    }
}

fn induced(g: &RArray, chosen: &[usize]) -> RArray {
    let mut mapped = vec![0; g.r()];
    RArray::from_fn(g.r(), chosen.len(), |idx| {
        for (m, &i) in mapped.iter_mut().zip(idx) {
            *m = chosen[i];
        }
        g.get(&mapped)
    })
}

/// Runs `trials` samples at every `k` of the grid.
pub fn run_concentration(config: &ExperimentConfig, instance: &Instance) -> Result<ConcentrationReport> {
    let p = Prepared::new(config, instance)?;
    let trials = config.k.iter().map(|&k| p.report(k)).collect::<Result<Vec<_>>>()?;
    Ok(ConcentrationReport {
        config_echo: config.clone(),
        oracle: p.reference.oracle,
        reference: p.reference.value,
        scale: p.reference.scale,
        seed: config.seed,
        trials,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaRow {
    pub eps: f64,
    /// Smallest `k` of the schedule with failure rate below `eps`; `None`
    /// when the budget ran out.
    pub k_star: Option<usize>,
    pub failure_rate: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaCurve {
    pub config_echo: ExperimentConfig,
    pub oracle: Oracle,
    pub reference: f64,
    pub scale: f64,
    pub seed: u64,
    pub schedule: Vec<usize>,
    pub rows: Vec<BetaRow>,
    /// Least-squares slope of `ln k*` against `ln(1/eps)` over resolved rows.
    pub loglog_slope: Option<f64>,
}

impl BetaCurve {
    pub fn to_csv(&self) -> CsvTable {
        CsvTable {
            header: ["eps", "k_star", "failure_rate", "status"].map(String::from).to_vec(),
            rows: self
                .rows
                .iter()
                .map(|r| {
                    vec![
                        CsvCell::Float(r.eps),
                        r.k_star.map_or(CsvCell::Empty, |k| CsvCell::Int(k as i64)),
                        r.failure_rate.map_or(CsvCell::Empty, CsvCell::Float),
                        CsvCell::Text(r.status.clone()),
                    ]
                })
                .collect(),
        }
    }
}

/// Doubling schedule from the first grid `k` up to `k_max`. Every `k`
/// uses the same trial seeds for all tolerances, so `k*` is monotone in eps.
pub fn beta_curve(config: &ExperimentConfig, instance: &Instance) -> Result<BetaCurve> {
    let p = Prepared::new(config, instance)?;
    let cap = match instance {
        Instance::Formula(f) => config.k_max.min(f.n()),
        _ => config.k_max,
    };
    ensure!(config.k[0] <= cap, Config, "schedule start {} exceeds the budget {cap}", config.k[0]);
    let mut schedule = Vec::new();
    let mut k = config.k[0];
    while k <= cap {
        schedule.push(k);
        if k == cap {
            break;
        }
        k = (2 * k).min(cap);
    }
    let mut rows: Vec<BetaRow> = config
        .eps
        .iter()
        .map(|&eps| BetaRow { eps, k_star: None, failure_rate: None, status: "open".into() })
        .collect();
    for &k in &schedule {
        if rows.iter().all(|r| r.k_star.is_some()) {
            break;
        }
        let report = p.report(k)?;
        for (row, f) in rows.iter_mut().zip(&report.failure) {
            if row.k_star.is_none() && f.rate < row.eps {
                row.k_star = Some(k);
                row.failure_rate = Some(f.rate);
                row.status = "resolved".into();
            }
        }
    }
    let points: Vec<(f64, f64)> =
        rows.iter().filter_map(|r| r.k_star.map(|k| ((1.0 / r.eps).ln(), (k as f64).ln()))).collect();
    let loglog_slope = slope(&points);
    Ok(BetaCurve {
        config_echo: config.clone(),
        oracle: p.reference.oracle,
        reference: p.reference.value,
        scale: p.reference.scale,
        seed: config.seed,
        schedule,
        rows,
        loglog_slope,
    })
}

fn slope(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if points.len() < 2 || sxx <= 0.0 {
        return None;
    }
    Some(points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

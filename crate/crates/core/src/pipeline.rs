//! End-to-end runs on the analytic benchmarks: data, design, linearization,
//! empirical-Bayes fit, posterior, predictions, targets, scores.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::benchmarks::{Benchmark, BenchmarkSpec, Example, DEFAULT_NSIM};
use crate::design::{derive_seed, lhs_uniform, sample_iid, stage_seed, DesignSet};
use crate::diagnostics::{compensation_coverage, loo_output_densities, mse_per_component, CoefficientModel, CoverageReport, Dataset, DEFAULT_PAIRS};
use crate::error::Result;
use crate::hyper::{fit_hyperparameters, FitResult, HyperParams, OptimizerConfig};
use crate::linearization::{assemble_calibration_matrices, fit_linear_coefficients, LinearizedModel, ObservationSet, SimulationBundle};
use crate::posterior::{build_prior, posterior_theta, Posterior};
use crate::predictive::{marginals_of, predict_marginal, target_gp_marginal, target_gp_mean, target_jeffreys, PredictiveTheta, DEFAULT_CHUNK};

/// Stage offsets fed to [`stage_seed`].
pub mod stage {
    pub const OBSERVATIONS: u64 = 0;
    pub const DESIGN: u64 = 1;
    pub const SIMULATION: u64 = 2;
    pub const OPTIMIZER: u64 = 3;
    pub const MSE_SAMPLE: u64 = 4;
    pub const COVERAGE: u64 = 5;
}

/// How the design-point coefficients are obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Linearization {
    Exact,
    /// Least squares on `n_sim` runs of the benchmark model per cell.
    Simulated { n_sim: usize },
}

impl Default for Linearization {
    fn default() -> Self {
        Linearization::Exact
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub linearization: Linearization,
    /// `seed` is overwritten by the run's optimizer stage seed.
    pub optimizer: OptimizerConfig,
    pub chunk: usize,
    /// Run the coverage test; `None` runs it for example 3 only.
    pub coverage: Option<bool>,
    pub alpha: f64,
    pub pairs: usize,
    /// Number of leading design points at which LOO output densities are
    /// reported alongside coverage.
    pub density_points: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            linearization: Linearization::Exact,
            optimizer: OptimizerConfig::default(),
            chunk: DEFAULT_CHUNK,
            coverage: None,
            alpha: 0.05,
            pairs: DEFAULT_PAIRS,
            density_points: 4,
        }
    }
}

impl PipelineOptions {
    pub fn with_simulated(n_sim: Option<usize>) -> Self {
        Self { linearization: Linearization::Simulated { n_sim: n_sim.unwrap_or(DEFAULT_NSIM) }, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseRow {
    pub estimator: String,
    pub component: usize,
    pub mse: f64,
}

/// LOO output density at one (x_i, λ) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityRow {
    pub lambda: Vec<f64>,
    pub x_index: usize,
    pub x: f64,
    pub mean: f64,
    pub var: f64,
}

/// Everything a benchmark run produces.
#[derive(Debug, Clone)]
pub struct ExampleRun {
    pub spec: BenchmarkSpec,
    pub benchmark: Benchmark,
    pub obs: ObservationSet,
    pub design: DesignSet,
    pub bundle: Option<SimulationBundle>,
    pub lin: LinearizedModel,
    pub fit: FitResult,
    pub posterior: Posterior,
    pub grid: DMatrix<f64>,
    pub truth: DVector<f64>,
    pub prediction: PredictiveTheta,
    pub target_jeffreys: PredictiveTheta,
    pub target_gp: PredictiveTheta,
    pub mse: Vec<MseRow>,
    pub coverage: Option<CoverageReport>,
    pub densities: Vec<DensityRow>,
}

impl ExampleRun {
    pub fn dataset(&self) -> Result<Dataset> {
        Dataset::new(self.design.points.clone(), self.lin.clone(), self.obs.clone())
    }
}

/// Linear coefficients at the design, plus the simulation bundle if one was used.
pub fn linearize(
    benchmark: &Benchmark,
    design: &DMatrix<f64>,
    how: Linearization,
    seed: u64,
) -> Result<(LinearizedModel, Option<SimulationBundle>)> {
    match how {
        Linearization::Exact => Ok((benchmark.exact_linearization(design)?, None)),
        Linearization::Simulated { n_sim } => {
            let bundle = benchmark.simulate(design, n_sim, stage_seed(seed, stage::SIMULATION))?;
            let lin = fit_linear_coefficients(&bundle, false)?;
            Ok((lin, Some(bundle)))
        }
    }
}

/// Fits φ̂ and returns it with the posterior over Θ_m.
pub fn fit_and_condition(
    design: &DMatrix<f64>,
    lin: &LinearizedModel,
    obs: &ObservationSet,
    optimizer: &OptimizerConfig,
) -> Result<(FitResult, Posterior)> {
    let cal = assemble_calibration_matrices(lin, obs)?;
    let fit = fit_hyperparameters(design, &cal.gls, optimizer)?;
    let posterior = posterior_theta(&cal.gls, build_prior(design, &fit.params)?)?;
    Ok((fit, posterior))
}

/// Per-component MSE of the predictive mean and both target means against
/// the truth at `lambdas`.
pub fn mse_scores(
    benchmark: &Benchmark,
    obs: &ObservationSet,
    posterior: &Posterior,
    params: &HyperParams,
    lambdas: &DMatrix<f64>,
    chunk: usize,
) -> Result<Vec<MseRow>> {
    let p = benchmark.p();
    let truth = benchmark.truth_at(lambdas);
    let slopes = benchmark.slopes_at(lambdas);
    let pred = predict_marginal(posterior, lambdas, chunk)?.mean;
    let target = target_jeffreys(&slopes, obs)?.mean;
    let target_gp = target_gp_mean(lambdas, &slopes, obs, params)?;
    let mut rows = Vec::with_capacity(3 * p);
    for (name, est) in [("pred", pred), ("target", target), ("targetGP", target_gp)] {
        for (u, mse) in mse_per_component(&truth, &est, p)?.into_iter().enumerate() {
            rows.push(MseRow { estimator: name.to_string(), component: u + 1, mse });
        }
    }
    Ok(rows)
}

/// Runs one benchmark end to end.
pub fn run_benchmark(spec: &BenchmarkSpec, opts: &PipelineOptions) -> Result<ExampleRun> {
    let benchmark = Benchmark::new(spec.example, spec.n, spec.lambda0)?;
    let dist = benchmark.distribution();
    let obs = benchmark.observations(stage_seed(spec.seed, stage::OBSERVATIONS))?;
    let design = lhs_uniform(spec.m, &dist, stage_seed(spec.seed, stage::DESIGN))?;
    let (lin, bundle) = linearize(&benchmark, &design.points, opts.linearization, spec.seed)?;
    let optimizer = OptimizerConfig { seed: stage_seed(spec.seed, stage::OPTIMIZER), ..opts.optimizer.clone() };
    let (fit, posterior) = fit_and_condition(&design.points, &lin, &obs, &optimizer)?;

    let grid = dist.grid(spec.k)?;
    let truth = benchmark.truth_at(&grid);
    let prediction = predict_marginal(&posterior, &grid, opts.chunk)?;
    let grid_slopes = benchmark.slopes_at(&grid);
    let target_jeffreys = marginals_of(&grid, &target_jeffreys(&grid_slopes, &obs)?)?;
    let target_gp = target_gp_marginal(&grid, &grid_slopes, &obs, &fit.params)?;

    let sample = sample_iid(&dist, spec.n_lambda, stage_seed(spec.seed, stage::MSE_SAMPLE))?;
    let mse = mse_scores(&benchmark, &obs, &posterior, &fit.params, &sample, opts.chunk)?;

    let data = Dataset::new(design.points.clone(), lin.clone(), obs.clone())?;
    let wants_coverage = opts.coverage.unwrap_or(spec.example == Example::Three);
    let (coverage, densities) = if wants_coverage {
        let all: Vec<usize> = (0..obs.len()).collect();
        let report = compensation_coverage(
            opts.alpha,
            &all,
            opts.pairs,
            &dist,
            &data,
            &benchmark,
            &fit.params,
            stage_seed(spec.seed, stage::COVERAGE),
        )?;
        let count = opts.density_points.min(spec.m);
        let lambdas = design.points.rows(0, count).into_owned();
        let densities = loo_output_densities(&data, &lambdas, &benchmark, &fit.params)?
            .into_iter()
            .map(|(i, j, mean, var)| DensityRow {
                lambda: lambdas.row(j).iter().copied().collect(),
                x_index: i,
                x: obs.x[i],
                mean,
                var,
            })
            .collect();
        (Some(report), densities)
    } else {
        (None, Vec::new())
    };

    Ok(ExampleRun {
        spec: spec.clone(),
        benchmark,
        obs,
        design,
        bundle,
        lin,
        fit,
        posterior,
        grid,
        truth,
        prediction,
        target_jeffreys,
        target_gp,
        mse,
        coverage,
        densities,
    })
}

/// One row of a replication study.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRow {
    pub example: u32,
    pub n: usize,
    pub m: usize,
    pub rep: usize,
    pub estimator: String,
    pub component: usize,
    pub mse: f64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationPlan {
    pub example: Example,
    pub n_values: Vec<usize>,
    pub m_values: Vec<usize>,
    pub reps: usize,
    pub n_lambda: usize,
    pub lambda0: f64,
    pub seed: u64,
}

impl ReplicationPlan {
    pub fn new(example: Example, seed: u64) -> Self {
        Self {
            example,
            n_values: vec![50, 100],
            m_values: vec![10, 15, 20],
            reps: 100,
            n_lambda: 1000,
            lambda0: crate::benchmarks::DEFAULT_LAMBDA0,
            seed,
        }
    }

    /// `(n, m, rep)` in output order.
    pub fn tasks(&self) -> Vec<(usize, usize, usize)> {
        let mut t = Vec::new();
        for &n in &self.n_values {
            for &m in &self.m_values {
                for r in 0..self.reps {
                    t.push((n, m, r));
                }
            }
        }
        t
    }
}

fn replicate_once(plan: &ReplicationPlan, opts: &PipelineOptions, n: usize, m: usize, seed: u64) -> Result<Vec<MseRow>> {
    let benchmark = Benchmark::new(plan.example, n, plan.lambda0)?;
    let dist = benchmark.distribution();
    let obs = benchmark.observations(stage_seed(seed, stage::OBSERVATIONS))?;
    let design = lhs_uniform(m, &dist, stage_seed(seed, stage::DESIGN))?;
    let (lin, _) = linearize(&benchmark, &design.points, opts.linearization, seed)?;
    let optimizer = OptimizerConfig { seed: stage_seed(seed, stage::OPTIMIZER), ..opts.optimizer.clone() };
    let (fit, posterior) = fit_and_condition(&design.points, &lin, &obs, &optimizer)?;
    let sample = sample_iid(&dist, plan.n_lambda, stage_seed(seed, stage::MSE_SAMPLE))?;
    mse_scores(&benchmark, &obs, &posterior, &fit.params, &sample, opts.chunk)
}

/// Independent data and design for every `(n, m, rep)`; task `t` uses seed
/// `seed + t`. Failures become rows with a non-`ok` status.
pub fn replicate_study(plan: &ReplicationPlan, opts: &PipelineOptions) -> Result<Vec<ReplicationRow>> {
    if plan.reps == 0 || plan.n_values.is_empty() || plan.m_values.is_empty() {
        return Err(crate::error::Error::invalid("replication needs at least one n, one m and one repetition"));
    }
    let p = plan.example.theta_dim();
    let tasks = plan.tasks();
    let results: Vec<Vec<ReplicationRow>> = tasks
        .par_iter()
        .enumerate()
        .map(|(t, &(n, m, rep))| {
            let base = |estimator: &str, component: usize, mse: f64, status: String| ReplicationRow {
                example: plan.example.id(),
                n,
                m,
                rep,
                estimator: estimator.to_string(),
                component,
                mse,
                status,
            };
            match replicate_once(plan, opts, n, m, derive_seed(plan.seed, t as u64)) {
                Ok(rows) => rows.into_iter().map(|r| base(&r.estimator, r.component, r.mse, "ok".into())).collect(),
                Err(e) => {
                    let msg = e.to_string().replace([',', '\n'], ";");
                    ["pred", "target", "targetGP"]
                        .iter()
                        .flat_map(|est| (1..=p).map(move |u| (est, u)))
                        .map(|(est, u)| base(est, u, f64::NAN, format!("error: {msg}")))
                        .collect()
                }
            }
        })
        .collect();
    Ok(results.into_iter().flatten().collect())
}

/// Median of the finite values.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[h] } else { 0.5 * (v[h - 1] + v[h]) })
}

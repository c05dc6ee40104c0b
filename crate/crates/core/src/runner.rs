//! Command orchestration behind the `gplincc` binary.
//!
//! Settings are flat `key = value` pairs layered as defaults, then a config
//! file, then `GPLINCC_<KEY>` environment variables, then command-line flags.
//! Every run writes the fully resolved settings to `manifest.txt`, which is
//! itself a valid config file, so `--config <out>/manifest.txt` repeats it.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::benchmarks::{Benchmark, BenchmarkSpec, Example};
use crate::design::{lhs_uniform, stage_seed, LambdaDistribution};
use crate::diagnostics::{compensation_coverage, loo_output_densities, CoefficientModel, Dataset};
use crate::error::{Error, Result};
use crate::hyper::{HyperParams, OptimizerConfig};
use crate::io::{self, Table};
use crate::linearization::{fit_linear_coefficients, LinearizedModel, ObservationSet};
use crate::pipeline::{self, stage, DensityRow, Linearization, PipelineOptions, ReplicationPlan};
use crate::predictive::predict_marginal;

pub const MANIFEST: &str = "manifest.txt";
pub const ENV_PREFIX: &str = "GPLINCC_";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Example,
    Replicate,
    Fit,
    Predict,
    Diagnose,
    Design,
    Linearize,
}

impl Command {
    pub const ALL: [Command; 7] =
        [Command::Example, Command::Replicate, Command::Fit, Command::Predict, Command::Diagnose, Command::Design, Command::Linearize];

    pub fn name(self) -> &'static str {
        match self {
            Command::Example => "example",
            Command::Replicate => "replicate",
            Command::Fit => "fit",
            Command::Predict => "predict",
            Command::Diagnose => "diagnose",
            Command::Design => "design",
            Command::Linearize => "linearize",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown command {s:?}")))
    }
}

/// Every recognized key with its default (empty means unset).
pub const DEFAULTS: &[(&str, &str)] = &[
    ("alpha", "0.05"),
    ("bundle", ""),
    ("chunk", "256"),
    ("coefficients", ""),
    ("command", ""),
    ("coverage", "auto"),
    ("density_points", "4"),
    ("design", ""),
    ("example", "1"),
    ("hyperfit", ""),
    ("k", "500"),
    ("lambda0", "0.5"),
    ("lambdas", ""),
    ("linearization", "exact"),
    ("lower", ""),
    ("m", "10"),
    ("m_set", "10,15,20"),
    ("max_evals", "800"),
    ("n", "50"),
    ("n_lambda", "1000"),
    ("n_set", "50,100"),
    ("n_sim", "5"),
    ("observations", ""),
    ("out", "out"),
    ("pairs", "5000"),
    ("reps", "100"),
    ("residual_variance", "false"),
    ("seed", "1"),
    ("starts", "10"),
    ("upper", ""),
    ("workers", "0"),
    ("zero_intercept", "false"),
];

/// Resolved flat settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Default for Settings {
    fn default() -> Self {
        Self { values: DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect() }
    }
}

fn known(key: &str) -> Result<()> {
    if DEFAULTS.iter().any(|(k, _)| *k == key) {
        Ok(())
    } else {
        Err(Error::invalid(format!("unknown setting {key:?}")))
    }
}

impl Settings {
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        known(key)?;
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map_or("", String::as_str)
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", no + 1)))?;
            self.set(k.trim(), v.trim()).map_err(|e| Error::Parse(format!("line {}: {e}", no + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    /// Applies `GPLINCC_<KEY>` variables from `vars`.
    pub fn apply_env<I: IntoIterator<Item = (String, String)>>(&mut self, vars: I) -> Result<()> {
        for (k, v) in vars {
            if let Some(key) = k.strip_prefix(ENV_PREFIX) {
                let key = key.to_ascii_lowercase();
                if key != "config" {
                    self.set(&key, v)?;
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key);
        v.parse().map_err(|_| Error::invalid(format!("{key} = {v:?} is not valid")))
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let v = self.get(key);
        if v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',')
            .map(|s| s.trim().parse().map_err(|_| Error::invalid(format!("{key}: cannot parse {s:?}"))))
            .collect()
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        let v = self.get(key);
        (!v.is_empty()).then(|| PathBuf::from(v))
    }

    fn required_path(&self, key: &str) -> Result<PathBuf> {
        self.path(key).ok_or_else(|| Error::invalid(format!("this command needs --{key} (or {key} = … in the config)")))
    }

    fn flag(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            v => Err(Error::invalid(format!("{key} = {v:?} is not a boolean"))),
        }
    }

    fn positive(&self, key: &str) -> Result<usize> {
        let v: usize = self.parsed(key)?;
        if v == 0 {
            return Err(Error::invalid(format!("{key} must be positive")));
        }
        Ok(v)
    }

    pub fn command(&self) -> Result<Command> {
        Command::parse(self.get("command"))
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.get("out"))
    }

    pub fn workers(&self) -> Result<usize> {
        self.parsed("workers")
    }

    fn example(&self) -> Result<Example> {
        Example::from_id(self.parsed("example")?)
    }

    pub fn spec(&self) -> Result<BenchmarkSpec> {
        Ok(BenchmarkSpec {
            example: self.example()?,
            n: self.positive("n")?,
            m: self.positive("m")?,
            k: self.positive("k")?,
            n_lambda: self.positive("n_lambda")?,
            lambda0: self.parsed("lambda0")?,
            seed: self.parsed("seed")?,
        })
    }

    pub fn optimizer(&self) -> Result<OptimizerConfig> {
        Ok(OptimizerConfig {
            starts: self.positive("starts")?,
            max_evals: self.positive("max_evals")?,
            seed: self.parsed("seed")?,
            ..OptimizerConfig::default()
        })
    }

    pub fn pipeline_options(&self) -> Result<PipelineOptions> {
        let linearization = match self.get("linearization") {
            "exact" => Linearization::Exact,
            "simulated" => Linearization::Simulated { n_sim: self.positive("n_sim")? },
            v => return Err(Error::invalid(format!("linearization = {v:?}, expected exact or simulated"))),
        };
        let coverage = match self.get("coverage") {
            "auto" => None,
            _ => Some(self.flag("coverage")?),
        };
        let alpha: f64 = self.parsed("alpha")?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid("alpha must lie in (0, 1)"));
        }
        Ok(PipelineOptions {
            linearization,
            optimizer: self.optimizer()?,
            chunk: self.positive("chunk")?,
            coverage,
            alpha,
            pairs: self.positive("pairs")?,
            density_points: self.parsed("density_points")?,
        })
    }

    /// λ box from `lower`/`upper`, else `fallback`.
    fn distribution(&self, fallback: impl FnOnce() -> Result<LambdaDistribution>) -> Result<LambdaDistribution> {
        let (lo, hi): (Vec<f64>, Vec<f64>) = (self.list("lower")?, self.list("upper")?);
        match (lo.is_empty(), hi.is_empty()) {
            (true, true) => fallback(),
            (false, false) => LambdaDistribution::uniform(lo, hi),
            _ => Err(Error::invalid("lower and upper must be given together")),
        }
    }
}

/// Files written by one run, relative to its output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub out: PathBuf,
    pub files: Vec<String>,
}

struct Writer {
    out: PathBuf,
    files: Vec<String>,
}

impl Writer {
    fn new(out: &Path) -> Result<Self> {
        fs::create_dir_all(out)?;
        Ok(Self { out: out.to_path_buf(), files: Vec::new() })
    }

    fn table(&mut self, name: &str, t: &Table) -> Result<()> {
        t.save(&self.out.join(name))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn finish(mut self, settings: &Settings) -> Result<RunReport> {
        fs::write(self.out.join(MANIFEST), settings.to_text())?;
        self.files.push(MANIFEST.to_string());
        Ok(RunReport { out: self.out, files: self.files })
    }
}

/// Runs the command named in `settings`, inside a pool of `workers` threads
/// (0 = one per logical core).
pub fn run(settings: &Settings) -> Result<RunReport> {
    let command = settings.command()?;
    let workers = settings.workers()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| match command {
        Command::Example => run_example(settings),
        Command::Replicate => run_replicate(settings),
        Command::Fit => run_fit(settings),
        Command::Predict => run_predict(settings),
        Command::Diagnose => run_diagnose(settings),
        Command::Design => run_design(settings),
        Command::Linearize => run_linearize(settings),
    })
}

/// Repeats the run recorded in `manifest`, writing to `out`.
pub fn rerun_manifest(manifest: &Path, out: &Path) -> Result<RunReport> {
    let mut s = Settings::default();
    s.apply_file(manifest)?;
    s.set("out", out.to_string_lossy())?;
    run(&s)
}

pub fn run_example(settings: &Settings) -> Result<RunReport> {
    let spec = settings.spec()?;
    let opts = settings.pipeline_options()?;
    let r = pipeline::run_benchmark(&spec, &opts)?;
    let p = r.benchmark.p();
    let mut w = Writer::new(&settings.out_dir())?;
    w.table("design.csv", &io::design_table(&r.design.points))?;
    w.table("observations.csv", &io::observations_table(&r.obs))?;
    if let Some(b) = &r.bundle {
        w.table("bundle.csv", &io::bundle_table(b))?;
    }
    w.table("coefficients.csv", &io::coefficients_table(&r.lin))?;
    w.table("hyperfit.csv", &io::hyperfit_table(&r.fit.params, r.fit.nll))?;
    w.table("trace.csv", &io::trace_table(&r.fit, p, r.design.dim()))?;
    w.table("posterior_mean.csv", &io::mean_table(&r.posterior.dist.mean))?;
    w.table("posterior_cov.csv", &io::cov_table(&r.posterior.dist.cov))?;
    w.table("predictions.csv", &io::predictions_table(&r.prediction))?;
    w.table("targets_jeffreys.csv", &io::predictions_table(&r.target_jeffreys))?;
    w.table("targets_gp.csv", &io::predictions_table(&r.target_gp))?;
    w.table("truth.csv", &io::truth_table(&r.grid, &r.truth, p))?;
    w.table("mse.csv", &io::mse_table(&r.mse))?;
    if let Some(c) = &r.coverage {
        w.table("coverage.csv", &io::coverage_table(c))?;
        w.table("output_densities.csv", &io::densities_table(&r.densities))?;
    }
    w.finish(settings)
}

pub fn run_replicate(settings: &Settings) -> Result<RunReport> {
    let plan = ReplicationPlan {
        example: settings.example()?,
        n_values: settings.list("n_set")?,
        m_values: settings.list("m_set")?,
        reps: settings.positive("reps")?,
        n_lambda: settings.positive("n_lambda")?,
        lambda0: settings.parsed("lambda0")?,
        seed: settings.parsed("seed")?,
    };
    let rows = pipeline::replicate_study(&plan, &settings.pipeline_options()?)?;
    let mut w = Writer::new(&settings.out_dir())?;
    w.table("mse_table.csv", &io::replication_table(&rows))?;
    w.finish(settings)
}

pub fn run_design(settings: &Settings) -> Result<RunReport> {
    let dist = settings.distribution(|| Ok(settings.example()?.distribution()))?;
    let design = lhs_uniform(settings.positive("m")?, &dist, settings.parsed("seed")?)?;
    let mut w = Writer::new(&settings.out_dir())?;
    w.table("design.csv", &io::design_table(&design.points))?;
    w.finish(settings)
}

pub fn run_linearize(settings: &Settings) -> Result<RunReport> {
    let bundle = io::parse_bundle(&Table::load(&settings.required_path("bundle")?)?)?;
    let lin = fit_linear_coefficients(&bundle, settings.flag("zero_intercept")?)?;
    let mut w = Writer::new(&settings.out_dir())?;
    w.table("coefficients.csv", &io::coefficients_table(&lin))?;
    let mut t = Table::new(vec!["x_index".into(), "max_residual_var".into()]);
    for (i, v) in lin.max_residual_variance().iter().enumerate() {
        t.push(vec![i.to_string(), io::fmt_f64(*v)]);
    }
    w.table("residual_variance.csv", &t)?;
    w.finish(settings)
}

fn load_inputs(settings: &Settings) -> Result<(DMatrix<f64>, LinearizedModel, ObservationSet)> {
    let design = io::parse_design(&Table::load(&settings.required_path("design")?)?)?;
    let lin = io::parse_coefficients(&Table::load(&settings.required_path("coefficients")?)?)?;
    let mut obs = io::parse_observations(&Table::load(&settings.required_path("observations")?)?)?;
    if settings.flag("residual_variance")? {
        obs = obs.with_linearization_variance(lin.max_residual_variance())?;
    }
    Ok((design, lin, obs))
}

pub fn run_fit(settings: &Settings) -> Result<RunReport> {
    let (design, lin, obs) = load_inputs(settings)?;
    let (fit, post) = pipeline::fit_and_condition(&design, &lin, &obs, &settings.optimizer()?)?;
    let mut w = Writer::new(&settings.out_dir())?;
    w.table("hyperfit.csv", &io::hyperfit_table(&fit.params, fit.nll))?;
    w.table("trace.csv", &io::trace_table(&fit, lin.p(), design.ncols()))?;
    w.table("posterior_mean.csv", &io::mean_table(&post.dist.mean))?;
    w.table("posterior_cov.csv", &io::cov_table(&post.dist.cov))?;
    w.finish(settings)
}

fn design_box(design: &DMatrix<f64>) -> Result<LambdaDistribution> {
    let lo: Vec<f64> = design.column_iter().map(|c| c.min()).collect();
    let hi: Vec<f64> = design.column_iter().map(|c| c.max()).collect();
    LambdaDistribution::uniform(lo, hi)
}

fn load_hyperfit(settings: &Settings) -> Result<HyperParams> {
    Ok(io::parse_hyperfit(&Table::load(&settings.required_path("hyperfit")?)?)?.0)
}

pub fn run_predict(settings: &Settings) -> Result<RunReport> {
    let (design, lin, obs) = load_inputs(settings)?;
    let params = load_hyperfit(settings)?;
    let post = Dataset::new(design.clone(), lin, obs)?.posterior(&params)?;
    let lambdas = match settings.path("lambdas") {
        Some(p) => io::parse_design(&Table::load(&p)?)?,
        None => settings.distribution(|| design_box(&design))?.grid(settings.positive("k")?)?,
    };
    let pred = predict_marginal(&post, &lambdas, settings.positive("chunk")?)?;
    let mut w = Writer::new(&settings.out_dir())?;
    w.table("predictions.csv", &io::predictions_table(&pred))?;
    w.finish(settings)
}

/// Coverage test and LOO output densities. `g_λ` at arbitrary λ comes from
/// the benchmark named by `example`; the data either come from files
/// (design, coefficients, observations, hyperfit: all or none) or are
/// generated and fitted as in `example`.
pub fn run_diagnose(settings: &Settings) -> Result<RunReport> {
    let spec = settings.spec()?;
    let opts = settings.pipeline_options()?;
    let benchmark = Benchmark::new(spec.example, spec.n, spec.lambda0)?;
    let given: Vec<bool> = ["design", "coefficients", "observations", "hyperfit"].iter().map(|k| settings.path(k).is_some()).collect();
    let (data, params) = if given.iter().all(|g| *g) {
        let (design, lin, obs) = load_inputs(settings)?;
        (Dataset::new(design, lin, obs)?, load_hyperfit(settings)?)
    } else if given.iter().any(|g| *g) {
        return Err(Error::invalid("give all of design, coefficients, observations and hyperfit, or none"));
    } else {
        let obs = benchmark.observations(stage_seed(spec.seed, stage::OBSERVATIONS))?;
        let design = lhs_uniform(spec.m, &benchmark.distribution(), stage_seed(spec.seed, stage::DESIGN))?.points;
        let (lin, _) = pipeline::linearize(&benchmark, &design, opts.linearization, spec.seed)?;
        let optimizer = OptimizerConfig { seed: stage_seed(spec.seed, stage::OPTIMIZER), ..opts.optimizer.clone() };
        let (fit, _) = pipeline::fit_and_condition(&design, &lin, &obs, &optimizer)?;
        (Dataset::new(design, lin, obs)?, fit.params)
    };
    if benchmark.n() != data.obs.len() {
        return Err(Error::invalid(format!(
            "example {} was built with n={}, the data have {} observations",
            spec.example.id(),
            benchmark.n(),
            data.obs.len()
        )));
    }
    let all: Vec<usize> = (0..data.obs.len()).collect();
    let report = compensation_coverage(
        opts.alpha,
        &all,
        opts.pairs,
        &benchmark.distribution(),
        &data,
        &benchmark,
        &params,
        stage_seed(spec.seed, stage::COVERAGE),
    )?;
    let count = opts.density_points.min(data.design.nrows());
    let lambdas = data.design.rows(0, count).into_owned();
    let densities: Vec<DensityRow> = loo_output_densities(&data, &lambdas, &benchmark, &params)?
        .into_iter()
        .map(|(i, j, mean, var)| DensityRow { lambda: lambdas.row(j).iter().copied().collect(), x_index: i, x: data.obs.x[i], mean, var })
        .collect();
    let mut w = Writer::new(&settings.out_dir())?;
    w.table("coverage.csv", &io::coverage_table(&report))?;
    w.table("output_densities.csv", &io::densities_table(&densities))?;
    w.finish(settings)
}

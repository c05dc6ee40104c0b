//! The three analytic test problems.
//!
//! 1. `z_i = 5 + ε_i`, `g_λ = λ·1`, `θ(λ) = 5/λ`, λ ~ U[1, 10].
//! 2. Two components on x ∈ [−4, 4] with `g_λ(x)ᵗθ(λ) = r₁(x) + r₂(x)` for
//!    every λ, so the data carry no information about λ. λ ~ U[0, 1].
//! 3. One component on x ∈ [−2, 2] where the data were generated at a single
//!    λ₀ and the model output depends on λ, so compensation fails.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::design::{rng_from_seed, LambdaDistribution};
use crate::diagnostics::CoefficientModel;
use crate::error::{Error, Result};
use crate::linearization::{LinearizedModel, ObservationSet, SimulationBundle, SimulationRecord};

/// Default λ₀ for example 3.
pub const DEFAULT_LAMBDA0: f64 = 0.5;
/// Default θ samples per (λ_j, x_i) cell in simulation mode.
pub const DEFAULT_NSIM: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Example {
    One,
    Two,
    Three,
}

impl Example {
    pub fn from_id(id: u32) -> Result<Self> {
        match id {
            1 => Ok(Example::One),
            2 => Ok(Example::Two),
            3 => Ok(Example::Three),
            _ => Err(Error::invalid(format!("unknown example {id}, expected 1, 2 or 3"))),
        }
    }

    pub fn id(self) -> u32 {
        match self {
            Example::One => 1,
            Example::Two => 2,
            Example::Three => 3,
        }
    }

    pub fn theta_dim(self) -> usize {
        match self {
            Example::Two => 2,
            _ => 1,
        }
    }

    pub fn distribution(self) -> LambdaDistribution {
        match self {
            Example::One => LambdaDistribution::interval(1.0, 10.0),
            _ => LambdaDistribution::interval(0.0, 1.0),
        }
        .expect("valid bounds")
    }

    fn x_range(self) -> (f64, f64) {
        match self {
            Example::One => (0.0, 1.0),
            Example::Two => (-4.0, 4.0),
            Example::Three => (-2.0, 2.0),
        }
    }
}

/// Sizes and seed of one benchmark run.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSpec {
    pub example: Example,
    pub n: usize,
    pub m: usize,
    /// Prediction grid size.
    pub k: usize,
    /// i.i.d. λ sample size for MSE.
    pub n_lambda: usize,
    pub lambda0: f64,
    pub seed: u64,
}

impl BenchmarkSpec {
    pub fn new(example: Example, n: usize, m: usize, seed: u64) -> Self {
        Self { example, n, m, k: 500, n_lambda: 1000, lambda0: DEFAULT_LAMBDA0, seed }
    }
}

fn theta2_1(l: f64) -> f64 {
    l * (10.0 * l).sin() + 1.0
}

fn theta2_2(l: f64) -> f64 {
    (2.0 * PI * l / 10.0).sin() + 0.2 * (20.0 * PI * l / 2.5).sin() + 1.75
}

fn r1(x: f64) -> f64 {
    x * x + x + 1.0
}

fn r2(x: f64) -> f64 {
    x * x + x + 4.0
}

fn r_lambda(x: f64, l: f64) -> f64 {
    3.0 * x * x + 2.0 * l * l * x + 1.0 + l
}

/// One benchmark at a fixed set of control points.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub example: Example,
    pub x: Vec<f64>,
    pub lambda0: f64,
}

impl Benchmark {
    pub fn new(example: Example, n: usize, lambda0: f64) -> Result<Self> {
        let min_n = if example == Example::Two { 2 } else { 1 };
        if n < min_n {
            return Err(Error::invalid(format!("example {} needs n >= {min_n}", example.id())));
        }
        if example == Example::Three && !(0.0..=1.0).contains(&lambda0) {
            return Err(Error::invalid(format!("λ₀ must lie in [0, 1], got {lambda0}")));
        }
        let (lo, hi) = example.x_range();
        let x = if n == 1 { vec![0.5 * (lo + hi)] } else { (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect() };
        let b = Self { example, x, lambda0 };
        if example == Example::Three {
            b.check_nondegenerate()?;
        }
        Ok(b)
    }

    // r_λ has its minimum over x at −λ²/3, where it equals 1 + λ − λ⁴/3 > 0,
    // but the grid check keeps the guarantee independent of that algebra.
    fn check_nondegenerate(&self) -> Result<()> {
        for j in 0..=100 {
            let l = j as f64 / 100.0;
            if let Some(x) = self.x.iter().find(|&&x| r_lambda(x, l).abs() < 1e-12) {
                return Err(Error::numeric(format!("r_λ vanishes at x={x}, λ={l}")));
            }
        }
        Ok(())
    }

    pub fn distribution(&self) -> LambdaDistribution {
        self.example.distribution()
    }

    /// True calibration function.
    pub fn truth(&self, lambda: f64) -> DVector<f64> {
        match self.example {
            Example::One => DVector::from_element(1, 5.0 / lambda),
            Example::Two => DVector::from_vec(vec![theta2_1(lambda), theta2_2(lambda)]),
            Example::Three => DVector::from_element(1, theta2_1(lambda)),
        }
    }

    /// Truth at the rows of `lambdas`, stacked λ-major.
    pub fn truth_at(&self, lambdas: &DMatrix<f64>) -> DVector<f64> {
        let p = self.example.theta_dim();
        let mut out = DVector::zeros(p * lambdas.nrows());
        for j in 0..lambdas.nrows() {
            out.rows_mut(j * p, p).copy_from(&self.truth(lambdas[(j, 0)]));
        }
        out
    }

    /// Noise-free value of observation i.
    pub fn response(&self, i: usize) -> f64 {
        let x = self.x[i];
        match self.example {
            Example::One => 5.0,
            Example::Two => r1(x) + r2(x),
            Example::Three => r_lambda(x, self.lambda0),
        }
    }

    pub fn noise_variance(&self, i: usize) -> f64 {
        let r = self.response(i);
        match self.example {
            Example::One => 2.0,
            Example::Two => (0.06 * r.abs()).powi(2),
            Example::Three => 0.06 * r * r,
        }
    }

    /// Draws the observations.
    pub fn observations(&self, seed: u64) -> Result<ObservationSet> {
        let mut rng = rng_from_seed(seed);
        let n = self.x.len();
        let var: Vec<f64> = (0..n).map(|i| self.noise_variance(i)).collect();
        let z = (0..n)
            .map(|i| {
                let e: f64 = rng.sample(StandardNormal);
                self.response(i) + var[i].sqrt() * e
            })
            .collect();
        ObservationSet::new(self.x.clone(), z, var)
    }

    /// `α(x_i, λ) = r_{λ₀}(x_i) / r_λ(x_i)`; 1 for the compensated examples.
    pub fn alpha_ratio(&self, i: usize, lambda: f64) -> f64 {
        match self.example {
            Example::Three => r_lambda(self.x[i], self.lambda0) / r_lambda(self.x[i], lambda),
            _ => 1.0,
        }
    }

    /// Exact coefficients at the design points.
    pub fn exact_linearization(&self, design: &DMatrix<f64>) -> Result<LinearizedModel> {
        LinearizedModel::from_slopes(self.slopes_at(design))
    }

    /// Box holding θ over the λ support, widened by 10% of its span per side.
    pub fn theta_box(&self) -> (Vec<f64>, Vec<f64>) {
        let dist = self.distribution();
        let (lo, hi) = (dist.lower()[0], dist.upper()[0]);
        let p = self.example.theta_dim();
        let mut min = vec![f64::INFINITY; p];
        let mut max = vec![f64::NEG_INFINITY; p];
        for j in 0..=400 {
            let t = self.truth(lo + (hi - lo) * j as f64 / 400.0);
            for u in 0..p {
                min[u] = min[u].min(t[u]);
                max[u] = max[u].max(t[u]);
            }
        }
        for u in 0..p {
            let pad = 0.1 * (max[u] - min[u]).max(1e-3);
            min[u] -= pad;
            max[u] += pad;
        }
        (min, max)
    }

    /// Runs the (linear) benchmark model at `n_sim` θ draws per cell.
    pub fn simulate(&self, design: &DMatrix<f64>, n_sim: usize, seed: u64) -> Result<SimulationBundle> {
        let p = self.example.theta_dim();
        if n_sim < p + 1 {
            return Err(Error::invalid(format!("n_sim must be at least p + 1 = {}", p + 1)));
        }
        let (lo, hi) = self.theta_box();
        let mut rng = rng_from_seed(seed);
        let mut records = Vec::with_capacity(design.nrows() * self.x.len() * n_sim);
        for j in 0..design.nrows() {
            let g = self.slopes(&[design[(j, 0)]]);
            for i in 0..self.x.len() {
                for _ in 0..n_sim {
                    let theta: Vec<f64> = (0..p).map(|u| rng.random_range(lo[u]..hi[u])).collect();
                    let output = (0..p).map(|u| g[(i, u)] * theta[u]).sum();
                    records.push(SimulationRecord { lambda_index: j, x_index: i, theta, output });
                }
            }
        }
        Ok(SimulationBundle::new(records))
    }
}

impl CoefficientModel for Benchmark {
    fn n(&self) -> usize {
        self.x.len()
    }

    fn p(&self) -> usize {
        self.example.theta_dim()
    }

    fn slopes(&self, lambda: &[f64]) -> DMatrix<f64> {
        let l = lambda[0];
        let n = self.x.len();
        match self.example {
            Example::One => DMatrix::from_element(n, 1, l),
            Example::Two => {
                let (t1, t2) = (theta2_1(l), theta2_2(l));
                DMatrix::from_fn(n, 2, |i, u| if u == 0 { r1(self.x[i]) / t1 } else { r2(self.x[i]) / t2 })
            }
            Example::Three => {
                let t = theta2_1(l);
                DMatrix::from_fn(n, 1, |i, _| r_lambda(self.x[i], l) / t)
            }
        }
    }
}

/// A benchmark together with one draw of its data.
#[derive(Debug, Clone)]
pub struct BenchmarkData {
    pub benchmark: Benchmark,
    pub obs: ObservationSet,
}

pub fn example1_generate(n: usize, seed: u64) -> Result<BenchmarkData> {
    let benchmark = Benchmark::new(Example::One, n, DEFAULT_LAMBDA0)?;
    let obs = benchmark.observations(seed)?;
    Ok(BenchmarkData { benchmark, obs })
}

pub fn example2_generate(n: usize, seed: u64) -> Result<BenchmarkData> {
    let benchmark = Benchmark::new(Example::Two, n, DEFAULT_LAMBDA0)?;
    let obs = benchmark.observations(seed)?;
    Ok(BenchmarkData { benchmark, obs })
}

pub fn example3_generate(n: usize, lambda0: f64, seed: u64) -> Result<BenchmarkData> {
    let benchmark = Benchmark::new(Example::Three, n, lambda0)?;
    let obs = benchmark.observations(seed)?;
    Ok(BenchmarkData { benchmark, obs })
}

//! Empirical-Bayes hyperparameters.
//!
//! The objective is the negative log marginal likelihood of the data given
//! φ = (β_u, σ²_u, ψ_u), up to a φ-independent constant:
//!
//! ```text
//! ℓ(φ) = (M_β − θ̂)ᵗ (Δ + K_φ)⁻¹ (M_β − θ̂) − log|Δ| + nm·log 2π + m·log|Σ_ε| + log|Δ + K_φ|
//! ```
//!
//! β enters only through `M_β = Hβ` and is profiled out in closed form, so the
//! numerical search runs over `(log σ²_u, log ψ_u)` only.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::design::{lhs_uniform, LambdaDistribution};
use crate::error::{Error, Result};
use crate::kernel::{build_prior_cov, ComponentKernel};
use crate::linalg::SpdFactor;
use crate::linearization::GlsData;
use crate::optimize::{nelder_mead_bounded, NelderMeadOptions};
use crate::posterior::{combined_factor, TrendModel};

/// Hyperparameters of one θ component.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentParams {
    pub beta: f64,
    pub variance: f64,
    pub lengthscales: Vec<f64>,
}

/// φ for all components.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    components: Vec<ComponentParams>,
}

impl HyperParams {
    pub fn new(components: Vec<ComponentParams>) -> Result<Self> {
        let first = components.first().ok_or_else(|| Error::invalid("at least one component is required"))?;
        let q = first.lengthscales.len();
        for (u, c) in components.iter().enumerate() {
            if c.lengthscales.len() != q {
                return Err(Error::invalid("all components need the same number of lengthscales"));
            }
            if !c.beta.is_finite() {
                return Err(Error::invalid(format!("β_{u} must be finite")));
            }
            ComponentKernel::new(c.variance, c.lengthscales.clone())?;
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, u: usize) -> &ComponentParams {
        &self.components[u]
    }

    pub fn iter(&self) -> impl Iterator<Item = &ComponentParams> {
        self.components.iter()
    }

    pub fn lambda_dim(&self) -> usize {
        self.components[0].lengthscales.len()
    }

    pub fn betas(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.beta).collect()
    }

    pub fn kernels(&self) -> Result<Vec<ComponentKernel>> {
        self.components
            .iter()
            .map(|c| ComponentKernel::new(c.variance, c.lengthscales.clone()))
            .collect()
    }

    pub fn with_betas(mut self, betas: &[f64]) -> Self {
        for (c, b) in self.components.iter_mut().zip(betas) {
            c.beta = *b;
        }
        self
    }

    /// Builds φ from kernels and trend constants.
    pub fn from_kernels(kernels: &[ComponentKernel], betas: &[f64]) -> Result<Self> {
        if kernels.len() != betas.len() {
            return Err(Error::invalid("one β per kernel is required"));
        }
        Self::new(
            kernels
                .iter()
                .zip(betas)
                .map(|(k, b)| ComponentParams { beta: *b, variance: k.variance(), lengthscales: k.lengthscales().to_vec() })
                .collect(),
        )
    }
}

fn check_design(design: &DMatrix<f64>, gls: &GlsData, p: usize) -> Result<()> {
    if design.nrows() != gls.m() {
        return Err(Error::invalid(format!("design has {} points, GLS data has {}", design.nrows(), gls.m())));
    }
    if p != gls.p() {
        return Err(Error::invalid(format!("{p} kernels for θ of dimension {}", gls.p())));
    }
    Ok(())
}

fn nll_terms(factor: &SpdFactor, residual: &DVector<f64>, gls: &GlsData) -> Result<f64> {
    let (n, m) = (gls.n_obs as f64, gls.m() as f64);
    Ok(factor.quad_form(residual) - gls.log_det_delta()? + n * m * (2.0 * std::f64::consts::PI).ln()
        + m * gls.log_det_noise
        + factor.log_det())
}

/// ℓ(φ) at the given β.
pub fn neg_log_marginal(params: &HyperParams, design: &DMatrix<f64>, gls: &GlsData) -> Result<f64> {
    check_design(design, gls, params.components())?;
    let kernels = params.kernels()?;
    let cov = build_prior_cov(design, &kernels)?;
    let factor = combined_factor(gls, cov.matrix())?;
    let trend = TrendModel::constant(params.components());
    let residual = trend.mean(&params.betas(), gls.m()) - gls.stacked_estimates();
    nll_terms(&factor, &residual, gls)
}

fn profile_with(factor: &SpdFactor, gls: &GlsData) -> Result<Vec<f64>> {
    let h = TrendModel::constant(gls.p()).basis(gls.m());
    let ah = factor.solve_mat(&h);
    let normal = h.transpose() * &ah;
    let rhs = ah.transpose() * gls.stacked_estimates();
    let nf = SpdFactor::new(normal, "Hᵗ(Δ+K_φ)⁻¹H").map_err(|e| Error::Rank(e.to_string()))?;
    Ok(nf.solve_vec(&rhs).iter().copied().collect())
}

/// β̂(σ², ψ) = (Hᵗ(Δ+K_φ)⁻¹H)⁻¹ Hᵗ(Δ+K_φ)⁻¹ θ̂.
pub fn profile_beta(kernels: &[ComponentKernel], design: &DMatrix<f64>, gls: &GlsData) -> Result<Vec<f64>> {
    check_design(design, gls, kernels.len())?;
    let cov = build_prior_cov(design, kernels)?;
    let factor = combined_factor(gls, cov.matrix())?;
    profile_with(&factor, gls)
}

/// ℓ with β profiled out; returns the objective and β̂.
pub fn profiled_neg_log_marginal(kernels: &[ComponentKernel], design: &DMatrix<f64>, gls: &GlsData) -> Result<(f64, Vec<f64>)> {
    check_design(design, gls, kernels.len())?;
    let cov = build_prior_cov(design, kernels)?;
    let factor = combined_factor(gls, cov.matrix())?;
    let beta = profile_with(&factor, gls)?;
    let residual = TrendModel::constant(gls.p()).mean(&beta, gls.m()) - gls.stacked_estimates();
    Ok((nll_terms(&factor, &residual, gls)?, beta))
}

/// Search box over the packed parameter vector
/// `[log σ²_1..p, log ψ_{1,1..q}, …, log ψ_{p,1..q}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SearchBox {
    /// Scale-free default: log σ²_u within 1e±4 of the spread of component u's
    /// GLS estimates, log ψ_d within [0.01, 10]× the design range in dimension d.
    pub fn default_for(design: &DMatrix<f64>, gls: &GlsData) -> Self {
        let (p, m, q) = (gls.p(), gls.m(), design.ncols());
        let mut lower = Vec::with_capacity(p * (1 + q));
        let mut upper = Vec::with_capacity(p * (1 + q));
        for u in 0..p {
            let vals: Vec<f64> = gls.estimates.iter().map(|e| e[u]).collect();
            let mean = vals.iter().sum::<f64>() / m as f64;
            let var = if m > 1 { vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64 } else { 0.0 };
            let v = if var > 0.0 && var.is_finite() { var } else { 1.0 };
            lower.push((1e-4 * v).ln());
            upper.push((1e4 * v).ln());
        }
        for _ in 0..p {
            for d in 0..q {
                let col = design.column(d);
                let range = col.max() - col.min();
                let r = if range > 0.0 { range } else { 1.0 };
                lower.push((0.01 * r).ln());
                upper.push((10.0 * r).ln());
            }
        }
        Self { lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() || self.lower.is_empty() {
            return Err(Error::invalid("search box bounds have mismatched lengths"));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::invalid("search box needs finite lower < upper"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub starts: usize,
    /// `None` uses [`SearchBox::default_for`].
    pub search_box: Option<SearchBox>,
    pub f_tol: f64,
    pub x_tol: f64,
    pub max_evals: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { starts: 10, search_box: None, f_tol: 1e-9, x_tol: 1e-6, max_evals: 800, seed: 0 }
    }
}

impl OptimizerConfig {
    fn validate(&self) -> Result<()> {
        if self.starts == 0 || self.max_evals == 0 {
            return Err(Error::invalid("optimizer needs at least one start and one evaluation"));
        }
        if !(self.f_tol > 0.0 && self.x_tol > 0.0) {
            return Err(Error::invalid("optimizer tolerances must be positive"));
        }
        Ok(())
    }
}

/// One objective evaluation during the search.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub start: usize,
    pub eval: usize,
    pub x: Vec<f64>,
    pub nll: f64,
}

/// Outcome of one multistart run.
#[derive(Debug, Clone, PartialEq)]
pub struct StartOutcome {
    pub start: usize,
    pub initial_nll: f64,
    pub nll: f64,
    pub x: Vec<f64>,
    pub evals: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: HyperParams,
    pub nll: f64,
    pub best_start: usize,
    pub starts: Vec<StartOutcome>,
    pub trace: Vec<TraceEntry>,
}

/// Splits a packed parameter vector into kernels.
pub fn unpack_kernels(x: &[f64], p: usize, q: usize) -> Result<Vec<ComponentKernel>> {
    if x.len() != p * (1 + q) {
        return Err(Error::invalid("packed parameter vector has the wrong length"));
    }
    (0..p)
        .map(|u| {
            let ls = (0..q).map(|d| x[p + u * q + d].exp()).collect();
            ComponentKernel::new(x[u].exp(), ls)
        })
        .collect()
}

/// Packs kernels as `[log σ²_1..p, log ψ_…]`.
pub fn pack_kernels(kernels: &[ComponentKernel]) -> Vec<f64> {
    let mut x: Vec<f64> = kernels.iter().map(|k| k.variance().ln()).collect();
    for k in kernels {
        x.extend(k.lengthscales().iter().map(|l| l.ln()));
    }
    x
}

/// Multistart derivative-free minimization of the profiled ℓ.
pub fn fit_hyperparameters(design: &DMatrix<f64>, gls: &GlsData, config: &OptimizerConfig) -> Result<FitResult> {
    config.validate()?;
    let (p, q) = (gls.p(), design.ncols());
    if design.nrows() != gls.m() {
        return Err(Error::invalid(format!("design has {} points, GLS data has {}", design.nrows(), gls.m())));
    }
    let bounds = config.search_box.clone().unwrap_or_else(|| SearchBox::default_for(design, gls));
    bounds.validate()?;
    if bounds.dim() != p * (1 + q) {
        return Err(Error::invalid(format!("search box has {} entries, expected {}", bounds.dim(), p * (1 + q))));
    }
    let start_dist = LambdaDistribution::uniform(bounds.lower.clone(), bounds.upper.clone())?;
    let starts = lhs_uniform(config.starts, &start_dist, config.seed)?.points;

    let objective = |x: &[f64]| -> f64 {
        unpack_kernels(x, p, q)
            .and_then(|k| profiled_neg_log_marginal(&k, design, gls))
            .map_or(f64::INFINITY, |(v, _)| if v.is_finite() { v } else { f64::INFINITY })
    };
    let opts = NelderMeadOptions {
        max_evals: config.max_evals,
        f_tol: config.f_tol,
        x_tol: config.x_tol,
        ..Default::default()
    };

    let runs: Vec<(StartOutcome, Vec<TraceEntry>)> = (0..config.starts)
        .into_par_iter()
        .map(|s| {
            let x0: Vec<f64> = starts.row(s).iter().copied().collect();
            let mut trace = Vec::new();
            let result = nelder_mead_bounded(
                |x| {
                    let v = objective(x);
                    trace.push(TraceEntry { start: s, eval: trace.len(), x: x.to_vec(), nll: v });
                    v
                },
                &x0,
                &bounds.lower,
                &bounds.upper,
                &opts,
            );
            let initial_nll = trace.first().map_or(f64::INFINITY, |t| t.nll);
            let outcome = StartOutcome {
                start: s,
                initial_nll,
                nll: result.value,
                x: result.x,
                evals: result.evals,
                converged: result.converged,
            };
            (outcome, trace)
        })
        .collect();

    let mut starts_out = Vec::with_capacity(runs.len());
    let mut trace = Vec::new();
    for (o, t) in runs {
        starts_out.push(o);
        trace.extend(t);
    }
    let best = starts_out
        .iter()
        .filter(|o| o.nll.is_finite())
        .min_by(|a, b| a.nll.total_cmp(&b.nll).then(a.start.cmp(&b.start)))
        .ok_or_else(|| Error::Fitting(format!("all {} starts failed to evaluate", config.starts)))?
        .clone();
    let kernels = unpack_kernels(&best.x, p, q)?;
    let (nll, beta) = profiled_neg_log_marginal(&kernels, design, gls)?;
    Ok(FitResult {
        params: HyperParams::from_kernels(&kernels, &beta)?,
        nll,
        best_start: best.start,
        starts: starts_out,
        trace,
    })
}

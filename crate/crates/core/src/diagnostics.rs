//! Scoring and model checks: MSE against a reference calibration function,
//! predictive distributions of the calibrated model output, and the
//! leave-one-out coverage test of the compensation hypothesis.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::design::{derive_seed, sample_iid, LambdaDistribution};
use crate::error::{Error, Result};
use crate::hyper::HyperParams;
use crate::kernel::Layout;
use crate::linearization::{assemble_calibration_matrices, LinearizedModel, ObservationSet};
use crate::posterior::{build_prior, posterior_theta, GaussianDist, Posterior};
use crate::predictive::predict;

/// Pair count used when none is given.
pub const DEFAULT_PAIRS: usize = 5000;

/// Variances in `(−VARIANCE_TOL, 0]` are roundoff and get clamped.
pub const VARIANCE_TOL: f64 = 1e-10;
const VARIANCE_FLOOR: f64 = 1e-12;

/// Linear coefficients `g_λ(x)` available at any λ.
pub trait CoefficientModel: Sync {
    fn n(&self) -> usize;
    fn p(&self) -> usize;
    /// `n×p` slope matrix at `lambda`.
    fn slopes(&self, lambda: &[f64]) -> DMatrix<f64>;

    fn slopes_at(&self, lambdas: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        lambdas
            .row_iter()
            .map(|r| {
                let l: Vec<f64> = r.iter().copied().collect();
                self.slopes(&l)
            })
            .collect()
    }
}

/// Per-component mean squared error between stacked (λ-major) vectors.
pub fn mse_per_component(truth: &DVector<f64>, pred: &DVector<f64>, p: usize) -> Result<Vec<f64>> {
    if p == 0 || truth.len() != pred.len() || truth.len() % p != 0 || truth.is_empty() {
        return Err(Error::invalid(format!(
            "cannot compare {} reference values with {} predictions for p={p}",
            truth.len(),
            pred.len()
        )));
    }
    let count = (truth.len() / p) as f64;
    let mut out = vec![0.0; p];
    for (i, (t, y)) in truth.iter().zip(pred.iter()).enumerate() {
        out[i % p] += (t - y).powi(2);
    }
    Ok(out.into_iter().map(|s| s / count).collect())
}

/// Distribution of the model outputs `g θ(λ)` at the control points.
pub fn model_output_predictive(slopes: &DMatrix<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<GaussianDist> {
    let p = slopes.ncols();
    if mean.len() != p || cov.shape() != (p, p) {
        return Err(Error::invalid(format!(
            "slopes have {p} columns, θ moments have dimension {} and {}×{}",
            mean.len(),
            cov.nrows(),
            cov.ncols()
        )));
    }
    let mut c = slopes * cov * slopes.transpose();
    crate::linalg::symmetrize(&mut c);
    GaussianDist::new(slopes * mean, c, Layout::new(1, slopes.nrows()))
}

/// Design, linear coefficients at the design, and data.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub design: DMatrix<f64>,
    pub lin: LinearizedModel,
    pub obs: ObservationSet,
}

impl Dataset {
    pub fn new(design: DMatrix<f64>, lin: LinearizedModel, obs: ObservationSet) -> Result<Self> {
        if design.nrows() != lin.design_size() {
            return Err(Error::invalid(format!(
                "design has {} points, coefficients cover {}",
                design.nrows(),
                lin.design_size()
            )));
        }
        if lin.n() != obs.len() {
            return Err(Error::invalid(format!("coefficients have {} control points, data has {}", lin.n(), obs.len())));
        }
        Ok(Self { design, lin, obs })
    }

    pub fn posterior(&self, params: &HyperParams) -> Result<Posterior> {
        let cal = assemble_calibration_matrices(&self.lin, &self.obs)?;
        posterior_theta(&cal.gls, build_prior(&self.design, params)?)
    }

    /// Dataset with observation `i` dropped from z, x, Σ_ε and every g_{λ_j}.
    pub fn without(&self, i: usize) -> Result<Self> {
        if self.obs.len() < 2 {
            return Err(Error::invalid("leave-one-out needs at least two observations"));
        }
        Ok(Self { design: self.design.clone(), lin: self.lin.without(i)?, obs: self.obs.without(i)? })
    }
}

/// Posterior of Θ_m given `z_{−i}`, with φ̂ held at its full-data value.
pub fn loo_posterior(data: &Dataset, i: usize, params: &HyperParams) -> Result<Posterior> {
    data.without(i)?.posterior(params)
}

/// Mean and variance of `g_λ(x_i)ᵗ θ(λ)` under the predictive built without
/// observation `i`.
pub fn loo_predictive(
    data: &Dataset,
    i: usize,
    lambda: &[f64],
    model: &dyn CoefficientModel,
    params: &HyperParams,
) -> Result<(f64, f64)> {
    let post = loo_posterior(data, i, params)?;
    let g = model.slopes(lambda).row(i).transpose();
    let pred = predict(&post, &DMatrix::from_row_slice(1, lambda.len(), lambda))?;
    Ok((g.dot(&pred.mean), (g.transpose() * pred.block(0) * &g)[(0, 0)]))
}

/// `(μ_i, σ²_i)` of the difference `g_{λ₁}(x_i)ᵗθ(λ₁) − g_{λ₂}(x_i)ᵗθ(λ₂)`
/// under one joint prediction at both points.
pub fn pair_statistics(
    post: &Posterior,
    i: usize,
    lambda1: &[f64],
    lambda2: &[f64],
    model: &dyn CoefficientModel,
) -> Result<(f64, f64)> {
    let q = lambda1.len();
    if lambda2.len() != q {
        return Err(Error::invalid("pair members differ in dimension"));
    }
    let mut pts = DMatrix::zeros(2, q);
    pts.row_mut(0).copy_from_slice(lambda1);
    pts.row_mut(1).copy_from_slice(lambda2);
    let pred = predict(post, &pts)?;
    let g1 = model.slopes(lambda1).row(i).transpose();
    let g2 = model.slopes(lambda2).row(i).transpose();
    let mu = g1.dot(&pred.mean_at(0)) - g2.dot(&pred.mean_at(1));
    let c12 = pred.cross_block(0, 1).expect("full covariance");
    let var = (g1.transpose() * pred.block(0) * &g1)[(0, 0)] - 2.0 * (g1.transpose() * c12 * &g2)[(0, 0)]
        + (g2.transpose() * pred.block(1) * &g2)[(0, 0)];
    Ok((mu, var))
}

fn clamp_variance(var: f64) -> Result<f64> {
    if var > 0.0 {
        Ok(var)
    } else if var > -VARIANCE_TOL {
        Ok(VARIANCE_FLOOR)
    } else {
        Err(Error::numeric(format!("difference variance {var:e} is negative")))
    }
}

/// Empirical coverage of 0 per control point.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub x_indices: Vec<usize>,
    pub x_values: Vec<f64>,
    pub coverage: Vec<f64>,
    pub alpha: f64,
    pub pairs: usize,
    pub seed: u64,
}

impl CoverageReport {
    pub fn min(&self) -> f64 {
        self.coverage.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.coverage.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Two-sided normal quantile `q_{1−α/2}`.
pub fn normal_quantile(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("α must lie in (0, 1), got {alpha}")));
    }
    Ok(Normal::standard().inverse_cdf(1.0 - alpha / 2.0))
}

/// Coverage over explicit `(λ₁, λ₂)` pairs, stored as the rows of `first`
/// and `second`.
pub fn coverage_from_pairs(
    alpha: f64,
    x_indices: &[usize],
    first: &DMatrix<f64>,
    second: &DMatrix<f64>,
    data: &Dataset,
    model: &dyn CoefficientModel,
    params: &HyperParams,
) -> Result<Vec<f64>> {
    let q = normal_quantile(alpha)?;
    if first.shape() != second.shape() || first.nrows() == 0 {
        return Err(Error::invalid("pair sets must be nonempty and of equal shape"));
    }
    if model.n() != data.obs.len() || model.p() != data.lin.p() {
        return Err(Error::invalid("coefficient model does not match the dataset"));
    }
    if let Some(bad) = x_indices.iter().find(|&&i| i >= data.obs.len()) {
        return Err(Error::invalid(format!("control point index {bad} out of range")));
    }
    let rows = |m: &DMatrix<f64>, r: usize| -> Vec<f64> { m.row(r).iter().copied().collect() };
    x_indices
        .iter()
        .map(|&i| {
            let post = loo_posterior(data, i, params)?;
            let hits: Vec<Result<bool>> = (0..first.nrows())
                .into_par_iter()
                .map(|r| {
                    let (mu, var) = pair_statistics(&post, i, &rows(first, r), &rows(second, r), model)?;
                    let sd = clamp_variance(var)?.sqrt();
                    Ok(mu.abs() <= q * sd)
                })
                .collect();
            let mut covered = 0usize;
            for h in hits {
                covered += usize::from(h?);
            }
            Ok(covered as f64 / first.nrows() as f64)
        })
        .collect()
}

/// Draws `pairs` i.i.d. pairs from `dist` and reports, per control point,
/// the fraction of pairs whose `1 − α` interval for the output difference
/// contains 0. The same pairs serve every control point.
#[allow(clippy::too_many_arguments)]
pub fn compensation_coverage(
    alpha: f64,
    x_indices: &[usize],
    pairs: usize,
    dist: &LambdaDistribution,
    data: &Dataset,
    model: &dyn CoefficientModel,
    params: &HyperParams,
    seed: u64,
) -> Result<CoverageReport> {
    let first = sample_iid(dist, pairs, derive_seed(seed, 0))?;
    let second = sample_iid(dist, pairs, derive_seed(seed, 1))?;
    let coverage = coverage_from_pairs(alpha, x_indices, &first, &second, data, model, params)?;
    Ok(CoverageReport {
        x_indices: x_indices.to_vec(),
        x_values: x_indices.iter().map(|&i| data.obs.x[i]).collect(),
        coverage,
        alpha,
        pairs,
        seed,
    })
}

/// Per-λ output distribution `N(g_λ θ̄_pred(λ), g_λ Σ_pred(λ,λ) g_λᵗ)`,
/// reduced to its marginals at each control point.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputDensity {
    pub lambda: Vec<f64>,
    pub mean: DVector<f64>,
    pub variance: DVector<f64>,
}

pub fn output_densities(post: &Posterior, lambdas: &DMatrix<f64>, model: &dyn CoefficientModel) -> Result<Vec<OutputDensity>> {
    let pred = crate::predictive::predict_marginal(post, lambdas, crate::predictive::DEFAULT_CHUNK)?;
    let slopes = model.slopes_at(lambdas);
    slopes
        .iter()
        .enumerate()
        .map(|(j, g)| {
            let out = model_output_predictive(g, &pred.mean_at(j), &pred.block(j))?;
            Ok(OutputDensity {
                lambda: lambdas.row(j).iter().copied().collect(),
                variance: out.cov.diagonal(),
                mean: out.mean,
            })
        })
        .collect()
}

/// Leave-one-out output densities: for every control point `x_i` and every
/// row λ of `lambdas`, the distribution of `g_λ(x_i)ᵗθ(λ)` given `z_{−i}`.
/// Returned as `(x_index, λ row, mean, variance)`.
pub fn loo_output_densities(
    data: &Dataset,
    lambdas: &DMatrix<f64>,
    model: &dyn CoefficientModel,
    params: &HyperParams,
) -> Result<Vec<(usize, usize, f64, f64)>> {
    let slopes = model.slopes_at(lambdas);
    let per_x: Vec<Result<Vec<(usize, usize, f64, f64)>>> = (0..data.obs.len())
        .into_par_iter()
        .map(|i| {
            let post = loo_posterior(data, i, params)?;
            let pred = crate::predictive::predict_marginal(&post, lambdas, crate::predictive::DEFAULT_CHUNK)?;
            Ok(slopes
                .iter()
                .enumerate()
                .map(|(j, g)| {
                    let gi = g.row(i).transpose();
                    (i, j, gi.dot(&pred.mean_at(j)), (gi.transpose() * pred.block(j) * &gi)[(0, 0)])
                })
                .collect())
        })
        .collect();
    let mut out = Vec::new();
    for part in per_x {
        out.extend(part?);
    }
    Ok(out)
}

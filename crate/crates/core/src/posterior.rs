//! GP prior over the stacked design values Θ_m and its exact Gaussian posterior.
//!
//! With `A = Δ + K_φ` the posterior is computed as
//!
//! ```text
//! E[Θ_m | z, φ] = M_β + K_φ A⁻¹ (θ̂ − M_β)
//! Σ_φ           = K_φ − K_φ A⁻¹ K_φ
//! ```
//!
//! which only needs a Cholesky factorization of `A`. No inverse of `K_φ`
//! (ill-conditioned for smooth kernels) or of `Δ` is ever formed.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hyper::HyperParams;
use crate::kernel::{build_prior_cov, Layout, PriorCovariance};
use crate::linalg::{symmetrize, SpdFactor};
use crate::linearization::GlsData;

/// Constant trend `m_{β_u}(λ) = β_u` for each component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrendModel {
    components: usize,
}

impl TrendModel {
    pub fn constant(components: usize) -> Self {
        Self { components }
    }

    pub fn components(&self) -> usize {
        self.components
    }

    /// `H` (pk×p): 1 in the rows of component u, column u.
    pub fn basis(&self, points: usize) -> DMatrix<f64> {
        let layout = Layout::new(self.components, points);
        DMatrix::from_fn(layout.len(), self.components, |r, c| {
            if layout.split(r).1 == c { 1.0 } else { 0.0 }
        })
    }

    /// `Hβ`: β stacked λ-major over `points` locations.
    pub fn mean(&self, beta: &[f64], points: usize) -> DVector<f64> {
        DVector::from_fn(self.components * points, |r, _| beta[r % self.components])
    }
}

/// Multivariate normal over a λ-major stack of θ vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDist {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub layout: Layout,
}

impl GaussianDist {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>, layout: Layout) -> Result<Self> {
        if mean.len() != layout.len() || cov.shape() != (layout.len(), layout.len()) {
            return Err(Error::invalid(format!(
                "Gaussian of dimension {} does not match layout {}×{}",
                mean.len(),
                layout.points,
                layout.components
            )));
        }
        Ok(Self { mean, cov, layout })
    }

    /// θ mean at point `i`.
    pub fn mean_at(&self, i: usize) -> DVector<f64> {
        let p = self.layout.components;
        self.mean.rows(i * p, p).into_owned()
    }

    /// `p×p` covariance block between points `i` and `j`.
    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        let p = self.layout.components;
        self.cov.view((i * p, j * p), (p, p)).into_owned()
    }

    pub fn variance(&self, point: usize, component: usize) -> f64 {
        let idx = self.layout.index(point, component);
        self.cov[(idx, idx)]
    }
}

/// Prior over Θ_m: trend mean `M_β` and jittered covariance `K_φ`.
#[derive(Debug, Clone)]
pub struct Prior {
    pub design: DMatrix<f64>,
    pub params: HyperParams,
    pub trend: TrendModel,
    pub mean: DVector<f64>,
    pub cov: PriorCovariance,
}

impl Prior {
    pub fn layout(&self) -> Layout {
        self.cov.layout()
    }
}

pub fn build_prior(design: &DMatrix<f64>, params: &HyperParams) -> Result<Prior> {
    if design.nrows() == 0 {
        return Err(Error::invalid("design must contain at least one point"));
    }
    let kernels = params.kernels()?;
    let cov = build_prior_cov(design, &kernels)?;
    let trend = TrendModel::constant(params.components());
    let mean = trend.mean(&params.betas(), design.nrows());
    Ok(Prior { design: design.clone(), params: params.clone(), trend, mean, cov })
}

/// Exact posterior of Θ_m, together with the factorization of `Δ + K_φ`
/// reused by prediction.
#[derive(Debug, Clone)]
pub struct Posterior {
    pub prior: Prior,
    pub dist: GaussianDist,
    combined: SpdFactor,
    weights: DVector<f64>,
}

impl Posterior {
    /// Factorization of `Δ + K_φ`.
    pub fn combined_factor(&self) -> &SpdFactor {
        &self.combined
    }

    /// `(Δ + K_φ)⁻¹ (θ̂ − M_β)`.
    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn layout(&self) -> Layout {
        self.dist.layout
    }
}

fn check_compatible(gls: &GlsData, prior: &Prior) -> Result<()> {
    let layout = prior.layout();
    if gls.m() != layout.points || gls.p() != layout.components {
        return Err(Error::invalid(format!(
            "GLS data is {}×{} (m×p) but the prior is {}×{}",
            gls.m(),
            gls.p(),
            layout.points,
            layout.components
        )));
    }
    Ok(())
}

/// `Δ + K_φ` and its factorization.
pub(crate) fn combined_factor(gls: &GlsData, cov: &DMatrix<f64>) -> Result<SpdFactor> {
    let mut a = gls.delta_matrix() + cov;
    symmetrize(&mut a);
    SpdFactor::new(a, "Δ + K_φ")
}

pub fn posterior_theta(gls: &GlsData, prior: Prior) -> Result<Posterior> {
    check_compatible(gls, &prior)?;
    let k = prior.cov.matrix();
    let combined = combined_factor(gls, k)?;
    let residual = gls.stacked_estimates() - &prior.mean;
    let weights = combined.solve_vec(&residual);
    let mean = &prior.mean + k * &weights;
    let half = combined.solve_lower(k);
    let mut cov = k - half.transpose() * &half;
    symmetrize(&mut cov);
    let dist = GaussianDist::new(mean, cov, prior.layout())?;
    Ok(Posterior { prior, dist, combined, weights })
}

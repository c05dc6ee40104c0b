//! Predictive distribution of θ at new λ points and the two target
//! distributions it is benchmarked against.
//!
//! Prediction uses the factorization of `A = Δ + K_φ` held by the posterior:
//!
//! ```text
//! θ̄_pred  = m_β(λ*) + C(λ*, D_m) A⁻¹ (θ̂ − M_β)
//! Σ_pred  = C(λ*, λ*′) − C(λ*, D_m) A⁻¹ C(D_m, λ*′)
//! ```
//!
//! These equal the conditional-GP formulas written with `K_φ⁻¹` and the
//! posterior moments, because `K_φ⁻¹ Σ_φ K_φ⁻¹ = K_φ⁻¹ − A⁻¹`. That form is
//! kept in [`predict_from_moments`] for callers that only hold the moments.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hyper::HyperParams;
use crate::kernel::{cross_cov, Layout};
use crate::linalg::symmetrize;
use crate::linearization::{gls_block, GlsData, ObservationSet};
use crate::posterior::{build_prior, posterior_theta, GaussianDist, Posterior, Prior, TrendModel};

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959964;

/// Points per chunk when only marginal blocks are requested.
pub const DEFAULT_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub enum PredictiveCovariance {
    /// Full `pk×pk` matrix.
    Full(DMatrix<f64>),
    /// Only the `p×p` block of each λ* point.
    Blocks(Vec<DMatrix<f64>>),
}

/// Predictive distribution at `k` points.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveTheta {
    pub lambdas: DMatrix<f64>,
    pub mean: DVector<f64>,
    pub cov: PredictiveCovariance,
    pub layout: Layout,
}

impl PredictiveTheta {
    pub fn len(&self) -> usize {
        self.layout.points
    }

    pub fn is_empty(&self) -> bool {
        self.layout.points == 0
    }

    pub fn mean_at(&self, i: usize) -> DVector<f64> {
        let p = self.layout.components;
        self.mean.rows(i * p, p).into_owned()
    }

    /// `Σ_pred(λ*_i, λ*_i)`.
    pub fn block(&self, i: usize) -> DMatrix<f64> {
        let p = self.layout.components;
        match &self.cov {
            PredictiveCovariance::Full(m) => m.view((i * p, i * p), (p, p)).into_owned(),
            PredictiveCovariance::Blocks(b) => b[i].clone(),
        }
    }

    /// `Σ_pred(λ*_i, λ*_j)`; needs the full covariance.
    pub fn cross_block(&self, i: usize, j: usize) -> Option<DMatrix<f64>> {
        let p = self.layout.components;
        match &self.cov {
            PredictiveCovariance::Full(m) => Some(m.view((i * p, j * p), (p, p)).into_owned()),
            PredictiveCovariance::Blocks(_) => None,
        }
    }

    pub fn full_cov(&self) -> Option<&DMatrix<f64>> {
        match &self.cov {
            PredictiveCovariance::Full(m) => Some(m),
            PredictiveCovariance::Blocks(_) => None,
        }
    }

    pub fn variance(&self, i: usize, u: usize) -> f64 {
        self.block(i)[(u, u)]
    }

    /// 95% normal band for component `u` at point `i`.
    pub fn interval(&self, i: usize, u: usize) -> (f64, f64) {
        let m = self.mean[self.layout.index(i, u)];
        let sd = self.variance(i, u).max(0.0).sqrt();
        (m - Z_95 * sd, m + Z_95 * sd)
    }

    pub fn as_gaussian(&self) -> Option<GaussianDist> {
        self.full_cov().map(|c| GaussianDist { mean: self.mean.clone(), cov: c.clone(), layout: self.layout })
    }
}

fn check_lambdas(lambdas: &DMatrix<f64>, prior: &Prior) -> Result<()> {
    if lambdas.nrows() == 0 {
        return Err(Error::invalid("no prediction points given"));
    }
    if lambdas.ncols() != prior.design.ncols() {
        return Err(Error::invalid(format!(
            "prediction points have dimension {}, design has {}",
            lambdas.ncols(),
            prior.design.ncols()
        )));
    }
    Ok(())
}

fn prior_mean_at(prior: &Prior, points: usize) -> DVector<f64> {
    prior.trend.mean(&prior.params.betas(), points)
}

/// Predictive mean and full covariance at `lambdas`.
pub fn predict(posterior: &Posterior, lambdas: &DMatrix<f64>) -> Result<PredictiveTheta> {
    let prior = &posterior.prior;
    check_lambdas(lambdas, prior)?;
    let kernels = prior.params.kernels()?;
    let c = cross_cov(lambdas, &prior.design, &kernels)?;
    let mean = prior_mean_at(prior, lambdas.nrows()) + &c * posterior.weights();
    let half = posterior.combined_factor().solve_lower(&c.transpose());
    let mut cov = cross_cov(lambdas, lambdas, &kernels)? - half.transpose() * &half;
    symmetrize(&mut cov);
    Ok(PredictiveTheta {
        lambdas: lambdas.clone(),
        mean,
        cov: PredictiveCovariance::Full(cov),
        layout: Layout::new(kernels.len(), lambdas.nrows()),
    })
}

/// Predictive mean and per-point covariance blocks, evaluated in chunks of
/// `chunk` points.
pub fn predict_marginal(posterior: &Posterior, lambdas: &DMatrix<f64>, chunk: usize) -> Result<PredictiveTheta> {
    let prior = &posterior.prior;
    check_lambdas(lambdas, prior)?;
    let chunk = chunk.max(1);
    let kernels = prior.params.kernels()?;
    let p = kernels.len();
    let k = lambdas.nrows();
    let starts: Vec<usize> = (0..k).step_by(chunk).collect();
    let parts: Vec<Result<(DVector<f64>, Vec<DMatrix<f64>>)>> = starts
        .par_iter()
        .map(|&s| {
            let len = chunk.min(k - s);
            let pts = lambdas.rows(s, len).into_owned();
            let c = cross_cov(&pts, &prior.design, &kernels)?;
            let mean = prior_mean_at(prior, len) + &c * posterior.weights();
            let half = posterior.combined_factor().solve_lower(&c.transpose());
            let blocks = (0..len)
                .map(|i| {
                    let h = half.columns(i * p, p);
                    let mut b = DMatrix::from_diagonal(&DVector::from_iterator(p, kernels.iter().map(|k| k.variance())))
                        - h.transpose() * h;
                    symmetrize(&mut b);
                    b
                })
                .collect();
            Ok((mean, blocks))
        })
        .collect();
    let mut mean = DVector::zeros(p * k);
    let mut blocks = Vec::with_capacity(k);
    for (s, part) in starts.iter().zip(parts) {
        let (m, b) = part?;
        mean.rows_mut(s * p, m.len()).copy_from(&m);
        blocks.extend(b);
    }
    Ok(PredictiveTheta {
        lambdas: lambdas.clone(),
        mean,
        cov: PredictiveCovariance::Blocks(blocks),
        layout: Layout::new(p, k),
    })
}

/// Conditional-GP prediction from arbitrary posterior moments of Θ_m:
/// `m_β + C K_φ⁻¹ (E − M_β)` and `Σ_cond + C K_φ⁻¹ Σ_φ K_φ⁻¹ Cᵗ`, with every
/// `K_φ⁻¹` applied through the prior's Cholesky factor.
pub fn predict_from_moments(lambdas: &DMatrix<f64>, moments: &GaussianDist, prior: &Prior) -> Result<PredictiveTheta> {
    check_lambdas(lambdas, prior)?;
    if moments.layout != prior.layout() {
        return Err(Error::invalid("posterior moments do not match the prior layout"));
    }
    let kernels = prior.params.kernels()?;
    let c = cross_cov(lambdas, &prior.design, &kernels)?;
    let w = prior.cov.factor().solve_mat(&c.transpose());
    let mean = prior_mean_at(prior, lambdas.nrows()) + w.transpose() * (&moments.mean - &prior.mean);
    let cond = cross_cov(lambdas, lambdas, &kernels)? - &c * &w;
    let mut cov = cond + w.transpose() * &moments.cov * &w;
    symmetrize(&mut cov);
    Ok(PredictiveTheta {
        lambdas: lambdas.clone(),
        mean,
        cov: PredictiveCovariance::Full(cov),
        layout: Layout::new(kernels.len(), lambdas.nrows()),
    })
}

/// GLS summaries at the λ* points from their exact slope matrices.
pub fn gls_at(slopes: &[DMatrix<f64>], obs: &ObservationSet) -> Result<GlsData> {
    if slopes.is_empty() {
        return Err(Error::invalid("no slope matrices given"));
    }
    let var = obs.total_variance();
    let mut estimates = Vec::with_capacity(slopes.len());
    let mut deltas = Vec::with_capacity(slopes.len());
    for (i, g) in slopes.iter().enumerate() {
        let (d, e) = gls_block(g, &obs.z, &var).map_err(|e| Error::Rank(format!("λ*_{i}: {e}")))?;
        deltas.push(d);
        estimates.push(e);
    }
    GlsData::new(estimates, deltas, obs.len(), obs.log_det_noise())
}

/// Target with a flat prior at every λ*: block-diagonal, each block the GLS
/// estimate and its covariance Δ_i.
pub fn target_jeffreys(slopes: &[DMatrix<f64>], obs: &ObservationSet) -> Result<GaussianDist> {
    let gls = gls_at(slopes, obs)?;
    GaussianDist::new(gls.stacked_estimates(), gls.delta_matrix(), gls.layout())
}

/// Target with the GP prior at fitted φ̂: the exact posterior over Θ_k with
/// the design replaced by λ*.
pub fn target_gp(lambdas: &DMatrix<f64>, slopes: &[DMatrix<f64>], obs: &ObservationSet, params: &HyperParams) -> Result<GaussianDist> {
    if lambdas.nrows() != slopes.len() {
        return Err(Error::invalid("one slope matrix per λ* point is required"));
    }
    let gls = gls_at(slopes, obs)?;
    let prior = build_prior(lambdas, params)?;
    Ok(posterior_theta(&gls, prior)?.dist)
}

struct GpTarget {
    prior_mean: DVector<f64>,
    k: DMatrix<f64>,
    factor: crate::linalg::SpdFactor,
    weights: DVector<f64>,
}

// Dense λ* grids make K_φ alone numerically singular, but Δ + K_φ stays
// well conditioned, so these skip the factorization of K_φ (and its jitter).
fn gp_target_system(lambdas: &DMatrix<f64>, slopes: &[DMatrix<f64>], obs: &ObservationSet, params: &HyperParams) -> Result<GpTarget> {
    if lambdas.nrows() != slopes.len() {
        return Err(Error::invalid("one slope matrix per λ* point is required"));
    }
    if lambdas.ncols() != params.lambda_dim() {
        return Err(Error::invalid("λ* dimension does not match the lengthscales"));
    }
    let gls = gls_at(slopes, obs)?;
    if gls.p() != params.components() {
        return Err(Error::invalid(format!("{} components in φ for θ of dimension {}", params.components(), gls.p())));
    }
    let kernels = params.kernels()?;
    let k = cross_cov(lambdas, lambdas, &kernels)?;
    let factor = crate::posterior::combined_factor(&gls, &k)?;
    let prior_mean = trend_at(params, lambdas.nrows());
    let weights = factor.solve_vec(&(gls.stacked_estimates() - &prior_mean));
    Ok(GpTarget { prior_mean, k, factor, weights })
}

/// Mean of [`target_gp`] without forming the posterior covariance.
pub fn target_gp_mean(lambdas: &DMatrix<f64>, slopes: &[DMatrix<f64>], obs: &ObservationSet, params: &HyperParams) -> Result<DVector<f64>> {
    let t = gp_target_system(lambdas, slopes, obs, params)?;
    Ok(&t.prior_mean + &t.k * &t.weights)
}

/// Mean and per-point covariance blocks of [`target_gp`].
pub fn target_gp_marginal(lambdas: &DMatrix<f64>, slopes: &[DMatrix<f64>], obs: &ObservationSet, params: &HyperParams) -> Result<PredictiveTheta> {
    let t = gp_target_system(lambdas, slopes, obs, params)?;
    let p = params.components();
    let mean = &t.prior_mean + &t.k * &t.weights;
    let half = t.factor.solve_lower(&t.k);
    let blocks = (0..lambdas.nrows())
        .map(|i| {
            let h = half.columns(i * p, p);
            let mut b = t.k.view((i * p, i * p), (p, p)) - h.transpose() * h;
            symmetrize(&mut b);
            b
        })
        .collect();
    Ok(PredictiveTheta {
        lambdas: lambdas.clone(),
        mean,
        cov: PredictiveCovariance::Blocks(blocks),
        layout: Layout::new(p, lambdas.nrows()),
    })
}

/// Wraps a per-point Gaussian (such as [`target_jeffreys`]) for reporting.
pub fn marginals_of(lambdas: &DMatrix<f64>, dist: &GaussianDist) -> Result<PredictiveTheta> {
    if dist.layout.points != lambdas.nrows() {
        return Err(Error::invalid("distribution and λ* point counts differ"));
    }
    let blocks = (0..lambdas.nrows()).map(|i| dist.block(i, i)).collect();
    Ok(PredictiveTheta {
        lambdas: lambdas.clone(),
        mean: dist.mean.clone(),
        cov: PredictiveCovariance::Blocks(blocks),
        layout: dist.layout,
    })
}

/// Trend value `m_β(λ*)` stacked over `k` points.
pub fn trend_at(params: &HyperParams, k: usize) -> DVector<f64> {
    TrendModel::constant(params.components()).mean(&params.betas(), k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::rng_from_seed;
    use crate::hyper::ComponentParams;
    use rand::Rng;

    fn col(points: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(points.len(), 1, points)
    }

    fn setup(rng: &mut impl Rng, p: usize, m: usize) -> Posterior {
        let params = HyperParams::new(
            (0..p)
                .map(|_| ComponentParams {
                    beta: rng.random_range(-1.0..1.0),
                    variance: rng.random_range(0.5..2.0),
                    lengthscales: vec![rng.random_range(0.2..0.6)],
                })
                .collect(),
        )
        .unwrap();
        let pts: Vec<f64> = (0..m).map(|j| (j as f64 + rng.random_range(0.0..1.0)) / m as f64).collect();
        let prior = build_prior(&col(&pts), &params).unwrap();
        let gls = GlsData::new(
            (0..m).map(|_| DVector::from_fn(p, |_, _| rng.random_range(-2.0..2.0))).collect(),
            (0..m)
                .map(|_| {
                    let a = DMatrix::from_fn(p, p, |_, _| rng.random_range(-0.3..0.3));
                    &a * a.transpose() + DMatrix::identity(p, p) * 0.1
                })
                .collect(),
            4,
            0.0,
        )
        .unwrap();
        posterior_theta(&gls, prior).unwrap()
    }

    #[test]
    fn interpolates_at_design_points() {
        let mut rng = rng_from_seed(4);
        let post = setup(&mut rng, 2, 4);
        let pred = predict(&post, &post.prior.design).unwrap();
        let tol = 1e-6;
        assert!((&pred.mean - &post.dist.mean).amax() < tol);
        for j in 0..4 {
            assert!((pred.block(j) - post.dist.block(j, j)).amax() < tol);
        }
    }

    #[test]
    fn decorrelates_far_away() {
        let mut rng = rng_from_seed(5);
        let post = setup(&mut rng, 2, 3);
        let pred = predict(&post, &col(&[1e3])).unwrap();
        let params = &post.prior.params;
        for u in 0..2 {
            assert!((pred.mean[u] - params.component(u).beta).abs() < 1e-12);
            assert!((pred.variance(0, u) - params.component(u).variance).abs() < 1e-12);
        }
    }

    #[test]
    fn moments_form_agrees_with_stable_form() {
        let mut rng = rng_from_seed(6);
        for _ in 0..10 {
            let post = setup(&mut rng, 2, 5);
            let lam = col(&[0.05, 0.33, 0.71, 1.2]);
            let a = predict(&post, &lam).unwrap();
            let b = predict_from_moments(&lam, &post.dist, &post.prior).unwrap();
            assert!((&a.mean - &b.mean).amax() < 1e-7);
            assert!((a.full_cov().unwrap() - b.full_cov().unwrap()).amax() < 1e-7);
        }
    }

    #[test]
    fn marginal_blocks_match_full() {
        let mut rng = rng_from_seed(7);
        let post = setup(&mut rng, 2, 6);
        let lam = DMatrix::from_fn(13, 1, |i, _| i as f64 / 12.0);
        let full = predict(&post, &lam).unwrap();
        let marg = predict_marginal(&post, &lam, 5).unwrap();
        assert!((&full.mean - &marg.mean).amax() < 1e-12);
        for i in 0..13 {
            assert!((full.block(i) - marg.block(i)).amax() < 1e-12);
        }
        assert!(marg.cross_block(0, 1).is_none());
    }

    #[test]
    fn added_uncertainty_is_psd() {
        let mut rng = rng_from_seed(8);
        for _ in 0..10 {
            let post = setup(&mut rng, 2, 5);
            let lam = col(&[0.1, 0.45, 0.8]);
            let pred = predict(&post, &lam).unwrap();
            let kernels = post.prior.params.kernels().unwrap();
            let c = cross_cov(&lam, &post.prior.design, &kernels).unwrap();
            let w = post.prior.cov.factor().solve_mat(&c.transpose());
            let cond = cross_cov(&lam, &lam, &kernels).unwrap() - &c * &w;
            let mut diff = pred.full_cov().unwrap() - cond;
            symmetrize(&mut diff);
            assert!(diff.symmetric_eigen().eigenvalues.min() >= -1e-10);
        }
    }

    #[test]
    fn moments_prediction_is_linear_in_mean() {
        let mut rng = rng_from_seed(9);
        let post = setup(&mut rng, 1, 5);
        let lam = col(&[0.2, 0.6]);
        let base = predict_from_moments(&lam, &post.dist, &post.prior).unwrap();
        let shift = DVector::from_fn(5, |_, _| rng.random_range(-1.0..1.0));
        let mut moved = post.dist.clone();
        moved.mean += &shift;
        let shifted = predict_from_moments(&lam, &moved, &post.prior).unwrap();
        let kernels = post.prior.params.kernels().unwrap();
        let c = cross_cov(&lam, &post.prior.design, &kernels).unwrap();
        let expected = &c * post.prior.cov.factor().solve_vec(&shift);
        assert!((&shifted.mean - &base.mean - expected).amax() < 1e-12);
    }

    #[test]
    fn jeffreys_target_is_block_diagonal_gls() {
        let obs = ObservationSet::new(vec![0.0, 1.0, 2.0], vec![4.0, 5.0, 6.5], vec![2.0; 3]).unwrap();
        let slopes = vec![DMatrix::from_element(3, 1, 2.0), DMatrix::from_element(3, 1, 5.0)];
        let t = target_jeffreys(&slopes, &obs).unwrap();
        let zbar = obs.mean();
        assert!((t.mean[0] - zbar / 2.0).abs() < 1e-14);
        assert!((t.mean[1] - zbar / 5.0).abs() < 1e-14);
        assert!((t.cov[(0, 0)] - 2.0 / (3.0 * 4.0)).abs() < 1e-15);
        assert_eq!(t.cov[(0, 1)], 0.0);
    }

    #[test]
    fn jeffreys_interpolates_square_systems() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -1.0, 0.5]);
        let obs = ObservationSet::new(vec![0.0, 1.0], vec![3.0, 1.0], vec![0.5, 2.0]).unwrap();
        let t = target_jeffreys(std::slice::from_ref(&g), &obs).unwrap();
        let exact = g.clone().lu().solve(&obs.z).unwrap();
        assert!((&t.mean - exact).amax() < 1e-13);
        let w = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5]));
        let expected = (g.transpose() * w * &g).try_inverse().unwrap();
        assert!((&t.cov - expected).amax() < 1e-13);
    }

    #[test]
    fn gp_target_with_vague_prior_approaches_jeffreys() {
        let obs = ObservationSet::new(vec![0.0, 1.0, 2.0], vec![4.0, 5.0, 6.5], vec![2.0; 3]).unwrap();
        let lam = col(&[1.0, 4.0]);
        let slopes = vec![DMatrix::from_element(3, 1, 1.0), DMatrix::from_element(3, 1, 4.0)];
        let params = HyperParams::new(vec![ComponentParams { beta: 1.0, variance: 1e9, lengthscales: vec![0.01] }]).unwrap();
        let gp = target_gp(&lam, &slopes, &obs, &params).unwrap();
        let jf = target_jeffreys(&slopes, &obs).unwrap();
        assert!((&gp.mean - &jf.mean).amax() < 1e-6);
        assert!((&gp.cov - &jf.cov).amax() < 1e-6);
        let mean_only = target_gp_mean(&lam, &slopes, &obs, &params).unwrap();
        assert!((mean_only - &gp.mean).amax() < 1e-12);
    }

    #[test]
    fn gp_target_single_point_matches_posterior() {
        let obs = ObservationSet::new(vec![0.0, 1.0], vec![1.0, 2.0], vec![0.5, 1.5]).unwrap();
        let lam = col(&[0.3]);
        let slopes = vec![DMatrix::from_element(2, 1, 2.0)];
        let params = HyperParams::new(vec![ComponentParams { beta: 0.4, variance: 0.8, lengthscales: vec![0.2] }]).unwrap();
        let gp = target_gp(&lam, &slopes, &obs, &params).unwrap();
        // scalar conjugate update by hand
        let prec = 4.0 / 0.5 + 4.0 / 1.5;
        let k = 0.8 * (1.0 + crate::kernel::JITTER_START);
        let var = 1.0 / (prec + 1.0 / k);
        let mean = var * (0.4 / k + 2.0 * 1.0 / 0.5 + 2.0 * 2.0 / 1.5);
        assert!((gp.mean[0] - mean).abs() < 1e-12);
        assert!((gp.cov[(0, 0)] - var).abs() < 1e-12);
    }

    #[test]
    fn gp_target_on_design_equals_posterior() {
        let obs = ObservationSet::new(vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 2.5], vec![0.5, 1.5, 1.0]).unwrap();
        let lam = col(&[0.1, 0.5, 0.7]);
        let slopes: Vec<DMatrix<f64>> = (0..3).map(|j| DMatrix::from_element(3, 1, 1.0 + j as f64)).collect();
        let params = HyperParams::new(vec![ComponentParams { beta: 0.4, variance: 0.8, lengthscales: vec![0.3] }]).unwrap();
        let gp = target_gp(&lam, &slopes, &obs, &params).unwrap();
        let lin = crate::linearization::LinearizedModel::from_slopes(slopes).unwrap();
        let cal = crate::linearization::assemble_calibration_matrices(&lin, &obs).unwrap();
        let post = posterior_theta(&cal.gls, build_prior(&lam, &params).unwrap()).unwrap();
        assert_eq!(gp, post.dist);
    }

    #[test]
    fn gp_target_marginals_match_full_target() {
        let obs = ObservationSet::new(vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 2.5], vec![0.5, 1.5, 1.0]).unwrap();
        let lam = col(&[0.1, 0.5, 0.7, 0.95]);
        let slopes: Vec<DMatrix<f64>> = (0..4)
            .map(|j| DMatrix::from_fn(3, 2, |i, u| 1.0 + j as f64 * 0.3 + (i * (u + 1)) as f64 * 0.2))
            .collect();
        let params = HyperParams::new(vec![
            ComponentParams { beta: 0.4, variance: 0.8, lengthscales: vec![0.3] },
            ComponentParams { beta: -1.0, variance: 2.0, lengthscales: vec![0.5] },
        ])
        .unwrap();
        let full = target_gp(&lam, &slopes, &obs, &params).unwrap();
        let marg = target_gp_marginal(&lam, &slopes, &obs, &params).unwrap();
        assert!((&full.mean - &marg.mean).amax() < 1e-6);
        for i in 0..4 {
            assert!((full.block(i, i) - marg.block(i)).amax() < 1e-6);
        }
    }

    #[test]
    fn gp_target_survives_dense_grids() {
        let obs = ObservationSet::new(vec![0.0, 1.0], vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let lam = DMatrix::from_fn(400, 1, |i, _| i as f64 / 399.0);
        let slopes: Vec<DMatrix<f64>> = (0..400).map(|j| DMatrix::from_element(2, 1, 1.0 + lam[(j, 0)])).collect();
        let params = HyperParams::new(vec![ComponentParams { beta: 0.0, variance: 1.0, lengthscales: vec![0.5] }]).unwrap();
        let t = target_gp_marginal(&lam, &slopes, &obs, &params).unwrap();
        assert!(t.mean.iter().all(|v| v.is_finite()));
        assert!((0..400).all(|i| t.variance(i, 0) > -1e-10));
    }

    #[test]
    fn rejects_wrong_dimension() {
        let mut rng = rng_from_seed(1);
        let post = setup(&mut rng, 1, 3);
        assert!(predict(&post, &DMatrix::zeros(2, 2)).is_err());
        assert!(predict(&post, &DMatrix::zeros(0, 1)).is_err());
    }
}

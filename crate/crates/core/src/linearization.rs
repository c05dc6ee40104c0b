//! Linearization of the numerical model in θ and the per-λ GLS quantities
//! the calibration works with.
//!
//! For every design point λ_j the model output at the control points is
//! written `y = g₀ + g θ` with `g` an `n×p` slope matrix. Given the data `z`
//! and noise covariance `Σ_ε`, each λ_j contributes
//! `Δ_j = (gᵗΣ_ε⁻¹g)⁻¹` and the GLS estimate `θ̂_j = Δ_j gᵗΣ_ε⁻¹(z − g₀)`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::Layout;
use crate::linalg::{block_diag, SpdFactor};

/// One simulation run: θ at a (λ_j, x_i) cell and the resulting output.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRecord {
    pub lambda_index: usize,
    pub x_index: usize,
    pub theta: Vec<f64>,
    pub output: f64,
}

/// All simulations used to linearize the model, grouped by (λ_j, x_i) on demand.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimulationBundle {
    pub records: Vec<SimulationRecord>,
}

impl SimulationBundle {
    pub fn new(records: Vec<SimulationRecord>) -> Self {
        Self { records }
    }

    /// θ dimension, taken from the first record.
    pub fn theta_dim(&self) -> Option<usize> {
        self.records.first().map(|r| r.theta.len())
    }

    /// Total number of simulator runs (`m·n·n_sim` for a full bundle).
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn cells(&self) -> BTreeMap<(usize, usize), Vec<&SimulationRecord>> {
        let mut cells: BTreeMap<(usize, usize), Vec<&SimulationRecord>> = BTreeMap::new();
        for r in &self.records {
            cells.entry((r.lambda_index, r.x_index)).or_default().push(r);
        }
        cells
    }
}

/// Per-λ linear coefficients at the control points.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedModel {
    /// `m×n`, row j holds g_{λ_j,0}(x_i).
    pub intercepts: DMatrix<f64>,
    /// One `n×p` slope matrix per design point.
    pub slopes: Vec<DMatrix<f64>>,
    /// `m×n` OLS residual variances (0 when the fit is exact or saturated).
    pub residual_variance: DMatrix<f64>,
    pub zero_intercept: bool,
}

impl LinearizedModel {
    /// Exact zero-intercept coefficients.
    pub fn from_slopes(slopes: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = slopes.first().ok_or_else(|| Error::invalid("no slope matrices"))?;
        let (n, p) = first.shape();
        if slopes.iter().any(|s| s.shape() != (n, p)) {
            return Err(Error::invalid("slope matrices must all be n×p"));
        }
        let m = slopes.len();
        Ok(Self {
            intercepts: DMatrix::zeros(m, n),
            slopes,
            residual_variance: DMatrix::zeros(m, n),
            zero_intercept: true,
        })
    }

    pub fn design_size(&self) -> usize {
        self.slopes.len()
    }

    pub fn n(&self) -> usize {
        self.intercepts.ncols()
    }

    pub fn p(&self) -> usize {
        self.slopes.first().map_or(0, |s| s.ncols())
    }

    pub fn has_intercepts(&self) -> bool {
        self.intercepts.iter().any(|v| *v != 0.0)
    }

    /// Copy with control point `i` removed from every λ.
    pub fn without(&self, i: usize) -> Result<Self> {
        if i >= self.n() {
            return Err(Error::invalid(format!("control point index {i} out of range")));
        }
        Ok(Self {
            intercepts: self.intercepts.clone().remove_column(i),
            slopes: self.slopes.iter().map(|s| s.clone().remove_row(i)).collect(),
            residual_variance: self.residual_variance.clone().remove_column(i),
            zero_intercept: self.zero_intercept,
        })
    }

    /// Candidate δ²_i: the largest residual variance at x_i over the design.
    pub fn max_residual_variance(&self) -> DVector<f64> {
        DVector::from_fn(self.n(), |i, _| {
            self.residual_variance.column(i).iter().fold(0.0_f64, |a, &b| a.max(b))
        })
    }
}

/// Least-squares fit of `y` on `(1, θ)` (or `θ` alone) for every (λ_j, x_i) cell.
pub fn fit_linear_coefficients(bundle: &SimulationBundle, force_zero_intercept: bool) -> Result<LinearizedModel> {
    let p = bundle.theta_dim().ok_or_else(|| Error::invalid("simulation bundle is empty"))?;
    if p == 0 {
        return Err(Error::invalid("θ must have at least one component"));
    }
    if bundle.records.iter().any(|r| r.theta.len() != p) {
        return Err(Error::invalid("simulation records disagree on the θ dimension"));
    }
    let cells = bundle.cells();
    let m = cells.keys().map(|k| k.0).max().unwrap() + 1;
    let n = cells.keys().map(|k| k.1).max().unwrap() + 1;
    if cells.len() != m * n {
        return Err(Error::invalid(format!(
            "simulation bundle covers {} of the {m}×{n} (λ, x) cells",
            cells.len()
        )));
    }

    let mut intercepts = DMatrix::zeros(m, n);
    let mut residual_variance = DMatrix::zeros(m, n);
    let mut slopes = vec![DMatrix::zeros(n, p); m];
    let cols = if force_zero_intercept { p } else { p + 1 };
    for ((j, i), recs) in &cells {
        let rows = recs.len();
        if rows < cols {
            return Err(Error::invalid(format!(
                "cell (λ_{j}, x_{i}) has {rows} simulations, needs at least {cols}"
            )));
        }
        let offset = cols - p;
        let x = DMatrix::from_fn(rows, cols, |r, c| if c < offset { 1.0 } else { recs[r].theta[c - offset] });
        let y = DVector::from_fn(rows, |r, _| recs[r].output);
        let coef = least_squares(&x, &y).ok_or_else(|| {
            Error::invalid(format!("θ samples at cell (λ_{j}, x_{i}) are rank deficient"))
        })?;
        if offset == 1 {
            intercepts[(*j, *i)] = coef[0];
        }
        for u in 0..p {
            slopes[*j][(*i, u)] = coef[offset + u];
        }
        let resid = &y - &x * &coef;
        let dof = rows - cols;
        residual_variance[(*j, *i)] = if dof > 0 { resid.norm_squared() / dof as f64 } else { 0.0 };
    }
    Ok(LinearizedModel { intercepts, slopes, residual_variance, zero_intercept: force_zero_intercept })
}

/// Householder-QR least squares; `None` when the design is numerically rank deficient.
fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    if scale == 0.0 || r.diagonal().iter().any(|d| d.abs() <= 1e-12 * scale) {
        return None;
    }
    let qty = qr.q().transpose() * y;
    r.solve_upper_triangular(&qty)
}

/// Experimental data and their noise model.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub x: Vec<f64>,
    pub z: DVector<f64>,
    pub noise_variance: DVector<f64>,
    pub linearization_variance: DVector<f64>,
}

impl ObservationSet {
    pub fn new(x: Vec<f64>, z: Vec<f64>, noise_variance: Vec<f64>) -> Result<Self> {
        let n = z.len();
        let obs = Self {
            x,
            z: DVector::from_vec(z),
            noise_variance: DVector::from_vec(noise_variance),
            linearization_variance: DVector::zeros(n),
        };
        obs.validate()?;
        Ok(obs)
    }

    /// Sets δ²_i.
    pub fn with_linearization_variance(mut self, delta2: DVector<f64>) -> Result<Self> {
        self.linearization_variance = delta2;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let n = self.z.len();
        if n == 0 {
            return Err(Error::invalid("observation set is empty"));
        }
        if self.x.len() != n || self.noise_variance.len() != n || self.linearization_variance.len() != n {
            return Err(Error::invalid("observation vectors have different lengths"));
        }
        if self.z.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("observations must be finite"));
        }
        if self.linearization_variance.iter().any(|v| *v < 0.0) {
            return Err(Error::invalid("linearization variances must be >= 0"));
        }
        if let Some(v) = self.total_variance().iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::invalid(format!("total observation variance must be positive, got {v}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Diagonal of Σ_ε: σ²_{ε_i} + δ²_i.
    pub fn total_variance(&self) -> DVector<f64> {
        &self.noise_variance + &self.linearization_variance
    }

    /// log|Σ_ε|.
    pub fn log_det_noise(&self) -> f64 {
        self.total_variance().iter().map(|v| v.ln()).sum()
    }

    pub fn mean(&self) -> f64 {
        self.z.mean()
    }

    /// Copy with observation `i` removed.
    pub fn without(&self, i: usize) -> Result<Self> {
        if i >= self.len() {
            return Err(Error::invalid(format!("observation index {i} out of range")));
        }
        let keep = |v: &DVector<f64>| v.clone().remove_row(i);
        let mut x = self.x.clone();
        x.remove(i);
        Ok(Self {
            x,
            z: keep(&self.z),
            noise_variance: keep(&self.noise_variance),
            linearization_variance: keep(&self.linearization_variance),
        })
    }
}

/// What the posterior and the marginal likelihood need from the data:
/// per-λ GLS estimates, their covariances Δ_j, and the noise log-determinant.
#[derive(Debug, Clone, PartialEq)]
pub struct GlsData {
    /// θ̂_j for every design point.
    pub estimates: Vec<DVector<f64>>,
    /// Δ_j for every design point.
    pub deltas: Vec<DMatrix<f64>>,
    /// Number of observations n.
    pub n_obs: usize,
    /// log|Σ_ε|.
    pub log_det_noise: f64,
}

impl GlsData {
    pub fn new(estimates: Vec<DVector<f64>>, deltas: Vec<DMatrix<f64>>, n_obs: usize, log_det_noise: f64) -> Result<Self> {
        let p = estimates.first().ok_or_else(|| Error::invalid("GLS data needs at least one design point"))?.len();
        if deltas.len() != estimates.len() {
            return Err(Error::invalid("one Δ block is required per GLS estimate"));
        }
        if estimates.iter().any(|e| e.len() != p) || deltas.iter().any(|d| d.shape() != (p, p)) {
            return Err(Error::invalid("GLS estimates and Δ blocks must all have dimension p"));
        }
        Ok(Self { estimates, deltas, n_obs, log_det_noise })
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.p(), self.m())
    }

    pub fn m(&self) -> usize {
        self.estimates.len()
    }

    pub fn p(&self) -> usize {
        self.estimates[0].len()
    }

    /// θ̂ stacked λ-major (equals ΔGᵗΣ_ε⁻¹z).
    pub fn stacked_estimates(&self) -> DVector<f64> {
        let p = self.p();
        DVector::from_fn(p * self.m(), |i, _| self.estimates[i / p][i % p])
    }

    /// Block-diagonal Δ.
    pub fn delta_matrix(&self) -> DMatrix<f64> {
        block_diag(&self.deltas)
    }

    /// log|Δ|.
    pub fn log_det_delta(&self) -> Result<f64> {
        self.deltas
            .iter()
            .enumerate()
            .map(|(j, d)| SpdFactor::new(d.clone(), &format!("Δ block {j}")).map(|f| f.log_det()))
            .sum()
    }
}

/// Calibration-ready matrices: `G = (g_{λ_1}, …, g_{λ_m})` plus the GLS summary.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationMatrices {
    pub g: DMatrix<f64>,
    pub gls: GlsData,
}

/// Per-λ Δ and GLS estimate for one slope matrix. `z` must already have
/// the intercept removed.
pub fn gls_block(slopes: &DMatrix<f64>, z: &DVector<f64>, variance: &DVector<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if slopes.nrows() != z.len() || variance.len() != z.len() {
        return Err(Error::invalid(format!(
            "slope matrix has {} rows for {} observations",
            slopes.nrows(),
            z.len()
        )));
    }
    let mut weighted = slopes.clone();
    for (mut row, v) in weighted.row_iter_mut().zip(variance.iter()) {
        row /= *v;
    }
    let precision = slopes.transpose() * &weighted;
    let rhs = weighted.transpose() * z;
    let factor = SpdFactor::new(precision, "gᵗΣ_ε⁻¹g").map_err(|e| Error::Rank(e.to_string()))?;
    let scale = factor.lower().diagonal().iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    if factor.lower().diagonal().iter().any(|d| d.abs() <= 1e-10 * scale) {
        return Err(Error::Rank("gᵗΣ_ε⁻¹g is numerically singular".into()));
    }
    let mut delta = factor.inverse();
    crate::linalg::symmetrize(&mut delta);
    let estimate = factor.solve_vec(&rhs);
    Ok((delta, estimate))
}

/// Builds `G`, the Δ blocks, and the per-λ GLS estimates. Nonzero intercepts
/// are handled by calibrating `z − g₀(λ_j)` for each λ_j.
pub fn assemble_calibration_matrices(lin: &LinearizedModel, obs: &ObservationSet) -> Result<CalibrationMatrices> {
    let m = lin.design_size();
    if m == 0 {
        return Err(Error::invalid("linearized model has no design points"));
    }
    let (n, p) = (lin.n(), lin.p());
    if n != obs.len() {
        return Err(Error::invalid(format!("model has {n} control points, data has {}", obs.len())));
    }
    if n < p {
        return Err(Error::invalid(format!("need n >= p, got n={n}, p={p}")));
    }
    let variance = obs.total_variance();
    let mut g = DMatrix::zeros(n, p * m);
    let mut estimates = Vec::with_capacity(m);
    let mut deltas = Vec::with_capacity(m);
    for (j, slopes) in lin.slopes.iter().enumerate() {
        let z = &obs.z - lin.intercepts.row(j).transpose();
        let (delta, est) = gls_block(slopes, &z, &variance)
            .map_err(|e| Error::Rank(format!("design point λ_{j}: {e}")))?;
        g.view_mut((0, j * p), (n, p)).copy_from(slopes);
        estimates.push(est);
        deltas.push(delta);
    }
    let gls = GlsData::new(estimates, deltas, n, obs.log_det_noise())?;
    Ok(CalibrationMatrices { g, gls })
}

//! Matérn 5/2 covariance and the structured covariance matrices built from it.
//!
//! Stacked quantities over a set of λ points use the λ-major layout: the `p`
//! components of θ(λ₁) come first, then those of θ(λ₂), and so on. Each
//! component is an independent GP, so every λ-pair block of a covariance
//! matrix is a `p×p` diagonal matrix.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::SpdFactor;

const SQRT_5: f64 = 2.236_067_977_499_79;

/// Relative diagonal jitter tried first, then escalated ×10 up to the max.
pub const JITTER_START: f64 = 1e-8;
pub const JITTER_MAX: f64 = 1e-4;

/// Unit-variance Matérn 5/2 correlation at distance `d` for lengthscale `psi`.
#[inline]
pub(crate) fn matern52_unit(d: f64, psi: f64) -> f64 {
    let r = SQRT_5 * d / psi;
    (1.0 + r + r * r / 3.0) * (-r).exp()
}

/// Matérn 5/2 covariance `σ²(1 + √5 d/ψ + 5/3 (d/ψ)²) exp(−√5 d/ψ)`.
pub fn matern52(distance: f64, variance: f64, lengthscale: f64) -> Result<f64> {
    if !distance.is_finite() || distance < 0.0 {
        return Err(Error::invalid(format!("distance must be finite and >= 0, got {distance}")));
    }
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::invalid(format!("variance must be positive, got {variance}")));
    }
    if !(lengthscale > 0.0 && lengthscale.is_finite()) {
        return Err(Error::invalid(format!("lengthscale must be positive, got {lengthscale}")));
    }
    Ok(variance * matern52_unit(distance, lengthscale))
}

/// Covariance of one θ component: a shared variance and one lengthscale per λ dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentKernel {
    variance: f64,
    lengthscales: Vec<f64>,
}

impl ComponentKernel {
    pub fn new(variance: f64, lengthscales: Vec<f64>) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::invalid(format!("kernel variance must be positive, got {variance}")));
        }
        if lengthscales.is_empty() {
            return Err(Error::invalid("kernel needs at least one lengthscale"));
        }
        if let Some(bad) = lengthscales.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::invalid(format!("lengthscales must be positive, got {bad}")));
        }
        Ok(Self { variance, lengthscales })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// Product of 1-D unit correlations times the variance.
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        self.variance * self.correlation(a, b)
    }

    fn correlation(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.lengthscales)
            .map(|((x, y), psi)| matern52_unit((x - y).abs(), *psi))
            .product()
    }
}

fn check_points(points: &DMatrix<f64>, dim: usize, what: &str) -> Result<()> {
    if points.ncols() != dim {
        return Err(Error::invalid(format!(
            "{what} has {} columns but the kernel has {dim} lengthscales",
            points.ncols()
        )));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{what} contains non-finite coordinates")));
    }
    Ok(())
}

fn point(points: &DMatrix<f64>, i: usize) -> Vec<f64> {
    points.row(i).iter().copied().collect()
}

/// `a×b` matrix of kernel values between the rows of `a` and the rows of `b`.
pub fn kernel_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>, kernel: &ComponentKernel) -> Result<DMatrix<f64>> {
    check_points(a, kernel.dim(), "left point set")?;
    check_points(b, kernel.dim(), "right point set")?;
    let rows: Vec<Vec<f64>> = (0..a.nrows()).map(|i| point(a, i)).collect();
    let cols: Vec<Vec<f64>> = (0..b.nrows()).map(|j| point(b, j)).collect();
    Ok(DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| kernel.eval(&rows[i], &cols[j])))
}

/// Index bookkeeping for λ-major stacking of `points` θ vectors of size `components`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub components: usize,
    pub points: usize,
}

impl Layout {
    pub fn new(components: usize, points: usize) -> Self {
        Self { components, points }
    }

    pub fn len(&self) -> usize {
        self.components * self.points
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stacked index of component `u` at point `j` (both zero-based).
    #[inline]
    pub fn index(&self, point: usize, component: usize) -> usize {
        point * self.components + component
    }

    /// Inverse of [`Layout::index`].
    pub fn split(&self, index: usize) -> (usize, usize) {
        (index / self.components, index % self.components)
    }

    /// `perm[c] = l` where `c` is a component-major index and `l` its λ-major index.
    pub fn component_major_permutation(&self) -> Vec<usize> {
        let mut perm = Vec::with_capacity(self.len());
        for u in 0..self.components {
            for j in 0..self.points {
                perm.push(self.index(j, u));
            }
        }
        perm
    }

    /// Reorders a λ-major square matrix into component-major order.
    pub fn to_component_major(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let perm = self.component_major_permutation();
        DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(perm[r], perm[c])])
    }
}

/// Jittered prior covariance `K_φ` over the design together with its factorization.
#[derive(Debug, Clone)]
pub struct PriorCovariance {
    matrix: DMatrix<f64>,
    factor: SpdFactor,
    jitter: f64,
    layout: Layout,
}

impl PriorCovariance {
    /// The jittered matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn factor(&self) -> &SpdFactor {
        &self.factor
    }

    /// Relative jitter that was finally used (multiplies each σ²_u).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }
}

fn check_kernels(kernels: &[ComponentKernel]) -> Result<usize> {
    let first = kernels
        .first()
        .ok_or_else(|| Error::invalid("at least one component kernel is required"))?;
    if kernels.iter().any(|k| k.dim() != first.dim()) {
        return Err(Error::invalid("component kernels disagree on the λ dimension"));
    }
    Ok(first.dim())
}

/// `C(a, b)`: λ-major `pa×pb` cross-covariance with diagonal `p×p` blocks.
pub fn cross_cov(a: &DMatrix<f64>, b: &DMatrix<f64>, kernels: &[ComponentKernel]) -> Result<DMatrix<f64>> {
    let dim = check_kernels(kernels)?;
    check_points(a, dim, "prediction points")?;
    check_points(b, dim, "design points")?;
    let p = kernels.len();
    let la = Layout::new(p, a.nrows());
    let lb = Layout::new(p, b.nrows());
    let mut out = DMatrix::zeros(la.len(), lb.len());
    let pa: Vec<Vec<f64>> = (0..a.nrows()).map(|i| point(a, i)).collect();
    let pb: Vec<Vec<f64>> = (0..b.nrows()).map(|j| point(b, j)).collect();
    for (i, x) in pa.iter().enumerate() {
        for (j, y) in pb.iter().enumerate() {
            for (u, k) in kernels.iter().enumerate() {
                out[(la.index(i, u), lb.index(j, u))] = k.eval(x, y);
            }
        }
    }
    Ok(out)
}

/// Builds `K_φ` over `design` in λ-major order, adding the smallest diagonal
/// jitter (starting at 1e−8·σ²_u, ×10 up to 1e−4·σ²_u) that makes it factorizable.
pub fn build_prior_cov(design: &DMatrix<f64>, kernels: &[ComponentKernel]) -> Result<PriorCovariance> {
    if design.nrows() == 0 {
        return Err(Error::invalid("design must contain at least one point"));
    }
    let base = cross_cov(design, design, kernels)?;
    let layout = Layout::new(kernels.len(), design.nrows());
    let mut rel = JITTER_START;
    let mut last_err = None;
    while rel <= JITTER_MAX * (1.0 + 1e-12) {
        let mut matrix = base.clone();
        for j in 0..layout.points {
            for (u, k) in kernels.iter().enumerate() {
                let idx = layout.index(j, u);
                matrix[(idx, idx)] += rel * k.variance();
            }
        }
        match SpdFactor::new(matrix.clone(), "prior covariance") {
            Ok(factor) => return Ok(PriorCovariance { matrix, factor, jitter: rel, layout }),
            Err(e) => last_err = Some(e),
        }
        rel *= 10.0;
    }
    Err(Error::numeric(format!(
        "prior covariance over {} points not factorizable with jitter up to {JITTER_MAX:e}·σ²: {}",
        design.nrows(),
        last_err.map(|e| e.to_string()).unwrap_or_default()
    )))
}

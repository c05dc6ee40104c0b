//! λ designs: Latin hypercube samples and i.i.d. draws from a uniform box.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Seeded generator used everywhere randomness is needed. ChaCha8 output is
/// fixed across platforms, which keeps CSV artifacts reproducible.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for the `index`-th independent task derived from `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    base.wrapping_add(index)
}

/// Seed for stage `stage` of one run. Stages live in the upper 32 bits so
/// they never collide with [`derive_seed`] task offsets below 2³².
pub fn stage_seed(seed: u64, stage: u64) -> u64 {
    seed.wrapping_add(stage << 32)
}

/// π(λ|w) as a uniform distribution over an axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaDistribution {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl LambdaDistribution {
    pub fn uniform(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::invalid("uniform box needs matching, non-empty bounds"));
        }
        for (l, u) in lower.iter().zip(&upper) {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::invalid(format!("invalid uniform bounds [{l}, {u}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    /// One-dimensional `U[lower, upper]`.
    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        Self::uniform(vec![lower], vec![upper])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, d: usize) -> f64 {
        self.upper[d] - self.lower[d]
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (l, u))| *l <= *x && *x <= *u)
    }

    /// `k` equally spaced points covering a one-dimensional support, endpoints included.
    pub fn grid(&self, k: usize) -> Result<DMatrix<f64>> {
        if self.dim() != 1 {
            return Err(Error::invalid("regular grids are only defined for one-dimensional λ"));
        }
        if k == 0 {
            return Err(Error::invalid("grid size must be >= 1"));
        }
        let (l, w) = (self.lower[0], self.width(0));
        Ok(DMatrix::from_fn(k, 1, |i, _| {
            if k == 1 {
                l + 0.5 * w
            } else {
                l + w * i as f64 / (k - 1) as f64
            }
        }))
    }
}

/// The m-point design `D_m` and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSet {
    pub points: DMatrix<f64>,
    pub distribution: LambdaDistribution,
    pub seed: u64,
}

impl DesignSet {
    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }
}

/// Plain Latin hypercube of `m` points: one point per equal-width stratum in
/// every dimension, uniform inside the stratum, strata paired by random permutations.
pub fn lhs_uniform(m: usize, dist: &LambdaDistribution, seed: u64) -> Result<DesignSet> {
    if m < 1 {
        return Err(Error::invalid("LHS size must be >= 1"));
    }
    let mut rng = rng_from_seed(seed);
    let q = dist.dim();
    let mut points = DMatrix::zeros(m, q);
    let mut strata: Vec<usize> = (0..m).collect();
    for d in 0..q {
        strata.shuffle(&mut rng);
        let (l, w) = (dist.lower[d], dist.width(d));
        for (i, &s) in strata.iter().enumerate() {
            let u: f64 = rng.random();
            // min() guards the upper edge against roundoff
            points[(i, d)] = (l + w * (s as f64 + u) / m as f64).min(dist.upper[d]);
        }
    }
    Ok(DesignSet { points, distribution: dist.clone(), seed })
}

/// `count` i.i.d. uniform draws from the box, one per row.
pub fn sample_iid(dist: &LambdaDistribution, count: usize, seed: u64) -> Result<DMatrix<f64>> {
    if count < 1 {
        return Err(Error::invalid("sample size must be >= 1"));
    }
    let mut rng = rng_from_seed(seed);
    let q = dist.dim();
    let mut out = DMatrix::zeros(count, q);
    for i in 0..count {
        for d in 0..q {
            out[(i, d)] = rng.random_range(dist.lower[d]..dist.upper[d]);
        }
    }
    Ok(out)
}

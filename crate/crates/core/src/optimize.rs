//! Box-constrained Nelder–Mead. Candidates outside the box are projected
//! back onto it; non-finite objective values rank as +∞.

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop when `f_worst − f_best <= f_tol·(1 + |f_best|)` ...
    pub f_tol: f64,
    /// ... and every vertex is within `x_tol` (∞-norm) of the best one.
    pub x_tol: f64,
    /// Initial simplex edge as a fraction of each box width.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_evals: 800, f_tol: 1e-9, x_tol: 1e-6, initial_step: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, l), u) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*l, *u);
    }
}

fn clean(v: f64) -> f64 {
    if v.is_nan() { f64::INFINITY } else { v }
}

/// Affine combination `a + t·(b − a)`, projected onto the box.
fn along(a: &[f64], b: &[f64], t: f64, lower: &[f64], upper: &[f64]) -> Vec<f64> {
    let mut x: Vec<f64> = a.iter().zip(b).map(|(a, b)| a + t * (b - a)).collect();
    project(&mut x, lower, upper);
    x
}

/// Minimizes `f` over the box `[lower, upper]` starting from `x0`.
pub fn nelder_mead_bounded<F>(mut f: F, x0: &[f64], lower: &[f64], upper: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    assert!(dim >= 1 && lower.len() == dim && upper.len() == dim);
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        clean(f(x))
    };

    let mut start = x0.to_vec();
    project(&mut start, lower, upper);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let f0 = eval(&start, &mut evals);
    simplex.push((start.clone(), f0));
    for i in 0..dim {
        let mut x = start.clone();
        let step = opts.initial_step * (upper[i] - lower[i]);
        // step away from whichever bound is further
        x[i] += if upper[i] - x[i] >= x[i] - lower[i] { step } else { -step };
        project(&mut x, lower, upper);
        let fx = eval(&x, &mut evals);
        simplex.push((x, fx));
    }

    let mut converged = false;
    while evals < opts.max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        if best.is_finite() && worst.is_finite() {
            let spread = worst - best;
            let size = simplex[1..]
                .iter()
                .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0_f64, f64::max);
            if spread <= opts.f_tol * (1.0 + best.abs()) && size <= opts.x_tol {
                converged = true;
                break;
            }
        }

        let mut centroid = vec![0.0; dim];
        for (x, _) in &simplex[..dim] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / dim as f64;
            }
        }
        let (worst_x, worst_f) = simplex[dim].clone();

        let reflected = along(&centroid, &worst_x, -REFLECT, lower, upper);
        let fr = eval(&reflected, &mut evals);
        if fr < best {
            let expanded = along(&centroid, &reflected, EXPAND, lower, upper);
            let fe = eval(&expanded, &mut evals);
            simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
            continue;
        }
        let (contracted, fc, accept) = if fr < worst_f {
            let x = along(&centroid, &reflected, CONTRACT, lower, upper);
            let fx = eval(&x, &mut evals);
            let ok = fx <= fr;
            (x, fx, ok)
        } else {
            let x = along(&centroid, &worst_x, CONTRACT, lower, upper);
            let fx = eval(&x, &mut evals);
            let ok = fx < worst_f;
            (x, fx, ok)
        };
        if accept {
            simplex[dim] = (contracted, fc);
            continue;
        }
        let anchor = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x = along(&anchor, &vertex.0, SHRINK, lower, upper);
            let fx = eval(&x, &mut evals);
            *vertex = (x, fx);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum { x, value, evals, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_minimum() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 0.5).powi(2);
        let m = nelder_mead_bounded(f, &[3.0, 3.0], &[-5.0, -5.0], &[5.0, 5.0], &NelderMeadOptions::default());
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] + 0.5).abs() < 1e-4, "{:?}", m.x);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let opts = NelderMeadOptions { max_evals: 5000, ..Default::default() };
        let m = nelder_mead_bounded(f, &[-1.2, 1.0], &[-3.0, -3.0], &[3.0, 3.0], &opts);
        assert!((m.x[0] - 1.0).abs() < 1e-3 && (m.x[1] - 1.0).abs() < 1e-3, "{:?}", m.x);
    }

    #[test]
    fn respects_bounds() {
        let f = |x: &[f64]| x[0] + x[1];
        let m = nelder_mead_bounded(f, &[0.5, 0.5], &[0.0, 0.0], &[1.0, 1.0], &NelderMeadOptions::default());
        assert!(m.x.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(m.value < 1e-6);
    }

    #[test]
    fn tolerates_infinite_regions() {
        let f = |x: &[f64]| if x[0] > 2.0 { f64::NAN } else { (x[0] - 1.0).powi(2) + x[1].powi(2) };
        let m = nelder_mead_bounded(f, &[0.0, 1.0], &[-4.0, -4.0], &[4.0, 4.0], &NelderMeadOptions::default());
        assert!((m.x[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn never_worse_than_start() {
        let f = |x: &[f64]| (x[0] * 3.0).sin() + x[1].cos() * x[0];
        let x0 = [0.3, -0.7];
        let m = nelder_mead_bounded(f, &x0, &[-2.0, -2.0], &[2.0, 2.0], &NelderMeadOptions::default());
        assert!(m.value <= f(&x0));
    }
}

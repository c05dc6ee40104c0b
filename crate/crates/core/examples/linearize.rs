//! Fits the per-cell linear coefficients from simulations of example 2 and
//! compares them with the exact slopes.

use gplincc::benchmarks::{Benchmark, Example};
use gplincc::design::lhs_uniform;
use gplincc::linearization::fit_linear_coefficients;

fn main() -> gplincc::Result<()> {
    let bench = Benchmark::new(Example::Two, 9, 0.5)?;
    let design = lhs_uniform(4, &bench.distribution(), 3)?.points;

    let bundle = bench.simulate(&design, 5, 11)?;
    println!("{} simulation records", bundle.len());

    let lin = fit_linear_coefficients(&bundle, false)?;
    let exact = bench.exact_linearization(&design)?;
    let err = lin.slopes.iter().zip(&exact.slopes).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
    println!("max slope error vs exact: {err:.2e}");
    println!("max residual variance per x: {:.2e}", lin.max_residual_variance().amax());
    Ok(())
}

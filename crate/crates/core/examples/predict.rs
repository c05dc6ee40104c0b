//! Predictive distribution of θ(λ) at new λ, with 95% bands, next to the
//! target computed from the exact model at each λ.

use gplincc::benchmarks::{BenchmarkSpec, Example};
use gplincc::diagnostics::CoefficientModel;
use gplincc::pipeline::{fit_and_condition, PipelineOptions};
use gplincc::design::lhs_uniform;
use gplincc::predictive::{predict, target_jeffreys};

fn main() -> gplincc::Result<()> {
    let spec = BenchmarkSpec::new(Example::One, 50, 10, 3);
    let data = gplincc::benchmarks::example1_generate(spec.n, spec.seed)?;
    let bench = &data.benchmark;
    let design = lhs_uniform(spec.m, &bench.distribution(), 5)?.points;
    let lin = bench.exact_linearization(&design)?;
    let (_, post) = fit_and_condition(&design, &lin, &data.obs, &PipelineOptions::default().optimizer)?;

    let lambdas = bench.distribution().grid(10)?;
    let pred = predict(&post, &lambdas)?;
    let target = target_jeffreys(&bench.slopes_at(&lambdas), &data.obs)?;
    println!("{:>6} {:>8} {:>8} {:>19} {:>8}", "lambda", "truth", "pred", "95% band", "target");
    for i in 0..lambdas.nrows() {
        let (lo, hi) = pred.interval(i, 0);
        println!("{:6.2} {:8.4} {:8.4} [{lo:8.4}, {hi:8.4}] {:8.4}", lambdas[(i, 0)], 5.0 / lambdas[(i, 0)], pred.mean[i], target.mean[i]);
    }
    Ok(())
}

//! Conditions the GP prior on the per-λ least-squares estimates of
//! example 1 with hand-picked hyperparameters.

use gplincc::benchmarks::example1_generate;
use gplincc::design::lhs_uniform;
use gplincc::hyper::{ComponentParams, HyperParams};
use gplincc::linearization::assemble_calibration_matrices;
use gplincc::posterior::{build_prior, posterior_theta};

fn main() -> gplincc::Result<()> {
    let data = example1_generate(50, 1)?;
    let design = lhs_uniform(6, &data.benchmark.distribution(), 2)?.points;
    let lin = data.benchmark.exact_linearization(&design)?;
    let cal = assemble_calibration_matrices(&lin, &data.obs)?;

    let params = HyperParams::new(vec![ComponentParams { beta: 3.0, variance: 9.0, lengthscales: vec![3.0] }])?;
    let post = posterior_theta(&cal.gls, build_prior(&design, &params)?)?;

    println!("{:>8} {:>10} {:>10} {:>10} {:>10}", "lambda", "theta", "gls", "post", "post sd");
    for j in 0..design.nrows() {
        let l = design[(j, 0)];
        println!(
            "{l:8.3} {:10.4} {:10.4} {:10.4} {:10.4}",
            5.0 / l,
            cal.gls.estimates[j][0],
            post.dist.mean[j],
            post.dist.variance(j, 0).sqrt()
        );
    }
    Ok(())
}

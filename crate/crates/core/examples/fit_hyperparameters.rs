//! Maximum marginal likelihood for (β, σ², ψ) with a multistart
//! Nelder-Mead search. Prints every start so the spread is visible.

use gplincc::benchmarks::example1_generate;
use gplincc::design::lhs_uniform;
use gplincc::hyper::{fit_hyperparameters, OptimizerConfig};
use gplincc::linearization::assemble_calibration_matrices;

fn main() -> gplincc::Result<()> {
    let data = example1_generate(50, 1)?;
    let design = lhs_uniform(10, &data.benchmark.distribution(), 1)?.points;
    let lin = data.benchmark.exact_linearization(&design)?;
    let cal = assemble_calibration_matrices(&lin, &data.obs)?;

    let fit = fit_hyperparameters(&design, &cal.gls, &OptimizerConfig { seed: 1, ..OptimizerConfig::default() })?;
    for s in &fit.starts {
        println!("start {:2}: nll {:10.4} -> {:10.4} in {:3} evals{}", s.start, s.initial_nll, s.nll, s.evals, if s.converged { "" } else { " (budget)" });
    }
    let c = fit.params.component(0);
    println!("best start {}: beta {:.3}, sigma2 {:.3}, psi {:.3}, nll {:.4}", fit.best_start, c.beta, c.variance, c.lengthscales[0], fit.nll);
    Ok(())
}

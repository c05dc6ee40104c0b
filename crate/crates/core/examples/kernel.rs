//! Matérn 5/2 kernel values and a prior covariance over a small design.
//!
//! ```text
//! cargo run --example kernel
//! ```

use gplincc::kernel::{build_prior_cov, matern52, ComponentKernel};
use nalgebra::DMatrix;

fn main() -> gplincc::Result<()> {
    for d in [0.0, 0.5, 1.0, 2.0] {
        println!("k({d}) = {:.7}", matern52(d, 1.0, 1.0)?);
    }

    // two components, three design points in one dimension
    let design = DMatrix::from_column_slice(3, 1, &[0.1, 0.4, 0.9]);
    let kernels = [ComponentKernel::new(2.0, vec![0.3])?, ComponentKernel::new(0.5, vec![1.0])?];
    let prior = build_prior_cov(&design, &kernels)?;
    println!("jitter {:.1e}", prior.jitter());
    println!("K (index j*p + u) ={:.4}", prior.matrix());
    Ok(())
}

//! Latin hypercube design and an evaluation grid over a box.

use gplincc::design::{lhs_uniform, sample_iid, LambdaDistribution};

fn main() -> gplincc::Result<()> {
    let dist = LambdaDistribution::uniform(vec![0.0, 1.0], vec![1.0, 10.0])?;
    let design = lhs_uniform(8, &dist, 7)?;
    println!("LHS, one point per stratum in each coordinate:{:.4}", design.points);

    // same seed, same design
    assert_eq!(lhs_uniform(8, &dist, 7)?.points, design.points);

    let grid = LambdaDistribution::interval(1.0, 10.0)?.grid(5)?;
    println!("grid: {:?}", grid.as_slice());
    println!("iid draws:{:.4}", sample_iid(&dist, 3, 7)?);
    Ok(())
}

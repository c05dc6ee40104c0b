//! A small replication study on example 2, summarized by median MSE.

use gplincc::benchmarks::Example;
use gplincc::pipeline::{median, replicate_study, PipelineOptions, ReplicationPlan};

fn main() -> gplincc::Result<()> {
    let plan = ReplicationPlan { n_values: vec![50], m_values: vec![10, 20], reps: 5, ..ReplicationPlan::new(Example::Two, 1) };
    let rows = replicate_study(&plan, &PipelineOptions::default())?;
    for m in &plan.m_values {
        for est in ["pred", "target", "targetGP"] {
            let med: Vec<String> = (1..=2)
                .map(|u| {
                    let v: Vec<f64> = rows.iter().filter(|r| r.m == *m && r.estimator == est && r.component == u).map(|r| r.mse).collect();
                    format!("{:.2e}", median(&v).unwrap_or(f64::NAN))
                })
                .collect();
            println!("m={m:2} {est:9} median mse {}", med.join(" "));
        }
    }
    Ok(())
}

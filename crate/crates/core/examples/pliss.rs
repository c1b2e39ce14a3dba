//! Reduction principle check for the origin of B2: attraction in the full
//! space versus attraction under the reduced flow on the chart.

use nalgebra::DVector;
use skewflow::base_flow::BasePoint;
use skewflow::benchmarks;
use skewflow::reduction::{build_manifold, pliss_check, BlockedSystem, PlissOptions, ReductionConfig};
use skewflow::spectrum::{averaged_split, LinearFamily, SplitOptions};

fn main() -> skewflow::Result<()> {
    let sys = benchmarks::b2();
    let eps = 0.05;
    let split = averaged_split(&LinearFamily::from_system(&sys), eps, &SplitOptions::default())?;
    let m = build_manifold(&sys, &split, &BasePoint::origin(2), eps, 50.0, &ReductionConfig::default())?;
    let blocked = BlockedSystem::new(&m.frame, &sys)?;
    let opts = PlissOptions {
        sample_count: 20,
        ..Default::default()
    };
    let r = pliss_check(&blocked, &m.chart, &m.constants, &[DVector::zeros(1)], &opts)?;
    println!("reduced-flow precondition met: {}", r.precondition_met);
    println!("distance to the attractor at the horizon {:.3e}", r.final_attractor_distance);
    println!("distance to the graph at the horizon {:.3e}", r.final_graph_distance);
    println!("containment {:.2e}", r.containment);
    println!("verdict {:?}", r.verdict);
    for n in &r.notes {
        println!("  {n}");
    }
    Ok(())
}

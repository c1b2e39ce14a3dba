//! Center-manifold chart `v = h(s, u)` of B2 by the graph transform, checked
//! against the leading term `u²/N(s)²`.

use skewflow::base_flow::BasePoint;
use skewflow::benchmarks;
use skewflow::reduction::{build_manifold, check_partial_s_h, invariance_defect, BlockedSystem, ReductionConfig};
use skewflow::spectrum::{averaged_split, LinearFamily, SplitOptions};
use nalgebra::DVector;

fn main() -> skewflow::Result<()> {
    let sys = benchmarks::b2();
    let eps = 0.05;
    let split = averaged_split(&LinearFamily::from_system(&sys), eps, &SplitOptions::default())?;
    let cfg = ReductionConfig::default();
    let m = build_manifold(&sys, &split, &BasePoint::origin(2), eps, 50.0, &cfg)?;
    let c = &m.chart;
    println!("constants {:?}", m.constants);
    println!("admissible: {}", m.constants.admissible());
    println!("graph transform: {} iterations, last change {:.1e}", c.iterations, c.last_change);
    println!("h(s, 0) = {:.1e}, slope at 0 = {:.1e}", c.origin_value(), c.origin_slope());

    let blocked = BlockedSystem::new(&m.frame, &sys)?;
    let r = check_partial_s_h(c, &blocked);
    let r2 = check_partial_s_h(&c.coarsen(2), &blocked);
    println!("PDE residual {r:.2e}, coarse/fine ratio {:.2}", r2 / r);
    println!("invariance defect {:.2e}", invariance_defect(c, &blocked, 2));

    let nu = 1.0 / eps;
    let u = 0.5 * c.big_delta;
    for s in [0.0, 5.0, 10.0, 20.0] {
        let phi = BasePoint::origin(2).angles()[0] + s * eps;
        let x2 = (phi.cos() + nu * phi.sin()) / (1.0 + nu * nu);
        let leading = u * u / (1.0 + x2 * x2);
        let h = c.eval(s, &DVector::from_element(1, u))[0];
        println!("s = {s:>4}: h = {h:.4e}, u²/N² = {leading:.4e}");
    }
    Ok(())
}

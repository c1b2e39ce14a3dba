//! The skew-product flow of the cubic benchmark: slow versus fast time and
//! the cocycle law.

use nalgebra::DVector;
use skewflow::base_flow::BasePoint;
use skewflow::benchmarks;
use skewflow::cocycle::{FlowConfig, FlowPoint, SkewProductFlow, TimeForm};

fn main() -> skewflow::Result<()> {
    let flow = SkewProductFlow::new(benchmarks::b2(), FlowConfig::default())?;
    let z = FlowPoint::new(BasePoint::new(vec![0.0, 1.0]), DVector::from_vec(vec![0.2, -0.1]));

    let eps = 0.1;
    let slow = flow.evolve(&z, 1.0, TimeForm::Slow)?;
    let fast = flow.fast_evolve(&z, 1.0 / eps, eps)?;
    println!("slow time 1:     x = [{:.6}, {:.6}]", slow.x[0], slow.x[1]);
    println!("fast time 1/eps: x = [{:.6}, {:.6}] at eps = {eps}", fast.x[0], fast.x[1]);

    for (s, t) in [(1.0, 2.0), (3.0, -1.5), (-0.5, 0.25)] {
        println!("cocycle defect s = {s:>5}, t = {t:>5}: {:.2e}", flow.cocycle_defect(&z, s, t, TimeForm::Slow)?);
    }

    // far from the origin the cubic term blows up in backward time
    let far = FlowPoint::new(BasePoint::new(vec![0.0, 0.0]), DVector::from_vec(vec![3.0, 0.0]));
    match flow.evolve(&far, -5.0, TimeForm::Slow) {
        Ok(w) => println!("backward orbit exists: |x| = {:.3}", w.x.norm()),
        Err(e) => println!("backward orbit: {e}"),
    }
    Ok(())
}

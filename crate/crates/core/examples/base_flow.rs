//! Quasi-periodic rotation on the 2-torus: group law, resonance check and
//! time averages along an orbit.

use nalgebra::DVector;
use skewflow::base_flow::{base_metric, ergodic_average, smooth_ergodic_average, BaseFlow};

fn main() -> skewflow::Result<()> {
    let base = BaseFlow::new(vec![1.0, 2f64.sqrt()])?;
    let p = base.point(vec![0.3, 5.0])?;

    let q = base.advance(&base.advance(&p, 2.5)?, -7.0)?;
    let r = base.advance(&p, -4.5)?;
    println!("group law defect {:.2e}", base_metric(&q, &r)?);

    match BaseFlow::new(vec![1.0, 2.0]) {
        Ok(_) => println!("(1, 2) accepted"),
        Err(e) => println!("(1, 2) rejected: {e}"),
    }

    // the torus mean of cos²θ₁ is 1/2
    let g = |p: &skewflow::base_flow::BasePoint| DVector::from_element(1, p.angles()[0].cos().powi(2));
    for horizon in [50.0, 200.0, 800.0] {
        let plain = ergodic_average(&base, g, &p, horizon, 0.01)?[0];
        let smooth = smooth_ergodic_average(&base, g, &p, horizon, 0.01)?[0];
        println!("T = {horizon:>5}: trapezoid error {:.2e}, windowed error {:.2e}", (plain - 0.5).abs(), (smooth - 0.5).abs());
    }
    Ok(())
}

//! An orbit started off the manifold converges to an orbit on it at the
//! stable rate.

use nalgebra::DVector;
use skewflow::base_flow::BasePoint;
use skewflow::benchmarks;
use skewflow::reduction::{asymptotic_phase, build_manifold, BlockedSystem, ReductionConfig};
use skewflow::spectrum::{averaged_split, LinearFamily, SplitOptions};

fn main() -> skewflow::Result<()> {
    let sys = benchmarks::b2();
    let eps = 0.05;
    let split = averaged_split(&LinearFamily::from_system(&sys), eps, &SplitOptions::default())?;
    let m = build_manifold(&sys, &split, &BasePoint::origin(2), eps, 50.0, &ReductionConfig::default())?;
    let c = &m.chart;
    let blocked = BlockedSystem::new(&m.frame, &sys)?;

    let u0 = DVector::from_element(1, 0.4 * c.big_delta);
    let v0 = c.eval_row(0, &u0) + DVector::from_element(1, 0.3 * c.big_delta);
    let tr = asymptotic_phase(&blocked, c, &m.constants, &u0, &v0, 10.0)?;
    for (k, (t, d)) in tr.times.iter().zip(&tr.deviations).enumerate() {
        if k % (tr.times.len() / 10).max(1) == 0 {
            println!("s = {t:>6.2}: deviation {d:.3e}, bound {:.3e}", tr.bounds[k]);
        }
    }
    println!("fitted slope {:.4} (stable rate -1), prefactor {:.3e} <= {:.3e}", tr.slope, tr.prefactor, tr.bound_prefactor);
    println!("phase stability {:.1e}", tr.phase_stability);
    Ok(())
}

//! Block-diagonalizing frame along one base trajectory of B2.

use skewflow::base_flow::BasePoint;
use skewflow::benchmarks;
use skewflow::reduction::{build_frame, ReductionConfig};
use skewflow::spectrum::{averaged_split, LinearFamily, SplitOptions};

fn main() -> skewflow::Result<()> {
    let sys = benchmarks::b2();
    let family = LinearFamily::from_system(&sys);
    let cfg = ReductionConfig::default();
    let eps = 0.05;
    let split = averaged_split(&family, eps, &SplitOptions::default())?;
    let frame = build_frame(&family, &BasePoint::origin(2), eps, 40.0, &split, &cfg)?;
    println!("{} nodes, step {:.2e}, center dimension {}", frame.len(), frame.step, frame.e);
    println!("theta {:.6}, K {:.3}", frame.theta_bound, frame.k_bound);
    println!("off-diagonal defect {:.2e}", frame.offdiag_defect);
    println!("min subspace angle {:.2} deg", frame.min_angle.to_degrees());
    println!("fitted rates: center {:.2e}, stable {:.6}", frame.alpha_fit, frame.beta_fit);

    // σ against the exact frame [[1/N, 0], [x₂*/N, 1]]
    let nu = 1.0 / eps;
    let mut worst: f64 = 0.0;
    for i in (0..frame.len()).step_by(997) {
        let phi = frame.points[i].angles()[0];
        let x2 = (phi.cos() + nu * phi.sin()) / (1.0 + nu * nu);
        let n = (1.0 + x2 * x2).sqrt();
        let s = &frame.sigma[i];
        worst = worst.max((s[(0, 0)] - 1.0 / n).abs()).max((s[(1, 0)] - x2 / n).abs());
    }
    println!("center column vs closed form: {worst:.2e}");
    Ok(())
}

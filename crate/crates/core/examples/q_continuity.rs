//! Dichotomy projections of B1 approach the averaged projection `Q₀` as
//! `ε → 0`; the closed form of the deviation is `ε/√(1+ε²)`.

use skewflow::benchmarks;
use skewflow::spectrum::{averaged_split, q_continuity_scan, sample_points, LinearFamily, SpectrumConfig, SplitOptions};

fn main() -> skewflow::Result<()> {
    let family = LinearFamily::from_system(&benchmarks::b1());
    let split = averaged_split(&family, 0.025, &SplitOptions::default())?;
    println!("Q0 =\n{:.6}", split.q0);
    let points = sample_points(family.base(), 8);
    let eps = [0.2, 0.1, 0.05, 0.025];
    let table = q_continuity_scan(&family, &eps, &points, -0.375, 40.0, &split.q0, &SpectrumConfig::default())?;
    for (e, d) in &table.rows {
        println!("eps = {e:<6} sup |Q - Q0| = {d:.6}   closed form {:.6}", e / (1.0 + e * e).sqrt());
    }
    Ok(())
}

//! Dynamical spectrum of the linear parts, from exponential-dichotomy probes.

use skewflow::benchmarks;
use skewflow::spectrum::{dynamical_spectrum, LinearFamily, SpectrumConfig};

fn main() -> skewflow::Result<()> {
    let cfg = SpectrumConfig::default();
    for (name, sys) in [("diag(0, -1)", benchmarks::constant_diag01()), ("B1", benchmarks::b1())] {
        let family = LinearFamily::from_system(&sys);
        for eps in [0.1, 0.05] {
            let est = dynamical_spectrum(&family, eps, None, &cfg)?;
            let ivs: Vec<String> = est.intervals.iter().map(|(a, b)| format!("[{a:.3}, {b:.3}]")).collect();
            println!("{name:>11} eps = {eps}: {} (resolution {:.1e})", ivs.join(" "), est.resolution);
            if let Some((center, stable)) = est.split(0.25, 0.5) {
                println!("{:>11} center {} interval(s), stable {}", "", center.len(), stable.len());
            }
        }
    }
    Ok(())
}

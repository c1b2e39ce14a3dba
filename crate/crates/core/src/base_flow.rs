//! Torus rotation flows: the compact, minimal, uniquely ergodic base.
//!
//! A base point is an m-tuple of angles in `[0, 2π)` and the flow is the
//! linear rotation `θ ↦ θ + tω (mod 2π)`. Rational independence of `ω` is
//! checked for integer combinations up to a configurable bound, which at desk
//! scale stands in for minimality and unique ergodicity.

use nalgebra::DVector;

use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Default bound on `Σ|kᵢ|` for the resonance check.
pub const DEFAULT_RESONANCE_BOUND: u32 = 50;

/// Default quadrature step for ergodic averages.
pub const DEFAULT_AVERAGE_STEP: f64 = 1e-2;

/// Reduces an angle to `[0, 2π)`.
#[inline]
pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TWO_PI);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if r >= TWO_PI {
        0.0
    } else {
        r
    }
}

/// Signed shortest angular difference in `(-π, π]`.
#[inline]
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TWO_PI);
    if d > std::f64::consts::PI {
        d - TWO_PI
    } else {
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasePoint {
    angles: Vec<f64>,
}

impl BasePoint {
    pub fn new(angles: impl Into<Vec<f64>>) -> Self {
        let angles = angles.into().into_iter().map(wrap_angle).collect();
        Self { angles }
    }

    pub fn origin(dim: usize) -> Self {
        Self {
            angles: vec![0.0; dim],
        }
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn dim(&self) -> usize {
        self.angles.len()
    }
}

/// Linear rotation flow on the m-torus.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseFlow {
    frequencies: Vec<f64>,
    resonance_bound: u32,
}

impl BaseFlow {
    pub fn new(frequencies: impl Into<Vec<f64>>) -> Result<Self> {
        Self::with_resonance_bound(frequencies, DEFAULT_RESONANCE_BOUND)
    }

    /// Builds a flow, rejecting any integer relation `Σ kᵢωᵢ = 0` with
    /// `0 < Σ|kᵢ| ≤ bound`.
    pub fn with_resonance_bound(frequencies: impl Into<Vec<f64>>, bound: u32) -> Result<Self> {
        let frequencies = frequencies.into();
        if frequencies.is_empty() {
            return Err(Error::Config("torus dimension must be at least 1".into()));
        }
        if frequencies.iter().any(|w| !w.is_finite()) {
            return Err(Error::Config("frequencies must be finite".into()));
        }
        if let Some(k) = find_resonance(&frequencies, bound) {
            return Err(Error::Config(format!(
                "frequencies {frequencies:?} are resonant: integer relation {k:?}"
            )));
        }
        Ok(Self {
            frequencies,
            resonance_bound: bound,
        })
    }

    pub fn dim(&self) -> usize {
        self.frequencies.len()
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn resonance_bound(&self) -> u32 {
        self.resonance_bound
    }

    pub fn point(&self, angles: impl Into<Vec<f64>>) -> Result<BasePoint> {
        let p = BasePoint::new(angles);
        self.check_dim(&p)?;
        Ok(p)
    }

    pub fn check_dim(&self, p: &BasePoint) -> Result<()> {
        if p.dim() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: p.dim(),
            });
        }
        Ok(())
    }

    /// `τ_t(p) = p + tω (mod 2π)`.
    pub fn advance(&self, p: &BasePoint, t: f64) -> Result<BasePoint> {
        self.check_dim(p)?;
        Ok(self.advance_unchecked(p, t))
    }

    pub(crate) fn advance_unchecked(&self, p: &BasePoint, t: f64) -> BasePoint {
        BasePoint {
            angles: p
                .angles
                .iter()
                .zip(&self.frequencies)
                .map(|(a, w)| wrap_angle(a + t * w))
                .collect(),
        }
    }
}

/// Searches integer vectors with `0 < Σ|kᵢ| ≤ bound` for a relation
/// `|Σ kᵢωᵢ| ≤ tol`. Only vectors whose first nonzero entry is positive are
/// visited.
fn find_resonance(freqs: &[f64], bound: u32) -> Option<Vec<i64>> {
    let scale = freqs.iter().fold(0.0_f64, |m, w| m.max(w.abs()));
    if scale == 0.0 {
        return Some(vec![1; freqs.len()]);
    }
    let tol = 1e-9 * scale * f64::from(bound.max(1));
    let m = freqs.len();
    let mut k = vec![0i64; m];
    fn rec(
        idx: usize,
        budget: i64,
        k: &mut Vec<i64>,
        freqs: &[f64],
        tol: f64,
        leading_fixed: bool,
    ) -> Option<Vec<i64>> {
        if idx == k.len() {
            if k.iter().all(|&v| v == 0) {
                return None;
            }
            let s: f64 = k.iter().zip(freqs).map(|(&ki, w)| ki as f64 * w).sum();
            return (s.abs() <= tol).then(|| k.clone());
        }
        let lo = if leading_fixed { -budget } else { 0 };
        for v in lo..=budget {
            k[idx] = v;
            let fixed = leading_fixed || v != 0;
            if let Some(found) = rec(idx + 1, budget - v.abs(), k, freqs, tol, fixed) {
                return Some(found);
            }
        }
        k[idx] = 0;
        None
    }
    rec(0, i64::from(bound), &mut k, freqs, tol, false)
}

/// Torus metric: sum over coordinates of the circular distance.
pub fn base_metric(p1: &BasePoint, p2: &BasePoint) -> Result<f64> {
    if p1.dim() != p2.dim() {
        return Err(Error::Dimension {
            expected: p1.dim(),
            got: p2.dim(),
        });
    }
    Ok(base_metric_unchecked(p1, p2))
}

pub(crate) fn base_metric_unchecked(p1: &BasePoint, p2: &BasePoint) -> f64 {
    p1.angles
        .iter()
        .zip(&p2.angles)
        .map(|(a, b)| angle_diff(*a, *b).abs())
        .sum()
}

/// Time average `(1/T)∫₀ᵀ g(τ_s(p)) ds` by the composite trapezoid rule.
///
/// The number of panels is `ceil(T / step)`, so the effective step never
/// exceeds `step`.
pub fn ergodic_average<G>(
    flow: &BaseFlow,
    g: G,
    p: &BasePoint,
    horizon: f64,
    step: f64,
) -> Result<DVector<f64>>
where
    G: Fn(&BasePoint) -> DVector<f64>,
{
    flow.check_dim(p)?;
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Domain(format!("step must be positive, got {step}")));
    }
    let panels = (horizon / step).ceil().max(1.0) as usize;
    let h = horizon / panels as f64;
    let eval = |i: usize| -> Result<DVector<f64>> {
        let v = g(&flow.advance_unchecked(p, i as f64 * h));
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::Evaluation(format!(
                "observable is not finite at s = {}",
                i as f64 * h
            )));
        }
        Ok(v)
    };
    let mut acc = eval(0)? * 0.5;
    for i in 1..panels {
        acc += eval(i)?;
    }
    acc += eval(panels)? * 0.5;
    Ok(acc * (h / horizon))
}

/// Windowed time average `∫₀ᵀ w(s/T) g(τ_s(p)) ds / ∫₀ᵀ w(s/T) ds` with the
/// bump `w(x) = exp(−1/(x(1−x)))`.
///
/// Same limit as [`ergodic_average`] for uniquely ergodic flows, but the
/// error on quasi-periodic observables decays faster than any power of `T`.
pub fn smooth_ergodic_average<G>(
    flow: &BaseFlow,
    g: G,
    p: &BasePoint,
    horizon: f64,
    step: f64,
) -> Result<DVector<f64>>
where
    G: Fn(&BasePoint) -> DVector<f64>,
{
    flow.check_dim(p)?;
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Domain(format!("step must be positive, got {step}")));
    }
    let panels = (horizon / step).ceil().max(2.0) as usize;
    let h = horizon / panels as f64;
    let mut acc: Option<DVector<f64>> = None;
    let mut mass = 0.0;
    // the weight vanishes to all orders at both ends
    for i in 1..panels {
        let x = i as f64 / panels as f64;
        let w = (-1.0 / (x * (1.0 - x))).exp();
        let v = g(&flow.advance_unchecked(p, i as f64 * h));
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::Evaluation(format!("observable is not finite at s = {}", i as f64 * h)));
        }
        mass += w;
        match acc.as_mut() {
            Some(a) => a.axpy(w, &v, 1.0),
            None => acc = Some(v * w),
        }
    }
    Ok(acc.expect("at least one interior node") / mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, SQRT_2};

    fn flow2() -> BaseFlow {
        BaseFlow::new(vec![1.0, SQRT_2]).unwrap()
    }

    #[test]
    fn advance_identity_and_definition() {
        let f = flow2();
        let p = BasePoint::new(vec![0.0, 0.0]);
        assert_eq!(f.advance(&p, 0.0).unwrap(), p);
        let q = f.advance(&p, 1.0).unwrap();
        assert!((q.angles()[0] - 1.0).abs() < 1e-15);
        assert!((q.angles()[1] - SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn advance_group_law_and_isometry() {
        let f = flow2();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let p = BasePoint::new(vec![rng.gen_range(0.0..TWO_PI), rng.gen_range(0.0..TWO_PI)]);
            let q = BasePoint::new(vec![rng.gen_range(0.0..TWO_PI), rng.gen_range(0.0..TWO_PI)]);
            let s = rng.gen_range(-50.0..50.0);
            let t = rng.gen_range(-50.0..50.0);
            let lhs = f.advance(&f.advance(&p, s).unwrap(), t).unwrap();
            let rhs = f.advance(&p, s + t).unwrap();
            worst = worst.max(base_metric(&lhs, &rhs).unwrap());
            let d0 = base_metric(&p, &q).unwrap();
            let d1 = base_metric(&f.advance(&p, t).unwrap(), &f.advance(&q, t).unwrap()).unwrap();
            assert!((d0 - d1).abs() < 1e-12);
        }
        assert!(worst <= 1e-12, "group-law defect {worst}");
    }

    #[test]
    fn metric_examples() {
        let p = BasePoint::new(vec![0.3]);
        assert_eq!(base_metric(&p, &p).unwrap(), 0.0);
        let a = BasePoint::new(vec![0.0]);
        let b = BasePoint::new(vec![PI]);
        assert!((base_metric(&a, &b).unwrap() - PI).abs() < 1e-15);
        assert!(matches!(
            base_metric(&a, &BasePoint::new(vec![0.0, 0.0])),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn metric_triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pt = |rng: &mut ChaCha8Rng| {
            BasePoint::new((0..3).map(|_| rng.gen_range(-10.0..10.0)).collect::<Vec<_>>())
        };
        for _ in 0..1000 {
            let (a, b, c) = (pt(&mut rng), pt(&mut rng), pt(&mut rng));
            let ab = base_metric(&a, &b).unwrap();
            let bc = base_metric(&b, &c).unwrap();
            let ac = base_metric(&a, &c).unwrap();
            assert!(ac <= ab + bc + 1e-12);
            assert!((ab - base_metric(&b, &a).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn resonant_frequencies_rejected() {
        assert!(BaseFlow::new(vec![1.0, 2.0]).is_err());
        assert!(BaseFlow::new(vec![1.0, 0.5, SQRT_2]).is_err());
        assert!(BaseFlow::new(vec![0.0]).is_err());
        assert!(BaseFlow::new(vec![SQRT_2]).is_ok());
        assert!(BaseFlow::new(vec![1.0, SQRT_2]).is_ok());
        // 3/7 is rational but only detected once the bound reaches 10
        assert!(BaseFlow::with_resonance_bound(vec![3.0, 7.0], 9).is_ok());
        assert!(BaseFlow::with_resonance_bound(vec![3.0, 7.0], 10).is_err());
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let f = flow2();
        assert!(matches!(
            f.advance(&BasePoint::new(vec![0.0]), 1.0),
            Err(Error::Dimension { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn ergodic_average_of_constant_is_exact() {
        let f = flow2();
        let p = BasePoint::new(vec![0.2, 1.1]);
        let avg = ergodic_average(&f, |_| DVector::from_vec(vec![3.25, -1.0]), &p, 17.3, 0.01).unwrap();
        assert_eq!(avg[0], 3.25);
        assert_eq!(avg[1], -1.0);
    }

    #[test]
    fn ergodic_average_of_cosine() {
        // Oracle: (1/T)∫₀ᵀ cos(θ₀ + ωs) ds = (sin(θ₀+ωT) - sin θ₀)/(ωT).
        let f = BaseFlow::new(vec![SQRT_2]).unwrap();
        let theta0: f64 = 0.7;
        let t = 1e4;
        let exact = ((theta0 + SQRT_2 * t).sin() - theta0.sin()) / (SQRT_2 * t);
        let p = BasePoint::new(vec![theta0]);
        let avg = ergodic_average(&f, |q| DVector::from_element(1, q.angles()[0].cos()), &p, t, 1e-2)
            .unwrap();
        assert!(avg[0].abs() <= 5e-3);
        assert!((avg[0] - exact).abs() < 1e-8);
    }

    #[test]
    fn ergodic_average_independent_of_start() {
        let f = flow2();
        let g = |q: &BasePoint| {
            let a = q.angles();
            DVector::from_element(1, (a[0] + 2.0 * a[1]).cos() + a[1].sin())
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = BasePoint::new(vec![rng.gen_range(0.0..TWO_PI), rng.gen_range(0.0..TWO_PI)]);
        let q = BasePoint::new(vec![rng.gen_range(0.0..TWO_PI), rng.gen_range(0.0..TWO_PI)]);
        let a = ergodic_average(&f, g, &p, 1e4, 1e-2).unwrap();
        let b = ergodic_average(&f, g, &q, 1e4, 1e-2).unwrap();
        assert!((a[0] - b[0]).abs() <= 1e-2);
        assert!(a[0].abs() <= 5e-3);
    }

    #[test]
    fn ergodic_average_rejects_bad_input() {
        let f = flow2();
        let p = BasePoint::origin(2);
        assert!(ergodic_average(&f, |_| DVector::zeros(1), &p, 0.0, 0.1).is_err());
        assert!(ergodic_average(&f, |_| DVector::zeros(1), &p, 1.0, -0.1).is_err());
        assert!(matches!(
            ergodic_average(&f, |_| DVector::from_element(1, f64::NAN), &p, 1.0, 0.1),
            Err(Error::Evaluation(_))
        ));
    }

    #[test]
    fn smooth_average_is_spectrally_accurate() {
        let f = flow2();
        let p = BasePoint::new(vec![0.3, 1.1]);
        let g = |q: &BasePoint| DVector::from_vec(vec![q.angles()[0].cos(), 2.0 + (q.angles()[1]).sin() * q.angles()[0].cos()]);
        let avg = smooth_ergodic_average(&f, g, &p, 400.0, 1e-2).unwrap();
        assert!(avg[0].abs() < 1e-9 && (avg[1] - 2.0).abs() < 1e-7, "{avg}");
        assert!(smooth_ergodic_average(&f, g, &p, -1.0, 1e-2).is_err());
    }
}

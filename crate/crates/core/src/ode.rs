//! Explicit Runge–Kutta integrators on `DVector<f64>` states.
//!
//! Two schemes: classical fixed-step RK4 (used for convergence-order
//! studies) and the Dormand–Prince 5(4) embedded pair with step control.

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    /// Classical RK4; the step is `max_step`, shrunk so it divides the span.
    FixedRk4,
    /// Dormand–Prince 5(4) with local error control.
    DormandPrince,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub scheme: Scheme,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    /// Integration stops with `Outcome::Escaped` once `|y|` exceeds this.
    pub blowup_radius: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            scheme: Scheme::DormandPrince,
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_step: 0.1,
            min_step: 1e-13,
            blowup_radius: None,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Completed(DVector<f64>),
    Escaped { t: f64, state: DVector<f64> },
}

impl Outcome {
    pub fn completed(self) -> Result<DVector<f64>> {
        match self {
            Outcome::Completed(y) => Ok(y),
            Outcome::Escaped { t, .. } => Err(Error::Escape { t_exit: t }),
        }
    }
}

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b̂ (fifth minus fourth order weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y' = rhs(t, y)` from `t0` to `t1` (either direction).
pub fn integrate<F>(mut rhs: F, t0: f64, y0: &DVector<f64>, t1: f64, opts: &OdeOptions) -> Result<Outcome>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    if !t0.is_finite() || !t1.is_finite() {
        return Err(Error::Domain("integration bounds must be finite".into()));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("initial state must be finite".into()));
    }
    if t0 == t1 {
        return Ok(Outcome::Completed(y0.clone()));
    }
    match opts.scheme {
        Scheme::FixedRk4 => fixed_rk4(&mut rhs, t0, y0, t1, opts),
        Scheme::DormandPrince => dopri(&mut rhs, t0, y0, t1, opts),
    }
}

/// Integrates through a sorted list of output times (ascending or
/// descending), returning the state at each. The first node is the initial
/// time.
pub fn integrate_nodes<F>(mut rhs: F, nodes: &[f64], y0: &DVector<f64>, opts: &OdeOptions) -> Result<Vec<DVector<f64>>>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    let mut out = Vec::with_capacity(nodes.len());
    if nodes.is_empty() {
        return Ok(out);
    }
    let mut y = y0.clone();
    out.push(y.clone());
    for w in nodes.windows(2) {
        y = integrate(&mut rhs, w[0], &y, w[1], opts)?.completed()?;
        out.push(y.clone());
    }
    Ok(out)
}

/// One classical RK4 step.
pub fn rk4_step<F>(rhs: &mut F, t: f64, y: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    let k1 = rhs(t, y);
    let k2 = rhs(t + 0.5 * h, &(y + &k1 * (0.5 * h)));
    let k3 = rhs(t + 0.5 * h, &(y + &k2 * (0.5 * h)));
    let k4 = rhs(t + h, &(y + &k3 * h));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

fn escaped(y: &DVector<f64>, opts: &OdeOptions) -> bool {
    match opts.blowup_radius {
        Some(r) => !(y.norm() <= r),
        None => y.iter().any(|v| !v.is_finite()),
    }
}

fn fixed_rk4<F>(rhs: &mut F, t0: f64, y0: &DVector<f64>, t1: f64, opts: &OdeOptions) -> Result<Outcome>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    let span = t1 - t0;
    let n = (span.abs() / opts.max_step).ceil().max(1.0) as usize;
    let h = span / n as f64;
    let mut y = y0.clone();
    for i in 0..n {
        let t = t0 + i as f64 * h;
        y = rk4_step(rhs, t, &y, h);
        if escaped(&y, opts) {
            return Ok(Outcome::Escaped { t: t + h, state: y });
        }
    }
    Ok(Outcome::Completed(y))
}

fn dopri<F>(rhs: &mut F, t0: f64, y0: &DVector<f64>, t1: f64, opts: &OdeOptions) -> Result<Outcome>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut t = t0;
    let mut y = y0.clone();
    let mut k1 = rhs(t, &y);
    let scale = |y: &DVector<f64>, i: usize| opts.abs_tol + opts.rel_tol * y[i].abs();

    // initial step guess (Hairer–Wanner, simplified)
    let d0 = rms(&y, |i| scale(&y, i));
    let d1 = rms(&k1, |i| scale(&y, i));
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(opts.max_step).min(span).max(opts.min_step);

    let mut steps = 0usize;
    while (t1 - t) * dir > 0.0 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::Integration(format!("exceeded {} steps", opts.max_steps)));
        }
        let remaining = (t1 - t).abs();
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        let hs = h * dir;
        let k2 = rhs(t + C2 * hs, &(&y + &k1 * (A21 * hs)));
        let k3 = rhs(t + C3 * hs, &(&y + (&k1 * A31 + &k2 * A32) * hs));
        let k4 = rhs(t + C4 * hs, &(&y + (&k1 * A41 + &k2 * A42 + &k3 * A43) * hs));
        let k5 = rhs(
            t + C5 * hs,
            &(&y + (&k1 * A51 + &k2 * A52 + &k3 * A53 + &k4 * A54) * hs),
        );
        let k6 = rhs(
            t + hs,
            &(&y + (&k1 * A61 + &k2 * A62 + &k3 * A63 + &k4 * A64 + &k5 * A65) * hs),
        );
        let y_new = &y + (&k1 * B1 + &k3 * B3 + &k4 * B4 + &k5 * B5 + &k6 * B6) * hs;
        let k7 = rhs(t + hs, &y_new);
        let err_vec = (&k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * hs;
        let err = rms(&err_vec, |i| {
            opts.abs_tol + opts.rel_tol * y[i].abs().max(y_new[i].abs())
        });
        if !err.is_finite() {
            if h <= opts.min_step {
                return Ok(Outcome::Escaped { t, state: y });
            }
            h = (h * 0.1).max(opts.min_step);
            continue;
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + hs };
            y = y_new;
            k1 = k7;
            if escaped(&y, opts) {
                return Ok(Outcome::Escaped { t, state: y });
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * fac).min(opts.max_step);
        } else {
            if h <= opts.min_step {
                return Err(Error::Integration(format!("step size underflow at t = {t}")));
            }
            let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            h = (h * fac).max(opts.min_step);
        }
    }
    Ok(Outcome::Completed(y))
}

fn rms(v: &DVector<f64>, sc: impl Fn(usize) -> f64) -> f64 {
    let n = v.len().max(1) as f64;
    (v.iter().enumerate().map(|(i, x)| (x / sc(i)).powi(2)).sum::<f64>() / n).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(_t: f64, y: &DVector<f64>) -> DVector<f64> {
        -y
    }

    #[test]
    fn exponential_decay_adaptive() {
        let y0 = DVector::from_element(1, 1.0);
        let y = integrate(decay, 0.0, &y0, 1.0, &OdeOptions::default()).unwrap().completed().unwrap();
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-10);
        let back = integrate(decay, 1.0, &y, 0.0, &OdeOptions::default()).unwrap().completed().unwrap();
        assert!((back[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn harmonic_oscillator_long_run() {
        let rhs = |_t: f64, y: &DVector<f64>| DVector::from_vec(vec![y[1], -y[0]]);
        let y0 = DVector::from_vec(vec![1.0, 0.0]);
        let y = integrate(rhs, 0.0, &y0, 50.0, &OdeOptions::default()).unwrap().completed().unwrap();
        assert!((y[0] - 50f64.cos()).abs() < 1e-7);
        assert!((y[1] + 50f64.sin()).abs() < 1e-7);
    }

    #[test]
    fn rk4_fourth_order() {
        let y0 = DVector::from_element(1, 1.0);
        let err = |h: f64| {
            let o = OdeOptions { scheme: Scheme::FixedRk4, max_step: h, ..Default::default() };
            let y = integrate(decay, 0.0, &y0, 2.0, &o).unwrap().completed().unwrap();
            (y[0] - (-2.0f64).exp()).abs()
        };
        let ratio = err(0.2) / err(0.1);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn blowup_is_reported() {
        // y' = y², y(0)=1 blows up at t=1
        let rhs = |_t: f64, y: &DVector<f64>| y.map(|v| v * v);
        let y0 = DVector::from_element(1, 1.0);
        let o = OdeOptions { blowup_radius: Some(1e3), ..Default::default() };
        match integrate(rhs, 0.0, &y0, 2.0, &o).unwrap() {
            Outcome::Escaped { t, .. } => assert!(t > 0.99 && t < 1.0),
            other => panic!("expected escape, got {other:?}"),
        }
    }

    #[test]
    fn nodes_match_direct() {
        let y0 = DVector::from_element(1, 2.0);
        let nodes = [0.0, 0.5, 1.0, 1.5];
        let ys = integrate_nodes(decay, &nodes, &y0, &OdeOptions::default()).unwrap();
        for (t, y) in nodes.iter().zip(&ys) {
            assert!((y[0] - 2.0 * (-t).exp()).abs() < 1e-9);
        }
    }
}

//! Block-diagonalization along a trajectory, the blocked nonlinear system,
//! the integral-manifold chart `v = h(s, u)`, asymptotic phase and the
//! reduction principle.
//!
//! Everything lives on one fast-time trajectory `s ↦ τ_{s/|ε|}(p)` sampled on
//! a uniform grid of step `h`. Integrations of the blocked system use RK4 with
//! step `2h`, so midpoints fall on odd grid nodes and no coefficient needs to
//! be interpolated.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::attractor::{AttractorReport, TestVerdict};
use crate::base_flow::{BaseFlow, BasePoint};
use crate::cocycle::{fd_jacobian, System, VectorField};
use crate::error::{Error, Result};
use crate::spectrum::{dichotomy, op_norm, orthonormalize, AveragedSplit, LinearFamily, SpectrumConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Defaults to `−(α+β)/2`.
    pub lambda_star: Option<f64>,
    pub projection_window: f64,
    /// Frame step in fast time; defaults to `|ε|/20`.
    pub frame_step: Option<f64>,
    pub delta: f64,
    pub shrink: f64,
    /// Graph-transform warm-up window; defaults to `ln(1/tol)/β`.
    pub window: Option<f64>,
    pub u_nodes: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub omega_s_samples: usize,
    pub omega_box_nodes: usize,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            beta: 0.5,
            gamma: 0.1,
            lambda_star: None,
            projection_window: 40.0,
            frame_step: None,
            delta: 0.1,
            shrink: 0.8,
            window: None,
            u_nodes: 33,
            tol: 1e-8,
            max_iter: 40,
            omega_s_samples: 64,
            omega_box_nodes: 9,
        }
    }
}

impl ReductionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta > self.alpha) {
            return Err(Error::Config("need 0 < α < β".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < self.beta - self.alpha) {
            return Err(Error::Config("need 0 < γ < β − α".into()));
        }
        if !(self.delta > 0.0) || !(self.tol > 0.0) || !(self.projection_window > 0.0) {
            return Err(Error::Config("δ, tol and the projection window must be positive".into()));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::Config("shrink factor must lie in (0, 1)".into()));
        }
        if self.u_nodes < 5 || self.u_nodes % 2 == 0 {
            return Err(Error::Config("u grid needs an odd node count ≥ 5".into()));
        }
        if self.omega_s_samples == 0 || self.omega_box_nodes < 2 || self.max_iter == 0 {
            return Err(Error::Config("sample counts must be positive".into()));
        }
        for v in [self.frame_step, self.window].into_iter().flatten() {
            if !(v > 0.0) {
                return Err(Error::Config("frame step and window must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn lambda_star(&self) -> f64 {
        self.lambda_star.unwrap_or(-0.5 * (self.alpha + self.beta))
    }

    pub fn frame_step_for(&self, eps: f64) -> f64 {
        self.frame_step.unwrap_or(eps.abs() / 20.0)
    }

    pub fn window(&self) -> f64 {
        self.window.unwrap_or((1.0 / self.tol).ln() / self.beta)
    }
}

/// `σ(s)` and the blocks `a(s)`, `b(s)` along one trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryFrame {
    pub base: BaseFlow,
    pub p: BasePoint,
    pub eps: f64,
    pub e: usize,
    pub d: usize,
    pub step: f64,
    pub s_grid: Vec<f64>,
    pub points: Vec<BasePoint>,
    pub l: Vec<DMatrix<f64>>,
    pub q: Vec<DMatrix<f64>>,
    pub sigma: Vec<DMatrix<f64>>,
    pub sigma_inv: Vec<DMatrix<f64>>,
    pub sigma_prime: Vec<DMatrix<f64>>,
    pub a: Vec<DMatrix<f64>>,
    pub b: Vec<DMatrix<f64>>,
    /// `max(|σ|, |σ⁻¹|)` over the grid.
    pub theta_bound: f64,
    /// Smallest `k` with `|Φ^{(a)}(s; r)| ≤ k e^{α|s−r|}` and
    /// `|Φ^{(b)}(s; r)| ≤ k e^{−β(s−r)}` on sampled pairs.
    pub k_bound: f64,
    /// `|l|₀` along the trajectory.
    pub l_norm: f64,
    /// Largest off-diagonal block of `m = σ⁻¹(lσ − σ')`.
    pub offdiag_defect: f64,
    /// Largest `|m|`, compared with `|l|₀` as a diagnostic.
    pub m_norm: f64,
    /// Smallest principal angle between the two fibers, radians.
    pub min_angle: f64,
    /// Regression slopes of `log|Φ^{(a)}|` and `−log|Φ^{(b)}|`.
    pub alpha_fit: f64,
    pub beta_fit: f64,
    /// `(s, |Φ^{(a)}(s)|, |Φ^{(b)}(s)|)` on even nodes.
    pub propagator_norms: Vec<(f64, f64, f64)>,
}

fn align(new: DMatrix<f64>, prev: &DMatrix<f64>) -> DMatrix<f64> {
    if new.ncols() == 0 {
        return new;
    }
    let svd = (new.transpose() * prev).svd(true, true);
    let r = svd.u.expect("requested") * svd.v_t.expect("requested");
    new * r
}

fn sign_convention(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for mut c in m.column_iter_mut() {
        let imax = c.iamax();
        if c[imax] < 0.0 {
            c.neg_mut();
        }
    }
    m
}

/// Fourth-order differences on a uniform grid, one-sided at the ends.
fn derivative(values: &[DMatrix<f64>], h: f64) -> Vec<DMatrix<f64>> {
    let n = values.len();
    let f = |i: usize| &values[i];
    (0..n)
        .map(|i| {
            let v = if i >= 2 && i + 2 < n {
                f(i - 2) - f(i + 2) + (f(i + 1) - f(i - 1)) * 8.0
            } else if i == 0 {
                f(0) * -25.0 + f(1) * 48.0 - f(2) * 36.0 + f(3) * 16.0 - f(4) * 3.0
            } else if i == 1 {
                f(0) * -3.0 - f(1) * 10.0 + f(2) * 18.0 - f(3) * 6.0 + f(4)
            } else if i == n - 1 {
                f(n - 1) * 25.0 - f(n - 2) * 48.0 + f(n - 3) * 36.0 - f(n - 4) * 16.0 + f(n - 5) * 3.0
            } else {
                f(n - 1) * 3.0 + f(n - 2) * 10.0 - f(n - 3) * 18.0 + f(n - 4) * 6.0 - f(n - 5)
            };
            v / (12.0 * h)
        })
        .collect()
}

/// RK4 for `Y' = c(s)Y` with `c` given on grid nodes; steps of `2h` from
/// node `i` use nodes `i`, `i+1`, `i+2`.
fn grid_propagator(c: &[DMatrix<f64>], h: f64) -> Vec<DMatrix<f64>> {
    let k = c[0].nrows();
    let mut y = DMatrix::identity(k, k);
    let mut out = vec![y.clone()];
    let mut i = 0;
    while i + 2 < c.len() {
        let k1 = &c[i] * &y;
        let k2 = &c[i + 1] * (&y + &k1 * h);
        let k3 = &c[i + 1] * (&y + &k2 * h);
        let k4 = &c[i + 2] * (&y + &k3 * (2.0 * h));
        y += (k1 + (k2 + k3) * 2.0 + k4) * (h / 3.0);
        out.push(y.clone());
        i += 2;
    }
    out
}

fn slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (b, my - b * mx)
}

fn block(m: &DMatrix<f64>, r0: usize, c0: usize, r: usize, c: usize) -> DMatrix<f64> {
    m.view((r0, c0), (r, c)).into_owned()
}

/// Builds the frame over `[0, S]` from `p`.
pub fn build_frame(
    family: &LinearFamily,
    p: &BasePoint,
    eps: f64,
    horizon: f64,
    split: &AveragedSplit,
    cfg: &ReductionConfig,
) -> Result<TrajectoryFrame> {
    cfg.validate()?;
    if eps == 0.0 || !eps.is_finite() {
        return Err(Error::Domain("the frame requires ε ≠ 0".into()));
    }
    if !(horizon > 0.0) {
        return Err(Error::Domain("frame horizon must be positive".into()));
    }
    let d = family.dim();
    let e = split.e;
    let h0 = cfg.frame_step_for(eps);
    let mut n = (horizon / h0).ceil() as usize;
    n = n.max(8);
    if n % 2 == 1 {
        n += 1;
    }
    let h = horizon / n as f64;
    let scfg = SpectrumConfig {
        step: Some(h),
        ..Default::default()
    };
    let lam = cfg.lambda_star();
    let base = family.base();
    let fibers = |q: &BasePoint| {
        dichotomy(family, q, eps, lam, cfg.projection_window, &scfg).map_err(|e| match e {
            Error::Resolution(m) => Error::Frame(m),
            other => other,
        })
    };
    let start = fibers(p)?;
    if start.center_basis.ncols() != e {
        return Err(Error::Frame(format!(
            "dichotomy at p has center dimension {} but the averaged split has e = {e}",
            start.center_basis.ncols()
        )));
    }
    let p_end = base.advance_unchecked(p, horizon / eps.abs());
    let end = fibers(&p_end)?;

    let s_grid: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
    let points: Vec<BasePoint> = s_grid.iter().map(|s| base.advance_unchecked(p, s / eps.abs())).collect();
    let l: Vec<DMatrix<f64>> = points.iter().map(|q| family.eval(q, eps)).collect();

    let mut center = Vec::with_capacity(n + 1);
    center.push(sign_convention(start.center_basis.clone()));
    for i in 0..n {
        let prev: &DMatrix<f64> = &center[i];
        let next = if e > 0 {
            align(orthonormalize(&family.rk4_step(p, eps, 0.0, s_grid[i], prev, h)), prev)
        } else {
            prev.clone()
        };
        center.push(next);
    }
    let mut stable = vec![DMatrix::zeros(d, d - e); n + 1];
    stable[n] = sign_convention(end.stable_basis.clone());
    for i in (0..n).rev() {
        stable[i] = if d > e {
            align(orthonormalize(&family.rk4_step(p, eps, 0.0, s_grid[i + 1], &stable[i + 1], -h)), &stable[i + 1])
        } else {
            stable[i + 1].clone()
        };
    }

    let mut sigma = Vec::with_capacity(n + 1);
    let mut sigma_inv = Vec::with_capacity(n + 1);
    let mut q = Vec::with_capacity(n + 1);
    let mut min_angle = std::f64::consts::FRAC_PI_2;
    let mut proj = DMatrix::zeros(d, d);
    for i in e..d {
        proj[(i, i)] = 1.0;
    }
    for i in 0..=n {
        let mut s = DMatrix::zeros(d, d);
        s.columns_mut(0, e).copy_from(&center[i]);
        s.columns_mut(e, d - e).copy_from(&stable[i]);
        if e > 0 && d > e {
            let cos = op_norm(&(center[i].transpose() * &stable[i])).min(1.0);
            min_angle = min_angle.min(cos.acos());
        }
        let inv = s
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Frame(format!("σ singular at s = {}", s_grid[i])))?;
        q.push(&s * &proj * &inv);
        sigma.push(s);
        sigma_inv.push(inv);
    }
    if min_angle < 5f64.to_radians() {
        return Err(Error::Frame(format!(
            "center and stable fibers within {:.2}° of each other",
            min_angle.to_degrees()
        )));
    }
    let sigma_prime = derivative(&sigma, h);
    let mut a = Vec::with_capacity(n + 1);
    let mut b = Vec::with_capacity(n + 1);
    let mut offdiag: f64 = 0.0;
    let mut m_norm: f64 = 0.0;
    for i in 0..=n {
        let m = &sigma_inv[i] * (&l[i] * &sigma[i] - &sigma_prime[i]);
        if e > 0 && d > e {
            offdiag = offdiag.max(op_norm(&block(&m, 0, e, e, d - e))).max(op_norm(&block(&m, e, 0, d - e, e)));
        }
        m_norm = m_norm.max(op_norm(&m));
        a.push(block(&m, 0, 0, e, e));
        b.push(block(&m, e, e, d - e, d - e));
    }
    let l_norm = l.iter().map(op_norm).fold(0.0, f64::max);
    let tol = 1e-4 * (1.0 + l_norm);
    if offdiag > tol {
        return Err(Error::Frame(format!(
            "block off-diagonal defect {offdiag:.3e} above {tol:.3e}"
        )));
    }
    let theta_bound = sigma
        .iter()
        .zip(&sigma_inv)
        .map(|(s, si)| op_norm(s).max(op_norm(si)))
        .fold(0.0, f64::max);

    let phi_a = grid_propagator(&a, h);
    let phi_b = grid_propagator(&b, h);
    let times: Vec<f64> = (0..phi_a.len()).map(|j| 2.0 * h * j as f64).collect();
    let na: Vec<f64> = phi_a.iter().map(op_norm).collect();
    let nb: Vec<f64> = phi_b.iter().map(op_norm).collect();
    let propagator_norms = times.iter().zip(&na).zip(&nb).map(|((&s, &x), &y)| (s, x, y)).collect();
    let alpha_fit = if e > 0 { slope(&times, &na.iter().map(|v| v.ln()).collect::<Vec<_>>()).0 } else { 0.0 };
    let beta_fit = if d > e { -slope(&times, &nb.iter().map(|v| v.ln()).collect::<Vec<_>>()).0 } else { f64::INFINITY };
    let k_bound = two_time_bound(&phi_a, &phi_b, &times, cfg.alpha, cfg.beta)?;

    Ok(TrajectoryFrame {
        base: base.clone(),
        p: p.clone(),
        eps,
        e,
        d,
        step: h,
        s_grid,
        points,
        l,
        q,
        sigma,
        sigma_inv,
        sigma_prime,
        a,
        b,
        theta_bound,
        k_bound,
        l_norm,
        offdiag_defect: offdiag,
        m_norm,
        min_angle,
        alpha_fit,
        beta_fit,
        propagator_norms,
    })
}

/// `k` over sampled pairs `r ≤ s` of the even-node propagators.
fn two_time_bound(
    phi_a: &[DMatrix<f64>],
    phi_b: &[DMatrix<f64>],
    times: &[f64],
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    let stride = (phi_a.len() / 300).max(1);
    let idx: Vec<usize> = (0..phi_a.len()).step_by(stride).collect();
    let inv = |m: &DMatrix<f64>| {
        if m.is_empty() {
            Ok(m.clone())
        } else {
            m.clone().try_inverse().ok_or_else(|| Error::Frame("block propagator singular".into()))
        }
    };
    let ia = idx.iter().map(|&i| inv(&phi_a[i])).collect::<Result<Vec<_>>>()?;
    let ib = idx.iter().map(|&i| inv(&phi_b[i])).collect::<Result<Vec<_>>>()?;
    let mut k: f64 = 1.0;
    for (x, &r) in idx.iter().enumerate() {
        for (y, &s) in idx.iter().enumerate().skip(x) {
            let dt = times[s] - times[r];
            if !phi_a[0].is_empty() {
                let fwd = op_norm(&(&phi_a[s] * &ia[x]));
                let bwd = op_norm(&(&phi_a[r] * &ia[y]));
                k = k.max(fwd.max(bwd) * (-alpha * dt).exp());
            }
            if !phi_b[0].is_empty() {
                k = k.max(op_norm(&(&phi_b[s] * &ib[x])) * (beta * dt).exp());
            }
        }
    }
    Ok(k)
}

impl TrajectoryFrame {
    pub fn len(&self) -> usize {
        self.s_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_grid.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.s_grid.last().expect("nonempty grid")
    }

    /// Off-diagonal tolerance `1e-4·(1 + |l|₀)`.
    pub fn block_tolerance(&self) -> f64 {
        1e-4 * (1.0 + self.l_norm)
    }

    /// Largest `|σσ⁻¹ − I|`.
    pub fn inverse_defect(&self) -> f64 {
        let id = DMatrix::identity(self.d, self.d);
        self.sigma
            .iter()
            .zip(&self.sigma_inv)
            .map(|(s, si)| (s * si - &id).norm())
            .fold(0.0, f64::max)
    }

    /// Largest `|Q(s)² − Q(s)|`.
    pub fn projection_defect(&self) -> f64 {
        self.q.iter().map(|q| (q * q - q).norm()).fold(0.0, f64::max)
    }

    /// `m(s)` at a node, rebuilt from the stored pieces.
    pub fn m_at(&self, i: usize) -> DMatrix<f64> {
        &self.sigma_inv[i] * (&self.l[i] * &self.sigma[i] - &self.sigma_prime[i])
    }

    /// Integrates `y' = diag(a, b)y` from `y(0) = σ⁻¹(0)x0` and `x' = lx`
    /// from `x0` with the same grid RK4; returns `max |σ(s)y(s) − x(s)|`.
    pub fn change_of_variables_error(&self, x0: &DVector<f64>) -> f64 {
        let (d, e, h) = (self.d, self.e, self.step);
        let blocked: Vec<DMatrix<f64>> = self
            .a
            .iter()
            .zip(&self.b)
            .map(|(a, b)| {
                let mut m = DMatrix::zeros(d, d);
                m.view_mut((0, 0), (e, e)).copy_from(a);
                m.view_mut((e, e), (d - e, d - e)).copy_from(b);
                m
            })
            .collect();
        let py = grid_propagator(&blocked, h);
        let px = grid_propagator(&self.l, h);
        let y0 = &self.sigma_inv[0] * x0;
        py.iter()
            .zip(&px)
            .enumerate()
            .map(|(j, (fy, fx))| (&self.sigma[2 * j] * (fy * &y0) - fx * x0).norm())
            .fold(0.0, f64::max)
    }

    /// Largest `|Q_frame(s) − Q_{τ(s)}|` at `count` evenly spaced nodes,
    /// against direct dichotomy projections.
    pub fn projection_spot_check(
        &self,
        family: &LinearFamily,
        lambda_star: f64,
        window: f64,
        count: usize,
    ) -> Result<f64> {
        let scfg = SpectrumConfig {
            step: Some(self.step),
            ..Default::default()
        };
        let n = self.len() - 1;
        let idx: Vec<usize> = (0..count.max(1)).map(|k| k * n / count.max(1)).collect();
        let errs = idx
            .par_iter()
            .map(|&i| {
                dichotomy(family, &self.points[i], self.eps, lambda_star, window, &scfg)
                    .map(|dq| (&dq.projection - &self.q[i]).norm())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(errs.into_iter().fold(0.0, f64::max))
    }
}

/// Cubic Lagrange stencil on a uniform index grid `0..n`, extrapolating at
/// the ends.
fn cubic_stencil(t: f64, n: usize) -> (usize, [f64; 4]) {
    let i0 = (t.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let x = t - i0 as f64;
    let mut w = [0.0; 4];
    for (j, wj) in w.iter_mut().enumerate() {
        let mut acc = 1.0;
        for m in 0..4 {
            if m != j {
                acc *= (x - m as f64) / (j as f64 - m as f64);
            }
        }
        *wj = acc;
    }
    (i0, w)
}

/// `g(s, y) = σ⁻¹(s) n(τ(s), σ(s)y)` and the blocked system
/// `u' = a(s)u + g₁(s, u, v)`, `v' = b(s)v + g₂(s, u, v)`.
#[derive(Clone)]
pub struct BlockedSystem<'a> {
    pub frame: &'a TrajectoryFrame,
    field: Arc<dyn VectorField>,
}

impl<'a> BlockedSystem<'a> {
    pub fn new(frame: &'a TrajectoryFrame, system: &System) -> Result<Self> {
        if system.dim() != frame.d {
            return Err(Error::Dimension {
                expected: frame.d,
                got: system.dim(),
            });
        }
        Ok(Self {
            frame,
            field: Arc::clone(&system.field),
        })
    }

    pub fn e(&self) -> usize {
        self.frame.e
    }

    fn nonlinear(&self, p: &BasePoint, l: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
        self.field.eval(p, x, self.frame.eps) - l * x
    }

    /// `g` at grid node `i`.
    pub fn g_node(&self, i: usize, y: &DVector<f64>) -> DVector<f64> {
        let f = self.frame;
        let x = &f.sigma[i] * y;
        &f.sigma_inv[i] * self.nonlinear(&f.points[i], &f.l[i], &x)
    }

    /// `g` at any `s` in the frame: `σ`, `σ⁻¹` by cubic interpolation, the
    /// base point and `l` exactly.
    pub fn g(&self, s: f64, y: &DVector<f64>) -> DVector<f64> {
        let f = self.frame;
        let (i0, w) = cubic_stencil(s / f.step, f.len());
        let mut sig = DMatrix::zeros(f.d, f.d);
        let mut inv = DMatrix::zeros(f.d, f.d);
        for (j, wj) in w.iter().enumerate() {
            sig += &f.sigma[i0 + j] * *wj;
            inv += &f.sigma_inv[i0 + j] * *wj;
        }
        let q = f.base.advance_unchecked(&f.p, s / f.eps.abs());
        let l = self.field.jacobian_x(&q, &DVector::zeros(f.d), f.eps);
        let x = &sig * y;
        inv * self.nonlinear(&q, &l, &x)
    }

    pub fn g1(&self, s: f64, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let g = self.g(s, &join(u, v));
        g.rows(0, self.e()).into_owned()
    }

    pub fn g2(&self, s: f64, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let g = self.g(s, &join(u, v));
        g.rows(self.e(), self.frame.d - self.e()).into_owned()
    }

    /// Right side of the blocked system at node `i`.
    pub fn rhs_node(&self, i: usize, y: &DVector<f64>) -> DVector<f64> {
        let f = self.frame;
        let e = f.e;
        let g = self.g_node(i, y);
        let mut out = g;
        let u = y.rows(0, e);
        let v = y.rows(e, f.d - e);
        let au = &f.a[i] * u;
        let bv = &f.b[i] * v;
        for k in 0..e {
            out[k] += au[k];
        }
        for k in 0..f.d - e {
            out[e + k] += bv[k];
        }
        out
    }

    /// Grid RK4 with step `2h` from node `i0` for `steps` steps. Returns the
    /// states at nodes `i0, i0+2, …`; stops early (returning `Err` with the
    /// partial path) if `|u|` or `|v|` exceeds `bound`.
    pub fn integrate(
        &self,
        i0: usize,
        y0: &DVector<f64>,
        steps: usize,
        bound: Option<f64>,
    ) -> std::result::Result<Vec<DVector<f64>>, Vec<DVector<f64>>> {
        let h2 = 2.0 * self.frame.step;
        let e = self.e();
        let d = self.frame.d;
        let mut y = y0.clone();
        let mut out = vec![y.clone()];
        for j in 0..steps {
            let i = i0 + 2 * j;
            if i + 2 >= self.frame.len() {
                return Err(out);
            }
            let k1 = self.rhs_node(i, &y);
            let k2 = self.rhs_node(i + 1, &(&y + &k1 * (0.5 * h2)));
            let k3 = self.rhs_node(i + 1, &(&y + &k2 * (0.5 * h2)));
            let k4 = self.rhs_node(i + 2, &(&y + &k3 * h2));
            y += (k1 + (k2 + k3) * 2.0 + k4) * (h2 / 6.0);
            let bad = !y.iter().all(|c| c.is_finite())
                || bound.map_or(false, |b| y.rows(0, e).norm() > b || y.rows(e, d - e).norm() > b);
            out.push(y.clone());
            if bad {
                return Err(out);
            }
        }
        Ok(out)
    }
}

pub fn join(u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let mut y = DVector::zeros(u.len() + v.len());
    y.rows_mut(0, u.len()).copy_from(u);
    y.rows_mut(u.len(), v.len()).copy_from(v);
    y
}

/// `v = h(s, u)` on a uniform `s` grid (relative to the chart start) times a
/// tensor `u` grid over `[−Δ, Δ]ᵉ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldChart {
    pub e: usize,
    pub k: usize,
    pub big_delta: f64,
    pub u_nodes: usize,
    pub ds: f64,
    pub n_s: usize,
    /// Frame node of chart row 0 and frame nodes per chart row.
    pub frame_start: usize,
    pub frame_stride: usize,
    /// Warm-up window used by the graph transform.
    pub window: f64,
    pub iterations: usize,
    pub last_change: f64,
    values: Vec<f64>,
}

impl ManifoldChart {
    fn nu_total(&self) -> usize {
        self.u_nodes.pow(self.e as u32)
    }

    pub fn du(&self) -> f64 {
        2.0 * self.big_delta / (self.u_nodes - 1) as f64
    }

    pub fn span(&self) -> f64 {
        (self.n_s - 1) as f64 * self.ds
    }

    pub fn u_node(&self, flat: usize) -> DVector<f64> {
        let mut idx = flat;
        DVector::from_fn(self.e, |_, _| {
            let i = idx % self.u_nodes;
            idx /= self.u_nodes;
            -self.big_delta + i as f64 * self.du()
        })
    }

    /// Flat index of the `u = 0` node.
    pub fn zero_node(&self) -> usize {
        let mid = (self.u_nodes - 1) / 2;
        (0..self.e).fold(0, |acc, k| acc + mid * self.u_nodes.pow(k as u32))
    }

    pub fn node_value(&self, j: usize, flat: usize) -> DVector<f64> {
        let o = (j * self.nu_total() + flat) * self.k;
        DVector::from_column_slice(&self.values[o..o + self.k])
    }

    /// Frame node of chart row `j`.
    pub fn frame_node(&self, j: usize) -> usize {
        self.frame_start + self.frame_stride * j
    }

    fn row_eval(values: &[f64], row: usize, nu: usize, e: usize, k: usize, delta: f64, u: &DVector<f64>) -> DVector<f64> {
        let du = 2.0 * delta / (nu - 1) as f64;
        let nt = nu.pow(e as u32);
        let stencils: Vec<(usize, [f64; 4])> = (0..e).map(|c| cubic_stencil((u[c] + delta) / du, nu)).collect();
        let mut out = DVector::zeros(k);
        let total = 4usize.pow(e as u32);
        for m in 0..total {
            let mut w = 1.0;
            let mut flat = 0;
            let mut mm = m;
            for (c, (i0, ws)) in stencils.iter().enumerate() {
                let o = mm % 4;
                mm /= 4;
                w *= ws[o];
                flat += (i0 + o) * nu.pow(c as u32);
            }
            if w != 0.0 {
                let base = (row * nt + flat) * k;
                for c in 0..k {
                    out[c] += w * values[base + c];
                }
            }
        }
        out
    }

    /// `h` on row `j`, cubic in `u` (extrapolated up to `2Δ`).
    pub fn eval_row(&self, j: usize, u: &DVector<f64>) -> DVector<f64> {
        Self::row_eval(&self.values, j, self.u_nodes, self.e, self.k, self.big_delta, u)
    }

    /// `h(s, u)`, cubic in both `s` and `u`.
    pub fn eval(&self, s: f64, u: &DVector<f64>) -> DVector<f64> {
        let t = s / self.ds;
        if (t - t.round()).abs() < 1e-9 {
            let j = (t.round().max(0.0) as usize).min(self.n_s - 1);
            return self.eval_row(j, u);
        }
        let (i0, w) = cubic_stencil(t, self.n_s);
        let mut out = DVector::zeros(self.k);
        for (m, wm) in w.iter().enumerate() {
            out += self.eval_row(i0 + m, u) * *wm;
        }
        out
    }

    /// `∂ᵤh(s, u)` by central differences with step `Δu/4`.
    pub fn du_h(&self, s: f64, u: &DVector<f64>) -> DMatrix<f64> {
        fd_jacobian(|w| self.eval(s, w), u)
    }

    /// Largest `|h|` over all nodes.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|h(s, 0)|` over rows.
    pub fn origin_value(&self) -> f64 {
        let z = self.zero_node();
        (0..self.n_s).map(|j| self.node_value(j, z).norm()).fold(0.0, f64::max)
    }

    /// Largest `|∂ᵤh(s, 0)|` over rows.
    pub fn origin_slope(&self) -> f64 {
        let zero = DVector::zeros(self.e);
        (0..self.n_s)
            .map(|j| op_norm(&fd_jacobian(|w| self.eval_row(j, w), &zero)))
            .fold(0.0, f64::max)
    }

    /// Largest `|∂ᵤh|` over all nodes.
    pub fn max_slope(&self) -> f64 {
        (0..self.n_s)
            .flat_map(|j| (0..self.nu_total()).map(move |n| (j, n)))
            .map(|(j, n)| op_norm(&fd_jacobian(|w| self.eval_row(j, w), &self.u_node(n))))
            .fold(0.0, f64::max)
    }

    /// Every `factor`-th row.
    pub fn coarsen(&self, factor: usize) -> ManifoldChart {
        let factor = factor.max(1);
        let nt = self.nu_total() * self.k;
        let rows: Vec<usize> = (0..self.n_s).step_by(factor).collect();
        let mut values = Vec::with_capacity(rows.len() * nt);
        for &j in &rows {
            values.extend_from_slice(&self.values[j * nt..(j + 1) * nt]);
        }
        ManifoldChart {
            ds: self.ds * factor as f64,
            n_s: rows.len(),
            frame_stride: self.frame_stride * factor,
            values,
            ..self.clone()
        }
    }
}

/// Evaluator for `h_k` on sweep rows, including odd frame nodes (midpoints).
struct SweepValues<'v> {
    values: &'v [f64],
    rows: usize,
    nu: usize,
    e: usize,
    k: usize,
    delta: f64,
}

impl SweepValues<'_> {
    fn at(&self, frame_node: usize, u: &DVector<f64>) -> DVector<f64> {
        let row_eval = |j: usize| ManifoldChart::row_eval(self.values, j, self.nu, self.e, self.k, self.delta, u);
        if frame_node % 2 == 0 {
            return row_eval(frame_node / 2);
        }
        let j = frame_node / 2;
        if j >= 1 && j + 2 < self.rows {
            (row_eval(j) + row_eval(j + 1)) * (9.0 / 16.0) - (row_eval(j - 1) + row_eval(j + 2)) * (1.0 / 16.0)
        } else {
            (row_eval(j) + row_eval(j + 1)) * 0.5
        }
    }
}

/// Lyapunov–Perron iteration for the chart over `[window, window + span]`
/// of the frame, each iterate evaluated by one forward sweep from `h ≡ 0`
/// at `s = 0`.
pub fn graph_transform_h(
    blocked: &BlockedSystem<'_>,
    big_delta: f64,
    window: f64,
    span: f64,
    cfg: &ReductionConfig,
) -> Result<ManifoldChart> {
    cfg.validate()?;
    let f = blocked.frame;
    let (e, d) = (f.e, f.d);
    let k = d - e;
    if e == 0 || k == 0 {
        return Err(Error::Domain("the chart needs nontrivial center and stable parts".into()));
    }
    if !(big_delta > 0.0) {
        return Err(Error::Domain("Δ must be positive".into()));
    }
    let ds = 2.0 * f.step;
    let rows = (f.len() - 1) / 2 + 1;
    let j_w = (window / ds).ceil() as usize;
    let n_span = (span / ds).round() as usize;
    if j_w + n_span >= rows {
        return Err(Error::Domain(format!(
            "frame horizon {} too short for window {window} plus span {span}",
            f.horizon()
        )));
    }
    let last = j_w + n_span;
    let nu = cfg.u_nodes;
    let nt = nu.pow(e as u32);
    let template = ManifoldChart {
        e,
        k,
        big_delta,
        u_nodes: nu,
        ds,
        n_s: last + 1,
        frame_start: 0,
        frame_stride: 2,
        window,
        iterations: 0,
        last_change: f64::NAN,
        values: vec![],
    };
    let u_nodes: Vec<DVector<f64>> = (0..nt).map(|n| template.u_node(n)).collect();
    let zero = template.zero_node();
    let mut old = vec![0.0; (last + 1) * nt * k];
    let mut changes: Vec<f64> = Vec::new();
    let mut growth_streak = 0;
    for it in 0..cfg.max_iter {
        let mut new = vec![0.0; (last + 1) * nt * k];
        let hold = SweepValues {
            values: &old,
            rows: last + 1,
            nu,
            e,
            k,
            delta: big_delta,
        };
        for j in 0..last {
            let (i0, im, i1) = (2 * j, 2 * j + 1, 2 * j + 2);
            let (done, todo) = new.split_at_mut((j + 1) * nt * k);
            let row_vals: Vec<Result<DVector<f64>>> = u_nodes
                .par_iter()
                .enumerate()
                .map(|(n, uu)| {
                    if n == zero {
                        return Ok(DVector::zeros(k));
                    }
                    let gfull = |i: usize, u: &DVector<f64>| {
                        let v = hold.at(i, u);
                        blocked.g_node(i, &join(u, &v))
                    };
                    let rhs_u = |i: usize, u: &DVector<f64>, g: &DVector<f64>| &f.a[i] * u + g.rows(0, e);
                    let g1 = gfull(i1, uu);
                    let k1 = rhs_u(i1, uu, &g1);
                    let y2 = uu - &k1 * (0.5 * ds);
                    let k2 = rhs_u(im, &y2, &gfull(im, &y2));
                    let y3 = uu - &k2 * (0.5 * ds);
                    let k3 = rhs_u(im, &y3, &gfull(im, &y3));
                    let y4 = uu - &k3 * ds;
                    let k4 = rhs_u(i0, &y4, &gfull(i0, &y4));
                    let u_prev = uu - (&k1 + (&k2 + &k3) * 2.0 + &k4) * (ds / 6.0);
                    if u_prev.amax() > 2.0 * big_delta {
                        return Err(Error::ChartViolation(format!(
                            "reduced trajectory left the 2Δ box at s = {}",
                            f.s_grid[i0]
                        )));
                    }
                    let g0 = gfull(i0, &u_prev);
                    let f0 = rhs_u(i0, &u_prev, &g0);
                    let u_mid = (&u_prev + uu) * 0.5 + (f0 - &k1) * (ds / 8.0);
                    let gm = gfull(im, &u_mid);
                    let (gs0, gsm, gs1) = (g0.rows(e, k).into_owned(), gm.rows(e, k).into_owned(), g1.rows(e, k).into_owned());
                    let v0 = ManifoldChart::row_eval(done, j, nu, e, k, big_delta, &u_prev);
                    let r1 = &f.b[i0] * &v0 + &gs0;
                    let r2 = &f.b[im] * (&v0 + &r1 * (0.5 * ds)) + &gsm;
                    let r3 = &f.b[im] * (&v0 + &r2 * (0.5 * ds)) + &gsm;
                    let r4 = &f.b[i1] * (&v0 + &r3 * ds) + &gs1;
                    Ok(v0 + (r1 + (r2 + r3) * 2.0 + r4) * (ds / 6.0))
                })
                .collect();
            for (n, v) in row_vals.into_iter().enumerate() {
                let v = v?;
                todo[n * k..(n + 1) * k].copy_from_slice(v.as_slice());
            }
        }
        let change = new[j_w * nt * k..]
            .iter()
            .zip(&old[j_w * nt * k..])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if !change.is_finite() {
            return Err(Error::GapTooSmall("graph transform produced non-finite values".into()));
        }
        if let Some(&prev) = changes.last() {
            growth_streak = if change > prev { growth_streak + 1 } else { 0 };
            if growth_streak >= 3 {
                return Err(Error::GapTooSmall(format!(
                    "graph transform diverging: changes {:?}",
                    &changes[changes.len().saturating_sub(3)..]
                )));
            }
        }
        changes.push(change);
        old = new;
        if change <= cfg.tol {
            let values = old[j_w * nt * k..].to_vec();
            return Ok(ManifoldChart {
                n_s: n_span + 1,
                frame_start: 2 * j_w,
                iterations: it + 1,
                last_change: change,
                values,
                ..template
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iter,
        last_change: changes.last().copied().unwrap_or(f64::NAN),
    })
}

/// Sampled `ω(Δ)`: largest norm of `∂ᵤg₁, ∂ᵥg₁, ∂ᵤg₂, ∂ᵥg₂` (and `∂ᵤh` if a
/// chart is given) over `|u|, |v| ≤ Δ` and the frame nodes.
pub fn omega_modulus(
    blocked: &BlockedSystem<'_>,
    chart: Option<&ManifoldChart>,
    big_delta: f64,
    cfg: &ReductionConfig,
) -> f64 {
    let f = blocked.frame;
    let (e, d) = (f.e, f.d);
    let m = cfg.omega_box_nodes;
    let total = m.pow(d as u32);
    let box_pts: Vec<DVector<f64>> = (0..total)
        .map(|mut flat| {
            DVector::from_fn(d, |_, _| {
                let i = flat % m;
                flat /= m;
                big_delta * (2.0 * i as f64 / (m - 1) as f64 - 1.0)
            })
        })
        .collect();
    let ns = cfg.omega_s_samples.min(f.len());
    let nodes: Vec<usize> = (0..ns).map(|j| j * (f.len() - 1) / ns.saturating_sub(1).max(1)).collect();
    let g_part = nodes
        .par_iter()
        .map(|&i| {
            box_pts
                .iter()
                .map(|y| {
                    let jac = fd_jacobian(|w| blocked.g_node(i, w), y);
                    [
                        op_norm(&block(&jac, 0, 0, e, e)),
                        op_norm(&block(&jac, 0, e, e, d - e)),
                        op_norm(&block(&jac, e, 0, d - e, e)),
                        op_norm(&block(&jac, e, e, d - e, d - e)),
                    ]
                    .into_iter()
                    .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    let h_part = chart.map_or(0.0, |c| {
        let mu = m.max(3);
        let upts: Vec<DVector<f64>> = (0..mu.pow(e as u32))
            .map(|mut flat| {
                DVector::from_fn(e, |_, _| {
                    let i = flat % mu;
                    flat /= mu;
                    big_delta * (2.0 * i as f64 / (mu - 1) as f64 - 1.0)
                })
            })
            .collect();
        let nr = ns.min(c.n_s);
        let rows: Vec<usize> = (0..nr).map(|j| j * (c.n_s - 1) / nr.saturating_sub(1).max(1)).collect();
        rows.iter()
            .flat_map(|&j| upts.iter().map(move |u| (j, u)))
            .map(|(j, u)| op_norm(&fd_jacobian(|w| c.eval_row(j, w), u)))
            .fold(0.0, f64::max)
    });
    g_part.max(h_part)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionConstants {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub k: f64,
    pub theta: f64,
    pub delta: f64,
    pub big_delta: f64,
    /// `ω(2Δ)` at the chosen `Δ`.
    pub omega_of_2delta: f64,
}

impl ReductionConstants {
    /// `4k²ω(2Δ) ≤ min{2γ, β−α−γ, 4k²}`.
    pub fn admissible(&self) -> bool {
        let lhs = 4.0 * self.k * self.k * self.omega_of_2delta;
        lhs <= (2.0 * self.gamma).min(self.beta - self.alpha - self.gamma).min(4.0 * self.k * self.k)
    }
}

/// Shrinks `Δ` from `δ/2` by `cfg.shrink` until the admissibility inequality
/// holds.
pub fn choose_constants(
    blocked: &BlockedSystem<'_>,
    chart: Option<&ManifoldChart>,
    cfg: &ReductionConfig,
) -> Result<ReductionConstants> {
    cfg.validate()?;
    let f = blocked.frame;
    let mut c = ReductionConstants {
        alpha: cfg.alpha,
        beta: cfg.beta,
        gamma: cfg.gamma,
        k: f.k_bound,
        theta: f.theta_bound,
        delta: cfg.delta,
        big_delta: cfg.delta / 2.0,
        omega_of_2delta: f64::NAN,
    };
    for _ in 0..200 {
        c.omega_of_2delta = omega_modulus(blocked, chart, 2.0 * c.big_delta, cfg);
        if c.admissible() {
            return Ok(c);
        }
        c.big_delta *= cfg.shrink;
    }
    Err(Error::GapTooSmall("no admissible Δ found".into()))
}

/// Frame, constants and chart built together; `Δ` is re-checked with the
/// chart's own slope and shrunk if needed.
#[derive(Debug, Clone)]
pub struct Manifold {
    pub frame: TrajectoryFrame,
    pub constants: ReductionConstants,
    pub chart: ManifoldChart,
}

pub fn build_manifold(
    system: &System,
    split: &AveragedSplit,
    p: &BasePoint,
    eps: f64,
    span: f64,
    cfg: &ReductionConfig,
) -> Result<Manifold> {
    let family = LinearFamily::from_system(system);
    let window = cfg.window();
    let frame = build_frame(&family, p, eps, window + span + 4.0 * cfg.frame_step_for(eps), split, cfg)?;
    let blocked = BlockedSystem::new(&frame, system)?;
    let mut constants = choose_constants(&blocked, None, cfg)?;
    for _ in 0..20 {
        let chart = graph_transform_h(&blocked, constants.big_delta, window, span, cfg)?;
        let omega = omega_modulus(&blocked, Some(&chart), 2.0 * constants.big_delta, cfg);
        let checked = ReductionConstants {
            omega_of_2delta: omega,
            ..constants.clone()
        };
        if checked.admissible() {
            drop(blocked);
            return Ok(Manifold {
                frame,
                constants: checked,
                chart,
            });
        }
        constants.big_delta *= cfg.shrink;
    }
    Err(Error::GapTooSmall("chart slope keeps the inequality violated".into()))
}

/// Relative residual of the `∂ₛh` formula at the chart's interior nodes:
/// `max|FD − RHS| / max(max|FD|, max|RHS|)`.
pub fn check_partial_s_h(chart: &ManifoldChart, blocked: &BlockedSystem<'_>) -> f64 {
    let f = blocked.frame;
    let e = chart.e;
    let nt = chart.u_nodes.pow(e as u32);
    // interior u nodes only
    let interior: Vec<usize> = (0..nt)
        .filter(|&n| {
            let mut idx = n;
            (0..e).all(|_| {
                let i = idx % chart.u_nodes;
                idx /= chart.u_nodes;
                i > 0 && i + 1 < chart.u_nodes
            })
        })
        .collect();
    let rows: Vec<(f64, f64, f64)> = (1..chart.n_s - 1)
        .into_par_iter()
        .map(|j| {
            let i = chart.frame_node(j);
            let mut worst: (f64, f64, f64) = (0.0, 0.0, 0.0);
            for &n in &interior {
                let u = chart.u_node(n);
                let hv = chart.node_value(j, n);
                let fd = (chart.node_value(j + 1, n) - chart.node_value(j - 1, n)) / (2.0 * chart.ds);
                let dh = DMatrix::from_fn(chart.k, e, |r, c| {
                    let step = chart.u_nodes.pow(c as u32);
                    (chart.node_value(j, n + step)[r] - chart.node_value(j, n - step)[r]) / (2.0 * chart.du())
                });
                let g = blocked.g_node(i, &join(&u, &hv));
                let ru = &f.a[i] * &u + g.rows(0, e);
                let rhs = -(&dh * ru) + &f.b[i] * &hv + g.rows(e, chart.k);
                worst.0 = worst.0.max((&fd - &rhs).norm());
                worst.1 = worst.1.max(fd.norm());
                worst.2 = worst.2.max(rhs.norm());
            }
            worst
        })
        .collect();
    let res = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let scale = rows.iter().map(|r| r.1.max(r.2)).fold(0.0, f64::max);
    if scale == 0.0 {
        res
    } else {
        res / scale
    }
}

/// Largest `|v − h(s, u)|` after one step of `Δs = 2h`, for starts on the
/// graph at every chart row and `count` u-values per row.
pub fn invariance_defect(chart: &ManifoldChart, blocked: &BlockedSystem<'_>, steps: usize) -> f64 {
    let nt = chart.u_nodes.pow(chart.e as u32);
    (0..chart.n_s.saturating_sub(steps))
        .into_par_iter()
        .map(|j| {
            (0..nt)
                .step_by(3)
                .map(|n| {
                    let u0 = chart.u_node(n) * 0.9;
                    let y0 = join(&u0, &chart.eval_row(j, &u0));
                    match blocked.integrate(chart.frame_node(j), &y0, steps, None) {
                        Ok(path) => {
                            let y = path.last().expect("nonempty");
                            let u = y.rows(0, chart.e).into_owned();
                            (y.rows(chart.e, chart.k) - chart.eval_row(j + steps, &u)).norm()
                        }
                        Err(_) => f64::INFINITY,
                    }
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Integrates `u' = a(s)u + g₁(s, u, h(s, u))` on chart rows from row `j0`
/// by `steps` steps of `±ds`; returns the states at the visited rows.
pub fn reduced_path(
    chart: &ManifoldChart,
    blocked: &BlockedSystem<'_>,
    j0: usize,
    u0: &DVector<f64>,
    steps: usize,
    backward: bool,
) -> Vec<DVector<f64>> {
    assert_eq!(chart.frame_stride, 2, "reduced integration needs midpoint nodes");
    let f = blocked.frame;
    let e = chart.e;
    let rhs = |i: usize, u: &DVector<f64>| {
        let rel = (i as f64 - chart.frame_start as f64) * f.step;
        let v = chart.eval(rel, u);
        &f.a[i] * u + blocked.g_node(i, &join(u, &v)).rows(0, e)
    };
    let h = if backward { -chart.ds } else { chart.ds };
    let mut u = u0.clone();
    let mut out = vec![u.clone()];
    for m in 0..steps {
        let j = if backward { j0 - m } else { j0 + m };
        let i = chart.frame_node(j);
        let (ia, im, ib) = if backward { (i, i - 1, i - 2) } else { (i, i + 1, i + 2) };
        let k1 = rhs(ia, &u);
        let k2 = rhs(im, &(&u + &k1 * (0.5 * h)));
        let k3 = rhs(im, &(&u + &k2 * (0.5 * h)));
        let k4 = rhs(ib, &(&u + &k3 * h));
        u += (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
        out.push(u.clone());
    }
    if backward {
        out.reverse();
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrackingReport {
    pub times: Vec<f64>,
    pub deviations: Vec<f64>,
    pub bounds: Vec<f64>,
    pub slope: f64,
    pub prefactor: f64,
    /// `2k|v(0) − h(0, u(0))|`.
    pub bound_prefactor: f64,
    /// `|ũ_S(0) − ũ_{S/2}(0)|` between right-endpoint matchings at `S` and `S/2`.
    pub phase_stability: f64,
    pub completed: bool,
    pub exit_time: Option<f64>,
    pub bound_ok: bool,
    pub slope_ok: bool,
}

/// Integrates the blocked system from `(u0, v0)` at the chart start and tracks it by
/// the on-manifold solution matched at `s = S`.
pub fn asymptotic_phase(
    blocked: &BlockedSystem<'_>,
    chart: &ManifoldChart,
    constants: &ReductionConstants,
    u0: &DVector<f64>,
    v0: &DVector<f64>,
    horizon: f64,
) -> Result<TrackingReport> {
    if u0.len() != chart.e || v0.len() != chart.k {
        return Err(Error::Dimension {
            expected: chart.e + chart.k,
            got: u0.len() + v0.len(),
        });
    }
    let n = (horizon / chart.ds).round() as usize;
    if n < 4 || n >= chart.n_s {
        return Err(Error::Domain(format!("horizon {horizon} outside the chart span {}", chart.span())));
    }
    let e = chart.e;
    let path = blocked.integrate(chart.frame_node(0), &join(u0, v0), n, Some(constants.big_delta));
    let (path, completed) = match path {
        Ok(p) => (p, true),
        Err(p) => (p, false),
    };
    let m = path.len() - 1;
    let exit_time = if completed { None } else { Some(m as f64 * chart.ds) };
    let u_end = path[m].rows(0, e).into_owned();
    let shadow = reduced_path(chart, blocked, m, &u_end, m, true);
    let half = m / 2;
    let shadow_half = reduced_path(chart, blocked, half, &path[half].rows(0, e).into_owned(), half, true);
    let phase_stability = (&shadow[0] - &shadow_half[0]).norm();
    let z0 = (v0 - chart.eval_row(0, u0)).norm();
    let bound_prefactor = 2.0 * constants.k * z0;
    let rate = constants.beta - constants.gamma;
    let mut times = Vec::with_capacity(m + 1);
    let mut deviations = Vec::with_capacity(m + 1);
    let mut bounds = Vec::with_capacity(m + 1);
    for j in 0..=m {
        let s = j as f64 * chart.ds;
        let y = &path[j];
        let u = y.rows(0, e).into_owned();
        let v = y.rows(e, chart.k).into_owned();
        let dev = (&u - &shadow[j]).norm() + (v - chart.eval_row(j, &shadow[j])).norm();
        times.push(s);
        deviations.push(dev);
        bounds.push(bound_prefactor * (-rate * s).exp());
    }
    let s_end = m as f64 * chart.ds;
    let (xs, ys): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(&deviations)
        .filter(|(&s, &d)| s >= s_end / 4.0 && d > 0.0)
        .map(|(&s, &d)| (s, d.ln()))
        .unzip();
    let (slope_v, icpt) = if xs.len() >= 2 { slope(&xs, &ys) } else { (f64::NAN, f64::NAN) };
    let bound_ok = deviations.iter().zip(&bounds).all(|(d, b)| *d <= 1.1 * b);
    Ok(TrackingReport {
        times,
        deviations,
        bounds,
        slope: slope_v,
        prefactor: icpt.exp(),
        bound_prefactor,
        phase_stability,
        completed,
        exit_time,
        bound_ok,
        slope_ok: slope_v <= -rate + 0.05,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlissOptions {
    pub sample_count: usize,
    pub horizon: f64,
    pub tol: f64,
    pub containment_tol: f64,
    /// Neighborhood radius for the reduced-flow test; defaults to `Δ/2`.
    pub reduced_w_radius: Option<f64>,
    pub reduced_v_radii: Vec<f64>,
    pub reduced_samples: usize,
    pub bisection_steps: usize,
    pub seed: u64,
}

impl Default for PlissOptions {
    fn default() -> Self {
        Self {
            sample_count: 100,
            horizon: 40.0,
            tol: 1e-3,
            containment_tol: 1e-4,
            reduced_w_radius: None,
            reduced_v_radii: vec![],
            reduced_samples: 16,
            bisection_steps: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlissReport {
    pub precondition_met: bool,
    /// Reduced-flow attraction and stability of `A₀`.
    pub reduced: AttractorReport,
    /// Sup over samples of the distance to the lifted attractor.
    pub attractor_curve: Vec<(f64, f64)>,
    /// Sup over samples of `|v − h(s, u)|`.
    pub graph_curve: Vec<(f64, f64)>,
    /// Largest `|v − h(s, u)|` along trajectories started on the graph.
    pub containment: f64,
    pub final_attractor_distance: f64,
    pub final_graph_distance: f64,
    pub verdict: TestVerdict,
    pub notes: Vec<String>,
}

impl PlissReport {
    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }
}

fn distance_to_set(u: &DVector<f64>, a0: &[DVector<f64>]) -> f64 {
    a0.iter().map(|a| (u - a).norm()).fold(f64::INFINITY, f64::min)
}

/// Reduction principle on one chart: `A₀` (u-values, constant in `s`) is
/// tested under the reduced flow, then full-space starts around its lift
/// `(u, h(s, u))` are integrated.
pub fn pliss_check(
    blocked: &BlockedSystem<'_>,
    chart: &ManifoldChart,
    constants: &ReductionConstants,
    a0: &[DVector<f64>],
    opts: &PlissOptions,
) -> Result<PlissReport> {
    let e = chart.e;
    let half = constants.big_delta / 2.0;
    if a0.is_empty() || a0.iter().any(|a| a.len() != e) {
        return Err(Error::Domain("A₀ must be nonempty with u-dimension e".into()));
    }
    for a in a0 {
        if a.norm() > half || chart.eval_row(0, a).norm() > half {
            return Err(Error::Precondition(format!(
                "A₀ sample with |u| = {:.3e} outside the Δ/2 box (Δ = {:.3e})",
                a.norm(),
                constants.big_delta
            )));
        }
    }
    let n = (opts.horizon / chart.ds).round() as usize;
    if n == 0 || n >= chart.n_s {
        return Err(Error::Domain(format!(
            "horizon {} outside the chart span {}",
            opts.horizon,
            chart.span()
        )));
    }
    let checkpoints: Vec<usize> = (1..=40).map(|c| c * n / 40).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut notes = Vec::new();

    // reduced-flow Lyapunov test
    let w = opts.reduced_w_radius.unwrap_or(half);
    let dirs: Vec<(usize, DVector<f64>, f64)> = (0..opts.reduced_samples.max(1))
        .map(|_| {
            let mut dvec = DVector::from_fn(e, |_, _| rng.gen_range(-1.0..1.0));
            while dvec.norm() < 1e-3 {
                dvec = DVector::from_fn(e, |_, _| rng.gen_range(-1.0..1.0));
            }
            (rng.gen_range(0..a0.len()), dvec.normalize(), rng.gen_range(0.05..1.0))
        })
        .collect();
    let reduced_run = |radius_of: &(dyn Fn(f64) -> f64 + Sync)| -> Vec<Vec<f64>> {
        dirs.par_iter()
            .map(|(ai, dir, frac)| {
                let u0 = &a0[*ai] + dir * radius_of(*frac);
                let path = reduced_path(chart, blocked, 0, &u0, n, false);
                path.iter().map(|u| distance_to_set(u, a0)).collect()
            })
            .collect()
    };
    let runs = reduced_run(&|f| f * w);
    let mut reduced_curve: Vec<(f64, f64)> = checkpoints.iter().map(|&c| (c as f64 * chart.ds, 0.0)).collect();
    for r in &runs {
        for (pt, &c) in reduced_curve.iter_mut().zip(&checkpoints) {
            pt.1 = pt.1.max(r[c]);
        }
    }
    let reduced_final = reduced_curve.last().map_or(f64::NAN, |c| c.1);
    let attraction = reduced_final <= opts.tol;
    let radii = if opts.reduced_v_radii.is_empty() {
        vec![w, w / 2.0, w / 4.0]
    } else {
        opts.reduced_v_radii.clone()
    };
    let stays = |r1: f64, r: f64| {
        reduced_run(&|f| f * r1)
            .iter()
            .chain(reduced_run(&|_| r1).iter())
            .all(|d| d.iter().all(|&x| x <= r))
    };
    let mut stability = true;
    let mut rnotes = Vec::new();
    for &r in &radii {
        let r1 = if stays(r, r) {
            r
        } else {
            let (mut lo, mut hi) = (0.0, r);
            for _ in 0..opts.bisection_steps {
                let mid = 0.5 * (lo + hi);
                if stays(mid, r) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        if r1 > 0.0 {
            rnotes.push(format!("stability: r = {r:.3e} admits r1 = {r1:.3e}"));
        } else {
            stability = false;
            rnotes.push(format!("stability violated for r = {r:.3e}"));
        }
    }
    if !attraction {
        rnotes.push(format!(
            "reduced attraction: distance {reduced_final:.3e} > {:.1e} at s = {}",
            opts.tol, opts.horizon
        ));
    }
    let reduced = AttractorReport {
        verdict: TestVerdict::from_bool(attraction && stability),
        convergence_curve: reduced_curve,
        worst_point: None,
        worst_time: None,
        notes: rnotes,
    };
    let precondition_met = reduced.passed();
    if !precondition_met {
        notes.push("precondition unmet: A₀ is not shown attracting under the reduced flow".into());
    }

    // full-space starts in the Δ/2 shell around the lift of A₀
    let k = chart.k;
    let starts: Vec<DVector<f64>> = (0..opts.sample_count)
        .map(|_| {
            let a = &a0[rng.gen_range(0..a0.len())];
            let u = a + DVector::from_fn(e, |_, _| rng.gen_range(-half..half));
            let v = chart.eval_row(0, &u) + DVector::from_fn(k, |_, _| rng.gen_range(-half..half));
            join(&u, &v)
        })
        .collect();
    let lifted_distance = |j: usize, y: &DVector<f64>| {
        let u = y.rows(0, e).into_owned();
        let v = y.rows(e, k).into_owned();
        a0.iter()
            .map(|a| (&u - a).norm() + (&v - chart.eval_row(j, a)).norm())
            .fold(f64::INFINITY, f64::min)
    };
    let graph_distance = |j: usize, y: &DVector<f64>| {
        let u = y.rows(0, e).into_owned();
        (y.rows(e, k) - chart.eval_row(j, &u)).norm()
    };
    let full = starts
        .par_iter()
        .map(|y0| match blocked.integrate(chart.frame_node(0), y0, n, Some(constants.big_delta)) {
            Ok(path) => Ok(checkpoints
                .iter()
                .map(|&c| (lifted_distance(c, &path[c]), graph_distance(c, &path[c])))
                .collect::<Vec<_>>()),
            Err(path) => Err((path.len() - 1) as f64 * chart.ds),
        })
        .collect::<Vec<_>>();
    let mut attractor_curve: Vec<(f64, f64)> = checkpoints.iter().map(|&c| (c as f64 * chart.ds, 0.0)).collect();
    let mut graph_curve = attractor_curve.clone();
    let mut escaped = 0;
    for r in &full {
        match r {
            Ok(vals) => {
                for ((a, g), (da, dg)) in attractor_curve.iter_mut().zip(graph_curve.iter_mut()).zip(vals) {
                    a.1 = a.1.max(*da);
                    g.1 = g.1.max(*dg);
                }
            }
            Err(_) => escaped += 1,
        }
    }
    if escaped > 0 {
        notes.push(format!("{escaped} full-space samples left the Δ box"));
    }
    let final_attractor_distance = attractor_curve.last().map_or(f64::NAN, |c| c.1);
    let final_graph_distance = graph_curve.last().map_or(f64::NAN, |c| c.1);

    // containment: starts on the graph, including A itself
    let on_graph: Vec<DVector<f64>> = a0
        .iter()
        .cloned()
        .chain(starts.iter().map(|y| y.rows(0, e).into_owned()))
        .map(|u| {
            let v = chart.eval_row(0, &u);
            join(&u, &v)
        })
        .collect();
    let containment = on_graph
        .par_iter()
        .map(|y0| match blocked.integrate(chart.frame_node(0), y0, n, Some(constants.big_delta)) {
            Ok(path) => path
                .iter()
                .enumerate()
                .map(|(j, y)| graph_distance(j, y))
                .fold(0.0, f64::max),
            Err(_) => f64::INFINITY,
        })
        .reduce(|| 0.0, f64::max);
    let attraction_ok = escaped == 0 && final_attractor_distance <= opts.tol;
    let containment_ok = containment <= opts.containment_tol;
    if !attraction_ok {
        notes.push(format!(
            "full-space distance to the lifted attractor {final_attractor_distance:.3e} > {:.1e} at s = {}",
            opts.tol, opts.horizon
        ));
    }
    if !containment_ok {
        notes.push(format!("graph containment {containment:.3e} > {:.1e}", opts.containment_tol));
    }
    Ok(PlissReport {
        precondition_met,
        reduced,
        attractor_curve,
        graph_curve,
        containment,
        final_attractor_distance,
        final_graph_distance,
        verdict: TestVerdict::from_bool(precondition_met && attraction_ok && containment_ok),
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks;
    use crate::cocycle::{FlowConfig, FlowPoint, SkewProductFlow};
    use crate::spectrum::{averaged_split, SplitOptions};
    use std::sync::OnceLock;

    const EPS: f64 = 0.05;

    fn split_of(sys: &System) -> AveragedSplit {
        averaged_split(&LinearFamily::from_system(sys), EPS, &SplitOptions::default()).unwrap()
    }

    fn test_cfg() -> ReductionConfig {
        ReductionConfig {
            window: Some(20.0),
            ..Default::default()
        }
    }

    fn x2_star(th1: f64) -> f64 {
        let nu = 1.0 / EPS;
        (th1.cos() + nu * th1.sin()) / (1.0 + nu * nu)
    }

    fn b2_manifold() -> &'static Manifold {
        static M: OnceLock<Manifold> = OnceLock::new();
        M.get_or_init(|| {
            let sys = benchmarks::b2();
            build_manifold(&sys, &split_of(&sys), &BasePoint::origin(2), EPS, 12.0, &test_cfg()).unwrap()
        })
    }

    fn b1_frame(horizon: f64) -> TrajectoryFrame {
        let sys = benchmarks::b1();
        let fam = LinearFamily::from_system(&sys);
        build_frame(&fam, &BasePoint::new(vec![0.4, 1.1]), EPS, horizon, &split_of(&sys), &test_cfg()).unwrap()
    }

    #[test]
    fn cubic_stencil_reproduces_cubics() {
        let f = |x: f64| 0.3 - x + 0.25 * x * x - 0.07 * x * x * x;
        for t in [0.0, 0.4, 3.5, 8.9, 9.6, -0.5] {
            let (i0, w) = cubic_stencil(t, 10);
            let v: f64 = w.iter().enumerate().map(|(j, wj)| wj * f((i0 + j) as f64)).sum();
            assert!((v - f(t)).abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn derivative_is_fourth_order() {
        let err = |h: f64| {
            let vals: Vec<DMatrix<f64>> = (0..=40).map(|i| DMatrix::from_element(1, 1, (i as f64 * h).sin())).collect();
            derivative(&vals, h)
                .iter()
                .enumerate()
                .map(|(i, d)| (d[(0, 0)] - (i as f64 * h).cos()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(0.1) / err(0.05);
        assert!(ratio > 12.0 && ratio < 40.0, "ratio {ratio}");
    }

    #[test]
    fn constant_diagonal_frame_is_identity() {
        let sys = benchmarks::constant_diag01();
        let fam = LinearFamily::from_system(&sys);
        let f = build_frame(&fam, &BasePoint::origin(2), EPS, 2.0, &split_of(&sys), &test_cfg()).unwrap();
        let id = DMatrix::<f64>::identity(2, 2);
        for i in 0..f.len() {
            assert!((&f.sigma[i] - &id).norm() < 1e-8);
            assert!(f.a[i][(0, 0)].abs() < 1e-8);
            assert!((f.b[i][(0, 0)] + 1.0).abs() < 1e-8);
        }
        assert!((f.theta_bound - 1.0).abs() < 1e-8);
        assert!((f.k_bound - 1.0).abs() < 1e-6);
    }

    #[test]
    fn b1_frame_matches_closed_form() {
        let f = b1_frame(6.0);
        for i in (0..f.len()).step_by(97) {
            let x2 = x2_star(f.points[i].angles()[0]);
            let n = (1.0 + x2 * x2).sqrt();
            let exact = DMatrix::from_row_slice(2, 2, &[1.0 / n, 0.0, x2 / n, 1.0]);
            assert!((&f.sigma[i] - &exact).norm() < 1e-6, "node {i}");
            assert!((f.b[i][(0, 0)] + 1.0).abs() < 1e-6);
        }
        assert!(f.offdiag_defect <= f.block_tolerance());
        assert!(f.inverse_defect() < 1e-12);
        assert!(f.projection_defect() < 1e-8);
        assert!(f.theta_bound < 1.1);
        assert!(f.alpha_fit.abs() < 0.3 && f.beta_fit > 0.45);
        let x0 = DVector::from_vec(vec![0.7, -0.4]);
        assert!(f.change_of_variables_error(&x0) < 1e-6);
        let fam = LinearFamily::from_system(&benchmarks::b1());
        assert!(f.projection_spot_check(&fam, -0.375, 40.0, 3).unwrap() < 1e-6);
    }

    #[test]
    fn b1_block_a_is_log_derivative_of_n() {
        let f = b1_frame(3.0);
        let lnn: Vec<f64> = f
            .points
            .iter()
            .map(|p| 0.5 * (1.0 + x2_star(p.angles()[0]).powi(2)).ln())
            .collect();
        for i in (2..f.len() - 2).step_by(53) {
            let fd = (lnn[i + 1] - lnn[i - 1]) / (2.0 * f.step);
            assert!((f.a[i][(0, 0)] - fd).abs() < 1e-4, "node {i}");
        }
    }

    #[test]
    fn nearly_parallel_fibers_are_rejected() {
        let ang = 2f64.to_radians();
        let s = DMatrix::from_row_slice(2, 2, &[1.0, ang.cos(), 0.0, ang.sin()]);
        let l = &s * DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, -1.0])) * s.clone().try_inverse().unwrap();
        let sys = benchmarks::linear_constant(benchmarks::torus_1_sqrt2(), l);
        let fam = LinearFamily::from_system(&sys);
        let err = build_frame(&fam, &BasePoint::origin(2), EPS, 1.0, &split_of(&sys), &test_cfg()).unwrap_err();
        assert!(matches!(err, Error::Frame(_)), "{err:?}");
    }

    #[test]
    fn blocked_system_rejects_wrong_dimension() {
        let f = b1_frame(1.0);
        let sys = benchmarks::unforced_scalar(1.0);
        assert!(matches!(BlockedSystem::new(&f, &sys), Err(Error::Dimension { .. })));
    }

    #[test]
    fn interpolated_g_agrees_with_node_values() {
        let m = b2_manifold();
        let sys = benchmarks::b2();
        let b = BlockedSystem::new(&m.frame, &sys).unwrap();
        let y = DVector::from_vec(vec![0.004, -0.002]);
        for i in [10, 333, 1001] {
            let diff = (b.g(m.frame.s_grid[i], &y) - b.g_node(i, &y)).norm();
            assert!(diff < 1e-12, "node {i}: {diff}");
        }
        let s = m.frame.s_grid[400] + 0.3 * m.frame.step;
        let mid = (b.g_node(400, &y) + b.g_node(401, &y)) * 0.5;
        assert!((b.g(s, &y) - mid).norm() < 1e-8);
    }

    #[test]
    fn linear_field_has_flat_chart() {
        let sys = benchmarks::b1();
        let fam = LinearFamily::from_system(&sys);
        let cfg = test_cfg();
        let f = build_frame(&fam, &BasePoint::origin(2), EPS, 26.0, &split_of(&sys), &cfg).unwrap();
        let b = BlockedSystem::new(&f, &sys).unwrap();
        let chart = graph_transform_h(&b, 0.01, 20.0, 4.0, &cfg).unwrap();
        assert_eq!(chart.sup_norm(), 0.0);
        assert_eq!(chart.iterations, 1);
        let c = choose_constants(&b, Some(&chart), &cfg).unwrap();
        assert_eq!(c.big_delta, cfg.delta / 2.0);
        assert!(c.omega_of_2delta < 1e-6);
    }

    #[test]
    fn b2_constants_are_admissible() {
        let m = b2_manifold();
        let c = &m.constants;
        assert!(c.admissible());
        assert!(c.big_delta < c.delta / 2.0 && c.big_delta > 1e-3);
        let lhs = 4.0 * c.k * c.k * c.omega_of_2delta;
        assert!(lhs <= 2.0 * c.gamma && lhs <= c.beta - c.alpha - c.gamma);
    }

    #[test]
    fn b2_chart_vanishes_to_second_order_at_origin() {
        let c = &b2_manifold().chart;
        assert!(c.origin_value() == 0.0);
        assert!(c.origin_slope() <= 1e-3);
        assert!(c.last_change <= 1e-8);
        assert!(c.sup_norm() > 0.0);
    }

    #[test]
    fn b2_chart_quadratic_coefficient_is_inverse_n_squared() {
        // h(s, u) = u²/N(s)² + O(u³) for B2 in the exact frame
        let m = b2_manifold();
        let c = &m.chart;
        for j in (0..c.n_s).step_by(151) {
            let p = &m.frame.points[c.frame_node(j)];
            let x2 = x2_star(p.angles()[0]);
            let coeff = 1.0 / (1.0 + x2 * x2);
            for u in [c.big_delta / 2.0, -c.big_delta / 2.0, c.big_delta / 8.0] {
                let ratio = c.eval_row(j, &DVector::from_element(1, u))[0] / (u * u);
                assert!((ratio - coeff).abs() < 0.02 * coeff + 2.0 * u.abs(), "row {j}, u {u}: {ratio} vs {coeff}");
            }
        }
    }

    #[test]
    fn b2_chart_is_invariant_under_an_independent_integrator() {
        let m = b2_manifold();
        let c = &m.chart;
        let f = &m.frame;
        let flow = SkewProductFlow::new(benchmarks::b2(), FlowConfig::default()).unwrap();
        for (j, u0) in [(0usize, 0.003), (400, -0.002), (1000, 0.0035)] {
            let i = c.frame_node(j);
            let u = DVector::from_element(1, u0);
            let y = join(&u, &c.eval_row(j, &u));
            let z = FlowPoint::new(f.points[i].clone(), &f.sigma[i] * y);
            let steps = 100;
            let out = flow.fast_evolve(&z, steps as f64 * c.ds, EPS).unwrap();
            let y1 = &f.sigma_inv[i + 2 * steps] * &out.x;
            let gap = (y1[1] - c.eval_row(j + steps, &DVector::from_element(1, y1[0]))[0]).abs();
            assert!(gap < 1e-9, "row {j}: {gap}");
        }
        let b = BlockedSystem::new(f, &benchmarks::b2()).unwrap();
        assert!(invariance_defect(c, &b, 2) <= 1e-5);
    }

    #[test]
    fn partial_s_residual_is_small_and_second_order() {
        let m = b2_manifold();
        let b = BlockedSystem::new(&m.frame, &benchmarks::b2()).unwrap();
        let fine = check_partial_s_h(&m.chart, &b);
        let coarse = check_partial_s_h(&m.chart.coarsen(2), &b);
        assert!(fine <= 1e-2, "residual {fine}");
        let ratio = coarse / fine;
        assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio}");
    }

    #[test]
    fn graph_transform_reports_non_convergence() {
        let m = b2_manifold();
        let b = BlockedSystem::new(&m.frame, &benchmarks::b2()).unwrap();
        let cfg = ReductionConfig {
            max_iter: 1,
            ..test_cfg()
        };
        let err = graph_transform_h(&b, m.constants.big_delta, 20.0, 2.0, &cfg).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { iterations: 1, .. }), "{err:?}");
        let err = graph_transform_h(&b, m.constants.big_delta, 20.0, 1e3, &cfg).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn off_manifold_solutions_are_tracked_exponentially() {
        let m = b2_manifold();
        let c = &m.chart;
        let b = BlockedSystem::new(&m.frame, &benchmarks::b2()).unwrap();
        let u0 = DVector::from_element(1, c.big_delta / 2.0);
        let v0 = c.eval_row(0, &u0) + DVector::from_element(1, c.big_delta / 2.0);
        let r = asymptotic_phase(&b, c, &m.constants, &u0, &v0, 10.0).unwrap();
        assert!(r.completed);
        assert!(r.bound_ok);
        assert!(r.slope_ok && r.slope <= -(m.constants.beta - m.constants.gamma));
        assert!(r.phase_stability <= 1e-5);
        let on = asymptotic_phase(&b, c, &m.constants, &u0, &c.eval_row(0, &u0), 10.0).unwrap();
        assert!(on.deviations.iter().all(|d| *d <= 1e-5));
        assert!(asymptotic_phase(&b, c, &m.constants, &u0, &v0, 100.0).is_err());
    }

    #[test]
    fn pliss_gate_and_containment() {
        let m = b2_manifold();
        let c = &m.chart;
        let b = BlockedSystem::new(&m.frame, &benchmarks::b2()).unwrap();
        let far = [DVector::from_element(1, c.big_delta)];
        let err = pliss_check(&b, c, &m.constants, &far, &PlissOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
        let opts = PlissOptions {
            sample_count: 6,
            reduced_samples: 4,
            horizon: 10.0,
            ..Default::default()
        };
        let r = pliss_check(&b, c, &m.constants, &[DVector::zeros(1)], &opts).unwrap();
        assert!(r.containment <= 1e-4);
        assert!(r.final_graph_distance <= 1e-3);
        let d = &r.attractor_curve;
        assert!(d.last().unwrap().1 < d[0].1);
    }

    #[test]
    fn pliss_on_linear_field_is_precondition_unmet() {
        let sys = benchmarks::b1();
        let fam = LinearFamily::from_system(&sys);
        let cfg = test_cfg();
        let f = build_frame(&fam, &BasePoint::origin(2), EPS, 26.0, &split_of(&sys), &cfg).unwrap();
        let b = BlockedSystem::new(&f, &sys).unwrap();
        let chart = graph_transform_h(&b, 0.01, 20.0, 4.0, &cfg).unwrap();
        let consts = choose_constants(&b, Some(&chart), &cfg).unwrap();
        let opts = PlissOptions {
            sample_count: 4,
            reduced_samples: 4,
            horizon: 3.0,
            ..Default::default()
        };
        let r = pliss_check(&b, &chart, &consts, &[DVector::zeros(1)], &opts).unwrap();
        assert!(!r.precondition_met);
        assert!(!r.passed());
    }
}

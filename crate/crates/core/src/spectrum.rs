//! Rapidly oscillating linear families `dx/ds = l_ε(τ_{s/|ε|}(p))x`, finite
//! window exponential-dichotomy tests, the dynamical spectrum, dichotomy
//! projections and the averaged split of `l̄₀`.
//!
//! Exponents come from the discrete QR method: an orthonormal frame is
//! carried along by RK4 and re-orthonormalized every step, accumulating
//! `log|R_ii|`. Shifting by `−λI` commutes with the propagator, so exponents
//! of the translated family are those at `λ = 0` minus `λ`; the ED verdicts
//! and the spectrum bisection reuse one set of hulls.

use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::base_flow::{smooth_ergodic_average, BaseFlow, BasePoint, TWO_PI};
use crate::cocycle::System;
use crate::error::{Error, Result};

type MatrixFn = dyn Fn(&BasePoint, f64) -> DMatrix<f64> + Send + Sync;

/// `l_ε(p)` together with its base flow.
#[derive(Clone)]
pub struct LinearFamily {
    base: BaseFlow,
    dim: usize,
    l: Arc<MatrixFn>,
}

impl std::fmt::Debug for LinearFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearFamily")
            .field("base", &self.base)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl LinearFamily {
    pub fn new<L>(base: BaseFlow, dim: usize, l: L) -> Self
    where
        L: Fn(&BasePoint, f64) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self {
            base,
            dim,
            l: Arc::new(l),
        }
    }

    /// `l_ε(p) = ∂ₓf(p, 0, ε)`.
    pub fn from_system(sys: &System) -> Self {
        let field = Arc::clone(&sys.field);
        let d = sys.dim();
        Self::new(sys.base.clone(), d, move |p, e| field.jacobian_x(p, &DVector::zeros(d), e))
    }

    pub fn base(&self) -> &BaseFlow {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, p: &BasePoint, eps: f64) -> DMatrix<f64> {
        (self.l)(p, eps)
    }

    /// `|l|₀`: largest operator norm over `samples` base points.
    pub fn sup_norm(&self, eps: f64, samples: usize) -> f64 {
        sample_points(&self.base, samples)
            .iter()
            .map(|p| self.eval(p, eps).svd(false, false).singular_values.max())
            .fold(0.0, f64::max)
    }

    /// `−λI + l_ε(τ_{s/|ε|}(p))`.
    pub(crate) fn generator(&self, p: &BasePoint, eps: f64, lambda: f64, s: f64) -> DMatrix<f64> {
        let q = self.base.advance_unchecked(p, s / eps.abs());
        let mut a = self.eval(&q, eps);
        for i in 0..self.dim {
            a[(i, i)] -= lambda;
        }
        a
    }

    pub(crate) fn rk4_step(&self, p: &BasePoint, eps: f64, lambda: f64, s: f64, y: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
        let a0 = self.generator(p, eps, lambda, s);
        let am = self.generator(p, eps, lambda, s + 0.5 * h);
        let a1 = self.generator(p, eps, lambda, s + h);
        let k1 = &a0 * y;
        let k2 = &am * (y + &k1 * (0.5 * h));
        let k3 = &am * (y + &k2 * (0.5 * h));
        let k4 = &a1 * (y + &k3 * h);
        y + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0)
    }
}

/// Deterministic well-spread base points (Kronecker sequence).
pub fn sample_points(base: &BaseFlow, n: usize) -> Vec<BasePoint> {
    let m = base.dim();
    // generalized golden ratio for dimension m
    let mut phi = 2.0f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (m as f64 + 1.0));
    }
    let gens: Vec<f64> = (1..=m).map(|k| phi.powi(-(k as i32))).collect();
    (0..n)
        .map(|j| {
            BasePoint::new(
                gens.iter()
                    .map(|g| ((0.5 + g * j as f64).fract()) * TWO_PI)
                    .collect::<Vec<_>>(),
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumConfig {
    /// ED window length `T` in fast time.
    pub window: f64,
    /// Uniform gap margin around zero.
    pub margin: f64,
    /// RK4 step in fast time; `None` picks `min(|ε|/20, 0.05)`.
    pub step: Option<f64>,
    pub n_starts: usize,
    pub p_samples: usize,
    pub bisect_tol: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            window: 200.0,
            margin: 0.02,
            step: None,
            n_starts: 2,
            p_samples: 8,
            bisect_tol: 1e-3,
        }
    }
}

impl SpectrumConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window > 0.0) || !(self.margin > 0.0) || !(self.bisect_tol > 0.0) {
            return Err(Error::Config("window, margin and bisect_tol must be positive".into()));
        }
        if self.n_starts == 0 || self.p_samples == 0 {
            return Err(Error::Config("need at least one start and one base sample".into()));
        }
        if let Some(h) = self.step {
            if !(h > 0.0) {
                return Err(Error::Config("step must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn step_for(&self, eps: f64) -> f64 {
        self.step.unwrap_or((eps.abs() / 20.0).min(0.05))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps == 0.0 || !eps.is_finite() {
        return Err(Error::Domain("the fast-time family requires ε ≠ 0".into()));
    }
    Ok(())
}

/// `Φ = e^{log_scale}·matrix`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledMatrix {
    pub matrix: DMatrix<f64>,
    pub log_scale: f64,
}

impl ScaledMatrix {
    /// Unscaled value; overflows to infinity when `log_scale` is huge.
    pub fn value(&self) -> DMatrix<f64> {
        &self.matrix * self.log_scale.exp()
    }
}

/// Fundamental matrix of `dΦ/ds = [−λI + l_ε(τ_{s/|ε|}(p))]Φ`, `Φ(0) = I`,
/// by fixed-step RK4. Norms beyond `1e100` (or below `1e-100`) are folded
/// into `log_scale`.
pub fn propagator(
    family: &LinearFamily,
    p: &BasePoint,
    eps: f64,
    lambda: f64,
    s: f64,
    cfg: &SpectrumConfig,
) -> Result<ScaledMatrix> {
    check_eps(eps)?;
    family.base.check_dim(p)?;
    if !s.is_finite() {
        return Err(Error::Domain("time must be finite".into()));
    }
    let h0 = cfg.step_for(eps);
    let n = (s.abs() / h0).ceil() as usize;
    let mut phi = DMatrix::identity(family.dim, family.dim);
    let mut log_scale = 0.0;
    if n == 0 {
        return Ok(ScaledMatrix { matrix: phi, log_scale });
    }
    let h = s / n as f64;
    for k in 0..n {
        phi = family.rk4_step(p, eps, lambda, k as f64 * h, &phi, h);
        let norm = phi.norm();
        if !norm.is_finite() {
            return Err(Error::Integration(format!("propagator blew up at s = {}", k as f64 * h)));
        }
        if !(1e-100..=1e100).contains(&norm) {
            phi /= norm;
            log_scale += norm.ln();
        }
    }
    Ok(ScaledMatrix { matrix: phi, log_scale })
}

/// Discrete-QR exponents over `[s0, s0 + T]`, sorted descending.
fn qr_exponents(family: &LinearFamily, p: &BasePoint, eps: f64, s0: f64, window: f64, h0: f64) -> Result<Vec<f64>> {
    let d = family.dim;
    let n = (window / h0).ceil() as usize;
    let h = window / n as f64;
    let mut q = DMatrix::identity(d, d);
    let mut sums = vec![0.0; d];
    for k in 0..n {
        let y = family.rk4_step(p, eps, 0.0, s0 + k as f64 * h, &q, h);
        let qr = y.qr();
        let r = qr.r();
        let mut qn = qr.q();
        for i in 0..d {
            let rii = r[(i, i)];
            if !(rii.abs() > 0.0) || !rii.is_finite() {
                return Err(Error::Integration("degenerate frame in exponent computation".into()));
            }
            sums[i] += rii.abs().ln();
            if rii < 0.0 {
                qn.column_mut(i).neg_mut();
            }
        }
        q = qn;
    }
    let mut ex: Vec<f64> = sums.into_iter().map(|v| v / window).collect();
    ex.sort_by(|a, b| b.total_cmp(a));
    Ok(ex)
}

/// Per-index exponent hulls `[lo, hi]`, index 0 the largest.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentHulls {
    pub hulls: Vec<(f64, f64)>,
}

impl ExponentHulls {
    /// Hulls of the `λ`-translated family.
    pub fn shifted(&self, lambda: f64) -> ExponentHulls {
        ExponentHulls {
            hulls: self.hulls.iter().map(|&(lo, hi)| (lo - lambda, hi - lambda)).collect(),
        }
    }

    /// Every hull stays at distance `margin` from zero.
    pub fn is_dichotomy(&self, margin: f64) -> bool {
        self.hulls.iter().all(|&(lo, hi)| hi < -margin || lo > margin)
    }

    pub fn stable_count(&self) -> usize {
        self.hulls.iter().filter(|h| h.1 < 0.0).count()
    }

    fn merge(runs: impl IntoIterator<Item = Vec<f64>>) -> Option<Self> {
        let mut hulls: Option<Vec<(f64, f64)>> = None;
        for ex in runs {
            let h = hulls.get_or_insert_with(|| ex.iter().map(|&v| (v, v)).collect());
            for (hh, v) in h.iter_mut().zip(&ex) {
                hh.0 = hh.0.min(*v);
                hh.1 = hh.1.max(*v);
            }
        }
        hulls.map(|hulls| ExponentHulls { hulls })
    }
}

/// Exponent hulls of the `λ`-translated family over `n_starts` consecutive
/// windows of length `T` from each of `points`.
pub fn growth_exponents(
    family: &LinearFamily,
    points: &[BasePoint],
    eps: f64,
    lambda: f64,
    window: f64,
    n_starts: usize,
    cfg: &SpectrumConfig,
) -> Result<ExponentHulls> {
    check_eps(eps)?;
    if !(window > 0.0) || n_starts == 0 || points.is_empty() {
        return Err(Error::Domain("need T > 0, n_starts ≥ 1 and base points".into()));
    }
    for p in points {
        family.base.check_dim(p)?;
    }
    let h0 = cfg.step_for(eps);
    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|i| (0..n_starts).map(move |j| (i, j))).collect();
    let runs = jobs
        .par_iter()
        .map(|&(i, j)| qr_exponents(family, &points[i], eps, j as f64 * window, window, h0))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExponentHulls::merge(runs).expect("nonempty").shifted(lambda))
}

/// Unshifted hulls over the configured base samples.
pub fn sampled_hulls(family: &LinearFamily, eps: f64, cfg: &SpectrumConfig) -> Result<ExponentHulls> {
    cfg.validate()?;
    let points = sample_points(&family.base, cfg.p_samples);
    growth_exponents(family, &points, eps, 0.0, cfg.window, cfg.n_starts, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdVerdict {
    Dichotomy,
    NoDichotomy,
}

/// Finite-window ED test of the `λ`-translated family.
pub fn ed_test(family: &LinearFamily, lambda: f64, eps: f64, cfg: &SpectrumConfig) -> Result<EdVerdict> {
    let hulls = sampled_hulls(family, eps, cfg)?;
    Ok(ed_from_hulls(&hulls, lambda, cfg.margin))
}

pub fn ed_from_hulls(hulls: &ExponentHulls, lambda: f64, margin: f64) -> EdVerdict {
    if hulls.shifted(lambda).is_dichotomy(margin) {
        EdVerdict::Dichotomy
    } else {
        EdVerdict::NoDichotomy
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    /// Sorted, disjoint closed intervals.
    pub intervals: Vec<(f64, f64)>,
    pub resolution: f64,
    pub window: f64,
    pub hulls: ExponentHulls,
    /// `(λ, dichotomy?)` at every probe, in probe order.
    pub probes: Vec<(f64, bool)>,
}

impl SpectrumEstimate {
    /// Intervals inside `(−α, α)` and those below `−β`; `None` when some
    /// interval fits neither group.
    pub fn split(&self, alpha: f64, beta: f64) -> Option<(Vec<(f64, f64)>, Vec<(f64, f64)>)> {
        let mut center = Vec::new();
        let mut stable = Vec::new();
        for &iv in &self.intervals {
            if iv.0 > -alpha && iv.1 < alpha {
                center.push(iv);
            } else if iv.1 < -beta {
                stable.push(iv);
            } else {
                return None;
            }
        }
        Some((center, stable))
    }
}

/// Bisects the ED boundaries of `λ ↦ ed_from_hulls(hulls, λ)` inside
/// `range` and returns the non-ED set with the margin removed.
pub fn spectrum_from_hulls(
    hulls: &ExponentHulls,
    range: (f64, f64),
    margin: f64,
    bisect_tol: f64,
) -> Result<(Vec<(f64, f64)>, Vec<(f64, bool)>)> {
    let ed = |l: f64| ed_from_hulls(hulls, l, margin) == EdVerdict::Dichotomy;
    let (a, b) = range;
    let lo = hulls.hulls.iter().map(|h| h.0).fold(f64::INFINITY, f64::min);
    let hi = hulls.hulls.iter().map(|h| h.1).fold(f64::NEG_INFINITY, f64::max);
    if !(a < lo - margin && b > hi + margin) || !ed(a) || !ed(b) {
        return Err(Error::Range(format!(
            "λ range [{a}, {b}] does not bracket the exponent hulls {:?}",
            hulls.hulls
        )));
    }
    // non-ED runs have width ≥ 2·margin, so a scan at margin/2 sees them all
    let n = ((b - a) / (0.5 * margin)).ceil() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    let flags: Vec<bool> = grid.iter().map(|&l| ed(l)).collect();
    let mut probes: Vec<(f64, bool)> = grid.iter().copied().zip(flags.iter().copied()).collect();
    let bisect = |mut lo: f64, mut hi: f64, lo_flag: bool, probes: &mut Vec<(f64, bool)>| {
        while hi - lo > bisect_tol {
            let mid = 0.5 * (lo + hi);
            let f = ed(mid);
            probes.push((mid, f));
            if f == lo_flag {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let mut raw = Vec::new();
    let mut start = None;
    for i in 0..n {
        if flags[i] && !flags[i + 1] {
            start = Some(bisect(grid[i], grid[i + 1], true, &mut probes));
        } else if !flags[i] && flags[i + 1] {
            let end = bisect(grid[i], grid[i + 1], false, &mut probes);
            raw.push((start.take().expect("run opened"), end));
        }
    }
    let intervals = raw
        .into_iter()
        .map(|(lo, hi)| {
            let (l, h) = (lo + margin, hi - margin);
            if l <= h {
                (l, h)
            } else {
                let m = 0.5 * (lo + hi);
                (m, m)
            }
        })
        .collect();
    Ok((intervals, probes))
}

/// `Σ(ε)`: the `λ` for which the translated family has no ED on the window.
/// With `range = None` the hulls widened by one are used.
pub fn dynamical_spectrum(
    family: &LinearFamily,
    eps: f64,
    range: Option<(f64, f64)>,
    cfg: &SpectrumConfig,
) -> Result<SpectrumEstimate> {
    let hulls = sampled_hulls(family, eps, cfg)?;
    let lo = hulls.hulls.iter().map(|h| h.0).fold(f64::INFINITY, f64::min);
    let hi = hulls.hulls.iter().map(|h| h.1).fold(f64::NEG_INFINITY, f64::max);
    let range = range.unwrap_or((lo - 1.0, hi + 1.0));
    let (intervals, probes) = spectrum_from_hulls(&hulls, range, cfg.margin, cfg.bisect_tol)?;
    Ok(SpectrumEstimate {
        intervals,
        resolution: cfg.bisect_tol,
        window: cfg.window,
        hulls,
        probes,
    })
}

/// Carries the column span of `x` from fast time `s0` to `s1` along the
/// trajectory of `p`, re-orthonormalizing every step.
pub fn transport_subspace(
    family: &LinearFamily,
    p: &BasePoint,
    eps: f64,
    s0: f64,
    s1: f64,
    x: &DMatrix<f64>,
    step: f64,
) -> DMatrix<f64> {
    let n = ((s1 - s0).abs() / step).ceil().max(1.0) as usize;
    let h = (s1 - s0) / n as f64;
    let mut y = orthonormalize(x);
    for k in 0..n {
        y = orthonormalize(&family.rk4_step(p, eps, 0.0, s0 + k as f64 * h, &y, h));
    }
    y
}

pub(crate) fn orthonormalize(x: &DMatrix<f64>) -> DMatrix<f64> {
    let k = x.ncols();
    let qr = x.clone().qr();
    let r = qr.r();
    let mut q = qr.q().columns(0, k).into_owned();
    for i in 0..k {
        if r[(i, i)] < 0.0 {
            q.column_mut(i).neg_mut();
        }
    }
    q
}

/// Fixed pseudo-random orthonormal `d×k` start frame.
pub(crate) fn generic_frame(d: usize, k: usize, salt: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ salt);
    orthonormalize(&DMatrix::from_fn(d, k, |_, _| rng.gen_range(-1.0..1.0)))
}

/// Projection built from complementary bases: zero on `span(u)`, identity on
/// `span(s)`.
pub fn projection_from_bases(u: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = u.nrows();
    let (e, k) = (u.ncols(), s.ncols());
    if e + k != d {
        return Err(Error::Dimension { expected: d, got: e + k });
    }
    let mut b = DMatrix::zeros(d, d);
    b.columns_mut(0, e).copy_from(u);
    b.columns_mut(e, k).copy_from(s);
    let sv = b.clone().svd(false, false).singular_values;
    // subspace angle below 5 degrees
    if sv.min() < (5.0f64).to_radians().sin() * 0.5 {
        return Err(Error::Resolution(format!(
            "center and stable subspaces nearly parallel (σ_min = {:.2e})",
            sv.min()
        )));
    }
    let binv = b.clone().try_inverse().ok_or_else(|| Error::Resolution("singular subspace basis".into()))?;
    let mut dg = DMatrix::zeros(d, d);
    for i in e..d {
        dg[(i, i)] = 1.0;
    }
    Ok(&b * dg * binv)
}

/// Stable and complementary subspaces at `p` together with the projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Dichotomy {
    pub projection: DMatrix<f64>,
    pub center_basis: DMatrix<f64>,
    pub stable_basis: DMatrix<f64>,
    /// Window exponents of the translated family at `p`, descending.
    pub exponents: Vec<f64>,
}

/// `Q_{p,ε}`: projection onto the stable subspace along the complementary one.
///
/// The stable subspace is the dominant singular subspace of the backward
/// propagator on `[0, T]` (the small right-singular directions of the forward
/// one), obtained by carrying a generic frame back from `s = T`; the
/// complement comes from carrying a generic frame forward from `s = −T`.
pub fn dichotomy(
    family: &LinearFamily,
    p: &BasePoint,
    eps: f64,
    lambda_star: f64,
    window: f64,
    cfg: &SpectrumConfig,
) -> Result<Dichotomy> {
    check_eps(eps)?;
    family.base.check_dim(p)?;
    if !(window > 0.0) {
        return Err(Error::Domain("window must be positive".into()));
    }
    let h = cfg.step_for(eps);
    let d = family.dim;
    let exponents: Vec<f64> = qr_exponents(family, p, eps, 0.0, window, h)?
        .into_iter()
        .map(|v| v - lambda_star)
        .collect();
    if let Some(v) = exponents.iter().find(|v| v.abs() < cfg.margin) {
        return Err(Error::Resolution(format!(
            "exponent {v:.3e} within the margin at λ* = {lambda_star}; increase T (now {window})"
        )));
    }
    let k = exponents.iter().filter(|&&v| v < 0.0).count();
    let e = d - k;
    let stable_basis = if k > 0 {
        transport_subspace(family, p, eps, window, 0.0, &generic_frame(d, k, 1), h)
    } else {
        DMatrix::zeros(d, 0)
    };
    let center_basis = if e > 0 {
        transport_subspace(family, p, eps, -window, 0.0, &generic_frame(d, e, 2), h)
    } else {
        DMatrix::zeros(d, 0)
    };
    let projection = projection_from_bases(&center_basis, &stable_basis)?;
    Ok(Dichotomy {
        projection,
        center_basis,
        stable_basis,
        exponents,
    })
}

pub fn dichotomy_projection(
    family: &LinearFamily,
    p: &BasePoint,
    eps: f64,
    lambda_star: f64,
    window: f64,
    cfg: &SpectrumConfig,
) -> Result<DMatrix<f64>> {
    dichotomy(family, p, eps, lambda_star, window, cfg).map(|d| d.projection)
}

/// `Q_{p,ε}` over a set of base points.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionField {
    pub eps: f64,
    pub points: Vec<BasePoint>,
    pub projections: Vec<DMatrix<f64>>,
}

impl ProjectionField {
    /// Largest `|Q² − Q|`.
    pub fn idempotency_defect(&self) -> f64 {
        self.projections.iter().map(|q| (q * q - q).norm()).fold(0.0, f64::max)
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.projections.iter().map(|q| q.trace().round() as usize).collect()
    }

    /// `sup_p |Q_{p,ε} − q0|` in the operator norm.
    pub fn deviation_from(&self, q0: &DMatrix<f64>) -> f64 {
        self.projections.iter().map(|q| op_norm(&(q - q0))).fold(0.0, f64::max)
    }
}

pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

pub fn projection_field(
    family: &LinearFamily,
    points: &[BasePoint],
    eps: f64,
    lambda_star: f64,
    window: f64,
    cfg: &SpectrumConfig,
) -> Result<ProjectionField> {
    let projections = points
        .par_iter()
        .map(|p| dichotomy_projection(family, p, eps, lambda_star, window, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProjectionField {
        eps,
        points: points.to_vec(),
        projections,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitOptions {
    pub alpha: f64,
    pub beta: f64,
    pub horizon: f64,
    pub step: f64,
}

impl Default for SplitOptions {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            beta: 0.5,
            horizon: 400.0,
            step: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragedSplit {
    pub l0_bar: DMatrix<f64>,
    pub sigma0: Vec<Complex<f64>>,
    pub sigma_minus: Vec<Complex<f64>>,
    pub l0_basis: DMatrix<f64>,
    pub lminus_basis: DMatrix<f64>,
    /// Projection with image `L⁽⁻⁾` and kernel `L⁽⁰⁾`.
    pub q0: DMatrix<f64>,
    pub e: usize,
    pub alpha: f64,
    pub beta: f64,
}

/// Matrix sign function by the Newton iteration `S ← (S + S⁻¹)/2`.
fn matrix_sign(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut s = m.clone();
    for _ in 0..100 {
        let inv = s
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Hypothesis("eigenvalue on the split line".into()))?;
        let next = (&s + inv) * 0.5;
        let change = (&next - &s).norm();
        s = next;
        if change <= 1e-14 * (1.0 + s.norm()) {
            return Ok(s);
        }
    }
    Err(Error::Hypothesis("sign iteration did not settle".into()))
}

fn column_space(q: &DMatrix<f64>, rank: usize) -> DMatrix<f64> {
    let svd = q.clone().svd(true, false);
    let u = svd.u.expect("requested");
    let mut idx: Vec<usize> = (0..q.nrows()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    DMatrix::from_fn(q.nrows(), rank, |i, j| u[(i, idx[j])])
}

/// Split of an averaged matrix into the center and stable groups.
pub fn split_matrix(l0_bar: DMatrix<f64>, alpha: f64, beta: f64) -> Result<AveragedSplit> {
    if !(alpha > 0.0 && beta > alpha) {
        return Err(Error::Config(format!("need 0 < α < β, got α = {alpha}, β = {beta}")));
    }
    let d = l0_bar.nrows();
    let eig = l0_bar.clone().complex_eigenvalues();
    let mut sigma0 = Vec::new();
    let mut sigma_minus = Vec::new();
    for &z in eig.iter() {
        if z.re.abs() < alpha {
            sigma0.push(z);
        } else if z.re < -beta {
            sigma_minus.push(z);
        } else {
            return Err(Error::Hypothesis(format!(
                "eigenvalue {z} of the averaged linear part is in neither (−α, α) nor Re < −β"
            )));
        }
    }
    if sigma0.is_empty() || sigma_minus.is_empty() {
        return Err(Error::Hypothesis("both eigenvalue groups must be nonempty".into()));
    }
    let kappa = 0.5 * (alpha + beta);
    let shifted = &l0_bar + DMatrix::identity(d, d) * kappa;
    let sign = matrix_sign(&shifted)?;
    let q0 = (DMatrix::identity(d, d) - sign) * 0.5;
    let e = sigma0.len();
    let l0_basis = column_space(&(DMatrix::identity(d, d) - &q0), e);
    let lminus_basis = column_space(&q0, d - e);
    Ok(AveragedSplit {
        l0_bar,
        sigma0,
        sigma_minus,
        l0_basis,
        lminus_basis,
        q0,
        e,
        alpha,
        beta,
    })
}

/// `l̄_ε` as the ergodic average of `∂ₓf(·, 0, ε)` and its split.
pub fn averaged_split(family: &LinearFamily, eps: f64, opts: &SplitOptions) -> Result<AveragedSplit> {
    let d = family.dim;
    let p0 = BasePoint::origin(family.base.dim());
    let avg = smooth_ergodic_average(
        &family.base,
        |p| DVector::from_column_slice(family.eval(p, eps).as_slice()),
        &p0,
        opts.horizon,
        opts.step,
    )?;
    split_matrix(DMatrix::from_column_slice(d, d, avg.as_slice()), opts.alpha, opts.beta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QContinuityTable {
    /// `(ε, sup_p |Q_{p,ε} − Q₀|)`.
    pub rows: Vec<(f64, f64)>,
    pub passed: bool,
}

/// `sup_p |Q_{p,ε} − Q₀|` for decreasing `ε`.
pub fn q_continuity_scan(
    family: &LinearFamily,
    eps_list: &[f64],
    points: &[BasePoint],
    lambda_star: f64,
    window: f64,
    q0: &DMatrix<f64>,
    cfg: &SpectrumConfig,
) -> Result<QContinuityTable> {
    if eps_list.is_empty() || eps_list.iter().any(|&e| !(e > 0.0)) || eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Domain("ε list must be positive and strictly decreasing".into()));
    }
    let rows = eps_list
        .iter()
        .map(|&e| {
            projection_field(family, points, e, lambda_star, window, cfg).map(|f| (e, f.deviation_from(q0)))
        })
        .collect::<Result<Vec<_>>>()?;
    let last = rows.last().expect("nonempty").1;
    let passed = rows.iter().all(|r| r.1 >= last);
    Ok(QContinuityTable { rows, passed })
}

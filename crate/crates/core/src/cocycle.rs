//! Skew-product local flows on `𝔓 × ℝᵈ` generated by vector-field families.
//!
//! The base component always moves by the exact torus rotation; only the
//! fiber component is integrated numerically. Leaving the ball of radius
//! `blowup_radius` is reported as [`Error::Escape`], which stands in for the
//! boundary of the maximal domain of the local flow.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::base_flow::{base_metric_unchecked, BaseFlow, BasePoint};
use crate::error::{Error, Result};
use crate::ode::{self, OdeOptions, Outcome, Scheme};

/// A family `f(p, x, ε)` of vector fields on `ℝᵈ` indexed by base points.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, p: &BasePoint, x: &DVector<f64>, eps: f64) -> DVector<f64>;

    /// `∂ₓf(p, x, ε)`. The default is a five-point central difference with
    /// step `1e-5·(1 + |x|)`.
    fn jacobian_x(&self, p: &BasePoint, x: &DVector<f64>, eps: f64) -> DMatrix<f64> {
        fd_jacobian(|y| self.eval(p, y, eps), x)
    }

    /// Optional uniform Lipschitz hint, informational only.
    fn lipschitz_hint(&self) -> Option<f64> {
        None
    }

    /// Whether `f(p, 0, ε) = 0` holds by construction.
    fn origin_is_equilibrium(&self) -> bool {
        false
    }
}

/// Five-point central-difference Jacobian.
pub fn fd_jacobian<F>(f: F, x: &DVector<f64>) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let d = x.len();
    let h = 1e-5 * (1.0 + x.norm());
    let f0 = f(x);
    let mut jac = DMatrix::zeros(f0.len(), d);
    let mut y = x.clone();
    for j in 0..d {
        let xj = x[j];
        let mut at = |off: f64| {
            y[j] = xj + off;
            f(&y)
        };
        let fp2 = at(2.0 * h);
        let fp1 = at(h);
        let fm1 = at(-h);
        let fm2 = at(-2.0 * h);
        y[j] = xj;
        let col = (fm2 - fp2 + (fp1 - fm1) * 8.0) / (12.0 * h);
        jac.set_column(j, &col);
    }
    jac
}

/// Checks the analytic Jacobian against finite differences at one probe;
/// returns the relative discrepancy.
pub fn jacobian_discrepancy(field: &dyn VectorField, p: &BasePoint, x: &DVector<f64>, eps: f64) -> f64 {
    let analytic = field.jacobian_x(p, x, eps);
    let numeric = fd_jacobian(|y| field.eval(p, y, eps), x);
    (&analytic - &numeric).norm() / (1.0 + analytic.norm())
}

/// A base flow paired with a vector-field family.
#[derive(Clone)]
pub struct System {
    pub base: BaseFlow,
    pub field: Arc<dyn VectorField>,
}

impl System {
    pub fn new(base: BaseFlow, field: Arc<dyn VectorField>) -> Self {
        Self { base, field }
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    /// Linear part `l_ε(p) = ∂ₓf(p, 0, ε)`.
    pub fn linear_part(&self, p: &BasePoint, eps: f64) -> DMatrix<f64> {
        self.field.jacobian_x(p, &DVector::zeros(self.dim()), eps)
    }
}

impl std::fmt::Debug for System {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("System")
            .field("base", &self.base)
            .field("dim", &self.field.dim())
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntegratorKind {
    FixedRk4,
    AdaptiveRk45,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    pub integrator: IntegratorKind,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub blowup_radius: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            integrator: IntegratorKind::AdaptiveRk45,
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_step: 0.1,
            blowup_radius: 1e3,
        }
    }
}

impl FlowConfig {
    pub fn fixed_rk4(step: f64) -> Self {
        Self {
            integrator: IntegratorKind::FixedRk4,
            max_step: step,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !ok(self.rel_tol) || !ok(self.abs_tol) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if !ok(self.max_step) {
            return Err(Error::Config("max_step must be positive".into()));
        }
        if !ok(self.blowup_radius) {
            return Err(Error::Config("blowup_radius must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn ode_options(&self) -> OdeOptions {
        OdeOptions {
            scheme: match self.integrator {
                IntegratorKind::FixedRk4 => Scheme::FixedRk4,
                IntegratorKind::AdaptiveRk45 => Scheme::DormandPrince,
            },
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            blowup_radius: Some(self.blowup_radius),
            ..Default::default()
        }
    }
}

/// A point `z = (p, x)` of `𝔓 × ℝᵈ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPoint {
    pub p: BasePoint,
    pub x: DVector<f64>,
}

impl FlowPoint {
    pub fn new(p: BasePoint, x: DVector<f64>) -> Self {
        Self { p, x }
    }
}

/// Product metric `d(z₁, z₂) = d_𝔓(p₁, p₂) + |x₁ − x₂|`.
pub fn flow_distance(a: &FlowPoint, b: &FlowPoint) -> f64 {
    base_metric_unchecked(&a.p, &b.p) + (&a.x - &b.x).norm()
}

/// Time parametrization for [`SkewProductFlow::evolve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeForm {
    /// `x' = f(τ_t(p), x, 0)`.
    Slow,
    /// `x' = |ε| f(τ_t(p), x, ε)`.
    Scaled(f64),
}

/// The skew-product local flow `τ̃` induced by a [`System`].
#[derive(Debug, Clone)]
pub struct SkewProductFlow {
    pub system: System,
    pub cfg: FlowConfig,
}

impl SkewProductFlow {
    pub fn new(system: System, cfg: FlowConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { system, cfg })
    }

    pub fn base(&self) -> &BaseFlow {
        &self.system.base
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    fn check(&self, z: &FlowPoint) -> Result<()> {
        self.system.base.check_dim(&z.p)?;
        if z.x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: z.x.len(),
            });
        }
        if z.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("fiber coordinate is not finite".into()));
        }
        Ok(())
    }

    /// `τ̃_t(z)`, in slow time or with the `|ε|` factor.
    pub fn evolve(&self, z: &FlowPoint, t: f64, form: TimeForm) -> Result<FlowPoint> {
        self.check(z)?;
        if !t.is_finite() {
            return Err(Error::Domain("time must be finite".into()));
        }
        let (scale, eps) = match form {
            TimeForm::Slow => (1.0, 0.0),
            TimeForm::Scaled(e) => (e.abs(), e),
        };
        let base = &self.system.base;
        let field = &*self.system.field;
        let p0 = &z.p;
        let rhs = |s: f64, x: &DVector<f64>| field.eval(&base.advance_unchecked(p0, s), x, eps) * scale;
        let x = self.run(rhs, t, &z.x)?;
        Ok(FlowPoint::new(base.advance_unchecked(p0, t), x))
    }

    /// Fast-time flow `dx/ds = f(τ_{s/|ε|}(p), x, ε)`; the base moves by `s/|ε|`.
    pub fn fast_evolve(&self, z: &FlowPoint, s: f64, eps: f64) -> Result<FlowPoint> {
        self.check(z)?;
        if eps == 0.0 || !eps.is_finite() {
            return Err(Error::Domain("fast time requires ε ≠ 0".into()));
        }
        if !s.is_finite() {
            return Err(Error::Domain("time must be finite".into()));
        }
        let inv = 1.0 / eps.abs();
        let base = &self.system.base;
        let field = &*self.system.field;
        let p0 = &z.p;
        let rhs = |r: f64, x: &DVector<f64>| field.eval(&base.advance_unchecked(p0, r * inv), x, eps);
        let x = self.run(rhs, s, &z.x)?;
        Ok(FlowPoint::new(base.advance_unchecked(p0, s * inv), x))
    }

    fn run<F>(&self, rhs: F, t: f64, x0: &DVector<f64>) -> Result<DVector<f64>>
    where
        F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
    {
        match ode::integrate(rhs, 0.0, x0, t, &self.cfg.ode_options())? {
            Outcome::Completed(x) => Ok(x),
            Outcome::Escaped { t, .. } => Err(Error::Escape { t_exit: t }),
        }
    }

    /// `d(τ̃_t(τ̃_s(z)), τ̃_{s+t}(z))`. Escapes on any leg are reported as
    /// [`Error::NotComparable`].
    pub fn cocycle_defect(&self, z: &FlowPoint, s: f64, t: f64, form: TimeForm) -> Result<f64> {
        let leg = |r| match self.evolve(z, r, form) {
            Err(Error::Escape { t_exit }) => Err(Error::NotComparable(format!("escape at t = {t_exit}"))),
            other => other,
        };
        let first = leg(s)?;
        let composed = match self.evolve(&first, t, form) {
            Err(Error::Escape { t_exit }) => {
                return Err(Error::NotComparable(format!("escape at t = {t_exit}")))
            }
            other => other?,
        };
        let direct = leg(s + t)?;
        // the base part is an exact translation; only rounding can separate it
        let base_gap = base_metric_unchecked(&composed.p, &direct.p);
        let base_gap = if base_gap <= 1e-12 { 0.0 } else { base_gap };
        Ok(base_gap + (&composed.x - &direct.x).norm())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::SQRT_2;

    #[test]
    fn scalar_decay() {
        let sys = benchmarks::linear_constant(BaseFlow::new(vec![SQRT_2]).unwrap(), DMatrix::from_element(1, 1, -1.0));
        let flow = SkewProductFlow::new(sys, FlowConfig::default()).unwrap();
        let z = FlowPoint::new(BasePoint::new(vec![0.4]), DVector::from_element(1, 1.0));
        let out = flow.evolve(&z, 1.0, TimeForm::Slow).unwrap();
        assert!((out.x[0] - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn zero_field_only_moves_base() {
        let base = BaseFlow::new(vec![1.0, SQRT_2]).unwrap();
        let sys = benchmarks::zero_field(base.clone(), 3);
        let flow = SkewProductFlow::new(sys, FlowConfig::default()).unwrap();
        let z = FlowPoint::new(BasePoint::new(vec![0.1, 0.2]), DVector::from_vec(vec![1.0, -2.0, 3.0]));
        let out = flow.evolve(&z, 2.5, TimeForm::Slow).unwrap();
        assert_eq!(out.x, z.x);
        assert_eq!(out.p, base.advance(&z.p, 2.5).unwrap());
        assert_eq!(flow.cocycle_defect(&z, 1.3, -0.7, TimeForm::Slow).unwrap(), 0.0);
    }

    #[test]
    fn forced_scalar_matches_variation_of_constants() {
        // x' = -x + cos(θ₀ + ωt), x(0)=0:
        // x(t) = a(θ₀+ωt) - e^{-t} a(θ₀), a(θ) = (cos θ + ω sin θ)/(1+ω²)
        let w = SQRT_2;
        let flow = SkewProductFlow::new(benchmarks::forced_scalar(w), FlowConfig::default()).unwrap();
        let theta0 = 0.9;
        let a = |th: f64| (th.cos() + w * th.sin()) / (1.0 + w * w);
        let z = FlowPoint::new(BasePoint::new(vec![theta0]), DVector::zeros(1));
        let t = 20.0;
        let out = flow.evolve(&z, t, TimeForm::Slow).unwrap();
        let exact = a(theta0 + w * t) - (-t).exp() * a(theta0);
        assert!((out.x[0] - exact).abs() < 1e-6, "{} vs {}", out.x[0], exact);
    }

    #[test]
    fn fast_time_examples() {
        let base = BaseFlow::new(vec![1.0, SQRT_2]).unwrap();
        let sys = benchmarks::linear_constant(base, DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, -1.0])));
        let flow = SkewProductFlow::new(sys, FlowConfig::default()).unwrap();
        let z = FlowPoint::new(BasePoint::new(vec![0.3, 0.1]), DVector::from_vec(vec![0.5, 2.0]));
        assert_eq!(flow.fast_evolve(&z, 0.0, 0.1).unwrap(), z);
        let out = flow.fast_evolve(&z, 1.0, 0.1).unwrap();
        assert!((out.x[0] - 0.5).abs() < 1e-8);
        assert!((out.x[1] - 2.0 * (-1.0f64).exp()).abs() < 1e-8);
        assert!(matches!(flow.fast_evolve(&z, 1.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn slow_fast_consistency() {
        let flow = SkewProductFlow::new(benchmarks::b2(), FlowConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let eps = rng.gen_range(0.02..0.2) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let p = BasePoint::new(vec![rng.gen_range(0.0..6.3), rng.gen_range(0.0..6.3)]);
            let x = DVector::from_vec(vec![rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)]);
            let s = rng.gen_range(0.0..2.0);
            let z = FlowPoint::new(p, x);
            let fast = flow.fast_evolve(&z, s, eps).unwrap();
            let slow = flow.evolve(&z, s / eps.abs(), TimeForm::Scaled(eps)).unwrap();
            worst = worst.max(flow_distance(&fast, &slow));
        }
        assert!(worst <= 1e-6, "slow/fast defect {worst}");
    }

    #[test]
    fn origin_is_invariant() {
        let flow = SkewProductFlow::new(benchmarks::b2(), FlowConfig::default()).unwrap();
        let z = FlowPoint::new(BasePoint::new(vec![1.0, 2.0]), DVector::zeros(2));
        let out = flow.fast_evolve(&z, 3.0, 0.05).unwrap();
        assert!(out.x.norm() <= 1e-12);
        assert_eq!(out.p, flow.base().advance(&z.p, 60.0).unwrap());
    }

    #[test]
    fn escape_reported() {
        let flow = SkewProductFlow::new(benchmarks::b2(), FlowConfig::default()).unwrap();
        // backward in time the cubic damping blows up
        let z = FlowPoint::new(BasePoint::origin(2), DVector::from_vec(vec![5.0, 0.0]));
        match flow.evolve(&z, -1.0, TimeForm::Slow) {
            Err(Error::Escape { t_exit }) => assert!(t_exit < 0.0),
            other => panic!("expected escape, got {other:?}"),
        }
        assert!(matches!(
            flow.cocycle_defect(&z, -1.0, 0.5, TimeForm::Slow),
            Err(Error::NotComparable(_))
        ));
    }

    #[test]
    fn rk4_cocycle_defect_fourth_order() {
        let w = SQRT_2;
        let sys = benchmarks::forced_scalar(w);
        let z = FlowPoint::new(BasePoint::new(vec![0.4]), DVector::from_element(1, 0.3));
        let defect = |h: f64| {
            let flow = SkewProductFlow::new(sys.clone(), FlowConfig::fixed_rk4(h)).unwrap();
            flow.cocycle_defect(&z, 0.7, 1.9, TimeForm::Slow).unwrap()
        };
        // steps chosen so the three legs use incommensurate partitions
        let d1 = defect(0.3);
        let d2 = defect(0.15);
        let order = (d1 / d2).log2();
        assert!(order > 3.5 && order < 6.0, "order {order} ({d1:e}, {d2:e})");
    }

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for sys in [benchmarks::b1(), benchmarks::b2()] {
            for _ in 0..20 {
                let p = BasePoint::new(vec![rng.gen_range(0.0..6.3), rng.gen_range(0.0..6.3)]);
                let x = DVector::from_vec(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
                assert!(jacobian_discrepancy(&*sys.field, &p, &x, 0.05) < 1e-5);
            }
        }
    }
}

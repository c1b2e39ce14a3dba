//! Shipped benchmark systems.
//!
//! * `forced_scalar`: `x' = −x + cos θ`, `θ' = ω`, whose bounded solution is
//!   `a(θ) = (cos θ + ω sin θ)/(1 + ω²)`.
//! * `b1`: the linear family `l(θ) = [[0, 0], [cos θ₁, −1]]` over the
//!   `(1, √2)` torus. Its average is `diag(0, −1)` and the coupling has zero
//!   mean, so the center exponent is exactly zero.
//! * `b2`: `b1` plus `n₁ = −x₁³(1 + 0.2 cos θ₂) − x₁²x₂`, `n₂ = x₁²`; the
//!   center direction is cubically damped.

use std::f64::consts::SQRT_2;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::base_flow::{BaseFlow, BasePoint};
use crate::cocycle::{fd_jacobian, System, VectorField};

type EvalFn = dyn Fn(&BasePoint, &DVector<f64>, f64) -> DVector<f64> + Send + Sync;
type JacFn = dyn Fn(&BasePoint, &DVector<f64>, f64) -> DMatrix<f64> + Send + Sync;

/// Vector field backed by closures.
pub struct ClosureField {
    dim: usize,
    eval: Box<EvalFn>,
    jac: Option<Box<JacFn>>,
    origin_equilibrium: bool,
}

impl ClosureField {
    pub fn new<F>(dim: usize, eval: F) -> Self
    where
        F: Fn(&BasePoint, &DVector<f64>, f64) -> DVector<f64> + Send + Sync + 'static,
    {
        Self {
            dim,
            eval: Box::new(eval),
            jac: None,
            origin_equilibrium: false,
        }
    }

    pub fn with_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(&BasePoint, &DVector<f64>, f64) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.jac = Some(Box::new(jac));
        self
    }

    pub fn with_origin_equilibrium(mut self) -> Self {
        self.origin_equilibrium = true;
        self
    }
}

impl VectorField for ClosureField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, p: &BasePoint, x: &DVector<f64>, eps: f64) -> DVector<f64> {
        (self.eval)(p, x, eps)
    }

    fn jacobian_x(&self, p: &BasePoint, x: &DVector<f64>, eps: f64) -> DMatrix<f64> {
        match &self.jac {
            Some(j) => j(p, x, eps),
            None => fd_jacobian(|y| (self.eval)(p, y, eps), x),
        }
    }

    fn origin_is_equilibrium(&self) -> bool {
        self.origin_equilibrium
    }
}

/// The `(1, √2)` rotation on the 2-torus.
pub fn torus_1_sqrt2() -> BaseFlow {
    BaseFlow::new(vec![1.0, SQRT_2]).expect("(1, √2) is non-resonant")
}

/// `f ≡ 0` in dimension `d`.
pub fn zero_field(base: BaseFlow, d: usize) -> System {
    let f = ClosureField::new(d, move |_, _, _| DVector::zeros(d))
        .with_jacobian(move |_, _, _| DMatrix::zeros(d, d))
        .with_origin_equilibrium();
    System::new(base, Arc::new(f))
}

/// Autonomous linear field `x' = Mx`.
pub fn linear_constant(base: BaseFlow, m: DMatrix<f64>) -> System {
    let d = m.nrows();
    let m2 = m.clone();
    let f = ClosureField::new(d, move |_, x, _| &m * x)
        .with_jacobian(move |_, _, _| m2.clone())
        .with_origin_equilibrium();
    System::new(base, Arc::new(f))
}

/// Linear family `x' = l(p, ε)x`.
pub fn linear_family<L>(base: BaseFlow, d: usize, l: L) -> System
where
    L: Fn(&BasePoint, f64) -> DMatrix<f64> + Send + Sync + 'static,
{
    let l = Arc::new(l);
    let l2 = Arc::clone(&l);
    let f = ClosureField::new(d, move |p, x, e| l(p, e) * x)
        .with_jacobian(move |p, _, e| l2(p, e))
        .with_origin_equilibrium();
    System::new(base, Arc::new(f))
}

/// `x' = −x + cos θ` over the circle rotation with frequency `omega`.
pub fn forced_scalar(omega: f64) -> System {
    let base = BaseFlow::new(vec![omega]).expect("nonzero frequency");
    let f = ClosureField::new(1, |p, x, _| DVector::from_element(1, -x[0] + p.angles()[0].cos()))
        .with_jacobian(|_, _, _| DMatrix::from_element(1, 1, -1.0));
    System::new(base, Arc::new(f))
}

/// `x' = −x` over the circle rotation with frequency `omega`.
pub fn unforced_scalar(omega: f64) -> System {
    let base = BaseFlow::new(vec![omega]).expect("nonzero frequency");
    linear_constant(base, DMatrix::from_element(1, 1, -1.0))
}

/// Linear part of `b1`/`b2`.
pub fn b1_matrix(p: &BasePoint) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 0.0, p.angles()[0].cos(), -1.0])
}

pub fn b1() -> System {
    linear_family(torus_1_sqrt2(), 2, |p, _| b1_matrix(p))
}

/// Nonlinear part of `b2`.
pub fn b2_nonlinearity(p: &BasePoint, x: &DVector<f64>) -> DVector<f64> {
    let (x1, x2) = (x[0], x[1]);
    let c2 = p.angles()[1].cos();
    DVector::from_vec(vec![-x1 * x1 * x1 * (1.0 + 0.2 * c2) - x1 * x1 * x2, x1 * x1])
}

pub fn b2() -> System {
    let f = ClosureField::new(2, |p, x, _| b1_matrix(p) * x + b2_nonlinearity(p, x))
        .with_jacobian(|p, x, _| {
            let (x1, x2) = (x[0], x[1]);
            let c2 = p.angles()[1].cos();
            let mut j = b1_matrix(p);
            j[(0, 0)] += -3.0 * x1 * x1 * (1.0 + 0.2 * c2) - 2.0 * x1 * x2;
            j[(0, 1)] += -x1 * x1;
            j[(1, 0)] += 2.0 * x1;
            j
        })
        .with_origin_equilibrium();
    System::new(torus_1_sqrt2(), Arc::new(f))
}

/// `diag(0, −1)` constant on the `(1, √2)` torus.
pub fn constant_diag01() -> System {
    linear_constant(torus_1_sqrt2(), DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, -1.0])))
}

/// `diag(0, −1) + ε·R(θ)` with a bounded, full quasi-periodic `R`.
pub fn perturbed_diag01() -> System {
    linear_family(torus_1_sqrt2(), 2, |p, e| {
        let a = p.angles();
        let r = DMatrix::from_row_slice(2, 2, &[a[0].cos(), a[1].sin(), a[1].cos(), a[0].sin()]);
        DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, -1.0])) + r * e
    })
}

/// `diag(0, −1)` plus a zero-mean symmetric coupling `cos θ₁`.
pub fn offdiag_cos() -> System {
    linear_family(torus_1_sqrt2(), 2, |p, _| {
        let c = p.angles()[0].cos();
        DMatrix::from_row_slice(2, 2, &[0.0, c, c, -1.0])
    })
}

/// Names accepted by [`by_name`].
pub const NAMES: [&str; 9] = [
    "B1-scalar",
    "unforced-scalar",
    "constant-diag01",
    "B1",
    "B2",
    "perturbed-diag01",
    "offdiag-cos",
    "zero-1d",
    "zero-2d",
];

/// Looks up a shipped system by name.
pub fn by_name(name: &str) -> Option<System> {
    Some(match name {
        "B1-scalar" | "scalar" => forced_scalar(SQRT_2),
        "unforced-scalar" => unforced_scalar(SQRT_2),
        "constant-diag01" => constant_diag01(),
        "B1" => b1(),
        "B2" => b2(),
        "perturbed-diag01" => perturbed_diag01(),
        "offdiag-cos" => offdiag_cos(),
        "zero-1d" => zero_field(BaseFlow::new(vec![SQRT_2]).ok()?, 1),
        "zero-2d" => zero_field(torus_1_sqrt2(), 2),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_resolves() {
        for n in NAMES {
            assert!(by_name(n).is_some(), "{n}");
        }
        assert!(by_name("nope").is_none());
    }

    #[test]
    fn origin_equilibria() {
        let p = BasePoint::new(vec![0.3, 2.0]);
        for sys in [b1(), b2(), constant_diag01(), perturbed_diag01()] {
            assert!(sys.field.origin_is_equilibrium());
            assert_eq!(sys.field.eval(&p, &DVector::zeros(2), 0.1).norm(), 0.0);
        }
        assert!(!forced_scalar(SQRT_2).field.origin_is_equilibrium());
    }
}

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use std::f64::consts::TAU;
use skewflow::attractor::hausdorff;
use skewflow::base_flow::{base_metric, BaseFlow, BasePoint};
use skewflow::cocycle::FlowPoint;
use skewflow::spectrum::{growth_exponents, split_matrix, LinearFamily, SpectrumConfig};

fn point_set(n: usize) -> impl Strategy<Value = Vec<FlowPoint>> {
    prop::collection::vec((0.0..TAU, 0.0..TAU, -3.0..3.0f64, -3.0..3.0f64), 1..n).prop_map(|v| {
        v.into_iter()
            .map(|(a, b, x, y)| FlowPoint::new(BasePoint::new(vec![a, b]), DVector::from_vec(vec![x, y])))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hausdorff_is_a_metric_on_finite_sets(a in point_set(8), b in point_set(8), c in point_set(8)) {
        let ab = hausdorff(&a, &b).unwrap();
        prop_assert!(hausdorff(&a, &a).unwrap() == 0.0);
        prop_assert!((ab - hausdorff(&b, &a).unwrap()).abs() <= 1e-12);
        let ac = hausdorff(&a, &c).unwrap();
        let cb = hausdorff(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-12);
    }

    #[test]
    fn base_flow_is_a_group_action(a in 0.0..TAU, b in 0.0..TAU, s in -50.0..50.0f64, t in -50.0..50.0f64) {
        let base = BaseFlow::new(vec![1.0, 2f64.sqrt()]).unwrap();
        let p = BasePoint::new(vec![a, b]);
        let two = base.advance(&base.advance(&p, s).unwrap(), t).unwrap();
        let one = base.advance(&p, s + t).unwrap();
        prop_assert!(base_metric(&one, &two).unwrap() <= 1e-10);
        let back = base.advance(&base.advance(&p, t).unwrap(), -t).unwrap();
        prop_assert!(base_metric(&back, &p).unwrap() <= 1e-10);
        for &x in one.angles() {
            prop_assert!((0.0..TAU).contains(&x));
        }
    }

    #[test]
    fn split_projects_onto_the_stable_eigenvector(
        a in -0.2..0.2f64,
        b in -2.0..-0.6f64,
        m in prop::array::uniform4(-1.0..1.0f64),
    ) {
        let t = DMatrix::from_row_slice(2, 2, &[1.0 + m[0].abs(), m[1] * 0.5, m[2] * 0.5, 1.0 + m[3].abs()]);
        let ti = t.clone().try_inverse().unwrap();
        let l = &t * DMatrix::from_diagonal(&DVector::from_vec(vec![a, b])) * &ti;
        let s = split_matrix(l, 0.25, 0.5).unwrap();
        prop_assert_eq!(s.e, 1);
        let va = t.column(0).into_owned();
        let vb = t.column(1).into_owned();
        prop_assert!((&s.q0 * &va).norm() <= 1e-9 * va.norm());
        prop_assert!((&s.q0 * &vb - &vb).norm() <= 1e-9 * vb.norm());
        prop_assert!((&s.q0 * &s.q0 - &s.q0).norm() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn exponent_hulls_translate_with_lambda(a in -1.0..1.0f64, b in -1.0..1.0f64, lambda in -0.5..0.5f64) {
        let base = BaseFlow::new(vec![1.0, 2f64.sqrt()]).unwrap();
        let family = LinearFamily::new(base, 2, move |_p: &BasePoint, _eps: f64| {
            DMatrix::from_diagonal(&DVector::from_vec(vec![a, b]))
        });
        let cfg = SpectrumConfig { step: Some(0.05), ..SpectrumConfig::default() };
        let pts = vec![BasePoint::new(vec![0.0, 0.0]), BasePoint::new(vec![1.0, 2.0])];
        let h0 = growth_exponents(&family, &pts, 0.1, 0.0, 20.0, 1, &cfg).unwrap();
        let hl = growth_exponents(&family, &pts, 0.1, lambda, 20.0, 1, &cfg).unwrap();
        let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
        for ((x, y), want) in h0.hulls.iter().zip([hi, lo]) {
            prop_assert!((x - want).abs() <= 1e-6 && (y - want).abs() <= 1e-6, "{x} {y} {want}");
        }
        for ((x0, y0), (xl, yl)) in h0.hulls.iter().zip(&hl.hulls) {
            prop_assert!((x0 - lambda - xl).abs() <= 1e-12 && (y0 - lambda - yl).abs() <= 1e-12);
        }
    }
}

//! Property tests for the field algebra on tiny grids.

use num_complex::Complex64;
use proptest::prelude::*;
use std::sync::OnceLock;

use pcflow::chart::{ChartRef, TorusChart};
use pcflow::metric::HermitianMetric;
use pcflow::ops;
use pcflow::tensor::TensorField;

fn chart() -> &'static ChartRef {
    static CHART: OnceLock<ChartRef> = OnceLock::new();
    CHART.get_or_init(|| TorusChart::new(2, 4).unwrap())
}

fn metric() -> &'static HermitianMetric {
    static METRIC: OnceLock<HermitianMetric> = OnceLock::new();
    METRIC.get_or_init(|| pcflow::initial::make_random_hermitian(chart(), 0.08, 99).unwrap())
}

fn field_strategy(p: usize, q: usize) -> impl Strategy<Value = TensorField> {
    let len = chart().comp_count(p + q) * chart().points();
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), len).prop_map(move |vals| {
        let data = vals
            .into_iter()
            .map(|(re, im)| Complex64::new(re, im))
            .collect();
        TensorField::from_data(chart().clone(), p, q, data).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conjugation_is_involutive(a in field_strategy(2, 1)) {
        let back = a.conjugate().conjugate();
        prop_assert!(back.sub(&a).max_abs() == 0.0);
    }

    #[test]
    fn inner_product_hermitian_and_positive(
        a in field_strategy(1, 1),
        b in field_strategy(1, 1),
    ) {
        let m = metric();
        let ab = ops::inner_product(&a, &b, m).unwrap();
        let ba = ops::inner_product(&b, &a, m).unwrap();
        let mut err: f64 = 0.0;
        for (x, y) in ab.data().iter().zip(ba.data()) {
            err = err.max((x - y.conj()).norm());
        }
        prop_assert!(err < 1e-13, "conjugate symmetry {err}");

        let aa = ops::inner_product(&a, &a, m).unwrap();
        for v in aa.data() {
            prop_assert!(v.re >= -1e-13);
            prop_assert!(v.im.abs() < 1e-13);
        }
    }

    #[test]
    fn contraction_is_multilinear(
        a in field_strategy(1, 1),
        b in field_strategy(1, 1),
        c in field_strategy(1, 1),
        re in -2.0f64..2.0,
        im in -2.0f64..2.0,
    ) {
        let m = metric();
        let alpha = Complex64::new(re, im);
        let mut lin = a.scaled(alpha);
        lin.axpy(Complex64::new(1.0, 0.0), &b);
        let lhs = ops::contract(&lin, &c, &[(1, 0)], m).unwrap();
        let ra = ops::contract(&a, &c, &[(1, 0)], m).unwrap();
        let rb = ops::contract(&b, &c, &[(1, 0)], m).unwrap();
        let mut rhs = ra.scaled(alpha);
        rhs.axpy(Complex64::new(1.0, 0.0), &rb);
        let scale = 1.0 + lhs.max_abs();
        prop_assert!(lhs.sub(&rhs).max_abs() / scale < 1e-13);
    }

    #[test]
    fn bracket_pairing_is_real(a in field_strategy(2, 0)) {
        // (A, h[A]) real for Hermitian h: here h = g itself
        let m = metric();
        let ha = ops::h_bracket(m.g(), &a, m).unwrap();
        let ip = ops::inner_product(&a, &ha, m).unwrap();
        for v in ip.data() {
            prop_assert!(v.im.abs() < 1e-12 * (1.0 + v.re.abs()));
        }
    }
}

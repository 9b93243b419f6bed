use optconn::adapted_frame::{lift_frame, FrameLabel};
use optconn::connection::{christoffel, christoffel_conformal, grad_components, Fault};
use optconn::fields::{Point, ScalarField, Symbols};
use optconn::kahler_base::KahlerBase;
use optconn::metric::{
    assemble, nullity_checks, params_from_transversal, transversal_from_params, MetricParams,
    TransversalParams,
};
use optconn::oracle::{check_point, christoffel_oracle, Check, KoszulContext, OracleDerivative};
use proptest::prelude::*;

fn params_from(c: &[f64]) -> MetricParams {
    let sigma = format!("exp({}*x1 + {}*t + {}*s)", c[0], c[1], c[2]);
    let alpha = format!("1.2 + {}*sin(x2) + {}*t", c[3], c[4]);
    let beta = format!("{} + {}*x1*s + {}*t^2", c[5], c[6], c[7]);
    let g1 = format!("{}*x2 + {}*t", c[8], c[9]);
    let g2 = format!("{}*s*x1", c[10]);
    MetricParams::parse(&sigma, &alpha, &beta, &[&g1, &g2]).unwrap()
}

fn base_from(k: f64) -> KahlerBase {
    if k.abs() < 0.05 {
        KahlerBase::flat(2).unwrap()
    } else {
        KahlerBase::warped(k).unwrap()
    }
}

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.5..0.5_f64, 11)
}

fn point() -> impl Strategy<Value = Point> {
    prop::collection::vec(-0.9..0.9_f64, 4).prop_map(|v| Point::new(v).unwrap())
}

fn label() -> impl Strategy<Value = FrameLabel> {
    (0..4_usize).prop_map(|i| FrameLabel::from_index(i, 2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn closed_form_matches_oracle(c in coeffs(), k in -1.0..1.0_f64, p in point()) {
        let params = params_from(&c);
        let base = base_from(k);
        let t = christoffel(&params, &base, &p).unwrap();
        let ctx = KoszulContext::new(base.clone(), params.clone(), OracleDerivative::Jet).unwrap();
        let o = christoffel_oracle(&ctx, &p).unwrap();
        prop_assert!(t.max_deviation(&o).0 < 1e-9);
        let conf = christoffel_conformal(&params, &base, &p).unwrap();
        prop_assert!(t.max_deviation(&conf).0 < 1e-9);
    }

    #[test]
    fn torsion_free_and_metric(c in coeffs(), k in -1.0..1.0_f64, p in point()) {
        let ctx = KoszulContext::new(base_from(k), params_from(&c), OracleDerivative::Jet).unwrap();
        let r = check_point(
            &ctx,
            &[Check::Torsion, Check::Metricity, Check::GeodesicNull, Check::CoframeDuality],
            &p,
        )
        .unwrap();
        for x in r {
            prop_assert!(x.residual < 1e-9, "{:?}", x);
        }
    }

    #[test]
    fn null_generator_geodesic(c in coeffs(), k in -1.0..1.0_f64, p in point()) {
        let t = christoffel(&params_from(&c), &base_from(k), &p).unwrap();
        for i in 0..2 {
            prop_assert_eq!(t.get(2, 2, i), 0.0);
        }
        prop_assert_eq!(t.get(2, 2, 3), 0.0);
    }

    #[test]
    fn transversal_round_trip(
        sigma in 0.1..5.0_f64,
        a in prop_oneof![-3.0..-0.3_f64, 0.3..3.0_f64],
        b in -2.0..2.0_f64,
        c in prop::collection::vec(-1.0..1.0_f64, 2),
        k in -1.0..1.0_f64,
        x in prop::collection::vec(-0.9..0.9_f64, 2),
    ) {
        let g = base_from(k).base_data(&x).unwrap().g;
        let t = TransversalParams { a, b, c: c.clone() };
        let v = params_from_transversal(&t, sigma, &g).unwrap();
        let back = transversal_from_params(&v, &g).unwrap();
        let tol = 1e-12 * (1.0 + a.abs() + b.abs());
        prop_assert!((back.a - a).abs() < tol);
        prop_assert!((back.b - b).abs() < tol);
        for (u, w) in back.c.iter().zip(&c) {
            prop_assert!((u - w).abs() < tol);
        }
    }

    #[test]
    fn transversal_is_null(c in coeffs(), k in -1.0..1.0_f64, p in point()) {
        let r = nullity_checks(&params_from(&c), &base_from(k), &p).unwrap();
        prop_assert!(r.max() < 1e-12, "{:?}", r);
    }

    #[test]
    fn lorentzian_signature(
        sigma in 0.01..10.0_f64,
        alpha in prop_oneof![-5.0..-0.05_f64, 0.05..5.0_f64],
        beta in -5.0..5.0_f64,
        gamma in prop::collection::vec(-3.0..3.0_f64, 4),
    ) {
        let params = MetricParams::constant(sigma, alpha, beta, &gamma).unwrap();
        let base = KahlerBase::flat(4).unwrap();
        let p = Point::new(vec![0.0; 6]).unwrap();
        let metric = assemble(&params, &base, &p).unwrap();
        prop_assert_eq!(metric.signature(), (5, 1));
    }

    #[test]
    fn fault_shows_as_twice_the_entry(
        c in coeffs(),
        p in point(),
        a in label(),
        b in label(),
        d in label(),
    ) {
        let params = params_from(&c);
        let base = base_from(0.5);
        let entry = christoffel(&params, &base, &p).unwrap().entry(a, b, d);
        let fault = Fault { a, b, c: d };
        let ctx = KoszulContext::new(base, params, OracleDerivative::Jet)
            .unwrap()
            .with_fault(Some(fault));
        let r = check_point(&ctx, &[Check::OracleEquivalence], &p).unwrap();
        prop_assert!((r[0].residual - 2.0 * entry.abs()).abs() < 1e-9);
    }

    #[test]
    fn gradient_reproduces_derivatives(
        c in coeffs(),
        w in prop::collection::vec(-2.0..2.0_f64, 4),
        p in point(),
    ) {
        let params = params_from(&c);
        let base = base_from(0.7);
        let src = format!("{}*x1 + {}*x2*t + {}*sin(s) + {}*t", w[0], w[1], w[2], w[3]);
        let phi = ScalarField::parse(&src, &Symbols::chart(2)).unwrap();
        let grad = grad_components(&phi, &params, &base, &p).unwrap();
        let metric = assemble(&params, &base, &p).unwrap();
        let frame = lift_frame(&base, &p).unwrap();
        for a in 0..4 {
            let mut e = vec![0.0; 4];
            e[a] = 1.0;
            let lhs = metric.pair(&grad.components, &e);
            let rhs = phi.directional(p.coords(), &frame.row(a)).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()));
        }
    }
}

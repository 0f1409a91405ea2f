//! Horizontal lifts and lifting checks against closed forms: a polygon lifts
//! to the product of the exponentials of its edges, the fiber increment of a
//! closed loop is its signed area, and a planar map lifts exactly when its
//! Jacobian determinant is constant.

use carnot_lift::{
    check_lift, closed_loop_defect, endpoint, horizontal_lift, CarnotGroup, CentralExtension, Chart, Control,
    HorizontalCurve, SampledMap, DEFAULT_TOL,
};
use proptest::prelude::*;

fn plane() -> CarnotGroup {
    CarnotGroup::builtin("abelian:2").unwrap()
}

fn h1_ext() -> CentralExtension {
    CentralExtension::by_top_layer(&CarnotGroup::builtin("heisenberg:1").unwrap()).unwrap()
}

fn shoelace(v: &[Vec<f64>]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| v[i][0] * v[(i + 1) % n][1] - v[(i + 1) % n][0] * v[i][1]).sum::<f64>()
}

fn polygon() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 2), 3..8)
}

fn sampled(res: usize, f: impl Fn(f64, f64) -> (f64, f64) + Sync) -> SampledMap {
    SampledMap::from_fn(Chart::cube(2, -1.0, 1.0, res).unwrap(), 2, |x, o| {
        let (a, b) = f(x[0], x[1]);
        o[0] = a;
        o[1] = b;
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn polygon_lift_is_a_product_of_edge_exponentials(v in polygon(), z0 in -1.0..1.0f64) {
        let ext = h1_ext();
        let g = ext.extended();
        let curve = HorizontalCurve::closed_polygon(plane(), &v).unwrap();
        let start = vec![v[0][0], v[0][1], z0];
        let lifted = horizontal_lift(&curve, &start, &ext).unwrap();
        let mut oracle = start.clone();
        for (p, q) in curve.points().iter().zip(&curve.points()[1..]) {
            let edge = [q[0] - p[0], q[1] - p[1], 0.0];
            oracle = g.mul(&oracle, &edge);
        }
        for (a, b) in lifted.end().iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-12, "{:?} vs {:?}", lifted.end(), oracle);
        }
        prop_assert!((lifted.end()[2] - z0 - shoelace(&v)).abs() < 1e-12);
    }

    #[test]
    fn constant_controls_follow_one_parameter_subgroups(u in prop::collection::vec(-2.0..2.0f64, 2), s in prop::collection::vec(-1.0..1.0f64, 3)) {
        let g = CarnotGroup::builtin("heisenberg:1").unwrap();
        let curve = endpoint(&Control::constant(u.clone(), 9).unwrap(), &s, &g).unwrap();
        let oracle = g.mul(&s, &[u[0], u[1], 0.0]);
        for (a, b) in curve.end().iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert!(curve.horizontality_defect().unwrap() < 1e-12);
    }

    #[test]
    fn unimodular_shears_lift(c1 in -0.5..0.5f64, c2 in -0.3..0.3f64, c3 in -0.3..0.3f64) {
        // (a + h(b), b + k(a + h(b))) has unit Jacobian determinant
        let ext = h1_ext();
        let f = sampled(33, move |a, b| {
            let x = a + c1 * b * b + c2 * b;
            (x, b + c3 * x)
        });
        let report = check_lift(&f, &ext, &ext, &[0.0, 0.0], DEFAULT_TOL, 3).unwrap();
        prop_assert!(report.passed, "max ratio {}", report.max_ratio);
        prop_assert!((report.fiber_map[0][0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dilations_scale_the_fiber(l in 0.2..2.0f64) {
        let ext = h1_ext();
        let f = sampled(9, move |a, b| (l * a, l * b));
        let report = check_lift(&f, &ext, &ext, &[0.1, -0.2], DEFAULT_TOL, 0).unwrap();
        prop_assert!(report.passed);
        prop_assert!((report.fiber_map[0][0] - l * l).abs() < 1e-10);
    }

    #[test]
    fn quadratic_stretch_defect_is_the_area_integral(c in -1.0..1.0f64) {
        // det = 1 + 2 c a, so the unit square carries defect c over the basepoint value
        let ext = h1_ext();
        let f = sampled(33, move |a, b| (a + c * a * a, b));
        let square = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]].map(|p| p.to_vec());
        let loop_ = HorizontalCurve::closed_polygon(plane(), &square).unwrap();
        let d = closed_loop_defect(&f, &loop_, &ext, &ext).unwrap();
        prop_assert!((d[0] - c).abs() < 1e-9, "{} vs {c}", d[0]);
        if c.abs() > 1e-3 {
            prop_assert!(!check_lift(&f, &ext, &ext, &[0.0, 0.0], DEFAULT_TOL, 0).unwrap().passed);
        }
    }
}

#[test]
fn circle_lift_encloses_pi() {
    let ext = h1_ext();
    let n = 4096;
    let pts: Vec<Vec<f64>> = (0..=n)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            vec![t.cos(), t.sin()]
        })
        .collect();
    let curve = HorizontalCurve::uniform(plane(), pts.clone()).unwrap();
    let lifted = horizontal_lift(&curve, &[1.0, 0.0, 0.0], &ext).unwrap();
    let area = shoelace(&pts[..n]);
    assert!((lifted.end()[2] - area).abs() < 1e-12);
    assert!((lifted.end()[2] - std::f64::consts::PI).abs() < 1e-4);
}

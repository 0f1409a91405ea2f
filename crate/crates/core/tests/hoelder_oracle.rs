//! Mollification, decay and Young sums against exact facts: symmetric
//! kernels fix affine maps, `|x|^b` has unit `b`-seminorm, Riemann-Stieltjes
//! sums are bilinear, and lifts of mollified maps converge to the lift of
//! the original.

use carnot_lift::{
    decay_slope, dyadic_scales, group_convolve_onto, hoelder_seminorm, lift_map, moser_correct, sample_path,
    weierstrass, young_integral, CarnotGroup, CentralExtension, Chart, DecayOptions, FnMap, MapSource, MollifierKernel,
    MoserOptions, Result, SampledMap, SeminormOptions, StieltjesRule,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn affine_maps_are_fixed_on_euclidean_space(n in 1usize..=3, coef in prop::collection::vec(-2.0..2.0f64, 4), p in prop::collection::vec(-1.0..1.0f64, 3), eps in 0.01..0.5f64) {
        let g = CarnotGroup::builtin(&format!("abelian:{n}")).unwrap();
        let k = MollifierKernel::new(&g, eps).unwrap();
        let c = coef.clone();
        let f = FnMap::new(n, 1, move |x: &[f64], o: &mut [f64]| {
            o[0] = c[3] + x.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
        });
        let mut out = [0.0];
        k.convolve_at(&f, &p[..n], &mut out).unwrap();
        prop_assert!((out[0] - f.eval(&p[..n]).unwrap()[0]).abs() < 1e-12);
    }

    #[test]
    fn coordinate_maps_are_fixed_on_heisenberg(p in prop::collection::vec(-1.0..1.0f64, 3), eps in 0.01..0.5f64) {
        // the bracket term of p z^{-1} is linear in z and averages out
        let g = CarnotGroup::builtin("heisenberg:1").unwrap();
        let k = MollifierKernel::new(&g, eps).unwrap();
        let id = FnMap::new(3, 3, |x: &[f64], o: &mut [f64]| o.copy_from_slice(x));
        let mut out = [0.0; 3];
        k.convolve_at(&id, &p, &mut out).unwrap();
        for (a, b) in out.iter().zip(&p) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn young_sums_are_bilinear(a in -3.0..3.0f64, b in -3.0..3.0f64, phase in 0.0..1.0f64) {
        let f1 = sample_path(|t| (5.0 * t + phase).sin(), 0.0, 1.0, 9);
        let f2 = sample_path(|t| weierstrass(t + phase, 3), 0.0, 1.0, 9);
        let g = sample_path(|t| weierstrass(t, 4), 0.0, 1.0, 9);
        let mix: Vec<f64> = f1.iter().zip(&f2).map(|(x, y)| a * x + b * y).collect();
        for rule in [StieltjesRule::LeftPoint, StieltjesRule::Trapezoid] {
            let run = |f: &[f64]| young_integral(f, &g, 2.0 / 3.0, 2.0 / 3.0, 2, rule).unwrap();
            let (r1, r2, rm) = (run(&f1), run(&f2), run(&mix));
            for k in 0..rm.levels.len() {
                let lin = a * r1.levels[k].value + b * r2.levels[k].value;
                let slack = rm.levels[k].rounding_bound + a.abs() * r1.levels[k].rounding_bound + b.abs() * r2.levels[k].rounding_bound;
                prop_assert!((rm.levels[k].value - lin).abs() <= slack + 1e-14);
            }
        }
    }

    #[test]
    fn seminorm_grows_with_budget(seed in 0u64..1000, small in 10usize..200) {
        let r = CarnotGroup::builtin("abelian:1").unwrap();
        let dom = Chart::cube(1, 0.0, 1.0, 2).unwrap();
        let g = FnMap::new(1, 1, |x: &[f64], o: &mut [f64]| o[0] = weierstrass(x[0], 5));
        let opts = SeminormOptions { seed, ..Default::default() };
        let lo = hoelder_seminorm(&g, &r, &r, &dom, 2.0 / 3.0, small, &opts).unwrap();
        let hi = hoelder_seminorm(&g, &r, &r, &dom, 2.0 / 3.0, 3 * small, &opts).unwrap();
        prop_assert!(hi.seminorm >= lo.seminorm);
    }
}

#[test]
fn mollifier_error_is_bounded_by_the_seminorm() {
    let r = CarnotGroup::builtin("abelian:1").unwrap();
    for beta in [1.0, 2.0 / 3.0, 0.5] {
        let f = FnMap::new(1, 1, move |x: &[f64], o: &mut [f64]| o[0] = x[0].abs().powf(beta));
        for eps in [0.2, 0.05, 0.01] {
            let k = MollifierKernel::new(&r, eps).unwrap();
            let mut worst: f64 = 0.0;
            for i in 0..=40 {
                let x = -0.5 + i as f64 / 40.0;
                let mut out = [0.0];
                k.convolve_at(&f, &[x], &mut out).unwrap();
                worst = worst.max((out[0] - f.eval(&[x]).unwrap()[0]).abs());
            }
            assert!(worst <= eps.powf(beta), "beta {beta} eps {eps}: {worst}");
            assert!(worst > 0.05 * eps.powf(beta));
        }
    }
}

/// Horizontal curve in the step-3 filiform group through the polyline with
/// layer-one components `(a(s), b(s))`, built edge by edge from the group law.
struct RoughCurve {
    group: CarnotGroup,
    lo: f64,
    step: f64,
    nodes: Vec<Vec<f64>>,
    edges: Vec<[f64; 2]>,
}

impl RoughCurve {
    fn new(a: impl Fn(f64) -> f64, b: impl Fn(f64) -> f64, lo: f64, hi: f64, count: usize) -> Self {
        let group = CarnotGroup::builtin("filiform:3").unwrap();
        let step = (hi - lo) / count as f64;
        let mut nodes = vec![vec![a(lo), b(lo), 0.0, 0.0]];
        let mut edges = Vec::with_capacity(count);
        for k in 0..count {
            let (s0, s1) = (lo + k as f64 * step, lo + (k + 1) as f64 * step);
            let e = [a(s1) - a(s0), b(s1) - b(s0)];
            let next = group.mul(&nodes[k], &[e[0], e[1], 0.0, 0.0]);
            nodes.push(next);
            edges.push(e);
        }
        Self { group, lo, step, nodes, edges }
    }
}

impl MapSource for RoughCurve {
    fn source_dim(&self) -> usize {
        1
    }

    fn target_dim(&self) -> usize {
        4
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let u = (x[0] - self.lo) / self.step;
        let k = (u.floor().max(0.0) as usize).min(self.edges.len() - 1);
        let tau = u - k as f64;
        let e = self.edges[k];
        out.copy_from_slice(&self.group.mul(&self.nodes[k], &[tau * e[0], tau * e[1], 0.0, 0.0]));
        Ok(())
    }
}

fn weierstrass_sine(y: f64, n: usize) -> f64 {
    (0..=n).map(|k| 9f64.powi(-(k as i32)) * (27f64.powi(k as i32) * std::f64::consts::PI * y).sin()).sum()
}

#[test]
fn deeper_layers_decay_no_faster() {
    let curve = RoughCurve::new(|s| weierstrass(s, 6), |s| weierstrass_sine(s, 6), -0.5, 0.5, 1 << 16);
    let line = CarnotGroup::builtin("abelian:1").unwrap();
    let probes: Vec<Vec<f64>> = (0..=32).map(|i| vec![-0.2 + 0.4 * i as f64 / 32.0]).collect();
    let opts = DecayOptions::new(probes);
    let eps = dyadic_scales(4, 10);
    let second = decay_slope(&curve, &line, &curve.group, 2, 0, &eps, &opts).unwrap();
    let third = decay_slope(&curve, &line, &curve.group, 3, 0, &eps, &opts).unwrap();
    let (s2, s3) = (second.slope.unwrap(), third.slope.unwrap());
    assert!(s3 <= s2 + 0.15, "weight 2 slope {s2}, weight 3 slope {s3}");
    assert!(s2 > 0.0, "weight 2 slope {s2}");
}

#[test]
fn lifts_of_mollified_maps_converge() {
    let ext = CentralExtension::by_top_layer(&CarnotGroup::builtin("heisenberg:1").unwrap()).unwrap();
    let plane = CarnotGroup::builtin("abelian:2").unwrap();
    let chart = Chart::cube(2, -0.6, 0.6, 49).unwrap();
    let fiber = Chart::new(vec![-0.5], vec![0.5], vec![3]).unwrap();
    let shear = FnMap::new(2, 2, |x: &[f64], o: &mut [f64]| {
        o[0] = x[0] + x[1] * x[1];
        o[1] = x[1];
    });
    let f = SampledMap::from_source(chart.clone(), &shear).unwrap();
    let (reference, _) = lift_map(&f, &ext, &ext, &[0.0; 3], &[0.0; 3], &fiber, 1e-6, 0).unwrap();
    let probes: Vec<Vec<f64>> = (0..=8)
        .flat_map(|i| (0..=8).flat_map(move |j| [-0.4, 0.0, 0.4].map(|t| vec![-0.5 + i as f64 / 8.0, -0.5 + j as f64 / 8.0, t])))
        .collect();
    let mut errors = Vec::new();
    for k in 3..=7 {
        let kernel = MollifierKernel::new(&plane, 2f64.powi(-k)).unwrap();
        let f_eps = group_convolve_onto(&shear, &kernel, &chart).unwrap();
        let g_eps = moser_correct(&f_eps, &MoserOptions::default()).unwrap().map;
        let origin = g_eps.eval(&[0.0, 0.0]).unwrap();
        let target = [origin[0], origin[1], 0.0];
        let (lift, _) = lift_map(&g_eps, &ext, &ext, &[0.0; 3], &target, &fiber, 1e-6, 0).unwrap();
        let mut worst: f64 = 0.0;
        for p in &probes {
            let (a, b) = (lift.eval(p).unwrap(), reference.eval(p).unwrap());
            worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(worst, f64::max);
        }
        errors.push(worst);
    }
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    assert!(errors[4] < 1e-3);
}

//! Group law checked against faithful nilpotent matrix representations,
//! where the product is `log(exp(P) exp(Q))` computed by finite series.

use carnot_lift::{CarnotGroup, InvariantForm, StratifiedAlgebra};
use proptest::prelude::*;

type Mat = Vec<Vec<f64>>;

fn zeros(n: usize) -> Mat {
    vec![vec![0.0; n]; n]
}

fn unit(n: usize, i: usize, j: usize) -> Mat {
    let mut m = zeros(n);
    m[i][j] = 1.0;
    m
}

fn add(a: &Mat, b: &Mat, s: f64) -> Mat {
    a.iter().zip(b).map(|(r, q)| r.iter().zip(q).map(|(x, y)| x + s * y).collect()).collect()
}

fn matmul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let mut c = zeros(n);
    for i in 0..n {
        for k in 0..n {
            if a[i][k] == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

fn exp_nilpotent(a: &Mat) -> Mat {
    let n = a.len();
    let mut out = zeros(n);
    let mut term = zeros(n);
    for i in 0..n {
        out[i][i] = 1.0;
        term[i][i] = 1.0;
    }
    for k in 1..n {
        term = matmul(&term, a);
        out = add(&out, &term, 1.0 / (1..=k).map(|x| x as f64).product::<f64>());
    }
    out
}

fn log_unipotent(u: &Mat) -> Mat {
    let n = u.len();
    let mut nil = u.clone();
    for (i, row) in nil.iter_mut().enumerate() {
        row[i] -= 1.0;
    }
    let mut out = zeros(n);
    let mut term = nil.clone();
    for k in 1..n {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        out = add(&out, &term, sign / k as f64);
        term = matmul(&term, &nil);
    }
    out
}

struct Rep {
    basis: Vec<Mat>,
}

impl Rep {
    fn embed(&self, p: &[f64]) -> Mat {
        let n = self.basis[0].len();
        p.iter().zip(&self.basis).fold(zeros(n), |acc, (c, b)| add(&acc, b, *c))
    }

    /// Coordinates of a matrix in the span of the basis; the bases used here
    /// are sums of distinct matrix units, read off from a designated entry.
    fn coords(&self, m: &Mat, pivots: &[(usize, usize)]) -> Vec<f64> {
        pivots.iter().map(|&(i, j)| m[i][j]).collect()
    }

    fn product(&self, p: &[f64], q: &[f64], pivots: &[(usize, usize)]) -> Vec<f64> {
        let m = log_unipotent(&matmul(&exp_nilpotent(&self.embed(p)), &exp_nilpotent(&self.embed(q))));
        self.coords(&m, pivots)
    }
}

fn heisenberg_rep(n: usize) -> (Rep, Vec<(usize, usize)>) {
    let d = n + 2;
    let mut basis = Vec::new();
    let mut pivots = Vec::new();
    for i in 0..n {
        basis.push(unit(d, 0, i + 1));
        pivots.push((0, i + 1));
    }
    for i in 0..n {
        basis.push(unit(d, i + 1, d - 1));
        pivots.push((i + 1, d - 1));
    }
    basis.push(unit(d, 0, d - 1));
    pivots.push((0, d - 1));
    (Rep { basis }, pivots)
}

/// `X1 = E12 + E23 + ... + E_{s,s+1}`, `X2 = E_{s+1,s+2}`, `X_{k+1} = [X1, X_k]`.
fn filiform_rep(step: usize) -> (Rep, Vec<(usize, usize)>) {
    let d = step + 2;
    let mut x1 = zeros(d);
    for i in 0..step {
        x1[i][i + 1] = 1.0;
    }
    let mut basis = vec![x1, unit(d, step, step + 1)];
    let mut pivots = vec![(0, 1), (step, step + 1)];
    for k in 1..step {
        basis.push(unit(d, step - k, step + 1));
        pivots.push((step - k, step + 1));
    }
    (Rep { basis }, pivots)
}

fn coords_strategy(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, dim)
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

#[test]
fn representation_bases_satisfy_brackets() {
    let (rep, _) = filiform_rep(3);
    let br = |a: &Mat, b: &Mat| add(&matmul(a, b), &matmul(b, a), -1.0);
    assert_eq!(br(&rep.basis[0], &rep.basis[1]), rep.basis[2]);
    assert_eq!(br(&rep.basis[0], &rep.basis[2]), rep.basis[3]);
    assert_eq!(br(&rep.basis[1], &rep.basis[2]), zeros(5));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn heisenberg_products_match_matrices(p in coords_strategy(5), q in coords_strategy(5)) {
        let g = CarnotGroup::builtin("heisenberg:2").unwrap();
        let (rep, pivots) = heisenberg_rep(2);
        let expected = rep.product(&p, &q, &pivots);
        prop_assert!(close(&g.mul(&p, &q), &expected, 1e-12));
        prop_assert!(close(&g.mul_bch(&p, &q), &expected, 1e-12));
    }

    #[test]
    fn filiform_products_match_matrices(p in coords_strategy(4), q in coords_strategy(4)) {
        let g = CarnotGroup::builtin("filiform:3").unwrap();
        let (rep, pivots) = filiform_rep(3);
        let expected = rep.product(&p, &q, &pivots);
        prop_assert!(close(&g.mul_closed(&p, &q), &expected, 1e-12), "{:?} vs {:?}", g.mul_closed(&p, &q), expected);
        prop_assert!(close(&g.mul_bch(&p, &q), &expected, 1e-12));
        prop_assert!(close(&g.left_quotient_closed(&p, &q), &g.mul_bch(&g.inv(&p), &q), 1e-12));
    }

    #[test]
    fn higher_step_filiform_matches_matrices(p in coords_strategy(6), q in coords_strategy(6)) {
        let g = CarnotGroup::builtin("filiform:5").unwrap();
        let (rep, pivots) = filiform_rep(5);
        let expected = rep.product(&p, &q, &pivots);
        prop_assert!(close(&g.mul(&p, &q), &expected, 1e-11), "{:?} vs {:?}", g.mul(&p, &q), expected);
    }

    #[test]
    fn quaternionic_products_match_step_two_formula(p in coords_strategy(7), q in coords_strategy(7)) {
        let g = CarnotGroup::builtin("quaternionic-heisenberg:1").unwrap();
        // forms written out by hand on (x, y, z, w)
        let rho = |a: &[f64], b: &[f64]| {
            let w = |i: usize, j: usize| a[i] * b[j] - a[j] * b[i];
            [w(0, 1) + w(2, 3), w(0, 2) + w(3, 1), w(0, 3) + w(1, 2)]
        };
        let r = rho(&p, &q);
        let mut expected: Vec<f64> = p.iter().zip(&q).map(|(a, b)| a + b).collect();
        for k in 0..3 {
            expected[4 + k] += 0.5 * r[k];
        }
        prop_assert!(close(&g.mul(&p, &q), &expected, 1e-13));
    }

    #[test]
    fn frame_matches_finite_differences(p in coords_strategy(4), j in 0usize..4) {
        let g = CarnotGroup::builtin("filiform:3").unwrap();
        let h = 1e-5;
        let mut e = vec![0.0; 4];
        e[j] = h;
        let fwd = g.mul(&p, &e);
        e[j] = -h;
        let bwd = g.mul(&p, &e);
        let fd: Vec<f64> = fwd.iter().zip(&bwd).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let col: Vec<f64> = g.frame(&p).column(j).iter().copied().collect();
        prop_assert!(close(&fd, &col, 1e-6));
    }

    #[test]
    fn coframe_inverts_frame(p in coords_strategy(6)) {
        let g = CarnotGroup::builtin("filiform:5").unwrap();
        let prod = g.coframe(&p).unwrap() * g.frame(&p);
        let id = nalgebra::DMatrix::<f64>::identity(6, 6);
        prop_assert!((prod - id).abs().max() < 1e-12);
    }

    #[test]
    fn quasi_metric_is_homogeneous(p in coords_strategy(4), q in coords_strategy(4), lambda in 0.1f64..5.0) {
        let g = CarnotGroup::builtin("filiform:3").unwrap();
        let d = g.quasi_metric(&p, &q);
        let dl = g.quasi_metric(&g.dilate(lambda, &p), &g.dilate(lambda, &q));
        prop_assert!((dl - lambda * d).abs() <= 1e-12 * (1.0 + dl.abs()));
        prop_assert!(g.quasi_metric(&p, &p) == 0.0);
    }

    #[test]
    fn d0_squares_to_zero(mu in prop::collection::vec(-1.0f64..1.0, 6)) {
        let alg = StratifiedAlgebra::filiform(5).unwrap();
        let form = InvariantForm::scalar_one_form(&mu, 0);
        let d1 = carnot_lift::lie_differential_d0(&alg, &form).unwrap();
        let d2 = carnot_lift::lie_differential_d0(&alg, &d1).unwrap();
        prop_assert!(d2.max_abs() < 1e-14);
    }
}

#[test]
fn d0_squares_to_zero_on_quaternionic() {
    let alg = StratifiedAlgebra::quaternionic_heisenberg(2).unwrap();
    let mu: Vec<f64> = (0..alg.total_dim()).map(|i| (i as f64 * 0.37).sin()).collect();
    let d1 = carnot_lift::lie_differential_d0(&alg, &InvariantForm::scalar_one_form(&mu, 0)).unwrap();
    let d2 = carnot_lift::lie_differential_d0(&alg, &d1).unwrap();
    assert!(d2.max_abs() < 1e-14);
}

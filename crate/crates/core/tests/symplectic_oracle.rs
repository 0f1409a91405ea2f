//! Symplectic checks against algebraic identities: `Pf(A)^2 = det(A)`,
//! symplectic groups generated by block shears, quaternion norms, and the
//! Moser correction measured by Jacobian determinants.

use carnot_lift::linalg::pfaffian;
use carnot_lift::{
    area_preserving_check, lambda_from_det, moser_correct, quaternion_right_matrix, quaternionic_rigidity_check,
    symplectic_defect, Chart, MoserOptions, SampledMap, SymplecticStructure,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn antisymmetric(n: usize, entries: &[f64]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            a[(i, j)] = entries[k];
            a[(j, i)] = -entries[k];
            k += 1;
        }
    }
    a
}

/// `[[I, S], [0, I]]`, `[[I, 0], [S, I]]` and `[[M, 0], [0, M^{-T}]]` products.
fn symplectic_from(n: usize, s1: &[f64], s2: &[f64], m: &[f64]) -> DMatrix<f64> {
    let sym = |v: &[f64]| {
        let raw = DMatrix::from_row_slice(n, n, v);
        (&raw + raw.transpose()) * 0.5
    };
    let id = DMatrix::<f64>::identity(n, n);
    let mut upper = DMatrix::<f64>::identity(2 * n, 2 * n);
    upper.view_mut((0, n), (n, n)).copy_from(&sym(s1));
    let mut lower = DMatrix::<f64>::identity(2 * n, 2 * n);
    lower.view_mut((n, 0), (n, n)).copy_from(&sym(s2));
    let mm = DMatrix::from_row_slice(n, n, m) + &id * 2.0;
    let mut block = DMatrix::<f64>::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&mm);
    block.view_mut((n, n), (n, n)).copy_from(&mm.clone().try_inverse().unwrap().transpose());
    upper * block * lower
}

fn quat_mul(p: [f64; 4], q: [f64; 4]) -> [f64; 4] {
    [
        p[0] * q[0] - p[1] * q[1] - p[2] * q[2] - p[3] * q[3],
        p[0] * q[1] + p[1] * q[0] + p[2] * q[3] - p[3] * q[2],
        p[0] * q[2] - p[1] * q[3] + p[2] * q[0] + p[3] * q[1],
        p[0] * q[3] + p[1] * q[2] - p[2] * q[1] + p[3] * q[0],
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pfaffian_squares_to_determinant(half in 1usize..=6, seed in prop::collection::vec(-1.0..1.0f64, 66)) {
        let n = 2 * half;
        let a = antisymmetric(n, &seed[..n * (n - 1) / 2]);
        let pf = pfaffian(&a).unwrap();
        let det = a.determinant();
        prop_assert!((pf * pf - det).abs() < 1e-9 * (1.0 + det.abs()), "n={n}: {pf}^2 vs {det}");
    }

    #[test]
    fn generated_symplectic_matrices_pass(n in 1usize..=3, v in prop::collection::vec(-0.4..0.4f64, 27)) {
        let a = symplectic_from(n, &v[..n * n], &v[9..9 + n * n], &v[18..18 + n * n]);
        let s = SymplecticStructure::standard(n).unwrap();
        let j = &s.forms()[0];
        prop_assert!(symplectic_defect(&a, j, 1.0).unwrap() < 1e-10);
        prop_assert!((lambda_from_det(&a, n).unwrap() - 1.0).abs() < 1e-10);
        let scaled = &a * 1.7;
        prop_assert!(symplectic_defect(&scaled, j, 1.7 * 1.7).unwrap() < 1e-9);
    }

    #[test]
    fn unit_quaternions_act_orthogonally(raw in prop::collection::vec(-1.0..1.0f64, 4), other in prop::collection::vec(-1.0..1.0f64, 4), n in 1usize..=3) {
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        let q = [raw[0] / norm, raw[1] / norm, raw[2] / norm, raw[3] / norm];
        let p = [other[0], other[1], other[2], other[3]];
        let pq = quat_mul(p, q);
        let sq = |v: [f64; 4]| v.iter().map(|x| x * x).sum::<f64>();
        prop_assert!((sq(pq) - sq(p)).abs() < 1e-12);

        let a = quaternion_right_matrix(q, n);
        let r = quaternionic_rigidity_check(&a, 1e-10).unwrap();
        prop_assert!(r.premise && r.implication_holds);
        prop_assert!(r.orthogonality_residual < 1e-10);
        // column action matches the quaternion product on the first slot
        let x = DMatrix::from_fn(4 * n, 1, |i, _| if i % n == 0 { p[i / n] } else { 0.0 });
        let y = &a * x;
        for c in 0..4 {
            prop_assert!((y[(c * n, 0)] - pq[c]).abs() < 1e-12);
        }
    }
}

#[test]
fn moser_flattens_a_stretched_square() {
    let chart = Chart::cube(2, -1.0, 1.0, 65).unwrap();
    let f = SampledMap::from_fn(chart, 2, |x, o| {
        o[0] = x[0] + 0.05 * x[0] * x[1] * x[1];
        o[1] = x[1] + 0.03 * (2.0 * x[0]).sin();
    })
    .unwrap();
    let before = area_preserving_check(&f).unwrap();
    assert!(before.max_det_defect > 0.04);
    let out = moser_correct(&f, &MoserOptions::default()).unwrap();
    let after = area_preserving_check(&out.map).unwrap();
    assert!(after.max_det_defect < 1e-3, "{after:?}");
    assert!(after.max_det_defect < before.max_det_defect / 20.0);
}

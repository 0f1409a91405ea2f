use serde::Serialize;

use super::algebra::StratifiedAlgebra;
use crate::error::{Error, Result};

/// Vector-valued alternating form on a Lie algebra, stored as a dense
/// coefficient table on the left-invariant coframe.
///
/// Component `v` of the value on basis vectors `(e_{i_1}, ..., e_{i_k})`
/// is `coeffs[v * dim^k + flat(i_1, ..., i_k)]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvariantForm {
    degree: usize,
    dim: usize,
    fiber_weights: Vec<usize>,
    weight: i64,
    coeffs: Vec<f64>,
}

impl InvariantForm {
    /// Zero form. `fiber_weights` lists the layer of each value component
    /// (use `[0]` for scalar forms).
    pub fn zero(degree: usize, dim: usize, fiber_weights: Vec<usize>, weight: i64) -> Result<Self> {
        if !(1..=3).contains(&degree) {
            return Err(Error::InvalidArgument(format!("unsupported form degree {degree}")));
        }
        let len = fiber_weights.len() * dim.pow(degree as u32);
        Ok(Self { degree, dim, fiber_weights, weight, coeffs: vec![0.0; len] })
    }

    /// Scalar 1-form `sum c_i omega^i`.
    pub fn scalar_one_form(coeffs: &[f64], weight: i64) -> Self {
        Self { degree: 1, dim: coeffs.len(), fiber_weights: vec![0], weight, coeffs: coeffs.to_vec() }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> usize {
        self.fiber_weights.len()
    }

    pub fn fiber_weights(&self) -> &[usize] {
        &self.fiber_weights
    }

    pub fn weight(&self) -> i64 {
        self.weight
    }

    fn flat(&self, component: usize, idx: &[usize]) -> usize {
        let mut f = component;
        for &i in idx {
            f = f * self.dim + i;
        }
        f
    }

    pub fn get(&self, component: usize, idx: &[usize]) -> f64 {
        self.coeffs[self.flat(component, idx)]
    }

    /// Sets the value on `idx` and every permutation of it, with sign.
    pub fn set(&mut self, component: usize, idx: &[usize], value: f64) {
        assert_eq!(idx.len(), self.degree);
        let mut perm: Vec<usize> = (0..idx.len()).collect();
        permutations(&mut perm, 0, &mut |p, sign| {
            let permuted: Vec<usize> = p.iter().map(|&k| idx[k]).collect();
            let f = self.flat(component, &permuted);
            self.coeffs[f] = sign * value;
        });
        let mut sorted = idx.to_vec();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            let f = self.flat(component, idx);
            self.coeffs[f] = 0.0;
        }
    }

    /// Value on an arbitrary tuple of coordinate vectors.
    pub fn eval(&self, component: usize, vectors: &[&[f64]]) -> f64 {
        assert_eq!(vectors.len(), self.degree);
        let mut total = 0.0;
        let mut idx = vec![0usize; self.degree];
        let count = self.dim.pow(self.degree as u32);
        for flat in 0..count {
            let mut rest = flat;
            for slot in (0..self.degree).rev() {
                idx[slot] = rest % self.dim;
                rest /= self.dim;
            }
            let c = self.coeffs[component * count + flat];
            if c == 0.0 {
                continue;
            }
            total += c * idx.iter().zip(vectors).map(|(&i, v)| v[i]).product::<f64>();
        }
        total
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// True when every nonzero entry `(v; I)` has `sum_I weight - weight(v)`
    /// equal to the declared weight.
    pub fn weight_consistent(&self, algebra: &StratifiedAlgebra) -> bool {
        let count = self.dim.pow(self.degree as u32);
        for (v, &fw) in self.fiber_weights.iter().enumerate() {
            for flat in 0..count {
                if self.coeffs[v * count + flat].abs() < 1e-14 {
                    continue;
                }
                let mut rest = flat;
                let mut w = 0i64;
                for _ in 0..self.degree {
                    w += algebra.weight(rest % self.dim) as i64;
                    rest /= self.dim;
                }
                if w - fw as i64 != self.weight {
                    return false;
                }
            }
        }
        true
    }
}

fn permutations(p: &mut Vec<usize>, start: usize, f: &mut impl FnMut(&[usize], f64)) {
    fn go(p: &mut Vec<usize>, start: usize, sign: f64, f: &mut impl FnMut(&[usize], f64)) {
        if start == p.len() {
            f(p, sign);
            return;
        }
        for i in start..p.len() {
            p.swap(start, i);
            go(p, start + 1, if i == start { sign } else { -sign }, f);
            p.swap(start, i);
        }
    }
    go(p, start, 1.0, f)
}

/// Chevalley–Eilenberg differential with trivial coefficients:
/// `d0 mu(X_0..X_k) = sum_{a<b} (-1)^{a+b} mu([X_a, X_b], X_0..^a..^b..X_k)`.
pub fn lie_differential_d0(algebra: &StratifiedAlgebra, form: &InvariantForm) -> Result<InvariantForm> {
    if form.degree > 2 {
        return Err(Error::InvalidArgument(format!("d0 supports degree 1 or 2, got {}", form.degree)));
    }
    if form.dim != algebra.total_dim() {
        return Err(Error::Structure("form and algebra dimensions differ".into()));
    }
    let n = form.dim;
    let k = form.degree;
    let mut out = InvariantForm::zero(k + 1, n, form.fiber_weights.clone(), form.weight)?;
    let count = n.pow((k + 1) as u32);
    let mut idx = vec![0usize; k + 1];
    let mut args = Vec::with_capacity(k);
    for v in 0..form.components() {
        for flat in 0..count {
            let mut rest = flat;
            for slot in (0..=k).rev() {
                idx[slot] = rest % n;
                rest /= n;
            }
            let mut total = 0.0;
            for a in 0..=k {
                for b in (a + 1)..=k {
                    let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
                    for m in 0..n {
                        let c = algebra.constant(idx[a], idx[b], m);
                        if c == 0.0 {
                            continue;
                        }
                        args.clear();
                        args.push(m);
                        args.extend(idx.iter().enumerate().filter(|&(s, _)| s != a && s != b).map(|(_, &i)| i));
                        total += sign * c * form.get(v, &args);
                    }
                }
            }
            out.coeffs[v * count + flat] = total;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d0_of_heisenberg_contact_form() {
        let h = StratifiedAlgebra::heisenberg(1).unwrap();
        let omega = InvariantForm::scalar_one_form(&[0.0, 0.0, 1.0], 2);
        let d = lie_differential_d0(&h, &omega).unwrap();
        // d omega(X1, X2) = -omega([X1, X2]) = -1
        assert_eq!(d.get(0, &[0, 1]), -1.0);
        assert_eq!(d.get(0, &[1, 0]), 1.0);
        assert!(d.weight_consistent(&h));
    }

    #[test]
    fn d0_cocycle_example_on_three_dim_base() {
        let f2 = StratifiedAlgebra::heisenberg(1).unwrap();
        let mut rho = InvariantForm::zero(2, 3, vec![3], 0).unwrap();
        rho.set(0, &[0, 2], 1.0);
        assert!(rho.weight_consistent(&f2));
        let d = lie_differential_d0(&f2, &rho).unwrap();
        assert_eq!(d.get(0, &[0, 1, 2]), 0.0);
        assert_eq!(d.max_abs(), 0.0);
    }

    #[test]
    fn abelian_d0_vanishes() {
        let r = StratifiedAlgebra::new("r3", vec![3], &[]).unwrap();
        let mut rho = InvariantForm::zero(2, 3, vec![2], 0).unwrap();
        rho.set(0, &[0, 1], 2.5);
        assert_eq!(lie_differential_d0(&r, &rho).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn set_is_antisymmetric() {
        let mut f = InvariantForm::zero(3, 4, vec![0], 3).unwrap();
        f.set(0, &[0, 1, 3], 2.0);
        assert_eq!(f.get(0, &[1, 0, 3]), -2.0);
        assert_eq!(f.get(0, &[3, 0, 1]), 2.0);
        assert_eq!(f.eval(0, &[&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 1.0]]), 2.0);
    }

    #[test]
    fn degree_three_is_refused() {
        let h = StratifiedAlgebra::heisenberg(1).unwrap();
        let f = InvariantForm::zero(3, 3, vec![0], 0).unwrap();
        assert!(lie_differential_d0(&h, &f).is_err());
    }
}

use std::sync::Arc;

use nalgebra::DMatrix;

use super::algebra::StratifiedAlgebra;
use super::bch::{self, BchTerm};
use crate::error::{Error, Result};

/// A validated stratified algebra together with its group law in
/// first-kind exponential coordinates.
///
/// Cheap to clone; all clones share the same algebra.
#[derive(Clone, Debug)]
pub struct CarnotGroup {
    inner: Arc<Inner>,
}

#[derive(Debug)]
struct Inner {
    algebra: StratifiedAlgebra,
    bch: Vec<BchTerm>,
    linear_in_y: Vec<BchTerm>,
    layers: [Vec<usize>; 3],
}

impl PartialEq for CarnotGroup {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self.inner.algebra == other.inner.algebra
    }
}

impl CarnotGroup {
    /// Wraps an algebra after validating it.
    pub fn new(algebra: StratifiedAlgebra) -> Result<Self> {
        let report = algebra.validate();
        if !report.is_valid() {
            return Err(Error::Validation(report.to_string()));
        }
        let bch = bch::dynkin_terms(algebra.step());
        let linear_in_y = bch.iter().filter(|t| t.y_count() == 1).cloned().collect();
        let pick = |w: usize| (0..algebra.total_dim()).filter(|&i| algebra.weight(i) == w).collect();
        let layers = [pick(1), pick(2), pick(3)];
        Ok(Self { inner: Arc::new(Inner { algebra, bch, linear_in_y, layers }) })
    }

    /// Convenience for [`StratifiedAlgebra::builtin`] followed by [`new`](Self::new).
    pub fn builtin(name: &str) -> Result<Self> {
        Self::new(StratifiedAlgebra::builtin(name)?)
    }

    pub fn algebra(&self) -> &StratifiedAlgebra {
        &self.inner.algebra
    }

    pub fn dim(&self) -> usize {
        self.inner.algebra.total_dim()
    }

    pub fn step(&self) -> usize {
        self.inner.algebra.step()
    }

    pub fn weights(&self) -> &[usize] {
        self.inner.algebra.weights()
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement { coords: vec![0.0; self.dim()], group: self.clone() }
    }

    pub fn element(&self, coords: Vec<f64>) -> Result<GroupElement> {
        if coords.len() != self.dim() {
            return Err(Error::Structure(format!(
                "expected {} coordinates, got {}",
                self.dim(),
                coords.len()
            )));
        }
        Ok(GroupElement { coords, group: self.clone() })
    }

    /// Group law `p * q`; closed layered formulas for step <= 3, Dynkin
    /// series otherwise.
    pub fn mul(&self, p: &[f64], q: &[f64]) -> Vec<f64> {
        if self.step() <= 3 {
            self.mul_closed(p, q)
        } else {
            self.mul_bch(p, q)
        }
    }

    /// Group law via the truncated Dynkin series.
    pub fn mul_bch(&self, p: &[f64], q: &[f64]) -> Vec<f64> {
        bch::evaluate(&self.inner.algebra, &self.inner.bch, p, q)
    }

    /// Group law via the explicit coordinate formulas for step <= 3.
    ///
    /// # Panics
    /// If the step exceeds 3.
    pub fn mul_closed(&self, p: &[f64], q: &[f64]) -> Vec<f64> {
        assert!(self.step() <= 3, "closed form needs step <= 3");
        let layered = self.layered();
        let mut out: Vec<f64> = p.iter().zip(q).map(|(a, b)| a + b).collect();
        let w = layered.second_layer_bracket(p, q);
        for (idx, &k) in layered.l2.iter().enumerate() {
            out[k] += 0.5 * w[idx];
        }
        for &m in layered.l3 {
            let mut mixed = 0.0;
            let mut nested = 0.0;
            for &i in layered.l1 {
                for (idx, &k) in layered.l2.iter().enumerate() {
                    let beta = layered.alg.constant(i, k, m);
                    if beta == 0.0 {
                        continue;
                    }
                    mixed += beta * (p[i] * q[k] - p[k] * q[i]);
                    nested += (p[i] - q[i]) * w[idx] * beta;
                }
            }
            out[m] += 0.5 * mixed + nested / 12.0;
        }
        out
    }

    fn layered(&self) -> Layered<'_> {
        let [l1, l2, l3] = &self.inner.layers;
        Layered { alg: &self.inner.algebra, l1, l2, l3 }
    }

    pub fn inv(&self, p: &[f64]) -> Vec<f64> {
        p.iter().map(|x| -x).collect()
    }

    /// `p^{-1} * q`.
    pub fn left_quotient(&self, p: &[f64], q: &[f64]) -> Vec<f64> {
        if self.step() <= 3 {
            self.left_quotient_closed(p, q)
        } else {
            self.mul_bch(&self.inv(p), q)
        }
    }

    /// `p^{-1} * q` via the explicit difference formulas for step <= 3.
    ///
    /// # Panics
    /// If the step exceeds 3.
    pub fn left_quotient_closed(&self, p: &[f64], q: &[f64]) -> Vec<f64> {
        assert!(self.step() <= 3, "closed form needs step <= 3");
        let layered = self.layered();
        let mut out: Vec<f64> = p.iter().zip(q).map(|(a, b)| b - a).collect();
        let w = layered.second_layer_bracket(p, q);
        for (idx, &k) in layered.l2.iter().enumerate() {
            out[k] -= 0.5 * w[idx];
        }
        for &m in layered.l3 {
            let mut mixed = 0.0;
            let mut nested = 0.0;
            for &i in layered.l1 {
                for (idx, &k) in layered.l2.iter().enumerate() {
                    let beta = layered.alg.constant(i, k, m);
                    if beta == 0.0 {
                        continue;
                    }
                    mixed += beta * (p[i] * q[k] - p[k] * q[i]);
                    nested += (p[i] + q[i]) * w[idx] * beta;
                }
            }
            out[m] += -0.5 * mixed + nested / 12.0;
        }
        out
    }

    /// `delta_lambda`: coordinate `i` scaled by `lambda^weight(i)`.
    pub fn dilate(&self, lambda: f64, p: &[f64]) -> Vec<f64> {
        p.iter().zip(self.weights()).map(|(x, &w)| x * lambda.powi(w as i32)).collect()
    }

    /// Quasi-metric `sum |(q^{-1} p)_j|^{1/weight(j)}`.
    pub fn quasi_metric(&self, p: &[f64], q: &[f64]) -> f64 {
        let d = self.left_quotient(q, p);
        self.gauge(&d)
    }

    /// Quasi-norm of a single element, `d_K(e, p)` up to the inverse.
    pub fn gauge(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(self.weights())
            .map(|(x, &w)| if w == 1 { x.abs() } else { x.abs().powf(1.0 / w as f64) })
            .sum()
    }

    /// Matrix whose column `j` is the left-invariant field `X_j` at `p`.
    pub fn frame(&self, p: &[f64]) -> DMatrix<f64> {
        if self.step() <= 3 {
            self.frame_closed(p)
        } else {
            self.frame_series(p)
        }
    }

    /// Frame from the part of the Dynkin series linear in the second argument.
    pub fn frame_series(&self, p: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = bch::evaluate(&self.inner.algebra, &self.inner.linear_in_y, p, &e);
            for (i, v) in col.into_iter().enumerate() {
                m[(i, j)] = v;
            }
            e[j] = 0.0;
        }
        m
    }

    /// Frame from the explicit step <= 3 expressions.
    ///
    /// # Panics
    /// If the step exceeds 3.
    pub fn frame_closed(&self, p: &[f64]) -> DMatrix<f64> {
        assert!(self.step() <= 3, "closed form needs step <= 3");
        let layered = self.layered();
        let alg = layered.alg;
        let n = self.dim();
        let mut m = DMatrix::identity(n, n);
        for &i in layered.l1 {
            for &k in layered.l2 {
                let s: f64 = layered.l1.iter().map(|&j| alg.constant(i, j, k) * p[j]).sum();
                m[(k, i)] = -0.5 * s;
            }
            for &mm in layered.l3 {
                let mut s = 0.0;
                for &j in layered.l2 {
                    s -= 0.5 * p[j] * alg.constant(i, j, mm);
                }
                for &l in layered.l1 {
                    for &k in layered.l2 {
                        let beta = alg.constant(l, k, mm);
                        if beta == 0.0 {
                            continue;
                        }
                        let a: f64 = layered.l1.iter().map(|&j| alg.constant(i, j, k) * p[j]).sum();
                        s -= p[l] * a * beta / 12.0;
                    }
                }
                m[(mm, i)] = s;
            }
        }
        for &k in layered.l2 {
            for &mm in layered.l3 {
                let s: f64 = layered.l1.iter().map(|&i| alg.constant(i, k, mm) * p[i]).sum();
                m[(mm, k)] = 0.5 * s;
            }
        }
        m
    }

    /// Matrix whose row `j` holds the coordinate coefficients of the dual
    /// left-invariant 1-form at `p`; the inverse of [`frame`](Self::frame).
    pub fn coframe(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let frame = self.frame(p);
        let n = self.dim();
        let unit_lower = (0..n).all(|i| frame[(i, i)] == 1.0 && (i + 1..n).all(|j| frame[(i, j)] == 0.0));
        if unit_lower {
            return Ok(crate::linalg::unit_lower_inverse(&frame));
        }
        frame.try_inverse().ok_or_else(|| Error::Structure("singular frame matrix".into()))
    }

    /// Left translation of a tangent vector at `p` back to the identity.
    pub fn left_trivialize(&self, p: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let c = self.coframe(p)?;
        Ok((0..self.dim()).map(|i| (0..self.dim()).map(|j| c[(i, j)] * v[j]).sum()).collect())
    }
}

/// Basis indices of the first three layers.
struct Layered<'a> {
    alg: &'a StratifiedAlgebra,
    l1: &'a [usize],
    l2: &'a [usize],
    l3: &'a [usize],
}

impl Layered<'_> {
    /// Layer-2 part of `[p, q]` restricted to first-layer inputs.
    fn second_layer_bracket(&self, p: &[f64], q: &[f64]) -> Vec<f64> {
        self.l2
            .iter()
            .map(|&k| {
                let mut s = 0.0;
                for (a, &i) in self.l1.iter().enumerate() {
                    for &j in &self.l1[a + 1..] {
                        let alpha = self.alg.constant(i, j, k);
                        if alpha != 0.0 {
                            s += alpha * (p[i] * q[j] - p[j] * q[i]);
                        }
                    }
                }
                s
            })
            .collect()
    }
}

/// Point of a Carnot group in first-kind exponential coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    coords: Vec<f64>,
    group: CarnotGroup,
}

impl GroupElement {
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn group(&self) -> &CarnotGroup {
        &self.group
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

fn same_group(p: &GroupElement, q: &GroupElement) -> Result<()> {
    if p.group != q.group {
        return Err(Error::Structure("elements belong to different algebras".into()));
    }
    Ok(())
}

pub fn multiply(p: &GroupElement, q: &GroupElement) -> Result<GroupElement> {
    same_group(p, q)?;
    Ok(GroupElement { coords: p.group.mul(&p.coords, &q.coords), group: p.group.clone() })
}

pub fn inverse(p: &GroupElement) -> GroupElement {
    GroupElement { coords: p.group.inv(&p.coords), group: p.group.clone() }
}

pub fn left_quotient(p: &GroupElement, q: &GroupElement) -> Result<GroupElement> {
    same_group(p, q)?;
    Ok(GroupElement { coords: p.group.left_quotient(&p.coords, &q.coords), group: p.group.clone() })
}

pub fn dilate(lambda: f64, p: &GroupElement) -> Result<GroupElement> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("dilation factor must be positive, got {lambda}")));
    }
    Ok(GroupElement { coords: p.group.dilate(lambda, &p.coords), group: p.group.clone() })
}

pub fn quasi_metric(p: &GroupElement, q: &GroupElement) -> Result<f64> {
    same_group(p, q)?;
    Ok(p.group.quasi_metric(&p.coords, &q.coords))
}

pub fn left_invariant_frame(p: &GroupElement) -> DMatrix<f64> {
    p.group.frame(&p.coords)
}

pub fn contact_coframe(p: &GroupElement) -> Result<DMatrix<f64>> {
    p.group.coframe(&p.coords)
}

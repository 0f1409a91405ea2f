//! Infinitesimal generators of contact flows on the step-3 filiform group,
//! in the chart where
//! `X1 = d1`, `X2 = d2 + x1 d3 + x1^2/2 d4`, `X3 = d3 + x1 d4`, `X4 = d4`
//! and the top coframe form is `omega4 = x1^2/2 dx2 - x1 dx3 + dx4`.

use serde::Serialize;

use super::sampled::MapSource;
use crate::error::{Error, Result};

/// Residuals of a candidate generator `V = p1 X1 + p2 X2 + p3 X3 + p4 X4`
/// with `p1 = d3 p4` and `p3 = -d1 p4`.
#[derive(Clone, Debug, Serialize)]
pub struct GeneratorReport {
    /// `max |x1 p1 + d2 p4|`, the `dx2` coefficient of the Lie derivative.
    pub x2_constraint: f64,
    /// `max |x1 p1 - d2 p4|`, the same constraint with the opposite sign.
    pub opposite_sign_constraint: f64,
    /// `max |d4 p4|`.
    pub x4_constraint: f64,
    /// `max |L_V omega4|` from `d(i_V omega4) + i_V d omega4`.
    pub cartan_residual: f64,
    /// `max |L_V omega4|` from the coordinate formula for the Lie derivative.
    pub direct_residual: f64,
    /// Largest difference between the two evaluations.
    pub route_mismatch: f64,
    /// Names of constraints above tolerance.
    pub violations: Vec<String>,
    pub passed: bool,
}

fn scalar(field: &dyn MapSource, x: &[f64]) -> Result<f64> {
    Ok(field.eval(x)?[0])
}

fn partial(field: &dyn MapSource, x: &[f64], axis: usize, h: f64) -> Result<f64> {
    let mut p = x.to_vec();
    p[axis] = x[axis] + h;
    let fp = scalar(field, &p)?;
    p[axis] = x[axis] - h;
    let fm = scalar(field, &p)?;
    Ok((fp - fm) / (2.0 * h))
}

/// Coordinate components of `V` at `x`.
fn field_components(p4: &dyn MapSource, p2: &dyn MapSource, x: &[f64], h: f64) -> Result<[f64; 4]> {
    let q1 = partial(p4, x, 2, h)?;
    let q3 = -partial(p4, x, 0, h)?;
    let q2 = scalar(p2, x)?;
    let q4 = scalar(p4, x)?;
    let x1 = x[0];
    Ok([q1, q2, x1 * q2 + q3, 0.5 * x1 * x1 * q2 + x1 * q3 + q4])
}

fn omega4(x: &[f64]) -> [f64; 4] {
    [0.0, 0.5 * x[0] * x[0], -x[0], 1.0]
}

/// Evaluates the generator constraints at `centers` with central
/// differences of step `h`.
pub fn contact_generator_check(
    p4: &dyn MapSource,
    p2: &dyn MapSource,
    centers: &[Vec<f64>],
    h: f64,
    tol: f64,
) -> Result<GeneratorReport> {
    if !(h > 0.0) || centers.is_empty() {
        return Err(Error::InvalidArgument("stencil needs a positive step and at least one point".into()));
    }
    for f in [p4, p2] {
        if f.source_dim() != 4 || f.target_dim() != 1 {
            return Err(Error::Structure("generator coefficients must be scalar fields on four coordinates".into()));
        }
    }
    if centers.iter().any(|c| c.len() != 4) {
        return Err(Error::Structure("stencil centers need four coordinates".into()));
    }
    let mut r = GeneratorReport {
        x2_constraint: 0.0,
        opposite_sign_constraint: 0.0,
        x4_constraint: 0.0,
        cartan_residual: 0.0,
        direct_residual: 0.0,
        route_mismatch: 0.0,
        violations: Vec::new(),
        passed: false,
    };
    for x in centers {
        let grad = [partial(p4, x, 0, h)?, partial(p4, x, 1, h)?, partial(p4, x, 2, h)?, partial(p4, x, 3, h)?];
        let p1 = grad[2];
        let p3 = -grad[0];
        let x1 = x[0];
        r.x2_constraint = r.x2_constraint.max((x1 * p1 + grad[1]).abs());
        r.opposite_sign_constraint = r.opposite_sign_constraint.max((x1 * p1 - grad[1]).abs());
        r.x4_constraint = r.x4_constraint.max(grad[3].abs());

        // i_V omega4 = p4 and i_V d omega4 = p3 dx1 + x1 p1 dx2 - p1 dx3
        let cartan = [grad[0] + p3, grad[1] + x1 * p1, grad[2] - p1, grad[3]];

        // (L_V w)_i = V^j d_j w_i + w_j d_i V^j
        let v = field_components(p4, p2, x, h)?;
        let w = omega4(x);
        let dw = |j: usize| -> [f64; 4] {
            match j {
                0 => [0.0, x1, -1.0, 0.0],
                _ => [0.0; 4],
            }
        };
        let mut direct = [0.0; 4];
        for i in 0..4 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let (vp, vm) = (field_components(p4, p2, &xp, h)?, field_components(p4, p2, &xm, h)?);
            let mut s = 0.0;
            for j in 0..4 {
                s += v[j] * dw(j)[i] + w[j] * (vp[j] - vm[j]) / (2.0 * h);
            }
            direct[i] = s;
        }
        for i in 0..4 {
            r.cartan_residual = r.cartan_residual.max(cartan[i].abs());
            r.direct_residual = r.direct_residual.max(direct[i].abs());
            r.route_mismatch = r.route_mismatch.max((cartan[i] - direct[i]).abs());
        }
    }
    if r.x2_constraint > tol {
        r.violations.push("x1*p1 = -d2(p4)".into());
    }
    if r.x4_constraint > tol {
        r.violations.push("d4(p4) = 0".into());
    }
    if r.direct_residual > tol {
        r.violations.push("L_V omega4 = 0".into());
    }
    r.passed = r.violations.is_empty();
    Ok(r)
}

/// Points of a uniform `per_axis^4` grid on the box `[lo, hi]^4`.
pub fn box_centers(lo: f64, hi: f64, per_axis: usize) -> Vec<Vec<f64>> {
    let n = per_axis.max(1);
    let at = |i: usize| if n == 1 { 0.5 * (lo + hi) } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
    let mut out = Vec::with_capacity(n.pow(4));
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    out.push(vec![at(a), at(b), at(c), at(d)]);
                }
            }
        }
    }
    out
}

//! Symplectic structures on the horizontal layers of Heisenberg and
//! quaternionic Heisenberg groups, conformal-symplectic checks and the
//! Moser correction of nearly symplectic maps.

mod moser;

pub use moser::{
    area_preserving_check, moser_correct, poincare_primitive, AreaReport, MoserOptions, MoserResult, Primitive,
};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// One or three constant symplectic matrices on `R^{2n}` or `R^{4n}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticStructure {
    n: usize,
    forms: Vec<DMatrix<f64>>,
}

fn place_block(m: &mut DMatrix<f64>, n: usize, row: usize, col: usize, sign: f64) {
    for i in 0..n {
        m[(row * n + i, col * n + i)] = sign;
    }
}

impl SymplecticStructure {
    /// `J = [[0, I], [-I, 0]]` on coordinates `(x_1..x_n, y_1..y_n)`.
    pub fn standard(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidArgument("half-dimension must be at least 1".into()));
        }
        let mut j = DMatrix::zeros(2 * n, 2 * n);
        place_block(&mut j, n, 0, 1, 1.0);
        place_block(&mut j, n, 1, 0, -1.0);
        Ok(Self { n, forms: vec![j] })
    }

    /// Matrices of `dx^dy + dz^dw`, `dx^dz + dw^dy` and `-(dx^dw + dy^dz)`
    /// on coordinates in blocks `(x, y, z, w)`, so that `J3 = J1 J2`.
    pub fn quaternionic(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidArgument("quaternionic dimension must be at least 1".into()));
        }
        let d = 4 * n;
        let mut j1 = DMatrix::zeros(d, d);
        place_block(&mut j1, n, 0, 1, 1.0);
        place_block(&mut j1, n, 1, 0, -1.0);
        place_block(&mut j1, n, 2, 3, 1.0);
        place_block(&mut j1, n, 3, 2, -1.0);
        let mut j2 = DMatrix::zeros(d, d);
        place_block(&mut j2, n, 0, 2, 1.0);
        place_block(&mut j2, n, 2, 0, -1.0);
        place_block(&mut j2, n, 1, 3, -1.0);
        place_block(&mut j2, n, 3, 1, 1.0);
        let mut j3 = DMatrix::zeros(d, d);
        place_block(&mut j3, n, 0, 3, -1.0);
        place_block(&mut j3, n, 1, 2, -1.0);
        place_block(&mut j3, n, 2, 1, 1.0);
        place_block(&mut j3, n, 3, 0, 1.0);
        Ok(Self { n, forms: vec![j1, j2, j3] })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.forms[0].nrows()
    }

    pub fn forms(&self) -> &[DMatrix<f64>] {
        &self.forms
    }

    pub fn is_quaternionic(&self) -> bool {
        self.forms.len() == 3
    }

    /// Largest entry of `J^T + J`, `J^2 + I` and, for three forms,
    /// `J1 J2 - J3`.
    pub fn structure_residual(&self) -> f64 {
        let id = DMatrix::<f64>::identity(self.dim(), self.dim());
        let mut worst: f64 = 0.0;
        for j in &self.forms {
            worst = worst.max((j.transpose() + j).abs().max());
            worst = worst.max((j * j + &id).abs().max());
        }
        if self.is_quaternionic() {
            worst = worst.max((&self.forms[0] * &self.forms[1] - &self.forms[2]).abs().max());
        }
        worst
    }

    /// Writes the matrices one after another as CSV rows.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        for (k, j) in self.forms.iter().enumerate() {
            writeln!(out, "# J{}", k + 1)?;
            for row in j.row_iter() {
                let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
                writeln!(out, "{}", cells.join(","))?;
            }
        }
        Ok(())
    }
}

pub fn quaternionic_structure(n: usize) -> Result<SymplecticStructure> {
    SymplecticStructure::quaternionic(n)
}

/// `max |A^T J A - lambda J|`.
pub fn symplectic_defect(a: &DMatrix<f64>, j: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    let d = j.nrows();
    if j.ncols() != d || d % 2 == 1 {
        return Err(Error::InvalidArgument("symplectic matrix must be square of even size".into()));
    }
    if a.nrows() != d || a.ncols() != d {
        return Err(Error::Structure(format!("matrix is {}x{}, form is {d}x{d}", a.nrows(), a.ncols())));
    }
    Ok((a.transpose() * j * a - j * lambda).abs().max())
}

/// `det(A)^{1/n}`, the real root for odd `n`.
pub fn lambda_from_det(a: &DMatrix<f64>, n: usize) -> Result<f64> {
    if a.nrows() != a.ncols() || n == 0 {
        return Err(Error::InvalidArgument("need a square matrix and a positive root order".into()));
    }
    let det = a.determinant();
    if det < 0.0 && n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("negative determinant {det} has no real root of even order {n}")));
    }
    Ok(det.signum() * det.abs().powf(1.0 / n as f64))
}

/// Matrix of right multiplication by the quaternion `q = (a, b, c, d)` on
/// each `(x_m, y_m, z_m, w_m)` slot of `R^{4n}`.
pub fn quaternion_right_matrix(q: [f64; 4], n: usize) -> DMatrix<f64> {
    let mul = |p: [f64; 4], q: [f64; 4]| {
        [
            p[0] * q[0] - p[1] * q[1] - p[2] * q[2] - p[3] * q[3],
            p[0] * q[1] + p[1] * q[0] + p[2] * q[3] - p[3] * q[2],
            p[0] * q[2] - p[1] * q[3] + p[2] * q[0] + p[3] * q[1],
            p[0] * q[3] + p[1] * q[2] - p[2] * q[1] + p[3] * q[0],
        ]
    };
    let mut m = DMatrix::zeros(4 * n, 4 * n);
    for col in 0..4 {
        let mut e = [0.0; 4];
        e[col] = 1.0;
        let image = mul(e, q);
        for slot in 0..n {
            for (row, v) in image.iter().enumerate() {
                m[(row * n + slot, col * n + slot)] = *v;
            }
        }
    }
    m
}

/// Residuals of a matrix against the three quaternionic forms.
#[derive(Clone, Debug, Serialize)]
pub struct RigidityReport {
    /// `max |A^T J_i A - J_i|` for `i = 1, 2, 3`.
    pub form_residuals: [f64; 3],
    /// `max |A A^T - I|`.
    pub orthogonality_residual: f64,
    /// Whether the first two forms are preserved to `tol`.
    pub premise: bool,
    /// Premise false, or both conclusions hold within `factor * tol`.
    pub implication_holds: bool,
}

/// Constant in the implication check.
pub const RIGIDITY_FACTOR: f64 = 100.0;

pub fn quaternionic_rigidity_check(a: &DMatrix<f64>, tol: f64) -> Result<RigidityReport> {
    let d = a.nrows();
    if a.ncols() != d || !d.is_multiple_of(4) || d == 0 {
        return Err(Error::InvalidArgument("matrix must be square of size 4n".into()));
    }
    let det = a.determinant();
    if det.abs() < 1e-12 {
        return Err(Error::Degenerate(format!("singular matrix, det = {det:e}")));
    }
    let s = SymplecticStructure::quaternionic(d / 4)?;
    let mut r = [0.0; 3];
    for (k, j) in s.forms().iter().enumerate() {
        r[k] = symplectic_defect(a, j, 1.0)?;
    }
    let orth = (a * a.transpose() - DMatrix::<f64>::identity(d, d)).abs().max();
    let premise = r[0] < tol && r[1] < tol;
    let bound = RIGIDITY_FACTOR * tol;
    let implication_holds = !premise || (r[2] < bound && orth < bound);
    Ok(RigidityReport { form_residuals: r, orthogonality_residual: orth, premise, implication_holds })
}

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::carnot::{CarnotGroup, InvariantForm};
use crate::error::{Error, Result};
use crate::extension::{CentralExtension, PotentialForm};

/// Time grid on `[0, 1]` with values on each segment, linear in between.
///
/// Segment `i` runs from `times[i]` to `times[i + 1]` and carries its own
/// start and end value, so both continuous piecewise-linear controls and
/// piecewise-constant controls (with jumps at nodes) are representable.
#[derive(Clone, Debug, PartialEq)]
pub struct Control {
    times: Vec<f64>,
    starts: Vec<Vec<f64>>,
    ends: Vec<Vec<f64>>,
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Err(Error::InvalidArgument("time grid needs at least two nodes".into()));
    }
    if times[0] != 0.0 || *times.last().unwrap() != 1.0 {
        return Err(Error::InvalidArgument("time grid must start at 0 and end at 1".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("time grid must be strictly increasing".into()));
    }
    Ok(())
}

fn uniform_dims(values: &[Vec<f64>]) -> Result<usize> {
    let dim = values.first().map_or(0, Vec::len);
    if values.iter().any(|v| v.len() != dim) {
        return Err(Error::InvalidArgument("control values have different lengths".into()));
    }
    Ok(dim)
}

impl Control {
    /// Continuous control interpolating `values[k]` at `times[k]`.
    pub fn piecewise_linear(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        check_times(&times)?;
        if values.len() != times.len() {
            return Err(Error::InvalidArgument("one control value per node expected".into()));
        }
        uniform_dims(&values)?;
        let starts = values[..values.len() - 1].to_vec();
        let ends = values[1..].to_vec();
        Ok(Self { times, starts, ends })
    }

    /// Control constant on each segment.
    pub fn piecewise_constant(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        check_times(&times)?;
        if values.len() + 1 != times.len() {
            return Err(Error::InvalidArgument("one control value per segment expected".into()));
        }
        uniform_dims(&values)?;
        Ok(Self { times, starts: values.clone(), ends: values })
    }

    /// Uniform grid with `nodes` nodes and a constant value.
    pub fn constant(value: Vec<f64>, nodes: usize) -> Result<Self> {
        let n = nodes.max(2);
        let times = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
        Self::piecewise_constant(times, vec![value; n - 1])
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn segments(&self) -> usize {
        self.times.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.starts[0].len()
    }

    /// Start and end value of segment `i`.
    pub fn segment(&self, i: usize) -> (&[f64], &[f64]) {
        (&self.starts[i], &self.ends[i])
    }

    /// Every segment split in two; piecewise-linear values are preserved.
    pub fn refined(&self) -> Self {
        let mut times = Vec::with_capacity(2 * self.times.len());
        let mut starts = Vec::new();
        let mut ends = Vec::new();
        for i in 0..self.segments() {
            let (a, b) = self.segment(i);
            let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
            times.push(self.times[i]);
            times.push(0.5 * (self.times[i] + self.times[i + 1]));
            starts.push(a.to_vec());
            ends.push(mid.clone());
            starts.push(mid);
            ends.push(b.to_vec());
        }
        times.push(1.0);
        Self { times, starts, ends }
    }
}

/// Sampled curve in a Carnot group.
#[derive(Clone, Debug)]
pub struct HorizontalCurve {
    group: CarnotGroup,
    times: Vec<f64>,
    points: Vec<Vec<f64>>,
    control: Option<Control>,
}

impl HorizontalCurve {
    pub fn new(group: CarnotGroup, times: Vec<f64>, points: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != points.len() || times.len() < 2 {
            return Err(Error::InvalidArgument("curve needs matching times and points, at least two".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("curve times must be strictly increasing".into()));
        }
        if points.iter().any(|p| p.len() != group.dim()) {
            return Err(Error::Structure("curve point dimension differs from the group".into()));
        }
        Ok(Self { group, times, points, control: None })
    }

    /// Curve through `points` at uniform times on `[0, 1]`.
    pub fn uniform(group: CarnotGroup, points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len().max(2);
        let times = (0..points.len()).map(|k| k as f64 / (n - 1) as f64).collect();
        Self::new(group, times, points)
    }

    /// Closed polygon through `vertices`, with the first vertex repeated at
    /// the end.
    pub fn closed_polygon(group: CarnotGroup, vertices: &[Vec<f64>]) -> Result<Self> {
        let mut pts = vertices.to_vec();
        if let Some(first) = vertices.first() {
            pts.push(first.clone());
        }
        Self::uniform(group, pts)
    }

    pub fn group(&self) -> &CarnotGroup {
        &self.group
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn control(&self) -> Option<&Control> {
        self.control.as_ref()
    }

    pub fn start(&self) -> &[f64] {
        &self.points[0]
    }

    pub fn end(&self) -> &[f64] {
        self.points.last().unwrap()
    }

    pub fn is_closed(&self, tol: f64) -> bool {
        self.start().iter().zip(self.end()).all(|(a, b)| (a - b).abs() <= tol)
    }

    /// Euclidean length of the coordinate polyline.
    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| distance(&w[0], &w[1])).sum()
    }

    /// Largest non-horizontal component of the left-trivialized chord
    /// velocity, evaluated at chord midpoints.
    pub fn horizontality_defect(&self) -> Result<f64> {
        let weights = self.group.weights();
        let mut worst: f64 = 0.0;
        for (w, t) in self.points.windows(2).zip(self.times.windows(2)) {
            let dt = t[1] - t[0];
            let mid: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| 0.5 * (a + b)).collect();
            let vel: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| (b - a) / dt).collect();
            let body = self.group.left_trivialize(&mid, &vel)?;
            for (v, &wt) in body.iter().zip(weights) {
                if wt > 1 {
                    worst = worst.max(v.abs());
                }
            }
        }
        Ok(worst)
    }

    /// CSV with header `t,x1,...,xn`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut line = String::from("t");
        for i in 1..=self.group.dim() {
            write!(line, ",x{i}").unwrap();
        }
        writeln!(out, "{line}")?;
        for (t, p) in self.times.iter().zip(&self.points) {
            line.clear();
            write!(line, "{t}").unwrap();
            for x in p {
                write!(line, ",{x}").unwrap();
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(group: CarnotGroup, input: R) -> Result<Self> {
        let rows = read_numeric_csv(input, Some(group.dim() + 1))?;
        let times = rows.iter().map(|r| r[0]).collect();
        let points = rows.into_iter().map(|r| r[1..].to_vec()).collect();
        Self::new(group, times, points)
    }
}

/// Numeric CSV rows; a first line starting with a letter is taken as a
/// header. Errors name the offending line and field.
pub fn read_numeric_csv<R: BufRead>(input: R, width: Option<usize>) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (no, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if no == 0 && trimmed.starts_with(|c: char| c.is_ascii_alphabetic()) {
            continue;
        }
        let mut row = Vec::new();
        for (k, field) in trimmed.split(',').enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Malformed(format!("line {}, field {}: cannot parse {:?} as a number", no + 1, k + 1, field))
            })?;
            row.push(v);
        }
        if let Some(w) = width {
            if row.len() != w {
                return Err(Error::Malformed(format!(
                    "line {}: expected {w} fields, found {}",
                    no + 1,
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Malformed("no data rows".into()));
    }
    Ok(rows)
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Integrates `dot(gamma) = X(gamma) u` with one classical fourth-order step
/// per control segment.
///
/// Control values are either first-layer coordinates or full algebra
/// vectors whose higher-layer entries vanish.
pub fn endpoint(control: &Control, start: &[f64], group: &CarnotGroup) -> Result<HorizontalCurve> {
    if start.len() != group.dim() {
        return Err(Error::Structure("start point dimension differs from the group".into()));
    }
    let horizontal: Vec<usize> = (0..group.dim()).filter(|&i| group.weights()[i] == 1).collect();
    let lift = |u: &[f64]| -> Result<Vec<f64>> {
        if u.len() == horizontal.len() {
            return Ok(u.to_vec());
        }
        if u.len() != group.dim() {
            return Err(Error::Structure(format!(
                "control has {} components, group rank is {}",
                u.len(),
                horizontal.len()
            )));
        }
        if u.iter().zip(group.weights()).any(|(v, &w)| w > 1 && *v != 0.0) {
            return Err(Error::InvalidArgument("control with non-horizontal support".into()));
        }
        Ok(horizontal.iter().map(|&i| u[i]).collect())
    };
    let velocity = |p: &[f64], u: &[f64]| -> Vec<f64> {
        let frame = group.frame(p);
        (0..p.len()).map(|r| horizontal.iter().zip(u).map(|(&c, ui)| frame[(r, c)] * ui).sum()).collect()
    };
    let mut points = Vec::with_capacity(control.times.len());
    let mut p = start.to_vec();
    points.push(p.clone());
    for i in 0..control.segments() {
        let (a, b) = control.segment(i);
        let (ua, ub) = (lift(a)?, lift(b)?);
        let um: Vec<f64> = ua.iter().zip(&ub).map(|(x, y)| 0.5 * (x + y)).collect();
        let h = control.times[i + 1] - control.times[i];
        let shift = |k: &[f64], s: f64| -> Vec<f64> { p.iter().zip(k).map(|(x, d)| x + s * d).collect() };
        let k1 = velocity(&p, &ua);
        let k2 = velocity(&shift(&k1, 0.5 * h), &um);
        let k3 = velocity(&shift(&k2, 0.5 * h), &um);
        let k4 = velocity(&shift(&k3, h), &ub);
        for j in 0..p.len() {
            p[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        points.push(p.clone());
    }
    let mut curve = HorizontalCurve::new(group.clone(), control.times.clone(), points)?;
    curve.control = Some(control.clone());
    Ok(curve)
}

/// A vector-valued 1-form written in coordinates.
pub trait OneForm: Sync {
    /// Dimension of the coordinate space.
    fn dim(&self) -> usize;
    /// Number of value components.
    fn components(&self) -> usize;
    /// Coefficients at `x`, `out[v * dim + i]` multiplying `dx_i`.
    fn eval_into(&self, x: &[f64], out: &mut [f64]);
}

impl OneForm for PotentialForm {
    fn dim(&self) -> usize {
        self.extension().base_dim()
    }

    fn components(&self) -> usize {
        self.extension().fiber_dim()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        self.coefficients_into(x, out)
    }
}

/// Left-invariant 1-form on a group, expanded through the coframe.
#[derive(Clone, Debug)]
pub struct LeftInvariantForm {
    group: CarnotGroup,
    form: InvariantForm,
}

impl LeftInvariantForm {
    pub fn new(group: CarnotGroup, form: InvariantForm) -> Result<Self> {
        if form.degree() != 1 {
            return Err(Error::InvalidArgument(format!("line integral needs a 1-form, got degree {}", form.degree())));
        }
        if form.dim() != group.dim() {
            return Err(Error::Structure("form and group dimensions differ".into()));
        }
        Ok(Self { group, form })
    }
}

impl OneForm for LeftInvariantForm {
    fn dim(&self) -> usize {
        self.group.dim()
    }

    fn components(&self) -> usize {
        self.form.components()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.group.dim();
        let co = self.group.coframe(x).expect("frame of a nilpotent group is invertible");
        for v in 0..self.form.components() {
            for i in 0..n {
                out[v * n + i] = (0..n).map(|j| self.form.get(v, &[j]) * co[(j, i)]).sum();
            }
        }
    }
}

/// 1-form given by a closure returning coordinate coefficients.
pub struct CoordinateForm<F> {
    dim: usize,
    components: usize,
    coefficients: F,
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> CoordinateForm<F> {
    pub fn new(dim: usize, components: usize, coefficients: F) -> Self {
        Self { dim, components, coefficients }
    }
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> OneForm for CoordinateForm<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn components(&self) -> usize {
        self.components
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (self.coefficients)(x, out)
    }
}

/// Midpoint-rule integral of `form` along the polyline of `points`.
pub fn polyline_integral(form: &(impl OneForm + ?Sized), points: &[Vec<f64>]) -> Vec<f64> {
    let (n, m) = (form.dim(), form.components());
    let mut total = vec![0.0; m];
    let mut coeffs = vec![0.0; n * m];
    let mut mid = vec![0.0; n];
    for w in points.windows(2) {
        for i in 0..n {
            mid[i] = 0.5 * (w[0][i] + w[1][i]);
        }
        form.eval_into(&mid, &mut coeffs);
        for (v, t) in total.iter_mut().enumerate() {
            *t += (0..n).map(|i| coeffs[v * n + i] * (w[1][i] - w[0][i])).sum::<f64>();
        }
    }
    total
}

/// Integral of a 1-form along a sampled curve, midpoint rule per segment.
pub fn line_integral(form: &(impl OneForm + ?Sized), curve: &HorizontalCurve) -> Result<Vec<f64>> {
    if form.dim() != curve.group.dim() {
        return Err(Error::Structure("form and curve dimensions differ".into()));
    }
    Ok(polyline_integral(form, &curve.points))
}

/// Horizontal lift of a base curve through `start`: base coordinates are
/// copied and the fiber accumulates the integral of the potential.
pub fn horizontal_lift(base: &HorizontalCurve, start: &[f64], ext: &CentralExtension) -> Result<HorizontalCurve> {
    if base.group != *ext.base() {
        return Err(Error::Structure("curve does not live in the extension's base".into()));
    }
    if start.len() != ext.extended().dim() {
        return Err(Error::Structure("start point dimension differs from the extended group".into()));
    }
    let projected = ext.project(start);
    let gap = projected.iter().zip(base.start()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if gap > 1e-9 {
        return Err(Error::InvalidArgument(format!("start projects {gap:e} away from the curve's first point")));
    }
    let alpha = ext.potential_form()?;
    let (nb, nf) = (ext.base_dim(), ext.fiber_dim());
    let mut fiber = ext.fiber_part(start);
    let mut coeffs = vec![0.0; nb * nf];
    let mut mid = vec![0.0; nb];
    let mut points = Vec::with_capacity(base.points.len());
    points.push(ext.join(&base.points[0], &fiber));
    for w in base.points.windows(2) {
        for i in 0..nb {
            mid[i] = 0.5 * (w[0][i] + w[1][i]);
        }
        alpha.coefficients_into(&mid, &mut coeffs);
        for (v, f) in fiber.iter_mut().enumerate() {
            *f += (0..nb).map(|i| coeffs[v * nb + i] * (w[1][i] - w[0][i])).sum::<f64>();
        }
        points.push(ext.join(&w[1], &fiber));
    }
    HorizontalCurve::new(ext.extended().clone(), base.times.clone(), points)
}
